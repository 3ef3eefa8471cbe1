import json
import subprocess
import sys

import pytest

from regcompare import __version__
from regcompare.cli import build_parser, main, resolve_options


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


class TestOptions:
    def parse(self, argv):
        return resolve_options(build_parser().parse_args(argv))

    def test_defaults(self):
        opts = self.parse(["compare"])
        assert opts["folds"] == 10 and opts["trees"] == 100 and opts["feature_subset"] == "all"

    def test_config_then_flag_precedence(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"trees": 7, "alpha-enter": 0.1, "seed": 3}))
        opts = self.parse(["compare", "--config", str(cfg), "--seed", "5"])
        assert opts["trees"] == 7 and opts["alpha_enter"] == 0.1 and opts["seed"] == 5

    def test_config_lists(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"predictors": "d97,d98", "transform": {"d98": "off"},
                                   "feature_subset": "2"}))
        opts = self.parse(["compare", "--config", str(cfg)])
        assert opts["predictors"] == ["d97", "d98"]
        assert dict(opts["transform"]) == {"d98": "off"}
        assert opts["feature_subset"] == 2

    @pytest.mark.parametrize("argv", [
        ["compare", "--feature-subset", "half"],
        ["compare", "--folds", "x"],
        ["compare", "--transform", "d98"],
        ["nope"],
    ])
    def test_parse_errors(self, argv):
        with pytest.raises(SystemExit) as info:
            build_parser().parse_args(argv)
        assert info.value.code == 2


class TestMain:
    def test_version(self, capsys):
        with pytest.raises(SystemExit) as info:
            main(["--version"])
        assert info.value.code == 0
        assert __version__ in capsys.readouterr().out

    @pytest.mark.parametrize("argv", [
        ["compare", "--folds", "1"],
        ["compare", "--test-fraction", "1.5"],
        ["compare", "--trees", "0"],
        ["compare", "--rows", "5"],
        ["compare", "--alpha-enter", "2"],
    ])
    def test_invalid_values_exit_2(self, argv, tmp_path, capsys):
        with pytest.raises(SystemExit) as info:
            main(argv + ["--out", str(tmp_path)])
        assert info.value.code == 2

    def test_bad_config(self, tmp_path, capsys):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"colour": "red"}))
        with pytest.raises(SystemExit) as info:
            main(["compare", "--config", str(cfg)])
        assert info.value.code == 2
        assert "unknown config key" in capsys.readouterr().err

    def test_synth_roundtrip(self, tmp_path, capsys):
        code, _, _ = run(["synth", "--seed", "4", "--rows", "30", "--out", str(tmp_path)], capsys)
        assert code == 0
        lines = (tmp_path / "synthetic.csv").read_text().splitlines()
        assert lines[0] == "d99,d98,d97,d80" and len(lines) == 31

    def test_profile(self, tmp_path, capsys):
        code, out, _ = run(["profile", "--out", str(tmp_path)], capsys)
        assert code == 0 and "skew" in out.lower()
        assert (tmp_path / "profile.json").is_file()
        assert (tmp_path / "figures" / "histograms_raw.png").is_file()

    def test_transform(self, tmp_path, capsys):
        code, _, _ = run(["transform", "--no-figures", "--out", str(tmp_path)], capsys)
        assert code == 0
        params = json.loads((tmp_path / "transform.json").read_text())
        assert params
        assert not (tmp_path / "figures").exists()

    def test_fit_mlr(self, tmp_path, capsys):
        code, out, _ = run(["fit-mlr", "--model", "raw", "--no-figures", "--out", str(tmp_path)],
                           capsys)
        assert code == 0 and "Regression equation" in out
        assert (tmp_path / "mlr_raw.json").is_file()
        assert not (tmp_path / "mlr_transformed.json").exists()

    def test_fit_tree(self, tmp_path, capsys):
        code, _, _ = run(["fit-tree", "--max-depth", "3", "--no-figures", "--out", str(tmp_path)],
                         capsys)
        assert code == 0
        data = json.loads((tmp_path / "decision_tree.json").read_text())
        assert json.dumps(data).count("threshold") <= 7

    def test_fit_forest_saves_model(self, tmp_path, capsys):
        code, _, _ = run(["fit-forest", "--trees", "5", "--save-model", "--no-figures",
                          "--out", str(tmp_path)], capsys)
        assert code == 0
        model = json.loads((tmp_path / "rfr_model.json").read_text())
        assert len(model["trees"]) == 5
        assert (tmp_path / "importance_rfr.csv").is_file()

    def test_compare_deterministic(self, tmp_path, capsys):
        a, b = tmp_path / "a", tmp_path / "b"
        for d in (a, b):
            assert run(["compare", "--seed", "2", "--trees", "20", "--no-figures", "--out", str(d)],
                       capsys)[0] == 0
        files = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
        assert files
        for rel in files:
            assert (a / rel).read_bytes() == (b / rel).read_bytes()

    def test_stage_failure_exit_1(self, tmp_path, capsys):
        code, _, err = run(["compare", "--input", str(tmp_path / "missing.csv"),
                            "--out", str(tmp_path / "o")], capsys)
        assert code == 1
        assert "stage 'load' failed" in err

    def test_unknown_column_exit_1(self, tmp_path, capsys):
        code, _, err = run(["fit-tree", "--response", "nope", "--out", str(tmp_path)], capsys)
        assert code == 1 and "stage 'columns'" in err

    def test_unwritable_out_exit_1(self, tmp_path, capsys):
        blocker = tmp_path / "f"
        blocker.write_text("")
        code, _, err = run(["synth", "--out", str(blocker / "x")], capsys)
        assert code == 1 and "error" in err

    def test_module_entry_point(self, tmp_path):
        proc = subprocess.run([sys.executable, "-m", "regcompare", "synth", "--rows", "12",
                               "--out", str(tmp_path)], capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        assert (tmp_path / "synthetic.csv").is_file()
