from __future__ import annotations

import json

import pytest

from fibmon.cli import EXIT_CONFIG, EXIT_FAIL, EXIT_OK, EXIT_RUNTIME, main


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


class TestSimulate:
    def test_writes_outputs(self, tmp_path, capsys):
        code, out, _ = run(["simulate", "--protocol", "clifford", "--L", "8", "--depth", "21", "--p-x", "0.5",
                            "--p-zz", "0.6", "--n-trajectories", "3", "--out", str(tmp_path)], capsys)
        assert code == EXIT_OK
        assert "backend stabilizer" in out
        assert {p.name for p in tmp_path.iterdir()} >= {"manifest.json", "records.jsonl", "summary.csv"}

    def test_config_file_with_override(self, tmp_path, capsys):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"protocol": "born", "L": 6, "depth": 13, "tau_x": 0.3, "tau_zz": 0.5}))
        code, out, _ = run(["simulate", "--config", str(cfg), "--L", "8", "--cuts", "all"], capsys)
        assert code == EXIT_OK
        assert out.count("cut=") == 7

    def test_missing_strength(self, capsys):
        code, _, err = run(["simulate", "--protocol", "born"], capsys)
        assert code == EXIT_CONFIG
        assert "error" in err

    def test_unknown_config_key(self, tmp_path, capsys):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"tau_x": 0.3, "tau_zz": 0.5, "temperature": 1}))
        assert run(["simulate", "--config", str(cfg)], capsys)[0] == EXIT_CONFIG

    def test_size_error_is_config_error(self, capsys):
        code, _, _ = run(["simulate", "--protocol", "born", "--L", "30", "--tau-x", "0.1", "--tau-zz", "0.1",
                          "--backend", "oracle"], capsys)
        assert code == EXIT_CONFIG

    def test_io_error_is_runtime_error(self, tmp_path, capsys):
        (tmp_path / "records.jsonl").mkdir()
        code, _, _ = run(["simulate", "--protocol", "clifford", "--L", "4", "--depth", "3", "--p-x", "1",
                          "--p-zz", "1", "--out", str(tmp_path)], capsys)
        assert code == EXIT_RUNTIME


class TestOtherCommands:
    def test_sweep(self, capsys):
        code, out, _ = run(["sweep", "--protocol", "percolation", "--L", "8", "--depth", "21", "--p-x", "0.5",
                            "--p-zz", "0.5", "--axis", "p_zz=0.2:0.8:3"], capsys)
        assert code == EXIT_OK
        assert len(out.strip().splitlines()) == 4

    def test_bad_axis(self, capsys):
        code, _, _ = run(["sweep", "--protocol", "percolation", "--p-x", "0.5", "--p-zz", "0.5", "--axis", "L=4,8"],
                         capsys)
        assert code == EXIT_CONFIG

    def test_analyze(self, tmp_path, capsys):
        run(["simulate", "--protocol", "clifford", "--L", "16", "--depth", "34", "--p-x", "0.5", "--p-zz", "0.67",
             "--n-trajectories", "4", "--cuts", "all", "--final-only-sampling", "true", "--record-outcomes", "true",
             "--out", str(tmp_path)], capsys)
        code, out, _ = run(["analyze", str(tmp_path)], capsys)
        assert code == EXIT_OK
        assert "c_ent=" in out and "P(repeat)" in out

    def test_analyze_missing(self, tmp_path, capsys):
        assert run(["analyze", str(tmp_path / "nope")], capsys)[0] == EXIT_CONFIG

    def test_fourier_formula(self, capsys):
        code, out, _ = run(["fourier", "--peaks", "3"], capsys)
        assert code == EXIT_OK
        assert len(out.strip().splitlines()) == 5

    def test_percolation_line(self, capsys):
        code, out, _ = run(["percolation", "--line", "0.5"], capsys)
        assert code == EXIT_OK and "p_zz=0.674220" in out

    def test_percolation_grid(self, capsys):
        code, out, _ = run(["percolation", "--L", "8", "--depth", "21", "--p-x", "0.5", "--p-zz", "0.5",
                            "--n-trajectories", "10", "--with-reference", "true", "--p-zz-grid", "0.3", "0.9"], capsys)
        assert code == EXIT_OK and len(out.strip().splitlines()) == 3

    def test_reproduce_pass_and_fail(self, tmp_path, capsys):
        assert run(["reproduce", "gap-line"], capsys)[0] == EXIT_OK
        code, out, _ = run(["reproduce", "2", "--json", str(tmp_path / "r.json")], capsys)
        assert code == EXIT_FAIL
        assert json.loads((tmp_path / "r.json").read_text())[0]["criterion"] == 2

    def test_reproduce_unknown(self, capsys):
        assert run(["reproduce", "fig9z"], capsys)[0] == EXIT_CONFIG

    def test_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main(["simulate", "--L", "many"])
        assert exc.value.code == 2
