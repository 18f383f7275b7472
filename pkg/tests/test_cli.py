import csv
import json
import math
import subprocess
import sys
from pathlib import Path

import pytest

from chshlab.cli import (
    CHAIN_COLUMNS,
    CHSH_COLUMNS,
    COINCIDENCE_COLUMNS,
    EVOLVE_COLUMNS,
    UsageError,
    main,
    parse_and_validate,
)


def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class TestParsing:
    def test_bounds_example(self):
        cfg = parse_and_validate(["bounds", "--regime", "local", "--restarts", "50", "--seed", "7"])
        assert cfg.command == "bounds"
        assert cfg.parameters["regime"] == "local"
        assert cfg.parameters["restarts"] == 50
        assert cfg.seed == 7

    def test_chain_example(self):
        cfg = parse_and_validate(["chain", "--angles", "0,45,90", "--model", "malus-threshold", "--n", "100000"])
        assert cfg.parameters["angles"] == [0.0, 45.0, 90.0]
        assert cfg.parameters["n"] == 100_000
        assert cfg.format == "csv"

    def test_epr_example(self):
        argv = ["epr-scan", "--a1", "0", "--a2", "45", "--b1", "22.5", "--b2", "-22.5", "--n", "1000000"]
        cfg = parse_and_validate(argv)
        assert [cfg.parameters[k] for k in ("a1", "a2", "b1", "b2")] == [0, 45, 22.5, -22.5]
        assert cfg.seed == 0

    def test_defaults(self):
        cfg = parse_and_validate(["epr-scan"])
        assert cfg.output_path == Path("epr-scan.csv")
        assert parse_and_validate(["bounds", "--regime", "nonlocal"]).parameters["restarts"] == 200

    @pytest.mark.parametrize(
        "argv,field",
        [
            (["teleport"], "teleport"),
            (["bounds"], "regime"),
            (["epr-scan", "--n", "ten"], "n"),
            (["epr-scan", "--n", "0"], "n"),
            (["chain", "--angles", ""], "angles"),
            (["bounds", "--regime", "quantum"], "regime"),
            (["epr-scan", "--seed", "-1"], "seed"),
            (["epr-scan", "--model", "nope"], "model"),
        ],
    )
    def test_diagnostics_name_field(self, argv, field):
        with pytest.raises(UsageError, match=field):
            parse_and_validate(argv)

    def test_config_file_and_override(self, tmp_path):
        cfg_file = tmp_path / "run.json"
        cfg_file.write_text(json.dumps({"command": "chain", "angles": "0,30", "n": 500, "seed": 3}))
        cfg = parse_and_validate(["--config", str(cfg_file)])
        assert cfg.parameters["angles"] == [0.0, 30.0]
        assert cfg.seed == 3
        cfg = parse_and_validate(["chain", "--config", str(cfg_file), "--n", "900"])
        assert cfg.parameters["n"] == 900

    def test_config_key_spelling(self, tmp_path):
        cfg_file = tmp_path / "b.json"
        cfg_file.write_text(json.dumps({"regime": "local", "max_evals": 10}))
        assert parse_and_validate(["bounds", "--config", str(cfg_file)]).parameters["max-evals"] == 10

    def test_config_unknown_key(self, tmp_path):
        cfg_file = tmp_path / "bad.json"
        cfg_file.write_text(json.dumps({"command": "phase", "colour": "red"}))
        with pytest.raises(UsageError, match="colour"):
            parse_and_validate(["--config", str(cfg_file)])

    def test_config_command_conflict(self, tmp_path):
        cfg_file = tmp_path / "c.json"
        cfg_file.write_text(json.dumps({"command": "phase"}))
        with pytest.raises(UsageError):
            parse_and_validate(["bounds", "--config", str(cfg_file)])


class TestRun:
    def test_bounds_classical(self, tmp_path):
        out = tmp_path / "b.json"
        assert main(["bounds", "--regime", "classical", "-o", str(out)]) == 0
        cert = json.loads(out.read_text())
        assert cert["achieved"] == 2.0
        assert cert["limit"] == 2.0
        manifest = json.loads(Path(str(out) + ".manifest.json").read_text())
        for key in ("command", "parameters", "seed", "version", "wall_time_s"):
            assert key in manifest

    def test_epr_scan_quantum(self, tmp_path):
        out = tmp_path / "e.csv"
        assert main(["epr-scan", "--n", "200000", "--seed", "1", "-o", str(out)]) == 0
        rows = _read_csv(out)
        assert tuple(rows[0]) == COINCIDENCE_COLUMNS
        assert len(rows) == 4
        (chsh,) = _read_csv(str(out) + ".chsh.csv")
        assert tuple(chsh) == CHSH_COLUMNS
        s, se = float(chsh["S"]), float(chsh["S_stderr"])
        assert abs(s - 2 * math.sqrt(2)) <= 3 * se
        signs = (1, 1, 1, -1)
        assert s == pytest.approx(sum(g * float(r["E"]) for g, r in zip(signs, rows)), abs=1e-12)

    def test_lhv_runs(self, tmp_path):
        out = tmp_path / "l.csv"
        assert main(["lhv-run", "--n", "20000", "--runs", "3", "-o", str(out)]) == 0
        assert len(_read_csv(out)) == 12
        assert [r["run"] for r in _read_csv(str(out) + ".chsh.csv")] == ["0", "1", "2"]

    def test_chain(self, tmp_path):
        out = tmp_path / "c.csv"
        assert main(["chain", "--angles", "0,45,90", "--model", "malus", "-o", str(out)]) == 0
        rows = _read_csv(out)
        assert tuple(rows[0]) == CHAIN_COLUMNS
        assert float(rows[-1]["pass_fraction"]) == pytest.approx(0.125)

    @pytest.mark.parametrize("system", ["shift", "qubit"])
    def test_evolve(self, tmp_path, system):
        out = tmp_path / "v.csv"
        assert main(["evolve", "--system", system, "--size", "4", "-o", str(out)]) == 0
        rows = _read_csv(out)
        assert tuple(rows[0]) == EVOLVE_COLUMNS
        if system == "shift":
            plus = [float(r["p_plus_norm"]) for r in rows]
            assert plus == sorted(plus)
        else:
            assert float(rows[0]["pure_value"]) == pytest.approx(1.0)
            assert rows[0]["p_minus_norm"] == ""

    def test_phase(self, tmp_path):
        out = tmp_path / "p.json"
        assert main(["phase", "--n-max", "3", "-o", str(out)]) == 0
        assert json.loads(out.read_text())["defect_support"] == [0]

    def test_json_format(self, tmp_path):
        out = tmp_path / "c.json"
        assert main(["chain", "--angles", "0,90", "--model", "malus", "--format", "json", "-o", str(out)]) == 0
        assert json.loads(out.read_text())["stages"][1]["pass_fraction"] == pytest.approx(0.0, abs=1e-15)

    def test_usage_error_exit_code(self, capsys):
        assert main(["bounds"]) == 1
        assert "regime" in capsys.readouterr().err

    def test_runtime_error_exit_code(self, tmp_path, capsys):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        assert main(["phase", "-o", str(blocker / "sub" / "p.json")]) == 2
        assert capsys.readouterr().err

    def test_rerun_byte_identical(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        main(["lhv-run", "--model", "malus-threshold", "--n", "150000", "--seed", "5", "-o", str(a)])
        main(["lhv-run", "--model", "malus-threshold", "--n", "150000", "--seed", "5", "--workers", "3", "-o", str(b)])
        assert a.read_bytes() == b.read_bytes()
        assert Path(str(a) + ".chsh.csv").read_bytes() == Path(str(b) + ".chsh.csv").read_bytes()


def test_module_entry_point(tmp_path):
    out = tmp_path / "p.json"
    proc = subprocess.run(
        [sys.executable, "-m", "chshlab", "phase", "-o", str(out)], capture_output=True, text=True
    )
    assert proc.returncode == 0, proc.stderr
    assert out.exists()
