"""Batch command line front-end.

Usage::

    chshlab bounds --regime local --restarts 50 --seed 7
    chshlab epr-scan --a1 0 --a2 45 --b1 22.5 --b2 -22.5 --n 1000000
    chshlab chain --angles 0,45,90 --model malus-threshold --n 100000
    chshlab evolve --system shift --size 8
    chshlab phase --n-max 6
    chshlab --config run.json

Angles on the command line and in config files are in degrees.  A config
file is one JSON object whose keys are the long flag names (``"max-evals"``
or ``"max_evals"``), plus an optional ``"command"``; flags given on the
command line override it.  Every run writes its data file and a
``<output>.manifest.json`` next to it.  In CSV mode ``epr-scan`` and
``lhv-run`` also write ``<output>.chsh.csv`` holding S per run, so the
coincidence table keeps exactly its documented columns.

Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .bell import (
    CommutationRegime,
    classical_max,
    maximize_local_quantum,
    maximize_nonlocal,
    regime_sample_sweep,
)
from .epr import (
    MALUS_CHAIN,
    QUANTUM,
    chain_transmission,
    get_model,
    run_chsh,
)
from .evolution import SuperpositionSpec, build_shift_model, compare_pure_vs_mixed
from .operators import hermitian_eigensystem, sigma_x, sigma_z
from .phase import phase_report
from .seeding import derive_seed

COMMANDS = ("bounds", "epr-scan", "lhv-run", "chain", "evolve", "phase")

COINCIDENCE_COLUMNS = ("alpha_deg", "beta_deg", "n_pp", "n_pa", "n_ap", "n_aa", "E", "stderr")
CHAIN_COLUMNS = ("stage", "angle_deg", "pass_fraction", "analytic_reference")
# per-run CHSH value, written next to the coincidence table
CHSH_COLUMNS = ("run", "seed", "S", "S_stderr")
CHSH_SUFFIX = ".chsh.csv"
EVOLVE_COLUMNS = ("t", "observable_name", "pure_value", "mixed_value", "p_minus_norm", "p_plus_norm")


class UsageError(Exception):
    pass


# -- value converters -------------------------------------------------------


def _int(name, lo=None):
    def conv(value):
        if isinstance(value, bool):
            raise UsageError(f"{name}: expected an integer, got {value!r}")
        try:
            out = int(value) if not isinstance(value, float) or value.is_integer() else None
        except (TypeError, ValueError):
            out = None
        if out is None:
            raise UsageError(f"{name}: expected an integer, got {value!r}")
        if lo is not None and out < lo:
            raise UsageError(f"{name}: must be >= {lo}, got {out}")
        return out

    return conv


def _float(name):
    def conv(value):
        try:
            out = float(value)
        except (TypeError, ValueError):
            raise UsageError(f"{name}: expected a number, got {value!r}") from None
        if not math.isfinite(out):
            raise UsageError(f"{name}: must be finite")
        return out

    return conv


def _float_list(name):
    def conv(value):
        items = value.split(",") if isinstance(value, str) else value
        if not isinstance(items, (list, tuple)):
            raise UsageError(f"{name}: expected a comma-separated list of numbers")
        out = [_float(name)(x) for x in items if not (isinstance(x, str) and not x.strip())]
        if not out:
            raise UsageError(f"{name}: list must not be empty")
        return out

    return conv


def _choice(name, options):
    def conv(value):
        value = str(value)
        if value not in options:
            raise UsageError(f"{name}: expected one of {', '.join(options)}, got {value!r}")
        return value

    return conv


def _model(name, allow_quantum, allow_malus=False):
    def conv(value):
        value = str(value)
        if value == QUANTUM and allow_quantum or value == MALUS_CHAIN and allow_malus:
            return value
        if value in (QUANTUM, MALUS_CHAIN):
            raise UsageError(f"{name}: model {value!r} not allowed for this command")
        try:
            get_model(value)
        except LookupError as exc:
            raise UsageError(f"{name}: {exc.args[0]}") from None
        return value

    return conv


def _seed(value):
    out = _int("seed", 0)(value)
    if out >= 1 << 64:
        raise UsageError("seed: must fit in 64 bits")
    return out


def _opt_float(name):
    conv = _float(name)
    return lambda v: None if v is None else conv(v)


# name -> (converter, default); a default of REQUIRED must be supplied
REQUIRED = object()

_COMMON = {
    "seed": (_seed, 0),
    "output": (str, None),
    "format": (_choice("format", ("csv", "json")), None),
}
_MC = {"workers": (_int("workers", 1), 1)}
_CHSH_ANGLES = {
    "a1": (_float("a1"), 0.0),
    "a2": (_float("a2"), 45.0),
    "b1": (_float("b1"), 22.5),
    "b2": (_float("b2"), -22.5),
}

SCHEMAS = {
    "bounds": {
        "regime": (_choice("regime", [r.value for r in CommutationRegime]), REQUIRED),
        "restarts": (_int("restarts", 1), None),
        "dim": (_choice("dim", ("4", "8")), "4"),
        "max-evals": (_int("max-evals", 1), 50_000),
        "samples": (_int("samples", 0), 0),
    },
    "epr-scan": {
        **_CHSH_ANGLES,
        "n": (_int("n", 1), 100_000),
        "model": (_model("model", allow_quantum=True), QUANTUM),
        **_MC,
    },
    "lhv-run": {
        **_CHSH_ANGLES,
        "n": (_int("n", 1), 100_000),
        "model": (_model("model", allow_quantum=False), "sign"),
        "runs": (_int("runs", 1), 1),
        **_MC,
    },
    "chain": {
        "angles": (_float_list("angles"), REQUIRED),
        "model": (_model("model", allow_quantum=False, allow_malus=True), "malus-threshold"),
        "n": (_int("n", 1), 100_000),
        "source": (_opt_float("source"), None),
        **_MC,
    },
    "evolve": {
        "system": (_choice("system", ("shift", "qubit")), "shift"),
        "size": (_int("size", 2), 8),
        "start": (lambda v: None if v is None else _int("start")(v), None),
        "t-max": (_float("t-max"), 2 * math.pi),
        "points": (_int("points", 1), 16),
    },
    "phase": {"n-max": (_int("n-max", 1), 4)},
}

DEFAULT_FORMAT = {"bounds": "json", "phase": "json"}


@dataclass
class ExperimentConfig:
    command: str
    parameters: dict
    seed: int = 0
    output_path: Path = field(default_factory=lambda: Path("out.csv"))
    format: str = "csv"


# -- parsing ----------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="chshlab", description="CHSH bounds, EPR simulation, evolution toys.")
    parser.add_argument("--version", action="version", version=f"chshlab {__version__}")
    parser.add_argument("--config", default=argparse.SUPPRESS, help="JSON config file")
    sub = parser.add_subparsers(dest="command")
    for command, schema in SCHEMAS.items():
        p = sub.add_parser(command)
        p.add_argument("--config", default=argparse.SUPPRESS, help="JSON config file")
        for key in list(schema) + list(_COMMON):
            p.add_argument(f"--{key}", dest=key, default=argparse.SUPPRESS)
        p.add_argument("-o", dest="output", default=argparse.SUPPRESS)
    return parser


def _normalize_key(key: str) -> str:
    return str(key).replace("_", "-")


def _load_config(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise UsageError(f"config: cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"config: {path} is not valid JSON ({exc.msg})") from None
    if not isinstance(data, dict):
        raise UsageError("config: top level must be a JSON object")
    return {_normalize_key(k): v for k, v in data.items()}


def parse_and_validate(argv: list[str]) -> ExperimentConfig:
    """Turn argv (and an optional JSON config) into a validated config."""
    ns = vars(_build_parser().parse_args(argv))
    command = ns.pop("command", None)
    config_path = ns.pop("config", None)
    file_values = _load_config(config_path) if config_path else {}
    file_command = file_values.pop("command", None)
    if command is None:
        command = file_command
    elif file_command is not None and file_command != command:
        raise UsageError(f"config: command {file_command!r} conflicts with {command!r}")
    if command is None:
        raise UsageError(f"no command given; expected one of {', '.join(COMMANDS)}")
    if command not in SCHEMAS:
        raise UsageError(f"unknown command {command!r}")

    schema = {**SCHEMAS[command], **_COMMON}
    unknown = sorted(set(file_values) - set(schema))
    if unknown:
        raise UsageError(f"config: unknown key(s) for {command}: {', '.join(unknown)}")
    merged = {**file_values, **{_normalize_key(k): v for k, v in ns.items()}}

    values = {}
    for key, (conv, default) in schema.items():
        if key in merged:
            values[key] = conv(merged[key])
        elif default is REQUIRED:
            raise UsageError(f"missing required parameter --{key}")
        else:
            values[key] = default

    fmt = values.pop("format") or DEFAULT_FORMAT.get(command, "csv")
    seed = values.pop("seed")
    output = values.pop("output") or f"{command}.{fmt}"
    if command == "bounds":
        values["dim"] = int(values["dim"])
        if values["restarts"] is None:
            values["restarts"] = 200 if values["regime"] == "nonlocal" else 20
    return ExperimentConfig(command, values, seed, Path(output), fmt)


# -- writers ----------------------------------------------------------------


def _csv_text(columns, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow(["" if v is None else repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, default=_json_default) + "\n"


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _rows_as_records(columns, rows) -> list[dict]:
    return [dict(zip(columns, row)) for row in rows]


# -- commands ---------------------------------------------------------------


def _cmd_bounds(p: dict, seed: int, fmt: str):
    regime = CommutationRegime.parse(p["regime"])
    if regime is CommutationRegime.CLASSICAL:
        cert = classical_max()
    elif regime is CommutationRegime.LOCAL:
        cert = maximize_local_quantum(p["restarts"], seed, p["max-evals"])
    else:
        cert = maximize_nonlocal(p["dim"], p["restarts"], seed, p["max-evals"])
    out = cert.to_dict()
    out["seed"] = seed
    if p["samples"]:
        values = regime_sample_sweep(regime, p["samples"], derive_seed(seed, 1 << 32))
        out["sweep"] = {"samples": p["samples"], "max": max(values), "min": min(values)}
    summary = {"achieved": out["achieved"], "limit": out["limit"]}
    if fmt == "json":
        return _json_text(out), summary
    cols = ("regime", "achieved", "limit", "method", "seed", "evaluations")
    return _csv_text(cols, [[out[c] for c in cols]]), summary


def _coincidence_rows(counts):
    rows = []
    for c in counts:
        e = c.correlation()
        rows.append(
            [math.degrees(c.alpha), math.degrees(c.beta), c.n_pp, c.n_pa, c.n_ap, c.n_aa, e.value, e.std_error]
        )
    return rows


def _chsh_angles(p):
    return [math.radians(p[k]) for k in ("a1", "a2", "b1", "b2")]


def _cmd_epr_scan(p, seed, fmt):
    counts, s = run_chsh(p["model"], _chsh_angles(p), p["n"], seed, workers=p["workers"])
    rows = _coincidence_rows(counts)
    summary = {"S": s.value, "S_stderr": s.std_error}
    if fmt == "json":
        return _json_text({"rows": _rows_as_records(COINCIDENCE_COLUMNS, rows), **summary}), summary
    extra = {CHSH_SUFFIX: _csv_text(CHSH_COLUMNS, [[0, seed, s.value, s.std_error]])}
    return _csv_text(COINCIDENCE_COLUMNS, rows), summary, extra


def _cmd_lhv_run(p, seed, fmt):
    rows, runs = [], []
    for r in range(p["runs"]):
        run_seed = seed if p["runs"] == 1 else derive_seed(seed, r)
        counts, s = run_chsh(p["model"], _chsh_angles(p), p["n"], run_seed, workers=p["workers"])
        rows.extend(_coincidence_rows(counts))
        runs.append({"run": r, "seed": run_seed, "S": s.value, "S_stderr": s.std_error})
    summary = {"runs": runs}
    if fmt == "json":
        return _json_text({"rows": _rows_as_records(COINCIDENCE_COLUMNS, rows), **summary}), summary
    extra = {CHSH_SUFFIX: _csv_text(CHSH_COLUMNS, [[r[c] for c in ("run", "seed", "S", "S_stderr")] for r in runs])}
    return _csv_text(COINCIDENCE_COLUMNS, rows), summary, extra


def _cmd_chain(p, seed, fmt):
    angles = [math.radians(a) for a in p["angles"]]
    source = None if p["source"] is None else math.radians(p["source"])
    stages = chain_transmission(angles, p["model"], p["n"], seed, source_angle=source, workers=p["workers"])
    rows = [[s.stage, math.degrees(s.angle), s.pass_fraction, s.analytic_reference] for s in stages]
    summary = {"final_fraction": rows[-1][2], "final_reference": rows[-1][3]}
    if fmt == "json":
        return _json_text({"stages": _rows_as_records(CHAIN_COLUMNS, rows)}), summary
    return _csv_text(CHAIN_COLUMNS, rows), summary


def _cmd_evolve(p, seed, fmt):
    rows = []
    if p["system"] == "shift":
        model = build_shift_model(p["size"], p["start"])
        es = hermitian_eigensystem(model.system.hamiltonian)
        coeffs = es.eigenvectors.conj().T @ model.system.state.amplitudes
        spec = SuperpositionSpec(coeffs, es)
        x = model.position()
        for t in range(model.horizon + 1):
            cmp = compare_pure_vs_mixed(spec, x, float(t))
            p_minus, p_plus = model.subspaces.occupancies(spec.state(float(t)))
            rows.append([float(t), "position", cmp.pure, cmp.mixed, p_minus, p_plus])
    else:
        spec = SuperpositionSpec.from_hamiltonian(sigma_z(), np.array([1, 1]) / math.sqrt(2))
        obs = sigma_x()
        n = p["points"]
        for k in range(n + 1):
            t = p["t-max"] * k / n
            cmp = compare_pure_vs_mixed(spec, obs, t)
            rows.append([t, "sigma_x", cmp.pure, cmp.mixed, None, None])
    summary = {"rows": len(rows)}
    if fmt == "json":
        return _json_text({"series": _rows_as_records(EVOLVE_COLUMNS, rows)}), summary
    return _csv_text(EVOLVE_COLUMNS, rows), summary


def _cmd_phase(p, seed, fmt):
    report = phase_report(p["n-max"])
    summary = {"defect_support": report["defect_support"]}
    if fmt == "json":
        return _json_text(report), summary
    d = report["doubled"]
    cols = ("operator", "dim", "left_defect", "right_defect", "defect_support")
    rows = [
        ["ladder", report["n_max"] + 1, report["left_defect"], report["right_defect"],
         " ".join(map(str, report["defect_support"]))],
        ["doubled", d["dim"], d["left_defect"], d["right_defect"],
         " ".join(map(str, d["defect_support"]))],
    ]
    return _csv_text(cols, rows), summary


_DISPATCH = {
    "bounds": _cmd_bounds,
    "epr-scan": _cmd_epr_scan,
    "lhv-run": _cmd_lhv_run,
    "chain": _cmd_chain,
    "evolve": _cmd_evolve,
    "phase": _cmd_phase,
}


def run(config: ExperimentConfig) -> int:
    """Execute a validated config; write data file and manifest."""
    start = time.perf_counter()
    text, summary, *rest = _DISPATCH[config.command](config.parameters, config.seed, config.format)
    out = config.output_path
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text, encoding="utf-8")
    extras = rest[0] if rest else {}
    for suffix, body in extras.items():
        Path(str(out) + suffix).write_text(body, encoding="utf-8")
    manifest = {
        "command": config.command,
        "parameters": config.parameters,
        "seed": config.seed,
        "format": config.format,
        "output": str(out),
        "extra_outputs": [str(out) + suffix for suffix in extras],
        "version": __version__,
        "summary": summary,
        "wall_time_s": time.perf_counter() - start,
    }
    Path(str(out) + ".manifest.json").write_text(_json_text(manifest), encoding="utf-8")
    return 0


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        config = parse_and_validate(argv)
    except UsageError as exc:
        print(f"chshlab: error: {exc}", file=sys.stderr)
        return 1
    try:
        return run(config)
    except OSError as exc:
        print(f"chshlab: I/O error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # module errors surface verbatim
        print(f"chshlab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
