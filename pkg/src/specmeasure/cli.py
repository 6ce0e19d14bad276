"""Command-line front end.

Configuration is one JSON document (``--config``); flags override its
fields. Exit codes: 0 ok, 1 invariant violation, 2 config error,
3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .eigen import EigenConvergenceError
from .family import SpectralFamily, cdf, tail_report
from .harness import (ConvergenceStudy, family_sequence, oracle_from_dict,
                      run_cdf_convergence, theorem_limits_check)
from .io import atomic_write, config_hash, dump_json, format_csv
from .operators import DomainProbe, OperatorError, OperatorSpec, build_truncation
from .resolvent import (EndpointError, QuadratureError, ResolventError, SolveBreakdownError,
                        operational_calculus_residual, stone_limit_study)
from .verify import run_verify

log = logging.getLogger("specmeasure")

EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3
COMMANDS = ("decompose", "cdf", "stone", "resolvent-check", "tails", "converge", "verify")

DEFAULT_EPSILONS = [0.1 / 2 ** k for k in range(11)]


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------- config

def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _set_path(cfg: dict, dotted: str, value) -> None:
    keys = dotted.split(".")
    node = cfg
    for k in keys[:-1]:
        node = node.setdefault(k, {})
        if not isinstance(node, dict):
            raise ConfigError(f"cannot set {dotted}: {k} is not an object")
    node[keys[-1]] = value


def _probe_from_flag(text: str) -> dict:
    """``e3`` -> basis probe, ``power:1.5`` -> power probe, else JSON."""
    if text.startswith("e") and text[1:].isdigit():
        return {"kind": "basis", "index": int(text[1:])}
    if text.startswith("power:"):
        return {"kind": "power", "exponent": float(text.split(":", 1)[1])}
    value = _parse_value(text)
    if not isinstance(value, dict):
        raise ConfigError(f"cannot parse probe {text!r}")
    return value


def load_config(args: argparse.Namespace) -> dict:
    cfg: dict[str, Any] = {}
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            cfg = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(cfg, dict):
            raise ConfigError("config must be a JSON object")
    section = args.command.replace("-", "_")
    overrides = {
        "seed": args.seed,
        "threads": args.threads,
        "N": args.n,
        "output.path": args.output,
        "output.format": args.format,
        "operator.kind": args.kind,
        f"{section}.a": getattr(args, "a", None),
        f"{section}.b": getattr(args, "b", None),
        f"{section}.epsilons": getattr(args, "epsilons", None),
        f"{section}.eta": getattr(args, "eta", None),
        f"{section}.Ns": getattr(args, "ns", None),
        f"{section}.Ks": getattr(args, "ks", None),
        f"{section}.tolerance_scale": getattr(args, "tolerance_scale", None),
    }
    for key, value in overrides.items():
        if value is not None:
            _set_path(cfg, key, value)
    if args.probe is not None:
        cfg["probe"] = _probe_from_flag(args.probe)
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        _set_path(cfg, key.replace("-", "_"), _parse_value(value))
    cfg.setdefault("seed", 0)
    cfg.setdefault("output", {})
    cfg["output"].setdefault("format", "csv")
    if cfg["output"]["format"] not in ("csv", "json"):
        raise ConfigError(f"output format must be csv or json, got {cfg['output']['format']!r}")
    return cfg


def _operator(cfg) -> OperatorSpec:
    if "operator" not in cfg:
        raise ConfigError("config needs an 'operator' block (or --kind)")
    return OperatorSpec.from_dict(cfg["operator"])


def _probe(cfg) -> DomainProbe:
    return DomainProbe.from_dict(cfg.get("probe", {"kind": "basis", "index": 1}))


def _dim(cfg, spec: OperatorSpec) -> int:
    N = cfg.get("N")
    if N is None:
        N = spec.max_dim()
    if N is None or int(N) != N or N < 1:
        raise ConfigError(f"N must be a positive integer, got {N!r}")
    return int(N)


def _grid(block) -> np.ndarray:
    if isinstance(block, dict):
        try:
            return np.linspace(float(block["start"]), float(block["stop"]), int(block["num"]))
        except KeyError as exc:
            raise ConfigError(f"grid block missing {exc}") from None
    if isinstance(block, list) and block:
        return np.asarray(block, dtype=float)
    raise ConfigError("grid must be a list or {start, stop, num}")


def _provenance(cfg, command: str) -> dict:
    hashed = {k: v for k, v in cfg.items() if k not in ("output", "threads")}
    return {"tool": "specmeasure", "version": __version__, "command": command,
            "config_sha256": config_hash(hashed)}


def _emit(cfg, command: str, header, rows, record: dict) -> None:
    prov = _provenance(cfg, command)
    if cfg["output"]["format"] == "csv":
        comments = [f"{k}={v}" for k, v in sorted(prov.items())]
        text = format_csv(header, rows, comments)
    else:
        text = dump_json({"provenance": prov, **record})
    path = cfg["output"].get("path")
    if path:
        atomic_write(path, text)
    else:
        sys.stdout.write(text)


# -------------------------------------------------------------- commands

def cmd_decompose(cfg) -> int:
    spec = _operator(cfg)
    N = _dim(cfg, spec)
    fam = SpectralFamily.from_operator(build_truncation(spec, N))
    measure = cdf(fam, _probe(cfg).vector(N))
    record = {"cdf": measure.to_json_record(),
              "residual_bound": fam.decomposition.residual_bound}
    _emit(cfg, "decompose", ["lambda", "mass", "cumulative"], measure.to_rows(), record)
    return EXIT_OK


def cmd_cdf(cfg) -> int:
    spec = _operator(cfg)
    N = _dim(cfg, spec)
    block = cfg.get("cdf", {})
    grid = _grid(block.get("grid", {"start": -3, "stop": 3, "num": 61}))
    delta = float(block.get("delta", 0.0))
    fam = SpectralFamily.from_operator(build_truncation(spec, N))
    measure = cdf(fam, _probe(cfg).vector(N))
    values = measure(grid + delta)
    rows = list(zip(grid.tolist(), values.tolist()))
    _emit(cfg, "cdf", ["lambda", "cdf"], rows,
          {"delta": delta, "points": [{"lambda": l, "cdf": v} for l, v in rows]})
    return EXIT_OK


def cmd_stone(cfg) -> int:
    spec = _operator(cfg)
    N = _dim(cfg, spec)
    block = cfg.get("stone", {})
    try:
        a, b = float(block["a"]), float(block["b"])
    except KeyError as exc:
        raise ConfigError(f"stone block needs {exc}") from None
    T = build_truncation(spec, N)
    x = _probe(cfg).vector(N)
    study = stone_limit_study(
        T, a, b, x, block.get("epsilons", DEFAULT_EPSILONS),
        eta=float(block.get("eta", 1e-3)),
        refinement_tol=float(block.get("refinement_tol", 1e-10)),
    )
    record = {"a": a, "b": b, "endpoint_distance": study.endpoint_distance,
              "rows": [{"epsilon": e, "error": r, "ratio": q} for e, r, q in study.rows()],
              "rate_ok": study.rate_ok, "monotone": study.monotone}
    _emit(cfg, "stone", ["epsilon", "error", "ratio"], study.rows(), record)
    if len(study.epsilons) >= 4 and not study.rate_ok:
        log.error("error ratios are not O(epsilon): %s", study.ratios[-3:])
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_resolvent_check(cfg) -> int:
    spec = _operator(cfg)
    N = _dim(cfg, spec)
    block = cfg.get("resolvent_check", {})
    rng = np.random.default_rng(cfg["seed"])
    T = build_truncation(spec, N)
    fam = SpectralFamily.from_operator(T)
    if "shifts" in block:
        shifts = [complex(re, im) for re, im in block["shifts"]]
    else:
        lo, hi = fam.eigenvalues[0] - 1, fam.eigenvalues[-1] + 1
        shifts = [complex(rng.uniform(lo, hi), 10 ** rng.uniform(-1, 1) * rng.choice([-1, 1]))
                  for _ in range(int(block.get("samples", 20)))]
    eps = np.finfo(float).eps
    scale = float(block.get("tolerance_scale", 1.0))
    rows, ok = [], True
    for z in shifts:
        x = rng.standard_normal(N)
        x /= np.linalg.norm(x)
        r = operational_calculus_residual(fam, T, z, x)
        bound = scale * 100 * N * float(np.spacing(1.0 / abs(z.imag)))
        ok &= r <= bound
        rows.append((z.real, z.imag, r, bound, r <= bound))
    _emit(cfg, "resolvent-check", ["re_z", "im_z", "residual", "bound", "passed"], rows,
          {"rows": [dict(zip(["re_z", "im_z", "residual", "bound", "passed"], r)) for r in rows]})
    return EXIT_OK if ok else EXIT_VIOLATION


def cmd_tails(cfg) -> int:
    spec = _operator(cfg)
    N = _dim(cfg, spec)
    block = cfg.get("tails", {})
    fam = SpectralFamily.from_operator(build_truncation(spec, N))
    x = _probe(cfg).vector(N)
    Ks = block.get("Ks") or (fam.spectral_radius * np.array([0.25, 0.5, 0.9, 1.0, 1.1])).tolist()
    reports = [tail_report(fam, x, float(K)) for K in Ks if K > 0]
    header = ["K", "lhs", "left_moment", "right_moment", "slack", "satisfied"]
    rows = [(t.K, t.lhs, t.left_moment, t.right_moment, t.slack, t.bound_satisfied) for t in reports]
    _emit(cfg, "tails", header, rows, {"rows": [dict(zip(header, r)) for r in rows]})
    return EXIT_OK if all(t.bound_satisfied for t in reports) else EXIT_VIOLATION


def cmd_converge(cfg) -> int:
    spec = _operator(cfg)
    block = cfg.get("converge", {})
    Ns = block.get("Ns") or ([cfg["N"]] if "N" in cfg else None)
    if not Ns:
        raise ConfigError("converge needs Ns (or N)")
    study = ConvergenceStudy(
        spec, _probe(cfg), Ns, _grid(block.get("grid", {"start": -3, "stop": 3, "num": 61})),
        block.get("deltas", [0.0]), oracle_from_dict(block.get("oracle")),
        float(block.get("atom_threshold", 0.05)),
    )
    fams = family_sequence(spec, study.Ns, int(cfg.get("threads") or 1))
    report = run_cdf_convergence(study, fams)
    record = {"cdf": report.to_json_record()}
    ok = True
    if block.get("Ks"):
        limits = theorem_limits_check(study, block["Ks"], fams)
        record["limits"] = limits.to_json_record()
        ok &= limits.monotone_in_K and limits.tails_ok
    tol = block.get("max_sup_distance")
    if tol is not None and report.sup_distance:
        worst = report.sup_distance[(study.Ns[-1], study.deltas[-1])]
        record["max_sup_distance"] = {"tolerance": tol, "measured": worst}
        ok &= worst <= tol
    _emit(cfg, "converge", ["N", "lambda", "delta", "cdf", "oracle", "abs_error"],
          report.rows(), record)
    return EXIT_OK if ok else EXIT_VIOLATION


def cmd_verify(cfg) -> int:
    spec = _operator(cfg)
    N = _dim(cfg, spec)
    block = cfg.get("verify", {})
    summary = run_verify(
        spec, N, int(cfg["seed"]), _probe(cfg),
        samples=int(block.get("samples", 20)),
        partitions=int(block.get("partitions", 100)),
        tolerance_scale=float(block.get("tolerance_scale", 1.0)),
    )
    record = summary.to_record()
    prov = _provenance(cfg, "verify")
    text = dump_json({"provenance": prov, **record})
    path = cfg["output"].get("path")
    if path:
        atomic_write(path, text)
    else:
        sys.stdout.write(text)
    for c in summary.checks:
        if not c.passed:
            log.error("%s: %d violation(s), worst %.3g > %.3g", c.name, len(c.violations),
                      c.worst_measured, c.worst_bound)
    return EXIT_OK if summary.passed else EXIT_VIOLATION


HANDLERS = {
    "decompose": cmd_decompose,
    "cdf": cmd_cdf,
    "stone": cmd_stone,
    "resolvent-check": cmd_resolvent_check,
    "tails": cmd_tails,
    "converge": cmd_converge,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--output", help="artifact path (default: stdout)")
    common.add_argument("--format", choices=["csv", "json"])
    common.add_argument("--seed", type=int)
    common.add_argument("--threads", type=int)
    common.add_argument("--kind", help="operator kind")
    common.add_argument("--n", type=int, help="truncation dimension N")
    common.add_argument("--probe", help="e.g. e1, power:1.5, or a JSON rule")
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a dotted config field (value parsed as JSON)")

    parser = argparse.ArgumentParser(prog="specmeasure", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "stone":
            p.add_argument("--a", type=float)
            p.add_argument("--b", type=float)
            p.add_argument("--epsilons", type=_float_list)
            p.add_argument("--eta", type=float)
        if name == "converge":
            p.add_argument("--ns", type=lambda s: [int(v) for v in s.split(",")])
            p.add_argument("--ks", type=_float_list)
        if name == "tails":
            p.add_argument("--ks", type=_float_list)
        if name in ("verify", "resolvent-check"):
            p.add_argument("--tolerance-scale", type=float)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        return HANDLERS[args.command](cfg)
    except (ConfigError, OperatorError, EndpointError, ResolventError) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except (EigenConvergenceError, QuadratureError, SolveBreakdownError) as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL
    except (ValueError, KeyError, TypeError) as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
