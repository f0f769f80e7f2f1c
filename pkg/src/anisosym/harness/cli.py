"""Command line interface: anisosym <subcommand> --config PATH [--out DIR]."""

from __future__ import annotations

import argparse
import logging
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from .. import verify
from ..barrier import barrier_solution, barrier_wellposed
from ..young import BarrierUndefined, PowerSum, YoungError, klimov_symmetrize, log_grid, power_sum_klimov
from .config import ConfigError, load_config
from .runner import EXIT_FAIL, EXIT_OK, _norm, _norm_label, _Pipeline, run, sweep, write_csv, write_json

log = logging.getLogger("anisosym")


def _value(text: str):
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(Fraction(text))
    except (ValueError, ZeroDivisionError):
        return text


def _load(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.raw["seed"] = args.seed
    out = Path(args.out).resolve() if args.out else cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    return cfg, out


def cmd_symmetrize(args) -> int:
    """Symmetrized Young function and its exponent data."""
    cfg, out = _load(args)
    phi = cfg.phi()
    phi_d = klimov_symmetrize(phi)
    s = log_grid(1e-4, 1e4, 161)
    conj = phi_d.conjugate()
    write_csv(out / "phi_diamond.csv", ["s", "phi_diamond", "phi_diamond_conjugate"], zip(s, phi_d(s), conj(s)))
    summary = {"config_hash": cfg.hash, "kind": cfg.phi_cfg["kind"], "N": phi.dim}
    if isinstance(phi, PowerSum):
        pb, Lam = power_sum_klimov(phi.p, phi.lam, phi.dim)
        summary.update({"Lambda": Lam, "pbar": pb})
    write_json(out / "symmetrize.json", summary)
    print(f"wrote {out / 'phi_diamond.csv'}")
    return EXIT_OK


def cmd_solve(args) -> int:
    """Solve the discrete problem and write u and the descent trace."""
    cfg, out = _load(args)
    pl = _Pipeline(cfg, out)
    sol = pl.solution
    write_json(out / "solve.json", {"config_hash": cfg.hash, "iterations": sol.iterations, "eps": sol.eps,
                                    "stalled": sol.stalled, "notes": pl.prob.notes})
    print(f"solved in {sol.iterations} iterations ({sol.runtime:.2f} s); wrote {out / 'u.csv'}")
    return EXIT_OK


def cmd_barrier(args) -> int:
    """Data-only barrier: f* and the decreasing rearrangement of Phi_conj(C2 g), no solve."""
    cfg, out = _load(args)
    pl = _Pipeline(cfg, out)
    c = cfg.constants
    zero = pl.grid.with_values(np.zeros(pl.grid.n))
    spec = verify.comparison_barrier(pl.prob, zero, float(c["C1"]), float(c["C2"]), conservative=True)
    wp = barrier_wellposed(spec)
    v = barrier_solution(spec)
    write_csv(out / "barrier.csv", ["s", "v"], zip(v.s, v(v.s)))
    write_json(out / "barrier.json", {"config_hash": cfg.hash, "wellposed": wp.to_dict(), "v0": float(v(0.0)),
                                      "measure": spec.measure})
    print(f"barrier v(0) = {float(v(0.0)):.6g}; wrote {out / 'barrier.csv'}")
    return EXIT_OK if wp.ok else EXIT_FAIL


def cmd_verify(args) -> int:
    """Solve and run every configured check."""
    cfg, out = _load(args)
    res = run(cfg, out)
    print(f"{res.report.get('run_id', '')}: {res.report.get('status')} (exit {res.exit_code})")
    for c in res.report.get("checks", []):
        print(f"  [{c['kind']}] {'pass' if c.get('pass') else c.get('status', 'fail')}")
    return res.exit_code


def cmd_sweep(args) -> int:
    """Repeat verify over one config axis."""
    cfg, out = _load(args)
    values = None if args.values is None else [_value(v) for v in args.values.split(",") if v.strip()]
    if values is not None and not values:
        raise ConfigError("sweep values list is empty")
    code, rows = sweep(cfg, args.axis, values, out, args.workers)
    for r in rows:
        print(f"  {r['value']!r:>12}  C={r['empirical_C']}  pass={r['pass']}  exit={r['exit']}")
    return code


def cmd_norms(args) -> int:
    """Evaluate the configured norms of f, g and u."""
    cfg, out = _load(args)
    if not cfg.norms:
        raise ConfigError("config declares no [[norms]] entries")
    pl = _Pipeline(cfg, out)
    res = {_norm_label(n): _norm(pl, n) for n in cfg.norms}
    write_json(out / "norms.json", {"config_hash": cfg.hash, "norms": res})
    for k, v in res.items():
        print(f"  {k} = {v:.10g}")
    return EXIT_OK


COMMANDS = {"symmetrize": cmd_symmetrize, "barrier": cmd_barrier, "solve": cmd_solve, "verify": cmd_verify,
            "sweep": cmd_sweep, "norms": cmd_norms}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="anisosym", description="Symmetrization experiments on grid problems.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        sp = sub.add_parser(name, help=(fn.__doc__ or "").split("\n")[0] or None)
        sp.add_argument("--config", required=True, help="experiment TOML file")
        sp.add_argument("--out", help="output directory (default: output.dir of the config)")
        sp.add_argument("--workers", type=int, default=1, help="parallel jobs for sweeps")
        sp.add_argument("--seed", type=int, help="seed for random test fields")
        if name == "sweep":
            sp.add_argument("--axis", help="dotted config key, e.g. domain.h or phi.p[1]")
            sp.add_argument("--values", help="comma separated values, fractions allowed (1/32)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (BarrierUndefined, YoungError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
