"""Pipeline execution: solve, symmetrize, build the barrier, verify, write artifacts.

Exit codes: 0 all declared checks pass, 1 a check fails or a numerical step
fails (or the config is invalid), 2 a check was refused because its inputs
violate the hypotheses of the estimate.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import verify
from ..barrier import barrier_solution, barrier_wellposed
from ..norms import NormError, NormSpec
from ..pde import DiscreteProblem, SolverError, solve
from ..rearrange import GridFunction, decreasing_rearrangement
from ..young import BarrierUndefined, OneDimYoung, YoungError, klimov_symmetrize
from .config import ConfigError, ExperimentConfig, from_dict, load_config, set_key

log = logging.getLogger("anisosym")

EXIT_OK, EXIT_FAIL, EXIT_REFUSED = 0, 1, 2


# ---------------------------------------------------------------------------
# atomic artifact writes


def atomic_write(path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x


def write_json(path, obj):
    atomic_write(path, json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def write_csv(path, header, rows):
    atomic_write(path, _csv_text(header, rows))


def write_grid(path, u: GridFunction):
    idx = list(np.ndindex(*u.n))
    header = [f"x{k + 1}_index" for k in range(u.dim)] + ["value", "mask"]
    rows = [list(i) + [float(u.masked[i]), int(u.mask[i])] for i in idx]
    box = f"# lo={','.join(repr(x) for x in u.lo)} hi={','.join(repr(x) for x in u.hi)}\n"
    atomic_write(path, box + _csv_text(header, rows))


# ---------------------------------------------------------------------------
# run


@dataclass
class RunResult:
    exit_code: int
    report: dict
    out_dir: Path
    runtime: float
    artifacts: dict = field(default_factory=dict)


class _Refused(Exception):
    pass


def random_fields(grid: GridFunction, count: int, modes: int, seed: int, center=None):
    """Band-limited random fields vanishing on the domain boundary."""
    rng = np.random.default_rng(seed)
    X = grid.centers()
    lo = np.asarray(grid.lo) - np.asarray(grid.h) / 2
    hi = np.asarray(grid.hi) + np.asarray(grid.h) / 2
    out = []
    for _ in range(count):
        k = np.arange(1, modes + 1)
        amp = rng.normal(size=(modes,) * grid.dim) / (1 + np.add.outer(k, k) if grid.dim == 2 else 1)
        u = np.zeros(grid.n)
        for idx in np.ndindex(*amp.shape):
            term = amp[idx]
            for ax, kk in enumerate(idx):
                term = term * np.sin((kk + 1) * np.pi * (X[ax] - lo[ax]) / (hi[ax] - lo[ax]))
            u = u + term
        out.append(grid.with_values(u))
    return out


def _hypothesis_refusals(cfg: ExperimentConfig, prob: DiscreteProblem) -> list:
    out = []
    for i, c in enumerate(cfg.checks):
        if c["kind"] == "regularity":
            bad = verify.regularity_hypotheses(prob.p, prob.dim, c["case"], float(c["m"]), float(c["sigma"]),
                                               c.get("r"), c.get("s"))
        elif c["kind"] == "distributional":
            bad = verify.distributional_hypotheses(prob.p, prob.dim, float(c["m"]), float(c["r"]),
                                                   float(c["gamma"]))
            if any(np.any(g != 0) for g in prob.g):
                bad.append("distributional check requires g = 0")
        else:
            continue
        if bad:
            out.append({"index": i, "kind": c["kind"], "status": "refused", "violations": bad})
    return out


class _Pipeline:
    """Lazily computed pieces shared between checks."""

    def __init__(self, cfg: ExperimentConfig, out: Path):
        self.cfg = cfg
        self.out = out
        self.grid = cfg.grid()
        self.phi = cfg.phi()
        self._prob = None
        self._sol = None
        self._spec = None
        self._v = None
        self.artifacts: dict = {}

    @property
    def prob(self) -> DiscreteProblem:
        if self._prob is None:
            ph = self.cfg.phi_cfg
            lam = ph.get("lambda", [1.0] * len(ph["p"]))
            self._prob = DiscreteProblem(self.grid, ph["p"], lam, self.cfg.f(self.grid), self.cfg.g(self.grid))
        return self._prob

    @property
    def solution(self):
        if self._sol is None:
            self._sol = solve(self.prob, self.cfg.solver_options())
            trace = self.out / "trace.csv"
            write_csv(trace, ["iter", "energy", "residual", "eps"], self._sol.history)
            write_grid(self.out / "u.csv", self._sol.u)
            self.artifacts["trace"] = trace.name
            self.artifacts["solution"] = "u.csv"
        return self._sol

    @property
    def u(self) -> GridFunction:
        return self.solution.u

    @property
    def barrier_spec(self):
        if self._spec is None:
            c = self.cfg.constants
            self._spec = verify.comparison_barrier(self.prob, self.u, float(c["C1"]), float(c["C2"]),
                                                   bool(c["conservative"]))
        return self._spec

    @property
    def v(self):
        if self._v is None:
            self._v = barrier_solution(self.barrier_spec)
            s = self._v.s
            write_csv(self.out / "barrier.csv", ["s", "v"], zip(s, self._v(s)))
            self.artifacts["barrier"] = "barrier.csv"
        return self._v


def _threshold(cfg, c):
    if c.get("threshold") is not None:
        return float(c["threshold"])
    return 1.05 if cfg.isotropic else 1.25


def _check(pl: _Pipeline, c: dict, index: int) -> dict:
    cfg = pl.cfg
    kind = c["kind"]
    if kind == "solution_error":
        exact = cfg.data_field(c["exact"], pl.grid)
        err = float(np.max(np.abs(pl.u.values - exact)[pl.grid.mask]))
        tol = float(c.get("tol", 5e-3))
        return {"max_error": err, "tol": tol, "pass": err <= tol}
    if kind == "comparison":
        rep = verify.comparison_report(pl.u, pl.barrier_spec, _threshold(cfg, c), v=pl.v)
        name = "margins.csv" if index == 0 or "margins" not in pl.artifacts else f"margins_{index}.csv"
        rep.write_margins(pl.out / name)
        pl.artifacts.setdefault("margins", name)
        d = rep.to_dict()
        d["margins_csv"] = name
        d["conservative"] = bool(cfg.constants["conservative"])
        d["barrier_wellposed"] = barrier_wellposed(pl.barrier_spec).to_dict()
        return d
    if kind == "gradient_estimate":
        rep = verify.gradient_estimate_report(pl.u, pl.v, pl.prob.phi, pl.barrier_spec.phi, float(c.get("slack", 0.05)))
        return rep.to_dict()
    if kind == "polya_szego":
        slack = float(c.get("slack", 0.05))
        n = int(c.get("random_fields", 0))
        if n > 0:
            fields = random_fields(pl.grid, n, int(c.get("modes", 6)), cfg.seed)
        else:
            fields = [pl.u]
        phi_d = klimov_symmetrize(pl.phi)
        reps = [verify.polya_szego_check(u, pl.phi, phi_d, slack) for u in fields]
        ratios = [r.ratio for r in reps]
        return {"ratios": ratios, "max_ratio": max(ratios), "slack": slack, "pass": all(r.passed for r in reps)}
    if kind == "regularity":
        rep = verify.regularity_table(pl.u, pl.prob, c["case"], float(c["m"]), float(c["sigma"]),
                                      c.get("r"), c.get("s"), float(c.get("t", 4.0)))
        return rep.to_dict()
    if kind == "distributional":
        rep = verify.distributional_exponents_check(pl.grid, pl.prob.p, pl.prob.lam, float(c["m"]), float(c["r"]),
                                                    float(c["gamma"]), c.get("levels", [2, 4, 8, 16]),
                                                    cfg.center(), float(c.get("tol", 1.5)), cfg.solver_options())
        return rep.to_dict()
    if kind == "scale_covariance":
        thr = _threshold(cfg, c)
        rows = []
        base = verify.comparison_report(pl.u, pl.barrier_spec, thr, v=pl.v)
        rows.append({"t": 1.0, "empirical_C": base.empirical_constant, "pass": base.passed})
        cst = cfg.constants
        for t in c.get("factors", [0.25, 4.0]):
            prob = pl.prob.scaled(float(t), 1.0)
            u = solve(prob, cfg.solver_options()).u
            spec = verify.comparison_barrier(prob, u, float(cst["C1"]), float(cst["C2"]), bool(cst["conservative"]))
            rep = verify.comparison_report(u, spec, thr)
            rows.append({"t": float(t), "empirical_C": rep.empirical_constant, "pass": rep.passed})
        same = len({r["pass"] for r in rows}) == 1
        return {"rows": rows, "pass": same}
    raise ConfigError(f"unknown check kind {kind!r}")


def _norm(pl: _Pipeline, n: dict):
    t = n.get("target", "u")
    if t == "u":
        h = pl.u
    elif t == "f":
        h = pl.grid.with_values(pl.prob.f)
    else:
        h = pl.grid.with_values(pl.prob.g[int(t[1:]) - 1])
    A = None
    if n["kind"] in ("orlicz", "orlicz_lorentz"):
        A = OneDimYoung.from_power(float(n.get("coeff", 1.0)), float(n["exponent"]))
    spec = NormSpec(n["kind"], n.get("p", 2.0), n.get("q", 2.0), float(n.get("alpha", 0.0)),
                    float(n.get("beta", 0.0)), A, pl.grid.dim)
    return spec(decreasing_rearrangement(h), pl.grid.measure)


def _norm_label(n: dict) -> str:
    keys = [k for k in sorted(n) if k not in ("kind", "target")]
    return f"{n.get('target', 'u')}:{n['kind']}(" + ",".join(f"{k}={n[k]}" for k in keys) + ")"


def run(config, out=None) -> RunResult:
    """Execute one configuration and write its artifacts."""
    t0 = time.perf_counter()
    try:
        cfg = config if isinstance(config, ExperimentConfig) else load_config(config)
    except ConfigError as exc:
        log.error("%s", exc)
        return RunResult(EXIT_FAIL, {"status": "invalid config", "error": str(exc)}, Path(out or "."), 0.0)
    out_dir = Path(out).resolve() if out is not None else cfg.output_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    atomic_write(out_dir / "config.toml", cfg.dumps())
    report = {"run_id": f"{cfg.name}-{cfg.hash[:12]}", "config_hash": cfg.hash, "empirical_C": None,
              "pass": False, "margins_csv_path": None, "norms": {}, "conditions": {}, "checks": [], "notes": []}
    code = EXIT_OK
    pl = None
    try:
        pl = _Pipeline(cfg, out_dir)
        needs_problem = bool(cfg.norms) or any(c["kind"] != "polya_szego" or int(c.get("random_fields", 0)) == 0
                                               for c in cfg.checks)
        if needs_problem:
            prob = pl.prob
            report["notes"].extend(prob.notes)
            refused = _hypothesis_refusals(cfg, prob)
            if refused:
                report["checks"] = refused
                report["status"] = "refused"
                raise _Refused()
            report["conditions"] = verify.data_conditions(prob)
            report["solver"] = {"iterations": pl.solution.iterations, "eps": pl.solution.eps,
                                "stalled": pl.solution.stalled}
        ok = True
        for i, c in enumerate(cfg.checks):
            entry = {"index": i, "kind": c["kind"]}
            entry.update(_check(pl, c, i))
            ok &= bool(entry["pass"])
            report["checks"].append(entry)
            if c["kind"] == "comparison" and report["empirical_C"] is None:
                report["empirical_C"] = entry["empirical_C"]
                report["margins_csv_path"] = entry["margins_csv"]
        for n in cfg.norms:
            report["norms"][_norm_label(n)] = _norm(pl, n)
        report["pass"] = ok
        report["status"] = "pass" if ok else "fail"
        code = EXIT_OK if ok else EXIT_FAIL
    except _Refused:
        code = EXIT_REFUSED
    except verify.HypothesisError as exc:
        report["status"] = "refused"
        report["error"] = str(exc)
        code = EXIT_REFUSED
    except (SolverError, BarrierUndefined, NormError, YoungError, verify.ComparisonVacuous,
            FloatingPointError, np.linalg.LinAlgError, ConfigError) as exc:
        report["status"] = "numerical failure" if not isinstance(exc, ConfigError) else "invalid config"
        report["error"] = f"{type(exc).__name__}: {exc}"
        code = EXIT_FAIL
    except ValueError as exc:
        report["status"] = "invalid input"
        report["error"] = str(exc)
        code = EXIT_FAIL
    artifacts = dict(pl.artifacts) if pl is not None else {}
    write_json(out_dir / "report.json", report)
    runtime = time.perf_counter() - t0
    write_json(out_dir / "timing.json", {"runtime_s": runtime})
    log.info("%s: %s (exit %d, %.2f s)", report["run_id"], report.get("status"), code, runtime)
    return RunResult(code, report, out_dir, runtime, artifacts)


# ---------------------------------------------------------------------------
# sweep


def _job(args):
    raw, base_dir, out = args
    try:
        cfg = from_dict(raw, base_dir)
    except ConfigError as exc:
        return EXIT_FAIL, {"status": "invalid config", "error": str(exc), "empirical_C": None, "pass": False}, 0.0
    r = run(cfg, out)
    return r.exit_code, r.report, r.runtime


def _value_label(v) -> str:
    return repr(v).replace("/", "_")


def sweep(config, axis: str | None = None, values=None, out=None, workers: int = 1):
    """Run one job per value of `axis`; returns (exit code, summary rows)."""
    cfg = config if isinstance(config, ExperimentConfig) else load_config(config)
    sw = cfg.raw.get("sweep", {})
    axis = axis or sw.get("axis")
    values = list(sw.get("values", [])) if values is None else list(values)
    if not axis:
        raise ConfigError("sweep needs an axis")
    if not values:
        raise ConfigError("sweep values list is empty")
    out_dir = Path(out).resolve() if out is not None else cfg.output_dir
    base = {k: v for k, v in cfg.raw.items() if k != "sweep"}
    jobs = []
    for k, val in enumerate(values):
        raw = set_key(base, axis, val)
        raw["name"] = f"{cfg.name}-{k:03d}"
        jobs.append((raw, cfg.base_dir, out_dir / f"{k:03d}_{_value_label(val)}"))
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_job, jobs))
    else:
        results = [_job(j) for j in jobs]
    rows = []
    for val, (code, rep, rt) in zip(values, results):
        rows.append({"value": val, "empirical_C": rep.get("empirical_C"), "pass": bool(rep.get("pass")),
                     "runtime": rt, "exit": code, "status": rep.get("status")})
    text = _csv_text(["value", "empirical_C", "pass", "runtime", "exit", "status"],
                     [[r["value"], "" if r["empirical_C"] is None else r["empirical_C"], r["pass"],
                       r["runtime"], r["exit"], r["status"]] for r in rows])
    atomic_write(out_dir / "sweep_summary.csv", text)
    return max(r["exit"] for r in rows), rows
