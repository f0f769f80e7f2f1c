"""Experiment configuration: TOML ingestion, validation and canonical hashing.

Layout (all tables optional except phi, domain and data)::

    name = "torsion"
    phi = { kind = "power_sum", p = [2, 2], lambda = [1, 1] }

    [domain]
    shape = "disk"          # or "box"
    h = 0.015625
    radius = 1.0            # disk
    lo = [0, 0]             # box
    hi = [1, 1]

    [data]
    f = "1"                 # expression, number, or { file = "f.csv" }
    g = ["0.3", "-0.2*x1"]

    [constants]
    C1 = 1.0
    C2 = 1.0
    conservative = false

    [solver]
    method = "newton"
    tol = 1e-10

    [[checks]]
    kind = "comparison"
    threshold = 1.05

    [[norms]]
    target = "u"
    kind = "lorentz"
    p = 2
    q = 1

    [output]
    dir = "runs/torsion"
"""

from __future__ import annotations

import copy
import hashlib
import math
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .. import young
from ..pde import SolveOptions
from ..rearrange import GridFunction, ball_grid, box_grid, lattice_box
from .expr import ExpressionError, compile_expression, evaluate

MIN_CELLS = 16

CHECK_KINDS = {
    "solution_error": {"exact": None, "tol": 5e-3},
    "comparison": {"threshold": None},
    "gradient_estimate": {"slack": 0.05},
    "polya_szego": {"slack": 0.05, "random_fields": 0, "modes": 6},
    "regularity": {"case": None, "m": None, "sigma": None, "r": None, "s": None, "t": 4.0},
    "distributional": {"m": None, "r": None, "gamma": None, "levels": [2, 4, 8, 16], "tol": 1.5},
    "scale_covariance": {"factors": [0.25, 4.0], "threshold": None},
}
NORM_KINDS = ("lorentz", "lorentz_zygmund", "orlicz", "orlicz_lorentz")
PHI_KINDS = ("power_sum", "log_perturbed", "two_dim_coupled", "radial", "tabulated")


class ConfigError(ValueError):
    pass


def _num(x, what):
    if isinstance(x, str) and x.lower() in ("inf", "infinity"):
        return math.inf
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ConfigError(f"{what} must be a number, got {x!r}")
    return float(x)


@dataclass
class ExperimentConfig:
    """Validated configuration; `raw` is the canonical dictionary that is hashed."""

    raw: dict
    base_dir: Path = field(default_factory=Path.cwd)

    # -- derived views ----------------------------------------------------

    @property
    def name(self) -> str:
        return self.raw.get("name", "run")

    @property
    def dim(self) -> int:
        return int(self.raw["domain"].get("dim", 2))

    @property
    def phi_cfg(self) -> dict:
        return self.raw["phi"]

    @property
    def domain(self) -> dict:
        return self.raw["domain"]

    @property
    def data(self) -> dict:
        return self.raw["data"]

    @property
    def constants(self) -> dict:
        c = {"C1": 1.0, "C2": 1.0, "conservative": False}
        c.update(self.raw.get("constants", {}))
        return c

    @property
    def checks(self) -> list:
        return self.raw.get("checks", [])

    @property
    def norms(self) -> list:
        return self.raw.get("norms", [])

    @property
    def seed(self) -> int:
        return int(self.raw.get("seed", 0))

    @property
    def output_dir(self) -> Path:
        d = self.raw.get("output", {}).get("dir", f"runs/{self.name}")
        return (self.base_dir / d).resolve()

    @property
    def isotropic(self) -> bool:
        ph = self.phi_cfg
        return ph["kind"] == "power_sum" and len(set(ph["p"])) == 1 and len(set(ph.get("lambda", [1]))) == 1

    def solver_options(self) -> SolveOptions:
        return SolveOptions(**self.raw.get("solver", {}))

    def dumps(self) -> str:
        return dumps(self.raw)

    @property
    def hash(self) -> str:
        return config_hash(self.raw)

    def path(self, rel) -> Path:
        return (self.base_dir / rel).resolve()

    # -- builders ---------------------------------------------------------

    def phi(self) -> young.YoungSpec:
        return build_phi(self.phi_cfg, self.base_dir)

    def grid(self) -> GridFunction:
        d = self.domain
        h = float(d["h"])
        if d["shape"] == "disk":
            return ball_grid(h, float(d.get("radius", 1.0)), self.dim, d.get("center"))
        if d.get("layout", "nodes") == "nodes":
            return lattice_box(d["lo"], d["hi"], h)
        return box_grid(d["lo"], d["hi"], h)

    def center(self):
        d = self.domain
        if d["shape"] == "disk":
            return np.asarray(d.get("center", [0.0] * self.dim), dtype=float)
        return (np.asarray(d["lo"], dtype=float) + np.asarray(d["hi"], dtype=float)) / 2

    def data_field(self, spec, grid: GridFunction) -> np.ndarray:
        if isinstance(spec, dict):
            g = GridFunction.from_csv(self.path(spec["file"]))
            if g.values.shape != grid.values.shape:
                raise ConfigError(f"data file {spec['file']} has shape {g.values.shape}, grid is {grid.values.shape}")
            return g.values
        return evaluate(spec, grid.centers(), self.center())

    def f(self, grid: GridFunction) -> np.ndarray:
        return self.data_field(self.data.get("f", 0.0), grid)

    def g(self, grid: GridFunction):
        gs = self.data.get("g")
        if gs is None:
            return None
        return tuple(self.data_field(x, grid) for x in gs)


# ---------------------------------------------------------------------------
# serialization


def _canon(x):
    if isinstance(x, dict):
        return {k: _canon(x[k]) for k in sorted(x)}
    if isinstance(x, (list, tuple)):
        return [_canon(v) for v in x]
    if isinstance(x, bool) or isinstance(x, str):
        return x
    if isinstance(x, int):
        return x
    if isinstance(x, float):
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    raise ConfigError(f"unsupported config value {x!r}")


def dumps(raw: dict) -> str:
    """Canonical TOML text: sorted keys, fixed float formatting."""
    return tomli_w.dumps(_canon(raw))


def config_hash(raw: dict) -> str:
    return hashlib.sha256(dumps(raw).encode()).hexdigest()


_POS = re.compile(r"at line (\d+), column (\d+)")


def parse(text: str, source: str = "<config>") -> dict:
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = _POS.search(str(exc))
        where = f"line {m.group(1)}, column {m.group(2)}" if m else "unknown position"
        raise ConfigError(f"{source}: parse error at {where}: {exc}") from None


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return from_dict(parse(text, str(path)), path.parent)


def from_dict(raw: dict, base_dir=None) -> ExperimentConfig:
    raw = copy.deepcopy(raw)
    base = Path.cwd() if base_dir is None else Path(base_dir)
    validate(raw, base)
    return ExperimentConfig(_canon(raw), base)


# ---------------------------------------------------------------------------
# validation


def build_phi(ph: dict, base_dir: Path) -> young.YoungSpec:
    kind = ph.get("kind")
    try:
        if kind == "power_sum":
            return young.PowerSum(ph["p"], ph.get("lambda", [1.0] * len(ph["p"])))
        if kind == "log_perturbed":
            return young.LogPerturbedSum(ph["p"], ph["alpha"], ph.get("c", math.e))
        if kind == "two_dim_coupled":
            return young.TwoDimCoupled(ph["alpha"], ph["beta"], ph.get("delta", 0.0), ph.get("c", math.e))
        if kind == "radial":
            A = young.OneDimYoung.from_power(ph.get("coeff", 1.0), ph["exponent"])
            return young.RadialOneDim(A, int(ph.get("dim", 2)))
        if kind == "tabulated":
            return young.Tabulated([young.OneDimYoung.load(base_dir / f) for f in ph["files"]])
    except KeyError as exc:
        raise ConfigError(f"phi kind {kind!r} is missing key {exc.args[0]!r}") from None
    except young.YoungError as exc:
        raise ConfigError(f"phi: {exc}") from None
    raise ConfigError(f"phi kind must be one of {', '.join(PHI_KINDS)}; got {kind!r}")


def _validate_domain(d: dict):
    shape = d.get("shape")
    if shape not in ("disk", "box"):
        raise ConfigError(f"domain.shape must be 'disk' or 'box'; got {shape!r}")
    if "h" not in d:
        raise ConfigError("domain.h is required")
    h = _num(d["h"], "domain.h")
    if h <= 0:
        raise ConfigError("domain.h must be positive")
    dim = int(d.get("dim", 2))
    if dim < 2:
        raise ConfigError("domain.dim must be at least 2")
    if shape == "disk":
        R = _num(d.get("radius", 1.0), "domain.radius")
        if "center" in d and len(d["center"]) != dim:
            raise ConfigError(f"domain.center needs {dim} entries")
        cells = 2 * R / h - 2
    else:
        lo, hi = d.get("lo"), d.get("hi")
        if lo is None or hi is None or len(lo) != dim or len(hi) != dim:
            raise ConfigError(f"domain.lo and domain.hi need {dim} entries each")
        if d.get("layout", "nodes") not in ("nodes", "cells"):
            raise ConfigError("domain.layout must be 'nodes' or 'cells'")
        cells = min((b - a) for a, b in zip(lo, hi)) / h - 1
    if cells + 1e-9 < MIN_CELLS:
        raise ConfigError(f"resolution h={h} gives fewer than {MIN_CELLS} interior cells per axis")


def _validate_field(x, dim, what, base: Path):
    if isinstance(x, dict):
        if set(x) != {"file"}:
            raise ConfigError(f"{what}: file reference must be {{ file = \"path\" }}")
        if not (base / x["file"]).is_file():
            raise ConfigError(f"{what}: referenced file {x['file']} does not exist")
        return
    if isinstance(x, (int, float)) and not isinstance(x, bool):
        return
    if not isinstance(x, str):
        raise ConfigError(f"{what} must be an expression string, a number or a file reference")
    try:
        compile_expression(x, dim)
    except ExpressionError as exc:
        raise ConfigError(f"{what}: {exc}") from None


def validate(raw: dict, base: Path):
    for key in ("phi", "domain", "data"):
        if key not in raw:
            raise ConfigError(f"missing required entry {key!r}")
    _validate_domain(raw["domain"])
    dim = int(raw["domain"].get("dim", 2))
    ph = raw["phi"]
    if not isinstance(ph, dict):
        raise ConfigError("phi must be an inline table")
    if ph.get("kind") == "tabulated":
        for f in ph.get("files", []):
            if not (base / f).is_file():
                raise ConfigError(f"phi: referenced file {f} does not exist")
    spec = build_phi(ph, base)
    if spec.dim != dim:
        raise ConfigError(f"phi has dimension {spec.dim} but the domain has dimension {dim}")
    data = raw["data"]
    _validate_field(data.get("f", 0.0), dim, "data.f", base)
    if "g" in data:
        if not isinstance(data["g"], list) or len(data["g"]) != dim:
            raise ConfigError(f"data.g needs {dim} components")
        for i, x in enumerate(data["g"]):
            _validate_field(x, dim, f"data.g[{i}]", base)
    for k, v in raw.get("constants", {}).items():
        if k in ("C1", "C2"):
            if _num(v, f"constants.{k}") <= 0:
                raise ConfigError(f"constants.{k} must be positive")
        elif k != "conservative":
            raise ConfigError(f"unknown constant {k!r}")
    try:
        SolveOptions(**raw.get("solver", {}))
    except TypeError as exc:
        raise ConfigError(f"solver: {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"solver: {exc}") from None
    for i, c in enumerate(raw.get("checks", [])):
        kind = c.get("kind")
        if kind not in CHECK_KINDS:
            raise ConfigError(f"checks[{i}].kind must be one of {', '.join(CHECK_KINDS)}; got {kind!r}")
        extra = set(c) - set(CHECK_KINDS[kind]) - {"kind"}
        if extra:
            raise ConfigError(f"checks[{i}] ({kind}): unknown keys {sorted(extra)}")
        if kind == "solution_error":
            if "exact" not in c:
                raise ConfigError(f"checks[{i}] (solution_error) needs an exact expression")
            _validate_field(c["exact"], dim, f"checks[{i}].exact", base)
        if kind == "regularity":
            if c.get("case") not in ("i", "ii", "iii"):
                raise ConfigError(f"checks[{i}].case must be 'i', 'ii' or 'iii'")
            for k in ("m", "sigma"):
                if k not in c:
                    raise ConfigError(f"checks[{i}] (regularity) needs {k}")
        if kind == "distributional":
            for k in ("m", "r", "gamma"):
                if k not in c:
                    raise ConfigError(f"checks[{i}] (distributional) needs {k}")
    needs_solve = any(c["kind"] != "polya_szego" for c in raw.get("checks", []))
    if needs_solve and ph.get("kind") != "power_sum":
        raise ConfigError("the grid solver handles phi kind 'power_sum' only")
    for i, n in enumerate(raw.get("norms", [])):
        if n.get("kind") not in NORM_KINDS:
            raise ConfigError(f"norms[{i}].kind must be one of {', '.join(NORM_KINDS)}")
        t = n.get("target", "u")
        if not (t in ("u", "f") or re.fullmatch(r"g[1-9]", t)):
            raise ConfigError(f"norms[{i}].target must be 'u', 'f' or 'g1'..'gN'; got {t!r}")
    sw = raw.get("sweep")
    if sw is not None and ("axis" not in sw or "values" not in sw):
        raise ConfigError("sweep needs axis and values")


# ---------------------------------------------------------------------------
# dotted keys for sweeps


_KEY = re.compile(r"([A-Za-z_][A-Za-z0-9_]*)(?:\[(\d+)\])?")


def set_key(raw: dict, axis: str, value) -> dict:
    """Copy of `raw` with the scalar at `axis` (e.g. "domain.h", "phi.p[1]") replaced."""
    out = copy.deepcopy(raw)
    node = out
    parts = axis.split(".")
    for k, part in enumerate(parts):
        m = _KEY.fullmatch(part)
        if not m:
            raise ConfigError(f"bad sweep axis {axis!r}")
        name, idx = m.group(1), m.group(2)
        last = k == len(parts) - 1
        if name not in node:
            raise ConfigError(f"sweep axis {axis!r}: no key {name!r}")
        if idx is None:
            if last:
                if isinstance(node[name], (dict, list)):
                    raise ConfigError(f"sweep axis {axis!r} does not name a scalar")
                node[name] = value
            else:
                node = node[name]
        else:
            seq = node[name]
            i = int(idx)
            if not isinstance(seq, list) or i >= len(seq):
                raise ConfigError(f"sweep axis {axis!r}: index {i} out of range")
            if last:
                seq[i] = value
            else:
                node = seq[i]
    return out
