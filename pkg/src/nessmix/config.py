"""JSON family configurations: validation, defaults and family construction."""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import Any, Optional

from .closed_forms import DirichletFamily, GappedFamily, OrderStatsFamily
from .core import BoundaryPair, DensityFamily, limiting_boundary
from .errors import ConfigError
from .kernels import (
    GeneratingFactor,
    distance_kernel,
    exp_kernel,
    expression_kernel,
    power_kernel,
    scale_only_kernel,
    shift_only_kernel,
)
from .quadrature import QuadratureSpec
from .recursion import RecursionFamily

ENV_QUAD_TOL = "NESSMIX_QUAD_TOL"

CLOSED_KINDS = ("order-stats", "gapped", "dirichlet")
KERNEL_KINDS = ("custom-g", "distance-phi", "scale-only", "shift-only", "exp-kernel", "power")
MARGINAL_KINDS = ("exponential", "dirac")


@dataclass
class FamilyConfig:
    """Resolved configuration; :meth:`to_dict` gives the canonical JSON form."""

    kind: str
    params: Any
    boundary: tuple
    n: int
    box: Optional[tuple] = None
    quad: QuadratureSpec = field(default_factory=QuadratureSpec)
    seed: int = 0
    marginal: str = "exponential"

    @property
    def recursion(self) -> bool:
        return self.kind in KERNEL_KINDS

    def family_json(self):
        if self.kind == "order-stats":
            return "order-stats"
        return {self.kind: self.params}

    def to_dict(self) -> dict:
        out = {
            "family": self.family_json(),
            "boundary": list(self.boundary),
            "n": self.n,
            "quad": {"rel_tol": self.quad.rel_tol, "max_levels": self.quad.max_levels},
            "seed": self.seed,
            "marginal": self.marginal,
        }
        if self.box is not None:
            out["box"] = list(self.box)
        return out

    def boundary_pair(self) -> BoundaryPair:
        return limiting_boundary(*self.boundary)


def _number(value, what, positive=False, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{what} must be a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(f"{what} must be finite")
    if positive and value <= 0:
        raise ConfigError(f"{what} must be positive, got {value}")
    if integer:
        if value != int(value):
            raise ConfigError(f"{what} must be an integer, got {value}")
        return int(value)
    return value


def _parse_family(spec):
    if spec == "order-stats":
        return "order-stats", None
    if not isinstance(spec, dict) or len(spec) != 1:
        raise ConfigError('"family" must be "order-stats" or a single-key object, '
                          f"got {spec!r}")
    (kind, params), = spec.items()
    if kind == "gapped":
        return kind, _number(params, "gap size", positive=True, integer=True)
    if kind in ("dirichlet", "power"):
        return kind, _number(params, f"{kind} shape", positive=True)
    if kind == "exp-kernel":
        return kind, _number(params, "exp-kernel rate", positive=True)
    if kind in ("custom-g", "distance-phi"):
        if not isinstance(params, str):
            raise ConfigError(f"{kind} needs an expression string")
        return kind, params
    if kind == "scale-only":
        if not isinstance(params, dict):
            raise ConfigError("scale-only needs an object {s, u, phi}")
        return kind, {"s": _number(params.get("s", 1.0), "scale-only s"),
                      "u": _number(params.get("u", 0.0), "scale-only u"),
                      "phi": str(params.get("phi", "1"))}
    if kind == "shift-only":
        if not isinstance(params, dict):
            raise ConfigError("shift-only needs an object {v, w, phi}")
        return kind, {"v": _number(params.get("v", 0.0), "shift-only v"),
                      "w": _number(params.get("w", 0.0), "shift-only w"),
                      "phi": str(params.get("phi", "1"))}
    raise ConfigError(f"unknown family {kind!r}")


def resolve(raw: dict, env=None) -> FamilyConfig:
    """Validate a configuration object and fill in defaults."""
    env = os.environ if env is None else env
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a JSON object")
    unknown = set(raw) - {"family", "boundary", "n", "box", "quad", "seed", "marginal"}
    if unknown:
        raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
    if "family" not in raw:
        raise ConfigError('configuration needs a "family"')
    kind, params = _parse_family(raw["family"])
    bd = raw.get("boundary", [0.0, 1.0])
    if not isinstance(bd, (list, tuple)) or len(bd) != 2:
        raise ConfigError('"boundary" must be a pair [a, b]')
    a, b = (_number(v, "boundary value") for v in bd)
    limiting_boundary(a, b)  # validates
    n = _number(raw.get("n", 1), "n", positive=True, integer=True)
    quad_raw = raw.get("quad", {}) or {}
    if not isinstance(quad_raw, dict):
        raise ConfigError('"quad" must be an object')
    rel_tol = _number(quad_raw.get("rel_tol", 1e-9), "quad.rel_tol", positive=True)
    if env.get(ENV_QUAD_TOL):
        try:
            rel_tol = float(env[ENV_QUAD_TOL])
        except ValueError:
            raise ConfigError(f"{ENV_QUAD_TOL} is not a number: {env[ENV_QUAD_TOL]!r}") from None
    max_levels = _number(quad_raw.get("max_levels", 12), "quad.max_levels", positive=True,
                         integer=True)
    quad = QuadratureSpec(rel_tol=rel_tol, max_levels=max_levels)
    box = None
    if kind in KERNEL_KINDS:
        lo, hi = min(a, b), max(a, b)
        box_raw = raw.get("box", [0.5 * lo, 2.0 * hi])
        if not isinstance(box_raw, (list, tuple)) or len(box_raw) != 2:
            raise ConfigError('"box" must be a pair [z1, z2]')
        box = tuple(_number(v, "box value") for v in box_raw)
        if not (0 <= box[0] <= lo and hi <= box[1]):
            raise ConfigError(f"boundary {[a, b]} is not inside the working box {list(box)}")
    seed = _number(raw.get("seed", 0), "seed", integer=True)
    marginal = raw.get("marginal", "exponential")
    if marginal not in MARGINAL_KINDS:
        raise ConfigError(f"marginal must be one of {MARGINAL_KINDS}, got {marginal!r}")
    return FamilyConfig(kind, params, (a, b), n, box, quad, seed, marginal)


def load(path: str, env=None) -> FamilyConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path!r}: {exc}") from None
    return resolve(raw, env)


def generating_factor(cfg: FamilyConfig) -> GeneratingFactor:
    p = cfg.params
    if cfg.kind == "custom-g":
        return expression_kernel(p)
    if cfg.kind == "distance-phi":
        return distance_kernel(p)
    if cfg.kind == "scale-only":
        return scale_only_kernel(p["s"], p["u"], p["phi"])
    if cfg.kind == "shift-only":
        return shift_only_kernel(p["v"], p["w"], p["phi"])
    if cfg.kind == "exp-kernel":
        return exp_kernel(p)
    if cfg.kind == "power":
        return power_kernel(p)
    raise ConfigError(f"{cfg.kind} is not a kernel family")


def build_family(cfg: FamilyConfig, n_max: Optional[int] = None) -> DensityFamily:
    n_max = cfg.n if n_max is None else n_max
    if cfg.kind == "order-stats":
        return OrderStatsFamily()
    if cfg.kind == "gapped":
        return GappedFamily(cfg.params)
    if cfg.kind == "dirichlet":
        return DirichletFamily(cfg.params)
    return RecursionFamily(generating_factor(cfg), n_max, cfg.box, cfg.quad)
