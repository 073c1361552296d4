import json

import pytest

from nessmix import config as cfgmod
from nessmix.closed_forms import DirichletFamily, GappedFamily, OrderStatsFamily
from nessmix.errors import ConfigError, KernelRejected
from nessmix.recursion import RecursionFamily


def test_defaults():
    cfg = cfgmod.resolve({"family": "order-stats"}, env={})
    assert cfg.boundary == (0.0, 1.0) and cfg.n == 1 and cfg.seed == 0
    assert cfg.quad.rel_tol == 1e-9 and cfg.box is None and not cfg.recursion
    assert isinstance(cfgmod.build_family(cfg), OrderStatsFamily)


def test_closed_families():
    assert isinstance(cfgmod.build_family(cfgmod.resolve({"family": {"gapped": 3}}, {})),
                      GappedFamily)
    fam = cfgmod.build_family(cfgmod.resolve({"family": {"dirichlet": 2.5}}, {}))
    assert isinstance(fam, DirichletFamily) and fam.s == 2.5


def test_kernel_family_default_box():
    cfg = cfgmod.resolve({"family": {"exp-kernel": 1.0}, "boundary": [1, 3], "n": 2}, {})
    assert cfg.box == (0.5, 6.0) and cfg.recursion
    fam = cfgmod.build_family(cfg)
    assert isinstance(fam, RecursionFamily) and fam.max_level == 2


@pytest.mark.parametrize("family", [
    {"custom-g": "abs(x-y)"},
    {"distance-phi": "exp(-r^2)"},
    {"scale-only": {"s": 1, "u": 1}},
    {"shift-only": {"v": 1, "w": 0}},
    {"power": 2.0},
])
def test_every_kernel_kind_builds(family):
    cfg = cfgmod.resolve({"family": family, "boundary": [1, 2], "n": 1}, {})
    assert cfgmod.generating_factor(cfg) is not None


def test_round_trip():
    raw = {"family": {"scale-only": {"s": 1, "u": 0.5, "phi": "1"}}, "boundary": [2, 1], "n": 3,
           "box": [0.5, 4], "quad": {"rel_tol": 1e-8, "max_levels": 10}, "seed": 7,
           "marginal": "dirac"}
    cfg = cfgmod.resolve(raw, {})
    again = cfgmod.resolve(json.loads(json.dumps(cfg.to_dict())), {})
    assert again.to_dict() == cfg.to_dict()


def test_env_override():
    cfg = cfgmod.resolve({"family": "order-stats", "quad": {"rel_tol": 1e-6}},
                         {cfgmod.ENV_QUAD_TOL: "1e-11"})
    assert cfg.quad.rel_tol == 1e-11
    with pytest.raises(ConfigError):
        cfgmod.resolve({"family": "order-stats"}, {cfgmod.ENV_QUAD_TOL: "tight"})


@pytest.mark.parametrize("raw", [
    [],
    {},
    {"family": "uniform"},
    {"family": {"dirichlet": -1}},
    {"family": {"dirichlet": True}},
    {"family": {"gapped": 1.5}},
    {"family": {"custom-g": 3}},
    {"family": {"dirichlet": 1, "gapped": 2}},
    {"family": "order-stats", "n": 0},
    {"family": "order-stats", "boundary": [1]},
    {"family": "order-stats", "boundary": [-1, 1]},
    {"family": "order-stats", "colour": "red"},
    {"family": "order-stats", "marginal": "poisson"},
    {"family": "order-stats", "quad": 5},
    {"family": {"exp-kernel": 1}, "boundary": [1, 3], "box": [1.5, 4]},
    {"family": {"exp-kernel": float("inf")}},
])
def test_rejects(raw):
    with pytest.raises(ConfigError):
        cfgmod.resolve(raw, {})


def test_asymmetric_g_rejected_on_build():
    cfg = cfgmod.resolve({"family": {"custom-g": "x-y"}, "boundary": [1, 2]}, {})
    with pytest.raises(KernelRejected):
        cfgmod.build_family(cfg)


def test_load_errors(tmp_path):
    with pytest.raises(ConfigError):
        cfgmod.load(str(tmp_path / "missing.json"))
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        cfgmod.load(str(bad))
