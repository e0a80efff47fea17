import json
import math
import warnings

import numpy as np
import pytest

from weightedshift import field as fm
from weightedshift.classify import uniform_sampler
from weightedshift.field import (
    BUILTINS,
    ConfigError,
    DataIntegrityWarning,
    DomainError,
    InvalidRegionError,
    builtin,
    estimate_lipschitz,
    fd_divergence,
    load_problem,
    nu,
    sigma_p,
)


def test_sigma_p_free_streaming_is_zero():
    prob = builtin("free_streaming", {"N": 2, "p": 3.0})
    assert sigma_p(prob, [0.1, 0.2, 0.3, -0.4]) == 0.0


def test_sigma_p_rotation_p2_equals_c():
    prob = builtin("rotation", {"c": 0.37, "p": 2.0})
    assert sigma_p(prob, [0.3, -0.8]) == 0.37


def test_vfp_sigma_and_nu():
    prob = builtin("vfp_fourier", {"N": 1})
    x = [0.4, -1.5]
    assert sigma_p(prob, x) == pytest.approx(1.5**2 - 1.0, abs=1e-15)
    assert nu(prob, x) == pytest.approx(1.5**2, abs=1e-15)


def test_vfp_divergence_is_n():
    prob = builtin("vfp_fourier", {"N": 3})
    assert prob.field.divergence(np.arange(6.0)) == 3.0


def test_nu_lorentz_is_c():
    prob = builtin("lorentz", {"c": 0.25, "E": [0.1, 0.4, -0.2], "B": [0.3, -0.5, 0.8]})
    assert prob.field.divergence(np.ones(6)) == 0.0
    assert nu(prob, [0, 0, 0, 1.0, 2.0, 3.0]) == 0.25


def test_domain_precondition():
    prob = builtin("slab_constant", {"c": 1.0})
    with pytest.raises(DomainError):
        sigma_p(prob, [1.5])
    with pytest.raises(DomainError):
        nu(prob, [0.0])  # open interval


@pytest.mark.parametrize("name", sorted(BUILTINS))
def test_p1_sigma_is_h_exactly(name, rng):
    prob = builtin(name, {"c": 0.3} if name == "slab_constant" else {})
    for x in uniform_sampler(prob)(rng, 20):
        assert sigma_p(prob, x) == prob.h(x)


@pytest.mark.parametrize("name", sorted(BUILTINS))
def test_nu_minus_sigma_is_div_over_p(name, rng):
    params = {"p": 2.5}
    if name == "slab_constant":
        params.update(c=0.3, d=0.4)
    prob = builtin(name, params)
    for x in uniform_sampler(prob)(rng, 20):
        assert nu(prob, x) - sigma_p(prob, x) == pytest.approx(prob.field.divergence(x) / 2.5, abs=1e-12)


@pytest.mark.parametrize("name", sorted(BUILTINS))
def test_fd_divergence_matches_symbolic(name, rng):
    prob = builtin(name, {"c": 0.3} if name == "slab_constant" else {})
    for x in uniform_sampler(prob)(rng, 100):
        delta = 1e-5 * (1 + np.linalg.norm(x))
        assert abs(fd_divergence(prob.field.eval, x) - prob.field.divergence(x)) <= 10 * delta**2


@pytest.mark.parametrize("name", sorted(BUILTINS))
def test_lipschitz_estimate_below_declared_kappa(name):
    prob = builtin(name, {"c": 0.3} if name == "slab_constant" else {})
    assert estimate_lipschitz(prob, prob.default_box(), 2000) <= prob.kappa * (1 + 1e-6)


def test_lipschitz_examples():
    rot = builtin("rotation")
    est = estimate_lipschitz(rot, [[-1, 1], [-1, 1]], 1000)
    assert 0 < est <= 1 + 1e-12
    const = builtin("slab_constant", {"c": 0.0})
    assert estimate_lipschitz(const, [[0.0, 1.0]], 100) == 0.0
    lin = load_problem({"custom": {"dimension": 1, "field": ["2*x0"], "h": "0"}})
    assert estimate_lipschitz(lin, [[-3.0, 3.0]], 200) == pytest.approx(2.0, rel=1e-12)


def test_lipschitz_region_errors():
    rot = builtin("rotation")
    with pytest.raises(InvalidRegionError):
        estimate_lipschitz(rot, [[0, 0], [0, 1]], 10)
    with pytest.raises(ValueError):
        estimate_lipschitz(rot, [[0, 1], [0, 1]], 0)


def test_builtin_rotation_matches_spec():
    rot = builtin("rotation")
    assert rot.kappa == 1.0
    np.testing.assert_array_equal(rot.field.eval(np.array([2.0, 3.0])), [-3.0, 2.0])
    assert rot.domain.contains(np.array([1e6, -1e6]))


def test_builtin_lorentz_field_and_slab():
    E, B, q = [0.3, 0.2, 1.0], [0.0, 0.0, 2.0], 1.5
    prob = builtin("lorentz", {"E": E, "B": B, "q": q, "slab_half_width": 2.0})
    x = np.array([0.1, 0.2, 0.3, 1.0, -1.0, 0.5])
    v = x[3:]
    want = np.concatenate([v, q * (np.array(E) + np.cross(v, B))])
    np.testing.assert_allclose(prob.field.eval(x), want, rtol=1e-15)
    assert prob.contains([0, 0, 1.9, 5, 5, 5])
    assert not prob.contains([0, 0, 2.1, 0, 0, 0])


def test_builtin_slab_constant():
    slab = builtin("slab_constant", {"c": 0.4})
    assert slab.field.eval(np.array([0.5]))[0] == 1.0
    assert slab.h(np.array([0.5])) == 0.4
    assert slab.contains([0.5]) and not slab.contains([1.0])


def test_builtin_errors():
    with pytest.raises(ConfigError):
        builtin("does_not_exist")
    with pytest.raises(ConfigError):
        builtin("slab_constant", {})
    with pytest.raises(ConfigError):
        builtin("nordstrom", {"a": -1.0})
    with pytest.raises(ConfigError):
        builtin("rotation", {"p": 0.5})


def test_kappa_override():
    assert builtin("rotation", {"kappa": 0.1}).kappa == 0.1


def test_custom_json_problem(tmp_path):
    cfg = {"custom": {"dimension": 2, "field": ["-x1", "x0"], "h": "x0^2", "domain": {"box": [[-2, 2], [-2, None]]},
                      "p": 2, "kappa": 1.0}}
    path = tmp_path / "p.json"
    path.write_text(json.dumps(cfg))
    prob = load_problem(path)
    assert prob.dimension == 2 and prob.p == 2.0 and prob.kappa == 1.0
    assert prob.contains([0.0, 100.0]) and not prob.contains([0.0, -3.0])
    assert prob.h(np.array([3.0, 0.0])) == 9.0
    assert prob.program is not None


def test_custom_kappa_defaults_to_inflated_estimate():
    prob = load_problem({"custom": {"dimension": 1, "field": ["3*x0"], "h": "0", "domain": {"box": [[-1, 1]]}}})
    assert prob.kappa == pytest.approx(3.3, rel=1e-9)


@pytest.mark.parametrize(
    "cfg",
    [
        {"custom": {"dimension": 2, "field": ["x0"], "h": "0"}},
        {"custom": {"dimension": 1, "field": ["2x0"], "h": "0"}},
        {"custom": {"dimension": 1, "field": ["x0"], "h": "x3"}},
        {"custom": {"dimension": 1, "field": ["x0"], "domain": {"ball": 1}}},
        {"nothing": 1},
        [1, 2],
    ],
)
def test_config_errors(cfg):
    with pytest.raises(ConfigError):
        load_problem(cfg) if isinstance(cfg, dict) else fm.problem_from_config(cfg)


def test_invalid_json_reports_position():
    with pytest.raises(ConfigError, match="line 1, column"):
        load_problem('{"builtin": }')


def test_h_inf_violation_warns_not_raises():
    prob = load_problem({"custom": {"dimension": 1, "field": ["1"], "h": "x0", "h_inf": 0.0}})
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        bad = fm.check_absorption_bound(prob, [[-1.0], [0.5], [-0.1]])
    assert bad == 2
    assert any(issubclass(w.category, DataIntegrityWarning) for w in caught)


def test_callable_field_uses_finite_differences():
    fld = fm.field_from_callable(2, lambda x: np.array([x[0] ** 2, -x[1]]), kappa=3.0)
    assert fld.div_source == "finite_difference"
    assert fld.divergence(np.array([1.5, 0.0])) == pytest.approx(2.0, abs=1e-8)
    prob = fm.ProblemSpec(fld, lambda x: 0.0, fm.DomainSpec.everywhere(2))
    assert prob.program is None


def test_exponent_validation():
    fld = fm.field_from_exprs(["1"], kappa=1.0)
    with pytest.raises(ConfigError):
        fm.ProblemSpec(fld, lambda x: 0.0, fm.DomainSpec.everywhere(1), p=math.inf)
