import math

import numpy as np
import pytest

from weightedshift.bounds import (
    CompositionRequiredError,
    EmptyClassError,
    InsufficientDataError,
    assemble_spectrum,
    gamma1_estimate,
    gamma2_estimate,
    norm_table,
    tau_weighted_sampler,
    type_estimate,
    write_growth_csv,
)
from weightedshift.field import builtin
from weightedshift.sets import SpectralSet


def test_slab_gamma1_nilpotent():
    slab = builtin("slab_constant", {"c": 0.6})
    pts = np.linspace(0.05, 0.95, 19)[:, None]
    est = gamma1_estimate(slab, pts, [0.2, 0.5, 0.92, 1.5, 2.0, 3.0])
    np.testing.assert_allclose(est.inf_avg[:3], 0.6, atol=1e-9)
    assert np.all(np.isinf(est.inf_avg[3:])) and est.nilpotent and est.gamma_hat == math.inf
    assert est.admissible_counts.tolist()[:3] == [16, 10, 1]


def test_gamma1_half_slab_moving_left():
    # F = -1 on (0, inf): forward exit in finite time, backward never
    prob = builtin("slab_constant", {"c": 0.35, "speed": -1.0, "right": None})
    est = gamma1_estimate(prob, [[0.5], [3.0]], np.linspace(1, 20, 20))
    np.testing.assert_allclose(est.inf_avg, 0.35, atol=1e-9)
    assert est.gamma_hat == pytest.approx(0.35, abs=1e-9) and not est.starved


def test_gamma1_zero_for_divergence_free_h0():
    est = gamma1_estimate(builtin("lorentz"), [[0, 0, 0, 0.1, 0.2, 0.3]], [0.5, 1.0])
    assert np.all(est.inf_avg[np.isfinite(est.inf_avg)] == 0.0)


def test_gamma2_half_line_constant():
    half = builtin("slab_constant", {"c": 0.7, "right": None})
    pts = np.linspace(1, 60, 30)[:, None]
    est = gamma2_estimate(half, pts, np.linspace(1, 20, 20))
    assert est.gamma_hat == pytest.approx(0.7, abs=1e-9)
    # admissibility t < tau_- = x thins the sample as t grows
    assert est.admissible_counts[0] > est.admissible_counts[-1] > 0


def test_gamma2_transient_forgotten():
    half = builtin("slab_constant", {"c": "0.7 + exp(-x0)", "right": None})
    pts = np.linspace(0.5, 120, 60)[:, None]
    est = gamma2_estimate(half, pts, np.linspace(2, 100, 50))
    assert abs(est.gamma_hat - 0.7) <= 5e-3


def test_gamma2_exponent_shift():
    pts = np.linspace(1, 200, 40)[:, None]
    grid = np.linspace(0.5, 8, 16)
    g = [gamma2_estimate(builtin("slab_constant", {"c": 0.7, "d": 0.4, "right": None, "p": p}), pts, grid).gamma_hat
         for p in (1, 2)]
    assert g[1] - g[0] == pytest.approx(0.2, abs=1e-3)


def test_monotone_refinement(rng):
    half = builtin("slab_constant", {"c": "0.5 + 0.3*sin(x0)", "right": None})
    grid = np.linspace(0.5, 5, 10)
    small = rng.uniform(0, 20, size=(10, 1))
    big = np.vstack([small, rng.uniform(0, 20, size=(10, 1))])
    a = gamma2_estimate(half, small, grid).inf_avg
    b = gamma2_estimate(half, big, grid).inf_avg
    assert np.all(b <= a)


def test_errors():
    half = builtin("slab_constant", {"c": 0.7, "right": None})
    with pytest.raises(EmptyClassError):
        gamma2_estimate(half, [], [1.0])
    with pytest.raises(ValueError):
        gamma2_estimate(half, [[1.0]], [2.0, 1.0])
    with pytest.raises(ValueError):
        gamma2_estimate(half, [[1.0]], [0.0, 1.0])


def test_assemble_examples():
    gen, semi = assemble_spectrum(1.0, 2.0, {"Omega1": 0.5, "Omega2": 0.5}, 1.0)
    assert gen.same_region(SpectralSet.half_plane(-1.0))
    assert semi.same_region(SpectralSet.disk(math.exp(-1.0)))
    gen, semi = assemble_spectrum(0.0, 0.0, {}, 1.0)
    assert gen.params == (0.0,) and semi.params == (1.0, False)
    gen, semi = assemble_spectrum(math.inf, math.inf, {}, 2.0)
    assert gen.is_empty and semi.points == (0j,)
    assert assemble_spectrum(None, 0.3, {}, 1.0)[0].params == (-0.3,)


def test_assemble_refuses_omega3():
    with pytest.raises(CompositionRequiredError):
        assemble_spectrum(1.0, 1.0, {"Omega3Periodic": 0.01}, 1.0)
    with pytest.raises(EmptyClassError):
        assemble_spectrum(None, None, {}, 1.0)


def test_set_level_spectral_mapping():
    gamma, t = 0.8, 1.7
    gen, semi = assemble_spectrum(gamma, None, {}, t)
    img = gen.exp_map(t)
    assert img.same_region(SpectralSet.disk(math.exp(-gamma * t), punctured=True))
    assert img.contains(math.exp(-gamma * t)) and not img.contains(0) and semi.contains(0)


def test_type_estimate_examples():
    t = np.linspace(0.5, 10, 20)
    assert type_estimate(t, np.exp(-0.9 * t)) == pytest.approx(-0.9, abs=1e-12)
    assert type_estimate(t, np.ones_like(t)) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(InsufficientDataError):
        type_estimate(t, np.where(t < 9.2, 0.0, np.exp(-t)))


def test_type_estimate_rotation_with_absorption():
    rot = builtin("rotation", {"c": 0.4})
    t = np.linspace(0.5, 6, 12)
    norms = norm_table(rot, t, [[0.3, 0.2], [1.0, -1.0]])
    assert type_estimate(t, norms) == pytest.approx(-0.4, abs=1e-9)


def test_tau_weighted_sampler_prefers_deep_points(rng):
    half = builtin("slab_constant", {"c": 0.0, "right": None})
    draw = tau_weighted_sampler(half, [[0.0, 10.0]], horizon=20.0)
    pts = draw(rng, 200)
    assert pts.shape == (200, 1) and pts.mean() > 5.5


def test_growth_csv(tmp_path):
    slab = builtin("slab_constant", {"c": 0.6})
    est = gamma1_estimate(slab, [[0.5]], [0.25, 2.0])
    path = tmp_path / "g.csv"
    write_growth_csv(path, est)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,inf_avg,count" and lines[2] == "2.0,inf,0"
    assert float(lines[1].split(",")[1]) == pytest.approx(0.6, abs=1e-12)
