import math

import numpy as np
import pytest

from weightedshift.classify import (
    CENSORED,
    INFINITE,
    OMEGA1,
    OMEGA2,
    PERIODIC,
    REST,
    ClassificationConfig,
    PhaseClass,
    classify_point,
    classify_sample,
    estimate_prime_period,
    uniform_sampler,
    write_classification_csv,
)
from weightedshift.field import builtin
from weightedshift.flow import flow_point


def test_rotation_examples():
    rot = builtin("rotation")
    c = classify_point(rot, [1.0, 0.0])
    assert c.tag == PERIODIC
    assert c.prime_period == pytest.approx(2 * math.pi, abs=1e-6)
    assert classify_point(rot, [0.0, 0.0]).tag == REST


def test_slab_is_omega1():
    assert classify_point(builtin("slab_constant", {"c": 0.0}), [0.3]).tag == OMEGA1


def test_half_line_is_omega2():
    half = builtin("slab_constant", {"c": 0.0, "right": None})
    assert classify_point(half, [0.3]).tag == OMEGA2


def test_scaled_rotation_period():
    s = estimate_prime_period(builtin("rotation", {"omega": 2.0}), [0.3, -0.6])
    assert s.period == pytest.approx(math.pi, abs=1e-6)


def test_vfp_has_no_period():
    cfg = ClassificationConfig(horizon=12.0)
    assert estimate_prime_period(builtin("vfp_fourier"), [0.2, 0.1], cfg).period is None
    assert classify_point(builtin("vfp_fourier"), [0.2, 0.1], cfg).tag in (INFINITE, CENSORED)


def test_short_horizon_is_censored_not_infinite():
    cfg = ClassificationConfig(horizon=3.0)
    c = classify_point(builtin("rotation"), [1.0, 0.0], cfg)
    assert c.tag == CENSORED and c.reason == "horizon"


def test_free_streaming_is_infinite_with_long_horizon():
    fs = builtin("free_streaming")
    c = classify_point(fs, [0.2, 0.5], ClassificationConfig(horizon=15.0))
    assert c.tag == INFINITE


def test_lorentz_sample_has_empty_omega3():
    stats = classify_sample(builtin("lorentz"), uniform_sampler(builtin("lorentz")), 100, seed=3)
    assert stats.counts.get(OMEGA1, 0) + stats.counts.get(OMEGA2, 0) == 100


def test_rotation_sample_all_periodic():
    rot = builtin("rotation")
    stats = classify_sample(rot, uniform_sampler(rot), 60, seed=4)
    assert stats.counts[PERIODIC] == 60
    assert stats.max_period == pytest.approx(2 * math.pi, abs=1e-6)
    assert stats.summary()["bounded_period_hypothesis"] == "unverified"


def test_free_streaming_sample_has_no_periodic_or_rest():
    fs = builtin("free_streaming")
    stats = classify_sample(fs, uniform_sampler(fs), 40, ClassificationConfig(horizon=15.0), seed=5)
    assert stats.counts.get(PERIODIC, 0) == 0 and stats.counts.get(REST, 0) == 0


def test_classify_sample_is_deterministic_and_ordered():
    rot = builtin("rotation")
    a = classify_sample(rot, uniform_sampler(rot), 20, ClassificationConfig(workers=4), seed=9)
    b = classify_sample(rot, uniform_sampler(rot), 20, ClassificationConfig(workers=1), seed=9)
    np.testing.assert_array_equal(a.points, b.points)
    assert [c.prime_period for c in a.classes] == [c.prime_period for c in b.classes]


def test_flow_invariance(rng):
    rot = builtin("rotation", {"omega": 1.3})
    cfg = ClassificationConfig()
    for x in rng.uniform(-1, 1, size=(10, 2)):
        c = classify_point(rot, x, cfg)
        y = flow_point(rot, x, rng.uniform(-2, 2))
        d = classify_point(rot, y, cfg)
        assert d.tag == c.tag == PERIODIC
        assert abs(d.prime_period - c.prime_period) <= 2 * cfg.period_refine_tol


def test_yorke_bound_and_multiples(rng):
    rot = builtin("rotation")
    cfg = ClassificationConfig()
    for x in rng.uniform(-2, 2, size=(10, 2)):
        per = classify_point(rot, x, cfg).prime_period
        assert per >= 2 * math.pi / rot.kappa - cfg.period_tol
        for m in (2, 3):
            assert np.linalg.norm(flow_point(rot, x, m * per) - x) <= 10 * cfg.return_tol_at(x)


def test_config_and_tag_validation():
    with pytest.raises(ValueError):
        ClassificationConfig(horizon=0.0)
    with pytest.raises(ValueError):
        PhaseClass("Omega4")
    with pytest.raises(ValueError):
        PhaseClass(PERIODIC)
    with pytest.raises(ValueError):
        classify_sample(builtin("rotation"), uniform_sampler(builtin("rotation")), 0)


def test_csv(tmp_path):
    slab = builtin("slab_constant", {"c": 0.0})
    stats = classify_sample(slab, np.array([[0.3], [0.6]]), 2)
    path = tmp_path / "c.csv"
    write_classification_csv(path, stats)
    lines = path.read_text().splitlines()
    assert lines[0].split(",")[-4:] == ["tag", "tau_minus", "tau_plus", "prime_period"]
    assert lines[1].endswith(",")  # no prime period
