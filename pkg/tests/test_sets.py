import json
import math

import pytest

from weightedshift.sets import SpectralSet, annulus_from_radii, jsonable


def test_exp_of_half_plane_is_punctured_disk():
    d = SpectralSet.half_plane(-0.7).exp_map(2.0)
    assert d.same_region(SpectralSet.disk(math.exp(-1.4), punctured=True))
    assert d.contains(math.exp(-1.4))  # boundary
    assert d.contains(1e-300j)
    assert not d.contains(0)
    assert not d.contains(math.exp(-1.4) * 1.0001)


def test_exp_of_discrete_and_lines():
    pts = SpectralSet.discrete([-0.5 + 1j, 2j]).exp_map(1.0)
    assert pts.contains(math.exp(-0.5) * complex(math.cos(1), math.sin(1)), tol=1e-15)
    lines = SpectralSet.vertical_lines([0.0, -1.0]).exp_map(2.0)
    assert lines.contains(1j, tol=1e-15) and lines.contains(-math.exp(-2.0), tol=1e-15)
    assert not lines.contains(0.5)


def test_empty_half_plane_and_union_flattening():
    assert SpectralSet.half_plane(-math.inf).is_empty
    u = SpectralSet.union([SpectralSet.empty(), SpectralSet.union([SpectralSet.disk(1), SpectralSet.circle(2)])])
    assert u.kind == "union" and len(u.members) == 2
    assert SpectralSet.union([SpectralSet.disk(1)]).kind == "disk"


def test_rotational_hull():
    h = SpectralSet.discrete([1j, -1.0, 0.0, 2.0]).rotational_hull()
    assert h.contains(1.0) and h.contains(-2j) and h.contains(0) and not h.contains(1.5)


def test_distance_and_hausdorff():
    a = SpectralSet.discrete([0, 1j])
    b = SpectralSet.discrete([0, 1.1j])
    assert a.hausdorff(b) == pytest.approx(0.1)
    assert SpectralSet.vertical_lines([-1.0]).distance(0.5 + 9j) == 1.5


def test_same_region_ignores_provenance():
    assert SpectralSet.disk(1.0, provenance="x").same_region(SpectralSet.disk(1.0, provenance="y"))
    assert not SpectralSet.disk(1.0, True).same_region(SpectralSet.disk(1.0, False))


def test_validation():
    with pytest.raises(ValueError):
        SpectralSet.disk(-1)
    with pytest.raises(ValueError):
        SpectralSet.annulus(2, 1)
    with pytest.raises(ValueError):
        SpectralSet.half_plane(float("nan"))
    with pytest.raises(ValueError):
        SpectralSet.half_plane(0).exp_map(0.0)


def test_json_is_strict_serializable():
    s = SpectralSet.union([SpectralSet.half_plane(math.inf), SpectralSet.discrete([1 + 2j])], "prov")
    text = json.dumps(s.to_json(), allow_nan=False)
    back = json.loads(text)
    assert back["members"][0]["re_max"] == "inf"
    assert back["members"][1]["points"] == [[1.0, 2.0]]
    assert jsonable(float("-inf")) == "-inf"


def test_annulus_from_radii():
    a = annulus_from_radii([1.0, 1.05, 1.1, 2.0], gap_tol=0.06)
    assert a.contains(1.07) and not a.contains(1.5) and a.contains(2.0)
    assert annulus_from_radii([]).is_empty


def test_plot_data_shapes():
    blocks = SpectralSet.union([SpectralSet.disk(1), SpectralSet.vertical_lines([0, 1])]).plot_data(n_circle=10)
    assert [b.shape for b in blocks] == [(10, 2), (2, 2), (2, 2)]
