import math
import os
import subprocess
import sys

import numpy as np
import pytest

from weightedshift import kernel
from weightedshift.field import builtin
from weightedshift.flow import FlowOptions, advance_flow, exit_time

pytestmark = pytest.mark.skipif(kernel.BACKEND != "cython", reason="compiled kernel not built")

CASES = [
    ("rotation", {}, [1.0, 0.0], math.pi / 2),
    ("vfp_fourier", {}, [1.0, 0.0], -3.0),
    ("lorentz", {}, [0.1, 0.2, 0.3, 0.4, -0.5, 0.1], 5.0),
    ("nordstrom", {}, [0.5, 1.0], 2.0),
    ("slab_constant", {"c": 0.5, "d": 0.3}, [0.3], 4.0),
]


@pytest.mark.parametrize("name, params, x, t", CASES)
def test_backends_agree(name, params, x, t):
    prob = builtin(name, params)
    a = advance_flow(prob, x, t, FlowOptions(backend="python"))
    b = advance_flow(prob, x, t, FlowOptions(backend="cython"))
    assert a.status == b.status and a.steps == b.steps
    np.testing.assert_allclose(b.endpoint, a.endpoint, rtol=1e-13, atol=1e-15)
    assert b.int_nu == pytest.approx(a.int_nu, rel=1e-12, abs=1e-15)
    assert b.int_sigma_p == pytest.approx(a.int_sigma_p, rel=1e-12, abs=1e-15)
    if a.status == "left_domain":
        assert b.exit_time == pytest.approx(a.exit_time, abs=1e-15)


def test_backends_agree_on_exit_times():
    prob = builtin("lorentz")
    x = [0.0, 0.0, 0.5, 0.1, 0.2, -0.3]
    a = exit_time(prob, x, 20.0, FlowOptions(backend="python"))
    b = exit_time(prob, x, 20.0, FlowOptions(backend="cython"))
    assert a == b


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernel.get_backend("fortran")


def test_env_var_forces_pure_python():
    env = dict(os.environ, WEIGHTEDSHIFT_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from weightedshift import kernel; print(kernel.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
