"""Weighted-shift transport semigroups: flows, phase classes and spectra."""

__version__ = "0.1.0"

from .field import ProblemSpec, builtin, load_problem  # noqa: E402
from .flow import advance_flow, exit_time, radon_nikodym  # noqa: E402
from .kernel import BACKEND  # noqa: E402

__all__ = ["ProblemSpec", "builtin", "load_problem", "advance_flow", "exit_time", "radon_nikodym", "BACKEND",
           "__version__"]
