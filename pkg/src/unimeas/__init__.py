"""Multi-qudit statevector simulator for collapse-free unitary measurement."""

from importlib.metadata import PackageNotFoundError, version as _version

try:
    __version__ = _version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .state import Layout, PureState, DensityMatrix, partial_trace, schmidt, tensor, qudit
from .ops import BasisRotation, apply_imprint, apply_imprint_inverse, apply_swap, rotation_qubit, hadamard
from .protocol import CorrelationLedger, make_environment, measure_raw, measure_corrected, decompose_branches
from .network import Network, epsilon_sweep, scenario_qudit_two_bases
from .born import bipartite_view, phase_erase, born_probabilities
from .generalized import KrausSet, dilate, apply_generalized
