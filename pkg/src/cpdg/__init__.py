"""Contact process on degree-penalised dynamical percolation graphs.

Simulation engine, exact small-instance oracles, closed-form law checkers,
coupled process variants, and Monte Carlo experiment harnesses.
"""

__version__ = "0.1.0"

from .engine import Caps, Simulation, TrajectoryRecord, run_replica  # noqa: F401
from .graph import GraphView, build_finite, grow_bgw  # noqa: F401
from .kernels import KernelSpec, p_value, v_value  # noqa: F401
