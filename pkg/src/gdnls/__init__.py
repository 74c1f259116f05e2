"""gDNLS pseudospectral laboratory.

Solves ``i u_t + u_xx + i |u|^(2 sigma) u_x = 0`` on a periodic box, maps it
to the derivative-free gauged system, builds wave operators from asymptotic
states and checks small-data scattering.  Hot pointwise kernels come from a
compiled extension when it is available (see :mod:`gdnls.kernels`).
"""

__version__ = "0.1.0"

from .spectral import (  # noqa: E402
    BoundaryWarning,
    Field,
    Grid,
    NormTriple,
    cumulative_primitive,
    dealias,
    free_propagate,
    make_grid,
    norms,
    spectral_derivative,
)
from .model import (  # noqa: E402
    GlobalCheck,
    ModelParams,
    action_S,
    energy,
    global_predicate,
    ground_state_profile,
    mass,
    momentum,
    mu_omega0,
    nehari_K,
    rhs_gdnls,
)
from .gauge import (  # noqa: E402
    StatePair,
    compatible_partner,
    gauge_g1,
    gauge_g2,
    gauge_inverse,
    gauge_pair,
    lipschitz_majorant,
    lipschitz_ratio,
    nonlinearity_F,
    relation_residual,
)
from .timestepper import (  # noqa: E402
    EXACT,
    BlowUpError,
    StepperConfig,
    Trajectory,
    evolve_gauged,
    evolve_gdnls,
    invariant_drifts,
    pair_difference_monitor,
    self_convergence_order,
)
from .fitting import FitResult, fit_power_law  # noqa: E402
from .waveop import (  # noqa: E402
    AsymptoticState,
    ProfileBundle,
    WaveOpError,
    WaveOpReport,
    choose_final_time,
    picard_oracle,
    reconstruct_and_extend,
    run_wave_operator,
    solve_final_value,
)
from .scatter import (  # noqa: E402
    PhysicalScatterReport,
    ScatterReport,
    forward_scatter,
    scatter_from_physical,
)

__all__ = [name for name in dir() if not name.startswith("_")]
