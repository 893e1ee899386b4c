"""Subdynamics of the Friedrichs model in the functional picture.

States and observables carry a singular diagonal part next to a smooth kernel;
the Liouvillian is split into correlation degrees, its second-order
intermediate operator is diagonalised in closed form and validated against
an exact finite-dimensional Hamiltonian.
"""

from .config import ConfigError, JobConfig, load_config, parse_config
from .creation import build_C1, build_D1, refine_CD
from .evolution import evolve_closed_form, evolve_lambda2t, regime_flags, regime_warning
from .functional import (
    GridMismatchError,
    Observable,
    StateFunctional,
    identity_observable,
    pair,
    project,
    trace,
)
from .grid import (
    FormFactor,
    FormFactorFamily,
    FrequencyGrid,
    ModelConfig,
    QuadratureRule,
    RegimeWarning,
)
from .intermediate import (
    SpectralDecomposition,
    build_omega1,
    build_theta2,
    isospectral_residual,
    spectral_modes,
)
from .oracle import (
    ComparisonReport,
    DensityMatrix,
    DiscreteHamiltonian,
    build_hamiltonian,
    compare_evolutions,
    exact_evolve,
    fit_decay_rate,
    functional_to_matrix,
    matrix_to_functional,
)
from .resolvent import ResolventKernel, SelfEnergyBeta, compute_beta
from .superop import (
    SuperOperator,
    apply_L0_dagger,
    apply_L1_dagger,
    liouville,
    liouville_free,
    liouville_interaction,
    projector,
)

__version__ = "0.1.0"
