"""Sparse identification of nonlinear dynamics from noisy trajectory data.

Pipeline: simulate (or load) a trajectory, inject percentage noise,
differentiate, optionally normalise, build a polynomial candidate
library, and run a sparse regressor. The bench module sweeps this
pipeline over noise levels and hyperparameter grids to measure exact
support-recovery rates.
"""

__version__ = "0.1.0"

from .dynamics import (
    OdeSystem,
    SimulationSpec,
    Trajectory,
    bearing_system,
    bias_oscillator,
    canonical_system,
    default_simulation_spec,
    exact_derivatives,
    lorenz_system,
    save_trajectory_csv,
    simulate,
)
from .errors import (
    ConfigError,
    DataQualityError,
    DegenerateScaleError,
    DivergenceError,
    LibraryMismatchError,
    RankDeficiencyError,
    SparsedynError,
    TrajectoryFormatError,
)
from .library import (
    DesignMatrix,
    TermDescriptor,
    build_polynomial_library,
    enumerate_terms,
    term_index,
)
from .preprocess import (
    NoiseSpec,
    ScalingRecord,
    add_noise,
    denormalize,
    differentiate,
    load_trajectory_csv,
    normalize,
)
from .regression import (
    CoefficientModel,
    EsindySpec,
    PosteriorStats,
    StcvSchedule,
    blr_posterior,
    coefficient_presence,
    esindy,
    precondition,
    ridge_solve,
    stcv,
    stcv_stlsq,
    stlsq,
)
