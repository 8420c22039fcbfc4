"""Long-range statistics of electromagnetic modes in random rectangular waveguides."""

__version__ = "0.1.0"

from .modes import (  # noqa: F401
    TE,
    TM,
    Geometry,
    ModeBasis,
    ModeRecord,
    QuadratureGrid,
    SourceAmplitudes,
    SourceSpec,
    enumerate_modes,
    eval_mode,
    ideal_flux,
    mode_inner_product,
    project_source,
)
from .medium import CovarianceModel, ZSpectrum  # noqa: F401
from .coupling import (  # noqa: F401
    CouplingTensor,
    PairField,
    assemble_coupling_tensor,
    cross_range_covariance,
)
from .moments import (  # noqa: F401
    MeanFreePaths,
    ModeMoments,
    compute_C,
    compute_U,
    compute_kappa,
    compute_moments,
    assemble_Q,
    mean_amplitude_evolution,
    scattering_mean_free_paths,
)
