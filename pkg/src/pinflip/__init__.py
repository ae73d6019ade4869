"""pinflip: exact and stochastic toolkit for the area-tilted pinning
interface and its corner-flip heat-bath dynamics."""

from .errors import (
    CapacityError,
    ConvergenceError,
    PinflipError,
    SamplingError,
    ValidationError,
)
from .model import (
    Landmarks,
    ModelParams,
    PathConfig,
    catalan,
    classify_region,
    corner_flip,
    enumerate_paths,
    flip_rate,
    landmarks,
    log_weight,
)
from .phase import (
    PhasePoint,
    activation_energy,
    free_energy_area,
    free_energy_pinning,
    macroscopic_shape,
    phase_grid,
    phase_point,
    sigma0,
)

__version__ = "0.1.0"
