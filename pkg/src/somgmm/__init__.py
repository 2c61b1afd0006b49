"""SGD-trained Gaussian mixtures with SOM-style neighborhood annealing.

The package implements three loss regimes (exact, max-component, smoothed),
a grid-annealed trainer, a prototype-map bridge showing the smoothed regime
is the map's energy up to an affine constant, and the downstream uses of the
trained density: outlier scoring, clustering, sampling.
"""

from .backend import BACKEND
from .model import (
    DataSet,
    MixtureModel,
    Responsibilities,
    component_log_density,
    full_log_likelihood,
    max_component_log_likelihood,
    responsibilities,
    smoothed_log_likelihood,
)
from .topology import (
    AnnealingSchedule,
    GridTopology,
    NeighborhoodKernel,
    build_kernel,
    epsilon_at,
    grid_distance_sq,
    sigma_at,
)
from .trainer import TrainConfig, TrainState, detect_collapse, train
from .sombridge import SomView, bmu, som_energy, som_update, verify_equivalence
from .inference import assign_cluster, outlier_score, sample

__version__ = "0.1.0"
