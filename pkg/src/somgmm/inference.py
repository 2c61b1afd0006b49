"""Downstream uses of a trained model: outlier scoring, cluster assignment
and generative sampling."""

from dataclasses import dataclass

import numpy as np

from . import model as mc
from .exceptions import UsageError
from .model import DataSet, MixtureModel


def outlier_score(x, model: MixtureModel) -> float:
    """Single-sample score max_k [log pi_k + log p_k(x)], in nats; higher
    means more likely inlier."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.dim,):
        raise UsageError(f"expected a vector of dimension {model.dim}")
    lj = mc.log_joint_matrix(DataSet(x[None, :]), model)
    return float(np.max(lj[0]))


def batch_scores(data: DataSet, model: MixtureModel) -> np.ndarray:
    lj = mc.log_joint_matrix(data, model)
    return np.max(lj, axis=1)


def assign_cluster(x, model: MixtureModel) -> int:
    """Index of the component with the largest joint log-density; lowest
    index on ties."""
    x = np.asarray(x, dtype=np.float64)
    lj = mc.log_joint_matrix(DataSet(x[None, :]), model)
    return int(np.argmax(lj[0]))


@dataclass
class OutlierReport:
    scores: np.ndarray
    window_means: np.ndarray
    window: int
    verdicts: np.ndarray | None = None
    threshold: float | None = None


def score_report(
    data: DataSet,
    model: MixtureModel,
    window: int = 10,
    reference: DataSet | None = None,
    percentile: float = 1.0,
) -> OutlierReport:
    """Per-sample scores plus trailing-window means; if a reference batch is
    given, verdicts mark samples whose window mean falls below the reference
    scores' given percentile."""
    if window < 1:
        raise UsageError("window must be >= 1")
    scores = batch_scores(data, model)
    n = scores.size
    means = np.empty(n)
    for i in range(n):
        lo = max(0, i - window + 1)
        means[i] = scores[lo : i + 1].mean()
    verdicts = None
    threshold = None
    if reference is not None:
        threshold = float(np.percentile(batch_scores(reference, model), percentile))
        verdicts = means < threshold
    return OutlierReport(scores, means, window, verdicts, threshold)


def sample(model: MixtureModel, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw n samples: pick a component (uniformly for tied models, else by
    the weight multinomial), then a diagonal Gaussian draw around its
    centroid with per-coordinate standard deviation 1/d."""
    if n < 1:
        raise UsageError("sample count must be >= 1")
    K = model.n_components
    if model.tied_spherical:
        ks = rng.integers(0, K, size=n)
    else:
        ks = rng.choice(K, size=n, p=model.weights)
    noise = rng.standard_normal((n, model.dim))
    return model.centroids[ks] + noise / model.precision_roots[ks]
