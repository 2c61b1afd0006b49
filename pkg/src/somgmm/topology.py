"""Component grid geometry, Gaussian neighborhood kernels and the annealing
schedule for the radius sigma(t) and the learning rate eps(t)."""

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import UsageError

# Below this sigma the kernel is an exact identity (documented fast path).
IDENTITY_SIGMA = 1e-6


@dataclass(frozen=True)
class GridTopology:
    """Arrangement of K components on a (1,K) line or a (sqrt(K),sqrt(K)) grid.

    Periodic grids measure distance as the minimum over wrapped images per
    axis; periodic is the default.
    """

    kind: str
    n_components: int
    periodic: bool = True

    def __post_init__(self):
        if self.kind not in ("1d", "2d"):
            raise UsageError(f"unknown grid kind {self.kind!r}")
        if self.n_components < 1:
            raise UsageError("need at least one component")
        if self.kind == "2d":
            side = math.isqrt(self.n_components)
            if side * side != self.n_components:
                raise UsageError("2d grid requires a perfect-square component count")

    @property
    def shape(self):
        if self.kind == "1d":
            return (1, self.n_components)
        side = math.isqrt(self.n_components)
        return (side, side)

    @property
    def coords(self):
        """K x 2 integer coordinates c(k), row-major."""
        rows, cols = self.shape
        k = np.arange(self.n_components)
        return np.stack([k // cols, k % cols], axis=1)


def grid_distance_sq(topology: GridTopology, j: int, k: int) -> float:
    """Squared Euclidean grid distance between cells j and k."""
    K = topology.n_components
    if not (0 <= j < K and 0 <= k < K):
        raise UsageError("grid index out of range")
    coords = topology.coords
    delta = np.abs(coords[j] - coords[k])
    if topology.periodic:
        extent = np.array(topology.shape)
        delta = np.minimum(delta, extent - delta)
    return float(np.sum(delta * delta))


def _pairwise_distance_sq(topology: GridTopology) -> np.ndarray:
    coords = topology.coords
    delta = np.abs(coords[:, None, :] - coords[None, :, :])
    if topology.periodic:
        extent = np.array(topology.shape)
        delta = np.minimum(delta, extent - delta)
    return np.sum(delta * delta, axis=2).astype(np.float64)


@dataclass(frozen=True)
class NeighborhoodKernel:
    """Row-stochastic K x K smoothing matrix g, tagged with the sigma that
    produced it."""

    g: np.ndarray
    sigma: float

    @property
    def n_components(self):
        return self.g.shape[0]


def build_kernel(topology: GridTopology, sigma: float) -> NeighborhoodKernel:
    """Gaussian grid kernel g_kj = exp(-dist2(k,j) / (2 sigma^2)), rows
    normalized to unit sum; identity below the fast-path threshold."""
    if sigma <= 0:
        raise UsageError("sigma must be positive")
    K = topology.n_components
    if sigma < IDENTITY_SIGMA:
        return NeighborhoodKernel(np.eye(K), sigma)
    dist2 = _pairwise_distance_sq(topology)
    g = np.exp(-dist2 / (2.0 * sigma * sigma))
    g /= g.sum(axis=1, keepdims=True)
    return NeighborhoodKernel(g, sigma)


@dataclass(frozen=True)
class AnnealingSchedule:
    """Piecewise-exponential decay: value0 until t0, exponential decay to
    value_inf at t_inf, constant afterwards.

    The "continuous" convention uses tau = log(value0/value_inf) / (t_inf - t0)
    so the curve is continuous at both endpoints.  The "literal" convention
    keeps the historical tau = log[(value0 - value_inf) / (t_inf - t0)] behind
    a compatibility switch; it is not continuous at the endpoints in general.
    The same schedule type drives both sigma(t) and the learning rate eps(t).
    """

    value0: float
    value_inf: float
    t0: float
    t_inf: float
    convention: str = "continuous"

    def __post_init__(self):
        if not (self.value0 >= self.value_inf > 0):
            raise UsageError("schedule requires value0 >= value_inf > 0")
        if not (self.t_inf > self.t0 >= 0):
            raise UsageError("schedule requires t_inf > t0 >= 0")
        if self.convention not in ("continuous", "literal"):
            raise UsageError(f"unknown tau convention {self.convention!r}")

    @property
    def tau(self):
        if self.convention == "literal":
            return math.log((self.value0 - self.value_inf) / (self.t_inf - self.t0))
        return math.log(self.value0 / self.value_inf) / (self.t_inf - self.t0)

    def value_at(self, t: float) -> float:
        if t < self.t0:
            return self.value0
        if t > self.t_inf:
            return self.value_inf
        if self.value0 == self.value_inf:
            return self.value0
        if self.convention == "literal":
            # The historical tau can explode for common parameter choices;
            # clamp into the declared range to keep the schedule usable.
            v = self.value0 * math.exp(min(700.0, -self.tau * t))
            return min(max(v, self.value_inf), self.value0)
        return self.value0 * math.exp(-self.tau * (t - self.t0))


def sigma_at(schedule: AnnealingSchedule, t: float) -> float:
    """Neighborhood radius at iteration t."""
    return schedule.value_at(t)


def epsilon_at(schedule: AnnealingSchedule, t: float) -> float:
    """Learning rate at iteration t (same decay law as sigma)."""
    return schedule.value_at(t)
