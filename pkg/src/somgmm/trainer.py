"""SGD training of the three loss regimes with constraint enforcement,
neighborhood annealing and collapse diagnostics.

The losses are maximized; ``sgd_step`` performs gradient *ascent* and the
history reports the loss as-is.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import model as mc
from .exceptions import NumericsError, UsageError
from .model import DataSet, MixtureModel, D_MAX, D_MIN, WEIGHT_FLOOR
from .topology import (
    AnnealingSchedule,
    GridTopology,
    NeighborhoodKernel,
    build_kernel,
    epsilon_at,
    sigma_at,
)

LOSS_REGIMES = ("exact", "max_component", "smoothed")

# Relative sigma drift that triggers a kernel rebuild.
KERNEL_REBUILD_TOL = 1e-4

PROBE_SIZE = 200


@dataclass
class TrainConfig:
    loss_regime: str
    n_components: int
    total_iters: int
    eps_schedule: AnnealingSchedule
    sigma_schedule: AnnealingSchedule | None = None
    grid: str = "2d"
    periodic: bool = True
    batch_size: int = 1
    centroid_scale: float = 0.01
    init_dsq: float = 5.0
    init_mode: str = "random"
    tied_spherical: bool = False
    train_weights: bool = False
    train_precisions: bool = False
    seed: int | None = None
    diag_every: int = 100
    shuffle: str = "replacement"

    def validate(self):
        if self.loss_regime not in LOSS_REGIMES:
            raise UsageError(f"unknown loss regime {self.loss_regime!r}")
        if self.batch_size < 1:
            raise UsageError("batch_size must be >= 1")
        if self.total_iters < 1:
            raise UsageError("total_iters must be >= 1")
        if not D_MIN ** 2 <= self.init_dsq <= D_MAX ** 2:
            raise UsageError("initial precision outside the allowed bounds")
        if self.init_mode not in ("random", "data_mean"):
            raise UsageError(f"unknown init mode {self.init_mode!r}")
        if self.shuffle not in ("replacement", "epoch"):
            raise UsageError(f"unknown shuffle mode {self.shuffle!r}")
        if self.loss_regime == "smoothed" and self.sigma_schedule is None:
            raise UsageError("smoothed regime requires a sigma schedule")
        # Constructing the topology validates K against the grid kind.
        self.topology()
        return self

    def topology(self):
        return GridTopology(self.grid, self.n_components, self.periodic)


@dataclass
class HistoryRow:
    t: int
    loss: float
    sigma: float
    epsilon: float
    diagnosis: str


@dataclass
class DataStats:
    mean: np.ndarray
    var: np.ndarray

    @property
    def scale(self):
        return float(np.sqrt(np.mean(self.var)))

    @classmethod
    def from_data(cls, data: DataSet):
        return cls(data.samples.mean(axis=0), data.samples.var(axis=0))


@dataclass
class TrainState:
    model: MixtureModel
    t: int
    rng: np.random.Generator
    history: list = field(default_factory=list)
    kernel: NeighborhoodKernel | None = None
    probe: DataSet | None = None
    stats: DataStats | None = None


def init_model(config: TrainConfig, rng: np.random.Generator, dim: int) -> MixtureModel:
    """Small random centroids, equiprobable weights, uniform precision."""
    config.validate()
    K = config.n_components
    centroids = rng.uniform(-config.centroid_scale, config.centroid_scale, (K, dim))
    weights = np.full(K, 1.0 / K)
    droots = np.full((K, dim), math.sqrt(config.init_dsq))
    return MixtureModel(weights, centroids, droots, config.tied_spherical)


def _safe_ratio(num, den):
    out = np.zeros_like(num)
    np.divide(num, den, out=out, where=den > 0)
    return out


def grad_exact(batch: DataSet, model: MixtureModel):
    """Analytic gradients of the full log-likelihood, averaged over the batch.

    Returns (gmu, gd, gpi) in the d-parameterization: the precision gradient
    is taken with respect to the precision roots d via P = D*D.
    """
    gamma = mc.responsibilities(batch, model).gamma  # N x K
    X = batch.samples
    N = X.shape[0]
    d = model.precision_roots
    diff = X[:, None, :] - model.centroids[None, :, :]  # N x K x D
    gmu = np.einsum("nk,ki,nki->ki", gamma, d * d, diff) / N
    gd = np.einsum("nk,nki->ki", gamma, 1.0 / d - d * diff * diff) / N
    gpi = _safe_ratio(gamma.mean(axis=0), model.weights)
    return gmu, gd, gpi


def _winner_rows(batch: DataSet, model: MixtureModel, kernel: NeighborhoodKernel):
    """Per-sample argmax row of the smoothed scores plus its kernel coupling."""
    # Zero-weight components contribute -inf log-joints; clamp so kernel
    # zeros do not turn the convolution into nan.
    lj = np.maximum(mc.log_joint_matrix(batch, model), -1e300)
    winners = np.argmax(lj @ kernel.g.T, axis=1)  # ties: lowest index
    return winners, kernel.g[winners]  # N, N x K


def grad_smoothed(batch: DataSet, model: MixtureModel, kernel: NeighborhoodKernel):
    """Subgradient of the smoothed loss: flows through each sample's winning
    row only, weighting component j by its coupling g[winner, j].

    With the identity kernel this is exactly the max-component (hard
    assignment) gradient.
    """
    if kernel.g.shape[0] != model.n_components:
        raise UsageError("kernel size does not match the model")
    X = batch.samples
    N = X.shape[0]
    _, coupling = _winner_rows(batch, model, kernel)
    d = model.precision_roots
    diff = X[:, None, :] - model.centroids[None, :, :]
    gmu = np.einsum("nj,ji,nji->ji", coupling, d * d, diff) / N
    gd = np.einsum("nj,nji->ji", coupling, 1.0 / d - d * diff * diff) / N
    gpi = _safe_ratio(coupling.mean(axis=0), model.weights)
    return gmu, gd, gpi


def project_weight_gradient(gpi: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """First-order effect of a weight-gradient step followed by simplex
    renormalization; vanishing projected gradient means the renormalized
    weights are stationary."""
    return gpi - weights * gpi.sum()


def neighborhood_pull(centroids: np.ndarray, coeff: np.ndarray, x: np.ndarray):
    """In-place pull of every centroid toward x, scaled per component."""
    centroids += coeff[:, None] * (x - centroids)


def enforce_constraints(model: MixtureModel) -> MixtureModel:
    """Renormalize weights onto the (floored) simplex and clamp precision
    roots; tied models re-tie the shared d and keep weights at exactly 1/K."""
    np.clip(model.precision_roots, D_MIN, D_MAX, out=model.precision_roots)
    if model.tied_spherical:
        model.precision_roots[...] = model.precision_roots.mean()
        model.weights[...] = 1.0 / model.n_components
        return model
    w = model.weights
    np.maximum(w, WEIGHT_FLOOR, out=w)
    w /= w.sum()
    np.maximum(w, WEIGHT_FLOOR, out=w)
    w /= w.sum()
    return model


def _regime_kernel(state: TrainState, config: TrainConfig, sigma: float):
    if config.loss_regime == "max_component":
        if state.kernel is None:
            state.kernel = NeighborhoodKernel(np.eye(config.n_components), 0.0)
        return state.kernel
    k = state.kernel
    if k is None or abs(sigma - k.sigma) > KERNEL_REBUILD_TOL * k.sigma:
        state.kernel = build_kernel(config.topology(), sigma)
    return state.kernel


def _current_loss(state: TrainState, config: TrainConfig):
    probe = state.probe
    if config.loss_regime == "exact":
        return mc.full_log_likelihood(probe, state.model)
    if config.loss_regime == "max_component":
        return mc.max_component_log_likelihood(probe, state.model)
    return mc.smoothed_log_likelihood(probe, state.model, state.kernel)


def _log_row(state: TrainState, config: TrainConfig, sigma: float, eps: float):
    loss = _current_loss(state, config)
    if not np.isfinite(loss):
        raise NumericsError(
            f"non-finite loss at iteration {state.t}",
            snapshot={"t": state.t, "model": state.model.copy()},
        )
    diagnosis = detect_collapse(state.model, state.stats, state.probe)
    state.history.append(HistoryRow(state.t, loss, sigma, eps, diagnosis))


def sgd_step(state: TrainState, batch: DataSet, config: TrainConfig) -> TrainState:
    """One ascent step: evaluate schedules, rebuild the kernel if the radius
    drifted, apply regime gradients, re-impose constraints, log at cadence."""
    if state.t >= config.total_iters:
        raise UsageError("training already ran its configured iterations")
    model = state.model
    t = state.t
    eps = epsilon_at(config.eps_schedule, t)
    sigma = sigma_at(config.sigma_schedule, t) if config.sigma_schedule else 0.0

    if config.loss_regime == "exact":
        gmu, gd, gpi = grad_exact(batch, model)
        _apply(model, config, eps, gmu, gd, gpi)
    else:
        kernel = _regime_kernel(state, config, sigma)
        if model.tied_spherical and batch.count == 1:
            # Single-sample tied update, grouped so that it is bit-identical
            # to the prototype-map rule under the eps/d^2 rate mapping.
            winners, _ = _winner_rows(batch, model, kernel)
            dsq = model.tied_precision_root ** 2
            coeff = (eps * dsq) * kernel.g[winners[0]]
            neighborhood_pull(model.centroids, coeff, batch.samples[0])
        else:
            gmu, gd, gpi = grad_smoothed(batch, model, kernel)
            _apply(model, config, eps, gmu, gd, gpi)

    enforce_constraints(model)
    state.t = t + 1
    if state.probe is not None and (
        state.t % config.diag_every == 0 or state.t == config.total_iters
    ):
        _log_row(
            state,
            config,
            sigma_at(config.sigma_schedule, state.t) if config.sigma_schedule else 0.0,
            epsilon_at(config.eps_schedule, state.t),
        )
    return state


def _apply(model, config, eps, gmu, gd, gpi):
    model.centroids += eps * gmu
    if config.train_precisions and not model.tied_spherical:
        model.precision_roots += eps * gd
    if config.train_weights and not model.tied_spherical:
        model.weights += eps * gpi


@dataclass
class CollapseThresholds:
    single_weight: float = 0.95
    degenerate_spread: float = 1e-3
    degenerate_resp: float = 1e-3
    sparse_weight_factor: float = 10.0


def detect_collapse(
    model: MixtureModel,
    data_stats: DataStats,
    probe: DataSet | None = None,
    thresholds: CollapseThresholds = CollapseThresholds(),
) -> str:
    """Classify the model as healthy / degenerate / single_component / sparse.

    Degenerate: all centroids coincide (relative to the data scale) and a
    probe batch gets uniform responsibilities.  Single-component: one weight
    absorbs nearly everything.  Sparse: too few components carry weight.
    """
    K = model.n_components
    w = model.weights
    if np.max(w) > thresholds.single_weight:
        return "single_component"
    if np.count_nonzero(w > 1.0 / (thresholds.sparse_weight_factor * K)) < math.ceil(K / 4):
        return "sparse"
    mu = model.centroids
    spread = np.max(
        np.linalg.norm(mu[:, None, :] - mu[None, :, :], axis=2)
    )
    if spread < thresholds.degenerate_spread * data_stats.scale:
        if probe is None:
            return "degenerate"
        gamma = mc.responsibilities(probe, model).gamma
        if np.max(np.abs(gamma - 1.0 / K)) < thresholds.degenerate_resp:
            return "degenerate"
    return "healthy"


def _probe_subset(data: DataSet) -> DataSet:
    if data.count <= PROBE_SIZE:
        return data
    stride = data.count / PROBE_SIZE
    idx = (np.arange(PROBE_SIZE) * stride).astype(int)
    return DataSet(data.samples[idx], dict(data.meta, probe=True))


def make_state(config: TrainConfig, data: DataSet, resume: dict | None = None) -> TrainState:
    config.validate()
    if config.seed is None:
        raise UsageError("training requires an explicit rng seed")
    rng = np.random.default_rng(config.seed)
    if resume is not None:
        rng.bit_generator.state = resume["rng_state"]
        model = resume["model"].copy()
        t = resume["t"]
    else:
        model = init_model(config, rng, data.dim)
        t = 0
    state = TrainState(model=model, t=t, rng=rng)
    state.stats = DataStats.from_data(data)
    state.probe = _probe_subset(data)
    if resume is None and config.init_mode == "data_mean":
        model.centroids[...] = state.stats.mean
    return state


def run(config: TrainConfig, data: DataSet, resume: dict | None = None) -> TrainState:
    """Run the configured number of iterations and return the final state.

    Deterministic under a fixed seed; a run resumed from a checkpoint (model,
    iteration, rng state) continues exactly where the original left off.
    """
    state = make_state(config, data, resume)
    if state.t == 0:
        sigma0 = sigma_at(config.sigma_schedule, 0) if config.sigma_schedule else 0.0
        if config.loss_regime != "exact":
            _regime_kernel(state, config, sigma0)
        _log_row(state, config, sigma0, epsilon_at(config.eps_schedule, 0))
    N = data.count
    perm = None
    for t in range(state.t, config.total_iters):
        if config.shuffle == "epoch":
            start = (t * config.batch_size) % N
            if perm is None or start == 0:
                perm = state.rng.permutation(N)
            idx = perm.take(range(start, start + config.batch_size), mode="wrap")
        else:
            idx = state.rng.integers(0, N, size=config.batch_size)
        batch = DataSet(data.samples[idx], {"batch": True})
        sgd_step(state, batch, config)
    return state


def train(config: TrainConfig, data: DataSet, resume: dict | None = None):
    """Convenience wrapper around :func:`run` returning (model, history)."""
    state = run(config, data, resume)
    return state.model, state.history
