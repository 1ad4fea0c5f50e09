"""Gaussian-mixture data generation and the noise-prediction training loop."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import EpsModel, loss_and_param_grads, with_params
from .schedule import NoiseSchedule


class TrainingDivergedError(RuntimeError):
    """Loss became non-finite during training."""


@dataclass(frozen=True)
class GmmSpec:
    """Mixture of isotropic Gaussians with a shared standard deviation."""

    weights: np.ndarray
    means: np.ndarray
    sigma: float
    _weights: np.ndarray = field(init=False, repr=False)
    _means: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        m = np.asarray(self.means, dtype=np.float64)
        if w.ndim != 1 or w.size < 1:
            raise ValueError("need at least one mixture component")
        if np.any(w < 0) or abs(float(w.sum()) - 1.0) > 1e-12:
            raise ValueError("weights must be non-negative and sum to 1")
        if m.shape != (w.size, 2):
            raise ValueError(f"means must have shape ({w.size}, 2), got {m.shape}")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        w.flags.writeable = False
        m.flags.writeable = False
        object.__setattr__(self, "_weights", w)
        object.__setattr__(self, "_means", m)


def paper_prior() -> GmmSpec:
    """The default three-component study prior (equal weights, sigma 2)."""
    return GmmSpec(
        weights=np.full(3, 1.0 / 3.0),
        means=np.array([[5.0, 3.0], [3.0, 7.0], [7.0, 7.0]]),
        sigma=2.0,
    )


def mixture_mean(spec: GmmSpec) -> np.ndarray:
    return spec._weights @ spec._means


def mixture_cov(spec: GmmSpec) -> np.ndarray:
    centered = spec._means - mixture_mean(spec)
    between = (spec._weights[:, None] * centered).T @ centered
    return spec.sigma**2 * np.eye(2) + between


def sample_gmm(spec: GmmSpec, n: int, seed: int) -> np.ndarray:
    """n i.i.d. mixture draws, deterministic for a fixed seed."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    comps = rng.choice(spec._weights.size, size=n, p=spec._weights)
    return spec._means[comps] + spec.sigma * rng.standard_normal((n, 2))


def pooled_input_stats(spec: GmmSpec, sched: NoiseSchedule) -> tuple[np.ndarray, float]:
    """Whitening constants for the predictor's spatial input.

    Mean and scale of the noised inputs pooled over a uniform step draw:
    the mean shrinks the mixture mean by the average signal level and the
    scale mixes the retained data variance with the injected unit noise.
    """
    ab = sched.alpha_bar[1:]
    shift = np.sqrt(ab).mean() * mixture_mean(spec)
    data_var = float(np.trace(mixture_cov(spec))) / 2.0
    scale = float(np.sqrt(np.mean(ab * data_var + (1.0 - ab))))
    return shift, scale


@dataclass(frozen=True)
class TrainConfig:
    """Defaults reproduce the study-scale base model.

    The large dataset and batch are deliberate: the sampled mixture's
    mode balance is limited by gradient noise, and smaller settings leave
    a visible bias in the sampled mean.
    """

    epochs: int = 200
    dataset_size: int = 100_000
    batch_size: int = 1024
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if min(self.epochs, self.dataset_size, self.batch_size) < 1 or self.lr < 0:
            raise ValueError("epochs, dataset_size and batch_size must be positive, lr >= 0")
        if self.batch_size > self.dataset_size:
            raise ValueError("batch_size cannot exceed dataset_size")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1 and self.adam_eps > 0):
            raise ValueError("invalid Adam coefficients")


def train(
    model: EpsModel, spec: GmmSpec, sched: NoiseSchedule, cfg: TrainConfig
) -> tuple[EpsModel, np.ndarray]:
    """Train the noise predictor; returns the model and per-epoch mean loss.

    Each minibatch draws a fresh step index uniform in 1..T and a fresh
    standard-normal noise per example, then applies one Adam update of the
    squared-residual objective.  Everything is driven by a single seeded
    generator, so identical seeds give identical final parameters.
    """
    rng = np.random.default_rng(cfg.seed)
    dataset = spec._means[
        rng.choice(spec._weights.size, size=cfg.dataset_size, p=spec._weights)
    ] + spec.sigma * rng.standard_normal((cfg.dataset_size, 2))

    params = {name: arr.copy() for name, arr in model.params()}
    m1 = {name: np.zeros_like(arr) for name, arr in params.items()}
    m2 = {name: np.zeros_like(arr) for name, arr in params.items()}
    step = 0
    losses = np.empty(cfg.epochs)
    current = with_params(model, params)
    for epoch in range(cfg.epochs):
        order = rng.permutation(cfg.dataset_size)
        epoch_loss = 0.0
        n_batches = 0
        for lo in range(0, cfg.dataset_size, cfg.batch_size):
            idx = order[lo : lo + cfg.batch_size]
            x0 = dataset[idx]
            t = rng.integers(1, sched.T + 1, size=idx.size)
            eps = rng.standard_normal((idx.size, 2))
            try:
                bundle = loss_and_param_grads(current, x0, eps, t, sched)
            except FloatingPointError as exc:
                raise TrainingDivergedError(
                    f"{exc} at epoch {epoch}, step {step}"
                ) from exc
            if not np.isfinite(bundle.loss):
                raise TrainingDivergedError(
                    f"loss became {bundle.loss} at epoch {epoch}, step {step}"
                )
            step += 1
            corr1 = 1.0 - cfg.beta1**step
            corr2 = 1.0 - cfg.beta2**step
            for name, g in bundle.params():
                m1[name] = cfg.beta1 * m1[name] + (1.0 - cfg.beta1) * g
                m2[name] = cfg.beta2 * m2[name] + (1.0 - cfg.beta2) * g * g
                params[name] = params[name] - cfg.lr * (m1[name] / corr1) / (
                    np.sqrt(m2[name] / corr2) + cfg.adam_eps
                )
            current = with_params(current, params)
            epoch_loss += bundle.loss
            n_batches += 1
        losses[epoch] = epoch_loss / n_batches
    return current, losses
