"""Exact noise predictor for an isotropic Gaussian prior.

When the clean data is ``N(mean, sigma^2 I)``, the noised marginal at step t
is ``N(sqrt(ab) mean, (ab sigma^2 + 1 - ab) I)`` and the ideal predictor has
the closed form

    eps*(x, t) = sqrt(1 - ab) (x - sqrt(ab) mean) / (ab sigma^2 + 1 - ab)

This plugs into the same sampler and value-estimation code paths as the
trained MLP, which makes exact oracle comparisons possible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import input_grad, predict_eps
from .schedule import NoiseSchedule, _check_t, _coef


@dataclass(frozen=True)
class IsotropicGaussianEps:
    mean: np.ndarray
    sigma: float
    _mean: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_mean", np.asarray(self.mean, dtype=np.float64))
        if self._mean.shape != (2,):
            raise ValueError("mean must be a 2-vector")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")


def _gain(model: IsotropicGaussianEps, t, sched: NoiseSchedule):
    t = _check_t(t, sched.T)
    ab = _coef(sched.alpha_bar, t)
    return ab, np.sqrt(1.0 - ab) / (ab * model.sigma**2 + 1.0 - ab)


@predict_eps.register
def _(model: IsotropicGaussianEps, x, t, sched: NoiseSchedule):
    x = np.asarray(x, dtype=np.float64)
    ab, gain = _gain(model, t, sched)
    return gain * (x - np.sqrt(ab) * model._mean)


@input_grad.register
def _(model: IsotropicGaussianEps, x, t, sched: NoiseSchedule, cotangent):
    _, gain = _gain(model, t, sched)
    return gain * np.asarray(cotangent, dtype=np.float64)


@dataclass(frozen=True)
class MixtureEps:
    """Exact noise predictor for an isotropic Gaussian-mixture prior.

    The noised marginal stays a mixture, so the ideal prediction is the
    responsibility-weighted version of the single-component formula:

        eps*(x, t) = sqrt(1 - ab) (x - sqrt(ab) m(x, t)) / (ab sigma^2 + 1 - ab)

    with ``m(x, t)`` the posterior-responsibility average of the component
    means.  Useful as a training-free reference sampler.
    """

    weights: np.ndarray
    means: np.ndarray
    sigma: float
    _weights: np.ndarray = field(init=False, repr=False)
    _means: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        m = np.asarray(self.means, dtype=np.float64)
        if w.ndim != 1 or m.shape != (w.size, 2):
            raise ValueError("weights must be (k,) and means (k, 2)")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        object.__setattr__(self, "_weights", w)
        object.__setattr__(self, "_means", m)


@predict_eps.register
def _(model: MixtureEps, x, t, sched: NoiseSchedule):
    x = np.asarray(x, dtype=np.float64)
    t = _check_t(t, sched.T)
    ab = np.asarray(_coef(sched.alpha_bar, t))
    var = ab * model.sigma**2 + 1.0 - ab
    root_ab = np.sqrt(ab)
    centered = x[..., None, :] - root_ab[..., None] * model._means
    logits = -np.sum(centered * centered, axis=-1) / (2.0 * var) + np.log(model._weights)
    logits -= logits.max(axis=-1, keepdims=True)
    resp = np.exp(logits)
    resp /= resp.sum(axis=-1, keepdims=True)
    post_mean = resp @ model._means
    return np.sqrt(1.0 - ab) * (x - root_ab * post_mean) / var
