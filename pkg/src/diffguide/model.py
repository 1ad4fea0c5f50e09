"""Noise-prediction MLP: forward pass, exact gradients, checkpoints.

The predictor is three affine layers, ``(2 + E) -> H -> H -> 2``, with a
smooth activation after the first two.  The step index enters through a
sinusoidal embedding of ``t / T`` (E even, frequencies geometric from 1 up to
``freq_base``).  Gradients are hand-derived reverse mode for this fixed
architecture; they are checked against central finite differences in the
test suite.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from functools import singledispatch

import numpy as np

from .schedule import NoiseSchedule, _check_t, forward_noising

CHECKPOINT_FORMAT = "diffguide-checkpoint"
CHECKPOINT_VERSION = 1


class CheckpointError(Exception):
    """Base class for checkpoint load failures."""


class CheckpointFormatError(CheckpointError):
    """File is not a checkpoint of the expected format."""


class CheckpointVersionError(CheckpointError):
    """Checkpoint schema version is not supported."""


class CheckpointShapeError(CheckpointError):
    """A parameter array does not match the declared dimensions."""


def _sigmoid(z):
    # branch on sign so exp never overflows
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _silu(z):
    return z * _sigmoid(z)


def _silu_deriv(z):
    s = _sigmoid(z)
    return s * (1.0 + z * (1.0 - s))


ACTIVATIONS = {
    "silu": (_silu, _silu_deriv),
    "identity": (lambda z: z, lambda z: np.ones_like(z)),
}

PARAM_NAMES = ("w1", "b1", "w2", "b2", "w3", "b3")


@dataclass
class EpsModel:
    """Parameters of the noise predictor; treat instances as immutable.

    ``in_shift`` and ``in_scale`` whiten the spatial input before the first
    layer; they are fixed constants (not trained), chosen from the pooled
    statistics of the noised training inputs so the coordinates enter at the
    same magnitude as the step embedding.
    """

    w1: np.ndarray  # (2 + E, H)
    b1: np.ndarray  # (H,)
    w2: np.ndarray  # (H, H)
    b2: np.ndarray  # (H,)
    w3: np.ndarray  # (H, 2)
    b3: np.ndarray  # (2,)
    activation: str = "silu"
    embed_width: int = 32
    freq_base: float = 1000.0
    in_shift: np.ndarray = None
    in_scale: float = 1.0

    def __post_init__(self):
        if self.in_shift is None:
            self.in_shift = np.zeros(2)
        self.in_shift = np.asarray(self.in_shift, dtype=np.float64)

    @property
    def hidden_width(self) -> int:
        return self.w1.shape[1]

    def params(self):
        return [(name, getattr(self, name)) for name in PARAM_NAMES]


@dataclass
class GradBundle:
    """Loss value plus per-parameter gradients mirroring EpsModel shapes."""

    loss: float
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    w3: np.ndarray
    b3: np.ndarray

    def params(self):
        return [(name, getattr(self, name)) for name in PARAM_NAMES]


def param_count(model: EpsModel) -> int:
    return sum(arr.size for _, arr in model.params())


def init_model(
    hidden_width: int,
    embed_width: int,
    seed: int,
    activation: str = "silu",
    freq_base: float = 1000.0,
    in_shift=None,
    in_scale: float = 1.0,
) -> EpsModel:
    """Fan-in scaled uniform init, U(-1/sqrt(fan_in), 1/sqrt(fan_in)).

    Weights and biases of each layer share the layer's bound.  Bit-for-bit
    reproducible for a fixed seed.
    """
    if hidden_width < 1:
        raise ValueError(f"hidden_width must be >= 1, got {hidden_width}")
    if embed_width < 2 or embed_width % 2 != 0:
        raise ValueError(f"embed_width must be even and >= 2, got {embed_width}")
    if activation not in ACTIVATIONS:
        raise ValueError(f"unknown activation {activation!r}")
    if in_scale <= 0:
        raise ValueError(f"in_scale must be positive, got {in_scale}")
    rng = np.random.default_rng(seed)
    dims = [(2 + embed_width, hidden_width), (hidden_width, hidden_width), (hidden_width, 2)]
    arrays = []
    for fan_in, fan_out in dims:
        bound = 1.0 / np.sqrt(fan_in)
        arrays.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        arrays.append(rng.uniform(-bound, bound, size=fan_out))
    return EpsModel(
        *arrays,
        activation=activation,
        embed_width=embed_width,
        freq_base=freq_base,
        in_shift=in_shift,
        in_scale=in_scale,
    )


def time_embedding(t, T: int, width: int, freq_base: float) -> np.ndarray:
    """Sinusoidal features of t/T: ``[sin(s f_k), cos(s f_k)]`` per frequency.

    The ``width/2`` frequencies are geometric between 1 and ``freq_base``.
    """
    s = np.asarray(t, dtype=np.float64) / T
    half = width // 2
    freqs = freq_base ** (np.arange(half) / max(half - 1, 1))
    ang = s[..., None] * freqs
    return np.concatenate([np.sin(ang), np.cos(ang)], axis=-1)


def _forward(model: EpsModel, x: np.ndarray, t, sched: NoiseSchedule):
    """Full forward pass; returns output plus the activations backward needs."""
    act, _ = ACTIVATIONS[model.activation]
    emb = time_embedding(t, sched.T, model.embed_width, model.freq_base)
    xw = (x - model.in_shift) / model.in_scale
    # the x and embedding blocks of layer 1 are applied separately so a
    # scalar t costs one embedding row regardless of batch size
    z1 = xw @ model.w1[:2] + (emb @ model.w1[2:] + model.b1)
    a1 = act(z1)
    z2 = a1 @ model.w2 + model.b2
    a2 = act(z2)
    out = a2 @ model.w3 + model.b3
    return out, (xw, emb, z1, a1, z2, a2)


@singledispatch
def predict_eps(model, x, t, sched: NoiseSchedule):
    """Predicted noise for points ``x`` at step(s) ``t``.

    ``x`` may be a single point ``(2,)`` or a batch ``(n, 2)``; ``t`` a scalar
    step or an array matching the batch.  Batched evaluation equals per-item
    evaluation.
    """
    raise TypeError(f"no noise predictor registered for {type(model).__name__}")


@predict_eps.register
def _(model: EpsModel, x, t, sched: NoiseSchedule):
    x = np.asarray(x, dtype=np.float64)
    t = _check_t(t, sched.T)
    if t.ndim > 0 and x.ndim > 1 and t.shape[0] != x.shape[0]:
        raise ValueError(f"batch length mismatch: x has {x.shape[0]} rows, t has {t.shape[0]}")
    out, _ = _forward(model, x, t, sched)
    return out


def loss_and_param_grads(model: EpsModel, x0_batch, eps_batch, t_batch, sched: NoiseSchedule) -> GradBundle:
    """Mean squared noise-prediction error and its exact parameter gradients.

    The loss is ``mean_i || eps_i - model(noised(x0_i, t_i, eps_i), t_i) ||^2``
    with the mean over batch items (each item contributes the squared 2-norm
    of its residual).
    """
    x0 = np.atleast_2d(np.asarray(x0_batch, dtype=np.float64))
    eps = np.atleast_2d(np.asarray(eps_batch, dtype=np.float64))
    t = np.asarray(t_batch)
    if x0.shape[0] == 0:
        raise ValueError("empty batch")
    if not (x0.shape == eps.shape and t.shape == (x0.shape[0],)):
        raise ValueError(
            f"batch shape mismatch: x0 {x0.shape}, eps {eps.shape}, t {t.shape}"
        )
    n = x0.shape[0]
    x_t = forward_noising(x0, t, eps, sched)
    out, (xw, emb, z1, a1, z2, a2) = _forward(model, x_t, t, sched)
    _, dact = ACTIVATIONS[model.activation]

    resid = out - eps
    loss = float(np.sum(resid * resid) / n)

    dout = (2.0 / n) * resid
    dw3 = a2.T @ dout
    db3 = dout.sum(axis=0)
    da2 = dout @ model.w3.T
    dz2 = dact(z2) * da2
    dw2 = a1.T @ dz2
    db2 = dz2.sum(axis=0)
    da1 = dz2 @ model.w2.T
    dz1 = dact(z1) * da1
    dw1 = np.empty_like(model.w1)
    dw1[:2] = xw.T @ dz1
    dw1[2:] = emb.T @ dz1
    db1 = dz1.sum(axis=0)
    for g in (dw1, db1, dw2, db2, dw3, db3):
        if not np.all(np.isfinite(g)):
            raise FloatingPointError("non-finite gradient")
    return GradBundle(loss, dw1, db1, dw2, db2, dw3, db3)


@singledispatch
def input_grad(model, x, t, sched: NoiseSchedule, cotangent):
    """Vector-Jacobian product of the predictor w.r.t. its spatial input.

    Returns ``cotangent^T d eps(x, t) / d x`` for each point; the step
    embedding is constant in x and contributes nothing.  ``x`` and
    ``cotangent`` may be single points or matching batches.
    """
    raise TypeError(f"no input gradient registered for {type(model).__name__}")


@input_grad.register
def _(model: EpsModel, x, t, sched: NoiseSchedule, cotangent):
    x = np.asarray(x, dtype=np.float64)
    cot = np.asarray(cotangent, dtype=np.float64)
    _, dact = ACTIVATIONS[model.activation]
    _, (_, _, z1, _, z2, _) = _forward(model, x, t, sched)
    dz2 = dact(z2) * (cot @ model.w3.T)
    dz1 = dact(z1) * (dz2 @ model.w2.T)
    return (dz1 @ model.w1[:2].T) / model.in_scale


def save_checkpoint(model: EpsModel, sched: NoiseSchedule, path) -> None:
    """Write a versioned JSON checkpoint (exact float round trip)."""
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "model": {
            "hidden_width": model.hidden_width,
            "embed_width": model.embed_width,
            "activation": model.activation,
            "freq_base": model.freq_base,
            "in_shift": model.in_shift.tolist(),
            "in_scale": model.in_scale,
            **{name: arr.tolist() for name, arr in model.params()},
        },
        "schedule": {"T": sched.T, "beta": sched.beta[1:].tolist()},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)
        fh.write("\n")


def load_checkpoint(path) -> tuple[EpsModel, NoiseSchedule]:
    """Load a checkpoint; raises a distinct error per failure mode."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except json.JSONDecodeError as exc:
        raise CheckpointFormatError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(payload, dict) or payload.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointFormatError(f"{path}: missing {CHECKPOINT_FORMAT!r} format tag")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise CheckpointVersionError(
            f"{path}: version {payload.get('version')!r}, expected {CHECKPOINT_VERSION}"
        )
    try:
        m = payload["model"]
        s = payload["schedule"]
        hidden = int(m["hidden_width"])
        embed = int(m["embed_width"])
        activation = m["activation"]
        freq_base = float(m["freq_base"])
        in_shift = np.asarray(m["in_shift"], dtype=np.float64)
        in_scale = float(m["in_scale"])
        raw = {name: np.asarray(m[name], dtype=np.float64) for name in PARAM_NAMES}
        T = int(s["T"])
        beta_body = np.asarray(s["beta"], dtype=np.float64)
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointFormatError(f"{path}: malformed checkpoint ({exc})") from exc
    if activation not in ACTIVATIONS:
        raise CheckpointFormatError(f"{path}: unknown activation {activation!r}")
    expected = {
        "w1": (2 + embed, hidden),
        "b1": (hidden,),
        "w2": (hidden, hidden),
        "b2": (hidden,),
        "w3": (hidden, 2),
        "b3": (2,),
    }
    for name, shape in expected.items():
        if raw[name].shape != shape:
            raise CheckpointShapeError(
                f"{path}: layer {name!r} has shape {raw[name].shape}, expected {shape}"
            )
    if beta_body.shape != (T,):
        raise CheckpointShapeError(
            f"{path}: schedule beta has shape {beta_body.shape}, expected ({T},)"
        )
    if in_shift.shape != (2,):
        raise CheckpointShapeError(
            f"{path}: in_shift has shape {in_shift.shape}, expected (2,)"
        )
    model = EpsModel(
        **raw,
        activation=activation,
        embed_width=embed,
        freq_base=freq_base,
        in_shift=in_shift,
        in_scale=in_scale,
    )
    beta = np.concatenate([[0.0], beta_body])
    alpha = 1.0 - beta
    alpha_bar = np.cumprod(alpha)
    for arr in (beta, alpha, alpha_bar):
        arr.flags.writeable = False
    return model, NoiseSchedule(beta=beta, alpha=alpha, alpha_bar=alpha_bar)


def with_params(model: EpsModel, new_params: dict[str, np.ndarray]) -> EpsModel:
    """Copy of the model with replaced parameter arrays."""
    return replace(model, **new_params)
