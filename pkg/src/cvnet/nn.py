"""Activations, squared-error loss, and the recurrent predictor models.

Two model families share one forward path: complex-valued models use the
fully complex tanh (holomorphic, with poles on the imaginary axis), and
real-valued models run through the same complex engine with imaginary
parts pinned at exactly zero, which the arithmetic preserves bit-for-bit.
A bounded non-holomorphic alternative, the phase-preserving magnitude
squasher z / (1 + |z|), is registered as well.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Sequence

import numpy as np

from . import autodiff as ad
from .complex_ops import COMPLEX, FormatError, make_rng, sample_circular_gaussian

COSH_SINGULARITY_TOL = 1e-30


class SingularityError(ArithmeticError):
    """An activation was evaluated too close to one of its poles."""


# ---------------------------------------------------------------------------
# Activations
# ---------------------------------------------------------------------------

def ctanh_values(z: np.ndarray) -> np.ndarray:
    """Elementwise complex tanh with pole detection.

    tanh has poles at i*pi/2*(2k+1); an element with |cosh z| below
    COSH_SINGULARITY_TOL raises SingularityError naming the element so a
    training loop can surface it as a diverged trial instead of a crash.
    """
    z = np.asarray(z, dtype=COMPLEX)
    with np.errstate(over="ignore", invalid="ignore"):
        mag = np.abs(np.cosh(z))
        near = mag < COSH_SINGULARITY_TOL
        if near.any():
            idx = int(np.argmax(near))
            raise SingularityError(
                f"tanh pole at flat index {idx}: z = {z.reshape(-1)[idx]}"
            )
        return np.tanh(z)


def _ctanh_pair(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    t = ctanh_values(z)
    return 1.0 - t * t, np.zeros_like(z)


def split_magnitude_values(z: np.ndarray) -> np.ndarray:
    """Bounded magnitude squasher z / (1 + |z|); preserves the phase."""
    z = np.asarray(z, dtype=COMPLEX)
    return z / (1.0 + np.abs(z))


def _split_magnitude_pair(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # J  = 1/(1+m) - m / (2 (1+m)^2)
    # Jc = -z^2 / (2 m (1+m)^2), with the limit (1, 0) at z = 0.
    m = np.abs(z)
    denom = (1.0 + m) ** 2
    j = 1.0 / (1.0 + m) - m / (2.0 * denom)
    safe_m = np.where(m == 0.0, 1.0, m)
    jc = np.where(m == 0.0, 0.0, -z * z / (2.0 * safe_m * denom))
    return j.astype(COMPLEX), jc.astype(COMPLEX)


ad.register_op(
    ad.ElementwiseOp("ctanh", ctanh_values, _ctanh_pair, holomorphic=True, probe_radius=1.2)
)
ad.register_op(
    ad.ElementwiseOp(
        "split_magnitude",
        split_magnitude_values,
        _split_magnitude_pair,
        holomorphic=False,
        probe_radius=3.0,
    )
)


def ctanh(x) -> ad.Var:
    """Complex tanh graph node; caches the forward value for backward."""
    x = ad.as_var(x)
    t = ctanh_values(x.value)

    def emit(gamma, delta):
        return (delta * np.conj(1.0 - t * t),)

    return ad.Var(t, "ctanh", (x,), emit, holomorphic=True)


def split_magnitude(x) -> ad.Var:
    x = ad.as_var(x)
    xv = x.value

    def emit(gamma, delta):
        j, jc = _split_magnitude_pair(xv)
        return (gamma * jc + delta * np.conj(j),)

    return ad.Var(split_magnitude_values(xv), "split_magnitude", (x,), emit)


class ActivationKind(str, Enum):
    COMPLEX_TANH = "complex-tanh"
    SPLIT_MAGNITUDE = "split-magnitude"
    LINEAR = "linear"
    REAL_TANH = "real-tanh"


def apply_activation(x: ad.Var, kind: ActivationKind) -> ad.Var:
    if kind in (ActivationKind.COMPLEX_TANH, ActivationKind.REAL_TANH):
        # real-tanh is the restriction of complex tanh to zero-imaginary
        # inputs; the complex engine keeps the imaginary part exactly 0.
        return ctanh(x)
    if kind is ActivationKind.SPLIT_MAGNITUDE:
        return split_magnitude(x)
    if kind is ActivationKind.LINEAR:
        return x
    raise ValueError(f"unknown activation {kind!r}")


# ---------------------------------------------------------------------------
# Loss
# ---------------------------------------------------------------------------

def dof_multiplier(field: str) -> int:
    """Real degrees of freedom per stored element: 2 if complex, else 1."""
    if field == "complex":
        return 2
    if field == "real":
        return 1
    raise ValueError(f"field must be 'complex' or 'real', got {field!r}")


def mse_loss(pred: ad.Var, target: np.ndarray, field: str = "complex") -> ad.Var:
    """Mean squared error per real degree of freedom.

    Normalizing by real DOF (a complex element counts twice) makes errors
    of complex models and of real models on split re/im data comparable.
    """
    t = np.asarray(target, dtype=COMPLEX)
    return ad.mse(pred, t, dof_multiplier(field) * t.size)


# ---------------------------------------------------------------------------
# Recurrent model
# ---------------------------------------------------------------------------

PARAM_ORDER = ("w_in", "b_in", "w_rec", "b_rec", "w_out", "b_out")

_FIELD_TAGS = {"complex": 0, "real": 1}
_ACTIVATION_TAGS = {
    ActivationKind.COMPLEX_TANH: 0,
    ActivationKind.SPLIT_MAGNITUDE: 1,
    ActivationKind.LINEAR: 2,
    ActivationKind.REAL_TANH: 3,
}
_CHECKPOINT_MAGIC = b"CVNN"
_CHECKPOINT_VERSION = 1


@dataclass
class RecurrentModel:
    """Single-recurrent-layer predictor: hidden state h, linear output.

    h_t = act(W_in x_t + b_in + W_rec h_{t-1} + b_rec)
    y   = W_out h_T + b_out

    Biases are stored as column vectors so they broadcast over a batch of
    column observations. b_in and b_rec are mathematically redundant but
    both kept; the three-bias layout is what the parameter totals assume.
    """

    field: str
    activation: ActivationKind
    w_in: np.ndarray
    b_in: np.ndarray
    w_rec: np.ndarray
    b_rec: np.ndarray
    w_out: np.ndarray
    b_out: np.ndarray

    def __post_init__(self):
        if self.field not in _FIELD_TAGS:
            raise ValueError(f"field must be 'complex' or 'real', got {self.field!r}")
        if self.field == "real":
            if self.activation not in (ActivationKind.REAL_TANH, ActivationKind.LINEAR):
                raise ValueError("real-field models use the real-tanh (or linear) activation")
            for name, arr in self.params().items():
                if np.any(arr.imag != 0.0):
                    raise ValueError(f"real-field model has nonzero imaginary part in {name}")
        h, d_in = self.w_in.shape
        if self.w_rec.shape != (h, h):
            raise ValueError(f"w_rec shape {self.w_rec.shape} does not match hidden size {h}")
        if self.w_out.shape[1] != h:
            raise ValueError(f"w_out shape {self.w_out.shape} does not match hidden size {h}")
        if self.b_in.shape != (h, 1) or self.b_rec.shape != (h, 1):
            raise ValueError("hidden biases must be column vectors of the hidden size")
        if self.b_out.shape != (self.w_out.shape[0], 1):
            raise ValueError("output bias must be a column vector of the output size")

    @property
    def d_in(self) -> int:
        return self.w_in.shape[1]

    @property
    def hidden(self) -> int:
        return self.w_in.shape[0]

    @property
    def d_out(self) -> int:
        return self.w_out.shape[0]

    def params(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PARAM_ORDER}

    def param_count(self) -> int:
        return sum(arr.size for arr in self.params().values())

    def copy(self) -> "RecurrentModel":
        return RecurrentModel(
            self.field,
            self.activation,
            **{name: arr.copy() for name, arr in self.params().items()},
        )


def init_model(
    d_in: int,
    hidden: int,
    d_out: int,
    field: str = "complex",
    init_scale: float = 1.0,
    seed: int = 0,
    activation: ActivationKind | None = None,
) -> RecurrentModel:
    """Weights ~ circular Gaussian with sigma = init_scale / sqrt(fan_in).

    Real-field models put the whole variance on the real part so E|w|^2
    matches the complex case. Biases start at zero.
    """
    if activation is None:
        activation = ActivationKind.COMPLEX_TANH if field == "complex" else ActivationKind.REAL_TANH
    rng = make_rng(seed, 11)

    def draw(shape, fan_in):
        sigma = init_scale / np.sqrt(fan_in)
        if field == "complex":
            return sample_circular_gaussian(rng, shape, sigma)
        return rng.normal(0.0, sigma, shape).astype(np.float64) + 0j

    return RecurrentModel(
        field=field,
        activation=activation,
        w_in=draw((hidden, d_in), d_in),
        b_in=np.zeros((hidden, 1), dtype=COMPLEX),
        w_rec=draw((hidden, hidden), hidden),
        b_rec=np.zeros((hidden, 1), dtype=COMPLEX),
        w_out=draw((d_out, hidden), hidden),
        b_out=np.zeros((d_out, 1), dtype=COMPLEX),
    )


def param_vars(model: RecurrentModel) -> dict[str, ad.Var]:
    """Fresh leaf Vars sharing the model's parameter storage."""
    return {name: ad.Var(arr) for name, arr in model.params().items()}


def rnn_step(
    params: Mapping[str, ad.Var], h_prev: ad.Var, x, activation: ActivationKind
) -> ad.Var:
    """One recurrent update h = act(W_in x + b_in + W_rec h_prev + b_rec)."""
    pre = params["w_in"] @ ad.as_var(x) + params["b_in"] + params["w_rec"] @ h_prev + params["b_rec"]
    return apply_activation(pre, activation)


def predict_frame(
    params: Mapping[str, ad.Var], frames: Sequence, activation: ActivationKind
) -> ad.Var:
    """Run three input frames through the recurrence; linear readout.

    frames are (d_in, batch) columns; the initial hidden state is zero.
    """
    if len(frames) != 3:
        raise ValueError(f"expected exactly 3 input frames, got {len(frames)}")
    frames = [ad.as_var(f) for f in frames]
    hidden = params["w_in"].value.shape[0]
    batch = frames[0].value.shape[1]
    h = ad.Var(np.zeros((hidden, batch), dtype=COMPLEX))
    for x in frames:
        h = rnn_step(params, h, x, activation)
    return params["w_out"] @ h + params["b_out"]


def forward_loss(
    model: RecurrentModel, frames: Sequence[np.ndarray], target: np.ndarray
) -> tuple[ad.Var, dict[str, ad.Var]]:
    """Build the full loss graph for one batch; returns (loss, param vars)."""
    pv = param_vars(model)
    pred = predict_frame(pv, frames, model.activation)
    return mse_loss(pred, target, model.field), pv


# ---------------------------------------------------------------------------
# Checkpoint format
# ---------------------------------------------------------------------------
# magic "CVNN", version u8, field u8, d_in/hidden/d_out u32 LE, activation u8,
# then parameters in PARAM_ORDER as little-endian float64 (re, im) pairs.

def save_model(model: RecurrentModel, path) -> None:
    header = _CHECKPOINT_MAGIC + struct.pack(
        "<BBIIIB",
        _CHECKPOINT_VERSION,
        _FIELD_TAGS[model.field],
        model.d_in,
        model.hidden,
        model.d_out,
        _ACTIVATION_TAGS[model.activation],
    )
    with open(path, "wb") as fh:
        fh.write(header)
        for arr in model.params().values():
            fh.write(np.ascontiguousarray(arr, dtype="<c16").tobytes())


def load_model(path) -> RecurrentModel:
    with open(path, "rb") as fh:
        blob = fh.read()
    head_len = len(_CHECKPOINT_MAGIC) + struct.calcsize("<BBIIIB")
    if len(blob) < head_len:
        raise FormatError(f"checkpoint truncated in header at byte {len(blob)}")
    if blob[:4] != _CHECKPOINT_MAGIC:
        raise FormatError(f"bad checkpoint magic {blob[:4]!r} at byte 0")
    version, field_tag, d_in, hidden, d_out, act_tag = struct.unpack(
        "<BBIIIB", blob[4:head_len]
    )
    if version != _CHECKPOINT_VERSION:
        raise FormatError(f"unsupported checkpoint version {version} at byte 4")
    fields = {v: k for k, v in _FIELD_TAGS.items()}
    acts = {v: k for k, v in _ACTIVATION_TAGS.items()}
    if field_tag not in fields:
        raise FormatError(f"unknown field tag {field_tag} at byte 5")
    if act_tag not in acts:
        raise FormatError(f"unknown activation tag {act_tag} at byte {head_len - 1}")
    shapes = {
        "w_in": (hidden, d_in),
        "b_in": (hidden, 1),
        "w_rec": (hidden, hidden),
        "b_rec": (hidden, 1),
        "w_out": (d_out, hidden),
        "b_out": (d_out, 1),
    }
    offset = head_len
    arrays = {}
    for name in PARAM_ORDER:
        shape = shapes[name]
        nbytes = int(np.prod(shape)) * 16
        chunk = blob[offset : offset + nbytes]
        if len(chunk) != nbytes:
            raise FormatError(f"checkpoint truncated in {name} at byte {offset + len(chunk)}")
        arrays[name] = np.frombuffer(chunk, dtype="<c16").astype(COMPLEX).reshape(shape)
        offset += nbytes
    if offset != len(blob):
        raise FormatError(f"trailing bytes in checkpoint at byte {offset}")
    return RecurrentModel(field=fields[field_tag], activation=acts[act_tag], **arrays)
