"""Synthetic wide-band waveform datasets and their binary file format.

Four dataset kinds, all built from sums of sinusoids with randomized
phases on a 1024-sample grid split into four 256-sample frames:

  sawtooth            fundamental f0 ~ U[0, 0.5) with every harmonic n*f0
                      below Nyquist at amplitude 1/n; real-valued.
  sawtooth-analytic   same spectra, but each component also contributes
                      cos(theta - pi/2) on the imaginary axis, i.e. the
                      one-sided complex exponential a*exp(i theta).
  inharmonic          five components with independent uniform frequencies,
                      amplitude 0.2 each; real-valued.
  inharmonic-analytic analytic variant of the above.

Component phases are drawn from U[0, 1) radians (deliberately narrower
than a full turn); pass full_phase_range=True to widen to U[0, 2*pi) for
sensitivity experiments. Frequencies are in cycles/sample with Nyquist at
0.5. Real-valued kinds carry an exactly zero imaginary part.

Every observation draws from its own counter-derived substream of the
dataset seed, so generation order (or parallelism) cannot change bytes.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .complex_ops import COMPLEX, FormatError, make_rng

N_SAMPLES = 1024
FRAME_LEN = 256
N_FRAMES = 4
NYQUIST = 0.5

_PARTITION_STREAMS = {"train": 0, "val": 1, "test": 2}


class DatasetKind(str, Enum):
    SAWTOOTH = "sawtooth"
    SAWTOOTH_ANALYTIC = "sawtooth-analytic"
    INHARMONIC = "inharmonic"
    INHARMONIC_ANALYTIC = "inharmonic-analytic"

    @property
    def analytic(self) -> bool:
        return self in (DatasetKind.SAWTOOTH_ANALYTIC, DatasetKind.INHARMONIC_ANALYTIC)


_KIND_TAGS = {
    DatasetKind.SAWTOOTH: 0,
    DatasetKind.SAWTOOTH_ANALYTIC: 1,
    DatasetKind.INHARMONIC: 2,
    DatasetKind.INHARMONIC_ANALYTIC: 3,
}


@dataclass(frozen=True)
class WaveformSpec:
    """Component list (frequency, amplitude, phase) plus the analytic flag."""

    freqs: np.ndarray
    amps: np.ndarray
    phases: np.ndarray
    analytic: bool

    def __post_init__(self):
        if not (len(self.freqs) == len(self.amps) == len(self.phases)):
            raise ValueError("component arrays must have equal length")
        if np.any(self.freqs >= NYQUIST) or np.any(self.freqs < 0):
            raise ValueError("component frequencies must lie in [0, 0.5)")
        if np.any(self.amps <= 0):
            raise ValueError("component amplitudes must be positive")

    @property
    def fundamental(self) -> float:
        return float(self.freqs[0])


@dataclass(frozen=True)
class Observation:
    samples: np.ndarray  # (1024,) complex128
    spec: WaveformSpec


def synthesize(spec: WaveformSpec) -> np.ndarray:
    """Render a spec on the 1024-sample grid.

    Real specs sum a_n cos(2 pi f_n t + phi_n) with a zero imaginary part;
    analytic specs sum a_n exp(i (2 pi f_n t + phi_n)). Components are
    summed in chunks to bound memory when harmonics number in thousands.
    """
    t = np.arange(N_SAMPLES, dtype=np.float64)
    out = np.zeros(N_SAMPLES, dtype=COMPLEX)
    chunk = 1024
    for start in range(0, len(spec.freqs), chunk):
        f = spec.freqs[start : start + chunk, None]
        a = spec.amps[start : start + chunk, None]
        p = spec.phases[start : start + chunk, None]
        theta = 2.0 * np.pi * f * t[None, :] + p
        if spec.analytic:
            out += (a * np.exp(1j * theta)).sum(axis=0)
        else:
            out += (a * np.cos(theta)).sum(axis=0) + 0j
    return out


def draw_sawtooth_spec(
    rng: np.random.Generator, analytic: bool = False, full_phase_range: bool = False
) -> WaveformSpec:
    """Fundamental U[0, 0.5); harmonics n = 2, 3, ... while n*f0 < Nyquist.

    Amplitudes follow 1/n including the fundamental (1/1). Each component
    gets an independent phase. Draw order: f0, then all phases.
    """
    f0 = rng.uniform(0.0, NYQUIST)
    while f0 == 0.0:  # uniform() can return its lower bound
        f0 = rng.uniform(0.0, NYQUIST)
    n_max = math.ceil(NYQUIST / f0) - 1
    n = np.arange(1, n_max + 1, dtype=np.float64)
    phase_hi = 2.0 * np.pi if full_phase_range else 1.0
    phases = rng.uniform(0.0, phase_hi, n_max)
    return WaveformSpec(freqs=f0 * n, amps=1.0 / n, phases=phases, analytic=analytic)


def draw_inharmonic_spec(
    rng: np.random.Generator, analytic: bool = False, full_phase_range: bool = False
) -> WaveformSpec:
    """Five independent uniform frequencies, amplitude 0.2 each.

    Draw order: the five frequencies, then the five phases.
    """
    freqs = rng.uniform(0.0, NYQUIST, 5)
    phase_hi = 2.0 * np.pi if full_phase_range else 1.0
    phases = rng.uniform(0.0, phase_hi, 5)
    return WaveformSpec(freqs=freqs, amps=np.full(5, 0.2), phases=phases, analytic=analytic)


def draw_spec(
    kind: DatasetKind, rng: np.random.Generator, full_phase_range: bool = False
) -> WaveformSpec:
    if kind in (DatasetKind.SAWTOOTH, DatasetKind.SAWTOOTH_ANALYTIC):
        return draw_sawtooth_spec(rng, kind.analytic, full_phase_range)
    return draw_inharmonic_spec(rng, kind.analytic, full_phase_range)


def gen_observation(
    kind: DatasetKind, rng: np.random.Generator, full_phase_range: bool = False
) -> Observation:
    spec = draw_spec(kind, rng, full_phase_range)
    return Observation(samples=synthesize(spec), spec=spec)


def make_analytic(spec: WaveformSpec) -> Observation:
    """Analytic observation from any spec: same components, one-sided."""
    a_spec = WaveformSpec(spec.freqs, spec.amps, spec.phases, analytic=True)
    return Observation(samples=synthesize(a_spec), spec=a_spec)


def periods_per_frame(spec: WaveformSpec) -> float:
    """Fundamental periods inside one 256-sample frame."""
    return FRAME_LEN * spec.fundamental


def split_frames(samples: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
    """Rectangular split into three input frames and the target frame."""
    samples = np.asarray(samples)
    if samples.shape != (N_SAMPLES,):
        raise ValueError(f"expected {N_SAMPLES} samples, got shape {samples.shape}")
    frames = [samples[i * FRAME_LEN : (i + 1) * FRAME_LEN] for i in range(N_FRAMES)]
    return frames[:3], frames[3]


# ---------------------------------------------------------------------------
# Bundles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DatasetBundle:
    """Train/val/test sample matrices plus the recipe that made them."""

    kind: DatasetKind
    seed: int
    train: np.ndarray  # (n_train, 1024)
    val: np.ndarray
    test: np.ndarray

    def partition(self, name: str) -> np.ndarray:
        if name not in _PARTITION_STREAMS:
            raise ValueError(f"unknown partition {name!r}")
        return getattr(self, name)


def _gen_partition(kind, seed, stream, count, full_phase_range):
    out = np.empty((count, N_SAMPLES), dtype=COMPLEX)
    for i in range(count):
        rng = make_rng(seed, stream, i)
        out[i] = gen_observation(kind, rng, full_phase_range).samples
    return out


def generate_bundle(
    kind: DatasetKind | str,
    seed: int,
    n_train: int = 10000,
    n_val: int = 1000,
    n_test: int = 1000,
    full_phase_range: bool = False,
) -> DatasetBundle:
    kind = DatasetKind(kind)
    return DatasetBundle(
        kind=kind,
        seed=int(seed),
        train=_gen_partition(kind, seed, 0, n_train, full_phase_range),
        val=_gen_partition(kind, seed, 1, n_val, full_phase_range),
        test=_gen_partition(kind, seed, 2, n_test, full_phase_range),
    )


def partition_specs(bundle: DatasetBundle, partition: str) -> list[WaveformSpec]:
    """Regenerate the per-observation specs (they are not stored on disk)."""
    stream = _PARTITION_STREAMS[partition]
    count = bundle.partition(partition).shape[0]
    return [
        draw_spec(bundle.kind, make_rng(bundle.seed, stream, i)) for i in range(count)
    ]


def bundles_equal(a: DatasetBundle, b: DatasetBundle) -> bool:
    return (
        a.kind == b.kind
        and a.seed == b.seed
        and all(
            x.shape == y.shape and x.tobytes() == y.tobytes()
            for x, y in ((a.train, b.train), (a.val, b.val), (a.test, b.test))
        )
    )


# ---------------------------------------------------------------------------
# File format
# ---------------------------------------------------------------------------
# magic "CVDS", version u8 = 1, kind u8, seed u64 LE, counts 3 x u32 LE,
# then train/val/test observations as 1024 little-endian float64 (re, im)
# pairs each. Specs are regenerable from the seed and are not stored.

_DATASET_MAGIC = b"CVDS"
_DATASET_VERSION = 1
_HEADER = struct.Struct("<BBQIII")


def write_dataset(bundle: DatasetBundle, path) -> None:
    header = _DATASET_MAGIC + _HEADER.pack(
        _DATASET_VERSION,
        _KIND_TAGS[bundle.kind],
        bundle.seed,
        bundle.train.shape[0],
        bundle.val.shape[0],
        bundle.test.shape[0],
    )
    with open(path, "wb") as fh:
        fh.write(header)
        for part in (bundle.train, bundle.val, bundle.test):
            fh.write(np.ascontiguousarray(part, dtype="<c16").tobytes())


def read_dataset(path) -> DatasetBundle:
    with open(path, "rb") as fh:
        blob = fh.read()
    head_len = len(_DATASET_MAGIC) + _HEADER.size
    if len(blob) < head_len:
        raise FormatError(f"dataset truncated in header at byte {len(blob)}")
    if blob[:4] != _DATASET_MAGIC:
        raise FormatError(f"bad dataset magic {blob[:4]!r} at byte 0")
    version, kind_tag, seed, n_train, n_val, n_test = _HEADER.unpack(blob[4:head_len])
    if version != _DATASET_VERSION:
        raise FormatError(f"unsupported dataset version {version} at byte 4")
    kinds = {v: k for k, v in _KIND_TAGS.items()}
    if kind_tag not in kinds:
        raise FormatError(f"unknown dataset kind tag {kind_tag} at byte 5")
    parts = {}
    offset = head_len
    for name, count in (("train", n_train), ("val", n_val), ("test", n_test)):
        nbytes = count * N_SAMPLES * 16
        chunk = blob[offset : offset + nbytes]
        if len(chunk) != nbytes:
            raise FormatError(f"dataset truncated in {name} at byte {offset + len(chunk)}")
        parts[name] = (
            np.frombuffer(chunk, dtype="<c16").astype(COMPLEX).reshape(count, N_SAMPLES)
        )
        offset += nbytes
    if offset != len(blob):
        raise FormatError(f"trailing bytes in dataset at byte {offset}")
    return DatasetBundle(kind=kinds[kind_tag], seed=seed, **parts)


# ---------------------------------------------------------------------------
# Model-facing views
# ---------------------------------------------------------------------------

def model_dims(kind: DatasetKind, field: str) -> tuple[int, int]:
    """(d_in, d_out) a model needs for this dataset kind and field.

    Real models on analytic data see split re/im vectors (twice the width);
    real models on real data see the real part only.
    """
    if field == "complex":
        return FRAME_LEN, FRAME_LEN
    if field == "real":
        return (2 * FRAME_LEN, 2 * FRAME_LEN) if kind.analytic else (FRAME_LEN, FRAME_LEN)
    raise ValueError(f"field must be 'complex' or 'real', got {field!r}")


def build_views(
    samples: np.ndarray, kind: DatasetKind, field: str
) -> tuple[list[np.ndarray], np.ndarray]:
    """Batch input/target matrices, one observation per column.

    Complex field: the raw complex frames, (256, n).
    Real field on analytic data: concatenated [re_0..re_255, im_0..im_255],
    (512, n), stored as complex with zero imaginary part.
    Real field on real data: the real part, (256, n).
    """
    samples = np.asarray(samples, dtype=COMPLEX)
    if samples.ndim == 1:
        samples = samples[None, :]
    if samples.shape[1] != N_SAMPLES:
        raise ValueError(f"expected {N_SAMPLES}-sample observations, got {samples.shape}")
    frames = [
        samples[:, i * FRAME_LEN : (i + 1) * FRAME_LEN].T for i in range(N_FRAMES)
    ]  # each (256, n) complex
    if field == "complex":
        return frames[:3], frames[3]
    if field != "real":
        raise ValueError(f"field must be 'complex' or 'real', got {field!r}")
    if kind.analytic:
        def widen(fr):
            return np.concatenate([fr.real, fr.imag], axis=0).astype(COMPLEX)
        return [widen(fr) for fr in frames[:3]], widen(frames[3])
    return [fr.real.astype(COMPLEX) for fr in frames[:3]], frames[3].real.astype(COMPLEX)
