"""Dense complex array helpers and deterministic random sources.

Every value in this package is a numpy complex128 array (real and imaginary
parts are 64-bit floats). numpy already does the arithmetic well, so this
module only pins down the conventions the rest of the package relies on:
finiteness is enforced at boundaries, shape mismatches raise a DimensionError
naming both shapes, and all randomness flows through seeded PCG64 generators
so that identical seeds give identical streams for a fixed numpy version.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

COMPLEX = np.complex128


class DimensionError(ValueError):
    """Operand shapes do not line up."""


class FormatError(ValueError):
    """A binary file does not match its declared layout."""


def ensure_finite(arr: np.ndarray, name: str = "array") -> np.ndarray:
    """Reject NaN/Inf instead of letting them propagate silently."""
    if not np.all(np.isfinite(arr)):
        raise ArithmeticError(f"non-finite values in {name}")
    return arr


def as_complex(values, name: str = "array") -> np.ndarray:
    arr = np.asarray(values, dtype=COMPLEX)
    return ensure_finite(arr, name)


def conj(t: np.ndarray) -> np.ndarray:
    """Elementwise complex conjugate, shape preserved."""
    return np.conjugate(t)


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Complex matrix product with an explicit shape contract."""
    a = np.asarray(a, dtype=COMPLEX)
    b = np.asarray(b, dtype=COMPLEX)
    if a.ndim != 2 or b.ndim != 2:
        raise DimensionError(f"matmul needs 2-d operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul inner extents disagree: {a.shape} x {b.shape}")
    return a @ b


def abs_arg(z: complex) -> tuple[float, float]:
    """Magnitude and phase of a complex scalar; abs_arg(0) is (0.0, 0.0)."""
    z = complex(z)
    return abs(z), float(np.arctan2(z.imag, z.real))


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Seeded generator; extra ints select independent substreams.

    Substreams derived from the same seed are independent by construction
    (SeedSequence), which lets observation- or trial-level work run in any
    order without changing output bytes.
    """
    return np.random.default_rng([int(seed), *[int(s) for s in stream]])


def sample_circular_gaussian(
    rng: np.random.Generator, shape: Sequence[int] | int, sigma: float
) -> np.ndarray:
    """Circularly symmetric complex Gaussian with E|z|^2 = sigma^2.

    Real and imaginary parts are independent N(0, sigma^2/2). The real part
    is drawn first, then the imaginary part, so streams are reproducible.
    """
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    scale = sigma / np.sqrt(2.0)
    re = rng.normal(0.0, scale, shape)
    im = rng.normal(0.0, scale, shape)
    return re + 1j * im
