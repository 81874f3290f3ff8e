"""Reverse-mode differentiation for complex-valued computation graphs.

Every differentiable quantity is a Var wrapping a complex128 array. An op
producing a Var records an emission closure that encodes the op's two
Wirtinger Jacobians J = dF/dz and Jc = dF/d(conj z) as matrix-free products.

backward() propagates a single channel, the conjugate cogradient
delta = dL/d(conj z), in reverse topological order. Given the accumulated
delta on a node's output, the contribution pushed to an input is

    gamma * Jc + delta * conj(J)      with gamma = conj(delta),

which is exact whenever the map from any wire to the loss is real-valued.
That holds iff the loss root itself is an intrinsically real-valued op
(its value is real for *all* complex inputs, e.g. a squared-error node),
so backward() refuses any other root. The root itself is seeded with the
exact two-channel pair (gamma, delta) = (seed, 0); for a squared-error
root this makes the emitted cogradient equal to the residual with no
factor-two fudge. backward_dual() propagates both channels without the
symmetry shortcut and is the reference path for debugging.

wirtinger_pair_numeric() computes (J, Jc) by central finite differences on
the real and imaginary axes and is the independent oracle every analytic
derivative in the registry is validated against.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .complex_ops import COMPLEX, DimensionError, ensure_finite

EPS_DEFAULT = 1e-6
REAL_LOSS_IMAG_TOL = 1e-12

# Ops whose output is real for every complex input. Only these may be the
# root of backward(); see the module docstring for why.
REAL_ROOT_OPS = {"mse", "sum_abs2"}


class GradientContractError(ValueError):
    """backward() was called on a graph violating its loss contract."""


class NumericError(ArithmeticError):
    """A gradient went non-finite; the message names the producing node."""


class EvaluationError(ArithmeticError):
    """The finite-difference oracle hit a non-finite function value."""


# ---------------------------------------------------------------------------
# Graph
# ---------------------------------------------------------------------------

class Var:
    """Node in a complex computation graph.

    value: complex128 ndarray (any shape, scalars are shape ()).
    grad:  conjugate cogradient dL/d(conj z), filled in by backward().
    emit:  closure (gamma, delta) -> per-parent contributions, or None
           for leaves. gamma plays the role of dL/dz on the output wire.
    """

    __slots__ = ("value", "grad", "op", "parents", "emit", "holomorphic")

    def __init__(self, value, op="leaf", parents=(), emit=None, holomorphic=False):
        self.value = np.asarray(value, dtype=COMPLEX)
        if op == "leaf":
            ensure_finite(self.value, "leaf value")
        self.grad = None
        self.op = op
        self.parents = tuple(parents)
        self.emit = emit
        self.holomorphic = holomorphic

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Var(op={self.op!r}, shape={self.value.shape})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return neg(self)

    def conj(self):
        return conj(self)


def as_var(x) -> Var:
    return x if isinstance(x, Var) else Var(x)


def _unbroadcast(arr: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast cotangent back down to the original operand shape."""
    extra = arr.ndim - len(shape)
    if extra > 0:
        arr = arr.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (have, want) in enumerate(zip(arr.shape, shape)) if want == 1 and have != 1)
    if axes:
        arr = arr.sum(axis=axes, keepdims=True)
    return arr.reshape(shape)


# ---------------------------------------------------------------------------
# Primitive ops
# ---------------------------------------------------------------------------

def add(x, y) -> Var:
    x, y = as_var(x), as_var(y)
    value = x.value + y.value
    xs, ys = x.value.shape, y.value.shape

    def emit(gamma, delta):
        return _unbroadcast(delta, xs), _unbroadcast(delta, ys)

    return Var(value, "add", (x, y), emit, holomorphic=True)


def neg(x) -> Var:
    x = as_var(x)

    def emit(gamma, delta):
        return (-delta,)

    return Var(-x.value, "neg", (x,), emit, holomorphic=True)


def sub(x, y) -> Var:
    x, y = as_var(x), as_var(y)
    value = x.value - y.value
    xs, ys = x.value.shape, y.value.shape

    def emit(gamma, delta):
        return _unbroadcast(delta, xs), _unbroadcast(-delta, ys)

    return Var(value, "sub", (x, y), emit, holomorphic=True)


def mul(x, y) -> Var:
    """Elementwise (Hadamard) product; holomorphic in each operand."""
    x, y = as_var(x), as_var(y)
    value = x.value * y.value
    xv, yv = x.value, y.value

    def emit(gamma, delta):
        return (
            _unbroadcast(delta * np.conj(yv), xv.shape),
            _unbroadcast(delta * np.conj(xv), yv.shape),
        )

    return Var(value, "mul", (x, y), emit, holomorphic=True)


def scale(x, c: complex) -> Var:
    x = as_var(x)
    c = complex(c)

    def emit(gamma, delta):
        return (delta * np.conj(c),)

    return Var(x.value * c, "scale", (x,), emit, holomorphic=True)


def matmul(x, y) -> Var:
    x, y = as_var(x), as_var(y)
    xv, yv = x.value, y.value
    if xv.ndim != 2 or yv.ndim != 2:
        raise DimensionError(f"matmul needs 2-d operands, got {xv.shape} and {yv.shape}")
    if xv.shape[1] != yv.shape[0]:
        raise DimensionError(f"matmul inner extents disagree: {xv.shape} x {yv.shape}")
    value = xv @ yv

    def emit(gamma, delta):
        return delta @ np.conj(yv).T, np.conj(xv).T @ delta

    return Var(value, "matmul", (x, y), emit, holomorphic=True)


def conj(x) -> Var:
    """Complex conjugate as a graph node: J = 0, Jc = 1."""
    x = as_var(x)

    def emit(gamma, delta):
        return (gamma,)

    return Var(np.conj(x.value), "conj", (x,), emit)


def elementwise(x, name: str) -> Var:
    """Apply a registered elementwise op as a graph node."""
    x = as_var(x)
    op = REGISTRY[name]
    value = op.fn(x.value)
    xv = x.value

    if op.holomorphic:
        def emit(gamma, delta):
            j, _ = op.pair(xv)
            return (delta * np.conj(j),)
    else:
        def emit(gamma, delta):
            j, jc = op.pair(xv)
            return (gamma * jc + delta * np.conj(j),)

    return Var(value, name, (x,), emit, holomorphic=op.holomorphic)


def sum_abs2(x) -> Var:
    """L = sum_k z_k conj(z_k), a real scalar; valid backward() root.

    As the root (seeded with (1, 0)) the emitted cogradient is exactly z.
    """
    x = as_var(x)
    xv = x.value
    value = np.sum(xv.real ** 2 + xv.imag ** 2)

    def emit(gamma, delta):
        return ((gamma + delta) * xv,)

    return Var(value, "sum_abs2", (x,), emit)


def mse(pred, target, n_dof: int) -> Var:
    """Squared error sum(e conj(e)) / n_dof as a real scalar graph node.

    n_dof counts real degrees of freedom, so one complex element counts as
    two when complex- and real-valued predictors are compared. The emitted
    cogradient at the root is e / n_dof.
    """
    pred = as_var(pred)
    t = np.asarray(target, dtype=COMPLEX)
    if pred.value.shape != t.shape:
        raise DimensionError(f"prediction shape {pred.value.shape} != target shape {t.shape}")
    if n_dof <= 0:
        raise ValueError(f"n_dof must be positive, got {n_dof}")
    e = pred.value - t
    value = np.sum(e.real ** 2 + e.imag ** 2) / n_dof

    def emit(gamma, delta):
        return ((gamma + delta) * (e / n_dof),)

    return Var(value, "mse", (pred,), emit)


# ---------------------------------------------------------------------------
# Backward passes
# ---------------------------------------------------------------------------

def _toposort(root: Var) -> list[Var]:
    order: list[Var] = []
    seen: set[int] = set()
    stack: list[tuple[Var, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            stack.append((p, False))
    return order  # parents precede consumers


def _check_real_root(root: Var) -> None:
    if root.value.size != 1:
        raise GradientContractError(f"loss root must be scalar, got shape {root.value.shape}")
    if root.op not in REAL_ROOT_OPS:
        raise GradientContractError(
            f"loss root must be an intrinsically real-valued op {sorted(REAL_ROOT_OPS)}, got '{root.op}'"
        )
    re = float(np.abs(root.value.real.max()))
    im = float(np.abs(root.value.imag.max()))
    if im > REAL_LOSS_IMAG_TOL * max(1.0, re):
        raise GradientContractError(f"loss is not real: value {complex(root.value.reshape(-1)[0])}")


def backward(root: Var, seed: float = 1.0) -> dict[Var, np.ndarray]:
    """Fill .grad with dL/d(conj z) for every node; return the store.

    The store maps each node (by identity) to its conjugate cogradient;
    the plain cogradient dL/dz is its conjugate since the loss is real.
    """
    _check_real_root(root)
    order = _toposort(root)
    deltas: dict[int, np.ndarray] = {}
    store: dict[Var, np.ndarray] = {}
    zero = np.zeros((), dtype=COMPLEX)
    for node in reversed(order):
        if node is root:
            gamma = np.asarray(seed, dtype=COMPLEX)
            delta = zero
            node.grad = gamma.copy()  # seed, by convention
        else:
            delta = deltas.pop(id(node), None)
            if delta is None:
                delta = np.zeros(node.value.shape, dtype=COMPLEX)
            gamma = np.conj(delta)
            node.grad = delta
        store[node] = node.grad
        if node.emit is None:
            continue
        contribs = node.emit(gamma, delta)
        for parent, c in zip(node.parents, contribs):
            if c is None:
                continue
            if not np.all(np.isfinite(c)):
                raise NumericError(f"non-finite gradient emitted by node '{node.op}'")
            prev = deltas.get(id(parent))
            deltas[id(parent)] = c if prev is None else prev + c
    return store


def backward_dual(
    root: Var, seed: float = 1.0, symmetry_rtol: float | None = 1e-10
) -> dict[Var, np.ndarray]:
    """Reference path: propagate both channels (dL/dz, dL/d(conj z)).

    Uses each op's emission twice; the gamma-channel contribution is
    conj(emit(conj(delta), conj(gamma))). When symmetry_rtol is set, checks
    dL/dz = conj(dL/d(conj z)) on every non-root node, which must hold for
    a real loss.
    """
    _check_real_root(root)
    order = _toposort(root)
    gammas: dict[int, np.ndarray] = {}
    deltas: dict[int, np.ndarray] = {}
    store: dict[Var, np.ndarray] = {}
    for node in reversed(order):
        if node is root:
            gamma = np.asarray(seed, dtype=COMPLEX)
            delta = np.zeros((), dtype=COMPLEX)
        else:
            gamma = gammas.pop(id(node), None)
            delta = deltas.pop(id(node), None)
            if gamma is None:
                gamma = np.zeros(node.value.shape, dtype=COMPLEX)
            if delta is None:
                delta = np.zeros(node.value.shape, dtype=COMPLEX)
            if symmetry_rtol is not None:
                err = float(np.max(np.abs(np.conj(gamma) - delta)))
                bound = symmetry_rtol * max(1.0, float(np.max(np.abs(delta))))
                if err > bound:
                    raise GradientContractError(
                        f"cogradient symmetry violated at node '{node.op}': |conj(dL/dz) - dL/dzbar| = {err:.3e}"
                    )
        store[node] = delta
        if node.emit is None:
            continue
        d_contribs = node.emit(gamma, delta)
        g_contribs = tuple(
            None if c is None else np.conj(c)
            for c in node.emit(np.conj(delta), np.conj(gamma))
        )
        for parent, dc, gc in zip(node.parents, d_contribs, g_contribs):
            if dc is not None:
                prev = deltas.get(id(parent))
                deltas[id(parent)] = dc if prev is None else prev + dc
            if gc is not None:
                prev = gammas.get(id(parent))
                gammas[id(parent)] = gc if prev is None else prev + gc
    return store


# ---------------------------------------------------------------------------
# Jacobian pairs and the finite-difference oracle
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class JacobianPair:
    """The two Wirtinger Jacobians (dF/dz, dF/d(conj z)) of a map C^n -> C^m."""

    j: np.ndarray
    jc: np.ndarray

    def __post_init__(self):
        if self.j.shape != self.jc.shape:
            raise DimensionError(f"pair shapes differ: {self.j.shape} vs {self.jc.shape}")

    @classmethod
    def holomorphic(cls, j: np.ndarray) -> "JacobianPair":
        # Jc is zero by construction, never computed.
        j = np.asarray(j, dtype=COMPLEX)
        return cls(j, np.zeros_like(j))


def compose_pairs(outer: JacobianPair, inner: JacobianPair) -> JacobianPair:
    """Jacobian pair of outer(inner(z)) by the general composition rule.

    J  = J_out J_in + Jc_out conj(Jc_in)
    Jc = J_out Jc_in + Jc_out conj(J_in)
    """
    if outer.j.shape[1] != inner.j.shape[0]:
        raise DimensionError(
            f"composition extents disagree: outer {outer.j.shape} x inner {inner.j.shape}"
        )
    j = outer.j @ inner.j + outer.jc @ np.conj(inner.jc)
    jc = outer.j @ inner.jc + outer.jc @ np.conj(inner.j)
    return JacobianPair(j, jc)


def wirtinger_pair_numeric(
    f: Callable[[np.ndarray], np.ndarray], z0, eps: float = EPS_DEFAULT
) -> JacobianPair:
    """Central finite-difference estimate of (dF/dz, dF/d(conj z)) at z0.

    Perturbs each element along the real and imaginary axes and combines
    dF/dx and dF/dy as J = (dF/dx - i dF/dy)/2, Jc = (dF/dx + i dF/dy)/2.
    This is the independent oracle used by the gradient-check suite.
    """
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    z0 = np.asarray(z0, dtype=COMPLEX)

    def probe(z):
        y = np.asarray(f(z), dtype=COMPLEX)
        if not np.all(np.isfinite(y)):
            raise EvaluationError(f"non-finite function value at probe point {z!r}")
        return y.ravel()

    y0 = probe(z0)
    n, m = z0.size, y0.size
    j = np.empty((m, n), dtype=COMPLEX)
    jc = np.empty((m, n), dtype=COMPLEX)
    flat = z0.ravel()
    for k in range(n):
        zp = flat.copy()
        zp[k] = flat[k] + eps
        zm = flat.copy()
        zm[k] = flat[k] - eps
        dfdx = (probe(zp.reshape(z0.shape)) - probe(zm.reshape(z0.shape))) / (2 * eps)
        zp = flat.copy()
        zp[k] = flat[k] + 1j * eps
        zm = flat.copy()
        zm[k] = flat[k] - 1j * eps
        dfdy = (probe(zp.reshape(z0.shape)) - probe(zm.reshape(z0.shape))) / (2 * eps)
        j[:, k] = 0.5 * (dfdx - 1j * dfdy)
        jc[:, k] = 0.5 * (dfdx + 1j * dfdy)
    return JacobianPair(j, jc)


def is_holomorphic_numeric(
    f: Callable[[np.ndarray], np.ndarray], probes: Sequence, tol: float = 1e-8
) -> bool:
    """True iff the numeric Jc vanishes (max-norm < tol) at every probe."""
    probes = list(probes)
    if not probes:
        raise ValueError("need at least one probe point")
    for p in probes:
        pair = wirtinger_pair_numeric(f, p)
        if np.max(np.abs(pair.jc)) >= tol:
            return False
    return True


# ---------------------------------------------------------------------------
# Elementwise op registry
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ElementwiseOp:
    """A scalar op applied elementwise, with its analytic derivative pair.

    pair(z) returns the elementwise (J, Jc) diagonals. probe_radius bounds
    |z| for random test probes so they stay clear of singularities.
    """

    name: str
    fn: Callable[[np.ndarray], np.ndarray]
    pair: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]
    holomorphic: bool
    probe_radius: float = 2.0


REGISTRY: dict[str, ElementwiseOp] = {}


def register_op(op: ElementwiseOp) -> ElementwiseOp:
    if op.name in REGISTRY:
        raise ValueError(f"op '{op.name}' already registered")
    REGISTRY[op.name] = op
    return op


def pair_at(name: str, z) -> JacobianPair:
    """Materialized (diagonal) Jacobian pair of a registered op at z."""
    z = np.asarray(z, dtype=COMPLEX)
    j_el, jc_el = REGISTRY[name].pair(z)
    j_el = np.broadcast_to(np.asarray(j_el, dtype=COMPLEX), z.shape)
    jc_el = np.broadcast_to(np.asarray(jc_el, dtype=COMPLEX), z.shape)
    return JacobianPair(np.diag(j_el.ravel()), np.diag(jc_el.ravel()))


def _ones_zeros(z):
    return np.ones_like(z), np.zeros_like(z)


register_op(ElementwiseOp("linear", lambda z: z.copy(), _ones_zeros, holomorphic=True))

register_op(
    ElementwiseOp("square", lambda z: z * z, lambda z: (2 * z, np.zeros_like(z)), holomorphic=True)
)

register_op(
    ElementwiseOp(
        "conj", np.conj, lambda z: (np.zeros_like(z), np.ones_like(z)), holomorphic=False
    )
)

register_op(
    ElementwiseOp(
        "re",
        lambda z: z.real.astype(COMPLEX),
        lambda z: (np.full_like(z, 0.5), np.full_like(z, 0.5)),
        holomorphic=False,
    )
)

register_op(
    ElementwiseOp(
        "abs2",
        lambda z: (z.real ** 2 + z.imag ** 2).astype(COMPLEX),
        lambda z: (np.conj(z), z.copy()),
        holomorphic=False,
    )
)
