"""Truncated Fock-space linear algebra over labeled bosonic modes.

States are stored as density matrices on the tensor product of the listed
modes, ordered as in ``MultiModeState.modes``.  All mode-local operations
reshape the matrix to a ``(d1, ..., dn, d1, ..., dn)`` tensor and contract the
relevant axes, so nothing larger than the state itself is ever built.

Quadrature convention: ``x = (a + a^dagger) / sqrt(2)``, so the vacuum
variance is ``sigma0**2 = 1/2``.  Homodyne windows are specified as a TOTAL
width in units of ``sigma0``.

Beamsplitter convention: ``apply_beamsplitter(s, m1, m2, T)`` maps the creation
operators as ``a1 -> t a1 + r a2`` and ``a2 -> t a2 - r a1`` with
``t = sqrt(T)``, ``r = sqrt(1 - T)``.  Swapping the two labels gives the
inverse transformation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
from scipy import integrate

SIGMA0 = 1 / math.sqrt(2)


class FockError(ValueError):
    """Raised on invalid mode labels, dimensions or parameters."""


@dataclass(frozen=True)
class ModeSpec:
    label: str
    dim: int

    def __post_init__(self):
        if self.dim < 2:
            raise FockError(f"mode {self.label!r}: dim must be >= 2, got {self.dim}")


@dataclass(frozen=True, eq=False)
class MultiModeState:
    """Density matrix over an ordered register of truncated modes.

    ``normalized=False`` marks heralded branches whose trace carries a
    success probability; call :meth:`normalize` explicitly to drop it.
    """

    modes: tuple[ModeSpec, ...]
    matrix: np.ndarray = field(repr=False)
    normalized: bool = True

    def __post_init__(self):
        modes = tuple(self.modes)
        object.__setattr__(self, "modes", modes)
        labels = [m.label for m in modes]
        if len(set(labels)) != len(labels):
            raise FockError(f"duplicate mode labels: {labels}")
        n = int(np.prod([m.dim for m in modes]))
        matrix = np.asarray(self.matrix, dtype=complex)
        if matrix.shape != (n, n):
            raise FockError(f"matrix shape {matrix.shape} does not match register size {n}")
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)

    @classmethod
    def from_ket(cls, modes: Sequence[ModeSpec], ket: np.ndarray, normalized=True):
        ket = np.asarray(ket, dtype=complex).reshape(-1)
        return cls(tuple(modes), np.outer(ket, ket.conj()), normalized)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(m.label for m in self.modes)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(m.dim for m in self.modes)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise FockError(f"unknown mode {label!r}; register has {self.labels}") from None

    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def normalize(self) -> "MultiModeState":
        tr = self.trace()
        if tr <= 0:
            raise FockError("cannot normalize a state with non-positive trace")
        return MultiModeState(self.modes, self.matrix / tr, True)

    def tensor(self) -> np.ndarray:
        """Matrix reshaped to ``(d1, ..., dn, d1, ..., dn)``."""
        return self.matrix.reshape(self.dims + self.dims)

    def with_matrix(self, matrix: np.ndarray, modes=None) -> "MultiModeState":
        return MultiModeState(self.modes if modes is None else modes, matrix, self.normalized)

    def check(self, atol: float = 1e-9) -> None:
        """Raise if the physical invariants do not hold."""
        m = self.matrix
        if not np.allclose(m, m.conj().T, atol=1e-10):
            raise FockError("matrix is not Hermitian")
        ev = np.linalg.eigvalsh(m)
        tr = ev.sum()
        if tr <= 0 or ev.min() / tr < -atol:
            raise FockError(f"matrix is not positive semidefinite (min eigenvalue {ev.min():.3g})")
        if self.normalized and abs(tr - 1) > atol:
            raise FockError(f"normalized state has trace {tr}")


def basis_ket(dims: Sequence[int], occupation: Sequence[int]) -> np.ndarray:
    """Product Fock ket ``|n1, n2, ...>`` as a flat vector."""
    v = np.zeros(dims, dtype=complex)
    v[tuple(occupation)] = 1.0
    return v.reshape(-1)


def fock_state(label: str, dim: int, n: int) -> MultiModeState:
    if not 0 <= n < dim:
        raise FockError(f"photon number {n} outside truncation {dim}")
    mode = ModeSpec(label, dim)
    return MultiModeState.from_ket([mode], basis_ket([dim], [n]))


def vacuum(labels: Iterable[str], dims: Iterable[int]) -> MultiModeState:
    modes = tuple(ModeSpec(lb, d) for lb, d in zip(labels, dims))
    return MultiModeState.from_ket(modes, basis_ket([m.dim for m in modes], [0] * len(modes)))


def tensor(a: MultiModeState, b: MultiModeState) -> MultiModeState:
    overlap = set(a.labels) & set(b.labels)
    if overlap:
        raise FockError(f"duplicate mode labels in tensor product: {sorted(overlap)}")
    return MultiModeState(a.modes + b.modes, np.kron(a.matrix, b.matrix),
                          a.normalized and b.normalized)


def _apply_local(t: np.ndarray, op: np.ndarray, axis: int, n: int) -> np.ndarray:
    """Compute ``op rho op^dagger`` on one mode of a tensor-shaped matrix."""
    t = np.moveaxis(np.tensordot(op, t, axes=([1], [axis])), 0, axis)
    t = np.moveaxis(np.tensordot(op.conj(), t, axes=([1], [n + axis])), 0, n + axis)
    return t


def apply_kraus(s: MultiModeState, label: str, ops: Iterable[np.ndarray],
                normalized: bool | None = None) -> MultiModeState:
    """Apply the operation ``rho -> sum_k K_k rho K_k^dagger`` on one mode.

    Kraus operators may change the mode dimension (rectangular matrices).
    """
    axis = s.index(label)
    n = len(s.modes)
    t = s.tensor()
    out = None
    new_dim = None
    for op in ops:
        op = np.asarray(op, dtype=complex)
        if op.shape[1] != s.modes[axis].dim:
            raise FockError(f"operator shape {op.shape} does not act on mode {label!r}")
        new_dim = op.shape[0]
        term = _apply_local(t, op, axis, n)
        out = term if out is None else out + term
    if out is None:
        raise FockError("empty Kraus list")
    modes = list(s.modes)
    modes[axis] = ModeSpec(label, new_dim)
    size = int(np.prod([m.dim for m in modes]))
    return MultiModeState(tuple(modes), out.reshape(size, size),
                          s.normalized if normalized is None else normalized)


def apply_unitary(s: MultiModeState, labels: Sequence[str], u: np.ndarray) -> MultiModeState:
    """Conjugate by a unitary acting on the (ordered) modes ``labels``."""
    axes = [s.index(lb) for lb in labels]
    n = len(s.modes)
    sub = [s.modes[i].dim for i in axes]
    k = len(axes)
    u = np.asarray(u, dtype=complex).reshape(sub + sub)
    t = s.tensor()
    # rows
    t = np.tensordot(u, t, axes=(list(range(k, 2 * k)), axes))
    t = np.moveaxis(t, list(range(k)), axes)
    # columns
    t = np.tensordot(u.conj(), t, axes=(list(range(k, 2 * k)), [n + i for i in axes]))
    t = np.moveaxis(t, list(range(k)), [n + i for i in axes])
    size = s.matrix.shape[0]
    return s.with_matrix(t.reshape(size, size))


@lru_cache(maxsize=128)
def beamsplitter_matrix(d1: int, d2: int, transmission: float) -> np.ndarray:
    """Fock-basis matrix of the two-mode beamsplitter, restricted to ``d1 x d2``.

    Matrix elements are the exact ones of the infinite-dimensional unitary, so
    the restriction is unitary on every state whose total photon number fits in
    both truncations.
    """
    t = math.sqrt(transmission)
    r = math.sqrt(1.0 - transmission)
    u = np.zeros((d1, d2, d1, d2))
    for n in range(d1):
        for m in range(d2):
            # (t a1 + r a2)^n (t a2 - r a1)^m |0> / sqrt(n! m!)
            norm = 1 / math.sqrt(math.factorial(n) * math.factorial(m))
            for j in range(n + 1):
                cj = math.comb(n, j) * t ** (n - j) * r ** j  # a1^(n-j) a2^j
                for k in range(m + 1):
                    ck = math.comb(m, k) * t ** (m - k) * (-r) ** k  # a2^(m-k) a1^k
                    p, q = n - j + k, j + m - k
                    if p < d1 and q < d2:
                        u[p, q, n, m] += norm * cj * ck * math.sqrt(
                            math.factorial(p) * math.factorial(q))
    return u.reshape(d1 * d2, d1 * d2)


def apply_beamsplitter(s: MultiModeState, m1: str, m2: str, transmission: float) -> MultiModeState:
    if not 0.0 <= transmission <= 1.0:
        raise FockError(f"transmission must lie in [0, 1], got {transmission}")
    i, j = s.index(m1), s.index(m2)
    if i == j:
        raise FockError("beamsplitter needs two distinct modes")
    u = beamsplitter_matrix(s.modes[i].dim, s.modes[j].dim, float(transmission))
    return apply_unitary(s, [m1, m2], u)


def partial_trace(s: MultiModeState, keep: Sequence[str]) -> MultiModeState:
    keep = list(keep)
    if not keep:
        raise FockError("partial_trace needs at least one mode to keep")
    keep_axes = [s.index(lb) for lb in keep]
    n = len(s.modes)
    letters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
    rows = list(letters[:n])
    cols = list(letters[n:2 * n])
    for i in range(n):
        if i not in keep_axes:
            cols[i] = rows[i]
    out = "".join(rows[i] for i in keep_axes) + "".join(cols[i] for i in keep_axes)
    t = np.einsum("".join(rows) + "".join(cols) + "->" + out, s.tensor())
    modes = tuple(s.modes[i] for i in keep_axes)
    size = int(np.prod([m.dim for m in modes]))
    return s.with_matrix(t.reshape(size, size), modes)


def expectation(s: MultiModeState, label: str, op: np.ndarray) -> complex:
    """``Tr(op_label rho)`` for a single-mode operator."""
    red = partial_trace(s, [label])
    return complex(np.trace(op @ red.matrix))


def annihilation(dim: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, dim)), 1)


def number_op(dim: int) -> np.ndarray:
    return np.diag(np.arange(dim, dtype=float))


def loss_kraus(dim: int, eta: float) -> list[np.ndarray]:
    """Kraus operators of the pure-loss channel with transmission ``eta``."""
    if not 0.0 <= eta <= 1.0:
        raise FockError(f"transmission must lie in [0, 1], got {eta}")
    ops = []
    for k in range(dim):
        op = np.zeros((dim, dim))
        for n in range(k, dim):
            op[n - k, n] = math.sqrt(math.comb(n, k) * eta ** (n - k) * (1 - eta) ** k)
        ops.append(op)
    return ops


def hermite_functions(n_max: int, x: np.ndarray) -> np.ndarray:
    """Quadrature wavefunctions ``psi_n(x)`` for ``n < n_max``, shape ``(n_max, len(x))``.

    Uses the three-term recurrence so large ``n`` never touches factorials.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    psi = np.zeros((n_max, x.size))
    psi[0] = np.pi ** -0.25 * np.exp(-x ** 2 / 2)
    if n_max > 1:
        psi[1] = math.sqrt(2) * x * psi[0]
    for n in range(2, n_max):
        psi[n] = math.sqrt(2 / n) * x * psi[n - 1] - math.sqrt((n - 1) / n) * psi[n - 2]
    return psi


@dataclass(frozen=True, eq=False)
class HomodyneWindowOp:
    delta: float
    matrix: np.ndarray = field(repr=False)


@lru_cache(maxsize=256)
def _window_matrix(delta: float, dim: int) -> np.ndarray:
    if math.isinf(delta):
        return np.eye(dim)
    half = delta * SIGMA0 / 2
    a = np.zeros((dim, dim))
    for i in range(dim):
        for j in range(i, dim, 2):
            def f(x, i=i, j=j):
                psi = hermite_functions(j + 1, np.array([x]))
                return psi[i, 0] * psi[j, 0]
            # integrand is even in x for even i - j
            val, _ = integrate.quad(f, 0.0, half, epsabs=1e-13, epsrel=1e-12, limit=200)
            a[i, j] = a[j, i] = 2 * val
    a.setflags(write=False)
    return a


def homodyne_window(delta: float, dim: int) -> HomodyneWindowOp:
    """POVM element for a quadrature reading in ``[-delta/2, delta/2]`` (sigma0 units).

    ``delta`` is the total window width; pass ``math.inf`` for no conditioning.
    """
    delta = float(delta)
    if not delta > 0:
        raise FockError(f"window width must be positive (or inf), got {delta}")
    return HomodyneWindowOp(delta, _window_matrix(delta, int(dim)))


def point_window(dim: int) -> np.ndarray:
    """Limit of ``A(delta) / A_00(delta)`` as the window shrinks to ``x = 0``."""
    v = hermite_functions(dim, np.array([0.0]))[:, 0]
    v = v / v[0]
    return np.outer(v, v)


def apply_projector_trace(s: MultiModeState, label: str, povm: np.ndarray) -> MultiModeState:
    """Return ``Tr_label[(povm_label x 1) rho]`` as an unnormalized state."""
    axis = s.index(label)
    n = len(s.modes)
    t = s.tensor()
    # contract row index i and column index j of the mode with povm[j, i]
    t = np.tensordot(t, povm, axes=([axis, n + axis], [1, 0]))
    modes = tuple(m for k, m in enumerate(s.modes) if k != axis)
    size = int(np.prod([m.dim for m in modes]))
    return MultiModeState(modes, t.reshape(size, size), False)
