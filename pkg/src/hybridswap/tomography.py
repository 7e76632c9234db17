"""Homodyne sampling, maximum-likelihood reconstruction and Wigner functions.

Phase convention: a quadrature at local-oscillator angle ``theta`` has
wavefunction ``<n|x_theta> = exp(i n theta) psi_n(x)``.  Detection
inefficiency is a pure-loss channel in front of an ideal homodyne detector;
the reconstruction folds the same channel into its POVM elements.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np
from scipy.special import eval_genlaguerre, gammaln

from . import fock
from .fock import FockError, ModeSpec, MultiModeState

DEFAULT_PHASES = tuple(np.arange(12) * np.pi / 12)
BIN_WIDTH = 0.05 * fock.SIGMA0


@dataclass(frozen=True)
class QuadratureSample:
    phase: float
    value: float
    mode: str


@dataclass
class QuadratureData:
    """Column-oriented store of single-mode homodyne samples."""

    phases: np.ndarray
    values: np.ndarray
    mode: str = "D"

    def __len__(self):
        return len(self.values)

    def __iter__(self) -> Iterator[QuadratureSample]:
        for ph, v in zip(self.phases, self.values):
            yield QuadratureSample(float(ph), float(v), self.mode)

    def subset(self, idx) -> "QuadratureData":
        return QuadratureData(self.phases[idx], self.values[idx], self.mode)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("phase", "value", "mode"))
        for ph, v in zip(self.phases, self.values):
            w.writerow((repr(float(ph)), repr(float(v)), self.mode))
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "QuadratureData":
        rows = list(csv.DictReader(io.StringIO(text)))
        mode = rows[0]["mode"] if rows else "D"
        return cls(np.array([float(r["phase"]) for r in rows]),
                   np.array([float(r["value"]) for r in rows]), mode)


@dataclass
class TwoModeData:
    """Joint homodyne samples on a DV mode and a CV mode."""

    phases_a: np.ndarray
    values_a: np.ndarray
    phases_b: np.ndarray
    values_b: np.ndarray
    labels: tuple[str, str] = ("A", "D")

    def __len__(self):
        return len(self.values_a)

    def subset(self, idx) -> "TwoModeData":
        return TwoModeData(self.phases_a[idx], self.values_a[idx], self.phases_b[idx],
                           self.values_b[idx], self.labels)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("phase", "value", "mode", "phase", "value", "mode"))
        la, lb = self.labels
        for row in zip(self.phases_a, self.values_a, self.phases_b, self.values_b):
            w.writerow((repr(float(row[0])), repr(float(row[1])), la,
                        repr(float(row[2])), repr(float(row[3])), lb))
        return buf.getvalue()


def quadrature_vectors(dim: int, phase: float, x: np.ndarray) -> np.ndarray:
    """Rows ``<n|x_theta>`` for every ``x``; shape ``(len(x), dim)``."""
    psi = fock.hermite_functions(dim, x).T
    return psi * np.exp(1j * np.arange(dim) * phase)


def _degrade(s: MultiModeState, efficiency: float) -> MultiModeState:
    if efficiency == 1:
        return s
    out = s
    for lb, d in zip(s.labels, s.dims):
        out = fock.apply_kraus(out, lb, fock.loss_kraus(d, efficiency))
    return out


def _grid(dim: int, points: int = 4001) -> np.ndarray:
    half = math.sqrt(2 * dim + 1) + 6
    return np.linspace(-half, half, points)


def marginal(rho: np.ndarray, phase: float, x: np.ndarray) -> np.ndarray:
    """Quadrature probability density of a single-mode density matrix."""
    v = quadrature_vectors(rho.shape[0], phase, x)
    return np.real(np.einsum("xi,ij,xj->x", v.conj(), rho, v))


def _inverse_cdf(x: np.ndarray, pdf: np.ndarray, u: np.ndarray) -> np.ndarray:
    pdf = np.clip(pdf, 0, None)
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (pdf[1:] + pdf[:-1]) * np.diff(x))])
    cdf /= cdf[-1]
    return np.interp(u, cdf, x)


def sample_quadratures(s: MultiModeState, phases: Sequence[float] = DEFAULT_PHASES,
                       n_per_phase: int = 1000, efficiency: float = 1.0,
                       seed: int | None = 0) -> QuadratureData:
    """Draw homodyne readings from the exact marginals of the loss-degraded state."""
    if len(s.modes) != 1:
        raise FockError("sample_quadratures needs a single-mode state")
    if not 0 < efficiency <= 1:
        raise FockError(f"efficiency must lie in (0, 1], got {efficiency}")
    if abs(s.trace() - 1) > 1e-9:
        raise FockError("input state is not normalized")
    rho = _degrade(s, efficiency).matrix
    rng = np.random.default_rng(seed)
    x = _grid(rho.shape[0])
    phs, vals = [], []
    for ph in phases:
        u = rng.random(n_per_phase)
        vals.append(_inverse_cdf(x, marginal(rho, ph, x), u))
        phs.append(np.full(n_per_phase, float(ph)))
    return QuadratureData(np.concatenate(phs), np.concatenate(vals), s.labels[0])


def sample_two_mode(s: MultiModeState, phases_a: Sequence[float], phases_b: Sequence[float],
                    n_per_pair: int, efficiencies: tuple[float, float] = (1.0, 1.0),
                    seed: int | None = 0, chunk: int = 4000) -> TwoModeData:
    """Joint readings: the first mode from its marginal, the second conditionally."""
    if len(s.modes) != 2:
        raise FockError("sample_two_mode needs a two-mode state")
    if abs(s.trace() - 1) > 1e-9:
        raise FockError("input state is not normalized")
    la, lb = s.labels
    da, db = s.dims
    out = s
    for lb_, eff in zip(s.labels, efficiencies):
        if not 0 < eff <= 1:
            raise FockError(f"efficiency must lie in (0, 1], got {eff}")
        if eff < 1:
            out = fock.apply_kraus(out, lb_, fock.loss_kraus(s.dims[s.index(lb_)], eff))
    t = out.matrix.reshape(da, db, da, db)
    rho_a = np.einsum("ajbj->ab", t)
    blocks = np.transpose(t, (0, 2, 1, 3)).reshape(da * da, db, db)  # <a|rho|b> on mode 2
    rng = np.random.default_rng(seed)
    xa_grid, xb_grid = _grid(da), _grid(db, 1501)
    cols = {k: [] for k in ("pa", "xa", "pb", "xb")}
    for pa in phases_a:
        xa = _inverse_cdf(xa_grid, marginal(rho_a, pa, xa_grid), rng.random(n_per_pair * len(phases_b)))
        va = quadrature_vectors(da, pa, xa)
        coef = (va.conj()[:, :, None] * va[:, None, :]).reshape(len(xa), da * da)
        for i, pb in enumerate(phases_b):
            sl = slice(i * n_per_pair, (i + 1) * n_per_pair)
            wb = quadrature_vectors(db, pb, xb_grid)
            q = np.einsum("gm,kmn,gn->kg", wb.conj(), blocks, wb)  # (da*da, G)
            xs = np.empty(n_per_pair)
            for start in range(0, n_per_pair, chunk):
                c = coef[sl][start:start + chunk]
                pdf = np.clip(np.real(c @ q), 0, None)
                cdf = np.cumsum(0.5 * (pdf[:, 1:] + pdf[:, :-1]), axis=1)
                cdf = np.concatenate([np.zeros((len(c), 1)), cdf], axis=1)
                cdf /= cdf[:, -1:]
                u = rng.random(len(c))
                k = np.clip((cdf < u[:, None]).sum(axis=1), 1, len(xb_grid) - 1)
                rows = np.arange(len(c))
                c0, c1 = cdf[rows, k - 1], cdf[rows, k]
                frac = np.where(c1 > c0, (u - c0) / np.where(c1 > c0, c1 - c0, 1), 0.5)
                xs[start:start + len(c)] = xb_grid[k - 1] + frac * (xb_grid[k] - xb_grid[k - 1])
            cols["pa"].append(np.full(n_per_pair, float(pa)))
            cols["xa"].append(xa[sl])
            cols["pb"].append(np.full(n_per_pair, float(pb)))
            cols["xb"].append(xs)
    return TwoModeData(*(np.concatenate(cols[k]) for k in ("pa", "xa", "pb", "xb")), labels=(la, lb))


@dataclass
class MleResult:
    state: MultiModeState
    iterations: int
    converged: bool
    log_likelihood: list[float] = field(default_factory=list)


def _loss_map(dim: int, efficiency: float):
    ops = fock.loss_kraus(dim, efficiency)

    def forward(rho):
        return sum(k @ rho @ k.T for k in ops)

    def adjoint(m):
        return sum(k.T @ m @ k for k in ops)
    return forward, adjoint


def _two_mode_loss_map(dims, effs):
    ka = fock.loss_kraus(dims[0], effs[0])
    kb = fock.loss_kraus(dims[1], effs[1])
    ops = [np.kron(a, b) for a in ka for b in kb]

    def forward(rho):
        return sum(k @ rho @ k.T for k in ops)

    def adjoint(m):
        return sum(k.T @ m @ k for k in ops)
    return forward, adjoint


def _rhor(rho0, prob_fn, r_fn, loglik_fn, max_iters, tol):
    """Diluted R-rho-R iteration with a likelihood guard.

    The plain ``R rho R`` step is tried first; if it lowers the likelihood the
    dilution ``(1 + eps R)`` is halved until the step goes uphill.
    """
    rho = rho0
    dim = rho.shape[0]
    eye = np.eye(dim)
    probs = prob_fn(rho)
    ll = loglik_fn(probs)
    history = [ll]
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        r = r_fn(probs)
        eps = None
        while True:
            op = r if eps is None else eye + eps * r
            new = op @ rho @ op.conj().T
            new = 0.5 * (new + new.conj().T)
            new /= np.trace(new).real
            new_probs = prob_fn(new)
            new_ll = loglik_fn(new_probs)
            if new_ll >= ll - 1e-9 * abs(ll) or (eps is not None and eps < 1e-8):
                break
            eps = 1.0 if eps is None else eps / 2
        if new_ll < ll - 1e-9 * abs(ll):
            break
        change = np.abs(new - rho).max()
        rho, probs, ll = new, new_probs, new_ll
        history.append(ll)
        if change < tol:
            converged = True
            break
    return rho, it, converged, history


def mle_reconstruct(data: QuadratureData, dim: int, efficiency: float = 1.0,
                    max_iters: int = 5000, tol: float = 1e-9, bin_width: float = BIN_WIDTH,
                    initial: np.ndarray | None = None) -> MleResult:
    """Maximum-likelihood density matrix from binned single-mode homodyne data.

    With ``efficiency < 1`` the POVM includes the detection loss, so the
    result estimates the state before the detector.
    """
    if not 0 < efficiency <= 1:
        raise FockError(f"efficiency must lie in (0, 1], got {efficiency}")
    lo = data.values.min() - bin_width
    hi = data.values.max() + bin_width
    edges = np.arange(lo, hi + bin_width, bin_width)
    centers = 0.5 * (edges[1:] + edges[:-1])
    vecs, counts = [], []
    for ph in np.unique(data.phases):
        c, _ = np.histogram(data.values[data.phases == ph], bins=edges)
        keep = c > 0
        vecs.append(quadrature_vectors(dim, ph, centers[keep]))
        counts.append(c[keep].astype(float))
    v = np.concatenate(vecs)
    n = np.concatenate(counts)
    fwd, adj = _loss_map(dim, efficiency)

    def prob_fn(rho):
        return np.clip(np.real(np.einsum("si,ij,sj->s", v.conj(), fwd(rho), v)), 1e-300, None) * bin_width

    def r_fn(p):
        w = n / p * bin_width
        m = (v.T * w) @ v.conj()
        return adj(m) / n.sum()

    def loglik_fn(p):
        return float(n @ np.log(p))

    rho0 = np.eye(dim, dtype=complex) / dim if initial is None else np.asarray(initial, complex)
    rho, it, conv, hist = _rhor(rho0, prob_fn, r_fn, loglik_fn, max_iters, tol)
    if not conv:
        warnings.warn(f"MLE did not converge in {max_iters} iterations", RuntimeWarning)
    state = MultiModeState((ModeSpec(data.mode, dim),), rho)
    return MleResult(state, it, conv, hist)


def two_mode_mle(data: TwoModeData, dims: tuple[int, int] = (2, 8),
                 efficiencies: tuple[float, float] = (1.0, 1.0), max_iters: int = 2000,
                 tol: float = 1e-7, initial: np.ndarray | None = None) -> MleResult:
    """Joint reconstruction from unbinned two-mode samples."""
    da, db = dims
    ua = np.empty((len(data), da), complex)
    ub = np.empty((len(data), db), complex)
    for ph in np.unique(data.phases_a):
        m = data.phases_a == ph
        ua[m] = quadrature_vectors(da, ph, data.values_a[m])
    for ph in np.unique(data.phases_b):
        m = data.phases_b == ph
        ub[m] = quadrature_vectors(db, ph, data.values_b[m])
    u = (ua[:, :, None] * ub[:, None, :]).reshape(len(data), da * db)
    uc = u.conj()
    fwd, adj = _two_mode_loss_map(dims, efficiencies)
    total = float(len(data))

    def prob_fn(rho):
        return np.clip(np.real(np.sum((uc @ fwd(rho)) * u, axis=1)), 1e-300, None)

    def r_fn(p):
        m = (u.T / p) @ uc
        return adj(m) / total

    def loglik_fn(p):
        return float(np.log(p).sum())

    d = da * db
    rho0 = np.eye(d, dtype=complex) / d if initial is None else np.asarray(initial, complex)
    rho, it, conv, hist = _rhor(rho0, prob_fn, r_fn, loglik_fn, max_iters, tol)
    if not conv:
        warnings.warn(f"two-mode MLE did not converge in {max_iters} iterations", RuntimeWarning)
    modes = (ModeSpec(data.labels[0], da), ModeSpec(data.labels[1], db))
    return MleResult(MultiModeState(modes, rho), it, conv, hist)


@dataclass
class WignerGrid:
    """Wigner function sampled on a rectangular ``(p, x)`` grid.

    ``values[i, j]`` is ``W(x[j], p[i])``, normalized so that the integral over
    the plane equals the trace of the operator.
    """

    x: np.ndarray
    p: np.ndarray
    values: np.ndarray

    def integral(self) -> float:
        return float(np.trapezoid(np.trapezoid(self.values, self.x, axis=1), self.p))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("x", "p", "W"))
        for i, pv in enumerate(self.p):
            for j, xv in enumerate(self.x):
                w.writerow((repr(float(xv)), repr(float(pv)), repr(float(self.values[i, j]))))
        return buf.getvalue()


DEFAULT_EXTENT = 6.0
DEFAULT_POINTS = 101


def default_axis() -> np.ndarray:
    return np.linspace(-DEFAULT_EXTENT, DEFAULT_EXTENT, DEFAULT_POINTS)


def wigner_operator(op: np.ndarray, x: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Complex Wigner transform of a (not necessarily Hermitian) Fock-basis operator."""
    dim = op.shape[0]
    xx, pp = np.meshgrid(x, p)
    r2 = xx ** 2 + pp ** 2
    z = math.sqrt(2) * (xx - 1j * pp)
    gauss = np.exp(-r2) / np.pi
    out = np.zeros_like(xx, dtype=complex)
    for n in range(dim):
        for m in range(n, dim):
            k = m - n
            # W of |m><n| for m >= n
            coef = (-1) ** n * np.exp(0.5 * (gammaln(n + 1) - gammaln(m + 1)))
            w = coef * z ** k * gauss * eval_genlaguerre(n, k, 2 * r2)
            out += op[m, n] * w
            if m != n:
                out += op[n, m] * w.conj()
    return out


def wigner(s: MultiModeState | np.ndarray, x: np.ndarray | None = None,
           p: np.ndarray | None = None) -> WignerGrid:
    """Wigner function of a single-mode state (vacuum: ``W(0, 0) = 1/pi``)."""
    x = default_axis() if x is None else np.asarray(x, float)
    p = x if p is None else np.asarray(p, float)
    rho = s.matrix if isinstance(s, MultiModeState) else np.asarray(s)
    if isinstance(s, MultiModeState) and len(s.modes) != 1:
        raise FockError("wigner needs a single-mode state")
    return WignerGrid(x, p, np.real(wigner_operator(rho, x, p)))


def hybrid_density_wigner(s: MultiModeState, x: np.ndarray | None = None,
                          p: np.ndarray | None = None) -> list[list[WignerGrid]]:
    """Wigner transforms of the CV blocks ``<i|rho|j>`` for DV levels ``i, j`` in {0, 1}.

    Off-diagonal blocks are not Hermitian; their real part is returned.
    """
    if len(s.modes) != 2:
        raise FockError("hybrid_density_wigner needs a DV x CV two-mode state")
    x = default_axis() if x is None else np.asarray(x, float)
    p = x if p is None else np.asarray(p, float)
    rho = s.matrix / s.trace()
    da, db = s.dims
    t = rho.reshape(da, db, da, db)
    return [[WignerGrid(x, p, np.real(wigner_operator(t[i, :, j, :], x, p))) for j in range(2)]
            for i in range(2)]


def partition_log_negativities(data: TwoModeData, dims: tuple[int, int] = (2, 8),
                               efficiencies: tuple[float, float] = (1.0, 1.0), levels: int = 4,
                               shuffles: int = 6, seed: int | None = 0,
                               max_iters: int = 2000, tol: float = 1e-7) -> list[tuple[int, float]]:
    """``(partition_size, E_N)`` pairs from consecutively halved data sets.

    The full set is reconstructed once.  For each smaller size, ``shuffles``
    random permutations each contribute the first partition of that size.
    Reconstructions start from the full-data estimate to save iterations.
    """
    from .metrics import log_negativity
    rng = np.random.default_rng(seed)
    total = len(data)
    label = [data.labels[0]]
    full = two_mode_mle(data, dims, efficiencies, max_iters, tol)
    out = [(total, log_negativity(full.state, label))]
    start = full.state.matrix
    for k in range(1, levels):
        size = total // 2 ** k
        for _ in range(shuffles):
            idx = rng.permutation(total)[:size]
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                res = two_mode_mle(data.subset(idx), dims, efficiencies, max_iters, tol, initial=start)
            out.append((size, log_negativity(res.state, label)))
    return out
