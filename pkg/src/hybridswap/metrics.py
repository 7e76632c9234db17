"""Entanglement and state-comparison metrics.

Fidelity uses the squared-overlap (Uhlmann) convention,
``F = (Tr sqrt(sqrt(a) b sqrt(a)))**2``, so ``F(|0>, |+>) = 1/2``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .fock import FockError, MultiModeState


def partial_transpose(s: MultiModeState, partition: Iterable[str]) -> np.ndarray:
    part = set(partition)
    axes = [s.index(lb) for lb in part]
    n = len(s.modes)
    perm = list(range(2 * n))
    for i in axes:
        perm[i], perm[n + i] = perm[n + i], perm[i]
    size = s.matrix.shape[0]
    return s.tensor().transpose(perm).reshape(size, size)


def negativity(s: MultiModeState, partition: Iterable[str]) -> float:
    """Sum of the magnitudes of the negative eigenvalues of the partial transpose.

    The state is normalized first, so unnormalized heralded branches are
    handled transparently.
    """
    part = set(partition)
    labels = set(s.labels)
    if not part or not part < labels:
        raise FockError(f"partition {sorted(part)} must be a non-empty proper subset of {sorted(labels)}")
    if not s.normalized:
        s = s.normalize()
    ev = np.linalg.eigvalsh(partial_transpose(s, part))
    return float(-ev[ev < 0].sum())


def log_negativity_from(n: float) -> float:
    return math.log2(2 * n + 1)


def log_negativity(s: MultiModeState, partition: Iterable[str]) -> float:
    return log_negativity_from(negativity(s, partition))


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(m)
    w = np.clip(w, 0, None)
    return (v * np.sqrt(w)) @ v.conj().T


def fidelity(a: MultiModeState, b: MultiModeState) -> float:
    if a.dims != b.dims:
        raise FockError(f"dimension mismatch: {a.dims} vs {b.dims}")
    ra = a.matrix / a.trace()
    rb = b.matrix / b.trace()
    sa = _psd_sqrt(ra)
    ev = np.linalg.eigvalsh(sa @ rb @ sa)
    f = float(np.sqrt(np.clip(ev, 0, None)).sum() ** 2)
    return min(max(f, 0.0), 1.0)


def purity(s: MultiModeState) -> float:
    rho = s.matrix / s.trace()
    return float(np.real(np.vdot(rho, rho)))


class FitError(ValueError):
    pass


@dataclass
class NegativityFit:
    """Result of fitting ``E_N(N) = e_infinity + c / sqrt(N)``.

    ``e_infinity_stderr`` combines the regression error with ``stat_stderr``,
    the statistical error of the largest data set, which every partition
    shares and the regression cannot see.
    """

    e_infinity: float
    c: float
    e_infinity_stderr: float
    c_stderr: float
    fit_stderr: float
    stat_stderr: float
    sizes: list[int]
    means: list[float]
    residuals: list[float]
    values: dict[int, list[float]] = field(default_factory=dict)

    @property
    def negativity(self) -> float:
        """Asymptotic negativity implied by ``e_infinity``."""
        return (2 ** self.e_infinity - 1) / 2

    def to_json(self) -> str:
        d = asdict(self)
        d["values"] = {str(k): v for k, v in self.values.items()}
        return json.dumps(d, indent=2)


def extrapolate_log_negativity(samples: Sequence[tuple[int, float]]) -> NegativityFit:
    """Least-squares fit of per-size mean log-negativity against ``1/sqrt(N)``.

    ``samples`` holds ``(partition_size, E_N)`` pairs, typically several
    shuffled partitions per size.  The fit is unweighted over the size means.

    Partitions of size ``N_max / m`` drawn from the same ``N_max`` samples
    scatter with variance ``(m - 1) s**2`` when the statistical variance
    scales as ``1/N``, where ``s`` is the error at ``N_max``; the pooled
    estimate of ``s`` is ``stat_stderr``.
    """
    groups: dict[int, list[float]] = {}
    for size, value in samples:
        groups.setdefault(int(size), []).append(float(value))
    if len(groups) < 3:
        raise FitError(f"need at least 3 distinct partition sizes, got {len(groups)}")
    sizes = sorted(groups)
    means = np.array([np.mean(groups[k]) for k in sizes])
    x = 1 / np.sqrt(np.array(sizes, dtype=float))
    design = np.column_stack([np.ones_like(x), x])
    if np.linalg.matrix_rank(design) < 2:
        raise FitError("degenerate design matrix")
    coef, *_ = np.linalg.lstsq(design, means, rcond=None)
    resid = means - design @ coef
    dof = len(sizes) - 2
    sigma2 = float(resid @ resid) / dof if dof > 0 else 0.0
    cov = sigma2 * np.linalg.inv(design.T @ design)
    n_max = sizes[-1]
    pooled = [np.var(groups[k], ddof=1) / (n_max / k - 1)
              for k in sizes[:-1] if len(groups[k]) > 1]
    stat = math.sqrt(float(np.mean(pooled))) if pooled else 0.0
    fit_err = math.sqrt(cov[0, 0])
    return NegativityFit(
        e_infinity=float(coef[0]),
        c=float(coef[1]),
        e_infinity_stderr=float(math.hypot(fit_err, stat)),
        c_stderr=float(math.sqrt(cov[1, 1])),
        fit_stderr=float(fit_err),
        stat_stderr=stat,
        sizes=sizes,
        means=means.tolist(),
        residuals=resid.tolist(),
        values=groups,
    )


def partition_sizes(total: int, levels: int = 5, factor: int = 2) -> list[int]:
    """Consecutively smaller partition sizes ``total, total/2, total/4, ...``."""
    return [total // factor ** k for k in range(levels) if total // factor ** k > 0]
