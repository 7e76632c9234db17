"""Ideal and experimentally modeled input states.

The single-photon entangled state lives on modes A, B and the hybrid
(photon-number qubit x cat qubit) state on modes C, D.  Realistic inputs are
mixtures of the ideal state with its fully dephased version and with a
vacuum-like term, weighted by ``InputModelParams``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fock import FockError, ModeSpec, MultiModeState, basis_ket

DEFAULT_ALPHA = 0.9
CV_DIM = 12
DV_DIM = 3

# Fraction of heralding photons from the two-mode squeezer on the unbalanced
# port of the hybrid-state beamsplitter; recorded for reference only.
OPO_II_PHOTON_FRACTION = 0.92


@dataclass(frozen=True)
class CatSpec:
    alpha: float = DEFAULT_ALPHA
    parity: str = "even"
    dim: int = CV_DIM


@dataclass(frozen=True)
class InputModelParams:
    """Relative weights of the entangled, dephased and vacuum-like terms."""

    cg: float = 1.0
    cm: float = 0.0
    cv: float = 0.0

    def __post_init__(self):
        if min(self.cg, self.cm, self.cv) < 0:
            raise ValueError("mixture weights must be non-negative")
        if self.cg + self.cm + self.cv == 0:
            raise ValueError("mixture weights cannot all be zero")


# best-fit weights for the measured inputs
DV_INPUT_PARAMS = InputModelParams(1.0, 0.05, 0.97)
HYBRID_INPUT_PARAMS = InputModelParams(1.0, 0.047, 0.438)


def cat_vector(alpha: float = DEFAULT_ALPHA, parity: str = "even", dim: int = CV_DIM,
               tail_tol: float = 1e-8) -> np.ndarray:
    """Normalized Fock amplitudes of ``|alpha> +/- |-alpha>``."""
    if alpha < 0:
        raise FockError("cat amplitude must be non-negative")
    if parity not in ("even", "odd"):
        raise FockError(f"parity must be 'even' or 'odd', got {parity!r}")
    n = np.arange(dim)
    # coherent amplitudes via log-gamma to stay finite for any dim
    with np.errstate(divide="ignore"):
        log_amp = n * np.log(alpha) if alpha > 0 else np.where(n == 0, 0.0, -np.inf)
    coh = np.exp(log_amp - 0.5 * np.array([math.lgamma(k + 1) for k in n]) - alpha ** 2 / 2)
    keep = (n % 2 == 0) if parity == "even" else (n % 2 == 1)
    # full-space norm^2 of the parity projection of |alpha>
    full = math.exp(-alpha ** 2) * (math.cosh(alpha ** 2) if parity == "even" else math.sinh(alpha ** 2))
    if full <= 0:
        raise FockError("odd cat state is undefined for alpha = 0")
    vec = np.where(keep, coh, 0.0)
    tail = 1 - (vec ** 2).sum() / full
    if tail > tail_tol:
        raise FockError(f"truncation dim={dim} too small for alpha={alpha} (tail {tail:.2e})")
    return (vec / np.linalg.norm(vec)).astype(complex)


def cat_state(spec: CatSpec = CatSpec(), label: str = "D") -> MultiModeState:
    vec = cat_vector(spec.alpha, spec.parity, spec.dim)
    return MultiModeState.from_ket([ModeSpec(label, spec.dim)], vec)


def _dv_ket(n: int, dim: int) -> np.ndarray:
    return basis_ket([dim], [n])


def single_photon_entangled(labels=("A", "B"), dim: int = DV_DIM) -> MultiModeState:
    """``(|0,1> + |1,0>) / sqrt(2)``."""
    modes = (ModeSpec(labels[0], dim), ModeSpec(labels[1], dim))
    ket = (basis_ket([dim, dim], [0, 1]) + basis_ket([dim, dim], [1, 0])) / math.sqrt(2)
    return MultiModeState.from_ket(modes, ket)


def hybrid_kets(alpha: float = DEFAULT_ALPHA, dv_dim: int = DV_DIM, cv_dim: int = CV_DIM):
    """Product kets ``|0,cat->``, ``|1,cat+>``, ``|0,cat+>``, ``|1,cat->`` as flat vectors."""
    plus = cat_vector(alpha, "even", cv_dim)
    minus = cat_vector(alpha, "odd", cv_dim)
    k0, k1 = _dv_ket(0, dv_dim), _dv_ket(1, dv_dim)
    return {
        "0-": np.kron(k0, minus),
        "1+": np.kron(k1, plus),
        "0+": np.kron(k0, plus),
        "1-": np.kron(k1, minus),
    }


def hybrid_entangled(alpha: float = DEFAULT_ALPHA, labels=("C", "D"), dv_dim: int = DV_DIM,
                     cv_dim: int = CV_DIM) -> MultiModeState:
    """``(|0>|cat-> + |1>|cat+>) / sqrt(2)``."""
    if alpha <= 0:
        raise FockError("hybrid entangled state needs alpha > 0")
    k = hybrid_kets(alpha, dv_dim, cv_dim)
    modes = (ModeSpec(labels[0], dv_dim), ModeSpec(labels[1], cv_dim))
    return MultiModeState.from_ket(modes, (k["0-"] + k["1+"]) / math.sqrt(2))


def _mixture(modes, ideal, dephased, vac, p: InputModelParams) -> MultiModeState:
    def proj(v):
        return np.outer(v, v.conj())
    rho = (p.cg * proj(ideal)
           + 0.5 * p.cm * (proj(dephased[0]) + proj(dephased[1]))
           + p.cv * proj(vac))
    return MultiModeState(modes, rho / np.trace(rho).real)


def experimental_input_dv(p: InputModelParams = DV_INPUT_PARAMS, labels=("A", "B"),
                          dim: int = DV_DIM) -> MultiModeState:
    """Single-photon entanglement mixed with its dephased version and ``|0,0>``."""
    modes = (ModeSpec(labels[0], dim), ModeSpec(labels[1], dim))
    k01 = basis_ket([dim, dim], [0, 1])
    k10 = basis_ket([dim, dim], [1, 0])
    k00 = basis_ket([dim, dim], [0, 0])
    return _mixture(modes, (k01 + k10) / math.sqrt(2), (k01, k10), k00, p)


def experimental_input_hybrid(p: InputModelParams = HYBRID_INPUT_PARAMS,
                              alpha: float = DEFAULT_ALPHA, labels=("C", "D"),
                              dv_dim: int = DV_DIM, cv_dim: int = CV_DIM) -> MultiModeState:
    """Hybrid entanglement mixed with its dephased version and ``|0, cat+>``.

    The vacuum-like term keeps the even cat on the CV mode (there is no
    ``|0, 0>`` term), so the model stays inside the cat-qubit subspace.
    """
    if alpha <= 0:
        raise FockError("hybrid entangled state needs alpha > 0")
    k = hybrid_kets(alpha, dv_dim, cv_dim)
    modes = (ModeSpec(labels[0], dv_dim), ModeSpec(labels[1], cv_dim))
    return _mixture(modes, (k["0-"] + k["1+"]) / math.sqrt(2), (k["0-"], k["1+"]), k["0+"], p)


def ideal_output(alpha: float = DEFAULT_ALPHA, labels=("A", "D"), dv_dim: int = DV_DIM,
                 cv_dim: int = CV_DIM) -> MultiModeState:
    """Target of the swap: the hybrid state on the two remote modes."""
    return hybrid_entangled(alpha, labels, dv_dim, cv_dim)


def vacuum_cat_plus(alpha: float = DEFAULT_ALPHA, labels=("A", "D"), dv_dim: int = DV_DIM,
                    cv_dim: int = CV_DIM) -> MultiModeState:
    """``|0, cat+>``, the admixture used for false positives and dark counts."""
    k = hybrid_kets(alpha, dv_dim, cv_dim)
    modes = (ModeSpec(labels[0], dv_dim), ModeSpec(labels[1], cv_dim))
    return MultiModeState.from_ket(modes, k["0+"])
