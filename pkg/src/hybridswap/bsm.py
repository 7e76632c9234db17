"""Approximate Bell-state measurement: photon subtraction + quadrature conditioning.

Mode B (delayed half of the single-photon entangled state) and mode C (DV half
of the hybrid state) are mixed on a 50:50 beamsplitter.  A tap of reflectivity
``r`` on C feeds a click/no-click detector; on a click, the remaining light in
C is measured by homodyne detection and accepted when the reading falls inside
a window of total width ``delta`` (units of the vacuum standard deviation).
B and C are then traced out, leaving the swapped state on A and D.

The tapped mode and the detector loss are never materialized: the click
outcome is applied as a Kraus map on C directly.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from itertools import product
from typing import Iterable, Sequence

import numpy as np

from . import fock
from .fock import FockError, MultiModeState
from .metrics import fidelity, purity
from .states import DEFAULT_ALPHA, hybrid_entangled, ideal_output, single_photon_entangled

SWEEP_HEADER = ("r", "delta", "eta_hd", "eta_spd", "efficiency", "fidelity", "purity")


@dataclass(frozen=True)
class BsmParams:
    """Tap reflectivity, window width (sigma0 units, total), detector efficiencies."""

    r: float = 0.10
    delta: float = 1.0
    eta_hd: float = 1.0
    eta_spd: float = 1.0

    def __post_init__(self):
        if not 0 <= self.r < 1:
            raise ValueError(f"r must lie in [0, 1), got {self.r}")
        if not (self.delta >= 0):
            raise ValueError(f"delta must be >= 0 or inf, got {self.delta}")
        for name in ("eta_hd", "eta_spd"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise ValueError(f"{name} must lie in (0, 1], got {v}")


IDEAL_BSM = BsmParams(r=0.0, delta=0.0)
NO_CONDITIONING = BsmParams(r=0.10, delta=math.inf)


@dataclass(frozen=True)
class BsmOutcome:
    """Normalized swapped state on (A, D) and the heralding probability.

    A probability of exactly zero marks the ``r -> 0`` or ``delta -> 0``
    limits: no event is ever heralded, and ``state`` holds the limiting
    conditional state.
    """

    state: MultiModeState | None
    success_probability: float

    @property
    def no_events(self) -> bool:
        return self.success_probability == 0.0


def combine_inputs(dv: MultiModeState, hy: MultiModeState) -> MultiModeState:
    """Mix B and C of ``dv`` (A, B) and ``hy`` (C, D) on a 50:50 beamsplitter."""
    if set(dv.labels) != {"A", "B"} or set(hy.labels) != {"C", "D"}:
        raise FockError(f"expected inputs on (A, B) and (C, D), got {dv.labels} and {hy.labels}")
    db = dv.modes[dv.index("B")].dim
    dc = hy.modes[hy.index("C")].dim
    if db != dc:
        raise FockError(f"modes B and C need equal truncation, got {db} and {dc}")
    s = fock.tensor(dv, hy)
    return fock.apply_beamsplitter(s, "B", "C", 0.5)


def click_kraus(dim: int, r: float, eta_spd: float) -> list[np.ndarray]:
    """Kraus operators on the tapped mode for a bucket-detector click.

    Each photon independently stays (``1 - r``), is detected (``r eta``) or
    is reflected and lost (``r (1 - eta)``).  Outcomes with at least one
    detected photon form the click.  For ``r = 0`` the leading-order map
    ``a rho a^dagger`` (scaled by ``eta``) is returned instead.
    """
    if r == 0:
        return [math.sqrt(eta_spd) * fock.annihilation(dim)]
    p_stay, p_det, p_lost = 1 - r, r * eta_spd, r * (1 - eta_spd)
    ops = []
    for j in range(1, dim):
        for lost in range(0, dim - j):
            op = np.zeros((dim, dim))
            for n in range(j + lost, dim):
                k = n - j - lost
                mult = math.factorial(n) / (math.factorial(k) * math.factorial(j) * math.factorial(lost))
                op[k, n] = math.sqrt(mult * p_stay ** k * p_det ** j * p_lost ** lost)
            if lost and p_lost == 0:
                continue
            ops.append(op)
    return ops


def window_matrix(delta: float, dim: int) -> np.ndarray:
    if delta == 0:
        return fock.point_window(dim)
    return fock.homodyne_window(delta, dim).matrix


def apply_bsm(s: MultiModeState, p: BsmParams) -> BsmOutcome:
    """Tap, click, lossy homodyne window on C; trace out B and C."""
    for lb in "ABCD":
        s.index(lb)
    dim_c = s.modes[s.index("C")].dim
    if dim_c < 3:
        raise FockError("mode C needs at least 3 Fock levels")
    out = fock.apply_kraus(s, "C", click_kraus(dim_c, p.r, p.eta_spd), normalized=False)
    if p.eta_hd < 1:
        out = fock.apply_kraus(out, "C", fock.loss_kraus(dim_c, p.eta_hd))
    out = fock.apply_projector_trace(out, "C", window_matrix(p.delta, dim_c))
    out = fock.partial_trace(out, ["A", "D"])
    weight = out.trace()
    limit = p.r == 0 or p.delta == 0
    if weight <= 1e-300:
        return BsmOutcome(None, 0.0)
    return BsmOutcome(out.normalize(), 0.0 if limit else weight)


def swap(dv: MultiModeState, hy: MultiModeState, p: BsmParams) -> BsmOutcome:
    return apply_bsm(combine_inputs(dv, hy), p)


@dataclass(frozen=True)
class SweepRow:
    r: float
    delta: float
    eta_hd: float
    eta_spd: float
    efficiency: float
    fidelity: float
    purity: float

    def astuple(self):
        return (self.r, self.delta, self.eta_hd, self.eta_spd, self.efficiency,
                self.fidelity, self.purity)


def sweep_bsm(rs: Sequence[float], deltas: Sequence[float],
              efficiencies: Iterable[tuple[float, float]] = ((1.0, 1.0),),
              dv: MultiModeState | None = None, hy: MultiModeState | None = None,
              alpha: float = DEFAULT_ALPHA) -> list[SweepRow]:
    """Efficiency, fidelity to the ideal hybrid state and purity on a grid.

    ``efficiencies`` lists ``(eta_hd, eta_spd)`` pairs.  Rows are ordered by
    efficiency pair, then ``r``, then ``delta``.
    """
    dv = dv if dv is not None else single_photon_entangled()
    hy = hy if hy is not None else hybrid_entangled(alpha)
    combined = combine_inputs(dv, hy)
    target = ideal_output(alpha, cv_dim=hy.modes[1].dim, dv_dim=dv.modes[0].dim)
    rows = []
    for (eta_hd, eta_spd), r, delta in product(list(efficiencies), rs, deltas):
        res = apply_bsm(combined, BsmParams(r, delta, eta_hd, eta_spd))
        if res.state is None:
            f = pur = float("nan")
        else:
            f, pur = fidelity(res.state, target), purity(res.state)
        rows.append(SweepRow(r, delta, eta_hd, eta_spd, res.success_probability, f, pur))
    return rows


def sweep_to_csv(rows: Sequence[SweepRow], header_comment: str | None = None) -> str:
    buf = io.StringIO()
    if header_comment:
        buf.write(f"# {header_comment}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_HEADER)
    for row in rows:
        w.writerow([repr(float(v)) for v in row.astuple()])
    return buf.getvalue()
