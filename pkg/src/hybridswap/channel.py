"""Propagation loss, false positives and dark counts around the swap.

``swap_over_channel`` runs the full pipeline: loss on the two links (B and C),
50:50 mixing, the approximate BSM, then the false-positive and dark-count
admixtures of ``|0, cat+>``.  ``negativity_vs_loss_curve`` tabulates it against
direct propagation of the hybrid state.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from . import fock
from .bsm import IDEAL_BSM, BsmOutcome, BsmParams, combine_inputs, apply_bsm
from .fock import MultiModeState
from .metrics import negativity
from .states import (DEFAULT_ALPHA, DV_INPUT_PARAMS, HYBRID_INPUT_PARAMS, experimental_input_dv,
                     experimental_input_hybrid, hybrid_entangled, single_photon_entangled,
                     vacuum_cat_plus)

CURVE_HEADER = ("loss_dB", "N_swap_ideal_bsm", "N_swap_actual_bsm", "N_swap_no_conditioning",
                "N_swap_darkcounts", "N_direct")


@dataclass(frozen=True)
class ChannelParams:
    """Link transmissions and the two noise admixtures.

    ``eta_d`` is the dark-count-to-signal ratio at zero loss; it grows as
    ``eta_d / (eta_b * eta_c)`` with channel loss.
    """

    eta_b: float = 1.0
    eta_c: float = 1.0
    eta_hd: float = 1.0
    eta_d: float = 0.0
    fp_fraction: float = 0.0

    def __post_init__(self):
        for name in ("eta_b", "eta_c", "eta_hd"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise ValueError(f"{name} must lie in (0, 1], got {v}")
        if self.eta_d < 0:
            raise ValueError("eta_d must be >= 0")
        if not 0 <= self.fp_fraction < 1:
            raise ValueError("fp_fraction must lie in [0, 1)")

    @classmethod
    def symmetric(cls, eta: float, **kw) -> "ChannelParams":
        """Equal transmissions ``sqrt(eta)`` on both links."""
        t = math.sqrt(eta)
        return cls(eta_b=t, eta_c=t, **kw)


def db_to_transmission(loss_db: float) -> float:
    return 10 ** (-loss_db / 10)


def transmission_to_db(eta: float) -> float:
    return -10 * math.log10(eta)


def apply_loss(s: MultiModeState, mode: str, eta: float) -> MultiModeState:
    """Pure-loss channel of transmission ``eta`` on one mode."""
    if eta == 1:
        s.index(mode)
        return s
    dim = s.modes[s.index(mode)].dim
    return fock.apply_kraus(s, mode, fock.loss_kraus(dim, eta))


def swap_over_channel(dv: MultiModeState, hy: MultiModeState, cp: ChannelParams,
                      bp: BsmParams, alpha: float = DEFAULT_ALPHA) -> BsmOutcome:
    """Lossy links, BSM, then false-positive and dark-count admixtures.

    ``cp.eta_hd`` overrides the homodyne efficiency in ``bp``.  The reported
    success probability is that of the BSM itself (before the admixtures).
    """
    dv = apply_loss(dv, "B", cp.eta_b)
    hy = apply_loss(hy, "C", cp.eta_c)
    bp = replace(bp, eta_hd=cp.eta_hd)
    res = apply_bsm(combine_inputs(dv, hy), bp)
    if res.state is None:
        return res
    noise = vacuum_cat_plus(alpha, dv_dim=res.state.modes[0].dim, cv_dim=res.state.modes[1].dim)
    rho = (1 - cp.fp_fraction) * res.state.matrix + cp.fp_fraction * noise.matrix
    rho = rho + cp.eta_d / (cp.eta_b * cp.eta_c) * noise.matrix
    rho = rho / np.trace(rho).real
    return BsmOutcome(res.state.with_matrix(rho), res.success_probability)


def direct_propagation_negativity(hy: MultiModeState, eta: float) -> float:
    """Negativity after loss ``sqrt(eta)`` on each mode of the hybrid state."""
    if not 0 < eta <= 1:
        raise ValueError(f"eta must lie in (0, 1], got {eta}")
    t = math.sqrt(eta)
    out = hy
    for lb in hy.labels:
        out = apply_loss(out, lb, t)
    return negativity(out, [hy.labels[0]])


@dataclass
class CurveConfig:
    """Inputs for the negativity-vs-loss table.

    ``eta_hd`` applies to the actual-BSM and dark-count curves only; the
    ideal-BSM and no-conditioning curves use a lossless homodyne detector.
    """

    inputs: str = "experimental"  # or "ideal"
    loss_db: list[float] = field(default_factory=lambda: list(np.linspace(0, 30, 41)))
    alpha: float = DEFAULT_ALPHA
    r: float = 0.10
    delta: float = 1.0
    eta_hd: float = 0.85
    eta_spd: float = 1.0
    fp_fraction: float = 0.40
    eta_d: float = 0.01

    def __post_init__(self):
        if self.inputs not in ("experimental", "ideal"):
            raise ValueError(f"inputs must be 'experimental' or 'ideal', got {self.inputs!r}")

    def input_states(self):
        if self.inputs == "ideal":
            return single_photon_entangled(), hybrid_entangled(self.alpha)
        return (experimental_input_dv(DV_INPUT_PARAMS),
                experimental_input_hybrid(HYBRID_INPUT_PARAMS, self.alpha))

    @property
    def noise_fp(self) -> float:
        return 0.0 if self.inputs == "ideal" else self.fp_fraction


def curve_row(cfg: CurveConfig, loss_db: float, dv=None, hy=None) -> tuple[float, ...]:
    if dv is None or hy is None:
        dv, hy = cfg.input_states()
    eta = db_to_transmission(loss_db)
    base = ChannelParams.symmetric(eta, eta_hd=1.0, fp_fraction=cfg.noise_fp)
    actual = BsmParams(cfg.r, cfg.delta, 1.0, cfg.eta_spd)

    def n_swap(cp, bp):
        res = swap_over_channel(dv, hy, cp, bp, cfg.alpha)
        return negativity(res.state, ["A"])

    ideal = n_swap(base, IDEAL_BSM)
    act = n_swap(replace(base, eta_hd=cfg.eta_hd), actual)
    nocond = n_swap(base, BsmParams(cfg.r, math.inf, 1.0, cfg.eta_spd))
    dark = n_swap(replace(base, eta_hd=cfg.eta_hd, eta_d=cfg.eta_d), actual)
    direct = direct_propagation_negativity(hy, eta)
    return (float(loss_db), ideal, act, nocond, dark, direct)


def negativity_vs_loss_curve(cfg: CurveConfig) -> list[tuple[float, ...]]:
    dv, hy = cfg.input_states()
    return [curve_row(cfg, db, dv, hy) for db in cfg.loss_db]


def crossover_db(rows: Sequence[tuple[float, ...]], column: str = "N_swap_actual_bsm") -> float:
    """First loss at which the swap curve rises above direct propagation.

    Linear interpolation between grid points; ``nan`` if the curves never cross.
    """
    k = CURVE_HEADER.index(column)
    d = CURVE_HEADER.index("N_direct")
    xs = [row[0] for row in rows]
    diff = [row[k] - row[d] for row in rows]
    for i in range(1, len(rows)):
        if diff[i - 1] < 0 <= diff[i]:
            x0, x1, y0, y1 = xs[i - 1], xs[i], diff[i - 1], diff[i]
            return x0 + (x1 - x0) * (-y0) / (y1 - y0)
    return float("nan")


def curve_to_csv(rows: Sequence[tuple[float, ...]], config: dict | None = None) -> str:
    buf = io.StringIO()
    if config is not None:
        buf.write("# config: " + json.dumps(config, sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CURVE_HEADER)
    for row in rows:
        w.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


def config_dict(cfg: CurveConfig) -> dict:
    d = asdict(cfg)
    d["loss_db"] = [float(x) for x in d["loss_db"]]
    return d
