"""Stylized Monte Carlo of the heralding and coincidence architecture.

Two physical detectors are simulated.  D1 is shared between the heralds of
the single-photon entangled state (tag ``alpha``) and the Bell-measurement
clicks (tag ``gamma``); D2 heralds the hybrid state (tag ``beta``).

Generative model, per simulated run:

* alpha and beta heralds are Poisson processes;
* every heralded photon leaves the loop delay line after ``k`` passes with
  probability ``0.5`` for ``k = 0`` and ``0.5 * (0.5 * T_DL)**k`` otherwise,
  and produces a gamma click with probability ``p_gamma`` at
  ``t_herald + beta_extra + k * dt_dl + dt_fiber`` plus temporal-mode jitter;
  ``beta_extra`` is ``dt_dl`` for beta photons and zero for alpha photons;
* after each surviving alpha herald the AOM gates the alpha path from
  ``aom_shutoff`` for ``aom_hold`` ns; heralds inside a gate survive with
  probability ``1 - aom_extinction`` and are labelled ``false_positive``;
* dark counts are added on both detectors, then a non-paralyzable dead time
  is enforced per physical detector.

The temporal mode ``f(t) = sqrt(pi g) exp(-pi g |t|)`` gives click jitter
drawn from ``|f|**2``, a Laplace law of scale ``1 / (2 pi g)``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field
from typing import Iterator

import numpy as np
from scipy.signal import find_peaks

DETECTORS = ("alpha", "beta", "gamma")
D1 = ("alpha", "gamma")


@dataclass(frozen=True)
class TimingConfig:
    """Timing, rates and optics of the multiplexed heralding scheme (times in ns)."""

    dt_dl: float = 47.0
    dt_fiber: float = 750.0
    dead_time: float = 100.0
    aom_extinction: float = 0.80
    aom_shutoff: float = 600.0
    aom_hold: float = 1000.0
    delay_line_transmission: float = 0.85
    capture_window: float = 900.0
    filter_window: float = 8.0
    gamma_mhz: float = 65.0
    rate_alpha: float = 25e3
    rate_beta: float = 20e3
    p_gamma: float = 0.02
    dark_rate: float = 5.0
    seed: int = 0

    def __post_init__(self):
        for name in ("dt_dl", "dt_fiber", "dead_time", "aom_shutoff", "capture_window",
                     "filter_window", "gamma_mhz"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        for name in ("aom_extinction", "delay_line_transmission", "p_gamma"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"{name} must lie in [0, 1]")
        for name in ("rate_alpha", "rate_beta", "dark_rate", "aom_hold"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    @property
    def jitter_scale(self) -> float:
        """Laplace scale of ``|f(t)|**2`` in ns."""
        return 1e3 / (2 * math.pi * self.gamma_mhz)

    @property
    def temporal_width(self) -> float:
        """Full width of ``f(t)`` at ``1/e**2`` of its peak, in ns."""
        return 4e3 / (math.pi * self.gamma_mhz)

    @property
    def echo_ratio(self) -> float:
        """Pass-(k+1) to pass-k exit-probability ratio of the delay line."""
        return 0.5 * self.delay_line_transmission

    def pass_probability(self, k: int) -> float:
        return 0.5 * self.echo_ratio ** k

    @property
    def alpha_center(self) -> float:
        """Trigger-relative time of the alpha herald relevant to the swap."""
        return -self.dt_dl - self.dt_fiber

    @property
    def beta_center(self) -> float:
        """Trigger-relative time of the first direct beta peak."""
        return -self.dt_dl - self.dt_fiber


@dataclass(frozen=True)
class EventRecord:
    id: int
    detector: str
    time: float
    origin: str
    parent: int = -1


@dataclass
class EventStream:
    """Time-ordered events stored column-wise.

    ``origin`` is ground truth: ``signal`` (a herald), ``echo_k`` (a gamma
    click from a photon that made ``k`` delay-line passes), ``dark`` or
    ``false_positive`` (an alpha herald leaking through the AOM gate).
    """

    ids: np.ndarray
    detector: np.ndarray
    time: np.ndarray
    origin: np.ndarray
    parent: np.ndarray
    duration: float

    def __len__(self):
        return len(self.time)

    def __iter__(self) -> Iterator[EventRecord]:
        for i in range(len(self)):
            yield self.record(i)

    def record(self, i: int) -> EventRecord:
        return EventRecord(int(self.ids[i]), str(self.detector[i]), float(self.time[i]),
                           str(self.origin[i]), int(self.parent[i]))

    def mask(self, m: np.ndarray) -> "EventStream":
        return EventStream(self.ids[m], self.detector[m], self.time[m], self.origin[m],
                           self.parent[m], self.duration)

    def channel(self, name: str) -> np.ndarray:
        """Boolean mask of a physical detector, ``D1`` or ``D2``."""
        if name == "D1":
            return np.isin(self.detector, D1)
        if name == "D2":
            return self.detector == "beta"
        raise ValueError(f"unknown channel {name!r}")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("id", "detector", "time_ns", "origin", "parent"))
        for i in range(len(self)):
            w.writerow((int(self.ids[i]), self.detector[i], repr(float(self.time[i])),
                        self.origin[i], int(self.parent[i])))
        return buf.getvalue()


def _sample_passes(rng, n, cfg: TimingConfig) -> np.ndarray:
    """Delay-line passes per photon; ``-1`` marks photons lost in the loop."""
    u = rng.random(n)
    k = np.full(n, -1)
    edge = 0.0
    kk = 0
    while True:
        p = cfg.pass_probability(kk)
        if p < 1e-12:
            break
        k[(u >= edge) & (u < edge + p)] = kk
        edge += p
        kk += 1
    return k


def _aom_gate(times: np.ndarray, rng, cfg: TimingConfig) -> np.ndarray:
    """Per-herald status: 1 kept, 2 leaked through the gate, 0 suppressed."""
    status = np.zeros(len(times), dtype=np.int8)
    leak = rng.random(len(times)) >= cfg.aom_extinction
    gate_lo = gate_hi = -math.inf
    for i, t in enumerate(times):
        if gate_lo <= t < gate_hi:
            status[i] = 2 if leak[i] else 0
            continue
        status[i] = 1
        gate_lo, gate_hi = t + cfg.aom_shutoff, t + cfg.aom_shutoff + cfg.aom_hold
    return status


def _dead_time_keep(times: np.ndarray, dead: float) -> np.ndarray:
    """Non-paralyzable dead time on a sorted time array."""
    keep = np.ones(len(times), dtype=bool)
    if len(times) < 2:
        return keep
    close = np.flatnonzero(np.diff(times) < dead) + 1
    if len(close) == 0:
        return keep
    # only clusters of close events need the sequential rule
    last = -math.inf
    check = np.zeros(len(times), dtype=bool)
    check[close] = True
    for i in range(len(times)):
        if check[i] and times[i] - last < dead:
            keep[i] = False
        else:
            last = times[i]
    return keep


def simulate_streams(cfg: TimingConfig, duration: float) -> EventStream:
    """Simulate ``duration`` ns of detector events (see the module docstring)."""
    if duration <= cfg.capture_window:
        raise ValueError("duration must exceed the capture window")
    rng = np.random.default_rng(cfg.seed)
    sec = duration * 1e-9

    def poisson_times(rate):
        n = rng.poisson(rate * sec)
        return np.sort(rng.uniform(0, duration, n))

    t_alpha = poisson_times(cfg.rate_alpha)
    status = _aom_gate(t_alpha, rng, cfg)
    t_alpha = t_alpha[status > 0]
    alpha_origin = np.where(status[status > 0] == 2, "false_positive", "signal")
    t_beta = poisson_times(cfg.rate_beta)

    det, tm, org, src = [], [], [], []
    det += [np.full(len(t_alpha), "alpha"), np.full(len(t_beta), "beta")]
    tm += [t_alpha, t_beta]
    org += [alpha_origin, np.full(len(t_beta), "signal")]
    src += [np.full(len(t_alpha), -1), np.full(len(t_beta), -1)]
    n_heralds = len(t_alpha) + len(t_beta)

    # gamma clicks caused by the heralded photons
    herald_t = np.concatenate([t_alpha, t_beta])
    extra = np.concatenate([np.zeros(len(t_alpha)), np.full(len(t_beta), cfg.dt_dl)])
    passes = _sample_passes(rng, n_heralds, cfg)
    fire = (passes >= 0) & (rng.random(n_heralds) < cfg.p_gamma)
    idx = np.flatnonzero(fire)
    t_gamma = (herald_t[idx] + extra[idx] + passes[idx] * cfg.dt_dl + cfg.dt_fiber
               + rng.laplace(0, cfg.jitter_scale, len(idx)))
    det.append(np.full(len(idx), "gamma"))
    tm.append(t_gamma)
    org.append(np.array([f"echo_{k}" for k in passes[idx]], dtype=object))
    src.append(idx)

    for tag in ("alpha", "beta"):
        t_dark = poisson_times(cfg.dark_rate)
        det.append(np.full(len(t_dark), tag))
        tm.append(t_dark)
        org.append(np.full(len(t_dark), "dark"))
        src.append(np.full(len(t_dark), -1))

    detector = np.concatenate(det).astype(object)
    time = np.concatenate(tm)
    origin = np.concatenate(org).astype(object)
    parent = np.concatenate(src).astype(np.int64)  # herald index for now
    ids = np.arange(len(time))
    # herald i has id i (heralds come first)
    inside = (time >= 0) & (time < duration)

    keep = inside.copy()
    for ch in (np.isin(detector, D1), detector == "beta"):
        sel = np.flatnonzero(ch & inside)
        order = sel[np.argsort(time[sel], kind="stable")]
        keep[order] = _dead_time_keep(time[order], cfg.dead_time)
    order = np.flatnonzero(keep)
    order = order[np.argsort(time[order], kind="stable")]
    return EventStream(ids[order], detector[order], time[order], origin[order], parent[order],
                       float(duration))


@dataclass
class Coincidences:
    """Trigger-aligned prior events.

    ``trigger_index`` and ``event_index`` point into the event stream;
    ``offset`` is ``t_event - t_trigger`` (negative).
    """

    trigger_index: np.ndarray
    event_index: np.ndarray
    offset: np.ndarray
    channel: str
    true_pair: np.ndarray

    def __len__(self):
        return len(self.offset)

    def subset(self, m) -> "Coincidences":
        return Coincidences(self.trigger_index[m], self.event_index[m], self.offset[m],
                            self.channel, self.true_pair[m])


class NoTriggersError(RuntimeError):
    pass


def find_triggers(ev: EventStream, window: float) -> np.ndarray:
    """D1 events preceded within ``window`` by another D1 event and by a D2 event."""
    d1 = np.flatnonzero(ev.channel("D1"))
    d2 = np.flatnonzero(ev.channel("D2"))
    t1, t2 = ev.time[d1], ev.time[d2]
    n_prior_d1 = np.arange(len(d1)) - np.searchsorted(t1, t1 - window, side="left")
    n_prior_d2 = np.searchsorted(t2, t1, side="left") - np.searchsorted(t2, t1 - window, side="left")
    return d1[(n_prior_d1 > 0) & (n_prior_d2 > 0) & (t1 >= window)]


def coincidences(ev: EventStream, triggers: np.ndarray, channel: str, window: float) -> Coincidences:
    """All events on ``channel`` in ``[t_trigger - window, t_trigger)``."""
    sel = np.flatnonzero(ev.channel(channel))
    ts = ev.time[sel]
    tt = ev.time[triggers]
    lo = np.searchsorted(ts, tt - window, side="left")
    hi = np.searchsorted(ts, tt, side="left")
    counts = hi - lo
    trig = np.repeat(triggers, counts)
    starts = np.repeat(lo - np.cumsum(np.concatenate([[0], counts[:-1]])), counts)
    pos = np.arange(counts.sum()) + starts
    evi = sel[pos]
    # the trigger never pairs with itself (hi is exclusive of equal times)
    evi_mask = evi != trig
    trig, evi = trig[evi_mask], evi[evi_mask]
    true = ev.parent[trig] == ev.ids[evi]
    true &= ev.parent[trig] >= 0
    return Coincidences(trig, evi, ev.time[evi] - ev.time[trig], channel, true)


@dataclass
class Histogram:
    edges: np.ndarray
    counts: np.ndarray
    peaks: np.ndarray

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("t_ns", "counts"))
        for c, n in zip(self.centers, self.counts):
            w.writerow((repr(float(c)), int(n)))
        return buf.getvalue()


def find_histogram_peaks(centers: np.ndarray, counts: np.ndarray, min_separation: float = 20.0,
                         significance: float = 5.0) -> np.ndarray:
    """Peak centers standing ``significance`` Poisson sigmas above the median floor.

    Each center is refined by the count-weighted mean over +-3 bins.
    """
    floor = float(np.median(counts))
    height = floor + significance * math.sqrt(floor + 1)
    step = float(centers[1] - centers[0])
    idx, _ = find_peaks(counts, height=height, distance=max(1, int(min_separation / step)))
    out = []
    for i in idx:
        lo, hi = max(0, i - 3), min(len(counts), i + 4)
        w = np.clip(counts[lo:hi] - floor, 0, None)
        out.append(float(np.average(centers[lo:hi], weights=w)) if w.sum() > 0 else float(centers[i]))
    return np.array(sorted(out))


def coincidence_histogram(ev: EventStream, window: float | None = None, bin_width: float = 1.0,
                          cfg: TimingConfig | None = None) -> dict[str, Histogram]:
    """Trigger-aligned histograms of prior D1 (``alpha``) and D2 (``beta``) events."""
    cfg = cfg or TimingConfig()
    window = cfg.capture_window if window is None else window
    trig = find_triggers(ev, window)
    if len(trig) == 0:
        raise NoTriggersError("no three-fold coincidence triggers in the event stream")
    edges = np.arange(-window, 0 + bin_width / 2, bin_width)
    out = {}
    for name, ch in (("alpha", "D1"), ("beta", "D2")):
        co = coincidences(ev, trig, ch, window)
        counts, _ = np.histogram(co.offset, bins=edges)
        centers = 0.5 * (edges[1:] + edges[:-1])
        out[name] = Histogram(edges, counts, find_histogram_peaks(centers, counts))
    return out


def time_filter(co: Coincidences, center: float, width: float) -> Coincidences:
    """Keep pairs with ``|offset - center| <= width / 2``."""
    return co.subset(np.abs(co.offset - center) <= width / 2)


def signal_purity(co: Coincidences) -> float:
    """Fraction of pairs whose prior event caused the trigger (ground truth)."""
    return float(co.true_pair.mean()) if len(co) else float("nan")


def sideband_fp_fraction(co: Coincidences, center: float, width: float, window: float,
                         guard: float = 15.0, period: float | None = None,
                         span: float = 200.0) -> float:
    """False-positive fraction in the filter window from the histogram noise floor.

    The accidental density is the mean count per ns within ``span`` ns of
    ``center``, skipping ``+-guard`` ns around ``center + j * period`` (the
    echo comb) when ``period`` is given.  It is scaled to the filter width.
    """
    n_in = int((np.abs(co.offset - center) <= width / 2).sum())
    if n_in == 0:
        return float("nan")
    edges = np.arange(-window, 0 + 0.5, 1.0)
    counts, _ = np.histogram(co.offset, bins=edges)
    centers = 0.5 * (edges[1:] + edges[:-1])
    ok = (np.abs(centers - center) > guard) & (np.abs(centers - center) <= span)
    if period:
        phase = (centers - center) / period
        ok &= np.abs(centers - center - np.round(phase) * period) > guard
    density = float(np.mean(counts[ok]))
    return min(1.0, density * width / n_in)


def analytic_fp_fraction(cfg: TimingConfig, n_triggers: int, n_in: int,
                         singles_rate_hz: float, center: float | None = None,
                         width: float | None = None) -> float:
    """Expected accidental fraction among ``n_in`` D1 pairs in a filter window.

    D1 singles are treated as Poisson with rate ``lam``.  A trigger whose own
    alpha herald lies in the capture window sees the plain density ``lam``;
    any other trigger needed some D1 event in the window to qualify, which
    raises the density to ``lam / (1 - exp(-lam T))``.  Caused triggers are
    tied to the true pairs in the window through the delay-line pass
    distribution and the share of the jitter law inside the filter, and the
    resulting linear relation is solved for the accidental count.  AOM gating
    and dead time are not modeled here.
    """
    center = cfg.alpha_center if center is None else center
    width = cfg.filter_window if width is None else width
    if n_in <= 0:
        return float("nan")
    lam = singles_rate_hz * 1e-9
    boost = 1 / -math.expm1(-lam * cfg.capture_window)
    k_center = round((-center - cfg.dt_fiber) / cfg.dt_dl)
    k_max = math.floor((cfg.capture_window - cfg.dt_fiber) / cfg.dt_dl)
    captured = -math.expm1(-width / 2 / cfg.jitter_scale)
    g = (sum(cfg.pass_probability(k) for k in range(k_max + 1))
         / (cfg.pass_probability(k_center) * captured))
    lw = lam * width
    acc = lw * (g * n_in * (1 - boost) + n_triggers * boost) / (1 + lw * g * (1 - boost))
    return min(1.0, max(0.0, acc / n_in))


def filtered_triples(ev: EventStream, cfg: TimingConfig, width: float | None = None) -> np.ndarray:
    """Triggers with an alpha event and a beta event inside their filter windows."""
    width = cfg.filter_window if width is None else width
    trig = find_triggers(ev, cfg.capture_window)
    ok = []
    for ch, center in (("D1", cfg.alpha_center), ("D2", cfg.beta_center)):
        co = time_filter(coincidences(ev, trig, ch, cfg.capture_window), center, width)
        ok.append(set(co.trigger_index.tolist()))
    return np.array(sorted(ok[0] & ok[1]), dtype=int)


def triple_rate(ev: EventStream, cfg: TimingConfig) -> float:
    """Filtered three-fold coincidences per second."""
    return len(filtered_triples(ev, cfg)) / (ev.duration * 1e-9)


def echo_counts(ev: EventStream, max_pass: int = 4) -> np.ndarray:
    """Gamma clicks per delay-line pass count, from ground-truth labels."""
    g = ev.origin[ev.detector == "gamma"]
    return np.array([(g == f"echo_{k}").sum() for k in range(max_pass + 1)])


@dataclass
class VarianceTrace:
    t: np.ndarray
    variance: np.ndarray
    n_triggers: int
    peaks: np.ndarray = field(default_factory=lambda: np.array([]))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("t_ns", "variance"))
        for a, b in zip(self.t, self.variance):
            w.writerow((repr(float(a)), repr(float(b))))
        return buf.getvalue()


SINGLE_PHOTON_VARIANCE = 1.5
VACUUM_VARIANCE = 0.5


def _single_photon_quadratures(rng, n):
    # |psi_1(x)|^2 = 2 x^2 exp(-x^2) / sqrt(pi): |x| is chi-distributed with 3 dof / sqrt(2)
    r = np.sqrt(rng.chisquare(3, n) / 2)
    return r * rng.choice((-1.0, 1.0), n)


def variance_trace(ev: EventStream, cfg: TimingConfig, filtered: bool = False,
                   t_range: tuple[float, float] = (-900.0, 100.0), bin_width: float = 2.0,
                   photon_fraction: float = 1.0) -> VarianceTrace:
    """Variance of a synthetic DV-mode homodyne stream around each trigger.

    Each alpha herald (including leaks) puts a single photon in the DV mode
    at its own time and echoes at ``k * dt_dl`` with weight ``pass_probability(k)
    / 0.5``, shaped by ``|f(t)|**2`` normalized to peak 1.  A reading is
    ``sqrt(w) x_photon + sqrt(1 - w) x_vac`` with ``w`` the summed weight
    (capped at 1) scaled by ``photon_fraction``.  ``filtered`` keeps only
    triggers passing the alpha-window filter.
    """
    rng = np.random.default_rng(cfg.seed + 1)
    trig = find_triggers(ev, cfg.capture_window)
    if filtered and len(trig):
        co = time_filter(coincidences(ev, trig, "D1", cfg.capture_window), cfg.alpha_center,
                         cfg.filter_window)
        trig = np.unique(co.trigger_index)
    t = np.arange(t_range[0], t_range[1], bin_width) + bin_width / 2
    if len(trig) == 0:
        return VarianceTrace(t, np.full(len(t), np.nan), 0)
    heralds = np.flatnonzero((ev.detector == "alpha") & (ev.origin != "dark"))
    th = ev.time[heralds]
    rate = 2 * math.pi * cfg.gamma_mhz * 1e-3
    n_echo = 4
    span = n_echo * cfg.dt_dl + 10 * cfg.jitter_scale
    w = np.zeros((len(trig), len(t)))
    for row, ti in enumerate(ev.time[trig]):
        lo = np.searchsorted(th, ti + t_range[0] - span)
        hi = np.searchsorted(th, ti + t_range[1] + 10 * cfg.jitter_scale)
        for h in th[lo:hi]:
            for k in range(n_echo + 1):
                w[row] += cfg.pass_probability(k) / 0.5 * np.exp(-rate * np.abs(t + ti - h - k * cfg.dt_dl))
    w = np.clip(w * photon_fraction, 0, 1)
    x = (np.sqrt(w) * _single_photon_quadratures(rng, w.size).reshape(w.shape)
         + np.sqrt(1 - w) * rng.normal(0, math.sqrt(VACUUM_VARIANCE), w.shape))
    var = x.var(axis=0, ddof=1) if len(trig) > 1 else np.zeros(len(t))
    return VarianceTrace(t, var, len(trig))


def config_dict(cfg: TimingConfig) -> dict:
    return asdict(cfg)
