"""Batch command-line front end.

Each subcommand takes a flat key-value configuration (JSON file via
``--config``, single keys via ``--set key=value``), writes CSV/JSON data into
``--out`` and stamps every file with a hash of the effective configuration.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import bsm, channel, events, fock, metrics, states, tomography

EXIT_CONFIG = 2
EXIT_NUMERIC = 3

DEFAULTS: dict[str, dict] = {
    "fig4": {
        "loss_min_db": 0.0, "loss_max_db": 30.0, "loss_points": 41, "alpha": states.DEFAULT_ALPHA,
        "r": 0.10, "delta": 1.0, "eta_hd": 0.85, "eta_spd": 1.0, "fp_fraction": 0.40, "eta_d": 0.01,
    },
    "bsm-sweep": {
        "alpha": states.DEFAULT_ALPHA, "r_max": 0.2, "r_points": 21, "delta_max": 3.0,
        "delta_points": 31, "r_fixed": 0.10, "delta_fixed": 1.0, "eta_hd": 0.85, "eta_spd": 0.70,
    },
    "swap": {
        "alpha": states.DEFAULT_ALPHA, "r": 0.10, "delta": 1.0, "eta_hd": 1.0, "eta_spd": 1.0,
        "fp_fraction": 0.40, "eta_d": 0.01, "samples": 0, "cv_dim": states.CV_DIM,
        "efficiency_dv": 0.74, "efficiency_cv": 0.85, "grid_extent": 6.0, "grid_points": 101,
    },
    "tomography": {
        "alpha": states.DEFAULT_ALPHA, "single_samples": 200000, "phases": 12, "efficiency": 0.85,
        "single_dim": 10, "null_samples": 72000, "fit_samples": 14400, "fit_phases": 6,
        "fit_levels": 4, "fit_shuffles": 6,
    },
    "events": {
        "duration_ns": 2e10, **{k: v for k, v in events.config_dict(events.TimingConfig()).items()
                                if k != "seed"},
        "write_events": True,
    },
}


class ConfigError(ValueError):
    pass


def _coerce(key: str, raw, default):
    if isinstance(default, bool):
        if isinstance(raw, bool):
            return raw
        if isinstance(raw, str) and raw.lower() in ("true", "false", "1", "0"):
            return raw.lower() in ("true", "1")
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    try:
        if isinstance(default, int):
            val = float(raw)
            if val != int(val):
                raise ValueError
            return int(val)
        if isinstance(default, float):
            return float(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected a number, got {raw!r}") from None
    return raw


def resolve_config(experiment: str, config_path: str | None, overrides: list[str],
                   seed: int) -> dict:
    """Merge defaults, the config file and ``--set`` overrides; reject unknown keys."""
    base = dict(DEFAULTS[experiment])
    supplied: dict = {}
    if config_path:
        try:
            supplied.update(json.loads(Path(config_path).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {config_path}: {exc}") from None
        if not isinstance(supplied, dict):
            raise ConfigError("config file must hold a flat JSON object")
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        supplied[k.strip()] = v.strip()
    for k, v in supplied.items():
        if k not in base:
            raise ConfigError(f"unknown key {k!r} for {experiment}; known: {sorted(base)}")
        base[k] = _coerce(k, v, DEFAULTS[experiment][k])
    base["seed"] = int(seed)
    return base


def config_hash(experiment: str, cfg: dict) -> str:
    blob = json.dumps({"experiment": experiment, "config": cfg}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


class Writer:
    """Writes files stamped with the configuration hash."""

    def __init__(self, out: Path, experiment: str, cfg: dict):
        self.out = out
        self.hash = config_hash(experiment, cfg)
        out.mkdir(parents=True, exist_ok=True)
        self.json("config.json", {"experiment": experiment, "config": cfg})

    def csv(self, name: str, body: str):
        lines = [ln for ln in body.splitlines(keepends=True) if not ln.startswith("#")]
        (self.out / name).write_text(f"# config_hash: {self.hash}\n" + "".join(lines))

    def json(self, name: str, payload: dict):
        data = {"config_hash": self.hash, **payload}
        (self.out / name).write_text(json.dumps(data, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not serializable: {type(obj)}")


def _finite(x: float):
    return x if math.isfinite(x) else None


def state_payload(s: fock.MultiModeState) -> dict:
    return {
        "labels": list(s.labels), "dims": list(s.dims),
        "real": s.matrix.real.tolist(), "imag": s.matrix.imag.tolist(),
        "negativity": metrics.negativity(s, [s.labels[0]]) if len(s.modes) == 2 else None,
        "purity": metrics.purity(s),
    }


def cmd_fig4(cfg: dict, w: Writer) -> dict:
    grid = list(np.linspace(cfg["loss_min_db"], cfg["loss_max_db"], cfg["loss_points"]))
    summary = {}
    for inputs in ("ideal", "experimental"):
        cc = channel.CurveConfig(inputs=inputs, loss_db=grid, alpha=cfg["alpha"], r=cfg["r"],
                                 delta=cfg["delta"], eta_hd=cfg["eta_hd"], eta_spd=cfg["eta_spd"],
                                 fp_fraction=cfg["fp_fraction"], eta_d=cfg["eta_d"])
        rows = channel.negativity_vs_loss_curve(cc)
        w.csv(f"fig4_{inputs}.csv", channel.curve_to_csv(rows))
        summary[f"crossover_{inputs}_db"] = _finite(channel.crossover_db(rows))
        summary[f"zero_loss_{inputs}"] = dict(zip(channel.CURVE_HEADER, rows[0]))
    w.json("fig4_summary.json", summary)
    return summary


def cmd_bsm_sweep(cfg: dict, w: Writer) -> dict:
    rs = list(np.linspace(0, cfg["r_max"], cfg["r_points"]))
    deltas = list(np.linspace(0, cfg["delta_max"], cfg["delta_points"]))
    effs = ((1.0, 1.0), (cfg["eta_hd"], cfg["eta_spd"]))
    vs_r = bsm.sweep_bsm(rs, [0.0, cfg["delta_fixed"]], effs, alpha=cfg["alpha"])
    vs_delta = bsm.sweep_bsm([0.0, cfg["r_fixed"]], deltas, effs, alpha=cfg["alpha"])
    w.csv("bsm_vs_r.csv", bsm.sweep_to_csv(vs_r))
    w.csv("bsm_vs_delta.csv", bsm.sweep_to_csv(vs_delta))
    point = bsm.sweep_bsm([cfg["r_fixed"]], [cfg["delta_fixed"]], effs, alpha=cfg["alpha"])
    ref = bsm.sweep_bsm([0.0], [cfg["delta_fixed"]], alpha=cfg["alpha"])[0]
    summary = {
        "working_point": [dict(zip(bsm.SWEEP_HEADER, r.astuple())) for r in point],
        "fidelity_drop_vs_r0": ref.fidelity - point[0].fidelity,
    }
    w.json("bsm_summary.json", summary)
    return summary


def _swap_panels(cfg: dict) -> dict[str, fock.MultiModeState]:
    dv = states.experimental_input_dv()
    hy = states.experimental_input_hybrid(alpha=cfg["alpha"], cv_dim=cfg["cv_dim"])
    cp = channel.ChannelParams(eta_hd=cfg["eta_hd"], eta_d=cfg["eta_d"], fp_fraction=cfg["fp_fraction"])
    bp = bsm.BsmParams(cfg["r"], cfg["delta"], cfg["eta_hd"], cfg["eta_spd"])
    out = channel.swap_over_channel(dv, hy, cp, bp, cfg["alpha"])
    if out.state is None:
        raise FloatingPointError("BSM heralding probability vanished")
    no_bsm = fock.tensor(fock.partial_trace(dv, ["A"]), fock.partial_trace(hy, ["D"]))
    return {"input_dv": dv, "input_hybrid": hy, "output_bsm": out.state, "output_no_bsm": no_bsm}


def cmd_swap(cfg: dict, w: Writer) -> dict:
    axis = np.linspace(-cfg["grid_extent"], cfg["grid_extent"], cfg["grid_points"])
    summary = {}
    for k, (name, s) in enumerate(_swap_panels(cfg).items()):
        if cfg["samples"] > 0:
            ph = tuple(np.arange(6) * np.pi / 6)
            effs = (cfg["efficiency_dv"], cfg["efficiency_cv"]) if name != "input_dv" else \
                (cfg["efficiency_dv"], cfg["efficiency_dv"])
            data = tomography.sample_two_mode(s, ph, ph, max(1, cfg["samples"] // 36), effs,
                                              seed=cfg["seed"] + k)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                s = tomography.two_mode_mle(data, (3, s.dims[1]), effs).state
        payload = state_payload(s)
        w.json(f"swap_{name}.json", payload)
        blocks = tomography.hybrid_density_wigner(s, axis, axis)
        lines = ["i,j,x,p,W\n"]
        for i in range(2):
            for j in range(2):
                g = blocks[i][j]
                for a, pv in enumerate(g.p):
                    for b, xv in enumerate(g.x):
                        lines.append(f"{i},{j},{xv!r},{pv!r},{float(g.values[a, b])!r}\n")
        w.csv(f"swap_{name}_wigner.csv", "".join(lines))
        offdiag = float(np.abs(blocks[0][1].values).max())
        summary[name] = {"negativity": payload["negativity"], "purity": payload["purity"],
                         "max_offdiag_wigner": offdiag}
    w.json("swap_summary.json", summary)
    return summary


def cmd_tomography(cfg: dict, w: Writer) -> dict:
    seed = cfg["seed"]
    phases = tuple(np.arange(cfg["phases"]) * np.pi / cfg["phases"])
    cat = states.cat_state(states.CatSpec(cfg["alpha"], "odd", cfg["single_dim"]))
    data = tomography.sample_quadratures(cat, phases, cfg["single_samples"] // cfg["phases"],
                                         cfg["efficiency"], seed)
    w.csv("cat_minus_samples.csv", data.to_csv())
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        comp = tomography.mle_reconstruct(data, cfg["single_dim"], cfg["efficiency"])
        raw = tomography.mle_reconstruct(data, cfg["single_dim"], 1.0)
    report = {
        "cat_minus": {
            "fidelity_compensated": metrics.fidelity(comp.state, cat),
            "fidelity_uncompensated": metrics.fidelity(raw.state, cat),
            "iterations": comp.iterations, "converged": comp.converged,
        }
    }
    w.json("cat_minus_reconstruction.json", state_payload(comp.state))
    w.csv("cat_minus_wigner.csv", tomography.wigner(comp.state).to_csv())

    ph2 = tuple(np.arange(cfg["fit_phases"]) * np.pi / cfg["fit_phases"])
    npair = len(ph2) ** 2
    prod = _swap_panels({**DEFAULTS["swap"], "alpha": cfg["alpha"]})["output_no_bsm"]
    null = tomography.sample_two_mode(prod, ph2, ph2, max(1, cfg["null_samples"] // npair), seed=seed + 1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        null_state = tomography.two_mode_mle(null, (2, 8)).state
    report["null_test_negativity"] = metrics.negativity(null_state, ["A"])

    dv = states.experimental_input_dv()
    fit_data = tomography.sample_two_mode(dv, ph2, ph2, max(1, cfg["fit_samples"] // npair), seed=seed + 2)
    samples = tomography.partition_log_negativities(fit_data, (3, 3), levels=cfg["fit_levels"],
                                                    shuffles=cfg["fit_shuffles"], seed=seed + 3,
                                                    tol=1e-6)
    fit = metrics.extrapolate_log_negativity(samples)
    w.json("log_negativity_fit.json", json.loads(fit.to_json()))
    report["log_negativity_fit"] = {
        "true": metrics.log_negativity(dv, ["A"]), "e_infinity": fit.e_infinity,
        "e_infinity_stderr": fit.e_infinity_stderr, "c": fit.c,
    }
    w.json("tomography_report.json", report)
    return report


def cmd_events(cfg: dict, w: Writer) -> dict:
    fields = events.config_dict(events.TimingConfig())
    tc = events.TimingConfig(**{k: cfg[k] for k in fields if k != "seed"}, seed=cfg["seed"])
    ev = events.simulate_streams(tc, cfg["duration_ns"])
    if cfg["write_events"]:
        w.csv("events.csv", ev.to_csv())
    hist = events.coincidence_histogram(ev, cfg=tc)
    for name, h in hist.items():
        w.csv(f"histogram_{name}.csv", h.to_csv())
    for filt in (False, True):
        vt = events.variance_trace(ev, tc, filtered=filt)
        w.csv(f"variance_{'filtered' if filt else 'unfiltered'}.csv", vt.to_csv())
    trig = events.find_triggers(ev, tc.capture_window)
    co = events.coincidences(ev, trig, "D1", tc.capture_window)
    filt = events.time_filter(co, tc.alpha_center, tc.filter_window)
    echoes = events.echo_counts(ev)
    summary = {
        "n_events": len(ev), "n_triggers": int(len(trig)),
        "alpha_peaks_ns": hist["alpha"].peaks, "beta_peaks_ns": hist["beta"].peaks,
        "echo_counts": echoes, "echo_ratios": [float(b / a) if a else None for a, b in zip(echoes, echoes[1:])],
        "signal_purity_unfiltered": events.signal_purity(co),
        "signal_purity_filtered": events.signal_purity(filt),
        "filtered_coincidences": len(filt),
        "fp_fraction_truth": 1 - events.signal_purity(filt) if len(filt) else None,
        "fp_fraction_sideband": events.sideband_fp_fraction(co, tc.alpha_center, tc.filter_window,
                                                            tc.capture_window, period=tc.dt_dl),
        "fp_fraction_analytic": events.analytic_fp_fraction(
            tc, len(trig), len(filt), ev.channel("D1").sum() / (ev.duration * 1e-9)),
        "triple_rate_hz": events.triple_rate(ev, tc),
        "temporal_width_ns": tc.temporal_width,
    }
    w.json("events_summary.json", summary)
    return summary


COMMANDS = {
    "fig4": cmd_fig4, "bsm-sweep": cmd_bsm_sweep, "swap": cmd_swap,
    "tomography": cmd_tomography, "events": cmd_events,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hybridswap", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, help=f"run the {name} experiment")
        sp.add_argument("--config", help="flat JSON file of parameter overrides")
        sp.add_argument("--out", default=f"out/{name}", help="output directory")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one parameter (repeatable)")
        sp.add_argument("--show-config", action="store_true",
                        help="print the effective configuration and exit")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args.command, args.config, args.set, args.seed)
        if args.show_config:
            print(json.dumps(cfg, indent=2, sort_keys=True))
            return 0
        writer = Writer(Path(args.out), args.command, cfg)
        summary = COMMANDS[args.command](cfg, writer)
    except (ConfigError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        if isinstance(exc, (fock.FockError, metrics.FitError)):
            print(f"numerical failure: {exc}", file=sys.stderr)
            return EXIT_NUMERIC
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FloatingPointError, np.linalg.LinAlgError, events.NoTriggersError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    print(json.dumps(summary, indent=2, sort_keys=True, default=_jsonable))
    return 0


if __name__ == "__main__":
    sys.exit(main())
