"""Experiment runner: configuration, per-SNR calibration, CSV output.

Each experiment produces one CSV table and an adjacent ``.meta.json``
file holding the full resolved configuration, the synthesized demapper
descriptions and every calibration constant, so any row can be
re-derived from the metadata alone.  Identical configuration and seed
give byte-identical tables regardless of the worker count.
"""

from __future__ import annotations

import copy
import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .analog import (
    AnalogDemapper,
    BJT_ISAT_V,
    BJT_KNEE_V,
    MOSFET_ISAT_V,
    MOSFET_KNEE_V,
    R_SPAN_DEFAULT,
    VDD_DEFAULT,
    build_demapper,
    demap_static,
    demapper_to_dict,
)
from .calibration import AffineMap, calibration_grid, fit_output_map, input_map
from .channel import DEFAULT_CHUNK_SIZE, from_snr_db
from .constellation import Constellation, build_pam8
from .dynamics import (
    DynamicsParams,
    SAMPLE_FRACTION_DEFAULT,
    T_PLATEAU_BJT,
    TAU_DEFAULT,
    ber_vs_rate,
    simulate_transient,
)
from .metrics import evaluate_demappers, rate_penalty
from .reference import exact_llr, maxlog_llr

EXPERIMENTS = ("llr-curves", "rate-penalty", "ber-vs-rate", "transitions")
MODES = ("exact", "maxlog", "analog-bjt", "analog-mosfet")
ANALOG_MODES = ("analog-bjt", "analog-mosfet")


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the field."""


DEFAULT_CONFIG: dict = {
    "seed": 12345,
    "snr_db": list(range(-2, 17)),
    "modes": list(MODES),
    "n_samples": 1_000_000,
    "n_symbols": 100_000,
    "n_workers": 1,
    "chunk_size": DEFAULT_CHUNK_SIZE,
    "out": None,
    "llr_grid_points": 1001,
    "llr_snr_db": [10.0],
    "ber_snr_db": 10.0,
    "rates_sps": [5e7, 1e8, 1.5e8, 2e8, 2.5e8, 3e8, 3.5e8, 4e8, 4.5e8, 5e8],
    "input_window_v": [0.04, 0.60],
    "demapper": {
        "vdd": VDD_DEFAULT,
        "snr_ref_db": 10.0,
        "r_span": R_SPAN_DEFAULT,
        "bjt": {"knee_eps_v": BJT_KNEE_V, "isat_v": BJT_ISAT_V},
        "mosfet": {"knee_eps_v": MOSFET_KNEE_V, "isat_v": MOSFET_ISAT_V},
    },
    "dynamics": {
        "tau_s": TAU_DEFAULT,
        "t_plateau_bjt_s": T_PLATEAU_BJT,
        "samples_per_symbol": 16,
        "sample_fraction": SAMPLE_FRACTION_DEFAULT,
    },
    "transitions": {
        "symbol_rate_sps": 1e8,
        "samples_per_symbol": 100,
    },
}


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_config(path=None, overrides: dict | None = None) -> dict:
    """Resolve the configuration: defaults, then file, then overrides."""
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if path is not None:
        with open(path) as fh:
            loaded = yaml.safe_load(fh)
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"config file {path}: top level must be a mapping")
        cfg = _merge(cfg, loaded)
    if overrides:
        cfg = _merge(cfg, {k: v for k, v in overrides.items() if v is not None})
    return cfg


def _require_number_list(cfg: dict, key: str, minimum: float | None = None) -> list[float]:
    value = cfg.get(key)
    if not isinstance(value, (list, tuple)) or len(value) == 0:
        raise ConfigError(f"{key}: must be a non-empty list of numbers")
    out = []
    for item in value:
        try:
            x = float(item)
        except (TypeError, ValueError):
            raise ConfigError(f"{key}: entry {item!r} is not a number") from None
        if not np.isfinite(x):
            raise ConfigError(f"{key}: entry {item!r} is not finite")
        if minimum is not None and x <= minimum:
            raise ConfigError(f"{key}: entry {item!r} must exceed {minimum}")
        out.append(x)
    return out


def validate_config(cfg: dict, experiment: str) -> dict:
    """Check every field used by ``experiment``; raise ConfigError with
    the offending field name on the first problem."""
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"experiment: unknown id {experiment!r}; expected one of {EXPERIMENTS}")
    if not isinstance(cfg.get("seed"), int):
        raise ConfigError("seed: required integer (no silent nondeterminism)")
    modes = cfg.get("modes")
    if not isinstance(modes, (list, tuple)) or not modes:
        raise ConfigError("modes: must be a non-empty list")
    for mode in modes:
        if mode not in MODES:
            raise ConfigError(f"modes: unknown demapper id {mode!r}; expected subset of {MODES}")
    for key in ("n_samples", "n_symbols"):
        n = cfg.get(key)
        if not isinstance(n, int) or n < 1000:
            raise ConfigError(f"{key}: must be an integer of at least 1000")
    if not isinstance(cfg.get("n_workers"), int) or cfg["n_workers"] < 1:
        raise ConfigError("n_workers: must be a positive integer")
    if not isinstance(cfg.get("chunk_size"), int) or cfg["chunk_size"] < 1:
        raise ConfigError("chunk_size: must be a positive integer")
    window = cfg.get("input_window_v")
    if (
        not isinstance(window, (list, tuple))
        or len(window) != 2
        or not all(isinstance(float(v), float) for v in window)
        or not float(window[0]) < float(window[1])
    ):
        raise ConfigError("input_window_v: must be [vmin, vmax] with vmin < vmax")

    _require_number_list(cfg, "snr_db")
    if experiment == "llr-curves":
        _require_number_list(cfg, "llr_snr_db")
        if not isinstance(cfg.get("llr_grid_points"), int) or cfg["llr_grid_points"] < 2:
            raise ConfigError("llr_grid_points: must be an integer of at least 2")
    if experiment == "ber-vs-rate":
        _require_number_list(cfg, "rates_sps", minimum=0.0)
        try:
            float(cfg.get("ber_snr_db"))
        except (TypeError, ValueError):
            raise ConfigError("ber_snr_db: must be a number") from None
    dyn = cfg.get("dynamics")
    if not isinstance(dyn, dict):
        raise ConfigError("dynamics: must be a mapping")
    for key, low in (("tau_s", 0.0), ("sample_fraction", 0.0)):
        try:
            x = float(dyn.get(key))
        except (TypeError, ValueError):
            raise ConfigError(f"dynamics.{key}: must be a number") from None
        if not x > low:
            raise ConfigError(f"dynamics.{key}: must exceed {low}")
    if float(dyn.get("t_plateau_bjt_s", 0.0)) < 0:
        raise ConfigError("dynamics.t_plateau_bjt_s: must be non-negative")
    if not isinstance(dyn.get("samples_per_symbol"), int) or dyn["samples_per_symbol"] < 2:
        raise ConfigError("dynamics.samples_per_symbol: must be an integer of at least 2")
    return cfg


@dataclass
class Workbench:
    """Shared objects for one experiment run."""

    c: Constellation
    imap: AffineMap
    demappers: dict[str, AnalogDemapper]
    cfg: dict

    @classmethod
    def from_config(cls, cfg: dict) -> "Workbench":
        c = build_pam8()
        vmin, vmax = (float(v) for v in cfg["input_window_v"])
        imap = input_map(c, vmin, vmax)
        dem_cfg = cfg["demapper"]
        demappers = {}
        for mode_id, preset in (("analog-bjt", "bjt"), ("analog-mosfet", "mosfet")):
            if mode_id in cfg["modes"]:
                demappers[mode_id] = build_demapper(
                    c,
                    imap,
                    mode=preset,
                    knee_eps=float(dem_cfg[preset]["knee_eps_v"]),
                    isat_v=float(dem_cfg[preset]["isat_v"]),
                    snr_ref_db=float(dem_cfg["snr_ref_db"]),
                    r_span=float(dem_cfg["r_span"]),
                    vdd=float(dem_cfg["vdd"]),
                )
        return cls(c=c, imap=imap, demappers=demappers, cfg=cfg)

    def calibrate(self, snr_db: float) -> dict[str, dict[int, AffineMap]]:
        """Per-SNR least-squares output maps against the exact LLRs."""
        params = from_snr_db(snr_db)
        grid = calibration_grid(self.c, params.sigma)
        maps: dict[str, dict[int, AffineMap]] = {}
        for mode_id, demapper in self.demappers.items():
            per_bit = {}
            for k in (1, 2, 3):
                vout = demap_static(np.asarray(self.imap(grid)), demapper, k)
                ref = exact_llr(grid, k, self.c, params)
                per_bit[k] = fit_output_map(k, vout, ref, grid)
            maps[mode_id] = per_bit
        return maps

    def llr_fns(self, snr_db: float, output_maps: dict[str, dict[int, AffineMap]]) -> dict:
        """LLR callables (r, k) -> array for every configured mode."""
        params = from_snr_db(snr_db)
        fns = {}
        for mode_id in self.cfg["modes"]:
            if mode_id == "exact":
                fns[mode_id] = lambda r, k, p=params: exact_llr(r, k, self.c, p)
            elif mode_id == "maxlog":
                fns[mode_id] = lambda r, k, p=params: maxlog_llr(r, k, self.c, p)
            else:
                demapper = self.demappers[mode_id]
                per_bit = output_maps[mode_id]

                def analog_fn(r, k, demapper=demapper, per_bit=per_bit):
                    vout = demap_static(np.asarray(demapper.input_map(r)), demapper, k)
                    m = per_bit[k]
                    return m.scale * vout + m.offset

                fns[mode_id] = analog_fn
        return fns


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path, fieldnames: list[str], rows: list[dict]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(fieldnames)
        for row in rows:
            writer.writerow([_fmt(row.get(name)) for name in fieldnames])


def write_metadata(csv_path, cfg: dict, extra: dict) -> Path:
    meta_path = Path(str(csv_path) + ".meta.json")
    payload = {"demapsim_version": __version__, "config": cfg, **extra}
    with open(meta_path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")
    return meta_path


def _calibration_meta(output_maps_by_snr: dict) -> dict:
    return {
        repr(float(snr)): {
            mode: {f"b{k}": {"gamma": m.scale, "zeta": m.offset} for k, m in per_bit.items()}
            for mode, per_bit in maps.items()
        }
        for snr, maps in output_maps_by_snr.items()
    }


METRIC_FIELDS = [
    "snr_db", "demapper_id", "mi_b1", "mi_b2", "mi_b3", "gmi", "penalty_pct",
    "ber", "n_samples", "std_err",
    "gamma_1", "gamma_2", "gamma_3", "zeta_1", "zeta_2", "zeta_3", "seed",
]
LLR_FIELDS = ["snr_db", "demapper_id", "k", "vin_v", "r", "llr", "gamma", "zeta", "seed"]
SWEEP_FIELDS = ["rate_sps", "demapper_id", "errors", "bits", "ber", "seed"]
TRACE_FIELDS = [
    "demapper_id", "transition", "time_s", "vout_v_b1", "vout_v_b2", "vout_v_b3", "seed",
]


def run_llr_curves(cfg: dict) -> tuple[list[dict], dict]:
    """Calibrated LLR curves over the input-voltage window per SNR."""
    validate_config(cfg, "llr-curves")
    bench = Workbench.from_config(cfg)
    vmin, vmax = (float(v) for v in cfg["input_window_v"])
    vin = np.linspace(vmin, vmax, cfg["llr_grid_points"])
    r = np.asarray(bench.imap.inverse(vin))
    seed = cfg["seed"]
    rows = []
    maps_by_snr = {}
    for snr_db in (float(s) for s in cfg["llr_snr_db"]):
        output_maps = bench.calibrate(snr_db)
        maps_by_snr[snr_db] = output_maps
        fns = bench.llr_fns(snr_db, output_maps)
        for mode_id, fn in fns.items():
            for k in (1, 2, 3):
                llr = np.asarray(fn(r, k))
                gamma = zeta = None
                if mode_id in output_maps:
                    gamma = output_maps[mode_id][k].scale
                    zeta = output_maps[mode_id][k].offset
                for j in range(vin.size):
                    rows.append(
                        {
                            "snr_db": snr_db,
                            "demapper_id": mode_id,
                            "k": k,
                            "vin_v": float(vin[j]),
                            "r": float(r[j]),
                            "llr": float(llr[j]),
                            "gamma": gamma,
                            "zeta": zeta,
                            "seed": seed,
                        }
                    )
    meta = {
        "calibration": _calibration_meta(maps_by_snr),
        "demappers": {m: demapper_to_dict(d) for m, d in bench.demappers.items()},
    }
    return rows, meta


def run_rate_penalty(cfg: dict) -> tuple[list[dict], dict]:
    """GMI, rate penalty, std error and hard-decision BER per SNR and mode."""
    validate_config(cfg, "rate-penalty")
    bench = Workbench.from_config(cfg)
    seed = cfg["seed"]
    rows = []
    maps_by_snr = {}
    for snr_index, snr_db in enumerate(float(s) for s in cfg["snr_db"]):
        params = from_snr_db(snr_db)
        output_maps = bench.calibrate(snr_db)
        maps_by_snr[snr_db] = output_maps
        fns = bench.llr_fns(snr_db, output_maps)
        # the exact rule is always evaluated: it anchors the penalty
        fns.setdefault("exact", lambda r, k, p=params: exact_llr(r, k, bench.c, p))
        evals = evaluate_demappers(
            fns,
            bench.c,
            params,
            cfg["n_samples"],
            seed,
            ref_id="exact",
            stream=snr_index,
            n_workers=cfg["n_workers"],
            chunk_size=cfg["chunk_size"],
        )
        gmi_exact = evals["exact"].gmi_est.gmi
        for mode_id in cfg["modes"]:
            ev = evals[mode_id]
            maps = output_maps.get(mode_id)
            row = {
                "snr_db": snr_db,
                "demapper_id": mode_id,
                "mi_b1": ev.gmi_est.per_bit_mi[0],
                "mi_b2": ev.gmi_est.per_bit_mi[1],
                "mi_b3": ev.gmi_est.per_bit_mi[2],
                "gmi": ev.gmi_est.gmi,
                "penalty_pct": rate_penalty(ev.gmi_est.gmi, gmi_exact),
                "ber": ev.ber_est.ber,
                "n_samples": ev.gmi_est.n_samples,
                "std_err": ev.gmi_est.std_error,
                "seed": seed,
            }
            for k in (1, 2, 3):
                row[f"gamma_{k}"] = maps[k].scale if maps else None
                row[f"zeta_{k}"] = maps[k].offset if maps else None
            rows.append(row)
    meta = {
        "calibration": _calibration_meta(maps_by_snr),
        "demappers": {m: demapper_to_dict(d) for m, d in bench.demappers.items()},
    }
    return rows, meta


def run_ber_vs_rate(cfg: dict) -> tuple[list[dict], dict]:
    """Settling-limited BER sweep plus the static exact reference row."""
    validate_config(cfg, "ber-vs-rate")
    bench = Workbench.from_config(cfg)
    seed = cfg["seed"]
    snr_db = float(cfg["ber_snr_db"])
    params = from_snr_db(snr_db)
    rates = [float(x) for x in cfg["rates_sps"]]
    dyn = cfg["dynamics"]
    output_maps = bench.calibrate(snr_db)
    rows = []

    static = evaluate_demappers(
        {"exact": lambda r, k: exact_llr(r, k, bench.c, params)},
        bench.c,
        params,
        cfg["n_symbols"],
        seed,
        stream=len(rates),  # streams 0..len(rates)-1 belong to the sweep
        n_workers=cfg["n_workers"],
        chunk_size=cfg["chunk_size"],
    )["exact"]
    rows.append(
        {
            "rate_sps": 0.0,
            "demapper_id": "exact-static",
            "errors": static.ber_est.errors,
            "bits": static.ber_est.bits,
            "ber": static.ber_est.ber,
            "seed": seed,
        }
    )

    for mode_id in cfg["modes"]:
        if mode_id not in ANALOG_MODES:
            continue
        demapper = bench.demappers[mode_id]
        dp = DynamicsParams(
            tau=float(dyn["tau_s"]),
            t_plateau=float(dyn["t_plateau_bjt_s"]) if mode_id == "analog-bjt" else 0.0,
            samples_per_symbol=int(dyn["samples_per_symbol"]),
            sample_fraction=float(dyn["sample_fraction"]),
        )
        sweep = ber_vs_rate(
            rates,
            snr_db,
            demapper,
            output_maps[mode_id],
            dp,
            cfg["n_symbols"],
            seed,
            bench.c,
            stream=0,
            n_workers=cfg["n_workers"],
        )
        for entry in sweep:
            rows.append({**entry, "demapper_id": mode_id, "seed": seed})
    meta = {
        "snr_db": snr_db,
        "calibration": _calibration_meta({snr_db: output_maps}),
        "demappers": {m: demapper_to_dict(d) for m, d in bench.demappers.items()},
    }
    return rows, meta


def run_transitions(cfg: dict) -> tuple[list[dict], dict]:
    """The two canonical settling traces for both analog modes."""
    validate_config(cfg, "transitions")
    bench = Workbench.from_config(cfg)
    seed = cfg["seed"]
    d_scale = bench.c.d
    transitions = {
        "+3d_to_+7d": (3.0 * d_scale, 7.0 * d_scale),
        "-7d_to_-5d": (-7.0 * d_scale, -5.0 * d_scale),
    }
    dyn = cfg["dynamics"]
    tr_cfg = cfg["transitions"]
    rate = float(tr_cfg["symbol_rate_sps"])
    sps = int(tr_cfg["samples_per_symbol"])
    rows = []
    for mode_id in cfg["modes"]:
        if mode_id not in ANALOG_MODES:
            continue
        demapper = bench.demappers[mode_id]
        dp = DynamicsParams(
            tau=float(dyn["tau_s"]),
            t_plateau=float(dyn["t_plateau_bjt_s"]) if mode_id == "analog-bjt" else 0.0,
            samples_per_symbol=sps,
            sample_fraction=float(dyn["sample_fraction"]),
        )
        for name, (r_a, r_b) in transitions.items():
            traces = {
                k: simulate_transient([r_a, r_b, r_b], rate, demapper, k, dp) for k in (1, 2, 3)
            }
            time = traces[1].time
            for j in range(time.size):
                rows.append(
                    {
                        "demapper_id": mode_id,
                        "transition": name,
                        "time_s": float(time[j]),
                        "vout_v_b1": float(traces[1].vout[j]),
                        "vout_v_b2": float(traces[2].vout[j]),
                        "vout_v_b3": float(traces[3].vout[j]),
                        "seed": seed,
                    }
                )
    meta = {"demappers": {m: demapper_to_dict(d) for m, d in bench.demappers.items()}}
    return rows, meta


_RUNNERS = {
    "llr-curves": (run_llr_curves, LLR_FIELDS),
    "rate-penalty": (run_rate_penalty, METRIC_FIELDS),
    "ber-vs-rate": (run_ber_vs_rate, SWEEP_FIELDS),
    "transitions": (run_transitions, TRACE_FIELDS),
}


def run_experiment(experiment: str, cfg: dict, out_path=None) -> Path:
    """Run one experiment and write its CSV and metadata files."""
    if experiment not in _RUNNERS:
        raise ConfigError(f"experiment: unknown id {experiment!r}; expected one of {EXPERIMENTS}")
    runner, fields = _RUNNERS[experiment]
    rows, meta = runner(cfg)
    path = out_path or cfg.get("out") or f"{experiment.replace('-', '_')}.csv"
    write_csv(path, fields, rows)
    write_metadata(path, cfg, meta)
    return Path(path)
