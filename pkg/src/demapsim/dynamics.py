"""First-order settling model with a saturation-exit plateau.

Between symbols the output relaxes exponentially toward the static
value for the current input.  When a symbol transition re-activates a
cell that was in its zero-output state, charge stored in that state
must first drain, modeled as the output holding its pre-transition
value for a fixed plateau time before relaxation begins (plateau time
zero in MOSFET mode).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import channel
from .analog import AnalogDemapper, cell_ideal_active, demap_static
from .constellation import Constellation

TAU_DEFAULT = 0.4e-9        # settling time constant: 5 tau = 2 ns
T_PLATEAU_BJT = 2.0e-9      # base-discharge hold after a saturation exit
SAMPLE_FRACTION_DEFAULT = 0.95  # sample near the end of the symbol


@dataclass(frozen=True)
class DynamicsParams:
    tau: float
    t_plateau: float
    samples_per_symbol: int = 16
    sample_fraction: float = SAMPLE_FRACTION_DEFAULT

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if self.t_plateau < 0:
            raise ValueError(f"t_plateau must be non-negative, got {self.t_plateau}")
        if self.samples_per_symbol < 2:
            raise ValueError("samples_per_symbol must be at least 2")
        if not 0.0 < self.sample_fraction <= 1.0:
            raise ValueError("sample_fraction must lie in (0, 1]")

    @classmethod
    def for_mode(cls, mode: str, **kwargs) -> "DynamicsParams":
        plateau = T_PLATEAU_BJT if mode == "bjt" else 0.0
        kwargs.setdefault("tau", TAU_DEFAULT)
        kwargs.setdefault("t_plateau", plateau)
        return cls(**kwargs)


@dataclass(frozen=True)
class TransientTrace:
    time: np.ndarray
    vout: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.time, dtype=float)
        v = np.asarray(self.vout, dtype=float)
        if t.shape != v.shape:
            raise ValueError("time and vout must have equal length")
        object.__setattr__(self, "time", t)
        object.__setattr__(self, "vout", v)


def detect_saturation_exit(prev_vin: float, next_vin: float, cells) -> bool:
    """True iff some cell is at zero ideal output before the step and
    strictly active after it."""
    return bool(
        any(
            (not cell_ideal_active(prev_vin, cell)) and cell_ideal_active(next_vin, cell)
            for cell in cells
        )
    )


def _exit_flags(vin_seq: np.ndarray, cells) -> np.ndarray:
    """Vectorized saturation-exit flags for each symbol boundary.

    flags[i] refers to the transition into symbol i; flags[0] is False
    (the trace starts settled, with no stored charge).
    """
    act = np.stack([cell_ideal_active(vin_seq, cell) for cell in cells])
    flags = np.zeros(vin_seq.size, dtype=bool)
    if vin_seq.size > 1:
        flags[1:] = np.any((~act[:, :-1]) & act[:, 1:], axis=0)
    return flags


def simulate_transient(
    symbol_seq,
    symbol_rate: float,
    d: AnalogDemapper,
    k: int,
    dp: DynamicsParams,
) -> TransientTrace:
    """Uniformly sampled output-voltage trace for a symbol sequence.

    The trace starts settled on the first symbol.  At each boundary the
    static target switches; if the transition exits saturation the
    output holds its pre-transition value for ``t_plateau`` and then
    relaxes exponentially with ``tau``.
    """
    r_seq = np.asarray(symbol_seq, dtype=float)
    if r_seq.size == 0:
        raise ValueError("symbol sequence must be non-empty")
    if not symbol_rate > 0:
        raise ValueError(f"symbol rate must be positive, got {symbol_rate}")
    period = 1.0 / symbol_rate
    dt = period / dp.samples_per_symbol
    vin_seq = np.asarray(d.input_map(r_seq), dtype=float)
    targets = demap_static(vin_seq, d, k)
    cells = d.cells_for_bit(k)
    flags = _exit_flags(vin_seq, cells)

    n_steps = r_seq.size * dp.samples_per_symbol
    time = np.arange(n_steps + 1) * dt
    vout = np.empty(n_steps + 1)
    v = float(targets[0])
    vout[0] = v
    plateau_until = 0.0
    for step in range(n_steps):
        t0 = step * dt
        sym = step // dp.samples_per_symbol
        if step % dp.samples_per_symbol == 0 and flags[sym]:
            plateau_until = t0 + dp.t_plateau
        relax = (t0 + dt) - max(t0, plateau_until)
        if relax > 0.0:
            v = targets[sym] + (v - targets[sym]) * math.exp(-relax / dp.tau)
        vout[step + 1] = v
    return TransientTrace(time=time, vout=vout)


def sampled_outputs(
    vin_seq: np.ndarray,
    targets: np.ndarray,
    flags: np.ndarray,
    symbol_rate: float,
    dp: DynamicsParams,
) -> np.ndarray:
    """Output voltage at the sampling instant of every symbol.

    Closed-form per-symbol update of the settling state; equivalent to
    sampling ``simulate_transient`` but without building the trace.
    """
    period = 1.0 / symbol_rate
    ts = dp.sample_fraction * period
    tau = dp.tau
    n = vin_seq.size
    out = np.empty(n)
    v_b = float(targets[0])
    out[0] = v_b
    plateau = 0.0
    t_list = targets.tolist()
    f_list = flags.tolist()
    for i in range(1, n):
        plateau = dp.t_plateau if f_list[i] else max(0.0, plateau - period)
        tgt = t_list[i]
        if ts <= plateau:
            v_s = v_b
        else:
            v_s = tgt + (v_b - tgt) * math.exp(-(ts - plateau) / tau)
        out[i] = v_s
        if period <= plateau:
            pass  # held through the whole symbol
        else:
            v_b = tgt + (v_b - tgt) * math.exp(-(period - plateau) / tau)
    return out


def ber_vs_rate(
    rates,
    snr_db: float,
    d: AnalogDemapper,
    output_maps: dict,
    dp: DynamicsParams,
    n_symbols: int,
    seed: int,
    c: Constellation,
    *,
    stream: int = 0,
    n_workers: int = 1,
    chunk_size: int = 1 << 14,
) -> list[dict]:
    """Hard-decision BER of the settling demapper at each symbol rate.

    Symbols are drawn uniformly, one noise value per symbol (held over
    the symbol period), pushed through the transient model, sampled at
    ``sample_fraction`` of the period, mapped to LLRs with the per-SNR
    output maps, and sliced by sign.  Each chunk is an independent
    settled sequence with its own stream, so results do not depend on
    the worker count.
    """
    if n_symbols < 1:
        raise ValueError("n_symbols must be positive")
    params = channel.from_snr_db(snr_db)
    sizes = channel.chunk_sizes(n_symbols, chunk_size)

    rows = []
    for rate_index, rate in enumerate(rates):
        if not rate > 0:
            raise ValueError(f"symbol rates must be positive, got {rate}")

        def job(args, rate=rate):
            chunk_index, n = args
            rng = channel.worker_rng(seed, chunk_index, stream=stream + rate_index)
            idx = rng.integers(0, c.points.size, n)
            bits = c.labels[idx]
            r = channel.transmit(c.points[idx], params, rng)
            vin = np.asarray(d.input_map(r), dtype=float)
            errors = 0
            for k in (1, 2, 3):
                cells = d.cells_for_bit(k)
                targets = demap_static(vin, d, k)
                flags = _exit_flags(vin, cells)
                v_s = sampled_outputs(vin, targets, flags, rate, dp)
                m = output_maps[k]
                llr = m.scale * v_s + m.offset
                errors += int(np.sum((llr >= 0.0).astype(int) != bits[:, k - 1]))
            return errors

        jobs = list(enumerate(sizes))
        if n_workers > 1:
            with ThreadPoolExecutor(max_workers=n_workers) as pool:
                errs = list(pool.map(job, jobs))
        else:
            errs = [job(j) for j in jobs]
        total_errors = int(sum(errs))
        rows.append(
            {
                "rate_sps": float(rate),
                "errors": total_errors,
                "bits": 3 * n_symbols,
                "ber": total_errors / (3 * n_symbols),
            }
        )
    return rows
