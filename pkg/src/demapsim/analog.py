"""Behavioral model of the current-steering demapper cells.

A cell contributes a saturating ramp (a clipped hinge) of output
voltage versus input voltage; cells add on a positive or negative
branch and the combined output is pulled down from the supply rail.
All currents appear as output-voltage drops (I times R_out), so the
whole model runs in volts.

``synthesize_cells`` decomposes any continuous piecewise-linear target
into such cells: one cell per interior slope change, anchored so that
every ramp saturates exactly at a range edge.  Interior cells ramp
toward the lower edge and the final segment is covered by one upward
ramp; with this orientation the only cells that leave their zero-output
state on an upward input step are the ones guarding the top of the
range, which is what the settling model in ``dynamics`` relies on.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np
import yaml

from .calibration import AffineMap
from .channel import from_snr_db
from .constellation import Constellation
from .reference import maxlog_breakpoints, maxlog_segment_slopes, maxlog_llr

VDD_DEFAULT = 1.6  # supply rail, volts
VIN_WINDOW = (0.04, 0.60)  # constellation mapping window, volts
VIN_HARD_MAX = 0.64  # input cap keeping the steering pair in saturation

# Per-cell saturation ceiling I_bias * R_out and knee softness defaults
# for the two device flavors (sharp mirrors vs square-law mirrors).
BJT_ISAT_V = 0.3       # 100 uA * 3 kOhm
MOSFET_ISAT_V = 0.03   # 10 uA * 3 kOhm
BJT_KNEE_V = 1e-3
MOSFET_KNEE_V = 25e-3

# Observation half-span the synthesized ramps stay linear over; wide
# enough to cover the calibration grid at the lowest supported SNR.
R_SPAN_DEFAULT = 5.0

_GAIN_EPS = 1e-12


@dataclass(frozen=True)
class CellSpec:
    """One saturating-ramp stage.

    ``gain`` is output volts per input volt on the ramp, ``isat_v`` the
    ceiling of the ramp (bias current times R_out), ``knee_eps`` the
    softness of both the turn-on corner and the saturation corner in
    input volts (0 gives ideal hinges).  ``orientation`` selects which
    side of ``vref`` ramps; ``polarity`` selects the output branch.
    """

    vref: float
    gain: float
    isat_v: float
    knee_eps: float
    polarity: str  # 'pos' | 'neg'
    orientation: str  # 'ramp_below' | 'ramp_above'

    def __post_init__(self):
        if self.gain < 0 or self.isat_v < 0 or self.knee_eps < 0:
            raise ValueError("gain, isat_v and knee_eps must be non-negative")
        if self.polarity not in ("pos", "neg"):
            raise ValueError(f"polarity must be 'pos' or 'neg', got {self.polarity!r}")
        if self.orientation not in ("ramp_below", "ramp_above"):
            raise ValueError(f"orientation must be 'ramp_below' or 'ramp_above', got {self.orientation!r}")


def _hinge_drive(vin: np.ndarray, cell: CellSpec) -> np.ndarray:
    if cell.orientation == "ramp_below":
        return cell.vref - vin
    return vin - cell.vref


def cell_output_v(vin, cell: CellSpec):
    """Signed contribution of one cell, in output volts.

    Ideal form (knee_eps = 0): min(gain * max(u, 0), isat_v) with u the
    drive past vref on the ramping side.  For knee_eps > 0 both corners
    use the softplus hinge eps * ln(1 + exp(u / eps)), the saturation
    corner with the gain-scaled eps so its width in input volts matches
    the turn-on corner.
    """
    vin_arr = np.asarray(vin, dtype=float)
    if not np.all(np.isfinite(vin_arr)):
        raise ValueError("input voltage must be finite")
    scalar = vin_arr.ndim == 0
    u = _hinge_drive(np.atleast_1d(vin_arr), cell)
    if cell.knee_eps == 0.0:
        y = np.minimum(cell.gain * np.maximum(u, 0.0), cell.isat_v)
    else:
        eps = cell.knee_eps
        y = cell.gain * eps * np.logaddexp(0.0, u / eps)
        eps_v = cell.gain * eps
        if eps_v > 0.0:
            y = cell.isat_v - eps_v * np.logaddexp(0.0, (cell.isat_v - y) / eps_v)
        else:
            y = np.minimum(y, cell.isat_v)
    if cell.polarity == "neg":
        y = -y
    return float(y[0]) if scalar else y


def cell_ideal_active(vin, cell: CellSpec):
    """Whether the ideal (knee_eps = 0) hinge produces nonzero output."""
    u = _hinge_drive(np.asarray(vin, dtype=float), cell)
    return (u > 0.0) & (cell.gain > 0.0)


@dataclass(frozen=True)
class PwlFunction:
    """Continuous piecewise-linear function on the voltage axis.

    Defined by strictly increasing breakpoints, one slope per segment
    (including the two unbounded end segments) and a single anchor
    value; continuity then fixes the whole curve.
    """

    breakpoints: np.ndarray
    slopes: np.ndarray
    anchor_v: float
    anchor_f: float

    def __post_init__(self):
        b = np.asarray(self.breakpoints, dtype=float)
        s = np.asarray(self.slopes, dtype=float)
        if b.ndim != 1 or s.ndim != 1 or s.size != b.size + 1:
            raise ValueError("need len(slopes) == len(breakpoints) + 1")
        if b.size and np.any(np.diff(b) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "slopes", s)
        b.setflags(write=False)
        s.setflags(write=False)

    def _knot_values(self) -> np.ndarray:
        b, s = self.breakpoints, self.slopes
        if b.size == 0:
            return np.empty(0)
        vals = np.empty(b.size)
        seg0 = int(np.searchsorted(b, self.anchor_v, side="right"))
        # walk from the anchor to the nearest knot, then chain along knots
        if seg0 == 0:
            vals[0] = self.anchor_f + s[0] * (b[0] - self.anchor_v)
        else:
            vals[seg0 - 1] = self.anchor_f + s[seg0] * (b[seg0 - 1] - self.anchor_v)
        for j in range(seg0 - 2, -1, -1):
            vals[j] = vals[j + 1] - s[j + 1] * (b[j + 1] - b[j])
        for j in range(max(seg0, 1), b.size):
            vals[j] = vals[j - 1] + s[j] * (b[j] - b[j - 1])
        return vals

    def __call__(self, v):
        v_arr = np.asarray(v, dtype=float)
        scalar = v_arr.ndim == 0
        v_arr = np.atleast_1d(v_arr)
        b, s = self.breakpoints, self.slopes
        if b.size == 0:
            out = self.anchor_f + s[0] * (v_arr - self.anchor_v)
        else:
            vals = self._knot_values()
            seg = np.searchsorted(b, v_arr, side="right")
            ref_idx = np.clip(seg - 1, 0, b.size - 1)
            out = vals[ref_idx] + s[seg] * (v_arr - b[ref_idx])
        return float(out[0]) if scalar else out


def maxlog_pwl_voltage(k: int, c: Constellation, p, input_map: AffineMap) -> PwlFunction:
    """Max-log LLR of bit k as an exact PWL over the input voltage."""
    if input_map.scale <= 0.0:
        raise ValueError("input map must have positive scale")
    bks_r = maxlog_breakpoints(k, c)
    slopes_r = maxlog_segment_slopes(k, c, p)
    return PwlFunction(
        breakpoints=input_map(bks_r),
        slopes=slopes_r / input_map.scale,
        anchor_v=float(input_map.offset),
        anchor_f=float(maxlog_llr(0.0, k, c, p)),
    )


@dataclass(frozen=True)
class CellSynthesis:
    cells: tuple[CellSpec, ...]
    output_scale: float  # output volts per unit of target value


def synthesize_cells(
    target: PwlFunction,
    vdd: float,
    knee_eps: float,
    *,
    vin_min: float,
    vin_max: float,
    isat_v: float = BJT_ISAT_V,
) -> CellSynthesis:
    """Decompose a PWL target into saturating-ramp cells.

    Each interior slope change becomes one cell at that breakpoint; the
    final segment is covered by an upward ramp at the last breakpoint.
    Ramps toward the lower edge saturate exactly at ``vin_min`` and the
    upward ramp at ``vin_max``.  Gains are scaled uniformly so the
    largest cell uses exactly its ``isat_v`` budget; the scale is
    reported and absorbed by the downstream affine output fit.
    """
    b = target.breakpoints
    s = target.slopes
    if not np.all(np.isfinite(s)):
        raise ValueError("target slopes must be finite")
    if b.size and not (vin_min < b[0] and b[-1] < vin_max):
        raise ValueError("target breakpoints must lie strictly inside the input range")

    slope_floor = _GAIN_EPS * max(1.0, float(np.abs(s).max()))
    raw: list[tuple[float, float, str]] = []  # (vref, signed slope contribution, orientation)
    if b.size == 0:
        if abs(s[0]) > slope_floor:
            raw.append((vin_min, s[0], "ramp_above"))
    else:
        n = b.size
        for j in range(n):
            mu = (s[j] - s[j + 1]) if j < n - 1 else s[n - 1]
            if abs(mu) > slope_floor:
                raw.append((float(b[j]), mu, "ramp_below"))
        if abs(s[n]) > slope_floor:
            raw.append((float(b[n - 1]), s[n], "ramp_above"))
    if not raw:
        return CellSynthesis(cells=(), output_scale=1.0)

    isat_req = [
        abs(mu) * ((vref - vin_min) if orient == "ramp_below" else (vin_max - vref))
        for vref, mu, orient in raw
    ]
    scale = isat_v / max(isat_req)

    cells = []
    for (vref, mu, orient), req in zip(raw, isat_req):
        if orient == "ramp_below":
            polarity = "neg" if mu > 0 else "pos"
        else:
            polarity = "pos" if mu > 0 else "neg"
        cells.append(
            CellSpec(
                vref=float(vref),
                gain=float(abs(mu) * scale),
                isat_v=float(req * scale),
                knee_eps=float(knee_eps),
                polarity=polarity,
                orientation=orient,
            )
        )

    knots = np.concatenate([[vin_min], b, [vin_max]])
    values = target(knots) * scale
    swing = float(values.max() - values.min())
    if swing > vdd * (1.0 + 1e-12):
        raise ValueError(
            f"target needs {swing:.3f} V of output swing under the chosen scale, exceeding vdd = {vdd} V"
        )
    return CellSynthesis(cells=tuple(cells), output_scale=float(scale))


@dataclass(frozen=True)
class AnalogDemapper:
    """Full three-output demapper: cells per bit plus the input map."""

    vdd: float
    vin_min: float
    vin_max: float
    input_map: AffineMap
    cells: tuple[tuple[CellSpec, ...], tuple[CellSpec, ...], tuple[CellSpec, ...]]
    output_scales: tuple[float, float, float]
    knee_eps: float
    isat_v: float
    mode: str = "custom"

    def __post_init__(self):
        if self.vin_max <= self.vin_min:
            raise ValueError("vin_max must exceed vin_min")
        for k, cell_list in enumerate(self.cells, start=1):
            if len(cell_list) == 0:
                raise ValueError(f"bit position {k} has no cells")
            for cell in cell_list:
                if not (self.vin_min <= cell.vref <= self.vin_max):
                    raise ValueError(f"cell vref {cell.vref} outside input range")

    def cells_for_bit(self, k: int) -> tuple[CellSpec, ...]:
        if k not in (1, 2, 3):
            raise ValueError(f"bit position must be 1, 2 or 3, got {k}")
        return self.cells[k - 1]


def demap_static(vin, d: AnalogDemapper, k: int):
    """Static output voltage for bit k: vdd minus the branch difference."""
    cell_list = d.cells_for_bit(k)
    vin_arr = np.asarray(vin, dtype=float)
    scalar = vin_arr.ndim == 0
    vin_arr = np.atleast_1d(vin_arr)
    total = np.zeros_like(vin_arr)
    for cell in cell_list:
        total += cell_output_v(vin_arr, cell)
    out = d.vdd - total
    return float(out[0]) if scalar else out


def build_demapper(
    c: Constellation,
    input_map: AffineMap,
    mode: str = "mosfet",
    *,
    knee_eps: float | None = None,
    isat_v: float | None = None,
    snr_ref_db: float = 10.0,
    r_span: float = R_SPAN_DEFAULT,
    vdd: float = VDD_DEFAULT,
) -> AnalogDemapper:
    """Synthesize a demapper from the max-log targets of all three bits.

    The max-log shape is SNR-independent up to an overall factor, so a
    single cell set built at ``snr_ref_db`` serves every operating SNR
    through the per-SNR output calibration.  ``r_span`` sets how far the
    end ramps stay linear, in observation units.
    """
    presets = {"bjt": (BJT_KNEE_V, BJT_ISAT_V), "mosfet": (MOSFET_KNEE_V, MOSFET_ISAT_V)}
    if mode not in presets and (knee_eps is None or isat_v is None):
        raise ValueError(f"unknown mode {mode!r}; give knee_eps and isat_v explicitly")
    preset_knee, preset_isat = presets.get(mode, (None, None))
    knee = preset_knee if knee_eps is None else float(knee_eps)
    isat = preset_isat if isat_v is None else float(isat_v)

    window_max = input_map(float(c.points[-1]))
    if window_max > VIN_HARD_MAX + 1e-12:
        raise ValueError(f"constellation maps to {window_max:.3f} V, above the {VIN_HARD_MAX} V input cap")

    p_ref = from_snr_db(snr_ref_db)
    vin_min = float(input_map(-r_span))
    vin_max = float(input_map(r_span))
    all_cells = []
    scales = []
    for k in (1, 2, 3):
        target = maxlog_pwl_voltage(k, c, p_ref, input_map)
        syn = synthesize_cells(target, vdd, knee, vin_min=vin_min, vin_max=vin_max, isat_v=isat)
        all_cells.append(syn.cells)
        scales.append(syn.output_scale)
    return AnalogDemapper(
        vdd=vdd,
        vin_min=vin_min,
        vin_max=vin_max,
        input_map=input_map,
        cells=tuple(all_cells),
        output_scales=tuple(scales),
        knee_eps=knee,
        isat_v=isat,
        mode=mode,
    )


def demapper_to_dict(d: AnalogDemapper) -> dict:
    return {
        "vdd": d.vdd,
        "vin_min": d.vin_min,
        "vin_max": d.vin_max,
        "mode": d.mode,
        "knee_eps": d.knee_eps,
        "isat_v": d.isat_v,
        "input_map": {"scale": d.input_map.scale, "offset": d.input_map.offset},
        "output_scales": list(d.output_scales),
        "cells": {f"b{k}": [asdict(cell) for cell in d.cells_for_bit(k)] for k in (1, 2, 3)},
    }


def demapper_from_dict(data: dict) -> AnalogDemapper:
    cells = tuple(
        tuple(CellSpec(**cell) for cell in data["cells"][f"b{k}"]) for k in (1, 2, 3)
    )
    return AnalogDemapper(
        vdd=float(data["vdd"]),
        vin_min=float(data["vin_min"]),
        vin_max=float(data["vin_max"]),
        input_map=AffineMap(scale=float(data["input_map"]["scale"]), offset=float(data["input_map"]["offset"])),
        cells=cells,
        output_scales=tuple(float(x) for x in data["output_scales"]),
        knee_eps=float(data["knee_eps"]),
        isat_v=float(data["isat_v"]),
        mode=str(data["mode"]),
    )


def save_demapper(d: AnalogDemapper, path) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(demapper_to_dict(d), fh, sort_keys=False)


def load_demapper(path) -> AnalogDemapper:
    with open(path) as fh:
        return demapper_from_dict(yaml.safe_load(fh))
