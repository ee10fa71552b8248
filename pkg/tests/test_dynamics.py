import numpy as np
import pytest

from demapsim.analog import build_demapper, demap_static
from demapsim.calibration import calibration_grid, fit_output_map, input_map
from demapsim.channel import from_snr_db
from demapsim.constellation import build_pam8
from demapsim.dynamics import (
    DynamicsParams,
    ber_vs_rate,
    detect_saturation_exit,
    simulate_transient,
)
from demapsim.metrics import evaluate_demappers
from demapsim.reference import exact_llr
from demapsim.analog import CellSpec


@pytest.fixture(scope="module")
def c():
    return build_pam8()


@pytest.fixture(scope="module")
def imap(c):
    return input_map(c, 0.04, 0.60)


@pytest.fixture(scope="module")
def bjt(c, imap):
    return build_demapper(c, imap, "bjt")


@pytest.fixture(scope="module")
def mosfet(c, imap):
    return build_demapper(c, imap, "mosfet")


def bjt_params(**kwargs):
    return DynamicsParams.for_mode("bjt", **kwargs)


def mosfet_params(**kwargs):
    return DynamicsParams.for_mode("mosfet", **kwargs)


def output_maps_for(dm, c, imap, snr_db):
    p = from_snr_db(snr_db)
    grid = calibration_grid(c, p.sigma)
    maps = {}
    for k in (1, 2, 3):
        vout = demap_static(np.asarray(imap(grid)), dm, k)
        maps[k] = fit_output_map(k, vout, exact_llr(grid, k, c, p), grid)
    return maps


class TestParams:
    def test_mode_defaults(self):
        assert bjt_params().t_plateau == pytest.approx(2e-9)
        assert mosfet_params().t_plateau == 0.0
        assert mosfet_params().tau == pytest.approx(0.4e-9)

    def test_validation(self):
        with pytest.raises(ValueError):
            DynamicsParams(tau=0.0, t_plateau=0.0)
        with pytest.raises(ValueError):
            DynamicsParams(tau=1e-9, t_plateau=-1.0)
        with pytest.raises(ValueError):
            DynamicsParams(tau=1e-9, t_plateau=0.0, samples_per_symbol=1)
        with pytest.raises(ValueError):
            DynamicsParams(tau=1e-9, t_plateau=0.0, sample_fraction=1.5)


class TestSaturationExit:
    def test_no_move_no_exit(self, bjt):
        assert not detect_saturation_exit(0.3, 0.3, bjt.cells_for_bit(1))

    def test_single_cell_crossing(self):
        cell = CellSpec(vref=0.3, gain=1.0, isat_v=1.0, knee_eps=0.0, polarity="pos", orientation="ramp_below")
        assert detect_saturation_exit(0.4, 0.2, [cell])
        assert not detect_saturation_exit(0.2, 0.4, [cell])

    def test_canonical_up_transition_exits(self, c, imap, bjt):
        prev = float(imap(3 * c.d))
        nxt = float(imap(7 * c.d))
        assert detect_saturation_exit(prev, nxt, bjt.cells_for_bit(1))

    def test_canonical_low_transition_does_not_exit(self, c, imap, bjt):
        prev = float(imap(-7 * c.d))
        nxt = float(imap(-5 * c.d))
        assert not detect_saturation_exit(prev, nxt, bjt.cells_for_bit(1))


class TestTransient:
    def test_slow_rate_reaches_static_targets(self, c, bjt):
        dp = bjt_params(samples_per_symbol=64)
        seq = c.d * np.array([3.0, 7.0, -7.0, -5.0, 1.0])
        rate = 1e6  # period 1 us >> 5 tau + plateau
        trace = simulate_transient(seq, rate, bjt, 1, dp)
        vin = np.asarray(bjt.input_map(seq))
        targets = demap_static(vin, bjt, 1)
        sampled = trace.vout[np.arange(1, seq.size + 1) * dp.samples_per_symbol]
        np.testing.assert_allclose(sampled, targets, atol=1e-6)

    def test_plateau_present_on_saturation_exit(self, c, bjt):
        dp = bjt_params(samples_per_symbol=100)
        rate = 1e8
        trace = simulate_transient([3 * c.d, 7 * c.d, 7 * c.d], rate, bjt, 1, dp)
        dt = 1.0 / rate / dp.samples_per_symbol
        # flat run right after the boundary at one symbol period
        post = np.abs(np.diff(trace.vout))[dp.samples_per_symbol:]
        flat_steps = 0
        for step in post:
            if step < 1e-15:
                flat_steps += 1
            else:
                break
        expected = dp.t_plateau / dt
        assert abs(flat_steps - expected) <= 1.0

    def test_no_plateau_without_saturation_exit(self, c, bjt):
        dp = bjt_params(samples_per_symbol=100)
        trace = simulate_transient([-7 * c.d, -5 * c.d, -5 * c.d], 1e8, bjt, 1, dp)
        post = np.abs(np.diff(trace.vout))[dp.samples_per_symbol:]
        flat_steps = 0
        for step in post:
            if step < 1e-15:
                flat_steps += 1
            else:
                break
        assert flat_steps <= 1

    def test_mosfet_settles_within_one_percent_by_2ns(self, c, mosfet):
        dp = mosfet_params(samples_per_symbol=100)
        rate = 1e8
        trace = simulate_transient([3 * c.d, 7 * c.d, 7 * c.d], rate, mosfet, 1, dp)
        boundary = dp.samples_per_symbol
        at_2ns = boundary + 20  # 2 ns at 0.1 ns per step
        final = trace.vout[-1]
        step_size = abs(trace.vout[boundary] - final)
        assert abs(trace.vout[at_2ns] - final) <= 0.01 * step_size

    def test_causality_by_truncation(self, c, bjt):
        dp = bjt_params()
        seq = c.d * np.array([1.0, 7.0, -3.0, 5.0])
        full = simulate_transient(seq, 2e8, bjt, 1, dp)
        part = simulate_transient(seq[:2], 2e8, bjt, 1, dp)
        np.testing.assert_array_equal(full.vout[: part.vout.size], part.vout)

    def test_static_consistency_with_instant_settling(self, c, mosfet):
        dp = DynamicsParams(tau=1e-18, t_plateau=0.0, samples_per_symbol=8)
        seq = c.d * np.array([3.0, -1.0, 7.0])
        trace = simulate_transient(seq, 5e8, mosfet, 2, dp)
        targets = demap_static(np.asarray(mosfet.input_map(seq)), mosfet, 2)
        sampled = trace.vout[np.arange(1, 4) * 8 - 1]
        np.testing.assert_allclose(sampled, np.asarray(targets), atol=1e-9)

    def test_empty_sequence_rejected(self, bjt):
        with pytest.raises(ValueError):
            simulate_transient([], 1e8, bjt, 1, bjt_params())


class TestBerVsRate:
    SNR = 10.0
    N = 30_000

    def test_low_rate_matches_static_exact_ber(self, c, imap, mosfet):
        maps = output_maps_for(mosfet, c, imap, self.SNR)
        p = from_snr_db(self.SNR)
        rows = ber_vs_rate([1e6], self.SNR, mosfet, maps, mosfet_params(), self.N, 99, c)
        static = evaluate_demappers(
            {"exact": lambda r, k: exact_llr(r, k, c, p)}, c, p, self.N, 99, stream=5
        )["exact"].ber_est
        se = np.sqrt(static.ber * (1 - static.ber) / static.bits)
        assert abs(rows[0]["ber"] - static.ber) < 4 * se

    def test_mosfet_flat_and_bjt_monotone(self, c, imap, mosfet, bjt):
        rates = [1e8, 2e8, 3e8, 4e8, 5e8]
        maps_m = output_maps_for(mosfet, c, imap, self.SNR)
        maps_b = output_maps_for(bjt, c, imap, self.SNR)
        rows_m = ber_vs_rate(rates, self.SNR, mosfet, maps_m, mosfet_params(), self.N, 4, c)
        rows_b = ber_vs_rate(rates, self.SNR, bjt, maps_b, bjt_params(), self.N, 4, c)
        bers_m = [row["ber"] for row in rows_m]
        se = np.sqrt(bers_m[0] * (1 - bers_m[0]) / (3 * self.N))
        assert max(bers_m) - min(bers_m) < 4 * se
        bers_b = [row["ber"] for row in rows_b]
        for lo, hi in zip(bers_b, bers_b[1:]):
            assert hi >= lo - 2 * se
        assert bers_b[-1] > bers_b[0] + 10 * se  # clear degradation at 500 Msym/s

    def test_worker_invariance(self, c, imap, bjt):
        maps = output_maps_for(bjt, c, imap, self.SNR)
        a = ber_vs_rate([3e8], self.SNR, bjt, maps, bjt_params(), 20_000, 11, c, n_workers=1)
        b = ber_vs_rate([3e8], self.SNR, bjt, maps, bjt_params(), 20_000, 11, c, n_workers=3)
        assert a == b

    def test_invalid_inputs(self, c, imap, bjt):
        maps = output_maps_for(bjt, c, imap, self.SNR)
        with pytest.raises(ValueError):
            ber_vs_rate([-1.0], self.SNR, bjt, maps, bjt_params(), 1000, 1, c)
        with pytest.raises(ValueError):
            ber_vs_rate([1e8], self.SNR, bjt, maps, bjt_params(), 0, 1, c)
