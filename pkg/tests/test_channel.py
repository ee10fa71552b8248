import math

import numpy as np
import pytest

from demapsim.channel import chunk_sizes, from_snr_db, transmit, worker_rng


class TestSnrConversion:
    def test_zero_db(self):
        assert from_snr_db(0.0).sigma == pytest.approx(math.sqrt(0.5), abs=1e-12)

    def test_ten_db(self):
        # 1 / (2 * 10) = 0.05 by hand
        assert from_snr_db(10.0).sigma == pytest.approx(math.sqrt(0.05), abs=1e-12)

    def test_sigma_strictly_decreasing_in_snr(self):
        sigmas = [from_snr_db(s).sigma for s in np.linspace(-10, 30, 81)]
        assert all(a > b for a, b in zip(sigmas, sigmas[1:]))

    def test_invariant_relation(self):
        p = from_snr_db(7.3)
        assert abs(p.sigma - math.sqrt(1.0 / (2.0 * 10 ** 0.73))) < 1e-12
        assert p.sigma > 0

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            from_snr_db(float("nan"))


class TestTransmit:
    def test_deterministic_given_stream(self):
        p = from_snr_db(5.0)
        a = transmit(np.zeros(100), p, worker_rng(99, 0))
        b = transmit(np.zeros(100), p, worker_rng(99, 0))
        np.testing.assert_array_equal(a, b)

    def test_degenerate_noise_limit(self):
        p = from_snr_db(200.0)  # sigma ~ 7e-11
        r = transmit(0.25, p, worker_rng(1, 0))
        assert abs(r - 0.25) < 1e-9

    def test_noise_mean(self):
        p = from_snr_db(3.0)
        n = 10**6
        r = transmit(np.zeros(n), p, worker_rng(2024, 0))
        # CLT bound: 4 sigma / sqrt(n)
        assert abs(r.mean()) < 4.0 * p.sigma / 1000.0

    def test_noise_variance(self):
        p = from_snr_db(3.0)
        n = 10**6
        r = transmit(np.zeros(n), p, worker_rng(2025, 0))
        assert r.var() == pytest.approx(p.sigma**2, rel=0.01)


class TestWorkerStreams:
    def test_same_index_same_stream(self):
        a = worker_rng(7, 3).normal(size=8)
        b = worker_rng(7, 3).normal(size=8)
        np.testing.assert_array_equal(a, b)

    def test_different_index_different_stream(self):
        a = worker_rng(7, 0).normal(size=8)
        b = worker_rng(7, 1).normal(size=8)
        assert not np.allclose(a, b)

    def test_stream_id_separates_experiments(self):
        a = worker_rng(7, 0, stream=0).normal(size=8)
        b = worker_rng(7, 0, stream=1).normal(size=8)
        assert not np.allclose(a, b)


class TestChunking:
    def test_sizes_cover_total(self):
        sizes = chunk_sizes(100_001, 2**14)
        assert sum(sizes) == 100_001
        assert all(s == 2**14 for s in sizes[:-1])

    def test_invalid_total(self):
        with pytest.raises(ValueError):
            chunk_sizes(0)
