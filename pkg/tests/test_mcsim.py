import math
from dataclasses import replace

import numpy as np
import pytest

from psaqkd.detector import RawCalibration
from psaqkd.errors import DomainError
from psaqkd.mcsim import (
    CHUNK_SIZE, PMConfig, eb_predicted_variance, normalize, sample_moments, simulate_pm, simulate_pm_raw,
    verify_equivalence,
)

CAL = RawCalibration(30.0, 1.0, 100.0)  # eta_e = 0.9
FIG = PMConfig(CAL, eta_d=0.6, g=3.0, V_B1=4.901, n_samples=1_000_000, seed=7)


def test_vacuum_chain_is_standard_normal():
    cfg = PMConfig(RawCalibration(2.0, 3.0, 0.0), 1.0, 1.0, 1.0, 200_000, seed=1)
    x, p = simulate_pm(cfg)
    se = math.sqrt(2 / (cfg.n_samples - 1))
    assert abs(x.var(ddof=1) - 1) < 4 * se
    assert abs(p.var(ddof=1) - 1) < 4 * se
    assert abs(x.mean()) < 4 / math.sqrt(cfg.n_samples)


def test_psa_action_on_vacuum():
    cfg = PMConfig(RawCalibration(1.0, 1.0, 0.0), 1.0, 4.0, 1.0, 200_000, seed=2)
    x, p = simulate_pm(cfg)
    se = math.sqrt(2 / (cfg.n_samples - 1))
    assert x.var(ddof=1) == pytest.approx(4.0, abs=4 * 4.0 * se)
    assert p.var(ddof=1) == pytest.approx(0.25, abs=4 * 0.25 * se)


def test_seed_determinism():
    cfg = replace(FIG, n_samples=100_000)
    a, b = simulate_pm(cfg), simulate_pm(cfg)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
    other = simulate_pm(replace(cfg, seed=8))
    assert not np.array_equal(a[0], other[0])


def test_prefix_stable_across_lengths():
    # chunk substreams depend only on the chunk index
    short = simulate_pm(replace(FIG, n_samples=CHUNK_SIZE))[0]
    long = simulate_pm(replace(FIG, n_samples=3 * CHUNK_SIZE + 5))[0]
    assert np.array_equal(long[:CHUNK_SIZE], short)


class TestPrediction:
    def test_ideal(self):
        cfg = PMConfig(RawCalibration(1.0, 1.0, 0.0), 1.0, 1.0, 5.5, 10_000)
        assert eb_predicted_variance(cfg) == (5.5, 5.5)

    def test_vacuum_fixed_point(self):
        cfg = PMConfig(CAL, 0.37, 1.0, 1.0, 10_000)
        vx, vp = eb_predicted_variance(cfg)
        assert vx == pytest.approx(1.0, abs=1e-15) and vp == pytest.approx(1.0, abs=1e-15)

    def test_reference_value(self):
        # 0.9 * (0.6 * 3 * 4.901 + 0.4) + 0.1 and 0.9 * (0.6 * 4.901 / 3 + 0.4) + 0.1
        vx, vp = eb_predicted_variance(FIG)
        assert vx == pytest.approx(8.39962, abs=1e-12)
        assert vp == pytest.approx(0.9 * (0.6 * 4.901 / 3 + 0.4) + 0.1, abs=1e-12)


class TestVerifyEquivalence:
    def test_passes(self):
        rep = verify_equivalence(FIG, 4.0)
        assert rep.passed
        assert all(abs(z) < 4 for z in rep.z_scores)
        assert abs(rep.z_covariance) < 4

    def test_power(self):
        vx, vp = eb_predicted_variance(FIG)
        rep = verify_equivalence(FIG, 4.0, predicted=(1.05 * vx, vp))
        assert not rep.passed
        assert rep.z_scores[0] < -4

    def test_worker_count_irrelevant(self):
        cfg = replace(FIG, n_samples=300_001)
        assert verify_equivalence(cfg, max_workers=1) == verify_equivalence(cfg, max_workers=4)

    def test_moments_match_numpy(self):
        cfg = replace(FIG, n_samples=150_000)
        x, p = simulate_pm(cfg)
        vx, vp, cxp = sample_moments(cfg)
        assert vx == pytest.approx(x.var(ddof=1), rel=1e-10)
        assert vp == pytest.approx(p.var(ddof=1), rel=1e-10)
        assert cxp == pytest.approx(np.cov(x, p)[0, 1], rel=1e-8, abs=1e-12)

    def test_too_few_samples(self):
        with pytest.raises(DomainError):
            verify_equivalence(replace(FIG, n_samples=100))


class TestNormalization:
    def test_units_differ_by_sqrt_s(self):
        cfg = replace(FIG, n_samples=50_000)
        x_raw, _ = simulate_pm_raw(cfg)
        conv, mod = normalize(x_raw, CAL, "conventional"), normalize(x_raw, CAL, "modified")
        s = CAL.u_s_prime / CAL.u_s
        assert np.max(np.abs(conv - math.sqrt(s) * mod)) < 1e-12 * np.max(np.abs(conv))

    def test_noiseless_units_coincide(self):
        cal = RawCalibration(30.0, 1.0, 0.0)
        x_raw, _ = simulate_pm_raw(PMConfig(cal, 0.6, 3.0, 4.901, 10_000))
        assert np.array_equal(normalize(x_raw, cal, "conventional"), normalize(x_raw, cal, "modified"))

    def test_unknown_unit(self):
        with pytest.raises(ValueError):
            normalize(np.zeros(3), CAL, "bogus")


def test_config_validation():
    with pytest.raises(DomainError):
        PMConfig(CAL, 0.6, 0.5, 4.9, 10_000)
    with pytest.raises(DomainError):
        PMConfig(CAL, 0.0, 1.0, 4.9, 10_000)
    with pytest.raises(DomainError):
        PMConfig(CAL, 0.6, 1.0, 0.5, 10_000)
