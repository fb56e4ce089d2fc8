import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from psaqkd import gaussian
from psaqkd.errors import DomainError, NumericalDomainError

from conftest import random_physical_state, random_symplectic


def max_abs(a):
    return float(np.max(np.abs(a)))


class TestEPR:
    def test_vacuum_limit(self):
        assert np.array_equal(gaussian.epr_state(1.0), np.eye(4))

    def test_offdiagonal_v40(self):
        g = gaussian.epr_state(40.0)
        c = 39.9874980462644099  # sqrt(1599)
        np.testing.assert_allclose(g[:2, 2:], c * np.diag([1.0, -1.0]), rtol=0, atol=1e-12)
        np.testing.assert_allclose(g[2:, :2], c * np.diag([1.0, -1.0]), rtol=0, atol=1e-12)

    @given(st.floats(1.0, 1e4))
    def test_pure(self, V):
        np.testing.assert_allclose(gaussian.symplectic_eigenvalues(gaussian.epr_state(V)), [1, 1], atol=1e-7 * V)

    def test_rejects_subvacuum(self):
        with pytest.raises(DomainError, match="unphysical EPR variance"):
            gaussian.epr_state(0.5)


class TestBeamsplitter:
    def test_transparent_is_identity(self):
        assert np.array_equal(gaussian.beamsplitter(1.0, 2, 0, 1), np.eye(4))

    def test_reflective_is_signed_swap(self):
        Y = gaussian.beamsplitter(0.0, 2, 0, 1)
        expected = np.block([[np.zeros((2, 2)), np.eye(2)], [-np.eye(2), np.zeros((2, 2))]])
        assert np.array_equal(Y, expected)

    def test_vacuum_invariance(self):
        out = gaussian.apply(gaussian.beamsplitter(0.5, 2, 0, 1), np.eye(4))
        np.testing.assert_allclose(out, np.eye(4), atol=1e-15)

    def test_thermal_mixing(self):
        V, eta = 7.3, 0.35
        gamma = gaussian.attach_vacuum(gaussian.thermal(V))
        out = gaussian.apply(gaussian.beamsplitter(eta, 2, 0, 1), gamma)
        assert out[0, 0] == pytest.approx(eta * V + 1 - eta, abs=1e-14)

    def test_identity_on_spectator_modes(self):
        Y = gaussian.beamsplitter(0.3, 3, 0, 2)
        np.testing.assert_array_equal(Y[2:4, :], np.eye(6)[2:4, :])

    @pytest.mark.parametrize("eta", [-0.1, 1.5])
    def test_domain(self, eta):
        with pytest.raises(DomainError):
            gaussian.beamsplitter(eta, 2, 0, 1)

    @pytest.mark.parametrize("eta", [0.9, 0.6, 0.37])
    def test_extended_precision_symplectic(self, eta):
        Y = gaussian.beamsplitter(eta, 2, 0, 1, np.longdouble)
        assert Y.dtype == np.longdouble
        W = gaussian.omega(2).astype(np.longdouble)
        assert np.max(np.abs(Y @ W @ Y.T - W)) < 1e-18

    def test_index_collision(self):
        with pytest.raises(ValueError):
            gaussian.beamsplitter(0.5, 2, 1, 1)
        with pytest.raises(ValueError):
            gaussian.beamsplitter(0.5, 2, 0, 2)


class TestPSA:
    def test_unit_gain(self):
        assert np.array_equal(gaussian.psa(1.0, 2, 1), np.eye(4))

    def test_vacuum_amplified(self):
        out = gaussian.apply(gaussian.psa(4.0, 1, 0), np.eye(2))
        np.testing.assert_allclose(np.diag(out), [4.0, 0.25], atol=1e-15)

    @given(st.floats(1.0, 1e6))
    def test_block_determinant(self, g):
        Y = gaussian.psa(g, 1, 0)
        assert np.linalg.det(Y) == pytest.approx(1.0, abs=1e-12)

    def test_composition(self):
        # diag(sqrt g, 1/sqrt g)^2 = diag(g, 1/g) = block of psa(g^2)
        g = 2.7
        gamma = np.array([[3.0, 0.4], [0.4, 1.8]])
        twice = gaussian.apply(gaussian.psa(g, 1, 0), gaussian.apply(gaussian.psa(g, 1, 0), gamma))
        once = gaussian.apply(gaussian.psa(g * g, 1, 0), gamma)
        np.testing.assert_allclose(twice, once, rtol=1e-14)
        np.testing.assert_allclose(np.diag(twice), [3.0 * g * g, 1.8 / g / g], rtol=1e-14)

    def test_rejects_deamplification(self):
        with pytest.raises(DomainError, match="deamplifying gain"):
            gaussian.psa(0.5, 1, 0)


@pytest.mark.parametrize("make", [
    lambda: gaussian.beamsplitter(0.37, 3, 1, 2),
    lambda: gaussian.beamsplitter(0.0, 2, 0, 1),
    lambda: gaussian.psa(10.0, 3, 2),
    lambda: gaussian.psa(1e6, 2, 0),
])
def test_transforms_are_symplectic(make):
    Y = make()
    n = Y.shape[0] // 2
    W = gaussian.omega(n)
    assert max_abs(Y @ W @ Y.T - W) < 1e-12


class TestAttachVacuum:
    def test_vacuum_grows(self):
        assert np.array_equal(gaussian.attach_vacuum(np.eye(2)), np.eye(4))

    def test_epr_padding(self):
        out = gaussian.attach_vacuum(gaussian.epr_state(40.0))
        assert out.shape == (6, 6)
        assert np.array_equal(out[4:, 4:], np.eye(2))
        assert not out[:4, 4:].any()

    def test_spectrum_gains_unit(self, rng):
        gamma = random_physical_state(rng, 2)
        before = gaussian.symplectic_eigenvalues(gamma)
        after = gaussian.symplectic_eigenvalues(gaussian.attach_vacuum(gamma))
        np.testing.assert_allclose(sorted(after), sorted([*before, 1.0]), rtol=1e-10)


class TestApply:
    def test_identity(self, rng):
        gamma = random_physical_state(rng, 2)
        assert np.array_equal(gaussian.apply(np.eye(4), gamma), gamma)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            gaussian.apply(np.eye(4), np.eye(6))

    def test_symmetry_preserved(self, rng):
        for _ in range(20):
            gamma = random_physical_state(rng, 3)
            out = gaussian.apply(random_symplectic(rng, 3), gamma)
            assert max_abs(out - out.T) < 1e-12 * max(1.0, max_abs(out))


class TestSymplecticEigenvalues:
    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_vacuum(self, n):
        np.testing.assert_allclose(gaussian.symplectic_eigenvalues(np.eye(2 * n)), np.ones(n), atol=1e-14)

    def test_thermal(self):
        np.testing.assert_allclose(gaussian.symplectic_eigenvalues(gaussian.thermal(6.5)), [6.5])

    def test_invariant_under_symplectic(self, rng):
        nus = np.array([4.5, 2.0, 1.25])
        S = random_symplectic(rng, 3)
        gamma = S @ np.diag(np.repeat(nus, 2)) @ S.T
        np.testing.assert_allclose(gaussian.symplectic_eigenvalues(gamma), nus, rtol=1e-9)

    def test_descending(self, rng):
        lam = gaussian.symplectic_eigenvalues(random_physical_state(rng, 3))
        assert list(lam) == sorted(lam, reverse=True)

    def test_not_positive_definite(self):
        with pytest.raises(NumericalDomainError):
            gaussian.symplectic_eigenvalues(np.diag([1.0, -1.0]))


class TestGFunction:
    def test_zero(self):
        assert gaussian.g_function(0.0) == 0.0

    def test_one(self):
        assert gaussian.g_function(1.0) == pytest.approx(2.0, abs=1e-15)

    def test_half(self):
        # 1.5 log2 1.5 - 0.5 log2 0.5, evaluated at 30 digits
        assert gaussian.g_function(0.5) == pytest.approx(1.37744375108173427, abs=1e-14)

    def test_negative(self):
        with pytest.raises(DomainError):
            gaussian.g_function(-0.1)

    def test_monotone_on_grid(self):
        xs = np.arange(0, 100.0001, 0.01)
        vals = [gaussian.g_function(x) for x in xs]
        assert all(b > a for a, b in zip(vals, vals[1:]))


class TestEntropy:
    def test_pure(self):
        assert gaussian.entropy_from_spectrum([1, 1, 1]) == 0.0

    def test_single(self):
        assert gaussian.entropy_from_spectrum([3.0]) == pytest.approx(2.0, abs=1e-15)

    @given(st.floats(1.0, 1e3))
    def test_additive(self, nu):
        assert gaussian.entropy_from_spectrum([nu, nu]) == 2 * gaussian.entropy_from_spectrum([nu])

    def test_clamps_below_one(self):
        assert gaussian.entropy_from_spectrum([1 - 5e-10]) == 0.0

    def test_pure_chain(self, rng):
        gamma = gaussian.attach_vacuum(gaussian.attach_vacuum(gaussian.epr_state(25.0)))
        for _ in range(5):
            gamma = gaussian.apply(random_symplectic(rng, 4), gamma)
        assert abs(gaussian.von_neumann_entropy(gamma)) < 1e-9


def pinv_condition(gamma, mode):
    """Generic Moore-Penrose conditioning with X = diag(1, 0) on the measured mode."""
    n = gamma.shape[0] // 2
    keep = [i for i in range(2 * n) if i // 2 != mode]
    meas = [2 * mode, 2 * mode + 1]
    A = gamma[np.ix_(keep, keep)]
    sigma = gamma[np.ix_(keep, meas)]
    B = gamma[np.ix_(meas, meas)]
    X = np.diag([1.0, 0.0])
    return A - sigma @ np.linalg.pinv(X @ B @ X) @ sigma.T


class TestHomodyneCondition:
    def test_product_state(self, rng):
        a = random_physical_state(rng, 2)
        b = random_physical_state(rng, 1)
        gamma = np.zeros((6, 6))
        gamma[:4, :4], gamma[4:, 4:] = a, b
        np.testing.assert_allclose(gaussian.homodyne_condition(gamma, 2), a, atol=1e-15)

    def test_epr(self):
        V = 40.0
        out = gaussian.homodyne_condition(gaussian.epr_state(V), 1, "x")
        np.testing.assert_allclose(out, np.diag([1 / V, V]), atol=1e-12)

    def test_epr_p_quadrature(self):
        V = 40.0
        out = gaussian.homodyne_condition(gaussian.epr_state(V), 1, "p")
        np.testing.assert_allclose(out, np.diag([V, 1 / V]), atol=1e-12)

    @pytest.mark.parametrize("mode", [0, 1, 2])
    def test_matches_pinv_formula(self, rng, mode):
        for _ in range(25):
            gamma = random_physical_state(rng, 3)
            ours = gaussian.homodyne_condition(gamma, mode)
            ref = pinv_condition(gamma, mode)
            assert max_abs(ours - ref) < 1e-10 * max(1.0, max_abs(gamma))

    def test_result_physical(self, rng):
        for _ in range(25):
            out = gaussian.homodyne_condition(random_physical_state(rng, 3), 2)
            assert max_abs(out - out.T) < 1e-12
            assert gaussian.symplectic_eigenvalues(out).min() >= 1 - 1e-9

    def test_single_mode_rejected(self):
        with pytest.raises(ValueError):
            gaussian.homodyne_condition(np.eye(2), 0)

    def test_nonpositive_variance(self):
        gamma = np.eye(4)
        gamma[2, 2] = 0.0
        with pytest.raises(NumericalDomainError):
            gaussian.homodyne_condition(gamma, 1)
