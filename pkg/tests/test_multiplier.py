import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lurebound.statespace import freq_response, lift, simulate
from lurebound.multiplier import (
    MultiplierParam, check_hyperdominance, combined_filter, fir_filter,
    hyperdominance_constraints, jordan_block, jordan_filter, m_matrix,
    param_dim, param_vector, random_feasible_param, shift_register,
    supply_matrix, terminal_cost,
)


def impulse_response(r, T):
    _, y = simulate(r, np.zeros(r.A.shape[0]),
                    np.vstack([np.ones((1, r.B.shape[1] or 1))[:, :1],
                               np.zeros((T - 1, 1))]))
    return y.reshape(-1)


class TestMultiplierParam:
    def test_length_validation(self):
        with pytest.raises(ValueError):
            MultiplierParam(1, 0, np.ones(3), np.ones(1), None)
        with pytest.raises(ValueError):
            MultiplierParam(1, 1, np.ones(2), np.ones(3), None)
        with pytest.raises(ValueError):
            MultiplierParam(-1, 0, np.ones(0), np.ones(1), None)

    def test_t0(self):
        p = MultiplierParam(2, 1, np.ones(3), np.ones(2), np.zeros((1, 2)))
        assert p.T0 == 4

    def test_default_coupling_is_zero(self):
        p = MultiplierParam(2, 3, np.ones(3), np.ones(4), None)
        np.testing.assert_array_equal(p.E, np.zeros((3, 2)))


class TestJordanFilter:
    def test_block_is_nilpotent_shift(self):
        np.testing.assert_array_equal(jordan_block(3),
                                      np.array([[0., 1, 0], [0, 0, 1],
                                                [0, 0, 0]]))

    def test_impulse_response_k1_nu2(self):
        # transfer 1 - z^{-1}: impulse response (1, -1, 0, 0)
        r = jordan_filter(1, 2)
        np.testing.assert_allclose(impulse_response(r, 4), [1., -1, 0, 0],
                                   atol=1e-14)

    def test_k1_nu1_matrices(self):
        r = jordan_filter(1, 1)
        np.testing.assert_array_equal(r.A, [[0.]])
        np.testing.assert_array_equal(r.B, [[1.]])
        np.testing.assert_array_equal(r.C, [[-1.]])
        np.testing.assert_array_equal(r.D, [[1.]])

    def test_k0_is_identity(self):
        r = jordan_filter(0, 2)
        for z in (1.0, 0.5 + 0.5j, np.exp(1j)):
            np.testing.assert_allclose(freq_response(r, z), [[1.0]],
                                       atol=1e-14)

    def test_transfer_matches_formula(self):
        for nu in range(1, 4):
            for k in range(nu + 1):
                r = jordan_filter(k, nu)
                for z in (np.exp(0.7j), 1.3, 0.9 - 0.2j):
                    want = 1.0 - z ** (-k) if k else 1.0
                    np.testing.assert_allclose(freq_response(r, z),
                                               [[want]], atol=1e-12)

    def test_range_check(self):
        with pytest.raises(ValueError):
            jordan_filter(3, 2)
        with pytest.raises(ValueError):
            jordan_filter(-1, 2)


class TestFirFilter:
    def test_transfer_is_conic_combination(self):
        rng = np.random.default_rng(0)
        for nu in range(0, 4):
            lam = rng.uniform(0, 1, nu + 1)
            r = fir_filter(nu, lam)
            for z in (np.exp(0.3j), np.exp(2.1j), 1.5):
                want = sum(lam[k] * (1 - z ** (-k) if k else 1.0)
                           for k in range(nu + 1))
                np.testing.assert_allclose(freq_response(r, z), [[want]],
                                           atol=1e-12)

    def test_block_dimension(self):
        r = fir_filter(2, [1.0, 0.5, 0.25], d=3)
        assert r.A.shape == (6, 6) and r.C.shape == (3, 6)
        np.testing.assert_allclose(freq_response(r, 2.0),
                                   freq_response(fir_filter(2, [1.0, 0.5, 0.25]),
                                                 2.0)[0, 0] * np.eye(3),
                                   atol=1e-12)


class TestSupplyMatrix:
    def test_symmetric(self):
        p = MultiplierParam(2, 1, [0.3, 0.2, 0.1], [0.4, 0.25],
                            np.zeros((1, 2)))
        P = supply_matrix(p)
        np.testing.assert_array_equal(P, P.T)

    @pytest.mark.parametrize("nu,nut,d", [(1, 1, 1), (2, 1, 1), (0, 2, 1),
                                          (3, 0, 1), (2, 2, 2)])
    def test_pointwise_supply_identity(self, nu, nut, d):
        # v' P v == 2 (w'y + z'yt) along any trajectory of the combined
        # filter, with y, yt the responses of the two FIR blocks.
        rng = np.random.default_rng(nu * 7 + nut * 3 + d)
        lam = rng.uniform(0, 1, nu + 1)
        lamt = rng.uniform(0, 1, nut + 1)
        p = MultiplierParam(nu, nut, lam, lamt, None, d=d)
        P = supply_matrix(p)
        T = 9
        z = rng.standard_normal((T, d))
        w = rng.standard_normal((T, d))
        filt = combined_filter(p)
        _, v = simulate(filt, np.zeros(filt.n), np.hstack([z, w]))
        _, y = simulate(fir_filter(nu, lam, d), np.zeros(nu * d), z)
        _, yt = simulate(fir_filter(nut, lamt, d), np.zeros(nut * d), w)
        for t in range(T):
            lhs = v[t] @ P @ v[t]
            rhs = 2.0 * (w[t] @ y[t] + z[t] @ yt[t])
            assert lhs == pytest.approx(rhs, abs=1e-12)


class TestTerminalCost:
    def test_zero_when_one_side_static(self):
        p = MultiplierParam(0, 2, [1.0], [1.0, 0.5, 0.2], None)
        np.testing.assert_array_equal(terminal_cost(p), np.zeros((2, 2)))
        p = MultiplierParam(2, 0, [1.0, 0.5, 0.2], [1.0], None)
        np.testing.assert_array_equal(terminal_cost(p), np.zeros((2, 2)))

    def test_scalar_coupling(self):
        p = MultiplierParam(1, 1, [1.0, 0.5], [1.0, 0.5],
                            np.array([[2.0]]))
        np.testing.assert_array_equal(terminal_cost(p),
                                      [[0., 2.], [2., 0.]])

    def test_block_structure(self):
        E = np.array([[1.0, -2.0]])
        p = MultiplierParam(2, 1, [1, 0, 0], [1, 0], E, d=2)
        Z = terminal_cost(p)
        assert Z.shape == (6, 6)
        np.testing.assert_array_equal(Z[:4, 4:], np.kron(E, np.eye(2)).T)
        np.testing.assert_array_equal(Z[:4, :4], np.zeros((4, 4)))


class TestMMatrix:
    def test_nu1_nut0_small_horizon(self):
        lam, lamt = np.array([0.7, 0.3]), np.array([0.4])
        p = MultiplierParam(1, 0, lam, lamt, None)
        s = lam.sum() + lamt.sum()
        np.testing.assert_allclose(m_matrix(p, 2),
                                   [[s, 0.0], [-0.3, s]], atol=1e-14)

    def test_toeplitz_from_impulse_responses(self):
        rng = np.random.default_rng(5)
        lam, lamt = rng.uniform(0, 1, 3), rng.uniform(0, 1, 2)
        p = MultiplierParam(2, 1, lam, lamt, None)
        T = 5
        h = impulse_response(fir_filter(2, lam), T)
        ht = impulse_response(fir_filter(1, lamt), T)
        want = np.zeros((T, T))
        for i in range(T):
            for j in range(T):
                if i >= j:
                    want[i, j] += h[i - j]
                if j >= i:
                    want[i, j] += ht[j - i]
        np.testing.assert_allclose(m_matrix(p, T), want, atol=1e-13)

    def test_summed_supply_identity(self):
        # Along any zero-initial-state trajectory of length T:
        #   sum_t v_t' P v_t - x_T' Z x_T == 2 w' M_T z
        rng = np.random.default_rng(17)
        for nu, nut in [(1, 1), (2, 1), (2, 2)]:
            lam = rng.uniform(0, 1, nu + 1)
            lamt = rng.uniform(0, 1, nut + 1)
            E = rng.uniform(-0.3, 0.3, (nut, nu))
            p = MultiplierParam(nu, nut, lam, lamt, E)
            P, Z = supply_matrix(p), terminal_cost(p)
            T = 3
            z = rng.standard_normal((T, 1))
            w = rng.standard_normal((T, 1))
            filt = combined_filter(p)
            x, v = simulate(filt, np.zeros(filt.n), np.hstack([z, w]))
            lhs = sum(v[t] @ P @ v[t] for t in range(T)) - x[T] @ Z @ x[T]
            rhs = 2.0 * w.reshape(-1) @ m_matrix(p, T) @ z.reshape(-1)
            assert lhs == pytest.approx(rhs, abs=1e-12)

    def test_rejects_bad_horizon(self):
        p = MultiplierParam(1, 0, [1.0, 0.5], [0.0], None)
        with pytest.raises(ValueError):
            m_matrix(p, 0)


class TestHyperdominance:
    def test_identity_passes(self):
        assert check_hyperdominance(np.eye(2)).passed

    def test_diagonally_dominant_m_matrix_passes(self):
        assert check_hyperdominance([[2.0, -1.0], [-1.0, 2.0]]).passed

    def test_negative_row_sum_fails(self):
        rep = check_hyperdominance([[1.0, -2.0], [0.0, 1.0]])
        assert not rep.passed and rep.worst_row_sum == pytest.approx(-1.0)

    def test_positive_offdiagonal_fails(self):
        rep = check_hyperdominance([[1.0, 0.5], [0.0, 1.0]])
        assert not rep.passed and rep.worst_offdiag == pytest.approx(-0.5)

    def test_nonsquare_rejected(self):
        with pytest.raises(ValueError):
            check_hyperdominance(np.zeros((2, 3)))


class TestConstraintRepresentation:
    def test_row_count(self):
        for nu, nut in [(0, 0), (1, 0), (2, 1), (2, 3)]:
            T0 = nu + nut + 1
            ineq = hyperdominance_constraints(nu, nut)
            assert ineq.count == T0 * T0 + T0
            assert len(ineq.labels) == ineq.count

    def test_matches_direct_check(self):
        rng = np.random.default_rng(3)
        ineq = hyperdominance_constraints(2, 1)
        for _ in range(50):
            lam = rng.uniform(-1, 1, 3)
            lamt = rng.uniform(-1, 1, 2)
            E = rng.uniform(-1, 1, (1, 2))
            p = MultiplierParam(2, 1, lam, lamt, E)
            vals = ineq.A @ param_vector(p) + ineq.b
            direct = check_hyperdominance(m_matrix(p, p.T0), tol=0.0)
            assert (vals.min() >= 0.0) == direct.passed

    def test_param_dim(self):
        assert param_dim(2, 1) == 7
        p = MultiplierParam(2, 1, [1, 2, 3], [4, 5], [[6, 7]])
        np.testing.assert_array_equal(param_vector(p),
                                      [1., 2, 3, 4, 5, 6, 7])


class TestRandomFeasibleParam:
    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 3), st.integers(0, 3), st.integers(0, 10_000))
    def test_always_in_cone(self, nu, nut, seed):
        rng = np.random.default_rng(seed)
        p = random_feasible_param(nu, nut, rng)
        assert check_hyperdominance(m_matrix(p, p.T0)).passed

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 3), st.integers(0, 3), st.integers(0, 10_000),
           st.integers(1, 3))
    def test_membership_propagates_to_longer_horizons(self, nu, nut, seed,
                                                      mult):
        # doubly hyperdominant at T0 = nu + nut + 1 implies the same at
        # every longer horizon
        rng = np.random.default_rng(seed)
        p = random_feasible_param(nu, nut, rng)
        T = mult * p.T0
        assert check_hyperdominance(m_matrix(p, T), tol=1e-9).passed


class TestShiftRegister:
    def test_state_carries_delayed_inputs(self):
        reg = shift_register(3)
        u = np.arange(1.0, 6.0).reshape(-1, 1)
        x, _ = simulate(reg, np.zeros(3), u)
        # component j holds the input from 3 - j steps ago (1-based)
        np.testing.assert_array_equal(x[5], [3., 4., 5.])

    def test_zero_length(self):
        reg = shift_register(0, d=2)
        assert reg.A.shape == (0, 0) and reg.B.shape == (0, 2)
