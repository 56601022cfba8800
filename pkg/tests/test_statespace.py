import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lurebound.statespace import (
    DimensionError, Realization, PlantRealization, lift, interconnect,
    is_schur, freq_response, simulate,
)
from lurebound.multiplier import MultiplierParam, combined_filter
from lurebound.analysis import builtin_plant


def random_realization(rng, n, m, k):
    return Realization(rng.standard_normal((n, n)), rng.standard_normal((n, m)),
                       rng.standard_normal((k, n)), rng.standard_normal((k, m)))


class TestRealization:
    def test_dimension_validation(self):
        with pytest.raises(DimensionError):
            Realization(np.zeros((2, 3)), np.zeros((2, 1)),
                        np.zeros((1, 2)), np.zeros((1, 1)))
        with pytest.raises(DimensionError):
            Realization(np.zeros((2, 2)), np.zeros((3, 1)),
                        np.zeros((1, 2)), np.zeros((1, 1)))

    def test_plant_requires_square_loop_channel(self):
        with pytest.raises(DimensionError):
            PlantRealization(np.zeros((2, 2)), np.zeros((2, 1)),
                             np.zeros((2, 2)), np.zeros((2, 1)),
                             np.eye(2))


class TestLift:
    def test_horizon_one_is_the_feedthrough(self):
        rng = np.random.default_rng(0)
        r = random_realization(rng, 3, 2, 2)
        lt = lift(r, 1)
        np.testing.assert_allclose(lt.D_T, r.D)
        np.testing.assert_allclose(lt.A_T, r.A)
        np.testing.assert_allclose(lt.C_T, r.C)

    def test_scalar_integrator_horizon_two(self):
        # x+ = u, y = x: D^2 = [[0,0],[1,0]], B^2 = [0,1], A^2 = 0
        r = Realization(np.zeros((1, 1)), np.ones((1, 1)),
                        np.ones((1, 1)), np.zeros((1, 1)))
        lt = lift(r, 2)
        np.testing.assert_allclose(lt.D_T, [[0, 0], [1, 0]])
        np.testing.assert_allclose(lt.B_T, [[0, 1]])
        np.testing.assert_allclose(lt.A_T, [[0]])

    def test_zero_input_structure(self):
        rng = np.random.default_rng(1)
        C = rng.standard_normal((2, 3))
        r = Realization(np.eye(3), np.zeros((3, 1)), C, np.zeros((2, 1)))
        lt = lift(r, 3)
        np.testing.assert_allclose(lt.A_T, np.eye(3))
        np.testing.assert_allclose(lt.B_T, np.zeros((3, 3)))
        np.testing.assert_allclose(lt.C_T, np.vstack([C, C, C]))

    def test_matches_simulation(self):
        rng = np.random.default_rng(2)
        r = random_realization(rng, 3, 2, 2)
        T = 5
        lt = lift(r, T)
        u = rng.standard_normal((T, 2))
        x, y = simulate(r, np.zeros(3), u)
        uvec = u.reshape(-1)
        np.testing.assert_allclose(y.reshape(-1), lt.D_T @ uvec, atol=1e-12)
        np.testing.assert_allclose(x[-1], lt.B_T @ uvec, atol=1e-12)
        x0 = rng.standard_normal(3)
        x2, y2 = simulate(r, x0, u)
        np.testing.assert_allclose(y2.reshape(-1),
                                   lt.C_T @ x0 + lt.D_T @ uvec, atol=1e-12)
        np.testing.assert_allclose(x2[-1], lt.A_T @ x0 + lt.B_T @ uvec,
                                   atol=1e-12)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 10_000), st.integers(2, 6))
    def test_nested_lifting(self, seed, T):
        """The horizon-(T-1) lift sits inside the horizon-T lift: deleting
        the first input block column and last output block row recovers it."""
        rng = np.random.default_rng(seed)
        r = random_realization(rng, 2, 1, 1)
        big, small = lift(r, T), lift(r, T - 1)
        # D^T with first input column and first output row removed
        np.testing.assert_allclose(big.D_T[1:, 1:], small.D_T, atol=1e-12)
        np.testing.assert_allclose(big.B_T[:, 1:], small.B_T, atol=1e-12)
        np.testing.assert_allclose(big.C_T[:-1], small.C_T, atol=1e-12)


class TestInterconnect:
    def test_static_identity_filter(self):
        plant = builtin_plant(1.0)
        p = MultiplierParam(0, 0, [1.0], [1.0], None)
        filt = combined_filter(p)
        aug = interconnect(filt, plant)
        assert aug.n_filter == 0
        np.testing.assert_allclose(aug.A, plant.A)
        np.testing.assert_allclose(aug.B, plant.B)

    def test_cascade_matches_simulation(self):
        rng = np.random.default_rng(3)
        plant = PlantRealization(np.array([[0.5]]), np.array([[1.0]]),
                                 np.array([[1.0]]), np.array([[0.0]]),
                                 np.array([[1.0]]))
        p = MultiplierParam(1, 1, [0.3, 0.7], [0.2, 0.1], [[0.5]])
        filt = combined_filter(p)
        aug = interconnect(filt, plant)
        assert aug.A.shape == (3, 3)
        # drive the w channel; the filter input is (z, w) = (Cx+Dw, w)
        w = rng.standard_normal((6, 1))
        x_p, z = simulate(plant.realization(), np.zeros(1), w)
        u_filt = np.hstack([z, w])
        xi, v = simulate(Realization(filt.A, filt.B, filt.C, filt.D),
                         np.zeros(2), u_filt)
        x_aug, v_aug = simulate(Realization(aug.A, aug.B, aug.C, aug.D),
                                np.zeros(3), w)
        np.testing.assert_allclose(v_aug, v, atol=1e-12)

    def test_zero_plant_block_diagonal(self):
        plant = PlantRealization(np.zeros((1, 1)), np.zeros((1, 1)),
                                 np.zeros((1, 1)), np.zeros((1, 1)),
                                 np.zeros((1, 1)))
        p = MultiplierParam(1, 1, [1.0, 0.5], [1.0, 0.5], None)
        aug = interconnect(combined_filter(p), plant)
        np.testing.assert_allclose(aug.A[-1, :], 0.0)
        np.testing.assert_allclose(aug.A[:, -1], 0.0)


class TestSchur:
    def test_scalar_cases(self):
        assert is_schur(np.array([[0.5]]))
        assert not is_schur(np.array([[1.0]]))

    def test_benchmark_plant_is_schur(self):
        assert is_schur(builtin_plant(1.0).A)


class TestFreqResponse:
    def test_scalar_values(self):
        r = Realization(np.zeros((1, 1)), np.ones((1, 1)),
                        np.ones((1, 1)), np.zeros((1, 1)))
        np.testing.assert_allclose(freq_response(r, 1.0), [[1.0]])
        r2 = Realization(np.array([[0.5]]), np.ones((1, 1)),
                         np.ones((1, 1)), np.zeros((1, 1)))
        np.testing.assert_allclose(freq_response(r2, 1.0), [[2.0]])

    def test_static_system(self):
        D = np.array([[3.0, 1.0], [0.0, 2.0]])
        r = Realization(np.zeros((0, 0)), np.zeros((0, 2)),
                        np.zeros((2, 0)), D)
        np.testing.assert_allclose(freq_response(r, 1j), D)

    def test_matches_long_impulse_sum(self):
        rng = np.random.default_rng(4)
        r = random_realization(rng, 3, 1, 1)
        r = Realization(0.5 * r.A / max(abs(np.linalg.eigvals(r.A))),
                        r.B, r.C, r.D)
        lam = np.exp(1j * 0.7)
        # G(lam) = D + sum_k C A^{k-1} B lam^{-k}
        acc = r.D.astype(complex).copy()
        Ak = np.eye(3)
        for k in range(1, 400):
            acc += (r.C @ Ak @ r.B) * lam**(-k)
            Ak = Ak @ r.A
        np.testing.assert_allclose(freq_response(r, lam), acc, atol=1e-10)


class TestSimulate:
    def test_shapes_and_final_state(self):
        rng = np.random.default_rng(5)
        r = random_realization(rng, 2, 1, 3)
        u = rng.standard_normal((7, 1))
        x, y = simulate(r, np.zeros(2), u)
        assert x.shape == (8, 2) and y.shape == (7, 3)

    def test_zero_horizon(self):
        r = Realization(np.eye(2), np.zeros((2, 1)), np.zeros((1, 2)),
                        np.zeros((1, 1)))
        x, y = simulate(r, np.ones(2), np.zeros((0, 1)))
        assert x.shape == (1, 2) and y.shape == (0, 1)
