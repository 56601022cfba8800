import numpy as np
import pytest

from lurebound.convexfn import Quadratic, ScaledAbs
from lurebound.statespace import PlantRealization
from lurebound.sim import (
    LoopResolutionError, check_amplitude_bound, loop_residuals, simulate_lure,
)
from lurebound.analysis import builtin_plant, stability_energy_check


def scalar_plant(a, b, c, d, c_e=1.0):
    return PlantRealization([[a]], [[b]], [[c]], [[d]], [[c_e]])


class TestSimulateLure:
    def test_direct_feedthrough_free_loop(self):
        # D = 0, w = beta z: closed loop x+ = (a + b*beta*c) x
        beta = 0.5
        plant = scalar_plant(0.5, 1.0, 1.0, 0.0)
        f = Quadratic([[beta]])
        traj = simulate_lure(plant, f, [2.0], 6)
        rho = 0.5 + beta
        for t in range(6):
            assert traj.x[t, 0] == pytest.approx(2.0 * rho ** t)
            assert traj.z[t, 0] == pytest.approx(traj.x[t, 0])
            assert traj.w[t, 0] == pytest.approx(beta * traj.z[t, 0])
            assert traj.e[t, 0] == pytest.approx(traj.x[t, 0])

    def test_negative_feedthrough_prox_route(self):
        # scalar D = -alpha < 0 is resolved exactly through the prox
        plant = scalar_plant(0.9, 1.0, 1.0, -0.5)
        f = ScaledAbs(1.0, 1)
        traj = simulate_lure(plant, f, [1.0], 30)
        worst_loop, worst_sub = loop_residuals(traj, plant, f)
        assert worst_loop <= 1e-10
        assert worst_sub <= 1e-10

    def test_general_feedthrough_fixed_point(self):
        plant = scalar_plant(0.5, 1.0, 1.0, 0.3)
        f = Quadratic([[0.5]])
        traj = simulate_lure(plant, f, [1.0], 20)
        worst_loop, worst_sub = loop_residuals(traj, plant, f)
        assert worst_loop <= 1e-9
        assert worst_sub <= 1e-9

    def test_nonconvergent_loop_raises(self):
        # w = z with z = x + 2w: the damped iteration diverges
        plant = scalar_plant(0.5, 1.0, 1.0, 2.0)
        f = Quadratic([[1.0]])
        with pytest.raises(LoopResolutionError):
            simulate_lure(plant, f, [1.0], 1)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            simulate_lure(builtin_plant(1.0), Quadratic(np.eye(2)), np.zeros(5), 3)

    def test_zero_horizon_shapes(self):
        plant = builtin_plant(1.0)
        traj = simulate_lure(plant, ScaledAbs(1.0, 1), np.ones(5), 0)
        assert traj.horizon == 0
        assert traj.x.shape == (1, 5)
        assert traj.z.shape == (0, 1) and traj.e.shape == (0, 1)

    def test_benchmark_plant_residuals(self):
        plant = builtin_plant(1.5)
        rng = np.random.default_rng(0)
        f = ScaledAbs(0.8, 1)
        traj = simulate_lure(plant, f, rng.standard_normal(5), 100)
        worst_loop, worst_sub = loop_residuals(traj, plant, f, rng=rng)
        assert worst_loop <= 1e-9
        assert worst_sub <= 1e-9


class TestTrajectoryCsv:
    def test_row_count_and_header(self, tmp_path):
        plant = builtin_plant(1.0)
        traj = simulate_lure(plant, ScaledAbs(1.0, 1), np.ones(5), 500)
        path = tmp_path / "traj.csv"
        traj.to_csv(path)
        lines = path.read_text().strip().splitlines()
        assert len(lines) == 501
        assert lines[0].split(",") == (
            ["t"] + [f"x{i}" for i in range(5)] + ["z0", "w0", "e0"])
        assert lines[1].split(",")[0] == "0"


class TestAmplitudeBound:
    def test_ratio_and_argmax(self):
        from lurebound.sim import Trajectory
        x = np.array([[2.0], [6.0], [1.0]])
        traj = Trajectory(x, np.zeros((2, 1)), np.zeros((2, 1)),
                          np.zeros((2, 1)))
        ok, worst, t = check_amplitude_bound(traj, [[1.0]], 4.0, [2.0])
        assert ok and worst == pytest.approx(3.0) and t == 1
        ok, worst, _ = check_amplitude_bound(traj, [[1.0]], 2.5, [2.0])
        assert not ok and worst == pytest.approx(3.0)

    def test_zero_initial_state(self):
        from lurebound.sim import Trajectory
        traj = Trajectory(np.zeros((3, 1)), np.zeros((2, 1)),
                          np.zeros((2, 1)), np.zeros((2, 1)))
        ok, worst, t = check_amplitude_bound(traj, [[1.0]], 0.0, [0.0])
        assert ok and worst == 0.0 and t == 0


class TestEnergyCheck:
    def test_convergent_loop(self):
        # pure linear decay: total energy sum a^{2t} x0^2 = x0^2/(1-a^2)
        plant = scalar_plant(0.5, 0.0, 1.0, 0.0)
        traj = simulate_lure(plant, Quadratic([[0.0]]), [1.0], 200)
        converged, const = stability_energy_check(traj, [1.0])
        assert converged
        assert const == pytest.approx(1.0 / (1.0 - 0.25), rel=1e-10)

    def test_divergent_loop(self):
        plant = scalar_plant(1.1, 0.0, 1.0, 0.0)
        traj = simulate_lure(plant, Quadratic([[0.0]]), [1.0], 300)
        converged, _ = stability_energy_check(traj, [1.0])
        assert not converged

    def test_empty_trajectory(self):
        plant = scalar_plant(0.5, 0.0, 1.0, 0.0)
        traj = simulate_lure(plant, Quadratic([[0.0]]), [1.0], 0)
        converged, const = stability_energy_check(traj, [1.0])
        assert converged and const == 0.0
