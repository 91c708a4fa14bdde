"""Tests for phantoms, forward solves and noisy observations."""

import json

import numpy as np
import pytest

from elasticity_imaging.fem_core import assemble_psi, dmatrix, stiffness_apply
from elasticity_imaging.mesh import generate_mesh
from elasticity_imaging.synth import (
    NoiseModel,
    SynthError,
    add_force_noise,
    add_noise,
    calibrate_noise,
    calibrate_noise_snr,
    displacement_noise,
    expected_snr_db,
    forward_solve,
    lateral_energy_share,
    make_phantom,
    noise_level,
    observe,
    save_observation,
    uniform_compression,
)


@pytest.fixture(scope="module")
def problem():
    mesh = generate_mesh(target_nodes=100, jitter=0.2, seed=2)
    loading = uniform_compression(mesh, traction=100.0)
    psi = assemble_psi(mesh, 0.495, loading.dirichlet)
    phantom = make_phantom(mesh, 10e3, 50e3, (0.5, 0.6), 0.2)
    u, f_true = forward_solve(psi, phantom.E_true, loading)
    return mesh, psi, phantom, loading, u, f_true


class TestPhantom:
    """Test phantom construction."""

    def test_inclusion_and_background_values(self, small_mesh):
        phantom = make_phantom(small_mesh, 10e3, 50e3, (0.5, 0.5), 0.3)
        distance = np.hypot(small_mesh.nodes[:, 0] - 0.5, small_mesh.nodes[:, 1] - 0.5)
        np.testing.assert_array_equal(phantom.inside, distance <= 0.3)
        assert set(np.unique(phantom.E_true)) == {10e3, 50e3}
        assert phantom.describe()["inclusion_nodes"] == int((distance <= 0.3).sum())

    def test_invalid_radius(self, small_mesh):
        with pytest.raises(SynthError):
            make_phantom(small_mesh, radius=0.0)

    def test_invalid_modulus(self, small_mesh):
        with pytest.raises(SynthError):
            make_phantom(small_mesh, background=-1.0)


class TestLoading:
    """Test uniform compression."""

    def test_total_force_balances_traction(self, small_mesh):
        loading = uniform_compression(small_mesh, traction=100.0)
        top_corners = np.intersect1d(
            small_mesh.boundary_sets["top"], small_mesh.boundary_sets["left"]
        )
        assert loading.force[1::2].sum() == pytest.approx(-100.0)
        assert not np.any(loading.force[0::2])
        assert loading.force[2 * top_corners[0] + 1] < 0
        for node in loading.dirichlet:
            assert loading.force[2 * node + 1] == 0.0

    def test_bottom_nodes_are_fixed(self, small_mesh):
        loading = uniform_compression(small_mesh, traction=100.0)
        assert set(loading.dirichlet) == set(small_mesh.boundary_sets["bottom"].tolist())


class TestForwardSolve:
    """Test the ideal forward problem."""

    def test_residual(self, problem):
        _, psi, phantom, _, u, f_true = problem
        residual = stiffness_apply(psi, phantom.E_true, u) - f_true
        assert np.linalg.norm(residual) <= 1e-8 * np.linalg.norm(f_true)

    def test_compression_and_fixed_bottom(self, problem):
        mesh, psi, _, _, u, _ = problem
        assert not np.any(u[psi.fixed])
        top = mesh.boundary_sets["top"]
        assert np.all(u[2 * top + 1] < 0)

    def test_non_positive_modulus(self, problem):
        _, psi, phantom, loading, _, _ = problem
        E = np.array(phantom.E_true)
        E[0] = 0.0
        with pytest.raises(SynthError):
            forward_solve(psi, E, loading)

    def test_zero_traction_gives_zero_displacement(self, problem):
        mesh, psi, phantom, _, _, _ = problem
        u, f_true = forward_solve(psi, phantom.E_true, uniform_compression(mesh, 0.0))
        assert not np.any(f_true)
        np.testing.assert_array_equal(u, np.zeros(psi.n_dofs))

    def test_doubling_traction_doubles_displacement(self, problem):
        mesh, psi, phantom, _, u, _ = problem
        doubled, _ = forward_solve(psi, phantom.E_true, uniform_compression(mesh, 200.0))
        np.testing.assert_allclose(doubled, 2.0 * u, rtol=1e-9, atol=1e-12 * np.abs(u).max())

    def test_axial_displacement_grows_with_height(self):
        mesh = generate_mesh(target_nodes=121, jitter=0.0)
        loading = uniform_compression(mesh, traction=100.0)
        psi = assemble_psi(mesh, 0.495, loading.dirichlet)
        u, _ = forward_solve(psi, np.full(mesh.n_nodes, 10e3), loading)
        column = np.flatnonzero(np.isclose(mesh.nodes[:, 0], 0.5))
        column = column[np.argsort(mesh.nodes[column, 1])]
        assert column.size == 11
        magnitude = np.abs(u[2 * column + 1])
        assert magnitude[0] == 0.0
        assert np.all(np.diff(magnitude) > 0)


class TestNoise:
    """Test noise models, calibration and bookkeeping."""

    def test_noise_level_examples(self):
        assert noise_level(np.array([3.0, 4.0]), np.array([3.0, 4.0])) == 0.0
        assert noise_level(np.array([3.0, 4.0]), np.zeros(2)) == pytest.approx(1.0)
        with pytest.raises(SynthError):
            noise_level(np.zeros(2), np.ones(2))

    def test_zero_noise(self, problem):
        _, psi, _, _, u, f_true = problem
        observation = observe(u, f_true, NoiseModel(), psi.fixed)
        np.testing.assert_array_equal(observation.u_m, u)
        np.testing.assert_array_equal(observation.f, f_true)
        assert observation.realized()["snr_db"] == float("inf")

    def test_same_seed_same_observation(self, problem):
        _, psi, _, _, u, f_true = problem
        noise = NoiseModel(1e-4, 1e-4, 1e-3, seed=11)
        a = observe(u, f_true, noise, psi.fixed)
        b = observe(u, f_true, noise, psi.fixed)
        np.testing.assert_array_equal(a.u_m, b.u_m)
        np.testing.assert_array_equal(a.f, b.f)

    def test_dirichlet_dofs_stay_noise_free(self, problem):
        _, psi, _, _, u, f_true = problem
        observation = observe(u, f_true, NoiseModel(1e-3, 1e-3, 1.0, seed=3), psi.fixed)
        assert not np.any(observation.n[psi.fixed])
        assert not np.any(observation.w[psi.fixed])

    def test_add_noise_matches_observe(self, problem):
        _, psi, _, _, u, f_true = problem
        noise = NoiseModel(1e-4, 5e-5, 1e-2, seed=5)
        observation = observe(u, f_true, noise, psi.fixed)
        np.testing.assert_array_equal(add_noise(u, noise, psi.fixed), observation.u_m)
        np.testing.assert_array_equal(add_force_noise(f_true, noise, psi.fixed), observation.f)

    def test_calibrated_levels_are_realized(self, problem):
        _, psi, _, _, u, f_true = problem
        lateral, axial = [], []
        for seed in range(8):
            noise = calibrate_noise(u, 0.09, 0.03, psi.fixed, seed=seed)
            realized = observe(u, f_true, noise, psi.fixed).realized()
            lateral.append(realized["delta_lateral"])
            axial.append(realized["delta_axial"])
        assert np.mean(lateral) == pytest.approx(0.09, rel=0.1)
        assert np.mean(axial) == pytest.approx(0.03, rel=0.1)

    def test_per_direction_std_over_many_draws(self):
        fixed = np.zeros(200000, dtype=bool)
        fixed[:4] = True
        n = displacement_noise(fixed.size, NoiseModel(2e-4, 5e-5, seed=7), fixed)
        lateral, axial = n[0::2][~fixed[0::2]], n[1::2][~fixed[1::2]]
        assert lateral.size > 99000
        assert np.std(lateral) == pytest.approx(2e-4, rel=0.02)
        assert np.std(axial) == pytest.approx(5e-5, rel=0.02)

    def test_per_direction_levels_set_the_overall_snr(self, problem):
        _, psi, _, _, u, f_true = problem
        # Axial motion dominates ‖u‖, so 9%/3% lands near 29 dB, not 25.
        assert lateral_energy_share(u, psi.fixed) < 0.3
        expected, realized = [], []
        for seed in range(8):
            noise = calibrate_noise(u, 0.09, 0.03, psi.fixed, seed=seed)
            expected.append(expected_snr_db(u, noise, psi.fixed))
            realized.append(observe(u, f_true, noise, psi.fixed).realized()["snr_db"])
        assert np.mean(realized) == pytest.approx(np.mean(expected), abs=1.0)
        assert np.mean(expected) > 26.0
        assert expected_snr_db(u, NoiseModel(), psi.fixed) == float("inf")

    def test_snr_calibration(self, problem):
        _, psi, _, _, u, f_true = problem
        snrs = []
        for seed in range(8):
            noise = calibrate_noise_snr(u, 20.0, 3.0, psi.fixed, seed=seed)
            snrs.append(observe(u, f_true, noise, psi.fixed).realized()["snr_db"])
        assert np.mean(snrs) == pytest.approx(20.0, abs=1.0)

    @pytest.mark.parametrize("delta", [-0.1, 1.0])
    def test_invalid_noise_level(self, problem, delta):
        _, psi, _, _, u, _ = problem
        with pytest.raises(SynthError):
            calibrate_noise(u, delta, 0.03, psi.fixed)

    def test_negative_sigma(self):
        with pytest.raises(SynthError):
            NoiseModel(sigma_lateral=-1.0)

    def test_integrated_noise_identity(self, problem):
        _, psi, phantom, _, u, f_true = problem
        noise = NoiseModel(1e-4, 3e-5, 0.05, seed=4)
        observation = observe(u, f_true, noise, psi.fixed)
        free = psi.free_dofs
        lhs = observation.f - dmatrix(psi, observation.u_m) @ phantom.E_true
        rhs = observation.w - stiffness_apply(psi, phantom.E_true, observation.n)
        scale = np.linalg.norm(rhs[free])
        np.testing.assert_allclose(lhs[free], rhs[free], atol=1e-8 * scale)


class TestObservationDump:
    """Test the observation files."""

    def test_files_and_manifest(self, problem, temp_dir):
        _, psi, phantom, loading, u, f_true = problem
        observation = observe(u, f_true, NoiseModel(1e-4, 1e-4, 0.0, seed=9), psi.fixed)
        manifest = save_observation(
            str(temp_dir), observation, phantom, loading, {"delta_lateral": 0.09}
        )
        for name in ("u.csv", "u_m.csv", "f.csv", "f_true.csv", "E_true.csv"):
            assert (temp_dir / name).exists()
        assert (temp_dir / "u_m.csv").read_text().splitlines()[0] == "lateral,axial"
        assert (temp_dir / "E_true.csv").read_text().splitlines()[0] == "value"
        loaded = np.loadtxt(temp_dir / "u_m.csv", delimiter=",", skiprows=1)
        np.testing.assert_array_equal(loaded.ravel(), observation.u_m)
        stored = json.loads((temp_dir / "observation.json").read_text())
        assert stored["seed"] == 9
        assert stored["targets"] == {"delta_lateral": 0.09}
        assert manifest["realized"]["delta"] == pytest.approx(stored["realized"]["delta"])


@pytest.mark.slow
class TestNoiseSpread:
    """Seed-to-seed spread of the realized noise levels."""

    def test_lateral_level_stays_near_target_across_seeds(self):
        mesh = generate_mesh(target_nodes=900, jitter=0.2, seed=0)
        loading = uniform_compression(mesh, traction=100.0)
        psi = assemble_psi(mesh, 0.495, loading.dirichlet)
        u, f_true = forward_solve(psi, make_phantom(mesh).E_true, loading)
        levels = []
        for seed in range(50):
            noise = calibrate_noise(u, 0.09, 0.03, psi.fixed, seed=seed)
            levels.append(observe(u, f_true, noise, psi.fixed).realized()["delta_lateral"])
        assert 0.08 <= min(levels) and max(levels) <= 0.10
