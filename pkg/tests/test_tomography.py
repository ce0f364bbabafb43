import numpy as np
import pytest
from hypothesis import given, strategies as st

from staberry.errors import DomainError, FitError, UndefinedPhaseError
from staberry.experiments import berry_sweep, echo_final_xy, trajectory_experiment
from staberry.propagator import KET0, DissipationParams, density_matrix
from staberry.tomography import (SphericalPath, SphericalSample, bloch_vector, extract_berry_phase,
                                 fit_contrast, fit_slope, sample_qst, solid_angle, spherical_trajectory,
                                 unwrap_sweep, write_sweep_csv)

D0 = 2 * np.pi * 0.007
TWO_PI = 2 * np.pi


def ring(theta, winding=1, n=400):
    phi = np.linspace(0, winding * TWO_PI, n)
    return SphericalPath(np.arange(n, dtype=float), np.ones(n), np.full(n, theta), phi)


class TestBlochVector:
    def test_ground(self):
        assert bloch_vector(density_matrix(KET0)).as_array() == pytest.approx([0, 0, 1])

    def test_plus(self):
        assert bloch_vector(np.full((2, 2), 0.5)).as_array() == pytest.approx([1, 0, 0])

    def test_mixed(self):
        assert bloch_vector(np.eye(2) / 2).length == pytest.approx(0)

    def test_accepts_kets(self):
        assert bloch_vector(np.array([1, 1j]) / np.sqrt(2)).as_array() == pytest.approx([0, 1, 0])


class TestSampleQst:
    def test_many_shots(self):
        assert abs(sample_qst(density_matrix(KET0), 10**6, seed=3).z - 1) < 0.005

    def test_single_shot(self):
        est = sample_qst(np.eye(2) / 2, 1, seed=1)
        assert set(np.abs(est.as_array())) == {1.0}

    def test_deterministic(self):
        rho = np.full((2, 2), 0.5)
        assert sample_qst(rho, 100, seed=7) == sample_qst(rho, 100, seed=7)

    def test_bad_shots(self):
        with pytest.raises(DomainError):
            sample_qst(np.eye(2) / 2, 0)

    def test_convergence_rate(self):
        rho = density_matrix(np.array([np.cos(0.4), np.sin(0.4) * np.exp(0.3j)]))
        exact = bloch_vector(rho).as_array()

        def rms(shots):
            errs = [sample_qst(rho, shots, seed=s).as_array() - exact for s in range(200)]
            return np.sqrt(np.mean(np.square(errs)))

        # 100x the shots shrinks the error by ~10
        assert 7 < rms(10**3) / rms(10**5) < 14


class TestBranch:
    def test_small_s(self):
        r = extract_berry_phase(-0.72, 0.0, np.pi / 2, "C+-")
        assert r.gamma == pytest.approx(-np.pi) and r.raw_angle == pytest.approx(np.pi)
        assert r.branch_offset == pytest.approx(-TWO_PI)

    def test_large_s(self):
        r = extract_berry_phase(-0.72, 0.0, 3 * np.pi / 2, "C+-")
        assert r.gamma == pytest.approx(-3 * np.pi) and r.branch_offset == pytest.approx(-2 * TWO_PI)

    def test_reversed_and_single_loops(self):
        assert extract_berry_phase(-0.72, 0.0, np.pi / 2, "C-+").gamma == pytest.approx(np.pi)
        assert extract_berry_phase(-0.72, 0.0, 3 * np.pi / 2, "C-+").gamma == pytest.approx(3 * np.pi)
        assert extract_berry_phase(0.0, -1.0, 1.0, "C+").gamma == pytest.approx(3 * np.pi / 2)
        assert extract_berry_phase(0.0, 1.0, 1.0, "C-").gamma == pytest.approx(-3 * np.pi / 2)

    def test_errors(self):
        with pytest.raises(UndefinedPhaseError):
            extract_berry_phase(0.0, 0.0, 1.0)
        with pytest.raises(DomainError):
            extract_berry_phase(1.0, 0.0, TWO_PI)
        with pytest.raises(DomainError):
            extract_berry_phase(1.0, 0.0, 1.0, "C++")

    @given(st.floats(-np.pi, np.pi), st.floats(0, TWO_PI, exclude_max=True),
           st.sampled_from(["C+-", "C-+", "C+", "C-"]))
    def test_interval_and_offset(self, a, s, variant):
        r = extract_berry_phase(np.cos(a), np.sin(a), s, variant)
        assert r.gamma == pytest.approx(r.raw_angle + r.branch_offset, abs=1e-12)
        k = r.branch_offset / TWO_PI
        assert abs(k - round(k)) < 1e-12
        assert -np.pi < r.raw_angle <= np.pi
        if variant in ("C+-", "C-+"):
            lo = 0.0 if s < np.pi else TWO_PI
            lo, hi = (-lo - TWO_PI, -lo) if variant == "C+-" else (lo, lo + TWO_PI)
        else:
            lo, hi = (0.0, TWO_PI) if variant == "C+" else (-TWO_PI, 0.0)
        assert lo - 1e-12 <= r.gamma <= hi + 1e-12

    @given(st.floats(-np.pi + 1e-6, np.pi - 1e-6).filter(lambda a: abs(a) > 1e-9), st.floats(0, TWO_PI - 1e-9))
    def test_mirror_equivariance(self, a, s):
        g1 = extract_berry_phase(np.cos(a), np.sin(a), s, "C+-").gamma
        g2 = extract_berry_phase(np.cos(a), -np.sin(a), s, "C-+").gamma
        assert g1 == pytest.approx(-g2, abs=1e-12)

    @pytest.mark.parametrize("theta0", [np.pi / 6, np.pi / 3, 1.3])
    def test_echo_variants_are_opposite(self, theta0):
        s = TWO_PI * (1 - np.cos(theta0))
        g1 = extract_berry_phase(*echo_final_xy(theta0, 30.0, "C+-"), s, "C+-").gamma
        g2 = extract_berry_phase(*echo_final_xy(theta0, 30.0, "C-+"), s, "C-+").gamma
        assert abs(g1 + g2) < 1e-6

    def test_echo_simulation(self):
        x, y = echo_final_xy(np.pi / 6, 30.0)
        assert abs(extract_berry_phase(x, y, 0.841787).gamma + 2 * 0.841787) < 2e-3

    def test_unwrap_cross_check(self):
        s = np.linspace(0.2, 5.5, 15)
        g = -2 * s
        out = unwrap_sweep(np.cos(g), np.sin(g), -2 * s[0])
        assert np.allclose(out, g, atol=1e-12)
        assert np.allclose([extract_berry_phase(np.cos(v), np.sin(v), si).gamma for v, si in zip(g, s)], g)


class TestSpherical:
    def test_constant_ground_state(self):
        path = spherical_trajectory(np.tile([0.0, 0.0, 1.0], (5, 1)))
        assert np.allclose(path.r, 1) and np.allclose(path.theta, 0) and np.allclose(path.phi, 0)

    def test_zero_vector_is_undefined(self):
        path = spherical_trajectory(np.array([[0.0, 0, 1], [0, 0, 0], [1, 0, 0]]))
        assert np.isnan(path.theta[1]) and np.isnan(path.phi[1]) and path.r[1] == 0
        with pytest.raises(DomainError):
            solid_angle(path)

    def test_empty(self):
        with pytest.raises(DomainError):
            spherical_trajectory(np.zeros((0, 3)))

    def test_unwraps_azimuth(self):
        phi = np.linspace(0, 3 * TWO_PI, 200)
        vecs = np.stack([np.cos(phi), np.sin(phi), np.zeros_like(phi)], axis=1)
        assert np.allclose(spherical_trajectory(vecs).phi, phi, atol=1e-12)

    def test_ideal_sta_rotation(self):
        res = trajectory_experiment(np.pi / 4, D0, 10, 30)
        rot = res.rotation
        assert np.max(np.abs(rot.theta - np.pi / 4)) < 1e-6
        assert np.max(np.abs(rot.phi - rot.phi[0] - TWO_PI / 30 * (rot.t - 10))) < 1e-6

    def test_lindblad_radius_shrinks(self):
        res = trajectory_experiment(np.pi / 6, D0, 10, 30, dis=DissipationParams(270, 450))
        assert np.all(np.diff(res.path.r) <= 1e-9)

    def test_csv(self, tmp_path):
        ring(0.5, n=4).to_csv(tmp_path / "p.csv")
        lines = (tmp_path / "p.csv").read_text().splitlines()
        assert lines[0] == "t_ns,r,theta_rad,phi_rad" and len(lines) == 5


class TestSolidAngle:
    @pytest.mark.parametrize("theta0,expected", [(np.pi / 6, 0.841787), (np.pi / 4, 1.840302)])
    def test_ideal_loops(self, theta0, expected):
        assert abs(solid_angle(ring(theta0)) - expected) < 1e-3

    @given(st.floats(0.01, np.pi - 0.01), st.sampled_from([1, 2]))
    def test_winding(self, theta, w):
        assert solid_angle(ring(theta, w)) == pytest.approx(TWO_PI * (1 - np.cos(theta)) * w, rel=1e-12)

    def test_sample_list(self):
        samples = list(ring(np.pi / 3))
        assert isinstance(samples[0], SphericalSample)
        assert solid_angle(samples) == pytest.approx(np.pi)

    def test_too_short(self):
        with pytest.raises(DomainError):
            solid_angle(ring(0.3, n=1))

    def test_simulated_loops(self):
        for theta0, expected in ((np.pi / 6, 0.841787), (np.pi / 4, 1.840302)):
            assert abs(trajectory_experiment(theta0, D0, 10, 30).solid_angle - expected) < 1e-3


class TestFits:
    def test_exact_slope(self):
        s = np.linspace(0.1, 1.9, 10)
        fit = fit_slope(np.stack([s, -2 * s], axis=1))
        assert abs(fit.k - 2) < 1e-12 and abs(fit.intercept) < 1e-12

    def test_degenerate_slope(self):
        with pytest.raises(FitError):
            fit_slope([(1.0, -2.0), (1.0, -2.1)])

    @given(st.floats(0.5, 3), st.floats(-1, 1))
    def test_slope_recovers_line(self, k, b):
        s = np.linspace(0.1, 5, 8)
        fit = fit_slope(np.stack([s, -k * s + b], axis=1))
        assert fit.k == pytest.approx(k, abs=1e-9) and fit.intercept == pytest.approx(b, abs=1e-9)

    def test_exact_contrast(self):
        s = np.linspace(0.2, 4, 7)
        pts = np.stack([s, 0.72 * np.cos(-2 * s), 0.72 * np.sin(-2 * s)], axis=1)
        assert fit_contrast(pts) == pytest.approx(0.72)
        pts[:, 2] *= -1
        assert fit_contrast(pts, "C-+") == pytest.approx(0.72)

    def test_contrast_degenerate(self):
        with pytest.raises(FitError):
            fit_contrast(np.zeros((5, 3)))
        with pytest.raises(FitError):
            fit_contrast([(0.1, 1, 0), (0.2, 1, 0)])

    def test_noiseless_sweep(self):
        sweep = berry_sweep(t_rots=(20.0, 30.0, 40.0, 60.0))
        ks = np.array([f.k for f in sweep.fits.values()])
        assert np.all(np.abs(ks - 2) < 0.01) and np.ptp(ks) < 0.01
        assert all(abs(f.intercept) < 0.02 for f in sweep.fits.values())
        assert all(abs(r - 1) < 1e-3 for r in sweep.contrast.values())

    def test_reversed_sweep(self):
        sweep = berry_sweep(t_rots=(30.0,), variant="C-+")
        assert abs(sweep.fits[30.0].k + 2) < 0.01

    def test_sweep_csv(self, tmp_path):
        write_sweep_csv(tmp_path / "s.csv", [(0.1, 1.0, 0.0, -0.2)])
        assert (tmp_path / "s.csv").read_text().splitlines()[0] == "S_design_rad,x,y,gamma_rad"
