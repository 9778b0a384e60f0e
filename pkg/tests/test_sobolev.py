import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from pocsrec.encoders import point_sample
from pocsrec.errors import GridMismatchError, InvalidSamplingError
from pocsrec.signal import BandlimitedSignal, Grid, random_bandlimited
from pocsrec.sobolev import (PiecewiseLinear, PointSampleSet, PointSamplingModel, SobolevSignal,
                             check_sobolev_decomposition, groch_discrete_iterate, groch_iterate,
                             groch_limit, linear_interpolate, pbq_closed_form, point_model,
                             sobolev_inner, sobolev_norm, spl_closed_form)


def instants(seed, period, low, high):
    """Instants from 0 with gaps drawn in [low, high]; the wrap gap is at most high."""
    g = np.random.default_rng(seed).uniform(low, high, int(2 * period / max(low, 0.05)))
    t = np.concatenate(([0.0], np.cumsum(g)))
    return t[t < period]


def samples_of(x, t, noise=None):
    s = point_sample(x, t, noise=noise)
    return PointSampleSet(s.t, s.values, x.grid.period)


def spectral_derivative(x):
    g = x.grid
    U = np.fft.rfft(x.values)
    w = 2 * np.pi * np.fft.rfftfreq(g.n_points, 1.0 / g.samples_per_unit)
    return np.fft.irfft(1j * w * U, g.n_points)


class TestPointSampleSet:
    def test_gaps_wrap(self):
        s = PointSampleSet([1.0, 2.5, 7.0], [0, 0, 0], 8.0)
        np.testing.assert_allclose(s.gaps, [2.0, 1.5, 4.5])
        assert s.max_gap == 4.5 and len(s) == 3

    def test_validation(self):
        with pytest.raises(InvalidSamplingError):
            PointSampleSet([1.0, 1.0], [0, 0], 8.0)
        with pytest.raises(InvalidSamplingError):
            PointSampleSet([1.0, 8.0], [0, 0], 8.0)
        with pytest.raises(InvalidSamplingError):
            linear_interpolate(PointSampleSet([1.0], [0.0], 8.0))


class TestPiecewiseLinear:
    @pytest.fixture
    def pl(self):
        return PiecewiseLinear(np.array([0.5, 2.0, 3.0, 6.5]), np.array([1.0, -1.0, 2.0, 0.5]), 8.0)

    def test_knots_and_midpoints(self, pl):
        np.testing.assert_allclose(pl(pl.knots), pl.knot_values)
        assert pl(1.25) == pytest.approx(0.0)
        # wrapped segment from 6.5 to 8.5
        assert pl(0.0) == pytest.approx(0.5 + (1.0 - 0.5) * 1.5 / 2.0)
        assert pl(8.0 + 1.25) == pytest.approx(pl(1.25))

    def test_jumps_sum_to_zero(self, pl):
        assert abs(pl.jumps.sum()) < 1e-14
        np.testing.assert_allclose(pl.derivative([1.0, 2.5]), [-4 / 3, 3.0])

    def test_fourier_vs_quadrature(self, pl):
        U = pl.fourier(3)
        for m in range(4):
            w = 2 * np.pi * m / 8.0
            re = sum(quad(lambda t: pl(t) * np.cos(w * t), a, b)[0]
                     for a, b in zip([0.0, 0.5, 2.0, 3.0, 6.5], [0.5, 2.0, 3.0, 6.5, 8.0]))
            im = sum(quad(lambda t: -pl(t) * np.sin(w * t), a, b)[0]
                     for a, b in zip([0.0, 0.5, 2.0, 3.0, 6.5], [0.5, 2.0, 3.0, 6.5, 8.0]))
            assert U[m] == pytest.approx(re + 1j * im, abs=1e-10)


class TestSobolevInner:
    def test_bandlimited_pair(self, grid32):
        x, y = random_bandlimited(1, grid32), random_bandlimited(2, grid32)
        ref = np.sum(spectral_derivative(x) * spectral_derivative(y)) / grid32.samples_per_unit
        assert sobolev_inner(x, y) == pytest.approx(ref, rel=1e-10)

    def test_piecewise_pairs(self):
        p = PiecewiseLinear(np.array([0.5, 2.0, 3.0, 6.5]), np.array([1.0, -1.0, 2.0, 0.5]), 8.0)
        q = PiecewiseLinear(np.array([1.0, 4.0, 7.0]), np.array([0.0, 1.0, -1.0]), 8.0)
        ref = sum(quad(lambda t: p.derivative(t)[0] * q.derivative(t)[0], a, b)[0]
                  for a, b in zip([0, .5, 1, 2, 3, 4, 6.5, 7], [.5, 1, 2, 3, 4, 6.5, 7, 8]))
        assert sobolev_inner(p, q) == pytest.approx(ref, rel=1e-12)
        direct = np.sum(p.slopes ** 2 * p.gaps)
        assert sobolev_inner(p, p) == pytest.approx(direct)

    def test_mixed_by_parts(self, grid32):
        x = random_bandlimited(3, grid32)
        t = np.sort(np.random.default_rng(3).uniform(0, 32, 12))
        p = PiecewiseLinear(t, np.random.default_rng(4).standard_normal(12), 32.0)
        dx = spectral_derivative(x)
        ref = np.sum(p.derivative(grid32.times) * dx) / grid32.samples_per_unit
        # grid rule on a piecewise-constant factor: O(1/G) accuracy
        assert sobolev_inner(p, x) == pytest.approx(ref, abs=0.05 * np.abs(ref) + 0.05)
        assert sobolev_inner(x, p) == pytest.approx(sobolev_inner(p, x))

    def test_norm_of_difference_and_period_check(self, grid32):
        x = random_bandlimited(5, grid32)
        s = SobolevSignal(x) - x
        assert sobolev_norm(s) < 1e-12
        with pytest.raises(GridMismatchError):
            sobolev_inner(PiecewiseLinear(np.array([0.0, 1.0]), np.zeros(2), 8.0), x)


class TestDecomposition:
    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000), st.integers(5, 60))
    def test_structure(self, seed, n):
        g = Grid(32.0)
        x = random_bandlimited(seed, g)
        t = np.sort(np.random.default_rng(seed).choice(np.arange(0, 32, 1 / 64), n, replace=False))
        d = check_sobolev_decomposition(t, x)
        assert d["interp_error"] == 0.0
        assert d["knot_spread"] <= 1e-10 * max(1.0, np.abs(x.values).max())
        assert d["orthogonality"] <= 1e-10


class TestModel:
    @pytest.fixture
    def model(self, grid32):
        return PointSamplingModel(instants(0, 32.0, 0.2, 0.8), grid32)

    def test_P_matches_band_coords(self, model):
        c = np.random.default_rng(6).standard_normal(model.n_samples)
        pl = PiecewiseLinear(model.instants, c, 32.0)
        ref = pl.band_coords(model.basis)
        np.testing.assert_allclose(model.pbl_coords(c), ref, atol=1e-12)
        np.testing.assert_allclose(model.P @ c, ref, atol=1e-12)

    def test_residual_is_sobolev_norm(self, model, grid32):
        x = random_bandlimited(7, grid32)
        v = np.random.default_rng(7).standard_normal(model.n_samples)
        r = v - model.E @ x.coords
        ref = sobolev_norm(PiecewiseLinear(model.instants, r, 32.0))
        assert model.residual_D(v, x.coords) == pytest.approx(ref)

    def test_pbq_closed_form(self):
        g = Grid(129.0)
        model = PointSamplingModel(instants(1, 129.0, 0.3, 0.9), g)
        for k in (0, 17, model.n_samples - 1):
            direct = model.basis.values(model.P[:, k])
            np.testing.assert_allclose(pbq_closed_form(k, model.instants, g), direct, atol=1e-4)

    def test_spl_closed_form(self):
        g = Grid(129.0)
        model = PointSamplingModel(instants(2, 129.0, 0.3, 0.9), g)
        np.testing.assert_allclose(spl_closed_form(model.instants, 129.0), model.spl, atol=1e-4)

    def test_grid_checks(self, grid32):
        s = PointSampleSet([1.0, 2.0], [0.0, 0.0], 16.0)
        with pytest.raises(GridMismatchError):
            point_model(s, grid=grid32)
        with pytest.raises(ValueError):
            point_model(s)


class TestGrochenig:
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_perfect_reconstruction(self, grid32, seed):
        x = random_bandlimited(10 + seed, grid32)
        s = samples_of(x, instants(seed, 32.0, 0.3, 0.9))
        assert s.max_gap <= 0.9
        y, rep = groch_iterate(s, n_iters=400, truth=x, grid=grid32)
        assert np.linalg.norm(y.values - x.values) < 1e-6 * np.linalg.norm(x.values)
        assert rep.err_l2[-1] < 1e-6 * rep.err_l2[0]
        assert rep.err_sobolev[-1] < 1e-6 * rep.err_sobolev[0]

    def test_continuous_equals_discrete(self, grid32):
        x = random_bandlimited(13, grid32)
        s = samples_of(x, instants(3, 32.0, 0.2, 1.1))
        x0 = random_bandlimited(14, grid32) * 0.5
        a, _ = groch_iterate(s, x0, n_iters=25)
        b, traj = groch_discrete_iterate(s, x0, n_iters=25, return_trajectory=True)
        np.testing.assert_allclose(a.values, b.values, atol=1e-10)
        np.testing.assert_allclose(traj[-1], b.coords, atol=1e-12)
        assert len(traj) == 26

    def test_closed_form_matrix(self):
        g = Grid(129.0)
        x = random_bandlimited(15, g)
        s = samples_of(x, instants(4, 129.0, 0.3, 0.9))
        a = groch_discrete_iterate(s, n_iters=30, grid=g)
        b = groch_discrete_iterate(s, n_iters=30, grid=g, matrix="closed_form")
        assert np.linalg.norm(a.values - b.values) < 1e-3 * np.linalg.norm(a.values)
        with pytest.raises(ValueError):
            groch_discrete_iterate(s, n_iters=1, grid=g, matrix="nope")

    def test_noisy_limit(self, grid32):
        x = random_bandlimited(16, grid32)
        s = samples_of(x, instants(5, 32.0, 0.1, 0.6), noise=(30.0, 5))
        x0 = random_bandlimited(17, grid32) * 0.1
        y, _ = groch_iterate(s, x0, n_iters=1500, tol=1e-14)
        lim = groch_limit(s, x0)
        assert np.linalg.norm(y.values - lim.values) < 1e-8 * np.linalg.norm(lim.values)

    def test_underdetermined_limit_closest_to_x0(self, grid32):
        x = random_bandlimited(18, grid32)
        s = samples_of(x, np.arange(0.5, 32, 2.0))
        x0 = random_bandlimited(19, grid32)
        lim = groch_limit(s, x0)
        np.testing.assert_allclose(lim.at(s.instants), s.values, atol=1e-9)
        rng = np.random.default_rng(19)
        d0 = sobolev_norm(lim - x0)
        model = point_model(s, x0)
        # alternatives: lim plus band-limited elements vanishing at the instants
        N = np.linalg.svd(model.E[:, 1:])[2][model.n_samples:]
        for _ in range(20):
            z = np.zeros(model.n_coords)
            z[1:] = rng.standard_normal(N.shape[0]) @ N
            alt = lim + model.to_signal(z)
            assert sobolev_norm(alt - x0) >= d0 - 1e-9


class TestGrochenigProperties:
    def test_truth_is_fixed_point(self, grid32):
        x = random_bandlimited(20, grid32)
        s = samples_of(x, instants(6, 32.0, 0.3, 1.4))
        y, rep = groch_iterate(s, x, n_iters=5, truth=x)
        np.testing.assert_allclose(y.values, x.values, atol=1e-12)
        assert np.max(rep.residual) < 1e-12

    def test_sub_nyquist_limit_closest_to_x0(self, grid32):
        x = random_bandlimited(21, grid32)
        s = samples_of(x, instants(7, 32.0, 0.9, 1.6))
        assert s.max_gap > 1
        x0 = random_bandlimited(22, grid32) * 0.5
        y, _ = groch_iterate(s, x0, n_iters=8000)
        lim = groch_limit(s, x0)
        assert sobolev_norm(y - lim) <= 1e-4 * sobolev_norm(lim)

    def test_forms_agree_at_every_iterate(self, grid32):
        x = random_bandlimited(23, grid32)
        s = samples_of(x, instants(8, 32.0, 0.2, 1.2))
        x0 = random_bandlimited(24, grid32) * 0.3
        _, traj = groch_discrete_iterate(s, x0, n_iters=100, return_trajectory=True)
        for n in (0, 1, 10, 50, 100):
            a, _ = groch_iterate(s, x0, n_iters=n)
            np.testing.assert_allclose(traj[n], a.coords, atol=1e-10)

    def test_partition_of_unity(self):
        g = Grid(129.0)
        t = instants(9, 129.0, 0.3, 0.9)
        total = sum(pbq_closed_form(k, t, g) for k in range(len(t)))
        np.testing.assert_allclose(total, 1.0, atol=1e-3)

    def test_translation_covariance(self, grid32):
        t = instants(10, 32.0, 0.3, 0.9)
        shift = 2.0
        # shifting by whole grid steps keeps the instants in [0, T) after a roll
        ts = np.sort(np.mod(t + shift, 32.0))
        k = 5
        ks = int(np.searchsorted(ts, np.mod(t[k] + shift, 32.0)))
        a = pbq_closed_form(k, t, grid32)
        b = pbq_closed_form(ks, ts, grid32)
        np.testing.assert_allclose(np.roll(a, int(shift * grid32.samples_per_unit)), b, atol=1e-9)

    def test_constant_shift_keeps_sobolev_curve(self, grid32):
        x = random_bandlimited(25, grid32)
        s = samples_of(x, instants(11, 32.0, 0.2, 0.8))
        x0 = random_bandlimited(26, grid32) * 0.2
        x0c = x0 + BandlimitedSignal(grid32, np.full(grid32.n_points, 0.7))
        _, r1 = groch_iterate(s, x0, n_iters=30, truth=x)
        _, r2 = groch_iterate(s, x0c, n_iters=30, truth=x)
        np.testing.assert_allclose(r1.err_sobolev, r2.err_sobolev, rtol=1e-10, atol=1e-12)

    def test_constant_has_zero_seminorm(self, grid32):
        c = BandlimitedSignal(grid32, np.full(grid32.n_points, 3.0))
        assert sobolev_inner(c, random_bandlimited(27, grid32)) == pytest.approx(0.0, abs=1e-12)
