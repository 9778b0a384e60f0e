import numpy as np
import pytest

from pocsrec.baselines import (BaselineConfig, frame_bounds, frame_iterate, kaczmarz_iterate,
                               optimal_relaxation, run_baseline)
from pocsrec.encoders import point_sample
from pocsrec.signal import harmonic_basis, project_bandlimited, random_bandlimited
from pocsrec.sobolev import PointSampleSet, point_model


def dense_samples(x, seed, low=0.1, high=0.4, noise=None):
    g = np.random.default_rng(seed).uniform(low, high, 400)
    t = np.concatenate(([0.0], np.cumsum(g)))
    t = t[t < x.grid.period]
    s = point_sample(x, t, noise=noise)
    return PointSampleSet(s.t, s.values, x.grid.period)


def rel(a, b):
    return np.linalg.norm(a.values - b.values) / np.linalg.norm(b.values)


class TestFrameBounds:
    def test_match_eigenvalues(self, grid32):
        s = dense_samples(random_bandlimited(0, grid32), 0)
        model = point_model(s, grid=grid32)
        ev = np.linalg.eigvalsh(model.E.T @ model.E)
        low, top = frame_bounds(model)
        assert top == pytest.approx(ev[-1], rel=1e-8)
        assert low == pytest.approx(ev[0], rel=1e-4)
        assert optimal_relaxation(model) == pytest.approx(2 / (ev[0] + ev[-1]), rel=1e-4)


class TestFrame:
    def test_noise_free_recovery(self, grid32):
        x = random_bandlimited(1, grid32)
        y, rep = frame_iterate(dense_samples(x, 1), n_iters=300, grid=grid32, truth=x)
        assert rel(y, x) < 1e-8
        assert rep.stop_reason == "max_iters"
        assert np.all(np.diff(rep.err_l2) <= 1e-12)

    def test_divergence_flag(self, grid32):
        x = random_bandlimited(2, grid32)
        y, rep = frame_iterate(dense_samples(x, 2), n_iters=500, relaxation=1.0, grid=grid32)
        assert rep.stop_reason == "diverged"
        assert np.all(np.isfinite(y.values))
        assert len(rep.n) < 501

    def test_noisy_limit_is_least_squares(self, grid32):
        x = random_bandlimited(3, grid32)
        s = dense_samples(x, 3, noise=(30.0, 3))
        model = point_model(s, grid=grid32)
        y, _ = frame_iterate(s, n_iters=2000, model=model)
        ls = np.linalg.lstsq(model.E, s.values, rcond=None)[0]
        np.testing.assert_allclose(y.coords, ls, atol=1e-9)


class TestKaczmarz:
    @pytest.mark.parametrize("order", ["cyclic", "random"])
    def test_noise_free_recovery(self, grid32, order):
        x = random_bandlimited(4, grid32)
        y, rep = kaczmarz_iterate(dense_samples(x, 4), n_sweeps=200, order=order, grid=grid32,
                                  truth=x)
        assert rel(y, x) < 1e-8
        assert len(rep.n) == 201

    def test_sweep_matches_row_loop(self, grid32):
        x = random_bandlimited(5, grid32)
        s = dense_samples(x, 5)
        model = point_model(s, grid=grid32)
        E = model.E
        a = np.zeros(model.n_coords)
        for _ in range(2):
            for k in range(model.n_samples):
                a = a + 0.7 * (s.values[k] - E[k] @ a) * E[k] / (E[k] @ E[k])
        y, _ = kaczmarz_iterate(s, n_sweeps=2, relaxation=0.7, model=model)
        np.testing.assert_allclose(y.coords, a, atol=1e-12)

    def test_random_is_seeded(self, grid32):
        x = random_bandlimited(6, grid32)
        s = dense_samples(x, 6)
        a, _ = kaczmarz_iterate(s, n_sweeps=3, order="random", seed=9, grid=grid32)
        b, _ = kaczmarz_iterate(s, n_sweeps=3, order="random", seed=9, grid=grid32)
        c, _ = kaczmarz_iterate(s, n_sweeps=3, order="random", seed=10, grid=grid32)
        np.testing.assert_array_equal(a.values, b.values)
        assert not np.array_equal(a.values, c.values)

    def test_unknown_order(self, grid32):
        s = dense_samples(random_bandlimited(0, grid32), 0)
        with pytest.raises(ValueError):
            kaczmarz_iterate(s, order="sideways", grid=grid32)


class TestDispatch:
    def test_config_validation(self):
        with pytest.raises(ValueError):
            BaselineConfig("nope")
        with pytest.raises(ValueError):
            BaselineConfig("frame", relaxation=-1.0)

    @pytest.mark.parametrize("method", ["frame", "kaczmarz_cyclic", "kaczmarz_random"])
    def test_run_baseline(self, grid32, method):
        x = random_bandlimited(7, grid32)
        s = dense_samples(x, 7)
        y, _ = run_baseline(BaselineConfig(method, seed=1), s, n_iters=5, grid=grid32)
        if method == "frame":
            ref, _ = frame_iterate(s, n_iters=5, grid=grid32)
        else:
            ref, _ = kaczmarz_iterate(s, n_sweeps=5, order=method.split("_")[1], seed=1,
                                      grid=grid32)
        np.testing.assert_array_equal(y.values, ref.values)


class TestProperties:
    def test_truth_fixed_point_and_zero_relaxation(self, grid32):
        x = random_bandlimited(8, grid32)
        s = dense_samples(x, 8)
        y, _ = frame_iterate(s, x, n_iters=10)
        np.testing.assert_allclose(y.values, x.values, atol=1e-12)
        x0 = random_bandlimited(9, grid32)
        y, _ = frame_iterate(s, x0, n_iters=10, relaxation=0.0)
        np.testing.assert_array_equal(y.coords, x0.coords)
        k, _ = kaczmarz_iterate(s, x, n_sweeps=3)
        np.testing.assert_allclose(k.values, x.values, atol=1e-12)

    def test_row_update_is_exact_projection(self, grid32):
        x = random_bandlimited(10, grid32)
        s = PointSampleSet([3.0, 11.5], [0.8, -0.3], 32.0)
        model = point_model(s, grid=grid32)
        y, _ = kaczmarz_iterate(s, None, n_sweeps=1, model=model)
        # the last touched row is satisfied exactly
        assert abs(model.E[-1] @ y.coords - s.values[-1]) <= 1e-12
        assert x.grid == y.grid

    def test_square_system(self, grid32):
        x = random_bandlimited(11, grid32)
        n = harmonic_basis(grid32).size
        t = (np.arange(n) + np.random.default_rng(11).uniform(-0.25, 0.25, n)) * 32.0 / n + 0.3
        s = PointSampleSet(t, point_sample(x, t).values, 32.0)
        model = point_model(s, grid=grid32)
        assert model.E.shape[0] == model.E.shape[1]
        ref = np.linalg.solve(model.E, s.values)
        y, _ = kaczmarz_iterate(s, n_sweeps=3000, model=model)
        assert np.linalg.norm(y.coords - ref) <= 1e-6 * np.linalg.norm(ref)

    def test_iterates_stay_in_band(self, grid32):
        x = random_bandlimited(12, grid32)
        s = dense_samples(x, 12, noise=(20.0, 1))
        for y in (frame_iterate(s, n_iters=20, grid=grid32)[0],
                  kaczmarz_iterate(s, n_sweeps=5, grid=grid32)[0]):
            np.testing.assert_allclose(project_bandlimited(y.values, grid32), y.values, atol=1e-10)
