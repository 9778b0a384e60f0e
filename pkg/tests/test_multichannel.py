import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pocsrec.encoders import integral_encode, multichannel_encode
from pocsrec.errors import DimensionMismatchError, GridMismatchError, RankDeficientError
from pocsrec.kernel_space import KernelFamily, SamplingOperator
from pocsrec.multichannel import (MixingMatrix, MultiChannelOperator, MultiChannelSignal,
                                  mc_gram_entry, mc_inner, mc_reconstruct, project_U_separable,
                                  source_estimate, zoh_output)
from pocsrec.pocs import Problem, iterate
from pocsrec.signal import Grid, harmonic_basis, random_bandlimited


def sources(grid, seeds):
    return MultiChannelSignal(grid, np.array([random_bandlimited(s, grid).values for s in seeds]))


def boundaries(rng, period, n_channels, low=0.6, high=1.0):
    out = []
    for _ in range(n_channels):
        b = np.concatenate(([0.0], np.cumsum(rng.uniform(low, high, int(2 * period / low)))))
        out.append(b[b <= period])
    return out


class TestMixing:
    def test_projector(self):
        A = np.random.default_rng(0).standard_normal((4, 2))
        m = MixingMatrix(A)
        np.testing.assert_allclose(m.proj @ m.proj, m.proj, atol=1e-13)
        np.testing.assert_allclose(m.proj @ A, A, atol=1e-13)
        np.testing.assert_allclose(m.pinv @ A, np.eye(2), atol=1e-13)
        assert (m.M, m.N) == (4, 2)

    def test_rank_deficient(self):
        with pytest.raises(RankDeficientError):
            MixingMatrix([[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]])
        with pytest.raises(RankDeficientError):
            MixingMatrix(np.ones((2, 3)))

    def test_csv_roundtrip(self, tmp_path):
        A = np.random.default_rng(1).standard_normal((3, 2))
        MixingMatrix(A).to_csv(tmp_path / "A.csv")
        np.testing.assert_allclose(MixingMatrix.from_csv(tmp_path / "A.csv").A, A, rtol=1e-11)


class TestSignals:
    def test_inner_product(self):
        g = Grid(8.0)
        X = sources(g, [1, 2])
        ref = sum(np.sum(X.values[i] ** 2) / g.samples_per_unit for i in range(2))
        assert mc_inner(X, X) == pytest.approx(ref)
        assert X.norm() == pytest.approx(np.sqrt(ref))

    def test_inner_checks(self):
        with pytest.raises(DimensionMismatchError):
            mc_inner(sources(Grid(8.0), [1]), sources(Grid(8.0), [1, 2]))
        with pytest.raises(GridMismatchError):
            mc_inner(sources(Grid(8.0), [1]), sources(Grid(4.0, 32), [1]))

    def test_from_sources_in_U(self):
        g = Grid(8.0)
        A = np.random.default_rng(2).standard_normal((3, 2))
        X = MultiChannelSignal.from_sources(A, sources(g, [3, 4]))
        assert X.in_U(A)
        assert not (X + MultiChannelSignal(g, np.vstack([np.ones(g.n_points), np.zeros((2, g.n_points))]))).in_U(A)
        np.testing.assert_allclose(source_estimate(X, A).values, sources(g, [3, 4]).values, atol=1e-12)

    def test_source_count(self):
        with pytest.raises(DimensionMismatchError):
            MultiChannelSignal.from_sources(np.ones((3, 2)) + np.eye(3, 2), [random_bandlimited(0, Grid(8.0))])


class TestSeparableProjection:
    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 10_000))
    def test_matches_brute_force(self, seed):
        rng = np.random.default_rng(seed)
        g = Grid(8.0)
        A = rng.standard_normal((3, 2))
        v = rng.standard_normal(3)
        f = rng.standard_normal(g.n_points)
        P = project_U_separable(v, f, A, g)
        basis = harmonic_basis(g)
        E = basis.values(np.eye(basis.size))
        cols = np.array([np.outer(A[:, i], e).ravel() for i in range(2) for e in E]).T
        coef = np.linalg.lstsq(cols, np.outer(v, f).ravel(), rcond=None)[0]
        np.testing.assert_allclose(P.values.ravel(), cols @ coef, atol=1e-10)

    def test_lands_in_U(self):
        rng = np.random.default_rng(3)
        g = Grid(8.0)
        A = rng.standard_normal((3, 2))
        P = project_U_separable(rng.standard_normal(3), rng.standard_normal(g.n_points), A, g)
        assert P.in_U(A)
        x = random_bandlimited(5, g)
        v = MixingMatrix(A).proj @ rng.standard_normal(3)
        np.testing.assert_allclose(project_U_separable(v, x, A).values, np.outer(v, x.values),
                                   atol=1e-12)

    def test_requires_grid(self):
        with pytest.raises(ValueError):
            project_U_separable([1.0], np.zeros(32), [[1.0]])


class TestOperator:
    @pytest.fixture
    def setup(self):
        rng = np.random.default_rng(4)
        g = Grid(16.0)
        A = rng.standard_normal((3, 2))
        return g, A, MultiChannelOperator(g, boundaries(rng, 16.0, 3), A)

    def test_adjoint(self, setup):
        g, A, op = setup
        rng = np.random.default_rng(5)
        a = rng.standard_normal(op.n_coords)
        c = rng.standard_normal(op.n_samples)
        lhs = np.sum(op.apply_coords(a) * c / op.weights)
        assert lhs == pytest.approx(a @ op.adjoint_coords(c), rel=1e-12)

    def test_gram_is_VVstar(self, setup):
        g, A, op = setup
        c = np.random.default_rng(6).standard_normal(op.n_samples)
        np.testing.assert_allclose(op.gram @ c, op.apply_coords(op.adjoint_coords(c)), atol=1e-12)

    def test_zoh_output_is_adjoint(self, setup):
        g, A, op = setup
        c = np.random.default_rng(7).standard_normal(op.n_samples)
        np.testing.assert_allclose(zoh_output(c, op.partition, A, g).values,
                                   op.adjoint_apply(c).values, atol=1e-12)

    def test_gram_entry_exact(self, setup):
        g, A, op = setup
        part = op.partition
        n0 = len(part[0]) - 1
        raw = mc_gram_entry(1, 2, 0, 3, part, A, g, method="exact")
        row = n0 + 2
        assert raw / op.weights[3] == pytest.approx(op.gram[row, 3], rel=1e-10)

    def test_closed_form_gram_long_period(self):
        rng = np.random.default_rng(8)
        g = Grid(129.0)
        A = rng.standard_normal((2, 2))
        bnds = [np.sort(rng.uniform(0, 129, 6)) for _ in range(2)]
        op = MultiChannelOperator(g, bnds, A)
        W = op.weights[None, :]
        np.testing.assert_allclose(op.gram_closed_form() * W, op.gram * W, atol=1e-4)
        raw = mc_gram_entry(0, 1, 1, 2, bnds, A)
        assert raw == pytest.approx(op.gram[1, 7] * op.weights[7], abs=1e-4)

    def test_boundary_count(self):
        with pytest.raises(DimensionMismatchError):
            MultiChannelOperator(Grid(8.0), [np.linspace(0, 8, 5)], np.ones((2, 1)))


class TestReconstruction:
    def test_recovers_channels_and_sources(self):
        rng = np.random.default_rng(9)
        g = Grid(16.0)
        A = rng.standard_normal((3, 2))
        S = sources(g, [20, 21])
        X = MultiChannelSignal.from_sources(A, S)
        streams = multichannel_encode(X, boundaries(rng, 16.0, 3))
        Y = mc_reconstruct(streams, A, n_iters=5000, grid=g)
        assert np.linalg.norm(Y.values - X.values) < 1e-6 * np.linalg.norm(X.values)
        Ys = source_estimate(Y, A)
        assert np.linalg.norm(Ys.values - S.values) < 1e-6 * np.linalg.norm(S.values)

    def test_closed_form_gram_path(self):
        rng = np.random.default_rng(10)
        g = Grid(129.0)
        A = rng.standard_normal((2, 1))
        X = MultiChannelSignal.from_sources(A, [random_bandlimited(22, g)])
        streams = multichannel_encode(X, boundaries(rng, 129.0, 2, 0.5, 0.8))
        Y, rep = mc_reconstruct(streams, A, n_iters=100, grid=g, gram="closed_form",
                                return_report=True, tol=0)
        Z = mc_reconstruct(streams, A, n_iters=100, grid=g, tol=0)
        assert np.linalg.norm(Y.values - Z.values) < 1e-3 * np.linalg.norm(Z.values)
        assert rep.residual[-1] < 1e-2 * rep.residual[0]

    def test_single_channel_bit_identical(self):
        rng = np.random.default_rng(11)
        g = Grid(32.0)
        x = random_bandlimited(23, g)
        b = np.sort(rng.uniform(0, 32, 30))
        s = integral_encode(x, b)
        Y = mc_reconstruct([s], [[1.0]], n_iters=50, grid=g, tol=0)
        op = SamplingOperator(KernelFamily(g, b))
        ys, _, _ = iterate(Problem(op, s.values), "discrete_time", 50, tol=0, record=False)
        np.testing.assert_array_equal(Y.values[0], ys.values)

    def test_empty_streams(self):
        with pytest.raises(ValueError):
            mc_reconstruct([], [[1.0]], grid=Grid(8.0))
