import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from wtgrad import (CdfRep, QuantileGrid, QuantileRep, SupportInterval, TangentVector,
                    cdf_from_quantile, empirical_quantiles, exp_map, linearize_cdf, log_map,
                    parallel_transport, pushforward_monotone, quantile_from_cdf, tangent_inner,
                    tangent_norm, transport_map_eval, wasserstein_distance)
from wtgrad.errors import (EmptySample, GridMismatch, InvalidIncrement, OutOfSupport,
                           ValueOutsideSupport, WtgError)
from wtgrad.simulation import TruncatedGaussianParams, truncnorm_quantile

BOX = SupportInterval(-4.0, 4.0)
finite = st.floats(-4.0, 4.0, allow_nan=False, allow_subnormal=False)


@st.composite
def quantile_reps(draw, m=None, support=BOX, atoms=True):
    m = m or draw(st.integers(1, 40))
    if atoms and draw(st.booleans()):
        # coarse lattice values produce ties, i.e. atoms
        vals = draw(st.lists(st.integers(-8, 8), min_size=m, max_size=m))
        vals = np.array(vals, dtype=float) * 0.5
    else:
        vals = np.array(draw(st.lists(finite, min_size=m, max_size=m)))
    return QuantileRep(QuantileGrid(m), np.sort(vals), support)


@st.composite
def strict_reps(draw):
    m = draw(st.integers(1, 40))
    steps = draw(st.lists(st.floats(1e-3, 1.0), min_size=m, max_size=m))
    vals = np.cumsum(steps)
    vals = BOX.lo + (vals - vals[0]) * (BOX.width / max(vals[-1] - vals[0], 1.0))
    return QuantileRep(QuantileGrid(m), vals, BOX)


@st.composite
def rep_tuples(draw, k):
    m = draw(st.integers(1, 40))
    return [draw(quantile_reps(m=m)) for _ in range(k)]


class TestTypes:

    def test_support_must_be_ordered(self):
        with pytest.raises(WtgError):
            SupportInterval(1.0, 1.0)
        with pytest.raises(WtgError):
            SupportInterval(0.0, np.inf)

    def test_grid_nodes(self):
        assert_allclose(QuantileGrid(4).nodes, [0.125, 0.375, 0.625, 0.875], rtol=0, atol=0)

    def test_rep_rejects_decreasing(self):
        g = QuantileGrid(3)
        with pytest.raises(WtgError):
            QuantileRep(g, [0.0, 0.5, 0.4], SupportInterval(0.0, 1.0))
        with pytest.raises(WtgError):
            QuantileRep(g, [0.0, 0.5, 1.5], SupportInterval(0.0, 1.0))

    def test_cdf_rep_contract(self):
        with pytest.raises(WtgError):
            CdfRep([0.0, 1.0], [0.2, 0.9])
        with pytest.raises(WtgError):
            CdfRep([0.0, 0.0], [0.0, 1.0])
        c = CdfRep([0.0, 1.0], [0.0, 1.0])
        assert_allclose(c.evaluate([-1.0, 0.25, 2.0]), [0.0, 0.25, 1.0])

    def test_values_are_read_only(self, grid100, unit):
        q = QuantileRep.uniform(0.0, 1.0, grid100, unit)
        with pytest.raises(ValueError):
            q.values[0] = 0.5


class TestEmpiricalQuantiles:

    def test_order_statistics(self):
        q = empirical_quantiles([4, 2, 1, 3], QuantileGrid(4), SupportInterval(0, 5))
        assert_array_equal(q.values, [1, 2, 3, 4])

    @pytest.mark.parametrize("m", [1, 7, 64])
    def test_constant_sample(self, m):
        q = empirical_quantiles(np.full(13, 0.3), QuantileGrid(m), SupportInterval(0, 1))
        assert np.all(q.values == 0.3)

    def test_uniform_sample(self, rng, unit):
        grid = QuantileGrid(100)
        q = empirical_quantiles(rng.uniform(size=10_000), grid, unit)
        assert np.max(np.abs(q.values - grid.nodes)) <= 0.05

    def test_errors(self, unit, grid100):
        with pytest.raises(EmptySample):
            empirical_quantiles([], grid100, unit)
        with pytest.raises(ValueOutsideSupport):
            empirical_quantiles([0.5, 1.2], grid100, unit)

    def test_clip(self, unit):
        q = empirical_quantiles([-0.5, 0.5, 1.2], QuantileGrid(3), unit, clip=True)
        assert_array_equal(q.values, [0.0, 0.5, 1.0])


class TestConversions:

    @pytest.mark.parametrize("m", [10, 100, 1000])
    def test_identity_cdf(self, m, unit):
        grid = QuantileGrid(m)
        F = cdf_from_quantile(QuantileRep(grid, grid.nodes, unit))
        assert np.max(np.abs(F.evaluate(F.knots) - F.knots)) <= 1 / (2 * m)

    def test_point_mass(self, grid100, unit):
        F = cdf_from_quantile(QuantileRep(grid100, np.full(100, 0.4), unit))
        assert F.evaluate(0.4 - 1e-6) == 0.0
        assert F.evaluate(0.4) == 1.0

    def test_uniform_0_2(self, grid100):
        support = SupportInterval(0.0, 2.0)
        F = cdf_from_quantile(QuantileRep(grid100, 2 * grid100.nodes, support))
        assert abs(F.evaluate(1.0) - 0.5) <= 1 / 200

    def test_uniform_cdf_inverts_to_nodes(self, grid100, unit):
        q = quantile_from_cdf(CdfRep([0.0, 1.0], [0.0, 1.0]), grid100, unit)
        assert_allclose(q.values, grid100.nodes, rtol=0, atol=1e-15)

    def test_plateau_takes_left_end(self, unit):
        # F = 0.5 on [0.3, 0.6]; Q(0.5) = inf{x : F(x) >= 0.5} = 0.3
        c = CdfRep([0.0, 0.3, 0.6, 1.0], [0.0, 0.5, 0.5, 1.0])
        q = quantile_from_cdf(c, QuantileGrid(1), unit)
        assert q.values[0] == pytest.approx(0.3, abs=1e-15)

    def test_hand_inversion(self):
        c = CdfRep([0.0, 1.0, 2.0], [0.0, 0.25, 1.0])
        q = quantile_from_cdf(c, QuantileGrid(4), SupportInterval(0.0, 2.0))
        assert q.values[2] == pytest.approx(1.5, abs=1e-15)

    @given(strict_reps())
    def test_round_trip_strict(self, q):
        back = quantile_from_cdf(cdf_from_quantile(q), q.grid)
        # interior nodes invert exactly; an end clipped onto the support is an atom
        assert_allclose(back.values[1:-1], q.values[1:-1], rtol=0, atol=1e-12 * q.support.width)
        assert_allclose(back.values, q.values, rtol=0, atol=2e-9 * q.support.width)

    @given(quantile_reps())
    def test_round_trip_with_atoms(self, q):
        # atoms are steep ramps of width 1e-9 * diam
        back = quantile_from_cdf(cdf_from_quantile(q), q.grid)
        assert np.max(np.abs(back.values - q.values)) <= 2e-9 * q.support.width

    @given(quantile_reps())
    def test_galois_connection(self, q):
        # F(x) >= u_j  <=>  Q(u_j) <= x, allowing one grid cell of slack
        F = cdf_from_quantile(q)
        x = F.knots
        Fx = F.evaluate(x)
        u, Q = q.grid.nodes, q.values
        cell = 1.0 / q.grid.m
        lhs = Fx[:, None] >= u[None, :]
        rhs = Q[None, :] <= x[:, None]
        tol = 1e-9 * q.support.width
        assert np.all(~lhs | (Q[None, :] <= x[:, None] + tol)
                      | (np.r_[-np.inf, Q[:-1]][None, :] <= x[:, None]))
        assert np.all(~rhs | (Fx[:, None] >= u[None, :] - cell))


class TestDistance:

    def test_examples(self, unit):
        grid = QuantileGrid(1000)
        s = SupportInterval(0.0, 2.0)
        p = QuantileRep.uniform(0.0, 1.0, grid, s)
        assert wasserstein_distance(p, p) == 0.0
        assert wasserstein_distance(p, QuantileRep.uniform(0.5, 1.5, grid, s)) == 0.5
        assert wasserstein_distance(p, QuantileRep.uniform(0.0, 2.0, grid, s)) == pytest.approx(
            np.sqrt(1 / 3), abs=1e-3)

    def test_grid_mismatch(self, unit):
        a = QuantileRep.uniform(0, 1, QuantileGrid(10), unit)
        b = QuantileRep.uniform(0, 1, QuantileGrid(11), unit)
        with pytest.raises(GridMismatch):
            wasserstein_distance(a, b)

    @given(rep_tuples(3))
    def test_metric_axioms(self, reps):
        p, q, r = reps
        d = wasserstein_distance
        assert d(p, p) == 0.0
        assert d(p, q) == d(q, p)
        assert d(p, q) >= 0.0
        assert d(p, r) <= (d(p, q) + d(q, r)) * (1 + 1e-12) + 1e-300

    @given(rep_tuples(2), st.integers(-64, 64))
    def test_translation_equivariance(self, reps, k):
        # dyadic values and shifts keep every sum exact
        p, q = (QuantileRep(r.grid, np.round(r.values * 64) / 64, SupportInterval(-8.0, 8.0))
                for r in reps)
        c = k / 64
        shift = lambda r: QuantileRep(r.grid, r.values + c, r.support)  # noqa: E731
        assert wasserstein_distance(shift(p), shift(q)) == wasserstein_distance(p, q)


class TestTransportMap:

    def test_identity(self, grid100, unit):
        p = QuantileRep.from_function(lambda u: u ** 2, grid100, unit)
        x = np.linspace(0.01, 0.99, 50)
        assert_allclose(transport_map_eval(p, p, x), x, atol=1e-3)

    def test_affine_between_uniforms(self, grid100):
        s = SupportInterval(-1.0, 4.0)
        src = QuantileRep.uniform(0.0, 1.0, grid100, s)
        dst = QuantileRep.uniform(-0.5, 3.0, grid100, s)
        x = np.linspace(0.0, 1.0, 21)
        assert_allclose(transport_map_eval(src, dst, x), -0.5 + 3.5 * x, atol=1e-12)

    def test_worked_value(self, grid100):
        s = SupportInterval(0.0, 2.0)
        src = QuantileRep.uniform(0.0, 2.0, grid100, s)
        dst = QuantileRep.uniform(0.0, 1.0, grid100, s)
        assert transport_map_eval(src, dst, 1.2) == pytest.approx(0.6, abs=1e-3)

    @given(rep_tuples(2))
    def test_monotone(self, reps):
        p, q = reps
        x = np.linspace(BOX.lo, BOX.hi, 101)
        assert np.all(np.diff(transport_map_eval(p, q, x)) >= 0)

    def test_out_of_support(self, grid100, unit):
        p = QuantileRep.uniform(0, 1, grid100, unit)
        with pytest.raises(OutOfSupport):
            transport_map_eval(p, p, 1.5)


class TestLogExp:

    def test_log_examples(self, grid100):
        s = SupportInterval(0.0, 2.0)
        ref = QuantileRep.uniform(0.0, 1.0, grid100, s)
        assert np.all(log_map(ref, ref).qcoord_values == 0)
        shifted = QuantileRep(grid100, ref.values + 0.25, s)
        assert_allclose(log_map(ref, shifted).qcoord_values, 0.25, atol=1e-15)
        wide = QuantileRep.uniform(0.0, 2.0, grid100, s)
        assert_allclose(log_map(ref, wide).qcoord_values, grid100.nodes, atol=1e-15)

    def test_exp_examples(self, grid100):
        s = SupportInterval(0.0, 2.0)
        ref = QuantileRep.uniform(0.0, 1.0, grid100, s)
        assert exp_map(ref, TangentVector.zeros(grid100)) == ref
        out = exp_map(ref, TangentVector(grid100, np.full(100, 0.25)))
        assert_allclose(out.values, 0.25 + grid100.nodes, atol=1e-15)

    def test_rearrangement_matches_monte_carlo_pushforward(self, grid100, rng):
        s = SupportInterval(-1.0, 2.0)
        u = grid100.nodes
        ref = QuantileRep.uniform(0.0, 1.0, grid100, s)
        v = TangentVector(grid100, np.where(u < 0.5, 0.3, -0.3))
        out = exp_map(ref, v)

        U = rng.uniform(size=100_000)
        Y = U + np.where(U < 0.5, 0.3, -0.3)
        mc = empirical_quantiles(Y, grid100, s)
        assert np.all(np.diff(out.values) >= 0)
        assert np.max(np.abs(out.values - mc.values)) <= 0.01

    def test_clip_before_sort(self, unit):
        g = QuantileGrid(4)
        ref = QuantileRep(g, [0.1, 0.2, 0.3, 0.4], unit)
        out = exp_map(ref, TangentVector(g, [2.0, 0.0, 0.0, -2.0]))
        assert_array_equal(out.values, [0.0, 0.2, 0.3, 1.0])

    @given(rep_tuples(2))
    def test_round_trip_bitwise(self, reps):
        ref, p = reps
        assert exp_map(ref, log_map(ref, p)) == p

    def test_round_trip_bitwise_awkward_magnitudes(self):
        g = QuantileGrid(3)
        s = SupportInterval(-1e300, 1e300)
        ref = QuantileRep(g, [-1e17, 0.1, 3e16], s)
        p = QuantileRep(g, [1e-300, 0.3, 0.30000000000000004], s)
        assert exp_map(ref, log_map(ref, p)) == p

    @given(rep_tuples(2))
    def test_norm_equals_distance(self, reps):
        ref, p = reps
        assert tangent_norm(log_map(ref, p), ref) == wasserstein_distance(ref, p)


class TestTangentSpace:

    def test_inner_examples(self):
        g = QuantileGrid(1000)
        s = SupportInterval(0.0, 2.0)
        ref = QuantileRep.uniform(0.0, 1.0, g, s)
        assert tangent_norm(TangentVector(g, np.full(1000, -0.7)), ref) == pytest.approx(0.7, rel=1e-15)
        alt = TangentVector(g, np.tile([1.0, -1.0], 500))
        assert tangent_inner(alt, TangentVector(g, np.ones(1000)), ref) == 0.0
        wide = QuantileRep.uniform(0.0, 2.0, g, s)
        assert tangent_norm(log_map(ref, wide), ref) == pytest.approx(np.sqrt(1 / 3), abs=1e-3)

    def test_transport_examples(self, grid100, rng, unit):
        p1 = QuantileRep.uniform(0.0, 0.5, grid100, unit)
        p2 = QuantileRep.from_function(lambda u: u ** 3, grid100, unit)
        v = TangentVector(grid100, rng.normal(size=100))
        assert_array_equal(parallel_transport(v, p1, p1).qcoord_values, v.qcoord_values)
        back = parallel_transport(parallel_transport(v, p1, p2), p2, p1)
        assert_array_equal(back.qcoord_values, v.qcoord_values)

    @given(rep_tuples(2), st.data())
    def test_isometry_and_adjoint(self, reps, data):
        p1, p2 = reps
        m = p1.grid.m
        vec = st.lists(finite, min_size=m, max_size=m)
        g1 = TangentVector(p1.grid, data.draw(vec))
        g2 = TangentVector(p1.grid, data.draw(vec))
        P12 = lambda v: parallel_transport(v, p1, p2)  # noqa: E731
        P21 = lambda v: parallel_transport(v, p2, p1)  # noqa: E731
        assert tangent_inner(P12(g1), P12(g2), p2) == tangent_inner(g1, g2, p1)
        lhs = tangent_inner(P12(g1), g2, p2)
        rhs = tangent_inner(g1, P21(g2), p1)
        assert lhs == rhs
        assert lhs == float(np.mean(g1.qcoord_values * g2.qcoord_values))

    def test_rejects_non_finite(self, grid100):
        with pytest.raises(WtgError):
            TangentVector(grid100, np.r_[np.nan, np.zeros(99)])


class TestLinearize:

    @pytest.mark.parametrize("b", [0.5, 0.25, 0.1, 0.01])
    def test_uniform_unchanged(self, b, grid100, unit):
        q = QuantileRep.uniform(0.0, 1.0, grid100, unit)
        c = linearize_cdf(q, b)
        assert_allclose(c.cdf_values, c.knots, atol=1e-12)
        assert_allclose(quantile_from_cdf(c, grid100).values, q.values, atol=1e-12)

    def test_point_mass_becomes_one_cell_ramp(self, grid100, unit):
        q = QuantileRep(grid100, np.full(100, 0.43), unit)
        c = linearize_cdf(q, 0.1)
        assert_allclose(c.evaluate([0.4, 0.5]), [0.0, 1.0])
        lin = quantile_from_cdf(c, grid100)
        assert lin.values.min() >= 0.4 and lin.values.max() <= 0.5
        assert np.all(np.diff(lin.values) > 0)

    def test_truncated_gaussian(self, unit):
        grid = QuantileGrid(1000)
        p = TruncatedGaussianParams(0.5, 0.2)
        q = QuantileRep(grid, truncnorm_quantile(p, grid.nodes), unit)
        lin = quantile_from_cdf(linearize_cdf(q, 0.01), grid)
        assert wasserstein_distance(q, lin) <= 0.01

    @given(quantile_reps(), st.floats(1e-3, 0.999))
    def test_perturbation_at_most_b(self, q, frac):
        b = frac * q.support.width
        lin = quantile_from_cdf(linearize_cdf(q, b), q.grid)
        assert wasserstein_distance(q, lin) <= b

    @pytest.mark.parametrize("b", [0.0, -0.1, 1.0, 2.0, np.nan])
    def test_invalid_increment(self, b, grid100, unit):
        with pytest.raises(InvalidIncrement):
            linearize_cdf(QuantileRep.uniform(0, 1, grid100, unit), b)


def test_pushforward_is_nodewise(grid100, unit):
    q = QuantileRep.from_function(lambda u: u ** 2, grid100, unit)
    out = pushforward_monotone(q, np.sqrt)
    assert_array_equal(out.values, np.sqrt(q.values))
