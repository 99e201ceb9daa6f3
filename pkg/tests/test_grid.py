import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spherelab.errors import CapExceeded, DimensionTooSmall, EmptySequence, InvalidExponent, ParseError
from spherelab.grid import GridFunction, average, compensated_sum, lp_norm, maximal
from spherelab.lattice import count_reps, enumerate_sphere

from conftest import brute_sphere


def naive_average(f: GridFunction, lam: int) -> dict:
    sphere = brute_sphere(f.d, lam)
    out = {}
    for x, v in f.to_dict().items():
        for y in sphere:
            z = tuple(a + b for a, b in zip(x, y))
            out[z] = out.get(z, 0.0) + v / len(sphere)
    return {k: v for k, v in out.items() if v != 0}


@st.composite
def sparse_functions(draw, d=None, nonneg=False, max_points=6, radius=4):
    d = d or draw(st.sampled_from([4, 5]))
    pts = draw(st.lists(st.tuples(*[st.integers(-radius, radius)] * d), min_size=1, max_size=max_points,
                        unique=True))
    lo = 0.0 if nonneg else -5.0
    vals = draw(st.lists(st.floats(lo, 5.0, allow_nan=False).filter(lambda v: v != 0),
                         min_size=len(pts), max_size=len(pts)))
    return GridFunction.from_dict(d, dict(zip(pts, vals)))


class TestGridFunction:
    def test_canonical_form(self):
        f = GridFunction(4, [[1, 0, 0, 0], [0, 0, 0, 0], [1, 0, 0, 0], [2, 2, 2, 2]], [1.0, 2.0, -1.0, 3.0])
        assert f.to_dict() == {(0, 0, 0, 0): 2.0, (2, 2, 2, 2): 3.0}
        assert f.support_size == 2
        assert f.bounding_box() == ((0, 0, 0, 0), (2, 2, 2, 2))

    def test_lookup(self):
        f = GridFunction.from_dict(4, {(0, 0, 0, 1): 1.5, (-3, 2, 0, 0): 2.5})
        assert f[(0, 0, 0, 1)] == 1.5
        assert f[(-3, 2, 0, 0)] == 2.5
        assert f[(0, 0, 0, 0)] == 0.0

    def test_json_round_trip(self):
        f = GridFunction.from_dict(4, {(0, 0, 0, 1): 0.1, (-3, 2, 0, 0): -2.5})
        assert GridFunction.from_json(f.to_json()) == f

    def test_json_errors(self):
        with pytest.raises(ParseError):
            GridFunction.from_json('{"d": 4, "records": [[1, 2, 3]]}')
        with pytest.raises(ParseError):
            GridFunction.from_json("[]")


class TestAverage:
    def test_delta_d4_lambda1(self):
        out = average(GridFunction.delta(4), 1)
        assert len(out) == 8
        assert set(out.to_dict().values()) == {0.125}
        assert set(out.to_dict()) == {tuple(int(c) for c in y) for y in enumerate_sphere(4, 1)}

    def test_lambda_zero_is_identity(self):
        f = GridFunction.from_dict(4, {(0, 0, 0, 1): 0.3, (5, 0, -1, 0): -7.0})
        assert average(f, 0) == f

    def test_mass_of_two_point_function(self):
        f = GridFunction.from_dict(4, {(0, 0, 0, 0): 2.0, (1, 0, 0, 0): 3.0})
        out = average(f, 1)
        # the 16 translates overlap at (1,0,0,0)+(-1,0,0,0) = origin etc.; total mass is kept
        assert lp_norm(out, 1).value == pytest.approx(5.0, rel=1e-15)
        assert out[(0, 0, 0, 0)] == pytest.approx(3.0 / 8)
        assert out[(1, 0, 0, 0)] == pytest.approx(2.0 / 8)

    def test_small_dimension_rejected(self):
        with pytest.raises(DimensionTooSmall):
            average(GridFunction.delta(3), 1)

    def test_cap(self):
        with pytest.raises(CapExceeded):
            average(GridFunction.delta(5), 200, cap=1000)

    @settings(max_examples=40, deadline=None)
    @given(sparse_functions(), st.integers(0, 12))
    def test_matches_naive_convolution(self, f, lam):
        out = average(f, lam).to_dict()
        ref = naive_average(f, lam)
        assert set(out) <= set(ref)
        for k, v in ref.items():
            assert out.get(k, 0.0) == pytest.approx(v, abs=1e-12)

    def test_row_path_matches_packed_path(self):
        # points so far apart that the packed key space would overflow int64
        far = GridFunction.from_dict(5, {(0, 0, 0, 0, 0): 1.0, (10**15, 0, 0, 0, 0): 2.0,
                                         (0, 10**15, 0, 0, 0): -1.0})
        near = GridFunction.from_dict(5, {(0, 0, 0, 0, 0): 1.0, (100, 0, 0, 0, 0): 2.0,
                                          (0, 100, 0, 0, 0): -1.0})
        a, b = average(far, 6), average(near, 6)
        assert np.array_equal(a.values, b.values)
        assert len(a) == 3 * count_reps(5, 6)
        ma, mb = maximal(far, [1, 6]), maximal(near, [1, 6])
        assert np.array_equal(ma.values, mb.values)

    @settings(max_examples=60, deadline=None)
    @given(sparse_functions(nonneg=True), st.integers(0, 50))
    def test_mass_preservation(self, f, lam):
        before = lp_norm(f, 1).value
        assert lp_norm(average(f, lam), 1).value == pytest.approx(before, rel=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(sparse_functions(), st.integers(0, 30), st.tuples(*[st.integers(-50, 50)] * 5))
    def test_translation_equivariance(self, f, lam, z):
        z = z[: f.d]
        assert average(f.translate(z), lam) == average(f, lam).translate(z)

    @settings(max_examples=40, deadline=None)
    @given(sparse_functions(), st.integers(0, 30), st.randoms(use_true_random=False))
    def test_signed_permutation_equivariance(self, f, lam, rnd):
        perm = list(range(f.d))
        rnd.shuffle(perm)
        signs = [rnd.choice((1, -1)) for _ in range(f.d)]
        assert average(f.signed_permute(perm, signs), lam) == average(f, lam).signed_permute(perm, signs)

    @settings(max_examples=40, deadline=None)
    @given(sparse_functions(), st.integers(0, 30))
    def test_sup_contraction(self, f, lam):
        assert lp_norm(average(f, lam), "inf").value <= lp_norm(f, "inf").value * (1 + 1e-15)


class TestMaximal:
    def test_singleton_is_abs_average(self):
        f = GridFunction.from_dict(4, {(0, 0, 0, 0): -2.0, (1, 1, 0, 0): 1.0})
        assert maximal(f, [3]) == average(f, 3).abs()

    def test_delta_two_spheres(self):
        out = maximal(GridFunction.delta(4), [1, 2]).to_dict()
        assert len(out) == 8 + 24
        for x, v in out.items():
            assert v == (1 / 8 if sum(c * c for c in x) == 1 else 1 / 24)

    def test_accepts_sequence_objects_and_threads(self):
        from spherelab.sequences import naturals
        f = GridFunction.from_dict(4, {(0, 0, 0, 0): 1.0, (2, 1, 0, 0): -3.0})
        assert maximal(f, naturals(6), threads=4) == maximal(f, range(1, 7))

    def test_empty(self):
        with pytest.raises(EmptySequence):
            maximal(GridFunction.delta(4), [])

    def test_cumulative_cap(self):
        with pytest.raises(CapExceeded):
            maximal(GridFunction.delta(5), [50, 60, 70], cap=count_reps(5, 70) + 10)

    @settings(max_examples=40, deadline=None)
    @given(sparse_functions(max_points=4),
           st.lists(st.integers(0, 25), min_size=1, max_size=4, unique=True),
           st.lists(st.integers(0, 25), max_size=3, unique=True))
    def test_monotone_in_index_set(self, f, small, extra):
        big = sorted(set(small) | set(extra))
        m_small, m_big = maximal(f, small).to_dict(), maximal(f, big).to_dict()
        assert all(m_big.get(x, 0.0) >= v for x, v in m_small.items())

    @settings(max_examples=25, deadline=None)
    @given(st.lists(st.integers(1, 60), min_size=1, max_size=6, unique=True),
           st.sampled_from([1.0, 1.25, 1.5, 2.0, 3.0]), st.sampled_from([4, 5]))
    def test_delta_identity(self, lams, p, d):
        closed = math.fsum(count_reps(d, lam) ** (1 - p) for lam in lams)
        value = lp_norm(maximal(GridFunction.delta(d), lams), p).value ** p
        assert value == pytest.approx(closed, rel=1e-12)


class TestNorms:
    def test_delta(self):
        for p in (1, 1.5, 2, 7, "inf"):
            assert lp_norm(GridFunction.delta(4), p).value == 1.0

    def test_average_of_delta_l2(self):
        assert lp_norm(average(GridFunction.delta(4), 1), 2).value == pytest.approx(8**-0.5, rel=1e-15)

    def test_sup(self):
        f = GridFunction.from_dict(4, {(0, 0, 0, 0): 1.0, (1, 0, 0, 0): -1.0})
        report = lp_norm(f, math.inf)
        assert report.value == 1.0 and report.summation_terms == 2

    def test_invalid_exponent(self):
        with pytest.raises(InvalidExponent):
            lp_norm(GridFunction.delta(4), 0.5)

    def test_compensated_sum_is_accurate(self):
        rng = np.random.default_rng(1)
        x = rng.random(100_001) * 10.0 ** rng.integers(-8, 8, 100_001)
        assert compensated_sum(x) == pytest.approx(math.fsum(x.tolist()), rel=1e-15)
        assert compensated_sum(np.array([1.0, 1e100, 1.0, -1e100])) == 2.0
        assert compensated_sum(np.array([])) == 0.0

    def test_compensated_sum_cancellation_in_columns(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal(50_000)
        x[0], x[-1] = 1e18, -1e18
        assert compensated_sum(x) == pytest.approx(math.fsum(x.tolist()), rel=1e-13)
