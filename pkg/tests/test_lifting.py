"""Tests for the dictionary families: scalar functions, conjunctive terms,
lifted evaluation, gradients against finite differences, serialization."""

from __future__ import annotations

import json
import math

import numpy as np
import numpy.polynomial.hermite_e as herme
import numpy.polynomial.legendre as leg
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from koopman_lift.lifting import (
    DictParams,
    Dictionary,
    conj_logistic,
    conj_rbf,
    dictionary_from_obj,
    dictionary_to_obj,
    graded_indices,
    grad_conj_logistic,
    grad_conj_rbf,
    lift,
    logistic,
    make_dictionary,
    param_jacobian,
    product_limit_params,
    rbf,
)


def _central_diff(f, x, h):
    """Central finite-difference gradient of a scalar function of a vector."""
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2.0 * h)
    return g


class TestLogistic:
    def test_half_at_center_any_steepness(self):
        for alpha in (0.3, 1.0, 7.0, 250.0):
            assert logistic(2.0, 2.0, alpha) == pytest.approx(0.5, abs=1e-15)

    def test_closed_form_value(self):
        # 1 / (1 + exp(-ln 3)) = 3/4
        assert logistic(1.0, 0.0, math.log(3.0)) == pytest.approx(0.75, abs=1e-15)

    def test_monotone_in_y(self):
        ys = np.linspace(-8, 8, 400)
        vals = logistic(ys, 0.7, 2.3)
        assert np.all(np.diff(vals) > 0)

    def test_saturates_without_nan(self):
        assert logistic(1e308, 0.0, 1.0) == 1.0
        assert logistic(-1e308, 0.0, 1.0) == pytest.approx(0.0, abs=1e-200)
        assert logistic(5.0, 0.0, 1e300) == 1.0
        assert np.isfinite(logistic(np.array([-1e9, 0.0, 1e9]), 0.0, 3.0)).all()

    def test_vectorized_matches_scalar(self):
        ys = np.array([-2.0, 0.1, 3.4])
        out = logistic(ys, 0.1, 1.7)
        for yi, oi in zip(ys, out):
            assert oi == logistic(float(yi), 0.1, 1.7)


class TestRbf:
    def test_quarter_at_center(self):
        for alpha in (0.5, 1.0, 12.0):
            assert rbf(-1.2, -1.2, alpha) == pytest.approx(0.25, abs=1e-15)

    def test_even_around_center(self):
        for d in (0.1, 0.9, 4.0):
            assert rbf(1.0 + d, 1.0, 2.0) == pytest.approx(rbf(1.0 - d, 1.0, 2.0), rel=1e-14)

    def test_matches_logistic_identity(self):
        # rho = lam - lam^2 analytically; the two code paths differ.
        rng = np.random.default_rng(7)
        z = rng.uniform(-30.0, 30.0, size=10_000)
        lam = logistic(z, 0.0, 1.0)
        assert np.max(np.abs(rbf(z, 0.0, 1.0) - (lam - lam * lam))) < 1e-12

    def test_bounded_by_quarter(self):
        z = np.linspace(-50, 50, 1001)
        assert np.all(rbf(z, 0.0, 1.0) <= 0.25 + 1e-16)

    def test_tails_vanish(self):
        assert rbf(1e9, 0.0, 1.0) == pytest.approx(0.0, abs=1e-200)
        assert rbf(-1e9, 0.0, 1.0) == pytest.approx(0.0, abs=1e-200)


class TestConjunctiveTerms:
    def test_logistic_center_value(self):
        for m in (1, 2, 3, 5):
            p = DictParams(np.linspace(-1, 1, m), np.full(m, 3.0))
            assert conj_logistic(p.mu.copy(), p) == pytest.approx(0.5 ** m, rel=1e-14)

    def test_rbf_center_value(self):
        p = DictParams([0.4, -0.2], [1.0, 5.0])
        assert conj_rbf(np.array([0.4, -0.2]), p) == pytest.approx(1.0 / 16.0, rel=1e-14)

    def test_m1_reduces_to_scalar(self):
        p = DictParams([0.3], [2.0])
        assert conj_logistic(np.array([1.1]), p) == pytest.approx(logistic(1.1, 0.3, 2.0), rel=1e-15)
        assert conj_rbf(np.array([1.1]), p) == pytest.approx(rbf(1.1, 0.3, 2.0), rel=1e-15)

    def test_dimension_mismatch_raises(self):
        p = DictParams([0.0, 0.0], [1.0, 1.0])
        with pytest.raises(ValueError):
            conj_logistic(np.zeros(3), p)
        with pytest.raises(ValueError):
            conj_rbf(np.zeros(1), p)

    def test_params_length_mismatch_raises(self):
        with pytest.raises(ValueError):
            DictParams([0.0, 1.0], [1.0])

    def test_far_from_center_small(self):
        p = DictParams([0.0, 0.0], [4.0, 4.0])
        assert conj_rbf(np.array([50.0, -50.0]), p) == pytest.approx(0.0, abs=1e-150)
        assert conj_logistic(np.array([50.0, 50.0]), p) == pytest.approx(1.0, abs=1e-12)


class TestGradients:
    def test_logistic_grad_center_m1(self):
        # single factor at its center: alpha * (1 - 1/2) * 1/2 = alpha / 4
        for alpha in (0.5, 2.0, 9.0):
            p = DictParams([1.0], [alpha])
            assert grad_conj_logistic(np.array([1.0]), p)[0] == pytest.approx(alpha / 4.0, rel=1e-14)

    def test_rbf_grad_zero_at_center(self):
        p = DictParams([0.5, -0.5], [2.0, 3.0])
        g = grad_conj_rbf(np.array([0.5, -0.5]), p)
        assert np.max(np.abs(g)) < 1e-14

    def test_grad_vanishes_in_saturation(self):
        p = DictParams([0.0, 0.0], [3.0, 3.0])
        assert np.max(np.abs(grad_conj_logistic(np.array([200.0, 200.0]), p))) < 1e-100
        assert np.max(np.abs(grad_conj_rbf(np.array([200.0, 200.0]), p))) < 1e-100

    @pytest.mark.parametrize("m", [1, 2, 3])
    def test_logistic_grad_matches_finite_differences(self, m):
        rng = np.random.default_rng(100 + m)
        for _ in range(34):
            p = DictParams(rng.uniform(-2, 2, m), rng.uniform(0.5, 3.0, m))
            y = rng.uniform(-2, 2, m)
            g = grad_conj_logistic(y, p)
            g_fd = _central_diff(lambda x: conj_logistic(x, p), y, 1e-6)
            scale = max(np.max(np.abs(g)), 1e-12)
            assert np.max(np.abs(g - g_fd)) / scale < 1e-5

    @pytest.mark.parametrize("m", [1, 2, 3])
    def test_rbf_grad_matches_finite_differences(self, m):
        rng = np.random.default_rng(200 + m)
        for _ in range(34):
            p = DictParams(rng.uniform(-2, 2, m), rng.uniform(0.5, 3.0, m))
            y = rng.uniform(-2, 2, m)
            g = grad_conj_rbf(y, p)
            g_fd = _central_diff(lambda x: conj_rbf(x, p), y, 1e-6)
            scale = max(np.max(np.abs(g)), 1e-12)
            assert np.max(np.abs(g - g_fd)) / scale < 1e-5


class TestLift:
    def test_augsill_values_at_shared_center(self):
        mu = np.array([0.3, -0.7])
        terms = [DictParams(mu, [1.0, 2.0])]
        rterms = [DictParams(mu, [3.0, 0.5])]
        d = Dictionary(kind="augsill", m=2, logistic_terms=terms, rbf_terms=rterms)
        out = lift(d, mu)
        np.testing.assert_allclose(out, [1.0, 0.3, -0.7, 0.25, 0.0625], rtol=1e-14)

    def test_output_length(self):
        rng = np.random.default_rng(0)
        d = make_dictionary("augsill", 2, 10, rng=rng)
        assert d.n_out == 10
        assert len(lift(d, np.zeros(2))) == 10
        assert d.n_logistic + d.n_rbf == 7

    def test_affine_block_bit_exact(self):
        rng = np.random.default_rng(3)
        y = rng.standard_normal(3)
        d = make_dictionary("augsill", 3, 9, rng=rng)
        out = lift(d, y)
        assert out[0] == 1.0
        assert np.array_equal(out[1:4], y)

    def test_batch_matches_single(self):
        rng = np.random.default_rng(4)
        Y = rng.uniform(-2, 2, size=(11, 2))
        for kind in ("augsill", "sill", "summedrbf", "legendre", "hermite"):
            d = make_dictionary(kind, 2, 8, rng=rng)
            batch = lift(d, Y)
            assert batch.shape == (11, 8)
            for b in range(11):
                np.testing.assert_array_equal(batch[b], lift(d, Y[b]))

    def test_legendre_values_at_zero(self):
        d = Dictionary(kind="legendre", m=2,
                       poly_degree_indices=[(0, 2), (1, 1), (2, 0), (0, 3)])
        out = lift(d, np.zeros(2))
        # oracle: numpy's Legendre evaluation
        p2 = leg.legval(0.0, [0, 0, 1])
        p3 = leg.legval(0.0, [0, 0, 0, 1])
        np.testing.assert_allclose(out, [1.0, 0.0, 0.0, p2, 0.0, p2, p3], atol=1e-15)

    def test_legendre_recurrence_against_numpy(self):
        d = Dictionary(kind="legendre", m=1, poly_degree_indices=[(n,) for n in range(2, 13)])
        ts = np.linspace(-1, 1, 41)
        for t in ts:
            out = lift(d, np.array([t]))
            for k, n in enumerate(range(2, 13)):
                coeffs = [0] * n + [1]
                assert out[2 + k] == pytest.approx(leg.legval(t, coeffs), abs=1e-12)

    def test_legendre_all_one_at_right_endpoint(self):
        d = Dictionary(kind="legendre", m=1, poly_degree_indices=[(n,) for n in range(2, 13)])
        out = lift(d, np.array([1.0]))
        np.testing.assert_allclose(out[2:], np.ones(11), atol=1e-12)

    def test_hermite_recurrence_against_numpy(self):
        d = Dictionary(kind="hermite", m=1, poly_degree_indices=[(n,) for n in range(2, 11)])
        for t in np.linspace(-2.5, 2.5, 21):
            out = lift(d, np.array([t]))
            for k, n in enumerate(range(2, 11)):
                coeffs = [0] * n + [1]
                assert out[2 + k] == pytest.approx(herme.hermeval(t, coeffs), rel=1e-12, abs=1e-12)

    def test_poly_domain_rescales_arguments(self):
        d = Dictionary(kind="legendre", m=1, poly_degree_indices=[(2,)],
                       poly_domain=np.array([[0.0, 4.0]]))
        # y = 4 maps to t = 1, where P2 = 1
        assert lift(d, np.array([4.0]))[2] == pytest.approx(1.0, abs=1e-14)
        # y = 2 maps to t = 0, where P2 = -1/2
        assert lift(d, np.array([2.0]))[2] == pytest.approx(-0.5, abs=1e-14)

    def test_summedrbf_term_is_average(self):
        p = DictParams([0.0, 1.0], [1.0, 1.0])
        d = Dictionary(kind="summedrbf", m=2, rbf_terms=[p])
        y = np.array([0.3, -0.6])
        expected = 0.5 * (rbf(0.3, 0.0, 1.0) + rbf(-0.6, 1.0, 1.0))
        assert lift(d, y)[3] == pytest.approx(expected, rel=1e-14)

    def test_dimension_mismatch_raises(self):
        d = make_dictionary("sill", 2, 6)
        with pytest.raises(ValueError):
            lift(d, np.zeros(3))


class TestGradedIndices:
    def test_small_case(self):
        assert graded_indices(2, 5) == [(0, 2), (1, 1), (2, 0), (0, 3), (1, 2)]

    def test_total_degree_floor(self):
        for idx in graded_indices(3, 40):
            assert sum(idx) >= 2
            assert len(idx) == 3

    def test_deterministic_and_unique(self):
        a = graded_indices(3, 60)
        assert a == graded_indices(3, 60)
        assert len(set(a)) == 60


class TestParamJacobian:
    def test_shape_and_zero_rows(self):
        rng = np.random.default_rng(5)
        d = make_dictionary("augsill", 2, 9, rng=rng)
        J = param_jacobian(d, np.array([0.1, -0.4]))
        assert J.shape == (9, 2 * 2 * 6)
        assert np.all(J[0] == 0.0)
        assert np.all(J[1:3] == 0.0)

    def test_block_sparsity(self):
        rng = np.random.default_rng(6)
        d = make_dictionary("augsill", 2, 7, rng=rng)
        J = param_jacobian(d, np.array([0.2, 0.3]))
        # term k responds only to its own parameter block
        for k in range(4):
            row = 3 + k
            mask = np.ones(J.shape[1], dtype=bool)
            mask[4 * k:4 * (k + 1)] = False
            assert np.all(J[row, mask] == 0.0)

    def test_center_column_sign(self):
        # d/dmu = -alpha * (1 - lam) * product < 0 for a logistic term
        p = DictParams([0.0], [2.0])
        d = Dictionary(kind="sill", m=1, logistic_terms=[p])
        J = param_jacobian(d, np.array([0.5]))
        assert J[2, 0] < 0.0

    def test_steepness_column_zero_at_center(self):
        p = DictParams([0.7], [2.0])
        d = Dictionary(kind="sill", m=1, logistic_terms=[p])
        J = param_jacobian(d, np.array([0.7]))
        assert J[2, 1] == pytest.approx(0.0, abs=1e-15)

    @pytest.mark.parametrize("kind", ["augsill", "sill", "summedrbf"])
    def test_matches_finite_differences(self, kind):
        rng = np.random.default_rng(11)
        for _ in range(12):
            m = int(rng.integers(1, 4))
            d = make_dictionary(kind, m, 1 + m + int(rng.integers(1, 4)), rng=rng,
                                alpha_init=float(rng.uniform(0.5, 2.5)))
            for t in d.logistic_terms + d.rbf_terms:
                t.mu[:] = rng.uniform(-1.5, 1.5, m)
                t.alpha[:] = rng.uniform(0.5, 3.0, m)
            y = rng.uniform(-2, 2, m)
            J = param_jacobian(d, y)
            h = 1e-6
            terms = d.logistic_terms + d.rbf_terms
            col = 0
            J_fd = np.zeros_like(J)
            for t in terms:
                for arr_name in ("mu", "alpha"):
                    arr = getattr(t, arr_name)
                    for i in range(m):
                        orig = arr[i]
                        arr[i] = orig + h
                        hi = lift(d, y)
                        arr[i] = orig - h
                        lo = lift(d, y)
                        arr[i] = orig
                        J_fd[:, col] = (hi - lo) / (2 * h)
                        col += 1
            scale = max(np.max(np.abs(J)), 1e-12)
            assert np.max(np.abs(J - J_fd)) / scale < 1e-5

    def test_polynomial_kind_unsupported(self):
        d = make_dictionary("legendre", 2, 6)
        with pytest.raises(ValueError):
            param_jacobian(d, np.zeros(2))


class TestProductLimitParams:
    def test_elementwise_max_with_matched_steepness(self):
        a = DictParams([0.0, 2.0], [1.0, 5.0])
        b = DictParams([1.0, -1.0], [3.0, 7.0])
        out = product_limit_params(a, b)
        np.testing.assert_array_equal(out.mu, [1.0, 2.0])
        np.testing.assert_array_equal(out.alpha, [3.0, 5.0])

    def test_tie_prefers_second(self):
        a = DictParams([0.5], [1.0])
        b = DictParams([0.5], [9.0])
        assert product_limit_params(a, b).alpha[0] == 9.0


class TestSerialization:
    @pytest.mark.parametrize("kind", ["augsill", "sill", "summedrbf", "legendre", "hermite"])
    def test_round_trip_bit_stable(self, kind):
        rng = np.random.default_rng(21)
        d = make_dictionary(kind, 3, 9, rng=rng, data=rng.uniform(-3, 3, size=(40, 3)))
        obj = dictionary_to_obj(d)
        text = json.dumps(obj, sort_keys=True)
        d2 = dictionary_from_obj(json.loads(text))
        assert d2.kind == d.kind and d2.m == d.m
        for t1, t2 in zip(d.logistic_terms + d.rbf_terms, d2.logistic_terms + d2.rbf_terms):
            assert np.array_equal(t1.mu, t2.mu)
            assert np.array_equal(t1.alpha, t2.alpha)
        assert d2.poly_degree_indices == d.poly_degree_indices
        if d.poly_domain is not None:
            assert np.array_equal(d2.poly_domain, d.poly_domain)
        # a second dump of the reloaded dictionary is byte-identical
        assert json.dumps(dictionary_to_obj(d2), sort_keys=True) == text

    def test_lift_identical_after_round_trip(self):
        rng = np.random.default_rng(22)
        d = make_dictionary("augsill", 2, 12, rng=rng)
        d2 = dictionary_from_obj(json.loads(json.dumps(dictionary_to_obj(d))))
        y = rng.uniform(-2, 2, size=(7, 2))
        assert np.array_equal(lift(d, y), lift(d2, y))


class TestDictionaryValidation:
    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            Dictionary(kind="fourier", m=2)

    def test_sill_rejects_rbf_terms(self):
        with pytest.raises(ValueError):
            Dictionary(kind="sill", m=1, rbf_terms=[DictParams([0.0], [1.0])])

    def test_poly_rejects_low_degree_index(self):
        with pytest.raises(ValueError):
            Dictionary(kind="legendre", m=2, poly_degree_indices=[(1, 0)])

    def test_poly_rejects_parametric_terms(self):
        with pytest.raises(ValueError):
            Dictionary(kind="hermite", m=1, logistic_terms=[DictParams([0.0], [1.0])])

    def test_term_dimension_checked(self):
        with pytest.raises(ValueError):
            Dictionary(kind="sill", m=2, logistic_terms=[DictParams([0.0], [1.0])])


@given(z=st.floats(min_value=-30, max_value=30),
       scale=st.floats(min_value=1e-3, max_value=1.0))
@settings(max_examples=200, deadline=None)
def test_scalar_ranges_property(z, scale):
    # effective exponent |scale * z| <= 30 keeps both functions off saturation
    lam = logistic(z, 0.0, scale)
    rho = rbf(z, 0.0, scale)
    assert 0.0 < lam < 1.0
    assert 0.0 < rho <= 0.25 + 1e-16
    assert rho == pytest.approx(lam * (1.0 - lam), abs=1e-12)


@given(mu=st.lists(st.floats(min_value=-5, max_value=5), min_size=1, max_size=4),
       scale=st.floats(min_value=0.1, max_value=10))
@settings(max_examples=100, deadline=None)
def test_conj_bounds_property(mu, scale):
    m = len(mu)
    p = DictParams(np.array(mu), np.full(m, scale))
    y = np.zeros(m)
    lam = conj_logistic(y, p)
    rho = conj_rbf(y, p)
    assert 0.0 <= lam <= 1.0
    assert 0.0 <= rho <= 4.0 ** (-m) + 1e-16
