import numpy as np
import pytest
from scipy.interpolate import BSpline

from odebeat import (InvalidArgumentError, OutOfDomainError, design_matrix,
                     eval_basis, make_basis, make_quadrature)


class TestMakeBasis:
    def test_beat_window_has_17_spans_and_20_functions(self):
        b = make_basis((0.0, 0.2), 0.012)
        assert b.n_spans == 17
        assert b.K == 20
        assert b.K == b.n_spans + b.degree

    def test_single_span_is_bernstein_cubic(self):
        b = make_basis((0.0, 1.0), 1.0)
        assert b.n_spans == 1
        assert b.K == 4

    def test_clamped_knot_multiplicity(self):
        b = make_basis((0.0, 0.2), 0.012)
        assert np.all(b.knots[:4] == 0.0)
        assert np.all(b.knots[-4:] == 0.2)
        assert np.all(np.diff(b.knots) >= 0)

    def test_short_last_span(self):
        b = make_basis((0.0, 0.2), 0.012)
        spans = np.diff(b.breakpoints)
        assert np.allclose(spans[:-1], 0.012)
        assert spans[-1] < 0.012

    @pytest.mark.parametrize("spacing", [0.0, -0.01])
    def test_nonpositive_spacing_rejected(self, spacing):
        with pytest.raises(InvalidArgumentError):
            make_basis((0.0, 0.2), spacing)

    def test_empty_domain_rejected(self):
        with pytest.raises(InvalidArgumentError):
            make_basis((0.2, 0.2), 0.01)

    def test_spacing_larger_than_domain_rejected(self):
        with pytest.raises(InvalidArgumentError):
            make_basis((0.0, 0.2), 0.5)


class TestEvalBasis:
    def test_partition_of_unity(self, beat_basis):
        t = np.linspace(0.0, 0.2, 2001)
        sums = design_matrix(beat_basis, t, 0).sum(axis=1)
        assert np.abs(sums - 1.0).max() < 1e-10

    def test_nonnegative(self, beat_basis):
        t = np.linspace(0.0, 0.2, 2001)
        assert design_matrix(beat_basis, t, 0).min() >= -1e-12

    def test_local_support_spans_at_most_four_spans(self, beat_basis):
        t = np.linspace(0.0, 0.2, 2001)
        values = design_matrix(beat_basis, t, 0)
        for j in range(beat_basis.K):
            lo = beat_basis.knots[j]
            hi = beat_basis.knots[j + beat_basis.degree + 1]
            outside = (t < lo) | (t > hi)
            assert np.abs(values[outside, j]).max(initial=0.0) == 0.0

    def test_left_endpoint_interpolates(self, beat_basis):
        v = eval_basis(beat_basis, 0.0, 0)
        assert v[0] == pytest.approx(1.0)
        assert np.abs(v[1:]).max() == 0.0

    def test_right_endpoint_interpolates(self, beat_basis):
        v = eval_basis(beat_basis, 0.2, 0)
        assert v[-1] == pytest.approx(1.0)
        assert np.abs(v[:-1]).max() == 0.0

    def test_second_derivative_sums_to_zero(self, beat_basis):
        t = np.linspace(0.0, 0.2, 501)
        sums = design_matrix(beat_basis, t, 2).sum(axis=1)
        assert np.abs(sums).max() < 1e-8

    def test_out_of_domain_rejected(self, beat_basis):
        with pytest.raises(OutOfDomainError):
            eval_basis(beat_basis, 0.2 + 1e-9, 0)
        with pytest.raises(OutOfDomainError):
            eval_basis(beat_basis, -1e-9, 1)

    def test_bad_deriv_rejected(self, beat_basis):
        with pytest.raises(InvalidArgumentError):
            eval_basis(beat_basis, 0.1, 3)

    def test_finite_difference_matches_first_derivative(self):
        # spacing chosen so the third derivative stays O(1e3) and the
        # central-difference error at eps=1e-5 is within the stated tolerance
        b = make_basis((0.0, 1.0), 0.1)
        eps = 1e-5
        for t in (0.05, 0.13, 0.47, 0.81):   # interior, away from knots
            fd = (eval_basis(b, t + eps, 0) - eval_basis(b, t - eps, 0)) / (2 * eps)
            assert np.abs(fd - eval_basis(b, t, 1)).max() < 1e-5

    @pytest.mark.parametrize("deriv", [0, 1, 2])
    def test_matches_scipy_bspline(self, beat_basis, deriv):
        t = np.linspace(0.0, 0.2, 401)
        ours = design_matrix(beat_basis, t, deriv)
        ref = np.column_stack([
            BSpline(beat_basis.knots, np.eye(beat_basis.K)[j], 3)(t, nu=deriv)
            for j in range(beat_basis.K)])
        scale = max(1.0, np.abs(ref).max())
        assert np.abs(ours - ref).max() < 1e-10 * scale


class TestDesignMatrix:
    def test_endpoint_rows_are_unit_vectors(self, beat_basis):
        rows = design_matrix(beat_basis, [0.0, 0.2], 0)
        expected = np.zeros((2, beat_basis.K))
        expected[0, 0] = 1.0
        expected[1, -1] = 1.0
        assert np.array_equal(rows, expected)

    def test_beat_grid_shape_and_row_sums(self, beat_basis):
        t = np.arange(72) / 360.0
        m = design_matrix(beat_basis, t, 0)
        assert m.shape == (72, 20)
        assert np.abs(m.sum(axis=1) - 1.0).max() < 1e-10

    def test_empty_times(self, beat_basis):
        m = design_matrix(beat_basis, [], 0)
        assert m.shape == (0, beat_basis.K)

    def test_reports_offending_index(self, beat_basis):
        with pytest.raises(OutOfDomainError, match=r"times\[2\]"):
            design_matrix(beat_basis, [0.0, 0.1, 0.3], 0)


class TestQuadrature:
    def test_single_point_is_midpoint_rule(self):
        b = make_basis((0.0, 1.0), 1.0)
        q = make_quadrature(b, 1)
        assert q.nodes == pytest.approx([0.5])
        assert q.weights == pytest.approx([1.0])

    def test_weights_sum_to_domain_length(self, beat_basis):
        q = make_quadrature(beat_basis, 8)
        assert q.weights.sum() == pytest.approx(0.2, abs=1e-12)

    def test_nodes_stay_inside_their_span(self, beat_basis):
        q = make_quadrature(beat_basis, 8)
        edges = beat_basis.breakpoints
        for s in range(beat_basis.n_spans):
            nodes = q.nodes[s * 8:(s + 1) * 8]
            assert np.all(nodes > edges[s]) and np.all(nodes < edges[s + 1])

    def test_polynomial_exactness(self, beat_basis):
        q = make_quadrature(beat_basis, 8)
        for p in range(2 * 8):
            exact = 0.2 ** (p + 1) / (p + 1)
            assert (q.weights * q.nodes ** p).sum() == pytest.approx(exact, abs=1e-12)

    def test_refinement_agreement_on_gram_matrix(self, beat_basis):
        def gram(pts):
            q = make_quadrature(beat_basis, pts)
            phi = design_matrix(beat_basis, q.nodes, 0)
            return phi.T @ (phi * q.weights[:, None])

        assert np.abs(gram(8) - gram(64)).max() < 1e-12

    def test_invalid_points_per_span(self, beat_basis):
        with pytest.raises(InvalidArgumentError):
            make_quadrature(beat_basis, 0)
