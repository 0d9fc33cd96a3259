import numpy as np
import pytest

from spinreset.trigpoly import TrigPoly, evaluate_matrix, kron_poly, poly_matrix


def test_algebra_matches_pointwise_evaluation():
    rng = np.random.default_rng(7)
    a = TrigPoly.cos(1.3, 0.7) + TrigPoly.sin(0.4, -0.2) + TrigPoly.constant(0.1)
    b = TrigPoly.expi(2.1, 0.3 - 0.4j) + TrigPoly.constant(-0.5)
    ts = rng.uniform(0.0, 50.0, size=40)
    np.testing.assert_allclose((a + b)(ts), a(ts) + b(ts), atol=1e-14)
    np.testing.assert_allclose((a - b)(ts), a(ts) - b(ts), atol=1e-14)
    np.testing.assert_allclose((a * b)(ts), a(ts) * b(ts), atol=1e-14)
    np.testing.assert_allclose((2.0 * a)(ts), 2.0 * a(ts), atol=1e-14)
    np.testing.assert_allclose((-a)(ts), -a(ts), atol=1e-14)
    np.testing.assert_allclose(a.conj()(ts), np.conj(a(ts)), atol=1e-14)


def test_real_combinations_are_detected():
    assert TrigPoly.cos(0.9).is_real()
    assert TrigPoly.sin(0.9).is_real()
    assert (TrigPoly.cos(0.9) * TrigPoly.sin(0.9)).is_real()
    assert not TrigPoly.expi(0.9).is_real()
    assert TrigPoly.constant(1.0 + 1e-3j).is_real(tol=1e-2)


def test_products_merge_onto_existing_frequencies():
    # cos(w)^2 deposits weight on 2w; adding an explicit 2w term must
    # land on the same coefficient slot, not on a nearby duplicate
    w = 0.1 + 0.2  # not exactly representable, so w + w != 2*w bitwise
    p = TrigPoly.cos(w) * TrigPoly.cos(w) + TrigPoly.cos(2.0 * w, 0.5)
    freqs = p.frequencies
    assert len(freqs) == 3  # -2w, 0, +2w
    ts = np.linspace(0.0, 30.0, 17)
    np.testing.assert_allclose(p(ts), np.cos(w * ts) ** 2 + 0.5 * np.cos(2 * w * ts),
                               atol=1e-14)


def test_cancellation_drops_coefficients():
    p = TrigPoly.cos(1.1) - TrigPoly.cos(1.1)
    assert p.frequencies == []
    assert p(3.7) == 0.0
    # sin^2 + cos^2 collapses to the constant
    q = TrigPoly.sin(2.3) * TrigPoly.sin(2.3) + TrigPoly.cos(2.3) * TrigPoly.cos(2.3)
    assert q.frequencies == [0.0]
    assert q(0.9) == pytest.approx(1.0, abs=1e-15)


def test_matrix_helpers():
    a = poly_matrix([[TrigPoly.cos(1.0), TrigPoly.sin(1.0)],
                     [TrigPoly.sin(1.0), TrigPoly.constant(1.0)]])
    b = poly_matrix([[TrigPoly.constant(2.0), TrigPoly()],
                     [TrigPoly(), TrigPoly.expi(0.5)]])
    t = 1.234
    av, bv = evaluate_matrix(a, t), evaluate_matrix(b, t)
    np.testing.assert_allclose(evaluate_matrix(kron_poly(a, b), t), np.kron(av, bv),
                               atol=1e-14)
