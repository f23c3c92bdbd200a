import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from omdlab.exceptions import DomainError, InfeasiblePointError, RankDeficientError
from omdlab.geometry import (Domain, Point, Regularizer, bregman, effective_smoothness, kernel_basis,
                             regularizer_derivatives)
from omdlab.instances import hard_polytope_matrix

BUILTIN = [Regularizer.neg_entropy(), Regularizer.log_barrier(), Regularizer.tsallis(0.5),
           Regularizer.tsallis(0.3), Regularizer.euclidean(2.0)]
BARRIERS = [r for r in BUILTIN if r.is_barrier]


def _kw(reg):
    if reg.kind == "tsallis":
        return {"q": reg.q}
    if reg.kind == "euclidean":
        return {"beta": reg.beta}
    return {}


# -- derivatives ---------------------------------------------------------------


def test_entropy_derivatives_at_one():
    assert regularizer_derivatives(Regularizer.neg_entropy(), 1.0) == pytest.approx((0.0, 1.0, 1.0))


def test_log_barrier_derivatives_at_half():
    r, dr, d2r = regularizer_derivatives(Regularizer.log_barrier(), 0.5)
    assert r == pytest.approx(math.log(2))
    assert dr == pytest.approx(-2.0)
    assert d2r == pytest.approx(4.0)


def test_tsallis_second_derivative_matches_its_formula():
    # q x^(q-2) at q = 0.5, x = 0.25 is 0.5 * 0.25^-1.5 = 4
    reg = Regularizer.tsallis(0.5)
    _, _, d2r = regularizer_derivatives(reg, 0.25)
    assert d2r == pytest.approx(4.0, rel=1e-14)
    h = 1e-5
    fd = (reg.r(0.25 + h) - 2 * reg.r(0.25) + reg.r(0.25 - h)) / h**2
    assert fd == pytest.approx(4.0, rel=1e-5)


@pytest.mark.parametrize("reg", BUILTIN, ids=lambda r: r.label)
def test_derivatives_match_reference(reg):
    for x in (1e-6, 0.01, 0.3, 0.77, 1.0):
        r, dr, d2r = regularizer_derivatives(reg, x)
        assert r == pytest.approx(oracles.r_scalar(reg.kind, x, **_kw(reg)), rel=1e-12, abs=1e-15)
        assert dr == pytest.approx(oracles.dr_scalar(reg.kind, x, **_kw(reg)), rel=1e-12)
        assert d2r == pytest.approx(oracles.d2r_scalar(reg.kind, x, **_kw(reg)), rel=1e-12)


@pytest.mark.parametrize("reg", BARRIERS, ids=lambda r: r.label)
@pytest.mark.parametrize("x", [0.0, -0.1])
def test_barrier_rejects_nonpositive(reg, x):
    with pytest.raises(DomainError):
        regularizer_derivatives(reg, x)


@pytest.mark.parametrize("reg", BARRIERS, ids=lambda r: r.label)
def test_barrier_sandwich_on_log_grid(reg):
    x = np.geomspace(1e-8, 1.0, 81)
    h = reg.d2r(x)
    assert np.all(h >= reg.c1 / x**reg.nu * (1 - 1e-12))
    assert np.all(h <= reg.c2 / x**reg.nu * (1 + 1e-12))
    assert np.all(h > 0)
    assert reg.check_sandwich()


def test_barrier_constants():
    assert (Regularizer.neg_entropy().nu, Regularizer.neg_entropy().c1) == (1.0, 1.0)
    assert (Regularizer.log_barrier().nu, Regularizer.log_barrier().c2) == (2.0, 1.0)
    t = Regularizer.tsallis(0.5)
    assert (t.nu, t.c1, t.c2) == (1.5, 0.5, 0.5)


def test_custom_barrier_behaves_like_log_barrier():
    reg = Regularizer.custom_barrier(lambda x: -math.log(x), lambda x: -1 / x, lambda x: 1 / x**2, 2, 1, 1)
    assert reg.check_sandwich()
    assert float(reg.inv_dr(-4.0)) == pytest.approx(0.25, rel=1e-12)
    assert bregman(reg, [0.3, 0.7], [0.5, 0.5]) == pytest.approx(
        bregman(Regularizer.log_barrier(), [0.3, 0.7], [0.5, 0.5]), rel=1e-9)


@pytest.mark.parametrize("bad", [dict(kind="euclidean", beta=0.0), dict(kind="tsallis", q=1.0), dict(kind="nope")])
def test_invalid_regularizers(bad):
    with pytest.raises(ValueError):
        Regularizer(**bad)


# -- Bregman ---------------------------------------------------------------------


def test_bregman_self_is_zero():
    for reg in BUILTIN:
        assert bregman(reg, [0.2, 0.8], [0.2, 0.8]) == 0.0


def test_euclidean_bregman_example():
    assert bregman(Regularizer.euclidean(3.0), [1.0], [0.0]) == pytest.approx(1.5)


def test_entropy_bregman_near_vertex():
    assert bregman(Regularizer.neg_entropy(), [1 - 1e-12, 1e-12], [0.5, 0.5]) == pytest.approx(math.log(2), abs=1e-10)


def test_entropy_bregman_at_exact_vertex_uses_zero_log_zero():
    assert bregman(Regularizer.neg_entropy(), [1.0, 0.0], [0.5, 0.5]) == pytest.approx(math.log(2), abs=1e-15)


def test_barrier_bregman_rejects_boundary_reference():
    with pytest.raises(DomainError):
        bregman(Regularizer.log_barrier(), [0.5, 0.5], [1.0, 0.0])


def test_log_domain_bregman_matches_plain():
    a = Point.from_logs(np.log([0.25, 0.75]))
    b = Point.with_logs([0.6, 0.4])
    assert bregman(Regularizer.neg_entropy(), a, b) == pytest.approx(oracles.kl([0.25, 0.75], [0.6, 0.4]), rel=1e-13)


def test_bregman_with_underflowing_coordinates():
    # coordinates of order e^-800 only exist in log form; KL stays finite
    logs = np.array([-800.0, 0.0])
    a = Point.from_logs(logs)
    assert a.coords[0] == 0.0
    val = bregman(Regularizer.neg_entropy(), a, Point.with_logs([0.5, 0.5]))
    assert val == pytest.approx(math.log(2), rel=1e-12)


@pytest.mark.parametrize("reg", BUILTIN, ids=lambda r: r.label)
def test_bregman_nonnegative_random_pairs(reg):
    rng = np.random.default_rng(7)
    for _ in range(1000):
        d = int(rng.integers(1, 6))
        w = rng.dirichlet(np.ones(d))
        wp = rng.dirichlet(np.ones(d))
        w = np.maximum(w, 1e-12)
        wp = np.maximum(wp, 1e-12)
        val = bregman(reg, w, wp)
        assert val >= 0.0
        assert bregman(reg, w, w) == 0.0
        ref = oracles.bregman_ref(reg.kind, w, wp, **_kw(reg))
        assert val == pytest.approx(ref, rel=1e-7, abs=1e-10)


@given(st.lists(st.floats(1e-6, 1.0), min_size=2, max_size=2).map(sorted))
def test_entropy_bregman_monotone_toward_zero(pair):
    # scalar map x -> D_r(0, x) = x for entropy, so it is nondecreasing
    w1, w2 = pair
    reg = Regularizer.neg_entropy()
    assert bregman(reg, [0.0], [w1]) <= bregman(reg, [0.0], [w2]) + 1e-15


# -- effective smoothness ---------------------------------------------------------


def test_effective_smoothness_examples():
    assert effective_smoothness(Regularizer.neg_entropy(), [0.2, 0.8], [0.4, 0.6]) == pytest.approx(5.0)
    assert effective_smoothness(Regularizer.euclidean(7.0), [0.1, 0.9], [0.5, 0.5]) == 7.0


def test_effective_smoothness_degenerate_segment():
    # w1 == w2: r'' at the point, maximized over coordinates
    assert effective_smoothness(Regularizer.log_barrier(), [0.25, 0.75], [0.25, 0.75]) == pytest.approx(16.0)


def test_effective_smoothness_custom_uses_grid_supremum():
    # non-monotone r'' (bump at 0.5): the supremum sits inside the segment
    d2 = lambda x: 1 / x + 10 * math.exp(-((x - 0.5) ** 2) / 0.001)
    reg = Regularizer.custom_barrier(lambda x: x * math.log(x), lambda x: math.log(x) + 1, d2, 1, 1, 20)
    val = effective_smoothness(reg, [0.4], [0.6])
    assert val > 11.0


# -- domains and kernels ------------------------------------------------------------


def test_simplex_kernel_basis():
    V = kernel_basis(Domain.simplex(3))
    assert np.array_equal(V, [[1, 0, -1], [0, 1, -1]])


@pytest.mark.parametrize("m", [8, 16, 32])
def test_hard_polytope_kernel(m):
    A, V = hard_polytope_matrix(m)
    w1 = np.full(5 * m + 2, 1 / (5 * m + 2))
    dom = Domain.polytope(A, A @ w1, basis=V)
    B = kernel_basis(dom)
    assert B.shape == (m + 1, 5 * m + 2)
    assert np.max(np.abs(A @ B.T)) <= 1e-12
    assert np.allclose(B.sum(axis=1), 0.0, atol=1e-12)
    assert np.linalg.matrix_rank(B) == m + 1


def test_generic_polytope_kernel_is_independent_null_space():
    rng = np.random.default_rng(3)
    A = rng.normal(size=(3, 7))
    dom = Domain.polytope(A, A @ np.full(7, 1 / 7))
    V = kernel_basis(dom)
    assert V.shape == (4, 7)
    assert np.max(np.abs(A @ V.T)) <= 1e-12
    assert np.linalg.matrix_rank(V) == 4


def test_rank_deficient_polytope_lists_rows():
    A = np.array([[1.0, 1.0, 0.0], [2.0, 2.0, 0.0], [0.0, 1.0, 1.0]])
    dom = Domain.polytope(A, A @ np.full(3, 1 / 3))
    with pytest.raises(RankDeficientError) as exc:
        kernel_basis(dom)
    assert exc.value.dependent_rows == (1,)


def test_infeasible_point_reports_index():
    dom = Domain.simplex(3)
    with pytest.raises(InfeasiblePointError) as exc:
        dom.check_feasible([0.5, 0.7, -0.2])
    assert exc.value.index == 2 and exc.value.kind == "lower_bound"
    with pytest.raises(InfeasiblePointError) as exc:
        dom.check_feasible([0.5, 0.6, 0.2])
    assert exc.value.kind == "equality"


def test_hard_polytope_is_simplex_subset():
    A, V = hard_polytope_matrix(8)
    dom = Domain.polytope(A, A @ np.full(42, 1 / 42), basis=V)
    assert dom.is_simplex_subset()
    assert not Domain.interval(0, 1).is_simplex_subset()


def test_point_log_consistency():
    p = Point.with_logs([0.2, 0.8])
    assert p.consistent()
    bad = Point([0.2, 0.8], np.log([0.3, 0.7]))
    assert not bad.consistent()
