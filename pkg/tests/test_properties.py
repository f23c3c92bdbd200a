import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
import suites
from omdlab.balance import loss_balance, simplex_pair_basis
from omdlab.geometry import Domain, Point, Regularizer, bregman
from omdlab.subproblem import StepObjective, certify, exact_step


@pytest.mark.parametrize("suite", suites.ALL, ids=lambda f: f.__name__)
def test_property_suite(suite):
    res = suite()
    assert res.instances >= suites.N
    assert res.violations == [], res.line()


# -- hypothesis-driven properties ------------------------------------------------------------------

_regs = st.sampled_from(suites.REGS)


@st.composite
def _simplex_points(draw, d=None, k=1, floor=1e-6):
    d = d or draw(st.integers(2, 5))
    pts = []
    for _ in range(k):
        raw = np.array(draw(st.lists(st.floats(floor, 1.0), min_size=d, max_size=d)))
        pts.append(raw / raw.sum())
    return pts


@settings(max_examples=150)
@given(reg=_regs, pts=_simplex_points(k=3))
def test_three_points_identity(reg, pts):
    x, y, z = pts
    lhs = bregman(reg, x, y) + bregman(reg, y, z) - bregman(reg, x, z)
    rhs = float((reg.dr(z) - reg.dr(y)) @ (x - y))
    scale = 1 + abs(bregman(reg, x, z)) + float(np.sum(np.abs(reg.dr(z)) + np.abs(reg.dr(y))))
    assert abs(lhs - rhs) <= 1e-11 * scale


@settings(max_examples=150)
@given(reg=_regs, pts=_simplex_points(k=2))
def test_bregman_nonnegative(reg, pts):
    assert bregman(reg, *pts) >= 0.0


@settings(max_examples=100)
@given(pts=_simplex_points(k=1, floor=1e-3), eta=st.floats(1e-3, 5.0),
       loss=st.lists(st.floats(-1, 1), min_size=5, max_size=5))
def test_entropy_step_is_multiplicative_weights(pts, eta, loss):
    anchor = pts[0]
    d = len(anchor)
    loss = np.array(loss[:d])
    w, cert = exact_step(StepObjective(eta, loss, Point.with_logs(anchor), Regularizer.neg_entropy(),
                                       Domain.simplex(d)))
    assert np.allclose(w.coords, oracles.mw_step(anchor, loss, eta), rtol=1e-11, atol=1e-300)
    assert cert.slack <= 1e-12


@settings(max_examples=100)
@given(reg=_regs, pts=_simplex_points(k=2, floor=1e-2), eta=st.floats(1e-2, 1.0),
       loss=st.lists(st.floats(-1, 1), min_size=5, max_size=5))
def test_certificate_slack_is_exact_gap(reg, pts, eta, loss):
    anchor, cand = pts
    d = len(anchor)
    obj = StepObjective(eta, np.array(loss[:d]), Point.with_logs(anchor), reg, Domain.simplex(d))
    w, exact = exact_step(obj)
    ok, cert = certify(obj, cand, 1e-3)
    gap = cert.value_at_candidate - exact.value_at_candidate
    assert cert.slack >= gap - 1e-12
    assert cert.slack <= gap + 1e-9 * max(1.0, abs(gap))


@settings(max_examples=100)
@given(L=st.lists(st.lists(st.floats(-1, 1), min_size=3, max_size=3), min_size=1, max_size=30),
       a=st.integers(0, 30), b=st.integers(0, 30))
def test_loss_balance_dominates_every_interval(L, a, b):
    L = np.array(L)
    a, b = sorted((min(a, len(L)), min(b, len(L))))
    V = simplex_pair_basis(3)
    alpha = loss_balance(L, V)
    assert all(float(L[a:b].sum(axis=0) @ v) <= alpha + 1e-12 for v in V)
