"""Bosonic side tests.

The factorial Gram and the commutation relations are checked against a
dense oracle built from explicit occupation dictionaries; the pair-block
minimizer is checked against dense diagonalization of the full form
matrix restricted to one pair and against hand-derived closed forms
(the first nontrivial truncated minimum is 4 - 2 sqrt(2)).
"""

from __future__ import annotations

import itertools
import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fermibose import boson as B
from fermibose import fock as F
from fermibose import lattice as L

UNIT2 = tuple(k for k in L.ball_points(2, 1) if any(k))


def window2(m=2, radius_sq=1):
    return B.TruncationWindow.from_radius(2, radius_sq, m)


def gram_oracle(mono):
    out = 1.0
    for mult in Counter(mono).values():
        out *= math.factorial(mult)
    return out


# ------------------------------------------------------------- monomials


def test_monomial_canonical_order():
    m = B.monomial([(1, 0), (-1, 0), (1, 0)])
    assert m == ((-1, 0), (1, 0), (1, 0))
    assert B.monomial_degree(m) == 3
    with pytest.raises(ValueError):
        B.monomial([(0, 0)])


@settings(max_examples=60, deadline=None)
@given(st.lists(st.sampled_from(UNIT2), min_size=0, max_size=6))
def test_monomial_norm_matches_factorial_oracle(modes):
    mono = B.monomial(modes)
    assert B.monomial_norm_sq(mono) == gram_oracle(mono)


def test_monomial_total_momentum():
    m = B.monomial([(1, 0), (1, 0), (0, -1)])
    assert B.monomial_total_momentum(m, 2) == (2, -1)
    assert B.monomial_total_momentum((), 2) == (0, 0)


def test_vector_inner_product_gram():
    v = B.BosonVector.from_monomial([(1, 0), (1, 0)], 1.0)
    assert v.norm_sq() == pytest.approx(2.0)
    w = B.BosonVector.from_monomial([(1, 0), (1, 0)], 2.0 + 1j)
    assert v.inner(w) == pytest.approx(2 * (2.0 + 1j))
    u = B.BosonVector.from_monomial([(0, 1)], 3.0)
    assert v.inner(u) == 0.0
    assert (v + u).norm_sq() == pytest.approx(2.0 + 9.0)


def test_vacuum_and_pruning():
    vac = B.BosonVector.vacuum()
    assert vac.norm() == 1.0
    tiny = vac + B.BosonVector.from_monomial([(1, 0)], 1e-18)
    assert len(tiny.pruned()) == 1
    with pytest.raises(ValueError):
        B.BosonVector().normalized()


# ----------------------------------------------------- ladder operators


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.sampled_from(UNIT2), min_size=0, max_size=5),
    st.sampled_from(UNIT2),
    st.sampled_from(UNIT2),
)
def test_ccr(modes, k, q):
    v = B.BosonVector.from_monomial(modes)
    ek_eq = B.apply_boson_annihilator(k, B.apply_boson_annihilator(q, v))
    eq_ek = B.apply_boson_annihilator(q, B.apply_boson_annihilator(k, v))
    assert (ek_eq - eq_ek).norm() == 0.0
    lhs = B.apply_boson_annihilator(k, B.apply_boson_creator(q, v))
    rhs = B.apply_boson_creator(q, B.apply_boson_annihilator(k, v))
    comm = lhs - rhs
    if k == q:
        assert (comm - v).norm() < 1e-12
    else:
        assert comm.norm() == 0.0


@settings(max_examples=40, deadline=None)
@given(
    st.lists(st.sampled_from(UNIT2), min_size=0, max_size=4),
    st.lists(st.sampled_from(UNIT2), min_size=0, max_size=4),
    st.sampled_from(UNIT2),
)
def test_creator_annihilator_adjoint(ma, mb, k):
    u = B.BosonVector.from_monomial(ma)
    v = B.BosonVector.from_monomial(mb)
    lhs = u.inner(B.apply_boson_creator(k, v))
    rhs = B.apply_boson_annihilator(k, u).inner(v)
    assert lhs == pytest.approx(rhs, abs=1e-12)


def test_creator_rejects_zero_mode():
    with pytest.raises(ValueError):
        B.apply_boson_creator((0, 0), B.BosonVector.vacuum())


def test_number_operator_from_ladder():
    mono = [(1, 0), (1, 0), (0, 1)]
    v = B.BosonVector.from_monomial(mono)
    n_tot = 0.0
    for k in UNIT2:
        n_tot += v.inner(
            B.apply_boson_creator(k, B.apply_boson_annihilator(k, v))
        ).real
    assert n_tot == pytest.approx(3.0 * v.norm_sq())


# -------------------------------------------------------------- windows


def test_window_validation():
    with pytest.raises(ValueError):
        B.TruncationWindow(modes=((1, 0),), max_degree=2)  # not closed
    with pytest.raises(ValueError):
        B.TruncationWindow(modes=((0, 0), (0, 0)), max_degree=2)
    with pytest.raises(ValueError):
        B.TruncationWindow(modes=((1, 0), (-1, 0)), max_degree=-1)
    w = B.TruncationWindow(modes=[[1, 0], [-1, 0]], max_degree=3)
    assert w.modes == ((-1, 0), (1, 0))
    assert w.d == 2
    assert w.pairs() == [((-1, 0), (1, 0))]


def test_window_from_radius():
    w = window2(m=2)
    assert len(w.modes) == 4
    assert set(w.modes) == set(UNIT2)
    with pytest.raises(ValueError):
        B.TruncationWindow.from_radius(2, 0, 2)


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=4), st.sampled_from([1, 2, 4]))
def test_window_dims_match_enumeration(m, radius_sq):
    w = B.TruncationWindow.from_radius(2, radius_sq, m)
    monos = B.window_monomials(w)
    assert len(monos) == B.window_dim(w)
    by_deg = Counter(len(mono) for mono in monos)
    for deg in range(m + 1):
        assert by_deg[deg] == B.window_dim_at_degree(w, deg)
    # ordered by degree, no duplicates
    assert sorted(monos, key=len) == list(monos)
    assert len(set(monos)) == len(monos)


# -------------------------------------------------------------- weights


def test_check_weights_collects_problems():
    with pytest.raises(ValueError, match="missing opposite"):
        B.check_weights({(1, 0): 1.0})
    with pytest.raises(ValueError, match="zero mode"):
        B.check_weights({(0, 0): 1.0, (1, 0): 1.0, (-1, 0): 1.0})
    with pytest.raises(ValueError, match="!="):
        B.check_weights({(1, 0): 1.0, (-1, 0): 2.0})


def test_hb_weights_values(small2):
    pot = F.unit_potential(2)
    w = B.hb_weights(small2, pot)
    # lambda = N^(-alpha)/2 = 5/2 at alpha=-1, |C_k| = 3 for unit modes
    assert set(w) == set(UNIT2)
    for k in UNIT2:
        assert w[k] == pytest.approx(2.5 * 3.0)


def test_hb_tilde_weights_values():
    pot = F.unit_potential(2)
    w = B.hb_tilde_weights(pot)
    for k in UNIT2:
        assert w[k] == pytest.approx(2 * math.pi)


def test_hb_apply_vacuum_expectation(small2):
    pot = F.unit_potential(2)
    w = B.hb_weights(small2, pot)
    vac = B.BosonVector.vacuum()
    image = B.hb_apply(w, vac)
    # (e_k^dag + e_{-k})(e_{-k}^dag + e_k) vacuum = vacuum + pair excitation
    assert vac.inner(image).real == pytest.approx(sum(w.values()))
    lower, upper = F.trivial_bounds(small2, pot)
    assert vac.inner(image).real == pytest.approx(upper - lower)


def test_hb_form_matrix_single_pair_frozen():
    w = {(1, 0): 1.0, (-1, 0): 1.0}
    monos = [(), ((-1, 0), (1, 0))]
    mat = B.hb_form_matrix(w, monos)
    # each mode contributes 1 to the diagonal vacuum entry and couples the
    # vacuum to the charge-zero pair state
    assert mat == pytest.approx(np.array([[2.0, 2.0], [2.0, 6.0]]))


def test_hb_form_matrix_is_symmetric(rng):
    w = {(1, 0): 0.7, (-1, 0): 0.7, (0, 1): 1.3, (0, -1): 1.3}
    monos = B.window_monomials(window2(m=3))
    mat = B.hb_form_matrix(w, monos)
    assert np.allclose(mat, mat.T, atol=1e-12)


# ---------------------------------------------------- truncated minimum


def test_block_minimum_frozen_values():
    # budget 0: vacuum energy 2g; budget 2: 2x2 charge-0 block
    # [[2g, 2g], [2g, 6g]] with bottom eigenvalue (4 - 2 sqrt(2)) g
    val0, c0, coef0 = B._block_minimum(1.0, 0)
    assert val0 == pytest.approx(2.0)
    assert (c0, coef0) == (0, (1.0,))
    val2, c2, _ = B._block_minimum(1.0, 2)
    assert val2 == pytest.approx(4.0 - 2.0 * math.sqrt(2.0), rel=1e-14)
    assert c2 == 0
    # odd budgets cannot improve a charge-0 minimizer
    val1, _, _ = B._block_minimum(1.0, 1)
    assert val1 == pytest.approx(2.0)
    val3, _, _ = B._block_minimum(1.0, 3)
    assert val3 == pytest.approx(val2)


def test_block_minimum_matches_dense_form():
    g = 0.85
    w = {(1, 0): g, (-1, 0): g}
    for m in range(5):
        window = B.TruncationWindow(modes=((1, 0), (-1, 0)), max_degree=m)
        monos = B.window_monomials(window)
        mat = B.hb_form_matrix(w, monos)
        gram = B.gram_matrix(monos)
        dense = scipy_eigh_min(mat, gram)
        assert B._block_minimum(g, m)[0] == pytest.approx(dense, rel=1e-12)


def scipy_eigh_min(mat, gram):
    import scipy.linalg

    return float(scipy.linalg.eigh(mat, gram, eigvals_only=True)[0])


def test_hb_min_truncated_single_pair():
    w = {(1, 0): 1.0, (-1, 0): 1.0}
    window = B.TruncationWindow(modes=((1, 0), (-1, 0)), max_degree=2)
    res = B.hb_min_truncated(w, window)
    assert res.value == pytest.approx(4.0 - 2.0 * math.sqrt(2.0), rel=1e-14)
    assert res.outside_weight == 0.0
    assert res.allocation == {(-1, 0): 2}
    # the reported argmin achieves the reported value
    num = res.argmin.inner(B.hb_apply(w, res.argmin)).real
    den = res.argmin.norm_sq()
    assert num / den == pytest.approx(res.value, rel=1e-12)


def test_hb_min_monotone_and_decaying():
    w = {(1, 0): 1.0, (-1, 0): 1.0}
    values = []
    for m in range(0, 9):
        window = B.TruncationWindow(modes=((1, 0), (-1, 0)), max_degree=m)
        values.append(B.hb_min_truncated(w, window).value)
    assert values[0] == pytest.approx(2.0)
    for a, b in zip(values, values[1:]):
        assert b <= a + 1e-12
    # strictly below half the vacuum energy once six quanta are allowed
    assert values[6] < 0.5 * values[0]


def test_hb_min_argmin_rayleigh_quotient(small2):
    pot = F.unit_potential(2)
    w = B.hb_weights(small2, pot)
    window = window2(m=4)
    res = B.hb_min_truncated(w, window)
    num = res.argmin.inner(B.hb_apply(w, res.argmin)).real
    assert num / res.argmin.norm_sq() == pytest.approx(res.value, rel=1e-12)
    assert sum(res.allocation.values()) <= window.max_degree


def test_hb_min_outside_weight():
    # support mode (1, 1) is outside the unit window, so it contributes
    # its vacuum weight and nothing else
    w = {
        (1, 0): 1.0,
        (-1, 0): 1.0,
        (1, 1): 0.4,
        (-1, -1): 0.4,
    }
    window = window2(m=2)
    res = B.hb_min_truncated(w, window)
    assert res.outside_weight == pytest.approx(0.8)
    inner = B.hb_min_truncated(
        {(1, 0): 1.0, (-1, 0): 1.0}, window
    )
    assert res.value == pytest.approx(inner.value + 0.8)


def test_hb_min_never_below_dense_span_minimum(small2):
    # the product assembly is an upper bound for the minimum over the
    # full truncated span; for a single active pair they agree
    pot = F.unit_potential(2)
    w = B.hb_weights(small2, pot)
    window = window2(m=2)
    res = B.hb_min_truncated(w, window)
    monos = B.window_monomials(window)
    dense = scipy_eigh_min(B.hb_form_matrix(w, monos), B.gram_matrix(monos))
    assert res.value >= dense - 1e-10


# ------------------------------------------------------------ domination


def test_domination_check_passes(small2):
    pot = F.unit_potential(2)
    report = B.hb_domination_check(small2, pot, window2(m=2))
    assert report.passed
    assert report.witness is None
    assert report.min_eig_base >= -1e-10
    assert report.min_eig_gap >= -1e-10
    n = L.particle_count(small2)
    kf = math.sqrt(small2.fermi_radius_sq)
    expect = (
        report.ratio_constant
        * kf ** (small2.d - 1)
        / (4 * math.pi * n ** 0.5)
        * n ** (1 - small2.alpha - 0.5)
    )
    assert report.multiplier == pytest.approx(expect)


def test_domination_check_larger_config():
    config = L.GasConfig(d=2, fermi_radius_sq=4, alpha=-1.0)
    pot = F.unit_potential(2, radius_sq=2)
    window = B.TruncationWindow.from_radius(2, 2, 2)
    report = B.hb_domination_check(config, pot, window)
    assert report.passed


def test_domination_multiplier_saturates_at_crescent_bound(small2):
    # with the fitted constant the base weights never exceed
    # multiplier * slow weights mode by mode
    pot = F.unit_potential(2)
    base = B.hb_weights(small2, pot)
    slow = B.hb_tilde_weights(pot)
    report = B.hb_domination_check(small2, pot, window2(m=2))
    for k in base:
        assert base[k] <= report.multiplier * slow[k] + 1e-12


# ---------------------------------------------------------------- random


def test_random_boson_vector(rng):
    v = B.random_boson_vector(window2(m=3), rng, n_terms=5)
    assert v.norm() == pytest.approx(1.0)
    assert all(len(m) <= 3 for m in v.terms)
