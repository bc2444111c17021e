from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diracwalk import matrixkit as mk
from diracwalk import transitions as tr
from diracwalk.transitions import HopLabel


def test_canonical_entries():
    ts = tr.canonical_transitions()
    h = Fraction(1, 2)
    a = np.asarray(ts.hops[HopLabel(1, 1)])
    assert a[1, 2] == h and a[3, 0] == h and sum(a.flat) == 1
    c = np.asarray(ts.hops[HopLabel(1, -1)])
    assert c[0, 1] == h and c[2, 3] == h
    assert mk.max_abs(ts.t00) == 0
    assert all(s == 1 for s in ts.column_sums())


def test_walker_moves_opposite_to_shift_label():
    ts = tr.canonical_transitions()
    # state 1 (col 0) feeds state 2 through T^(-1,-1): walker moves by (+1, +1)
    moves = {(b.source, b.dest): (b.dt, b.dx) for b in ts.branches()}
    assert moves[(0, 1)] == (1, 1)
    assert moves[(0, 3)] == (-1, -1)


def test_derive_unique_and_canonical():
    d = tr.derive_transitions()
    assert d.n_solutions == 1 and d.unique and d.matches_canonical
    canon = tr.canonical_transitions()
    for lab in tr.HOP_LABELS:
        assert (d.transitions.hops[lab] == canon.hops[lab]).all()


@pytest.mark.parametrize("km", [Fraction(1, 2), 2, Fraction(3, 2)])
def test_kappa_mu_must_be_one(km):
    with pytest.raises(tr.InfeasibleConstraintsError):
        tr.derive_transitions(km)


def test_report_residuals_vanish():
    rep = tr.constraint_report(tr.canonical_transitions())
    assert all(v == 0 for v in rep.residuals.values()), rep.residuals
    assert rep.kappa_mu == 1 and rep.c1 == 0 and rep.c2 == 0


def test_report_mass_matrix():
    rep = tr.constraint_report(tr.canonical_transitions(), mu=Fraction(1, 2))
    assert (rep.r_m == np.array([[3, 0], [0, -1]], dtype=object)).all()


def test_report_flags_hop_sum():
    rep = tr.constraint_report(tr.canonical_transitions())
    d = {x["name"]: x for x in rep.discrepancies}["hop_sum_reference_rhs"]
    half = Fraction(1, 2)
    expect_sum = mk.kron(mk.I2 + mk.SIGMA_X, mk.SIGMA_X) * half
    assert mk.max_abs(d["actual"] - expect_sum) == 0
    assert mk.max_abs(d["deviation"] - mk.kron(mk.SIGMA_X, mk.SIGMA_X) * half) == 0


def test_disjoint_support():
    ts = tr.canonical_transitions()
    mats = [np.asarray(ts.hops[l], dtype=object) for l in tr.HOP_LABELS]
    for i in range(4):
        for j in range(i + 1, 4):
            assert mk.max_abs(mats[i] * mats[j]) == 0


@settings(max_examples=40, deadline=None)
@given(st.fractions(min_value=0, max_value=Fraction(999, 1000), max_denominator=1000))
def test_bias_keeps_columns_stochastic(eps):
    ts = tr.apply_bias(tr.canonical_transitions(), eps)
    assert all(s == 1 for s in ts.column_sums())
    fwd = [b for b in ts.branches() if b.dt > 0]
    assert len(fwd) == 4 and all(b.weight == (1 + eps) / 2 for b in fwd)


def test_bias_float():
    ts = tr.apply_bias(tr.canonical_transitions(), 0.1)
    assert max(abs(float(s) - 1) for s in ts.column_sums()) < 1e-15


def test_bias_range_and_double_application():
    canon = tr.canonical_transitions()
    with pytest.raises(ValueError):
        tr.apply_bias(canon, 1)
    with pytest.raises(ValueError):
        tr.apply_bias(canon, -0.1)
    assert tr.apply_bias(canon, 0) is canon
    with pytest.raises(ValueError):
        tr.apply_bias(tr.apply_bias(canon, Fraction(1, 10)), Fraction(1, 10))


def test_transition_set_validation():
    canon = tr.canonical_transitions()
    hops = dict(canon.hops)
    hops[HopLabel(1, 1)] = mk.mat([[2, 0, 0, 0]] + [[0] * 4] * 3)
    with pytest.raises(ValueError):
        tr.TransitionSet(canon.t00, hops)
    bad = dict(canon.hops)
    bad.pop(HopLabel(1, 1))
    with pytest.raises(ValueError):
        tr.TransitionSet(canon.t00, bad)


def test_report_serializes():
    d = tr.constraint_report(tr.canonical_transitions()).to_dict()
    assert d["kappa_mu"] == "1"
    assert d["s_sigma"][0][3] == "1/2"


def test_derive_speed():
    import time
    t = time.perf_counter()
    tr.derive_transitions()
    assert time.perf_counter() - t < 1.0
