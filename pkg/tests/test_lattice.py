import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diracwalk import lattice as lt
from diracwalk import transitions as tr

CANON = tr.canonical_transitions()
SPEC = lt.LatticeSpec(16, 16, 0.3)


def test_spec_validation():
    with pytest.raises(ValueError):
        lt.LatticeSpec(15, 16, 0.3)
    with pytest.raises(ValueError):
        lt.LatticeSpec(2, 16, 0.3)
    with pytest.raises(ValueError):
        lt.LatticeSpec(16, 16, 1.0)


def test_require_wrap_free():
    lt.require_wrap_free(lt.LatticeSpec(24, 24, 0.1), 10)
    with pytest.raises(ValueError):
        lt.require_wrap_free(lt.LatticeSpec(22, 24, 0.1), 10)


def test_delta_one_step():
    f = lt.step(lt.init_delta(SPEC, 8, 8, 1), CANON)
    v = f.values
    assert v[1, 9, 9] == 0.5 and v[3, 7, 7] == 0.5
    assert v.sum() == 1.0


def test_two_step_alternation():
    f1 = lt.step(lt.init_delta(SPEC, 8, 8, 1), CANON)
    assert f1.values[[0, 2]].sum() == 0
    f2 = lt.step(f1, CANON)
    assert f2.values[[1, 3]].sum() == 0


def test_flow_table_two_steps():
    f = lt.init_delta(SPEC, 8, 8, 1)
    f = lt.step(lt.step(f, CANON), CANON)
    occupied = {(s + 1, t - 8, x - 8): f.values[s, t, x] for s, t, x in zip(*np.nonzero(f.values))}
    # 1 -(+1,+1)-> 2 -(+1,-1)-> 3 ; 1 -> 2 -(-1,+1)-> 1 ; 1 -(-1,-1)-> 4 -(+1,-1)-> 1 ; 4 -(-1,+1)-> 3
    assert occupied == {(3, 2, 0): 0.25, (1, 0, 2): 0.25, (1, 0, -2): 0.25, (3, -2, 0): 0.25}


fields = st.integers(0, 2**32 - 1).map(lambda s: lt.random_field(SPEC, np.random.default_rng(s)))


@settings(max_examples=30, deadline=None)
@given(fields, st.floats(0, 0.999))
def test_mass_and_sign_preserved(f, eps):
    ts = tr.apply_bias(CANON, eps)
    g = lt.step(f, ts)
    assert abs(g.mass() - f.mass()) <= 1e-12
    assert g.values.min() >= 0


def test_mass_conservation_long_run():
    spec = lt.LatticeSpec(64, 64, 0.1)
    rng = np.random.default_rng(1)
    for eps in (0.0, 0.1):
        ts = tr.apply_bias(CANON, eps)
        for f in (lt.random_field(spec, rng), lt.init_delta(spec, 0, 0, 2)):
            m0 = f.mass()
            for _ in range(200):
                f = lt.step(f, ts)
                assert abs(f.mass() - m0) <= 1e-12
                m0 = f.mass()


def test_operator_is_linear():
    rng = np.random.default_rng(3)
    a, b = rng.random(SPEC.shape), rng.random(SPEC.shape)
    lhs = lt.apply_operator(2 * a + b, CANON)
    rhs = 2 * lt.apply_operator(a, CANON) + lt.apply_operator(b, CANON)
    assert np.abs(lhs - rhs).max() < 1e-14


def test_step_is_deterministic():
    f = lt.random_field(SPEC, np.random.default_rng(0))
    assert lt.step(f, CANON).values.tobytes() == lt.step(f, CANON).values.tobytes()


@pytest.mark.parametrize("mu", [0.1, 0.5, 0.9])
@pytest.mark.parametrize("L", [0, 1, 50, 200])
def test_prior_normalization(mu, L):
    p = lt.OrdinalPrior(mu, L)
    assert abs(p.total() - 1) <= 1e-14
    assert p.weights[-1] == pytest.approx(p.norm)
    assert np.all(np.diff(p.weights) > 0)


def test_prior_oracle():
    p = lt.OrdinalPrior(0.5, 2)
    assert np.allclose(p.weights, [1 / 7, 2 / 7, 4 / 7], rtol=0, atol=1e-16)


def test_fold_matches_history():
    f0 = lt.random_field(SPEC, np.random.default_rng(5))
    prior = lt.OrdinalPrior(0.4, 12)
    hist = lt.evolve(f0, CANON, 12)
    avg = lt.ordinal_average(hist, prior)
    run = lt.evolve_fold(f0, CANON, prior)
    assert np.abs(avg.values - run.pbar.values).max() < 1e-15
    assert np.array_equal(run.p_last.values, hist[-1].values)


def test_evolve_capacity():
    with pytest.raises(lt.CapacityError):
        lt.evolve(lt.init_delta(SPEC, 0, 0, 1), CANON, 100, max_bytes=1000)


@pytest.mark.parametrize("mu", [0.1, 0.5, 0.9])
@pytest.mark.parametrize("L", [0, 1, 50, 200])
def test_telescoping(mu, L):
    f0 = lt.random_field(lt.LatticeSpec(32, 32, mu), np.random.default_rng(L))
    run = lt.evolve_fold(f0, CANON, lt.OrdinalPrior(mu, L))
    assert lt.telescoping_residual(run.pbar, run.p0, run.p_end, CANON, run.prior) <= 1e-12


def test_eigen_relation_boundary():
    spec = lt.LatticeSpec(64, 64, 0.5)
    f0 = lt.init_delta(spec, 32, 32, 1)
    run = lt.evolve_fold(f0, CANON, lt.OrdinalPrior(0.5, 20))
    roi = lt.RegionOfInterest(28, 36, 28, 36)
    d = lt.eigen_relation_residual(run.pbar, run.p_end, CANON, 0.5, roi, p0=run.p0, Lambda=20)
    assert abs(d.residual - d.exact_boundary) < 1e-15
    # after 21 hops the walker's mass near the origin is small but nonzero
    assert d.boundary_bound < 0.1


def test_roi_check():
    with pytest.raises(ValueError):
        lt.RegionOfInterest(0, 20, 0, 4).check(16, 16)


def test_packet_normalized():
    f = lt.init_packet(SPEC, (8, 8), 2.0, (0.5, 0.5, 0, 0))
    assert abs(f.mass() - 1) < 1e-12
    f.validate()
    with pytest.raises(ValueError):
        lt.init_packet(SPEC, (8, 8), 2.0, (1, 1, 0, 0))


def test_field_validate_rejects():
    v = np.zeros(SPEC.shape)
    v[0, 0, 0] = 0.5
    with pytest.raises(ValueError):
        lt.ProbField(v).validate()
    with pytest.raises(ValueError):
        lt.ProbField(np.zeros((3, 4, 4)))
