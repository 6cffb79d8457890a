import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gabor_lattice.sampling import (
    DeclaredReal,
    SamplingSet,
    SequenceDescriptor,
    build_sampling_set,
    lower_beurling_density,
    reciprocal_series_check,
    validate_uniqueness_config,
    weyl_density_check,
    windowed_lower_density,
)
from gabor_lattice.signals import CompactClassSpec, SisSpec

SQ2 = math.sqrt(2)
A = SequenceDescriptor.affine


def sis(beta=SQ2):
    return SisSpec(beta, -3, np.ones(7))


def irr(beta=SQ2):
    return DeclaredReal(beta, irrational=True, symbol="sqrt2")


# descriptors ---------------------------------------------------------------

@pytest.mark.parametrize("args", [("affine", (0, 1)), ("half_line", (2, 0)), ("half_line", (1, 0.5)),
                                  ("power", (0,)), ("explicit", (1, 1)), ("explicit", ()), ("spiral", ())])
def test_descriptor_rejects(args):
    with pytest.raises(ValueError):
        SequenceDescriptor(*args)


def test_materialize_kinds():
    assert A(0.5, 1, 2).materialize().tolist() == [0, 0.5, 1, 1.5, 2]
    assert SequenceDescriptor.half_line(-1, 2, 3).materialize().tolist() == [2, 1, 0, -1]
    assert SequenceDescriptor.power(2, 2).materialize().tolist() == [-4, -1, 0, 1, 4]
    assert SequenceDescriptor.explicit([3, -1, 2]).materialize().tolist() == [-1, 2, 3]
    assert A(1, 0).negated() == A(-1, -0.0)


def test_descriptor_round_trip():
    d = SequenceDescriptor.power(1.5, 7)
    assert SequenceDescriptor.from_dict(d.to_dict()) == d


# sampling sets ---------------------------------------------------------------

def test_lattice_example():
    X = build_sampling_set(A(1, 0), A(0.5, 0), 0.0, N=2)
    assert len(X) == 25
    pts = {tuple(p) for p in X.points.tolist()}
    assert {(0.0, 0.0), (1.0, 0.5), (-2.0, -1.0)} <= pts
    # lexicographic in (ix, iw)
    assert X.points[0].tolist() == [-2.0, -1.0] and X.points[1].tolist() == [-2.0, -0.5]


def test_half_line_example():
    X = build_sampling_set(SequenceDescriptor.half_line(1, 0), A(0.5, 0), N=5)
    assert np.all(X.points[:, 0] >= 0)


def test_quarter_rotation_example():
    X = build_sampling_set(A(1, 0), A(0.5, 0), math.pi / 2, N=3)
    got = {(round(x, 12) + 0.0, round(w, 12) + 0.0) for x, w in X.points}
    want = {(-w + 0.0, x + 0.0) for x in range(-3, 4) for w in np.arange(-3, 4) * 0.5}
    assert got == want
    # equals 0.5Z x Z up to the sign of one factor
    assert {abs(x) for x, _ in got} <= {abs(v) for v in np.arange(-3, 4) * 0.5}


def test_build_rejects_bad_truncation():
    with pytest.raises(ValueError):
        build_sampling_set(A(1, 0), A(1, 0), N=0)


@settings(max_examples=20, deadline=None)
@given(st.floats(-7, 7), st.integers(1, 4))
def test_rotation_invariants(theta, n):
    X0 = build_sampling_set(A(1, 0.3), A(0.7, 0), 0.0, N=n)
    X = build_sampling_set(A(1, 0.3), A(0.7, 0), theta, N=n)
    assert len(X) == len(X0)
    d0 = np.linalg.norm(X0.points[:, None] - X0.points[None], axis=-1)
    d = np.linalg.norm(X.points[:, None] - X.points[None], axis=-1)
    assert np.max(np.abs(d - d0)) < 1e-12
    np.testing.assert_array_equal(X.unrotated(), X0.points)


def test_sampling_set_serialization():
    X = build_sampling_set(A(1, 0), A(0.5, 0), 0.4, N=1)
    lines = X.to_csv().splitlines()
    assert lines[0] == "x,omega" and len(lines) == 10
    Y = SamplingSet.from_dict(X.to_dict())
    np.testing.assert_array_equal(Y.points, X.points)


# densities -----------------------------------------------------------------

def test_density_examples():
    assert lower_beurling_density(A(0.5, 0)).value == 2.0
    eps = 0.5
    d = lower_beurling_density(A(SQ2 / (2 + eps), 0)).value
    assert d == pytest.approx((2 + eps) / SQ2) and d > 2 / SQ2
    ests = [lower_beurling_density(SequenceDescriptor.explicit(SequenceDescriptor.power(2, n).materialize()))
            for n in (10, 40, 160)]
    assert all(not e.exact for e in ests)
    assert ests[0].value > ests[1].value > ests[2].value
    assert ests[2].value < 0.02


@settings(max_examples=30, deadline=None)
@given(st.floats(0.1, 5), st.floats(-10, 10))
def test_density_independent_of_offset(a, b):
    assert lower_beurling_density(A(a, b)).value == lower_beurling_density(A(a, 0)).value


def test_windowed_density_of_lattice():
    assert windowed_lower_density(np.arange(-50, 51) * 0.5, 10.0) == pytest.approx(2.0)


def test_half_line_density_convention():
    assert lower_beurling_density(SequenceDescriptor.half_line(1, 0)).value == 1.0


# reciprocal series ---------------------------------------------------------

def test_reciprocal_examples():
    assert reciprocal_series_check(A(1, 0), 0) == "diverges"
    assert reciprocal_series_check(SequenceDescriptor.power(2), 0) == "converges"
    assert reciprocal_series_check(SequenceDescriptor.power(0.5), 0) == "diverges"
    for seq in [A(1, 0), A(0.3, 0.1), SequenceDescriptor.half_line(-1, 4), SequenceDescriptor.power(1)]:
        assert reciprocal_series_check(seq, 0.1) == "converges"
    assert reciprocal_series_check(SequenceDescriptor.explicit([1, 2, 3]), 0) == "indeterminate"
    with pytest.raises(ValueError):
        reciprocal_series_check(A(1, 0), -1)


# Weyl ------------------------------------------------------------------------

def test_weyl_examples():
    assert weyl_density_check(A(1, 0), irr()).verdict == "dense"
    r = weyl_density_check(A(1, 0), 1.0, rational_hint=(1, 1))
    assert r.verdict == "not_dense" and r.period == 2.0
    # integers mod 2 land on {0, 1}
    assert r.residues == (0.0, 1.0)
    e = weyl_density_check(A(1, 0), SQ2, N=10_000)
    assert e.verdict == "empirical"
    assert e.max_gap < 3 * (2 / SQ2) / 10_000


def test_weyl_rational_residue_count():
    r = weyl_density_check(A(1, 0), DeclaredReal(1.4, rational=(7, 5)))
    assert r.verdict == "not_dense" and len(r.residues) == 10


def test_declared_real_rejects_conflict():
    with pytest.raises(ValueError):
        DeclaredReal(1.0, rational=(1, 1), irrational=True)
    with pytest.raises(ValueError):
        DeclaredReal(1.0, rational=(1, 0))


# validator -------------------------------------------------------------------

def test_validator_examples():
    rep = validate_uniqueness_config(CompactClassSpec(1.0), build_sampling_set(A(1, 0), A(0.5, 0)))
    assert rep.passed and rep.theorem == "compact_lattice"
    rep = validate_uniqueness_config(sis(), build_sampling_set(A(SQ2 / 2.5, 0), A(1, 0)), irr())
    assert rep.passed and rep.theorem == "sis_lattice"
    rep = validate_uniqueness_config(sis(), build_sampling_set(A(2 * SQ2, 0), A(1, 0)), irr())
    assert rep.verdicts == ("fail", "pass")


def test_validator_failures_and_unknowns():
    cls = CompactClassSpec(1.0)
    rep = validate_uniqueness_config(cls, build_sampling_set(A(1, 0), A(1, 0)))
    assert rep.verdicts == ("pass", "fail") and rep.failed
    rep = validate_uniqueness_config(cls, build_sampling_set(SequenceDescriptor.power(2), A(0.5, 0)))
    assert rep.verdicts == ("fail", "pass") and rep.theorem == "compact_general"
    rep = validate_uniqueness_config(cls, build_sampling_set(A(1, 0), SequenceDescriptor.explicit([0, 1])))
    assert rep.verdicts == ("pass", "indeterminate") and not rep.failed and not rep.passed
    # undeclared beta: only measurable
    rep = validate_uniqueness_config(sis(), build_sampling_set(A(0.5, 0), A(1, 0)))
    assert rep.verdicts[1] == "indeterminate"
    with pytest.raises(ValueError):
        validate_uniqueness_config(sis(), build_sampling_set(A(0.5, 0), A(1, 0)), 1.5)
    with pytest.raises(TypeError):
        validate_uniqueness_config(object(), build_sampling_set(A(1, 0), A(1, 0)))


def test_validator_report_rendering():
    rep = validate_uniqueness_config(CompactClassSpec(1.0), build_sampling_set(A(1, 0), A(1, 0)))
    d = rep.to_dict()
    assert d["passed"] is False and len(d["checks"]) == 2
    assert "hypotheses not met" in rep.table()


@settings(max_examples=30, deadline=None)
@given(st.sampled_from([0.25, 0.5, 1.0, 2.0]), st.sampled_from([0.25, 0.5, 1.0]), st.sampled_from([0.5, 1.0, 2.0]))
def test_validator_monotone(a, shrink, c):
    # a finer progression contains the coarser one (a -> a * shrink with 1/shrink integer)
    cls = CompactClassSpec(c)
    coarse = validate_uniqueness_config(cls, build_sampling_set(A(1, 0), A(a, 0)))
    fine = validate_uniqueness_config(cls, build_sampling_set(A(1, 0), A(a * shrink, 0)))
    if coarse.passed:
        assert fine.passed
    s = sis()
    coarse = validate_uniqueness_config(s, build_sampling_set(A(a, 0), A(1, 0)), irr())
    fine = validate_uniqueness_config(s, build_sampling_set(A(a * shrink, 0), A(1, 0)), irr())
    if coarse.passed:
        assert fine.passed
