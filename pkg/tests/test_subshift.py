from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from circlewave.subshift import (
    BiSequence,
    canonical_families,
    demo_csv,
    limit_points,
    membership,
    metric,
    nonwandering_certificate,
    nonwandering_demo,
    parse_bisequence,
    shift_by,
    uniform,
    x_n,
    x_zero,
)


def test_membership_examples():
    assert membership(x_zero()) and membership(uniform(0)) and membership(uniform(1))
    assert membership(BiSequence(0, "111", 0)) and membership(BiSequence(1, "00", 1))
    assert membership(x_n(4)) and membership(BiSequence(1, "", 0))
    assert not membership(BiSequence(0, "1010", 0))
    assert not membership(BiSequence(0, "10010", 1))
    assert not membership(BiSequence(0, "1001", 0))
    # forbidden words that borrow symbols from the tails
    assert not membership(BiSequence(1, "01", 0))
    assert not membership(BiSequence(0, "101", 0))


def test_canonical_form_strips_redundant_tail_symbols():
    a = BiSequence(0, "0011", 1, origin=2)
    b = BiSequence(0, "", 1, origin=0)
    assert a == b
    assert [a[i] for i in range(-3, 3)] == [0, 0, 0, 1, 1, 1]


def test_serialisation_round_trip():
    for x in canonical_families(4):
        for n in (-3, 0, 5):
            y = shift_by(x, n)
            assert parse_bisequence(str(y)) == y
    with pytest.raises(ValueError):
        parse_bisequence("L:2 core:01 R:0 origin:0")


def test_shift_acts_as_group():
    x = x_n(3)
    for a in range(-5, 6):
        for b in range(-5, 6):
            assert shift_by(shift_by(x, a), b) == shift_by(x, a + b)
    assert shift_by(x, 0) == x
    assert shift_by(x, 1)[0] == x[1]


@pytest.mark.parametrize("x", canonical_families(3))
def test_membership_is_shift_invariant(x):
    m = membership(x)
    assert all(membership(shift_by(x, n)) == m for n in range(-50, 51))


def test_metric_examples():
    x0 = x_zero()
    assert metric(x0, x0) == 0
    assert metric(uniform(0), uniform(1)) == 1
    assert metric(x0, uniform(1)) == 1  # disagree at -1
    assert metric(x0, uniform(0)) == 1  # disagree at 0
    for n in range(1, 10):
        assert metric(x0, x_n(n)) == Fraction(1, 2**n)
        assert metric(x0, shift_by(x_n(n), 2 * n)) == Fraction(1, 2**n)
    assert metric(x0, x_n(10), k_max=3) == Fraction(1, 8)


sequences = st.builds(
    BiSequence,
    st.integers(0, 1),
    st.text(alphabet="01", max_size=8),
    st.integers(0, 1),
    st.integers(-6, 6),
)


@settings(max_examples=150, deadline=None)
@given(sequences, sequences, sequences)
def test_metric_is_an_ultrametric(x, y, z):
    assert metric(x, y) == metric(y, x)
    assert (metric(x, y) == 0) == (x == y)
    assert metric(x, z) <= max(metric(x, y), metric(y, z))


def test_limit_points_are_uniform():
    pts = limit_points(8, 12)
    assert pts == sorted(pts, key=str) and set(map(str, pts)) == {str(uniform(0)), str(uniform(1))}


def test_nonwandering_certificate():
    certs = nonwandering_certificate(12)
    assert all(c.ok for c in certs)
    assert certs[-1].d_start == Fraction(1, 4096)


def test_demo_rows_and_csv():
    rows, is_limit = nonwandering_demo(8)
    assert len(rows) == 8 and not is_limit
    text = demo_csv(rows)
    lines = text.splitlines()
    assert lines[0] == "n,d_x0_xn,d_x0_shifted_xn,d_float"
    assert lines[3] == "3,1/8,1/8,0.125"
    with pytest.raises(ValueError):
        nonwandering_demo(0)
