import collections
import itertools

import pytest
from hypothesis import given, strategies as st

from bellaudit.outcomes import (
    Quadruple,
    delta,
    enumerate_quadruples,
    equality_count,
    product_identity_holds,
    select_actual,
)

signs = st.sampled_from([1, -1])
quadruples = st.builds(Quadruple, signs, signs, signs, signs)
labels = st.sampled_from([1, 2])


def _equalities_by_products(x1, x2, y1, y2):
    # x*y == 1 exactly when x == y for signed units
    return sum(p == 1 for p in (x1 * y1, x1 * y2, x2 * y1, x2 * y2))


@pytest.mark.parametrize(
    "q, expected",
    [((1, 1, 1, 1), 4), ((1, 1, -1, -1), 0), ((1, 1, 1, -1), 2)],
)
def test_equality_count_examples(q, expected):
    assert equality_count(Quadruple(*q)) == expected


@pytest.mark.parametrize("q, expected", [((1, 1, 1, 1), -2), ((1, 1, -1, 1), 0)])
def test_delta_examples(q, expected):
    assert delta(Quadruple(*q)) == expected


def test_delta_pointwise_bound_over_all_quadruples():
    values = [delta(q) for q in enumerate_quadruples()]
    assert max(values) == 0
    assert set(values) == {0, -2}


@pytest.mark.parametrize("q", [(1, 1, 1, 1), (-1, 1, 1, -1)])
def test_product_identity_examples(q):
    assert product_identity_holds(Quadruple(*q))


def test_product_identity_exhaustive():
    assert all(product_identity_holds(Quadruple(*v)) for v in itertools.product([1, -1], repeat=4))


@pytest.mark.parametrize(
    "a, b, expected", [(1, 1, (1, 1)), (2, 2, (-1, -1)), (1, 2, (1, -1))]
)
def test_select_actual_examples(a, b, expected):
    assert select_actual(Quadruple(1, -1, 1, -1), a, b) == expected


def test_enumeration():
    qs = enumerate_quadruples()
    assert len(qs) == 16
    assert len(set(qs)) == 16
    hist = collections.Counter(equality_count(q) for q in qs)
    assert hist == {0: 2, 2: 12, 4: 2}
    # independent oracle over raw tuples
    oracle = collections.Counter(
        _equalities_by_products(*v) for v in itertools.product([1, -1], repeat=4)
    )
    assert oracle == hist


@given(quadruples)
def test_parity_and_delta_properties(q):
    assert equality_count(q) == _equalities_by_products(*q)
    assert equality_count(q) in (0, 2, 4)
    assert delta(q) in (0, -2)
    assert product_identity_holds(q)


@given(quadruples, labels, labels, labels)
def test_select_actual_is_local(q, a, b, b2):
    assert select_actual(q, a, b)[0] == select_actual(q, a, b2)[0]
    assert select_actual(q, b, a)[1] == select_actual(q, b2, a)[1]


@given(quadruples)
def test_code_roundtrip(q):
    assert Quadruple.from_code(q.code()) == q


@pytest.mark.parametrize("bad", [0, 2, 1.0, True, None])
def test_rejects_non_units(bad):
    with pytest.raises(ValueError):
        Quadruple.of(1, 1, 1, bad)


def test_rejects_bad_setting():
    with pytest.raises(ValueError):
        select_actual(Quadruple(1, 1, 1, 1), 3, 1)
