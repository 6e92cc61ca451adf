import itertools
from math import gcd
from functools import reduce

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from spnsde import models
from spnsde.core import validate_model
from spnsde.structural import (BoundsError, Dependence, OutsideBox, boundary_split, check_coverage,
                               classify_density_dependence, farkas, minimal_psemiflows,
                               place_bounds)

from conftest import structure


def brute_force_minimal(L, k_max):
    """Minimal-support semiflows with entries <= k_max, by exhaustive search."""
    n_p = L.shape[0]
    found = []
    for v in itertools.product(range(k_max + 1), repeat=n_p):
        if any(v) and not np.any(np.array(v) @ L):
            found.append(v)
    supports = {frozenset(i for i, c in enumerate(v) if c) for v in found}
    minimal = {s for s in supports if not any(o < s for o in supports)}
    out = set()
    for v in found:
        s = frozenset(i for i, c in enumerate(v) if c)
        if s in minimal:
            g = reduce(gcd, [c for c in v if c])
            out.add(tuple(c // g for c in v))
    return out


def test_cycle_basis_and_constant(cycle):
    basis = minimal_psemiflows(cycle)
    assert basis.vectors == ((1, 1),)
    assert basis.constants == (100,)
    assert check_coverage(cycle, basis)


def test_sir_basis(sir1, sir2):
    for m, total in ((sir1, 200), (sir2, 200)):
        basis = minimal_psemiflows(m)
        assert basis.vectors == ((1, 1, 1, 1),)
        assert basis.constants == (total,)


def test_uncovered_place():
    growth = validate_model({
        "places": ["A", "B", "C"],
        "transitions": [
            {"name": "t1", "rate": 1, "input": {"A": 1}, "output": {"B": 1}},
            {"name": "t2", "rate": 1, "input": {"B": 1}, "output": {"A": 1}},
            {"name": "dup", "rate": 1, "input": {"C": 1}, "output": {"C": 2}},
        ],
        "initial_marking": {"A": 3, "C": 1},
    })
    basis = minimal_psemiflows(growth)
    assert basis.vectors == ((1, 1, 0),)
    assert not check_coverage(growth, basis)
    assert classify_density_dependence(growth, basis).classification is Dependence.NOT_COVERED
    with pytest.raises(BoundsError):
        place_bounds(growth, basis)


def test_weighted_semiflow():
    # 2A -> B: conserved quantity A + 2B
    net = validate_model({
        "places": ["A", "B"],
        "transitions": [
            {"name": "join", "rate": 1, "input": {"A": 2}, "output": {"B": 1}},
            {"name": "split", "rate": 1, "input": {"B": 1}, "output": {"A": 2}},
        ],
        "initial_marking": {"A": 7, "B": 1},
    })
    basis = minimal_psemiflows(net)
    assert basis.vectors == ((1, 2),)
    assert basis.constants == (9,)
    b = place_bounds(net, basis)
    np.testing.assert_array_equal(b.max, [9, 4])
    report = classify_density_dependence(net, basis)
    assert report.classification is Dependence.NEARLY_DENSITY_DEPENDENT
    assert report.nonunit_arcs == (("A", "join"),)


def test_classification(cycle, sir1):
    assert classify_density_dependence(cycle, minimal_psemiflows(cycle)).classification \
        is Dependence.DENSITY_DEPENDENT
    assert classify_density_dependence(sir1, minimal_psemiflows(sir1)).classification \
        is Dependence.DENSITY_DEPENDENT
    doc = models.cycle_document()
    doc["transitions"][0]["input"] = {"A": 2}
    doc["transitions"][0]["output"] = {"B": 2}
    heavy = validate_model(doc)
    rep = classify_density_dependence(heavy, minimal_psemiflows(heavy))
    assert rep.classification is Dependence.NEARLY_DENSITY_DEPENDENT
    assert rep.nonunit_arcs == (("A", "t1"),)


def test_bounds(cycle, sir1):
    _, b = structure(cycle)
    np.testing.assert_array_equal(b.min, [0, 0])
    np.testing.assert_array_equal(b.max, [100, 100])
    _, b = structure(sir1)
    np.testing.assert_array_equal(b.max, [200] * 4)
    exact = place_bounds(cycle, minimal_psemiflows(cycle), mode="exact")
    np.testing.assert_array_equal(exact.min, b.min[:2])
    np.testing.assert_array_equal(exact.max, [100, 100])
    assert exact.provenance == ("reachability", "reachability")


def test_boundary_split_sir(sir1):
    _, b = structure(sir1)
    sp = boundary_split([60.5, 70.2, 0.0, 69.3], b, sir1)
    assert sp.star_places == {sir1.place_index("I")}
    names = {sir1.transitions[t] for t in sp.star_transitions}
    assert names == {"ArriveI", "BecomeI", "BecomeR", "LeaveI"}
    assert sp.theta[sir1.transition_index("ArriveI")] == 1
    assert sp.theta[sir1.transition_index("ArriveS")] == 0


def test_boundary_split_corner(sir2):
    _, b = structure(sir2)
    sp = boundary_split([200.0, 0, 0, 0], b, sir2)
    assert sp.star_places == {0, 1, 2, 3}
    assert sp.star_transitions == frozenset(range(sir2.n_transitions))
    assert not sp.interior_transitions
    with pytest.raises(OutsideBox):
        boundary_split([201.0, 0, 0, -1.0], b, sir2)


def test_boundary_tolerance(cycle):
    _, b = structure(cycle)
    assert boundary_split([100 - 1e-8, 1e-8], b, cycle).star_places == {0, 1}
    assert boundary_split([100 - 1e-6, 1e-6], b, cycle).star_places == frozenset()


@st.composite
def small_nets(draw):
    n_p = draw(st.integers(2, 4))
    n_t = draw(st.integers(1, 4))
    cols = []
    for _ in range(n_t):
        i = draw(st.lists(st.integers(0, 2), min_size=n_p, max_size=n_p).filter(any))
        o = draw(st.lists(st.integers(0, 2), min_size=n_p, max_size=n_p))
        assume(i != o)
        cols.append(np.array(o) - np.array(i))
    return np.stack(cols, axis=1)


@settings(max_examples=60, deadline=None)
@given(L=small_nets())
def test_farkas_matches_brute_force(L):
    got = farkas(L)
    for v in got:
        assert not np.any(np.array(v) @ L)
    k_max = 4
    assume(all(max(v) <= k_max for v in got))
    assert set(got) == brute_force_minimal(L, k_max)


@pytest.mark.parametrize("name", sorted(models.CATALOG))
def test_semiflows_orthogonal_on_bundled(name):
    m = models.CATALOG[name]()
    basis = minimal_psemiflows(m)
    assert len(basis) >= 1
    assert not np.any(basis.matrix(m.n_places) @ m.incidence)
