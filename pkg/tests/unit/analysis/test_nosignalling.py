import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings as hyp_settings
from hypothesis import strategies as st
from scipy.stats import fisher_exact

from src.analysis.certifier import f_nosignalling
from src.analysis.nosignalling import (
    NS_CONDITION_LABELS,
    BehaviorTable,
    check_no_signalling,
    chsh_value,
    deterministic_box,
    enumerate_vertices,
    fisher_exact_two_sided,
    is_no_signalling,
    max_chsh_violation,
    no_signalling_tables,
    ns_guessing_probability,
    ns_max_marginal_prob,
    ns_max_prob,
    pr_box,
)
from src.data.schemas import CELLS, CountsTable
from src.utils.errors import InfeasibleError, MissingInputError

TIGHT_CELLS = [cell for cell in CELLS if (cell[0] ^ cell[1]) == (cell[2] & cell[3])]
LOOSE_CELLS = [cell for cell in CELLS if cell not in TIGHT_CELLS]


def test_vertex_census():
    vertices = enumerate_vertices()
    assert len(vertices) == 24
    assert Counter(vertices.kinds) == {"deterministic": 16, "pr": 8}
    for vertex, kind in zip(vertices.vertices, vertices.kinds):
        assert is_no_signalling(vertex.p)
        assert max_chsh_violation(vertex) == pytest.approx(2.0 if kind == "deterministic" else 4.0)


def test_standard_chsh_values_of_vertices():
    values = Counter(round(chsh_value(v)) for v in enumerate_vertices().vertices)
    assert values == {2: 8, -2: 8, 4: 1, -4: 1, 0: 6}


def test_pr_box_reaches_four():
    box = pr_box()
    assert chsh_value(box) == pytest.approx(4.0)
    assert box.marginal_a(0, 1, 0) == pytest.approx(0.5)
    assert box.prob(0, 1, 1, 1) == pytest.approx(0.5)


def test_deterministic_box():
    box = deterministic_box((0, 1), (1, 1))
    assert box.prob(0, 1, 0, 0) == 1.0
    assert box.prob(1, 1, 1, 1) == 1.0
    assert chsh_value(box) == pytest.approx(-2.0)


def test_behavior_table_rejects_signalling():
    p = np.zeros((2, 2, 2, 2))
    # Alice's output copies Bob's input
    for x in (0, 1):
        for y in (0, 1):
            p[y, 0, x, y] = 1.0
    assert not is_no_signalling(p)
    with pytest.raises(ValueError):
        BehaviorTable(p=p)


def test_behavior_table_rejects_unnormalised_blocks():
    p = pr_box().p.copy()
    p[0, 0, 0, 0] += 0.1
    with pytest.raises(ValueError):
        BehaviorTable(p=p)


CHSH_GRID = [round(2.0 + 0.1 * k, 1) for k in range(21)]


@pytest.mark.parametrize("i", CHSH_GRID)
def test_ns_max_prob_on_tight_and_loose_cells(i):
    for cell in TIGHT_CELLS:
        assert ns_max_prob(i, cell) == pytest.approx(1.5 - i / 4, abs=1e-9)
    for cell in LOOSE_CELLS:
        assert ns_max_prob(i, cell) == pytest.approx(2 - i / 2, abs=1e-9)
    p_guess = ns_guessing_probability(i)
    assert p_guess == pytest.approx(1.5 - i / 4, abs=1e-9)
    assert -math.log2(p_guess) == pytest.approx(f_nosignalling(i), abs=1e-8)


@pytest.mark.parametrize("target", [(0, 0), (1, 0), (0, 1), (1, 1)])
def test_marginal_bound(target):
    assert ns_max_marginal_prob(3.0, target) == pytest.approx(0.75, abs=1e-9)


def test_ns_max_prob_below_local_bound_is_trivial():
    assert ns_max_prob(0.0, (0, 0, 0, 0)) == pytest.approx(1.0)


def test_ns_max_prob_infeasible():
    with pytest.raises(InfeasibleError):
        ns_max_prob(4.5, (0, 0, 0, 0))


def test_fisher_examples():
    assert fisher_exact_two_sided([[10, 10], [10, 10]]) == pytest.approx(1.0)
    assert fisher_exact_two_sided([[5, 0], [0, 5]]) == pytest.approx(2 / 252)
    assert fisher_exact_two_sided([[0, 0], [3, 7]]) == 1.0


def test_fisher_rejects_bad_tables():
    with pytest.raises(ValueError):
        fisher_exact_two_sided([[1, 2, 3], [4, 5, 6]])
    with pytest.raises(ValueError):
        fisher_exact_two_sided([[1, -2], [3, 4]])


@given(st.lists(st.integers(0, 30), min_size=4, max_size=4))
@hyp_settings(max_examples=100, deadline=None)
def test_fisher_agrees_with_scipy_and_is_transpose_invariant(values):
    table = np.array(values).reshape(2, 2)
    p = fisher_exact_two_sided(table)
    assert 0.0 <= p <= 1.0
    assert fisher_exact_two_sided(table.T) == pytest.approx(p, rel=1e-9)
    if 0 not in table.sum(axis=0) and 0 not in table.sum(axis=1):
        assert p == pytest.approx(fisher_exact(table)[1], rel=1e-6)


def test_no_signalling_tables_of_published(published):
    tables = no_signalling_tables(published)
    assert len(tables) == 4
    # P(a|x=0): rows y = 0, 1; columns a = 0, 1
    assert tables[0].tolist() == [[387, 365], [368, 383]]
    assert tables[3].sum() == published.total(0, 1) + published.total(1, 1)


def test_published_is_consistent_with_no_signalling(published):
    checks = check_no_signalling(published)
    assert [label for label, _ in checks] == list(NS_CONDITION_LABELS)
    assert all(p > 0.05 for _, p in checks)


def test_no_signalling_check_needs_all_pairs():
    counts = CountsTable(counts={cell: (1 if cell[2:] != (0, 1) else 0) for cell in CELLS})
    with pytest.raises(MissingInputError):
        check_no_signalling(counts)
