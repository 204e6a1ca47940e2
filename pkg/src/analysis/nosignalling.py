"""No-signalling polytope of the two-input/two-output scenario.

The polytope has 24 extremal points: 16 local deterministic boxes and 8
Popescu-Rohrlich boxes. Maximal cell probabilities at a fixed CHSH value are
found by a linear program over mixtures of these vertices.
"""

from itertools import product
from typing import List, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator
from scipy.optimize import linprog
from scipy.stats import hypergeom

from src.data.schemas import CELLS, CountsTable
from src.utils.errors import InfeasibleError, MissingInputError
from src.utils.logger import logger

BEHAVIOR_TOL = 1e-12
FISHER_RELATIVE_SLACK = 1e-7

# Relabellings (alpha, beta, gamma) of the CHSH expression; (0, 0, 0) is the
# standard one used everywhere else.
CHSH_VARIANTS: List[Tuple[int, int, int]] = list(product((0, 1), repeat=3))

NS_CONDITION_LABELS = (
    "P(a|x=0) vs y",
    "P(a|x=1) vs y",
    "P(b|y=0) vs x",
    "P(b|y=1) vs x",
)


class BehaviorTable(BaseModel):
    """Conditional probabilities P(ab|xy) stored as an array indexed [a, b, x, y]."""

    p: np.ndarray

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    @field_validator("p", mode="before")
    @classmethod
    def _check_behavior(cls, v):
        p = np.array(v, dtype=float)
        if p.shape != (2, 2, 2, 2):
            raise ValueError(f"behavior must have shape (2, 2, 2, 2), got {p.shape}")
        if np.any(p < -BEHAVIOR_TOL):
            raise ValueError("probabilities must be non-negative")
        if not np.allclose(p.sum(axis=(0, 1)), 1.0, rtol=0, atol=BEHAVIOR_TOL):
            raise ValueError("each block P(.,.|x,y) must sum to 1")
        if not is_no_signalling(p):
            raise ValueError("behavior violates the no-signalling conditions")
        p.setflags(write=False)
        return p

    def prob(self, a: int, b: int, x: int, y: int) -> float:
        return float(self.p[a, b, x, y])

    def marginal_a(self, a: int, x: int, y: int) -> float:
        return float(self.p[a, :, x, y].sum())

    def marginal_b(self, b: int, x: int, y: int) -> float:
        return float(self.p[:, b, x, y].sum())


class NsVertexSet(BaseModel):
    vertices: List[BehaviorTable]
    kinds: List[str]

    model_config = ConfigDict(frozen=True)

    def __len__(self) -> int:
        return len(self.vertices)


def is_no_signalling(p: np.ndarray, tol: float = BEHAVIOR_TOL) -> bool:
    """Alice's marginal must not depend on y, Bob's must not depend on x."""
    p = np.asarray(p, dtype=float)
    marg_a = p.sum(axis=1)  # [a, x, y]
    marg_b = p.sum(axis=0)  # [b, x, y]
    return bool(
        np.all(np.abs(marg_a[:, :, 0] - marg_a[:, :, 1]) <= tol)
        and np.all(np.abs(marg_b[:, 0, :] - marg_b[:, 1, :]) <= tol)
    )


def chsh_variant_value(p: np.ndarray, variant: Tuple[int, int, int] = (0, 0, 0)) -> float:
    """CHSH value for the expression relabelled by (alpha, beta, gamma)."""
    alpha, beta, gamma = variant
    p = np.asarray(p, dtype=float)
    total = 0.0
    for x, y in product((0, 1), repeat=2):
        sign = (-1) ** ((x * y + alpha * x + beta * y + gamma) % 2)
        correlator = p[0, 0, x, y] + p[1, 1, x, y] - p[0, 1, x, y] - p[1, 0, x, y]
        total += sign * correlator
    return float(total)


def chsh_value(behavior) -> float:
    """Standard CHSH value of a BehaviorTable or raw [a, b, x, y] array."""
    p = behavior.p if isinstance(behavior, BehaviorTable) else behavior
    return chsh_variant_value(p, (0, 0, 0))


def max_chsh_violation(behavior) -> float:
    """Largest |I| over the eight relabellings of the CHSH expression."""
    p = behavior.p if isinstance(behavior, BehaviorTable) else behavior
    return max(abs(chsh_variant_value(p, v)) for v in CHSH_VARIANTS)


def deterministic_box(a_table: Sequence[int], b_table: Sequence[int]) -> BehaviorTable:
    p = np.zeros((2, 2, 2, 2))
    for x, y in product((0, 1), repeat=2):
        p[a_table[x], b_table[y], x, y] = 1.0
    return BehaviorTable(p=p)


def pr_box(alpha: int = 0, beta: int = 0, gamma: int = 0) -> BehaviorTable:
    """PR box with a XOR b = xy XOR alpha*x XOR beta*y XOR gamma."""
    p = np.zeros((2, 2, 2, 2))
    for a, b, x, y in CELLS:
        if (a ^ b) == (x * y + alpha * x + beta * y + gamma) % 2:
            p[a, b, x, y] = 0.5
    return BehaviorTable(p=p)


def enumerate_vertices() -> NsVertexSet:
    vertices, kinds = [], []
    for a0, a1, b0, b1 in product((0, 1), repeat=4):
        vertices.append(deterministic_box((a0, a1), (b0, b1)))
        kinds.append("deterministic")
    for alpha, beta, gamma in CHSH_VARIANTS:
        vertices.append(pr_box(alpha, beta, gamma))
        kinds.append("pr")
    return NsVertexSet(vertices=vertices, kinds=kinds)


def _solve_vertex_lp(objective: np.ndarray, i: float, vertex_chsh: np.ndarray) -> float:
    if not -4.0 - 1e-12 <= i <= 4.0 + 1e-12:
        raise InfeasibleError(f"no no-signalling behavior has CHSH value {i}")
    k = len(objective)
    result = linprog(
        c=-objective,
        A_eq=np.vstack([np.ones(k), vertex_chsh]),
        b_eq=np.array([1.0, i]),
        bounds=[(0.0, None)] * k,
        method="highs",
    )
    if result.status == 2:
        raise InfeasibleError(f"no no-signalling behavior has CHSH value {i}")
    if not result.success:
        raise InfeasibleError(f"linear program failed at I={i}: {result.message}")
    return float(min(1.0, max(0.0, -result.fun)))


def ns_max_prob(i: float, target: Tuple[int, int, int, int]) -> float:
    """Largest P(ab|xy) for the target cell over no-signalling boxes with CHSH value i."""
    vertex_set = enumerate_vertices()
    a, b, x, y = target
    objective = np.array([v.prob(a, b, x, y) for v in vertex_set.vertices])
    vertex_chsh = np.array([chsh_value(v) for v in vertex_set.vertices])
    value = _solve_vertex_lp(objective, i, vertex_chsh)
    logger.debug(f"P*({a}{b}|{x}{y}) at I={i}: {value}")
    return value


def ns_max_marginal_prob(i: float, target: Tuple[int, int]) -> float:
    """Largest P(a|x) over no-signalling boxes with CHSH value i."""
    vertex_set = enumerate_vertices()
    a, x = target
    objective = np.array([v.marginal_a(a, x, 0) for v in vertex_set.vertices])
    vertex_chsh = np.array([chsh_value(v) for v in vertex_set.vertices])
    return _solve_vertex_lp(objective, i, vertex_chsh)


def ns_guessing_probability(i: float) -> float:
    """Best guess of the output pair over all cells: max_ab P*(ab|xy)."""
    return max(ns_max_prob(i, cell) for cell in CELLS)


def fisher_exact_two_sided(table) -> float:
    """Two-sided Fisher exact test on a 2x2 table.

    Sums the hypergeometric probabilities of every table with the observed
    margins that is no more likely than the observed one.
    """
    c = np.asarray(table, dtype=np.int64)
    if c.shape != (2, 2):
        raise ValueError(f"2x2 contingency table expected, got shape {c.shape}")
    if np.any(c < 0):
        raise ValueError("contingency table entries must be non-negative")
    if 0 in c.sum(axis=0) or 0 in c.sum(axis=1):
        return 1.0

    total = int(c.sum())
    col0 = int(c[:, 0].sum())
    row0 = int(c[0].sum())
    dist = hypergeom(total, col0, row0)
    support = np.arange(max(0, row0 + col0 - total), min(row0, col0) + 1)
    pmf = dist.pmf(support)
    observed = dist.pmf(int(c[0, 0]))
    p_value = float(pmf[pmf <= observed * (1.0 + FISHER_RELATIVE_SLACK)].sum())
    return min(1.0, p_value)


def no_signalling_tables(counts: CountsTable) -> List[np.ndarray]:
    """The four contingency tables of one party's output against the other's input."""
    missing = [pair for pair, total in counts.totals.items() if total == 0]
    if missing:
        raise MissingInputError(f"no trials observed for input pairs {missing}")
    tables = []
    for x in (0, 1):
        # rows: y, columns: a
        tables.append(
            np.array(
                [[sum(counts.count(a, b, x, y) for b in (0, 1)) for a in (0, 1)] for y in (0, 1)]
            )
        )
    for y in (0, 1):
        # rows: x, columns: b
        tables.append(
            np.array(
                [[sum(counts.count(a, b, x, y) for a in (0, 1)) for b in (0, 1)] for x in (0, 1)]
            )
        )
    return tables


def check_no_signalling(counts: CountsTable) -> List[Tuple[str, float]]:
    results = [
        (label, fisher_exact_two_sided(table))
        for label, table in zip(NS_CONDITION_LABELS, no_signalling_tables(counts))
    ]
    logger.info(
        "No-signalling Fisher checks: "
        + ", ".join(f"{label}: p={p:.4f}" for label, p in results)
    )
    return results
