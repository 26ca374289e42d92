"""Core-determining classes: interval classes, monotonicity, isolated outcomes.

Under an ordering of outcomes where every combo is an interval and combos can
be ordered so that both their lowest and highest members are nondecreasing,
the ``2I - 2`` lower and upper intervals suffice to test core membership.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from math import lcm
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import linprog

from .outcomes import (
    CORE_TOL,
    Capacity,
    EquilibriumCombos,
    OutcomeSpace,
    ProbabilityVector,
    _check_same_space,
    bits_of,
)

ORDER_SEARCH_MAX_I = 7
CERT_COEF_BOUND = 4
CERT_MAX_DENOMINATOR = 1000


@dataclass(frozen=True)
class OutcomeOrdering:
    """``perm_y[r]`` is the outcome of rank ``r``; ``perm_u[r]`` the combo of rank ``r``."""

    perm_y: tuple[int, ...]
    perm_u: tuple[int, ...]

    def __post_init__(self) -> None:
        for name, perm in (("perm_y", self.perm_y), ("perm_u", self.perm_u)):
            if sorted(perm) != list(range(len(perm))):
                raise ValueError(f"{name} is not a permutation: {perm}")
        object.__setattr__(self, "perm_y", tuple(int(v) for v in self.perm_y))
        object.__setattr__(self, "perm_u", tuple(int(v) for v in self.perm_u))

    @classmethod
    def from_labels(cls, space: OutcomeSpace, combos: EquilibriumCombos, outcome_order: Sequence[str]) -> OutcomeOrdering:
        perm_y = tuple(space.index(lab) for lab in outcome_order)
        return cls(perm_y, derive_combo_order(combos, perm_y))


def _ranks(perm_y: Sequence[int]) -> list[int]:
    rank = [0] * len(perm_y)
    for r, y in enumerate(perm_y):
        rank[y] = r
    return rank


def _span(mask: int, rank: Sequence[int]) -> tuple[int, int, bool]:
    rs = sorted(rank[k] for k in bits_of(mask))
    return rs[0], rs[-1], rs[-1] - rs[0] + 1 == len(rs)


def derive_combo_order(combos: EquilibriumCombos, perm_y: Sequence[int]) -> tuple[int, ...]:
    """Sort combos by (rank of lowest member, rank of highest member)."""
    rank = _ranks(perm_y)
    keys = [(_span(m, rank)[:2], j) for j, m in enumerate(combos.masks)]
    return tuple(j for _, j in sorted(keys))


@dataclass(frozen=True)
class MonotonicityReport:
    ok: bool
    violations: tuple[str, ...]


def check_monotonicity(combos: EquilibriumCombos, ordering: OutcomeOrdering) -> MonotonicityReport:
    """Each combo must be an interval, and inf and sup must be nondecreasing along ``perm_u``."""
    space = combos.space
    if len(ordering.perm_y) != space.size or len(ordering.perm_u) != len(combos):
        raise ValueError("ordering does not match the outcome space and combo list")
    rank = _ranks(ordering.perm_y)
    violations = []
    spans = []
    for j in ordering.perm_u:
        lo, hi, connected = _span(combos.masks[j], rank)
        spans.append((lo, hi, j))
        if not connected:
            violations.append(f"combo {{{', '.join(space.subset(combos.masks[j]))}}} is not connected in the ordering")
    for (lo1, hi1, j1), (lo2, hi2, j2) in zip(spans, spans[1:]):
        if lo2 < lo1 or hi2 < hi1:
            a = "{" + ", ".join(space.subset(combos.masks[j1])) + "}"
            b = "{" + ", ".join(space.subset(combos.masks[j2])) + "}"
            violations.append(f"inf/sup decrease from {a} to {b}")
    return MonotonicityReport(not violations, tuple(violations))


def search_ordering(combos: EquilibriumCombos, max_outcomes: int = ORDER_SEARCH_MAX_I) -> OutcomeOrdering | None:
    """First outcome permutation (lexicographic) that satisfies monotonicity, or ``None``."""
    n = combos.space.size
    if n > max_outcomes:
        raise ValueError(f"ordering search is limited to I <= {max_outcomes}; supply an ordering")
    for perm in itertools.permutations(range(n)):
        ordering = OutcomeOrdering(perm, derive_combo_order(combos, perm))
        if check_monotonicity(combos, ordering).ok:
            return ordering
    return None


@dataclass(frozen=True)
class IntervalClass:
    """Subsets tested by the restricted core check."""

    space: OutcomeSpace
    sets: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.sets)

    def to_json(self) -> list[list[str]]:
        return [list(self.space.subset(m)) for m in self.sets]

    @classmethod
    def from_json(cls, space: OutcomeSpace, obj: Iterable[Iterable[str]]) -> IntervalClass:
        return cls(space, tuple(space.mask(s) for s in obj))


def interval_class(ordering: OutcomeOrdering | Sequence[int], space: OutcomeSpace) -> IntervalClass:
    """Lower intervals ``{y_1..y_i}`` for ``i < I`` then upper intervals ``{y_i..y_I}`` for ``i > 1``."""
    perm = ordering.perm_y if isinstance(ordering, OutcomeOrdering) else tuple(ordering)
    n = space.size
    if sorted(perm) != list(range(n)):
        raise ValueError("ordering does not match the outcome space")
    bit = [1 << y for y in perm]
    lower = [sum(bit[: i + 1]) for i in range(n - 1)]
    upper = [sum(bit[i:]) for i in range(1, n)]
    return IntervalClass(space, tuple(lower + upper))


def singleton_class(space: OutcomeSpace) -> IntervalClass:
    return IntervalClass(space, tuple(1 << k for k in range(space.size)))


def core_contains_cd(p: ProbabilityVector, capacity: Capacity, cls: IntervalClass, *, tol: float = CORE_TOL) -> bool:
    """``P(A) <= L(A)`` on the class, plus the whole space for reduced (unnormalized) instances."""
    _check_same_space(p.space, capacity.space)
    _check_same_space(p.space, cls.space)
    masks = list(cls.sets) + [p.space.full]
    return all(p.prob(a) <= capacity(a) + tol for a in masks)


# ---------------------------------------------------------------- isolated outcomes


@dataclass(frozen=True)
class Reduction:
    """Result of netting out isolated outcomes.

    ``pretests`` lists ``(outcome, passed)``. The reduced instance keeps the
    absolute masses, so both its totals equal ``1 - sum p(removed)``.
    """

    combos: EquilibriumCombos
    p: ProbabilityVector
    pretests: tuple[tuple[str, bool], ...]
    removed: tuple[str, ...]
    passed: bool

    @property
    def reduced_combos(self) -> EquilibriumCombos:
        return self.combos

    @property
    def reduced_p(self) -> ProbabilityVector:
        return self.p


def isolated_outcomes(combos: EquilibriumCombos) -> list[int]:
    """Outcomes lying in exactly one combo that has other members too."""
    return _isolated(combos.masks, combos.space.size)


def _isolated(masks: Iterable[int], n: int) -> list[int]:
    masks = list(masks)
    out = []
    for y in range(n):
        holders = [m for m in masks if m >> y & 1]
        if len(holders) == 1 and holders[0] != 1 << y:
            out.append(y)
    return out


def reduce_isolated(
    combos: EquilibriumCombos,
    p: ProbabilityVector,
    targets: Sequence[str] | None = None,
    *,
    tol: float = CORE_TOL,
) -> Reduction:
    """Remove isolated outcomes after checking ``p(y) <= q_u`` for their unique combo ``u``.

    The combo ``u`` loses ``p(y)`` of its mass and becomes ``u - {y}``,
    merged with an identical existing combo. A failed pretest stops the
    reduction and the instance is outside the core.
    """
    _check_same_space(combos.space, p.space)
    space = combos.space
    masses = {m: float(q) for m, q in zip(combos.masks, combos.masses)}
    pm = p.masses.astype(float).copy()
    todo = None if targets is None else list(targets)
    pretests: list[tuple[str, bool]] = []
    removed: list[str] = []
    while True:
        if todo is None:
            # isolation is re-evaluated after every removal
            now = _isolated(masses, space.size)
            if not now:
                break
            lab = space.labels[now[0]]
        elif todo:
            lab = todo.pop(0)
        else:
            break
        y = space.index(lab)
        holders = [m for m in masses if m >> y & 1]
        if len(holders) != 1:
            raise ValueError(f"outcome {lab} is not isolated")
        u = holders[0]
        ok = pm[y] <= masses[u] + tol
        pretests.append((lab, bool(ok)))
        if not ok:
            return Reduction(combos, p, tuple(pretests), tuple(removed), False)
        rest = u & ~(1 << y)
        q_left = masses.pop(u) - pm[y]
        if rest:
            masses[rest] = masses.get(rest, 0.0) + max(q_left, 0.0)
        elif q_left > tol:
            # the combo {y} alone must be fully matched by p(y)
            pretests.append((lab, False))
            return Reduction(combos, p, tuple(pretests), tuple(removed), False)
        removed.append(lab)
        pm[y] = 0.0
    if not removed:
        return Reduction(combos, p, tuple(pretests), (), True)
    keep = [lab for lab in space.labels if lab not in removed]
    sub = space.restrict(keep)
    old_idx = [space.index(lab) for lab in sub.labels]

    def remap(m: int) -> int:
        return sum(1 << i for i, k in enumerate(old_idx) if m >> k & 1)

    new_masses: dict[int, float] = {}
    for m, q in masses.items():
        nm = remap(m)
        new_masses[nm] = new_masses.get(nm, 0.0) + q
    total = float(sum(pm[k] for k in old_idx))
    masks_t = tuple(new_masses)
    q_arr = np.array([new_masses[m] for m in masks_t])
    q_arr = q_arr * (total / q_arr.sum()) if q_arr.sum() > 0 else q_arr
    new_combos = EquilibriumCombos(sub, masks_t, q_arr, total=total)
    new_p = ProbabilityVector(sub, pm[old_idx], total=total)
    return Reduction(new_combos, new_p, tuple(pretests), tuple(removed), True)


# ---------------------------------------------------------------- criterion


@dataclass(frozen=True)
class Certificate:
    """Integer certificate ``N 1_A <= sum_k alpha_k 1_{A_k} - L`` on outcomes and combos."""

    subset: int
    n: int
    l: int
    alphas: tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class CDCriterionResult:
    ok: bool
    certificates: tuple[Certificate, ...]
    missing: tuple[int, ...] = field(default=())

    def __bool__(self) -> bool:
        return self.ok


def _verify(cert: Certificate, ys: Sequence[int], us: Sequence[int]) -> bool:
    a = cert.subset
    for y in ys:
        lhs = sum(al for m, al in cert.alphas if m >> y & 1) - cert.l
        if lhs < cert.n * (a >> y & 1):
            return False
    for u in us:
        lhs = sum(al for m, al in cert.alphas if m & u) - cert.l
        if lhs > cert.n * (1 if u & a else 0):
            return False
    return True


def check_cd_criterion(candidate: IntervalClass | Sequence[int], combos: EquilibriumCombos, space: OutcomeSpace | None = None) -> CDCriterionResult:
    """Look for a certificate, for every subset outside the class, that its inequality follows.

    For each ``A`` the search is a small linear program in ``alpha_k / N``
    (bounded by ``4``) and ``L / N``; a solution is rounded to rationals and
    then checked exactly. The whole space and the empty set are always
    usable since their inequalities hold with equality. Only combos of
    positive mass matter. ``ok=False`` means no certificate within bounds.
    """
    space = space or combos.space
    if space.size > 6:
        raise ValueError("the certificate search is limited to I <= 6")
    cls = tuple(candidate.sets if isinstance(candidate, IntervalClass) else candidate)
    usable = sorted(set(cls) | {space.full})
    ys = list(range(space.size))
    us = [m for m, q in zip(combos.masks, combos.masses) if q > 0]
    certs: list[Certificate] = []
    missing: list[int] = []
    for a in range(1, space.full):
        if a in cls:
            continue
        cert = _search(a, usable, ys, us, len(combos))
        if cert is None:
            missing.append(a)
        else:
            certs.append(cert)
    return CDCriterionResult(not missing, tuple(certs), tuple(missing))


def _search(a: int, usable: Sequence[int], ys: Sequence[int], us: Sequence[int], n_combos: int) -> Certificate | None:
    k = len(usable)
    # variables: w_1..w_k (alpha_k / N), l (L / N); feasibility only
    rows, rhs = [], []
    for y in ys:
        rows.append([-(m >> y & 1) for m in usable] + [1.0])
        rhs.append(-(a >> y & 1))
    for u in us:
        rows.append([1.0 if m & u else 0.0 for m in usable] + [-1.0])
        rhs.append(1.0 if u & a else 0.0)
    bounds = [(0, CERT_COEF_BOUND)] * k + [(0, CERT_COEF_BOUND * 2 * n_combos)]
    res = linprog(np.zeros(k + 1), A_ub=np.array(rows, dtype=float), b_ub=np.array(rhs), bounds=bounds, method="highs")
    if res.status != 0:
        return None
    fr = [Fraction(float(v)).limit_denominator(CERT_MAX_DENOMINATOR) for v in res.x]
    n = lcm(*(f.denominator for f in fr))
    ints = [int(f * n) for f in fr]
    cert = Certificate(a, n, ints[-1], tuple((m, al) for m, al in zip(usable, ints[:-1]) if al))
    return cert if _verify(cert, ys, us) else None
