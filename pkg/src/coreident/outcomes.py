"""Outcome spaces, set functions on them, and the exhaustive core test.

Subsets are encoded as integers: bit ``k`` is set when the ``k``-th label of
the space belongs to the subset. Set functions are stored densely as arrays
of length ``2**I`` indexed by that integer.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np
from numpy.typing import NDArray

MAX_OUTCOMES = 20
PROB_SUM_TOL = 1e-12
COMBO_SUM_TOL = 1e-10
CAPACITY_TOL = 1e-10
CORE_TOL = 1e-10
EXHAUSTIVE_PAIR_LIMIT = 12
SAMPLED_PAIRS = 100_000


# ---------------------------------------------------------------- subsets


@lru_cache(maxsize=None)
def popcounts(n: int) -> NDArray[np.int64]:
    """Number of set bits of every integer in ``range(2**n)``."""
    out = np.zeros(1 << n, dtype=np.int64)
    for k in range(n):
        out[1 << k : 1 << (k + 1)] = out[: 1 << k] + 1
    out.setflags(write=False)
    return out


def subset_sums(masses: NDArray[np.float64]) -> NDArray[np.float64]:
    """Return ``g[A] = sum_{k in A} masses[k]`` for every subset ``A``."""
    masses = np.asarray(masses, dtype=float)
    n = masses.shape[-1]
    g = np.zeros(masses.shape[:-1] + (1 << n,))
    for k in range(n):
        g[..., 1 << k] = masses[..., k]
    return zeta_transform(g, n)


def zeta_transform(g: NDArray[np.float64], n: int) -> NDArray[np.float64]:
    """Subset-sum transform along the last axis: ``out[A] = sum_{B ⊆ A} g[B]``."""
    out = np.array(g, dtype=float, copy=True)
    lead = out.shape[:-1]
    for k in range(n):
        view = out.reshape(lead + (-1, 2, 1 << k))
        view[..., 1, :] += view[..., 0, :]
    return out


def bits_of(mask: int) -> list[int]:
    """Indices of the set bits of ``mask`` in increasing order."""
    out = []
    k = 0
    while mask:
        if mask & 1:
            out.append(k)
        mask >>= 1
        k += 1
    return out


# ---------------------------------------------------------------- space


@dataclass(frozen=True)
class OutcomeSpace:
    """A finite ordered set of outcome labels."""

    labels: tuple[str, ...]
    _index: Mapping[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        labels = tuple(str(x) for x in self.labels)
        if not labels:
            raise ValueError("an outcome space needs at least one label")
        if len(labels) > MAX_OUTCOMES:
            raise ValueError(f"at most {MAX_OUTCOMES} outcomes are supported, got {len(labels)}")
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate outcome labels in {labels}")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "_index", {lab: i for i, lab in enumerate(labels)})

    @property
    def size(self) -> int:
        return len(self.labels)

    @property
    def full(self) -> int:
        return (1 << self.size) - 1

    @property
    def n_subsets(self) -> int:
        return 1 << self.size

    def index(self, label: str) -> int:
        try:
            return self._index[str(label)]
        except KeyError:
            raise KeyError(f"unknown outcome {label!r}; expected one of {list(self.labels)}") from None

    def mask(self, labels: Iterable[str]) -> int:
        m = 0
        for lab in labels:
            m |= 1 << self.index(lab)
        return m

    def subset(self, mask: int) -> tuple[str, ...]:
        if not 0 <= mask <= self.full:
            raise ValueError(f"subset index {mask} out of range for I={self.size}")
        return tuple(self.labels[k] for k in bits_of(mask))

    def complement(self, mask: int) -> int:
        return self.full & ~mask

    def restrict(self, keep: Sequence[str]) -> OutcomeSpace:
        """Sub-space made of ``keep`` in the order of this space."""
        keep_set = set(keep)
        return OutcomeSpace(tuple(lab for lab in self.labels if lab in keep_set))

    def to_json(self) -> list[str]:
        return list(self.labels)

    @classmethod
    def from_json(cls, obj: Sequence[str]) -> OutcomeSpace:
        return cls(tuple(obj))


def _check_same_space(a: OutcomeSpace, b: OutcomeSpace) -> None:
    if a.labels != b.labels:
        raise ValueError(f"outcome spaces differ: {a.labels} vs {b.labels}")


def parse_mass(value: object) -> Fraction | float:
    """Read a mass from JSON: ``"a/b"`` strings and ints stay exact."""
    if isinstance(value, bool):
        raise TypeError("boolean is not a mass")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    return float(value)  # type: ignore[arg-type]


def _exact_or_none(values: Sequence[object]) -> tuple[Fraction, ...] | None:
    if values and all(isinstance(v, Fraction) for v in values):
        return tuple(values)  # type: ignore[arg-type]
    return None


# ---------------------------------------------------------------- probability


@dataclass(frozen=True)
class ProbabilityVector:
    """Masses on the outcomes of a space.

    ``total`` is 1 for a probability; reduced instances produced by
    netting out isolated outcomes keep their absolute scale and carry a
    smaller total. ``exact`` optionally holds rational masses.
    """

    space: OutcomeSpace
    masses: NDArray[np.float64]
    total: float = 1.0
    exact: tuple[Fraction, ...] | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        m = np.array(self.masses, dtype=float)
        if m.shape != (self.space.size,):
            raise ValueError(f"expected {self.space.size} masses, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("masses must be finite")
        if np.any(m < 0):
            raise ValueError(f"negative mass in {m}")
        if abs(m.sum() - self.total) > PROB_SUM_TOL:
            raise ValueError(f"masses sum to {m.sum()!r}, expected {self.total}")
        if self.exact is not None and len(self.exact) != m.size:
            raise ValueError("exact masses have the wrong length")
        m.setflags(write=False)
        object.__setattr__(self, "masses", m)

    @classmethod
    def from_mapping(cls, space: OutcomeSpace, mapping: Mapping[str, object], total: float = 1.0) -> ProbabilityVector:
        raw: list[object] = [Fraction(0)] * space.size
        for lab, val in mapping.items():
            raw[space.index(lab)] = parse_mass(val)
        return cls(space, np.array([float(v) for v in raw]), total, _exact_or_none(raw))

    @classmethod
    def point_mass(cls, space: OutcomeSpace, label: str) -> ProbabilityVector:
        m = np.zeros(space.size)
        m[space.index(label)] = 1.0
        return cls(space, m)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ProbabilityVector):
            return NotImplemented
        return self.space == other.space and self.total == other.total and np.array_equal(self.masses, other.masses)

    __hash__ = None  # type: ignore[assignment]

    def __getitem__(self, label: str) -> float:
        return float(self.masses[self.space.index(label)])

    def prob(self, mask: int) -> float:
        return float(sum(self.masses[k] for k in bits_of(mask)))

    def subset_sums(self) -> NDArray[np.float64]:
        return subset_sums(self.masses)

    def exact_masses(self) -> tuple[Fraction, ...]:
        if self.exact is not None:
            return self.exact
        return tuple(Fraction(float(v)) for v in self.masses)

    def to_json(self) -> dict[str, float]:
        return {lab: float(v) for lab, v in zip(self.space.labels, self.masses)}

    @classmethod
    def from_json(cls, space: OutcomeSpace, obj: Mapping[str, object]) -> ProbabilityVector:
        return cls.from_mapping(space, obj)


# ---------------------------------------------------------------- capacity


@dataclass(frozen=True)
class Capacity:
    """A set function stored densely by subset index.

    The constructor only validates shape; use :func:`check_capacity` for the
    normalization, monotonicity and submodularity properties.
    """

    space: OutcomeSpace
    values: NDArray[np.float64]

    def __post_init__(self) -> None:
        v = np.array(self.values, dtype=float)
        if v.shape != (self.space.n_subsets,):
            raise ValueError(f"expected {self.space.n_subsets} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("capacity values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def total(self) -> float:
        return float(self.values[-1])

    def __call__(self, mask: int) -> float:
        return float(self.values[mask])

    def of(self, labels: Iterable[str]) -> float:
        return float(self.values[self.space.mask(labels)])

    @classmethod
    def additive(cls, p: ProbabilityVector) -> Capacity:
        return cls(p.space, p.subset_sums())

    def to_json(self) -> list[dict[str, object]]:
        return [{"subset": list(self.space.subset(a)), "value": float(v)} for a, v in enumerate(self.values)]

    @classmethod
    def from_json(cls, space: OutcomeSpace, obj: Sequence[Mapping[str, object]]) -> Capacity:
        values = np.full(space.n_subsets, np.nan)
        for entry in obj:
            values[space.mask(entry["subset"])] = float(entry["value"])  # type: ignore[arg-type]
        if np.isnan(values).any():
            raise ValueError("capacity JSON does not list every subset")
        return cls(space, values)


# ---------------------------------------------------------------- combos


@dataclass(frozen=True)
class EquilibriumCombos:
    """Predicted equilibrium combinations ``u`` with their masses ``q_u``."""

    space: OutcomeSpace
    masks: tuple[int, ...]
    masses: NDArray[np.float64]
    total: float = 1.0
    exact: tuple[Fraction, ...] | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        masks = tuple(int(m) for m in self.masks)
        q = np.array(self.masses, dtype=float)
        if not masks:
            raise ValueError("the combo list is empty")
        if q.shape != (len(masks),):
            raise ValueError("one mass per combo is required")
        for m in masks:
            if not 0 < m <= self.space.full:
                raise ValueError(f"combo index {m} is empty or outside the space")
        if len(set(masks)) != len(masks):
            raise ValueError("combos must be distinct")
        if not np.all(np.isfinite(q)) or np.any(q < 0):
            raise ValueError(f"combo masses must be finite and nonnegative: {q}")
        if abs(q.sum() - self.total) > COMBO_SUM_TOL:
            raise ValueError(f"combo masses sum to {q.sum()!r}, expected {self.total}")
        q.setflags(write=False)
        object.__setattr__(self, "masks", masks)
        object.__setattr__(self, "masses", q)

    def __len__(self) -> int:
        return len(self.masks)

    @classmethod
    def from_pairs(
        cls, space: OutcomeSpace, pairs: Iterable[tuple[Iterable[str], object]], total: float = 1.0
    ) -> EquilibriumCombos:
        masks, raw = [], []
        for labels, mass in pairs:
            masks.append(space.mask(labels))
            raw.append(parse_mass(mass) if isinstance(mass, (str, int)) and not isinstance(mass, bool) else mass)
        return cls(space, tuple(masks), np.array([float(v) for v in raw]), total, _exact_or_none(raw))

    def mass_of(self, labels: Iterable[str]) -> float:
        m = self.space.mask(labels)
        try:
            return float(self.masses[self.masks.index(m)])
        except ValueError:
            return 0.0

    def exact_masses(self) -> tuple[Fraction, ...]:
        if self.exact is not None:
            return self.exact
        return tuple(Fraction(float(v)) for v in self.masses)

    def pairs(self) -> list[tuple[tuple[str, ...], float]]:
        return [(self.space.subset(m), float(q)) for m, q in zip(self.masks, self.masses)]

    def to_json(self) -> list[dict[str, object]]:
        return [{"outcomes": list(labels), "mass": q} for labels, q in self.pairs()]

    @classmethod
    def from_json(cls, space: OutcomeSpace, obj: Sequence[Mapping[str, object]]) -> EquilibriumCombos:
        return cls.from_pairs(space, [(e["outcomes"], e["mass"]) for e in obj])  # type: ignore[misc]


def capacity_from_combos(combos: EquilibriumCombos, space: OutcomeSpace | None = None) -> Capacity:
    """Likelihood ``L(A) = sum of q_u over combos u meeting A``.

    Computed as ``total - sum_{u ⊆ A^c} q_u`` with one subset-sum transform.
    """
    if space is not None:
        _check_same_space(space, combos.space)
    space = combos.space
    g = np.zeros(space.n_subsets)
    np.add.at(g, np.array(combos.masks), combos.masses)
    inside = zeta_transform(g, space.size)  # mass of combos contained in each subset
    comp = space.full ^ np.arange(space.n_subsets)
    values = combos.masses.sum() - inside[comp]
    values[0] = 0.0
    return Capacity(space, values)


# ---------------------------------------------------------------- properties


@dataclass(frozen=True)
class CapacityReport:
    normalized: bool
    monotone: bool
    submodular: bool
    pairs_checked: int

    def __bool__(self) -> bool:
        return self.normalized and self.monotone and self.submodular


def check_capacity(
    c: Capacity, *, tol: float = CAPACITY_TOL, seed: int = 0, n_pairs: int = SAMPLED_PAIRS
) -> CapacityReport:
    """Check normalization, monotonicity and submodularity.

    Submodularity is checked on every pair ``(A, B)`` when ``I <= 12`` and
    on ``n_pairs`` seeded random pairs above that.
    """
    v = c.values
    n = c.space.size
    idx = np.arange(c.space.n_subsets)
    normalized = abs(v[0]) <= tol and abs(v[-1] - 1.0) <= tol
    monotone = True
    for k in range(n):
        lo = idx[(idx >> k) & 1 == 0]
        if np.any(v[lo | (1 << k)] < v[lo] - tol):
            monotone = False
            break
    submodular = True
    if n <= EXHAUSTIVE_PAIR_LIMIT:
        pairs = 0
        for a in idx:
            lhs = v[a | idx] + v[a & idx]
            pairs += idx.size
            if np.any(lhs > v[a] + v + tol):
                submodular = False
                break
    else:
        rng = np.random.default_rng(seed)
        a = rng.integers(0, c.space.n_subsets, n_pairs)
        b = rng.integers(0, c.space.n_subsets, n_pairs)
        submodular = not np.any(v[a | b] + v[a & b] > v[a] + v[b] + tol)
        pairs = n_pairs
    return CapacityReport(bool(normalized), bool(monotone), bool(submodular), int(pairs))


@dataclass(frozen=True)
class CoreCheck:
    inside: bool
    witness: int | None
    slack: float


def core_contains_bruteforce(p: ProbabilityVector, c: Capacity, *, tol: float = CORE_TOL) -> CoreCheck:
    """Test ``P(A) <= L(A)`` on every subset; the witness is the smallest argmin."""
    _check_same_space(p.space, c.space)
    gap = c.values - p.subset_sums()
    a = int(np.argmin(gap))
    slack = float(gap[a])
    inside = slack >= -tol
    return CoreCheck(inside, None if inside else a, slack)


def choquet_integral(f: Sequence[float] | NDArray[np.float64], c: Capacity) -> float:
    """Choquet integral of ``f`` by descending sort and telescoping."""
    f = np.asarray(f, dtype=float)
    if f.shape != (c.space.size,):
        raise ValueError(f"expected {c.space.size} values, got shape {f.shape}")
    order = np.argsort(-f, kind="stable")
    chain = np.cumsum(1 << order)
    levels = c.values[chain]
    return float(f[order] @ np.diff(levels, prepend=0.0))
