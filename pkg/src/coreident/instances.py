"""Random problem instances for property tests and benchmarks."""

from __future__ import annotations

import numpy as np

from .outcomes import EquilibriumCombos, OutcomeSpace, ProbabilityVector


def default_space(n: int) -> OutcomeSpace:
    return OutcomeSpace(tuple(f"y{k}" for k in range(n)))


def random_combos(rng: np.random.Generator, space: OutcomeSpace, n_combos: int | None = None) -> EquilibriumCombos:
    """Random distinct nonempty combos with Dirichlet masses, biased toward small sets."""
    n = space.size
    if n_combos is None:
        n_combos = int(rng.integers(1, min(2 * n, space.full) + 1))
    if not 1 <= n_combos <= space.full:
        raise ValueError(f"cannot draw {n_combos} distinct combos on {n} outcomes")
    masks: set[int] = set()
    while len(masks) < n_combos:
        size = min(n, 1 + int(rng.geometric(0.5)) - 1 + int(rng.random() < 0.5))
        size = max(1, size)
        members = rng.choice(n, size=size, replace=False)
        masks.add(int(np.sum(np.left_shift(1, members))))
    masks_t = tuple(sorted(masks))
    q = rng.dirichlet(np.ones(len(masks_t)))
    return EquilibriumCombos(space, masks_t, q)


def random_monotone_combos(rng: np.random.Generator, space: OutcomeSpace, n_combos: int | None = None) -> EquilibriumCombos:
    """Interval combos ``[l, r]`` (in label order) whose ends can be sorted jointly."""
    n = space.size
    if n_combos is None:
        n_combos = int(rng.integers(1, 2 * n))
    ends: set[tuple[int, int]] = set()
    attempts = 0
    while len(ends) < n_combos and attempts < 50 * n_combos:
        attempts += 1
        lo = int(rng.integers(0, n))
        hi = min(n - 1, lo + int(rng.geometric(0.6)) - 1)
        cand = ends | {(lo, hi)}
        pairs = sorted(cand)
        if all(pairs[i][1] <= pairs[i + 1][1] for i in range(len(pairs) - 1)):
            ends = cand
    masks_t = tuple(sorted(((1 << (hi + 1)) - (1 << lo)) for lo, hi in ends))
    q = rng.dirichlet(np.ones(len(masks_t)))
    return EquilibriumCombos(space, masks_t, q)


def random_probability(rng: np.random.Generator, space: OutcomeSpace, combos: EquilibriumCombos | None = None) -> ProbabilityVector:
    """Half the time a core member built by a random selection, otherwise a perturbation of one."""
    n = space.size
    if combos is None:
        return ProbabilityVector(space, rng.dirichlet(np.ones(n)))
    p = np.zeros(n)
    for mask, q in zip(combos.masks, combos.masses):
        members = [k for k in range(n) if mask >> k & 1]
        p[members] += q * rng.dirichlet(np.ones(len(members)))
    mode = rng.random()
    if mode < 0.4:
        out = p
    elif mode < 0.8:
        out = p + rng.exponential(0.05, n) * (rng.random(n) < 0.5)
    else:
        out = rng.dirichlet(np.ones(n))
    out = np.clip(out, 0.0, None)
    out = out / out.sum()
    return ProbabilityVector(space, out)
