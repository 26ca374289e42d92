"""Minimization of ``A -> L(A) - P(A)`` for core membership.

The main solver is the Fujishige-Wolfe minimum-norm-point method on the base
polytope of the objective. Exhaustive search over all subsets is kept as an
oracle and as the automatic choice for small outcome spaces.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np
from numpy.typing import NDArray

from .outcomes import Capacity, ProbabilityVector, _check_same_space

WOLFE_TOL = 1e-12
MAX_MAJOR_CYCLES = 10_000
MEMBERSHIP_TOL = 1e-9
BRUTE_FORCE_MAX_I = 12
TIE_TOL = 1e-12

Method = Literal["min-norm-point", "brute-force", "auto"]


class SubmodularObjective:
    """``F(A) = L(A) - P(A)`` with an evaluation counter.

    The values are precomputed densely; the counter records how many subset
    values a solver asked for, which is what the benchmark reports.
    """

    def __init__(self, capacity: Capacity, p: ProbabilityVector) -> None:
        _check_same_space(capacity.space, p.space)
        self.capacity = capacity
        self.p = p
        self.space = capacity.space
        self._values = capacity.values - p.subset_sums()
        self._values.setflags(write=False)
        self.evaluations = 0

    @property
    def size(self) -> int:
        return self.space.size

    def value(self, mask: int) -> float:
        self.evaluations += 1
        return float(self._values[mask])

    def values(self, masks: NDArray[np.int64]) -> NDArray[np.float64]:
        self.evaluations += int(np.size(masks))
        return self._values[masks]

    def all_values(self) -> NDArray[np.float64]:
        self.evaluations += self._values.size
        return self._values


def _validate_perm(perm: Sequence[int], n: int) -> NDArray[np.int64]:
    arr = np.asarray(perm, dtype=np.int64)
    if arr.shape != (n,) or not np.array_equal(np.sort(arr), np.arange(n)):
        raise ValueError(f"not a permutation of 0..{n - 1}: {list(perm)}")
    return arr


def _chain(perm: NDArray[np.int64]) -> NDArray[np.int64]:
    return np.cumsum(np.left_shift(1, perm))


def greedy_vertex(obj: SubmodularObjective, perm: Sequence[int]) -> NDArray[np.float64]:
    """Base-polytope vertex: ``x[perm[k]] = F(S_k) - F(S_{k-1})``."""
    perm = _validate_perm(perm, obj.size)
    return _greedy(obj, perm)[0]


def _greedy(obj: SubmodularObjective, perm: NDArray[np.int64]) -> tuple[NDArray[np.float64], NDArray[np.int64], NDArray[np.float64]]:
    masks = _chain(perm)
    vals = obj.values(masks)
    x = np.empty(obj.size)
    x[perm] = np.diff(vals, prepend=0.0)
    return x, masks, vals


@dataclass(frozen=True)
class SubmodularMinResult:
    min_value: float
    argmin: int
    method: str
    evaluations: int
    iterations: int = 0
    fallback: bool = False
    early_stop: bool = False


def _brute(obj: SubmodularObjective) -> SubmodularMinResult:
    before = obj.evaluations
    vals = obj.all_values()
    # smallest subset index among values within TIE_TOL of the minimum
    a = int(np.flatnonzero(vals <= vals.min() + TIE_TOL)[0])
    return SubmodularMinResult(float(vals.min()), a, "brute-force", obj.evaluations - before)


def _affine_minimizer(points: NDArray[np.float64]) -> NDArray[np.float64]:
    """Coefficients (summing to 1) of the min-norm point of the affine hull."""
    k = points.shape[0]
    kkt = np.zeros((k + 1, k + 1))
    kkt[:k, :k] = points @ points.T
    kkt[:k, k] = 1.0
    kkt[k, :k] = 1.0
    rhs = np.zeros(k + 1)
    rhs[k] = 1.0
    sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
    return sol[:k]


class _Wolfe:
    """Min-norm point of the base polytope, tracking the best chain set seen."""

    def __init__(self, obj: SubmodularObjective, tol: float, max_major: int, stop_below: float | None) -> None:
        self.obj = obj
        self.tol = tol
        self.max_major = max_major
        self.stop_below = stop_below
        self.best_value = 0.0
        self.best_mask = 0
        self.iterations = 0
        self.converged = False
        self.stopped_early = False

    def _vertex(self, perm: NDArray[np.int64]) -> NDArray[np.float64]:
        x, masks, vals = _greedy(self.obj, perm)
        for m, v in zip(masks, vals):
            self.offer(int(m), float(v))
        return x

    def offer(self, mask: int, value: float) -> None:
        """Keep the lowest value; among near-ties keep the smallest subset index."""
        if value < self.best_value - TIE_TOL:
            self.best_value, self.best_mask = value, mask
        elif value <= self.best_value + TIE_TOL and mask < self.best_mask:
            self.best_value, self.best_mask = min(value, self.best_value), mask

    def run(self) -> NDArray[np.float64]:
        n = self.obj.size
        x = self._vertex(np.arange(n))
        pts = x[None, :].copy()
        lam = np.array([1.0])
        for major in range(self.max_major):
            self.iterations = major + 1
            if self.stop_below is not None and self.best_value < self.stop_below:
                self.stopped_early = True
                return x
            q = self._vertex(np.argsort(x, kind="stable"))
            if self.stop_below is not None and self.best_value < self.stop_below:
                self.stopped_early = True
                return x
            scale = max(1.0, float(np.abs(pts).max()) ** 2)
            if x @ x - x @ q <= self.tol * scale:
                self.converged = True
                return x
            if np.any(np.all(np.abs(pts - q) <= 1e-15 * scale, axis=1)):
                self.converged = True
                return x
            pts = np.vstack([pts, q])
            lam = np.append(lam, 0.0)
            while True:
                alpha = _affine_minimizer(pts)
                if np.all(alpha > 1e-15):
                    lam = alpha
                    x = alpha @ pts
                    break
                neg = alpha <= 1e-15
                step = np.min(lam[neg] / (lam[neg] - alpha[neg]))
                lam = (1.0 - step) * lam + step * alpha
                keep = lam > 1e-15
                keep[np.argmax(lam)] = True
                pts, lam = pts[keep], lam[keep]
                lam = lam / lam.sum()
                x = lam @ pts
                if pts.shape[0] == 1:
                    x = pts[0].copy()
                    break
        return x


def _mnp(obj: SubmodularObjective, tol: float, max_major: int, stop_below: float | None) -> SubmodularMinResult:
    before = obj.evaluations
    solver = _Wolfe(obj, tol, max_major, stop_below)
    x = solver.run()
    if solver.stopped_early:
        return SubmodularMinResult(
            solver.best_value, solver.best_mask, "min-norm-point", obj.evaluations - before, solver.iterations, early_stop=True
        )
    # candidate minimizers from the final point; the sorted chain covers {x < 0}
    solver._vertex(np.argsort(x, kind="stable"))
    for thr in (0.0, 1e-12, 1e-10):
        neg = np.flatnonzero(x < -thr)
        mask = int(np.sum(np.left_shift(1, neg))) if neg.size else 0
        solver.offer(mask, obj.value(mask))
    lower_bound = float(np.minimum(x, 0.0).sum())
    certified = solver.best_value - lower_bound <= 1e-9
    if not solver.converged or not certified:
        res = _brute(obj)
        return SubmodularMinResult(
            res.min_value, res.argmin, "min-norm-point", obj.evaluations - before, solver.iterations, fallback=True
        )
    return SubmodularMinResult(solver.best_value, solver.best_mask, "min-norm-point", obj.evaluations - before, solver.iterations)


def min_submodular(
    obj: SubmodularObjective,
    method: Method = "auto",
    *,
    tol: float = WOLFE_TOL,
    max_major: int = MAX_MAJOR_CYCLES,
) -> SubmodularMinResult:
    """Global minimum of the objective and its smallest-index minimizer.

    ``auto`` uses exhaustive search for ``I <= 12`` and min-norm-point above.
    Min-norm-point falls back to exhaustive search, with ``fallback=True``,
    if it hits the cycle cap or cannot certify its answer by the duality
    bound ``min F >= sum_i min(x_i, 0)``.
    """
    if method == "auto":
        method = "brute-force" if obj.size <= BRUTE_FORCE_MAX_I else "min-norm-point"
    if method == "brute-force":
        return _brute(obj)
    if method == "min-norm-point":
        return _mnp(obj, tol, max_major, None)
    raise ValueError(f"unknown method {method!r}")


@dataclass(frozen=True)
class MembershipResult:
    inside: bool
    witness: int | None
    min_value: float
    detail: SubmodularMinResult


def core_membership_submodular(
    p: ProbabilityVector,
    capacity: Capacity,
    *,
    tol: float = MEMBERSHIP_TOL,
    method: Method = "min-norm-point",
) -> MembershipResult:
    """Core test through submodular minimization, stopping at the first violated subset."""
    obj = SubmodularObjective(capacity, p)
    if method == "auto":
        method = "brute-force" if obj.size <= BRUTE_FORCE_MAX_I else "min-norm-point"
    if method == "min-norm-point":
        res = _mnp(obj, WOLFE_TOL, MAX_MAJOR_CYCLES, -tol)
    else:
        res = min_submodular(obj, method)
    inside = res.min_value >= -tol
    return MembershipResult(inside, None if inside else res.argmin, res.min_value, res)
