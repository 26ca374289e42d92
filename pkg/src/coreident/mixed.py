"""Identification with mixed-strategy equilibria in 2x2 games.

The likelihood of a set ``B`` is the expected value, over the shocks, of the
largest probability any equilibrium (pure or mixed) gives to ``B``. When the
pointwise upper envelope is submodular the core test is again a submodular
minimization; otherwise membership is decided through the support functional
``f -> E[max over equilibria of E_sigma f]`` by a convex program.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Literal, Mapping

import numpy as np
from numpy.typing import NDArray

from .games import GameSpec, mixed_2x2_probs, nash_mask
from .latent import LatentDistribution
from .outcomes import Capacity, ProbabilityVector, _check_same_space, popcounts, subset_sums
from .submodular import MembershipResult, core_membership_submodular

log = logging.getLogger(__name__)

GL_NODES = 48
MC_CHUNK = 200_000
CONVEX_TOL = 1e-6
SUBMODULAR_TOL = 1e-9
CONVEX_MAX_ITER = 50_000
BOX_RADIUS = 2.0

_GL_X, _GL_W = np.polynomial.legendre.leggauss(GL_NODES)


@dataclass(frozen=True)
class MonteCarloIntegration:
    n_draws: int
    seed: int

    def __post_init__(self) -> None:
        if self.n_draws < 1:
            raise ValueError("n_draws must be at least 1")


Integration = Literal["closed-form"] | MonteCarloIntegration


@dataclass(frozen=True)
class MixedCapacitySpec:
    """A 2x2 game at a parameter value, the shock law and the integration mode."""

    game: GameSpec
    theta: Mapping[str, Any]
    nu: LatentDistribution
    x: Mapping[str, Any] = field(default_factory=dict)
    integration: Any = "closed-form"

    def __post_init__(self) -> None:
        if self.game.n_actions != (2, 2):
            raise ValueError(f"{self.game.name} is not a 2x2 game")
        object.__setattr__(self, "theta", self.game.resolve_theta(self.theta))
        if self.integration == "closed-form":
            if self.game.name != "family-bargaining":
                raise ValueError("closed-form integration is only available for family-bargaining")
            if float(self.theta["theta"]) <= 0:
                raise ValueError("the mixed closed forms need theta > 0")
        elif not isinstance(self.integration, MonteCarloIntegration):
            raise ValueError(f"unknown integration mode {self.integration!r}")

    @property
    def space(self):
        return self.game.space

    @property
    def closed_form(self) -> bool:
        return self.integration == "closed-form"

    @cached_property
    def _family(self) -> _FamilyClosedForm:
        return _FamilyClosedForm(float(self.theta["theta"]), self.nu)

    @cached_property
    def _draws(self) -> _CandidateSet:
        mc = self.integration
        eps = self.nu.sample(mc.n_draws, mc.seed)
        return _CandidateSet.build(self.game, self.theta, self.x, eps)


# ---------------------------------------------------------------- candidate sets


@dataclass(frozen=True)
class _CandidateSet:
    """Per draw: up to five candidate outcome distributions (4 pure + 1 mixed)."""

    sigma: NDArray[np.float64]  # (n, 5, I)
    valid: NDArray[np.bool_]  # (n, 5)

    @classmethod
    def build(cls, game: GameSpec, theta: Mapping[str, Any], x: Mapping[str, Any], eps: NDArray[np.float64]) -> _CandidateSet:
        n, n_out = eps.shape[0], game.space.size
        outs = game.profile_outcomes()
        sigma = np.zeros((n, 5, n_out))
        valid = np.zeros((n, 5), dtype=bool)
        for start in range(0, n, MC_CHUNK):
            sl = slice(start, min(n, start + MC_CHUNK))
            u = game.payoff_tensor(theta, x, eps[sl])
            ne = nash_mask(game, u)
            a, b, ok, _ = mixed_2x2_probs(u)
            for k in range(4):
                if outs[k] < 0:
                    if np.any(ne[:, k]):
                        raise ValueError("an unobservable profile is an equilibrium")
                    continue
                sigma[sl, k, outs[k]] = 1.0
                valid[sl, k] = ne[:, k]
            probs = [(1 - a) * (1 - b), (1 - a) * b, a * (1 - b), a * b]
            for k in range(4):
                if outs[k] < 0:
                    if np.any(ok & (probs[k] > 0)):
                        raise ValueError("a mixed equilibrium puts mass on an unobservable profile")
                    continue
                sigma[sl, 4, outs[k]] += np.where(ok, probs[k], 0.0)
            valid[sl, 4] = ok
        return cls(sigma, valid)

    def values(self, f: NDArray[np.float64]) -> NDArray[np.float64]:
        v = self.sigma @ f
        return np.where(self.valid, v, -np.inf)

    def support(self, f: NDArray[np.float64]) -> tuple[float, NDArray[np.float64]]:
        v = self.values(f)
        best = np.argmax(v, axis=1)
        n = v.shape[0]
        vmax = v[np.arange(n), best]
        if not np.all(np.isfinite(vmax)):
            raise ValueError("a draw has no equilibrium")
        grad = self.sigma[np.arange(n), best].mean(axis=0)
        return float(vmax.mean()), grad

    def envelope(self) -> NDArray[np.float64]:
        """Pointwise upper envelope ``max_sigma sigma(B)`` for every subset, shape (n, 2^I)."""
        sums = subset_sums(self.sigma)  # (n, 5, 2^I)
        sums = np.where(self.valid[..., None], sums, -np.inf)
        return sums.max(axis=1)


# ---------------------------------------------------------------- closed form


class _FamilyClosedForm:
    """Cells of the family-bargaining game cut at ``-2t`` and ``t`` on each shock."""

    # outcome indices: 00=0, 01=1, 10=2, 11=3; pure equilibrium of each non-central cell
    _CELL_EQ = {(0, 0): 0, (0, 1): 1, (0, 2): 1, (1, 0): 2, (1, 2): 1, (2, 0): 2, (2, 1): 2, (2, 2): 3}

    def __init__(self, theta: float, nu: LatentDistribution) -> None:
        if nu.dim != 2:
            raise ValueError("family bargaining needs a 2-dimensional shock")
        self.t = theta
        self.m1, self.m2 = nu.marginals
        cuts = (-np.inf, -2 * theta, theta, np.inf)
        self.p1 = np.array([float(self.m1.prob(cuts[i], cuts[i + 1])) for i in range(3)])
        self.p2 = np.array([float(self.m2.prob(cuts[i], cuts[i + 1])) for i in range(3)])
        t = theta
        e1 = float(self.m1.partial_mean(-2 * t, t))
        e2 = float(self.m2.partial_mean(-2 * t, t))
        # E[(t - e); centre] and E[(2t + e); centre]
        self.lo1, self.hi1 = t * self.p1[1] - e1, 2 * t * self.p1[1] + e1
        self.lo2, self.hi2 = t * self.p2[1] - e2, 2 * t * self.p2[1] + e2

    def capacity_values(self) -> NDArray[np.float64]:
        """Likelihood of all 16 subsets."""
        t2 = 9 * self.t * self.t
        masks = np.arange(16)
        out = np.zeros(16)
        for (i, j), y in self._CELL_EQ.items():
            out += self.p1[i] * self.p2[j] * ((masks >> y) & 1)
        centre = self.p1[1] * self.p2[1]
        hits_pure = ((masks >> 1) & 1) | ((masks >> 2) & 1)
        s00 = self.lo1 * self.lo2 / t2
        s11 = self.hi1 * self.hi2 / t2
        mixed = s00 * (masks & 1) + s11 * ((masks >> 3) & 1)
        out += np.where(hits_pure == 1, centre, mixed)
        out[0] = 0.0
        return out

    def support(self, f: NDArray[np.float64]) -> tuple[float, NDArray[np.float64]]:
        val = 0.0
        grad = np.zeros(4)
        for (i, j), y in self._CELL_EQ.items():
            w = self.p1[i] * self.p2[j]
            val += w * f[y]
            grad[y] += w
        cv, cg = self._centre(f)
        return val + cv, grad + cg

    def _breaks(self, f: NDArray[np.float64], m: float) -> list[float]:
        f00, f01, f10, f11 = f
        roots = []
        for num, den in ((m - f00, f10 - f00), (m - f01, f11 - f01), (f01 - f00, (f01 - f00) - (f11 - f10))):
            if den != 0:
                roots.append(num / den)
        return roots

    def _centre(self, f: NDArray[np.float64]) -> tuple[float, NDArray[np.float64]]:
        t = self.t
        s_lo, s_hi = self.m2.support
        lo, hi = max(-2 * t, s_lo), min(t, s_hi)
        if hi <= lo:
            return 0.0, np.zeros(4)
        f00, f01, f10, f11 = (float(v) for v in f)
        m = max(f01, f10)
        ystar = 1 if f01 >= f10 else 2
        pts = [lo, hi] + [3 * t * r - 2 * t for r in self._breaks(f, m)]
        pts = sorted({p for p in pts if lo <= p <= hi})
        nodes, weights = [], []
        for a, b in zip(pts, pts[1:]):
            if b - a <= 0:
                continue
            nodes.append(0.5 * (b - a) * _GL_X + 0.5 * (a + b))
            weights.append(0.5 * (b - a) * _GL_W)
        e2 = np.concatenate(nodes)
        w = np.concatenate(weights) * self.m2.pdf(e2)
        a1 = (2 * t + e2) / (3 * t)
        A = f00 * (1 - a1) + f10 * a1
        B = f01 * (1 - a1) + f11 * a1 - A
        with np.errstate(divide="ignore", invalid="ignore"):
            tt = np.where(B != 0, (m - A) / np.where(B != 0, B, 1.0), 0.0)
        l = np.where(B > 0, np.clip(tt, 0, 1), np.where(B < 0, 0.0, np.where(A > m, 0.0, 0.0)))
        h = np.where(B > 0, 1.0, np.where(B < 0, np.clip(tt, 0, 1), np.where(A > m, 1.0, 0.0)))
        el, eh = 3 * t * l - 2 * t, 3 * t * h - 2 * t
        pc = float(self.m1.prob(-2 * t, t))
        pr = self.m1.prob(el, eh)
        ea2 = (self.m1.partial_mean(el, eh) + 2 * t * pr) / (3 * t)
        inner = m * (pc - pr) + A * pr + B * ea2
        g = np.stack([(1 - a1) * (pr - ea2), (1 - a1) * ea2, a1 * (pr - ea2), a1 * ea2])
        g[ystar] += pc - pr
        return float(w @ inner), g @ w


# ---------------------------------------------------------------- public API


def mixed_capacity_values(spec: MixedCapacitySpec) -> NDArray[np.float64]:
    if spec.closed_form:
        return spec._family.capacity_values()
    return spec._draws.envelope().mean(axis=0) * (np.arange(spec.space.n_subsets) > 0)


def mixed_capacity(spec: MixedCapacitySpec, subset: int | None = None) -> float | Capacity:
    """``L(B)`` for one subset, or the whole capacity when ``subset`` is omitted."""
    values = mixed_capacity_values(spec)
    if subset is None:
        return Capacity(spec.space, values)
    if not 0 <= subset < values.size:
        raise ValueError(f"subset index {subset} out of range")
    return float(values[subset])


def mixed_capacity_std_errors(spec: MixedCapacitySpec) -> NDArray[np.float64]:
    """Monte Carlo standard errors of the capacity values."""
    if spec.closed_form:
        return np.zeros(spec.space.n_subsets)
    env = spec._draws.envelope()
    return env.std(axis=0, ddof=1) / np.sqrt(env.shape[0]) if env.shape[0] > 1 else np.zeros(env.shape[1])


def support_functional(spec: MixedCapacitySpec, f: Any) -> float:
    """``E[max over equilibria of E_sigma f]``."""
    return support_with_gradient(spec, f)[0]


def support_with_gradient(spec: MixedCapacitySpec, f: Any) -> tuple[float, NDArray[np.float64]]:
    """Support functional and a subgradient (an achievable outcome distribution)."""
    f = np.asarray(f, dtype=float)
    if f.shape != (spec.space.size,):
        raise ValueError(f"expected {spec.space.size} values")
    if spec.closed_form:
        return spec._family.support(f)
    return spec._draws.support(f)


# ---------------------------------------------------------------- regular core


def envelope_is_submodular(sigmas: NDArray[np.float64], tol: float = 1e-12) -> bool:
    """Submodularity of ``A -> max_k sigma_k(A)`` over all subset pairs."""
    env = subset_sums(np.atleast_2d(np.asarray(sigmas, dtype=float))).max(axis=0)
    return _pairs_submodular(env[None, :], tol)[0]


def _pairs_submodular(env: NDArray[np.float64], tol: float) -> NDArray[np.bool_]:
    n_sub = env.shape[1]
    idx = np.arange(n_sub)
    a, b = np.meshgrid(idx, idx, indexing="ij")
    a, b = a.ravel(), b.ravel()
    lhs = env[:, a | b] + env[:, a & b]
    rhs = env[:, a] + env[:, b]
    return np.all(lhs <= rhs + tol, axis=1)


@dataclass(frozen=True)
class RegularCoreReport:
    regular: bool
    sufficient_condition: bool
    n_probes: int
    failing_draw: tuple[float, ...] | None = None


def regular_core_check(
    game: GameSpec,
    theta: Any,
    x: Mapping[str, Any] | None,
    nu: LatentDistribution,
    n_probe_draws: int = 1000,
    seed: int = 0,
) -> RegularCoreReport:
    """Probe the upper envelope of the equilibrium correspondence at random shocks.

    ``sufficient_condition``: at most one properly mixed equilibrium at each
    probe. ``regular``: the envelope is submodular at each probe.
    """
    if game.n_actions != (2, 2):
        raise ValueError(f"{game.name} is not a 2x2 game")
    th = game.resolve_theta(theta)
    eps = nu.sample(n_probe_draws, seed)
    cands = _CandidateSet.build(game, th, x or {}, eps)
    # only one interior profile is possible in a 2x2 game
    proper = cands.valid[:, 4].astype(int)
    sufficient = bool(np.all(proper <= 1))
    env = cands.envelope()
    ok = _pairs_submodular(env, 1e-12)
    fail = None if ok.all() else tuple(float(v) for v in eps[int(np.argmin(ok))])
    return RegularCoreReport(bool(ok.all()), sufficient, n_probe_draws, fail)


# ---------------------------------------------------------------- membership


def membership_submodular_mixed(p: ProbabilityVector, spec: MixedCapacitySpec, *, tol: float = SUBMODULAR_TOL) -> MembershipResult:
    """Core test of the mixed likelihood by submodular minimization.

    Valid when the core is regular; checking that is left to the caller.
    """
    _check_same_space(p.space, spec.space)
    cap = mixed_capacity(spec)
    return core_membership_submodular(p, cap, tol=tol)  # type: ignore[arg-type]


@dataclass(frozen=True)
class ConvexFeasibilityProblem:
    """``phi(f) = support(f) - E_p f``; ``p`` is inside iff ``phi >= 0`` everywhere."""

    spec: MixedCapacitySpec
    p: ProbabilityVector
    anchor: int = 0

    def phi(self, f: Any) -> float:
        return self.phi_with_gradient(f)[0]

    def phi_with_gradient(self, f: Any) -> tuple[float, NDArray[np.float64], NDArray[np.float64]]:
        """Value, subgradient, and the outcome distribution attaining the support."""
        f = np.asarray(f, dtype=float)
        val, m = support_with_gradient(self.spec, f)
        return val - float(self.p.masses @ f), m - self.p.masses, m


@dataclass(frozen=True)
class SolverConfig:
    tol: float = CONVEX_TOL
    max_iter: int = CONVEX_MAX_ITER
    radius: float = BOX_RADIUS
    certify_every: int = 25


@dataclass(frozen=True)
class ConvexResult:
    """``verdict`` is ``in``, ``out`` or ``inconclusive``.

    ``slice_minima`` holds the smallest ``phi`` found on the slices
    ``f[anchor] = +1`` and ``f[anchor] = -1``; ``lower_bound`` is a certified
    bound on ``phi`` over the search box when the verdict is ``in``.
    """

    verdict: str
    violating_f: NDArray[np.float64] | None
    slice_minima: tuple[float, float]
    lower_bound: float | None
    iterations: int

    @property
    def inside(self) -> bool | None:
        return {"in": True, "out": False}.get(self.verdict)


def _hull_distance(points: NDArray[np.float64], target: NDArray[np.float64], max_iter: int = 500) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Point of ``conv(points)`` closest to ``target`` (Wolfe), and its weights."""
    from .submodular import _affine_minimizer

    pts = points - target
    k0 = int(np.argmin(np.einsum("ij,ij->i", pts, pts)))
    active = [k0]
    lam = np.array([1.0])
    x = pts[k0].copy()
    for _ in range(max_iter):
        scores = pts @ x
        j = int(np.argmin(scores))
        if x @ x - scores[j] <= 1e-14 or j in active:
            break
        active.append(j)
        lam = np.append(lam, 0.0)
        while True:
            s = pts[active]
            alpha = _affine_minimizer(s)
            if np.all(alpha > 1e-14):
                lam, x = alpha, alpha @ s
                break
            neg = alpha <= 1e-14
            step = np.min(lam[neg] / (lam[neg] - alpha[neg]))
            lam = (1 - step) * lam + step * alpha
            keep = lam > 1e-14
            keep[np.argmax(lam)] = True
            active = [a for a, kk in zip(active, keep) if kk]
            lam = lam[keep] / lam[keep].sum()
            x = lam @ pts[active]
            if len(active) == 1:
                break
    w = np.zeros(points.shape[0])
    w[active] = lam
    return x + target, w


def membership_convex(p: ProbabilityVector, spec: MixedCapacitySpec, cfg: SolverConfig | None = None) -> ConvexResult:
    """Projected subgradient descent of ``phi`` on ``f[anchor] = +1`` and ``-1``.

    Other coordinates stay in ``[-radius, radius]``. A negative value below
    ``-tol`` proves ``p`` is outside. Every subgradient step also yields an
    achievable outcome distribution; when ``p`` is within ``tol / radius``
    (in l1) of their convex hull, ``phi >= -tol`` holds on the whole box,
    which contains a representative of every direction, and ``p`` is inside.
    """
    cfg = cfg or SolverConfig()
    _check_same_space(p.space, spec.space)
    prob = ConvexFeasibilityProblem(spec, p)
    n = spec.space.size
    z = prob.anchor
    free = np.arange(n) != z
    minima = [np.inf, np.inf]
    seen: list[NDArray[np.float64]] = []
    total_iter = 0
    lower: float | None = None
    for s_idx, sign in enumerate((1.0, -1.0)):
        f = np.full(n, sign)
        val, g, m = prob.phi_with_gradient(f)
        seen.append(m)
        minima[s_idx] = val
        c = cfg.radius / max(float(np.linalg.norm(g[free])), 1e-12)
        for k in range(1, cfg.max_iter + 1):
            total_iter += 1
            if val < -cfg.tol:
                return ConvexResult("out", f, (minima[0], minima[1]), None, total_iter)
            if k % cfg.certify_every == 1:
                near, _ = _hull_distance(np.array(seen), p.masses)
                gap = float(np.abs(near - p.masses).sum())
                if cfg.radius * gap <= cfg.tol:
                    lower = -cfg.radius * gap
                    break
                # the residual direction separates p from the hull seen so far
                d = p.masses - near
                d = d - d[z]
                trial = sign + d / np.abs(d).max()
                tv, _, tm = prob.phi_with_gradient(trial)
                seen.append(tm)
                minima[s_idx] = min(minima[s_idx], tv)
                if tv < -cfg.tol:
                    return ConvexResult("out", trial, (minima[0], minima[1]), None, total_iter)
            f = f - (c / np.sqrt(k)) * g
            f[z] = sign
            f = np.clip(f, -cfg.radius, cfg.radius)
            val, g, m = prob.phi_with_gradient(f)
            seen.append(m)
            minima[s_idx] = min(minima[s_idx], val)
        else:
            return ConvexResult("inconclusive", None, (minima[0], minima[1]), None, total_iter)
    return ConvexResult("in", None, (minima[0], minima[1]), lower, total_iter)
