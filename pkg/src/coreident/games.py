"""Parameterized finite games, their equilibria, and equilibrium combos.

Payoff functions are vectorized: they receive a profile, the parameter map,
the covariate map and an array of latent draws of shape ``(..., d)``, and
return per-player payoffs of shape ``(..., n_players)``. Parameter values may
themselves be arrays that broadcast against the draws, which lets whole
parameter grids be processed at once.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

import numpy as np
from numpy.typing import NDArray

from .latent import LatentDistribution
from .outcomes import EquilibriumCombos, OutcomeSpace

TIE_TOL = 1e-12
UNOBSERVABLE = -1
NO_EQUILIBRIUM = "no-pure-equilibrium"

Theta = Mapping[str, Any]
Payoff = Callable[[tuple[int, ...], Theta, Mapping[str, Any], NDArray[np.float64]], NDArray[np.float64]]
Cuts = Callable[[Theta], Sequence[NDArray[np.float64]]]


@dataclass(frozen=True)
class GameSpec:
    """A finite game with latent shocks.

    ``outcome_map`` sends a profile to an outcome label, or ``None`` when the
    profile is not observable in the outcome space. ``cuts`` (optional) gives,
    per shock coordinate, thresholds between which the equilibrium set is
    constant; it enables exact rectangle probabilities. With
    ``extended_cells`` the cells cover the whole real plane, so combos with
    zero mass under ``nu`` are still listed.
    """

    name: str
    n_actions: tuple[int, ...]
    payoff: Payoff
    space: OutcomeSpace
    eps_dim: int
    params: tuple[str, ...] = ()
    fixed: Mapping[str, float] = field(default_factory=dict)
    outcome_map: Callable[[tuple[int, ...]], str | None] | None = None
    cuts: Cuts | None = None
    extended_cells: bool = False
    default_nu: LatentDistribution | None = None

    def __post_init__(self) -> None:
        labels = {self.outcome_label(pr) for pr in self.profiles}
        missing = set(self.space.labels) - labels
        if missing:
            raise ValueError(f"outcome map of {self.name} never produces {sorted(missing)}")

    @property
    def n_players(self) -> int:
        return len(self.n_actions)

    @property
    def profiles(self) -> list[tuple[int, ...]]:
        return list(itertools.product(*(range(a) for a in self.n_actions)))

    def outcome_label(self, profile: tuple[int, ...]) -> str | None:
        if self.outcome_map is None:
            lab = "".join(str(a) for a in profile)
        else:
            lab = self.outcome_map(profile)
        if lab is None or lab not in self.space.labels:
            return None
        return lab

    def profile_outcomes(self) -> NDArray[np.int64]:
        """Outcome index of each profile (``-1`` if unobservable)."""
        out = []
        for pr in self.profiles:
            lab = self.outcome_label(pr)
            out.append(UNOBSERVABLE if lab is None else self.space.index(lab))
        return np.array(out, dtype=np.int64)

    def resolve_theta(self, theta: Any) -> dict[str, Any]:
        """Accept a map, a sequence ordered like ``params``, or a scalar for one parameter."""
        if isinstance(theta, Mapping):
            vals = dict(theta)
        elif np.isscalar(theta):
            if len(self.params) != 1:
                raise ValueError(f"{self.name} takes parameters {self.params}")
            vals = {self.params[0]: theta}
        else:
            seq = list(theta)
            if len(seq) != len(self.params):
                raise ValueError(f"{self.name} takes parameters {self.params}, got {len(seq)} values")
            vals = dict(zip(self.params, seq))
        unknown = set(vals) - set(self.params) - set(self.fixed)
        if unknown:
            raise ValueError(f"unknown parameters {sorted(unknown)} for {self.name}")
        missing = set(self.params) - set(vals)
        if missing:
            raise ValueError(f"missing parameters {sorted(missing)} for {self.name}")
        return {**self.fixed, **vals}

    def payoff_tensor(self, theta: Theta, x: Mapping[str, Any], eps: NDArray[np.float64]) -> NDArray[np.float64]:
        """Payoffs of shape ``eps.shape[:-1] + (n_players, *n_actions)``."""
        eps = np.asarray(eps, dtype=float)
        profs = self.profiles
        vals = [np.broadcast_to(self.payoff(pr, theta, x, eps), eps.shape[:-1] + (self.n_players,)) for pr in profs]
        stacked = np.stack(vals, axis=-1)  # (..., players, profiles)
        lead = stacked.shape[:-1]
        return stacked.reshape(lead + self.n_actions)


# ---------------------------------------------------------------- pure equilibria


def nash_mask(game: GameSpec, u: NDArray[np.float64], tol: float = TIE_TOL) -> NDArray[np.bool_]:
    """Flattened equilibrium indicator over profiles from a payoff tensor."""
    n = game.n_players
    lead = u.shape[: u.ndim - n - 1]
    ok = np.ones(lead + game.n_actions, dtype=bool)
    for i in range(n):
        ui = u[(...,) + (i,) + (slice(None),) * n]
        best = ui.max(axis=len(lead) + i, keepdims=True)
        ok &= ui >= best - tol
    return ok.reshape(lead + (-1,))


def pure_nash(game: GameSpec, theta: Any, x: Mapping[str, Any] | None, eps: Sequence[float]) -> set[tuple[int, ...]]:
    """Profiles where no player gains from a unilateral deviation (ties count)."""
    th = game.resolve_theta(theta)
    u = game.payoff_tensor(th, x or {}, np.asarray(eps, dtype=float)[None, :])
    mask = nash_mask(game, u)[0]
    profs = game.profiles
    return {profs[k] for k in np.flatnonzero(mask)}


def equilibrium_masks(game: GameSpec, theta: Theta, x: Mapping[str, Any], eps: NDArray[np.float64]) -> tuple[NDArray[np.int64], NDArray[np.bool_]]:
    """Outcome-set bitmask of the pure equilibria at each draw, and an unobservable flag."""
    eps = np.asarray(eps, dtype=float)
    lead = eps.shape[:-1]
    profs = game.profiles
    index = {pr: k for k, pr in enumerate(profs)}
    pay = [game.payoff(pr, theta, x, eps) for pr in profs]
    lead = np.broadcast_shapes(lead, *(p.shape[:-1] for p in pay))
    outs = game.profile_outcomes()
    masks = np.zeros(lead, dtype=np.int64)
    unobs = np.zeros(lead, dtype=bool)
    for k, pr in enumerate(profs):
        ok = np.ones(lead, dtype=bool)
        for i, n_i in enumerate(game.n_actions):
            own = pay[k][..., i]
            for a in range(n_i):
                if a != pr[i]:
                    dev = pay[index[pr[:i] + (a,) + pr[i + 1 :]]][..., i]
                    ok &= own >= dev - TIE_TOL
        if outs[k] >= 0:
            masks |= np.where(ok, np.int64(1) << int(outs[k]), 0)
        else:
            unobs |= ok
    return masks, unobs


# ---------------------------------------------------------------- combos


def cell_grid(game: GameSpec, theta: Theta, nu: LatentDistribution) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Representative points and ``nu`` masses of the equilibrium-constant cells.

    Parameter values may be arrays of shape ``(N,)``; the outputs then have
    shapes ``(N, C, d)`` and ``(N, C)``. Cells of zero width get a
    representative on their boundary and zero mass.
    """
    if game.cuts is None:
        raise ValueError(f"{game.name} has no analytic cell structure; use combos_monte_carlo")
    if nu.dim != game.eps_dim:
        raise ValueError(f"{game.name} needs a {game.eps_dim}-dimensional shock, got {nu.dim}")
    raw = game.cuts(theta)
    axes_pts, axes_mass = [], []
    n_rows = None
    for k, cuts in enumerate(raw):
        cuts = np.atleast_2d(np.asarray(cuts, dtype=float))
        n_rows = cuts.shape[0] if n_rows is None else max(n_rows, cuts.shape[0])
        axes_pts.append(cuts)
    assert n_rows is not None
    for k, cuts in enumerate(axes_pts):
        cuts = np.sort(np.broadcast_to(cuts, (n_rows, cuts.shape[1])), axis=1)
        m = nu.marginals[k]
        lo_s, hi_s = m.support
        if game.extended_cells:
            lo_b = np.full((n_rows, 1), -np.inf)
            hi_b = np.full((n_rows, 1), np.inf)
            inner = cuts
        else:
            lo_b = np.full((n_rows, 1), lo_s)
            hi_b = np.full((n_rows, 1), hi_s)
            inner = np.clip(cuts, lo_s, hi_s)
        edges = np.concatenate([lo_b, inner, hi_b], axis=1)
        lo, hi = edges[:, :-1], edges[:, 1:]
        rep = np.where(
            np.isinf(lo) & np.isinf(hi),
            0.0,
            np.where(np.isinf(lo), hi - 1.0, np.where(np.isinf(hi), lo + 1.0, 0.5 * (lo + hi))),
        )
        axes_pts[k] = rep
        axes_mass.append(m.prob(lo, hi))
    # outer product over axes
    d = len(axes_pts)
    counts = [a.shape[1] for a in axes_pts]
    grids = np.meshgrid(*[np.arange(c) for c in counts], indexing="ij")
    flat = [g.ravel() for g in grids]
    pts = np.stack([axes_pts[k][:, flat[k]] for k in range(d)], axis=-1)
    mass = np.ones((n_rows, flat[0].size))
    for k in range(d):
        mass = mass * axes_mass[k][:, flat[k]]
    return pts, mass


def _broadcast_theta(theta: Theta) -> Theta:
    """Turn array-valued parameters of shape (N,) into (N, 1) for cell broadcasting."""
    return {k: (np.asarray(v, dtype=float)[:, None] if np.ndim(v) == 1 else v) for k, v in theta.items()}


def batch_cells(game: GameSpec, theta: Theta, nu: LatentDistribution, x: Mapping[str, Any] | None = None) -> tuple[NDArray[np.int64], NDArray[np.float64]]:
    """Equilibrium bitmask and mass of every cell, vectorized over parameter arrays.

    Returns arrays of shape ``(N, C)``.
    """
    pts, mass = cell_grid(game, theta, nu)
    th = _broadcast_theta(theta)
    masks, unobs = equilibrium_masks(game, th, x or {}, pts)
    if np.any(unobs & (mass > 0)):
        raise ValueError(f"{game.name}: an unobservable profile is an equilibrium on a set of positive probability")
    return masks, mass


def combos_analytic(game: GameSpec | str, theta: Any, nu: LatentDistribution | None = None, x: Mapping[str, Any] | None = None) -> EquilibriumCombos:
    """Exact combos from rectangle probabilities of the equilibrium-constant cells."""
    if isinstance(game, str):
        from .builtin import builtin_game

        game = builtin_game(game)
    nu = nu or game.default_nu
    if nu is None:
        raise ValueError("a latent distribution is required")
    th = game.resolve_theta(theta)
    masks, mass = batch_cells(game, th, nu, x)
    return group_cells(game.space, masks[0], mass[0], keep_zero=game.extended_cells)


def group_cells(space: OutcomeSpace, masks: NDArray[np.int64], mass: NDArray[np.float64], keep_zero: bool) -> EquilibriumCombos:
    acc: dict[int, float] = {}
    for m, q in zip(masks.tolist(), mass.tolist()):
        if m == 0:
            if q > 0:
                raise ValueError("a cell of positive probability has no pure equilibrium")
            continue
        if q > 0 or keep_zero:
            acc[m] = acc.get(m, 0.0) + q
    order = sorted(acc, key=lambda m: (_lowbit(m), m.bit_length(), m))
    q = np.array([acc[m] for m in order])
    return EquilibriumCombos(space, tuple(order), q / q.sum() if abs(q.sum() - 1) < 1e-10 else q)


def _lowbit(m: int) -> int:
    return (m & -m).bit_length()


@dataclass(frozen=True)
class MonteCarloCombos:
    """Empirical combo frequencies with standard errors.

    ``no_equilibrium`` is the frequency of draws without any pure
    equilibrium; such draws are kept out of ``masks``.
    """

    space: OutcomeSpace
    masks: tuple[int, ...]
    masses: NDArray[np.float64]
    std_errors: NDArray[np.float64]
    n_draws: int
    no_equilibrium: float

    def to_combos(self) -> EquilibriumCombos:
        if self.no_equilibrium > 0:
            raise ValueError(
                f"{self.no_equilibrium:.6g} of the draws have no pure equilibrium; the combos do not sum to one"
            )
        return EquilibriumCombos(self.space, self.masks, self.masses)

    def mass_of(self, labels: Sequence[str]) -> tuple[float, float]:
        m = self.space.mask(labels)
        if m not in self.masks:
            return 0.0, 0.0
        k = self.masks.index(m)
        return float(self.masses[k]), float(self.std_errors[k])


def combos_monte_carlo(
    game: GameSpec,
    theta: Any,
    x: Mapping[str, Any] | None,
    nu: LatentDistribution | None,
    n_draws: int,
    seed: int,
    chunk: int = 100_000,
) -> MonteCarloCombos:
    """Frequencies of the distinct pure-equilibrium sets over simulated draws."""
    if n_draws < 1:
        raise ValueError("n_draws must be at least 1")
    nu = nu or game.default_nu
    if nu is None:
        raise ValueError("a latent distribution is required")
    th = game.resolve_theta(theta)
    counts: dict[int, int] = {}
    for start in range(0, n_draws, chunk):
        eps = nu.sample(min(chunk, n_draws - start), seed, start)
        masks, unobs = equilibrium_masks(game, th, x or {}, eps)
        if np.any(unobs):
            raise ValueError(f"{game.name}: a draw selects a profile outside the outcome space")
        vals, cnt = np.unique(masks, return_counts=True)
        for v, c in zip(vals.tolist(), cnt.tolist()):
            counts[v] = counts.get(v, 0) + c
    none = counts.pop(0, 0) / n_draws
    order = sorted(counts, key=lambda m: (_lowbit(m), m.bit_length(), m))
    q = np.array([counts[m] / n_draws for m in order])
    se = np.sqrt(q * (1 - q) / n_draws)
    return MonteCarloCombos(game.space, tuple(order), q, se, n_draws, none)


# ---------------------------------------------------------------- mixed 2x2


@dataclass(frozen=True)
class MixedProfile:
    """Per-player action distributions and the induced outcome distribution."""

    strategies: tuple[tuple[float, ...], ...]
    sigma: NDArray[np.float64]

    @property
    def is_proper(self) -> bool:
        return any(sum(1 for s in strat if s > 0) > 1 for strat in self.strategies)

    @property
    def participation(self) -> tuple[float, ...]:
        """Probability of action 1 for each player (binary games)."""
        return tuple(strat[1] for strat in self.strategies)


def _require_2x2(game: GameSpec) -> None:
    if game.n_actions != (2, 2):
        raise ValueError(f"{game.name} is not a 2x2 game; mixed equilibria are only supported for 2x2")


def mixed_2x2_probs(u: NDArray[np.float64]) -> tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.bool_], NDArray[np.bool_]]:
    """Interior indifference point of 2x2 payoff tensors ``(..., 2, 2, 2)``.

    Returns the probability of action 1 for each player, a validity flag
    (both strictly inside (0, 1)) and a degeneracy flag (zero denominator).
    """
    u1, u2 = u[..., 0, :, :], u[..., 1, :, :]
    # player 2's mix b makes player 1 indifferent
    d1 = u1[..., 0, 0] - u1[..., 1, 0]
    e1 = u1[..., 0, 1] - u1[..., 1, 1]
    den1 = d1 - e1
    d2 = u2[..., 0, 0] - u2[..., 0, 1]
    e2 = u2[..., 1, 0] - u2[..., 1, 1]
    den2 = d2 - e2
    degenerate = (np.abs(den1) <= 1e-15) | (np.abs(den2) <= 1e-15)
    with np.errstate(divide="ignore", invalid="ignore"):
        b = np.where(degenerate, np.nan, d1 / np.where(degenerate, 1.0, den1))
        a = np.where(degenerate, np.nan, d2 / np.where(degenerate, 1.0, den2))
    valid = ~degenerate & (a > 0) & (a < 1) & (b > 0) & (b < 1)
    return a, b, valid, degenerate


def _sigma(game: GameSpec, a: float, b: float) -> NDArray[np.float64]:
    sigma = np.zeros(game.space.size)
    outs = game.profile_outcomes()
    probs = [(1 - a) * (1 - b), (1 - a) * b, a * (1 - b), a * b]
    for k, pr in enumerate(probs):
        if pr > 0:
            if outs[k] < 0:
                raise ValueError("a mixed equilibrium puts mass on an unobservable profile")
            sigma[outs[k]] += pr
    return sigma


@dataclass(frozen=True)
class MixedNashResult:
    profile: MixedProfile | None
    degenerate: bool


def mixed_nash_2x2(game: GameSpec, theta: Any, x: Mapping[str, Any] | None, eps: Sequence[float]) -> MixedProfile | None:
    """The properly mixed equilibrium of a 2x2 game, or ``None``."""
    return mixed_nash_2x2_detail(game, theta, x, eps).profile


def mixed_nash_2x2_detail(game: GameSpec, theta: Any, x: Mapping[str, Any] | None, eps: Sequence[float]) -> MixedNashResult:
    _require_2x2(game)
    th = game.resolve_theta(theta)
    u = game.payoff_tensor(th, x or {}, np.asarray(eps, dtype=float)[None, :])[0]
    a, b, valid, degenerate = mixed_2x2_probs(u)
    if not valid:
        return MixedNashResult(None, bool(degenerate))
    a, b = float(a), float(b)
    prof = MixedProfile(((1 - a, a), (1 - b, b)), _sigma(game, a, b))
    return MixedNashResult(prof, False)


def mixed_correspondence(game: GameSpec, theta: Any, x: Mapping[str, Any] | None, eps: Sequence[float]) -> list[MixedProfile]:
    """Pure equilibria as degenerate profiles, then the interior mixed one if any."""
    _require_2x2(game)
    out = []
    for pr in sorted(pure_nash(game, theta, x, eps)):
        strat = tuple((1.0 - a, float(a)) for a in pr)
        out.append(MixedProfile(strat, _sigma(game, float(pr[0]), float(pr[1]))))
    mixed = mixed_nash_2x2(game, theta, x, eps)
    if mixed is not None:
        out.append(mixed)
    return out
