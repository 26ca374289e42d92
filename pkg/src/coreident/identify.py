"""Parameter-grid sweeps, singleton-class comparison, core vertices and sampling clouds."""

from __future__ import annotations

import ast
import csv
import io
import itertools
import math
import operator
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator, Mapping, Sequence

import numpy as np
from numpy.typing import NDArray

from .coredet import (
    OutcomeOrdering,
    check_monotonicity,
    interval_class,
    reduce_isolated,
    search_ordering,
)
from .builtin import OLIGOPOLY_LABELS
from .flow import feasible
from .games import GameSpec, batch_cells, combos_monte_carlo, group_cells
from .latent import LatentDistribution
from .mixed import (
    MixedCapacitySpec,
    MonteCarloIntegration,
    SolverConfig,
    membership_convex,
    membership_submodular_mixed,
    regular_core_check,
)
from .outcomes import (
    CORE_TOL,
    Capacity,
    EquilibriumCombos,
    OutcomeSpace,
    ProbabilityVector,
    capacity_from_combos,
    check_capacity,
    core_contains_bruteforce,
    parse_mass,
)
from .submodular import core_membership_submodular

METHODS = ("brute", "submodular", "maxflow", "cd", "mixed-submodular", "mixed-convex")
PURE_METHODS = METHODS[:4]
MIXED_METHODS = METHODS[4:]
MAX_GRID_POINTS = 10**7
MAX_VERTEX_OUTCOMES = 8
DEFAULT_DRAWS = 100_000
BATCH = 1024
SINGLETON_TOL = 1e-10

DEFAULT_ORDERINGS: dict[str, tuple[str, ...]] = {
    "jovanovic": ("00", "11"),
    "family-bargaining": ("00", "01", "10", "11"),
    "oligopoly-2type": OLIGOPOLY_LABELS,
}


class InputError(ValueError):
    """Malformed grid, probability or descriptor input."""


class IncompatibleMethod(ValueError):
    """The requested method cannot be applied to the game."""


# ---------------------------------------------------------------- grids

_OPS = {"<": operator.lt, "<=": operator.le, ">": operator.gt, ">=": operator.ge, "==": operator.eq, "!=": operator.ne}
_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv}


def _eval_expr(node: ast.AST, env: Mapping[str, float]) -> float:
    if isinstance(node, ast.Expression):
        return _eval_expr(node.body, env)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return float(node.value)
    if isinstance(node, ast.Name):
        if node.id not in env:
            raise InputError(f"unknown name {node.id!r} in grid expression")
        return float(env[node.id])
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _eval_expr(node.operand, env)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_eval_expr(node.left, env), _eval_expr(node.right, env))
    raise InputError("grid expressions may only use numbers, parameter names and + - * /")


@dataclass(frozen=True)
class Axis:
    """Either explicit ``values`` or an arithmetic ``expr`` of other axes."""

    name: str
    values: tuple[float, ...] | None = None
    expr: str | None = None

    def __post_init__(self) -> None:
        if (self.values is None) == (self.expr is None):
            raise InputError(f"axis {self.name!r} needs exactly one of values or expr")
        if self.expr is not None:
            try:
                object.__setattr__(self, "_tree", ast.parse(self.expr, mode="eval"))
            except SyntaxError as exc:
                raise InputError(f"bad expression for {self.name!r}: {self.expr!r}") from exc

    @classmethod
    def from_json(cls, name: str, obj: Any) -> Axis:
        if isinstance(obj, (int, float)) and not isinstance(obj, bool):
            return cls(name, (float(obj),))
        if isinstance(obj, list):
            return cls(name, tuple(float(v) for v in obj))
        if not isinstance(obj, Mapping):
            raise InputError(f"cannot read grid axis {name!r}: {obj!r}")
        if "values" in obj:
            return cls(name, tuple(float(v) for v in obj["values"]))
        if "expr" in obj:
            return cls(name, expr=str(obj["expr"]))
        try:
            lo, hi = float(obj["min"]), float(obj["max"])
        except KeyError as exc:
            raise InputError(f"grid axis {name!r} needs min and max") from exc
        if hi < lo:
            raise InputError(f"grid axis {name!r} has max < min")
        if "steps" in obj:
            n = int(obj["steps"])
            if n < 0:
                raise InputError(f"grid axis {name!r} has a negative number of steps")
            vals = np.linspace(lo, hi, n) if n > 1 else np.array([lo] * n)
        elif "step" in obj:
            h = float(obj["step"])
            if h <= 0:
                raise InputError(f"grid axis {name!r} needs a positive step")
            n = int(math.floor((hi - lo) / h + 1e-9)) + 1
            vals = lo + h * np.arange(n)
        else:
            raise InputError(f"grid axis {name!r} needs steps, step or values")
        # round away accumulated float error so grid values print cleanly
        return cls(name, tuple(float(v) for v in np.round(vals, 12)))

    def to_json(self) -> Any:
        return {"expr": self.expr} if self.expr is not None else {"values": list(self.values or ())}


@dataclass(frozen=True)
class GridSpec:
    """Cartesian product of explicit axes, then derived axes, then ``where`` filters.

    Points are numbered in row-major order over the explicit axes, counting
    only points that pass the filters; an index identifies a point across runs.
    """

    axes: tuple[Axis, ...]
    method: str = "maxflow"
    where: tuple[tuple[str, str, Any], ...] = ()
    max_points: int = MAX_GRID_POINTS

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise InputError(f"unknown method {self.method!r}; choose from {METHODS}")
        names = [a.name for a in self.axes]
        if len(set(names)) != len(names):
            raise InputError("duplicate grid axis")
        for lhs, op, _ in self.where:
            if op not in _OPS:
                raise InputError(f"unknown comparison {op!r}")
        if self.cardinality > self.max_points:
            raise InputError(f"grid has {self.cardinality} points, above the limit of {self.max_points}")

    @classmethod
    def from_json(cls, obj: Mapping[str, Any], method: str | None = None) -> GridSpec:
        obj = dict(obj)
        m = method or obj.pop("method", "maxflow")
        obj.pop("method", None)
        where = tuple((str(a), str(op), b) for a, op, b in obj.pop("where", []))
        max_points = int(obj.pop("max_points", MAX_GRID_POINTS))
        axes = tuple(Axis.from_json(k, v) for k, v in obj.items())
        return cls(axes, m, where, max_points)

    @classmethod
    def from_values(cls, method: str = "maxflow", **axes: Sequence[float]) -> GridSpec:
        return cls(tuple(Axis(k, tuple(float(v) for v in vals)) for k, vals in axes.items()), method)

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {a.name: a.to_json() for a in self.axes}
        out["method"] = self.method
        if self.where:
            out["where"] = [list(w) for w in self.where]
        return out

    @property
    def explicit(self) -> tuple[Axis, ...]:
        return tuple(a for a in self.axes if a.values is not None)

    @property
    def derived(self) -> tuple[Axis, ...]:
        return tuple(a for a in self.axes if a.expr is not None)

    @property
    def cardinality(self) -> int:
        """Size of the product before filters (zero when there are no axes)."""
        if not self.explicit:
            return 0
        return math.prod(len(a.values or ()) for a in self.explicit)

    def _passes(self, pt: Mapping[str, float]) -> bool:
        for lhs, op, rhs in self.where:
            a = pt[lhs] if lhs in pt else float(lhs)
            b = pt[rhs] if isinstance(rhs, str) and rhs in pt else float(rhs)
            if not _OPS[op](a, b):
                return False
        return True

    def points(self, start: int = 0) -> Iterator[tuple[int, dict[str, float]]]:
        """``(index, values)`` pairs from index ``start`` on."""
        if self.cardinality == 0:
            return
        index = 0
        explicit = self.explicit
        for combo in itertools.product(*(a.values or () for a in explicit)):
            pt = dict(zip((a.name for a in explicit), combo))
            for a in self.derived:
                pt[a.name] = round(_eval_expr(a._tree, pt), 12)  # type: ignore[attr-defined]
            if not self._passes(pt):
                continue
            if index >= start:
                yield index, pt
            index += 1


# ---------------------------------------------------------------- inputs


def read_probability_csv(text: str, space: OutcomeSpace) -> ProbabilityVector:
    """Parse ``outcome,mass`` rows; every outcome label must belong to ``space``."""
    rows = list(csv.reader(io.StringIO(text)))
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if not rows or [c.strip() for c in rows[0]] != ["outcome", "mass"]:
        raise InputError("probability CSV must start with the header 'outcome,mass'")
    mapping: dict[str, Any] = {}
    for r in rows[1:]:
        if len(r) != 2:
            raise InputError(f"bad probability row {r!r}")
        lab, val = r[0].strip(), r[1].strip()
        if lab not in space.labels:
            raise InputError(f"outcome {lab!r} is not one of {list(space.labels)}")
        if lab in mapping:
            raise InputError(f"outcome {lab!r} appears twice")
        try:
            mapping[lab] = parse_mass(val)
        except ValueError as exc:
            raise InputError(str(exc)) from exc
    try:
        return ProbabilityVector.from_mapping(space, mapping)
    except ValueError as exc:
        raise InputError(str(exc)) from exc


def load_probability(path: str | Path, space: OutcomeSpace) -> ProbabilityVector:
    return read_probability_csv(Path(path).read_text(), space)


# ---------------------------------------------------------------- single evaluations


@dataclass(frozen=True)
class IdentifyRecord:
    """Verdict at one grid point. ``witness`` is a subset (list of labels) or a test function."""

    index: int
    theta: dict[str, float]
    verdict: str
    witness: list[Any] | None
    method: str
    ms: float | None

    def to_json(self) -> dict[str, Any]:
        return {
            "index": self.index,
            "theta": self.theta,
            "verdict": self.verdict,
            "witness": self.witness,
            "method": self.method,
            "ms": self.ms,
        }

    @property
    def inside(self) -> bool | None:
        return {"in": True, "out": False}.get(self.verdict)


@dataclass(frozen=True)
class Context:
    """Everything besides the parameter value that a verdict depends on."""

    game: GameSpec
    p: ProbabilityVector
    method: str
    nu: LatentDistribution
    x: Mapping[str, Any] = field(default_factory=dict)
    seed: int = 0
    n_draws: int = DEFAULT_DRAWS
    ordering: tuple[str, ...] | None = None
    convex: SolverConfig = field(default_factory=SolverConfig)


def make_context(
    game: GameSpec,
    p: ProbabilityVector,
    method: str,
    *,
    nu: LatentDistribution | None = None,
    x: Mapping[str, Any] | None = None,
    seed: int = 0,
    n_draws: int = DEFAULT_DRAWS,
    ordering: Sequence[str] | None = None,
    convex: SolverConfig | None = None,
) -> Context:
    """Validate the inputs and the method/game pairing."""
    if method not in METHODS:
        raise InputError(f"unknown method {method!r}; choose from {METHODS}")
    if p.space != game.space:
        raise InputError(f"p is over {list(p.space.labels)} but {game.name} has outcomes {list(game.space.labels)}")
    nu = nu or game.default_nu
    if nu is None:
        raise InputError(f"{game.name} needs a latent distribution")
    if nu.dim != game.eps_dim:
        raise InputError(f"{game.name} needs a {game.eps_dim}-dimensional shock, got {nu.dim}")
    if method in MIXED_METHODS and game.n_actions != (2, 2):
        raise IncompatibleMethod(f"{method} needs a 2x2 game; {game.name} has actions {game.n_actions}")
    if ordering is not None:
        ordering = tuple(ordering)
        if sorted(ordering) != sorted(game.space.labels):
            raise InputError("the ordering must list every outcome label once")
    return Context(game, p, method, nu, dict(x or {}), seed, n_draws, ordering, convex or SolverConfig())


def _labels(space: OutcomeSpace, mask: int | None) -> list[str] | None:
    return None if mask is None else list(space.subset(mask))


def combos_at(ctx: Context, theta: Mapping[str, Any]) -> EquilibriumCombos:
    """Combos of the pure-strategy model; exact when the game has cells, simulated otherwise."""
    game = ctx.game
    if game.cuts is not None:
        masks, mass = batch_cells(game, theta, ctx.nu, ctx.x)
        return group_cells(game.space, masks[0], mass[0], keep_zero=game.extended_cells)
    mc = combos_monte_carlo(game, theta, ctx.x, ctx.nu, ctx.n_draws, ctx.seed)
    try:
        return mc.to_combos()
    except ValueError as exc:
        raise IncompatibleMethod(f"{ctx.method} needs pure-strategy combos: {exc}") from exc


def _cd_ordering(ctx: Context, combos: EquilibriumCombos) -> OutcomeOrdering:
    space = combos.space
    prefs = [ctx.ordering] if ctx.ordering else []
    prefs.append(DEFAULT_ORDERINGS.get(ctx.game.name, ctx.game.space.labels))
    for pref in prefs:
        order = [lab for lab in pref if lab in space.labels]
        ordering = OutcomeOrdering.from_labels(space, combos, order)
        report = check_monotonicity(combos, ordering)
        if report.ok:
            return ordering
        if ctx.ordering and pref is ctx.ordering:
            raise IncompatibleMethod(f"cd: the given ordering fails monotonicity ({'; '.join(report.violations)})")
    if space.size <= 7:
        found = search_ordering(combos)
        if found is not None:
            return found
    raise IncompatibleMethod("cd: no outcome ordering satisfies monotonicity for this game")


def _verdict_cd(ctx: Context, combos: EquilibriumCombos) -> tuple[str, list[str] | None]:
    red = reduce_isolated(combos, ctx.p)
    if not red.passed:
        failed = [lab for lab, ok in red.pretests if not ok]
        return "out", failed[:1]
    rc, rp = red.reduced_combos, red.reduced_p
    ordering = _cd_ordering(ctx, rc)
    cls = interval_class(ordering, rc.space)
    cap = capacity_from_combos(rc)
    for a in list(cls.sets) + [rc.space.full]:
        if rp.prob(a) > cap(a) + CORE_TOL:
            return "out", _labels(rc.space, a)
    return "in", None


def verdict_pure(ctx: Context, combos: EquilibriumCombos) -> tuple[str, list[str] | None]:
    p, m = ctx.p, ctx.method
    if m == "maxflow":
        r = feasible(combos, p)
        return ("in" if r.inside else "out"), _labels(p.space, r.witness)
    if m == "cd":
        return _verdict_cd(ctx, combos)
    cap = capacity_from_combos(combos)
    if m == "brute":
        c = core_contains_bruteforce(p, cap)
        return ("in" if c.inside else "out"), _labels(p.space, c.witness)
    if m == "submodular":
        s = core_membership_submodular(p, cap)
        return ("in" if s.inside else "out"), _labels(p.space, s.witness)
    raise IncompatibleMethod(f"{m} is not a pure-strategy method")


def mixed_spec(ctx: Context, theta: Mapping[str, Any]) -> MixedCapacitySpec:
    game = ctx.game
    closed = game.name == "family-bargaining" and float(theta.get("theta", 0.0)) > 0
    integration: Any = "closed-form" if closed else MonteCarloIntegration(ctx.n_draws, ctx.seed)
    return MixedCapacitySpec(game, {k: theta[k] for k in game.params}, ctx.nu, ctx.x, integration)


def verdict_mixed(ctx: Context, theta: Mapping[str, Any]) -> tuple[str, list[Any] | None]:
    spec = mixed_spec(ctx, theta)
    if ctx.method == "mixed-submodular":
        r = membership_submodular_mixed(ctx.p, spec)
        return ("in" if r.inside else "out"), _labels(ctx.p.space, r.witness)
    res = membership_convex(ctx.p, spec, ctx.convex)
    f = None if res.violating_f is None else [float(v) for v in res.violating_f]
    return res.verdict, f


def _require_regular(ctx: Context, theta: Mapping[str, Any]) -> None:
    rep = regular_core_check(ctx.game, theta, ctx.x, ctx.nu, seed=ctx.seed)
    if not rep.regular:
        raise IncompatibleMethod(
            f"mixed-submodular needs a regular core; the envelope is not submodular at shock {rep.failing_draw}"
        )


def _theta_of(game: GameSpec, base: Mapping[str, Any], pt: Mapping[str, float]) -> dict[str, Any]:
    vals = {**base, **pt}
    unknown = set(vals) - set(game.params) - set(game.fixed)
    if unknown:
        raise InputError(f"unknown parameters {sorted(unknown)} for {game.name}")
    missing = set(game.params) - set(vals)
    if missing:
        raise InputError(f"no value for parameters {sorted(missing)} of {game.name}")
    return game.resolve_theta(vals)


def check(ctx: Context, theta: Any, *, timing: bool = True) -> IdentifyRecord:
    """Verdict at a single parameter value."""
    try:
        th = ctx.game.resolve_theta(theta)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    t0 = time.perf_counter()
    if ctx.method in MIXED_METHODS:
        if ctx.method == "mixed-submodular":
            _require_regular(ctx, th)
        verdict, witness = verdict_mixed(ctx, th)
    else:
        verdict, witness = verdict_pure(ctx, combos_at(ctx, th))
    ms = round((time.perf_counter() - t0) * 1e3, 3) if timing else None
    shown = {k: float(th[k]) for k in ctx.game.params}
    return IdentifyRecord(0, shown, verdict, witness, ctx.method, ms)


def identify(
    ctx: Context,
    grid: GridSpec,
    *,
    base_theta: Mapping[str, Any] | None = None,
    start: int = 0,
    timing: bool = True,
) -> Iterator[IdentifyRecord]:
    """Stream verdicts over the grid in index order, beginning at ``start``.

    Parameters missing from the grid come from ``base_theta``. Incompatible
    pairings are detected on the first point, before anything is emitted.
    """
    base = dict(base_theta or {})
    game = ctx.game
    pts = grid.points(start)
    batched = ctx.method in PURE_METHODS and game.cuts is not None
    first = True
    while True:
        chunk = list(itertools.islice(pts, BATCH))
        if not chunk:
            return
        thetas = [_theta_of(game, base, pt) for _, pt in chunk]
        if first and ctx.method == "mixed-submodular":
            _require_regular(ctx, thetas[0])
        first = False
        if batched:
            t0 = time.perf_counter()
            stacked = {k: np.array([float(t[k]) for t in thetas]) for k in thetas[0]}
            masks, mass = batch_cells(game, stacked, ctx.nu, ctx.x)
            share = (time.perf_counter() - t0) / len(chunk)
        for row, ((index, _), th) in enumerate(zip(chunk, thetas)):
            t0 = time.perf_counter()
            if batched:
                combos = group_cells(game.space, masks[row], mass[row], keep_zero=game.extended_cells)
                verdict, witness = verdict_pure(ctx, combos)
            elif ctx.method in PURE_METHODS:
                verdict, witness = verdict_pure(ctx, combos_at(ctx, th))
            else:
                verdict, witness = verdict_mixed(ctx, th)
            elapsed = time.perf_counter() - t0 + (share if batched else 0.0)
            ms = round(elapsed * 1e3, 3) if timing else None
            shown = {k: float(th[k]) for k in game.params}
            yield IdentifyRecord(index, shown, verdict, witness, ctx.method, ms)


# ---------------------------------------------------------------- singleton comparison


@dataclass(frozen=True)
class SingletonComparison:
    """Grid points (rows of ``values``, columns ``names``) and both verdicts."""

    names: tuple[str, ...]
    values: NDArray[np.float64]
    sharp: NDArray[np.bool_]
    singleton: NDArray[np.bool_]

    def sharp_points(self) -> list[dict[str, float]]:
        return [dict(zip(self.names, map(float, v))) for v in self.values[self.sharp]]

    def singleton_points(self) -> list[dict[str, float]]:
        return [dict(zip(self.names, map(float, v))) for v in self.values[self.singleton]]

    def to_json(self) -> dict[str, Any]:
        return {"sharp": self.sharp_points(), "singleton": self.singleton_points()}

    def projection(self, axes: Sequence[str]) -> tuple[set[tuple[float, ...]], set[tuple[float, ...]]]:
        """Distinct values of ``axes`` over the sharp and singleton sets."""
        cols = [self.names.index(a) for a in axes]
        sharp = {tuple(float(v) for v in row[cols]) for row in self.values[self.sharp]}
        single = {tuple(float(v) for v in row[cols]) for row in self.values[self.singleton]}
        return sharp, single

    def cell_projection(
        self, axes: Sequence[str], width: float, origin: Sequence[float]
    ) -> tuple[set[tuple[int, ...]], set[tuple[int, ...]]]:
        """Indices of the half-open cells ``[o + k w, o + (k+1) w)`` hit by either set."""
        cols = [self.names.index(a) for a in axes]
        org = np.asarray(origin, dtype=float)

        def cells(rows: NDArray[np.float64]) -> set[tuple[int, ...]]:
            # the small shift keeps points lying on a cell edge in the upper cell
            k = np.floor((rows[:, cols] - org) / width + 1e-9).astype(int)
            return {tuple(int(v) for v in r) for r in k}

        return cells(self.values[self.sharp]), cells(self.values[self.singleton])


def singleton_hits(masks: NDArray[np.int64], mass: NDArray[np.float64], n: int) -> NDArray[np.float64]:
    """``L({y}) = sum of q_u over combos u containing y`` for each row of cells."""
    bits = (masks[..., None] >> np.arange(n)) & 1
    return np.einsum("ncy,nc->ny", bits, mass)


def compare_singleton(ctx: Context, grid: GridSpec, *, base_theta: Mapping[str, Any] | None = None) -> SingletonComparison:
    """Sharp verdicts (``ctx.method``) and singleton-class verdicts on every grid point.

    The sharp test only runs where the singleton test passes, since the
    singleton inequalities are among those of the sharp set.
    """
    game = ctx.game
    if ctx.method not in PURE_METHODS:
        raise IncompatibleMethod("the singleton comparison applies to pure-strategy methods")
    base = dict(base_theta or {})
    rows: list[dict[str, Any]] = [_theta_of(game, base, pt) for _, pt in grid.points()]
    names = tuple(game.params)
    values = np.array([[float(t[k]) for k in names] for t in rows]).reshape(len(rows), len(names))
    single = np.zeros(len(rows), dtype=bool)
    sharp = np.zeros(len(rows), dtype=bool)
    p = ctx.p.masses.astype(float)
    n = game.space.size
    for lo in range(0, len(rows), BATCH * 8):
        part = rows[lo : lo + BATCH * 8]
        if game.cuts is not None:
            stacked = {k: np.array([float(t[k]) for t in part]) for k in part[0]}
            masks, mass = batch_cells(game, stacked, ctx.nu, ctx.x)
            hits = singleton_hits(masks, mass, n)
            ok = np.all(p[None, :] <= hits + SINGLETON_TOL, axis=1)
            single[lo : lo + len(part)] = ok
            for r in np.flatnonzero(ok):
                combos = group_cells(game.space, masks[r], mass[r], keep_zero=game.extended_cells)
                sharp[lo + r] = verdict_pure(ctx, combos)[0] == "in"
        else:
            for r, th in enumerate(part):
                combos = combos_at(ctx, th)
                cap = capacity_from_combos(combos)
                ok = all(p[y] <= cap(1 << y) + SINGLETON_TOL for y in range(n))
                single[lo + r] = ok
                if ok:
                    sharp[lo + r] = verdict_pure(ctx, combos)[0] == "in"
    return SingletonComparison(names, values, sharp, single)


# ---------------------------------------------------------------- core vertices


def core_vertices(capacity: Capacity, *, tol: float = 1e-12) -> list[ProbabilityVector]:
    """Extreme points of the core of a submodular capacity.

    Each permutation gives the greedy point ``Q(y_k) = L(S_k) - L(S_{k-1})``
    with ``S_k`` the first ``k`` outcomes; duplicates are dropped, keeping
    the first permutation (lexicographic order) that produces each point.
    """
    space = capacity.space
    n = space.size
    if n > MAX_VERTEX_OUTCOMES:
        raise ValueError(f"vertex enumeration is limited to I <= {MAX_VERTEX_OUTCOMES}")
    rep = check_capacity(capacity)
    if not rep.submodular:
        raise ValueError("capacity is not submodular; the greedy vertex formula does not apply")
    vals = capacity.values
    out: list[ProbabilityVector] = []
    seen: set[tuple[float, ...]] = set()
    decimals = max(0, int(-math.log10(tol)))
    for perm in itertools.permutations(range(n)):
        q = np.zeros(n)
        prev, s = 0.0, 0
        for y in perm:
            s |= 1 << y
            q[y] = vals[s] - prev
            prev = vals[s]
        key = tuple(np.round(q, decimals) + 0.0)
        if key in seen:
            continue
        seen.add(key)
        out.append(ProbabilityVector(space, q, total=float(capacity.total)))
    return out


def barycenter(points: Sequence[ProbabilityVector]) -> ProbabilityVector:
    """Average of a list of points (for instance the core vertices)."""
    arr = np.array([v.masses for v in points], dtype=float)
    return ProbabilityVector(points[0].space, arr.mean(axis=0), total=float(points[0].total))


# ---------------------------------------------------------------- sampling clouds


@dataclass(frozen=True)
class ScatterResult:
    """Kept empirical distributions, their distance to the source and core flags."""

    space: OutcomeSpace
    points: NDArray[np.float64]
    distance: NDArray[np.float64]
    inside: NDArray[np.bool_]
    n_samples: int
    sample_size: int
    dgp_inside: bool

    @property
    def fraction_outside(self) -> float:
        return float(1.0 - self.inside.mean()) if self.inside.size else 0.0

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([*self.space.labels, "distance", "inside"])
        for row, d, ok in zip(self.points, self.distance, self.inside):
            w.writerow([*(repr(float(v)) for v in row), repr(float(d)), int(ok)])
        return buf.getvalue()


def core_flags(points: NDArray[np.float64], capacity: Capacity, tol: float = CORE_TOL) -> NDArray[np.bool_]:
    """Core membership of each row of ``points`` against every subset."""
    n = capacity.space.size
    members = ((np.arange(1 << n)[:, None] >> np.arange(n)) & 1).astype(float)
    sums = points @ members.T
    return np.all(sums <= capacity.values[None, :] + tol, axis=1)


def montecarlo_scatter(
    capacity: Capacity,
    dgp: ProbabilityVector,
    n: int,
    sample_size: int,
    seed: int,
    keep_fraction: float = 0.95,
    *,
    tol: float = CORE_TOL,
) -> ScatterResult:
    """Empirical distributions of ``n`` multinomial samples of size ``sample_size``.

    The ``n - floor((1 - keep_fraction) n)`` draws closest to ``dgp`` in
    Euclidean distance are kept (ties broken by draw order), and each is
    flagged by core membership.
    """
    if n < 0 or sample_size < 1:
        raise ValueError("need n >= 0 and sample_size >= 1")
    if not 0 < keep_fraction <= 1:
        raise ValueError("keep_fraction must lie in (0, 1]")
    dgp_inside = bool(core_flags(dgp.masses[None, :].astype(float), capacity, tol)[0])
    if not dgp_inside:
        warnings.warn("the sampling distribution is not in the core", stacklevel=2)
    rng = np.random.default_rng(seed)
    probs = dgp.masses.astype(float) / float(dgp.masses.sum())
    emp = rng.multinomial(sample_size, probs, size=n) / sample_size
    dist = np.linalg.norm(emp - probs, axis=1)
    n_drop = int(math.floor((1.0 - keep_fraction) * n + 1e-9))
    keep = np.sort(np.argsort(dist, kind="stable")[: n - n_drop])
    pts = emp[keep]
    return ScatterResult(dgp.space, pts, dist[keep], core_flags(pts, capacity, tol), n, sample_size, dgp_inside)


# ---------------------------------------------------------------- benchmarks


@dataclass(frozen=True)
class BenchRow:
    case: str
    n_outcomes: int
    method: str
    instances: int
    mean_evaluations: float
    seconds: float

    @property
    def per_second(self) -> float:
        return self.instances / self.seconds if self.seconds > 0 else math.inf


def bench_rows_csv(rows: Sequence[BenchRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["case", "n_outcomes", "method", "instances", "mean_evaluations", "seconds", "per_second"])
    for r in rows:
        w.writerow([r.case, r.n_outcomes, r.method, r.instances, f"{r.mean_evaluations:.1f}", f"{r.seconds:.4f}", f"{r.per_second:.1f}"])
    return buf.getvalue()


def throughput(ctx: Context, thetas: Sequence[Mapping[str, Any]]) -> BenchRow:
    """Time ``check``-equivalent evaluations over ``thetas`` (cells computed in one batch)."""
    t0 = time.perf_counter()
    n = len(thetas)
    game = ctx.game
    stacked = {k: np.array([float(t[k]) for t in thetas]) for k in game.params}
    stacked.update({k: np.full(len(thetas), v) for k, v in game.fixed.items()})
    if game.cuts is not None and ctx.method in PURE_METHODS:
        masks, mass = batch_cells(game, stacked, ctx.nu, ctx.x)
        for r in range(n):
            verdict_pure(ctx, group_cells(game.space, masks[r], mass[r], keep_zero=game.extended_cells))
    else:
        for th in thetas:
            check(ctx, th, timing=False)
    return BenchRow(game.name, game.space.size, ctx.method, n, float("nan"), time.perf_counter() - t0)


def evaluation_counts(sizes: Sequence[int], per_size: int, seed: int) -> list[BenchRow]:
    """Oracle calls of min-norm-point versus brute force on random instances."""
    from .instances import default_space, random_combos, random_probability
    from .submodular import SubmodularObjective, min_submodular

    rng = np.random.default_rng(seed)
    rows = []
    for n in sizes:
        space = default_space(n)
        for method in ("min-norm-point", "brute-force"):
            evals, t0 = [], time.perf_counter()
            sub = np.random.default_rng(rng.integers(1 << 63))
            for _ in range(per_size):
                combos = random_combos(sub, space)
                p = random_probability(sub, space, combos)
                obj = SubmodularObjective(capacity_from_combos(combos), p)
                evals.append(min_submodular(obj, method).evaluations)
            rows.append(BenchRow("random", n, method, per_size, float(np.mean(evals)), time.perf_counter() - t0))
    return rows


__all__ = [
    "METHODS",
    "PURE_METHODS",
    "MIXED_METHODS",
    "Axis",
    "GridSpec",
    "InputError",
    "IncompatibleMethod",
    "IdentifyRecord",
    "Context",
    "make_context",
    "read_probability_csv",
    "load_probability",
    "combos_at",
    "check",
    "identify",
    "SingletonComparison",
    "compare_singleton",
    "core_vertices",
    "barycenter",
    "ScatterResult",
    "core_flags",
    "montecarlo_scatter",
    "BenchRow",
    "bench_rows_csv",
    "throughput",
    "evaluation_counts",
]
