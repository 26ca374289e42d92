"""Core membership as a transport feasibility problem solved by max flow.

Outcomes and equilibrium combos form a bipartite graph with an edge ``y - u``
whenever ``y`` belongs to ``u``. Mass ``p(y)`` enters each outcome node from
the source, ``q_u`` leaves each combo node to the sink, and the middle arcs
are uncapacitated. Full flow exists exactly when ``p`` is in the core, and
the middle-arc flows are then a compatible selection mechanism.
"""

from __future__ import annotations

import io
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Any

from .outcomes import EquilibriumCombos, OutcomeSpace, ProbabilityVector, _check_same_space

INFINITE_CAPACITY = 2.0
FEASIBILITY_TOL = 1e-9
RESIDUAL_EPS = 1e-15


@dataclass(frozen=True)
class BipartiteInstance:
    space: OutcomeSpace
    combos: EquilibriumCombos
    p: ProbabilityVector
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        for y, j in self.edges:
            if not self.combos.masks[j] >> y & 1:
                raise ValueError(f"edge ({y}, {j}) joins an outcome to a combo that does not contain it")

    @property
    def uncovered(self) -> tuple[int, ...]:
        """Outcomes with positive mass and no incident edge."""
        covered = {y for y, _ in self.edges}
        return tuple(y for y in range(self.space.size) if self.p.masses[y] > 0 and y not in covered)


@dataclass(frozen=True)
class FlowNetwork:
    """Source ``0``, outcomes ``1..I``, combos ``I+1..I+K``, sink ``I+K+1``.

    ``arcs`` lists ``(tail, head, capacity)``; capacities are floats, or
    fractions in exact mode, where the infinite middle arcs use ``2``.
    """

    instance: BipartiteInstance
    arcs: tuple[tuple[int, int, Any], ...]
    exact: bool = False

    @property
    def n_outcomes(self) -> int:
        return self.instance.space.size

    @property
    def n_combos(self) -> int:
        return len(self.instance.combos)

    @property
    def node_count(self) -> int:
        return self.n_outcomes + self.n_combos + 2

    @property
    def source(self) -> int:
        return 0

    @property
    def sink(self) -> int:
        return self.node_count - 1

    def outcome_node(self, y: int) -> int:
        return 1 + y

    def combo_node(self, j: int) -> int:
        return 1 + self.n_outcomes + j

    @property
    def immediately_infeasible(self) -> bool:
        return bool(self.instance.uncovered)

    def adjacency_csv(self) -> str:
        """Rows: source then combos; columns: outcomes then sink (``inf`` on middle arcs)."""
        space, combos = self.instance.space, self.instance.combos
        buf = io.StringIO()
        buf.write(",".join(["", *space.labels, "sink"]) + "\n")
        row = ["source"] + [_fmt(v) for v in self.instance.p.masses] + [""]
        buf.write(",".join(row) + "\n")
        for j, (mask, q) in enumerate(zip(combos.masks, combos.masses)):
            name = "{" + ";".join(space.subset(mask)) + "}"
            cells = ["inf" if mask >> y & 1 else "" for y in range(space.size)]
            buf.write(",".join([name, *cells, _fmt(q)]) + "\n")
        return buf.getvalue()


def _fmt(v: float) -> str:
    return repr(float(v))


def build_network(combos: EquilibriumCombos, p: ProbabilityVector, space: OutcomeSpace | None = None, *, exact: bool = False) -> FlowNetwork:
    """Flow network of the transport problem between ``p`` and the combo masses."""
    _check_same_space(combos.space, p.space)
    if space is not None:
        _check_same_space(space, p.space)
    space = p.space
    edges = tuple((y, j) for j, mask in enumerate(combos.masks) for y in range(space.size) if mask >> y & 1)
    inst = BipartiteInstance(space, combos, p, edges)
    n = space.size
    k = len(combos)
    sink = n + k + 1
    if exact:
        pm, qm, inf = p.exact_masses(), combos.exact_masses(), Fraction(2)
    else:
        pm, qm, inf = [float(v) for v in p.masses], [float(v) for v in combos.masses], INFINITE_CAPACITY
    arcs: list[tuple[int, int, Any]] = [(0, 1 + y, pm[y]) for y in range(n)]
    arcs += [(1 + y, 1 + n + j, inf) for y, j in sorted(edges)]
    arcs += [(1 + n + j, sink, qm[j]) for j in range(k)]
    return FlowNetwork(inst, tuple(arcs), exact)


@dataclass(frozen=True)
class FlowResult:
    network: FlowNetwork
    value: Any
    flow: tuple[Any, ...]
    source_side: frozenset[int]

    def arc_flow(self, tail: int, head: int) -> Any:
        for (t, h, _), f in zip(self.network.arcs, self.flow):
            if t == tail and h == head:
                return f
        raise KeyError((tail, head))


def max_flow(net: FlowNetwork) -> FlowResult:
    """Edmonds-Karp max flow; BFS scans neighbours in increasing node index.

    Works for floats and for :class:`fractions.Fraction` capacities alike.
    Also returns the source side of a minimum cut.
    """
    n_nodes = net.node_count
    zero = Fraction(0) if net.exact else 0.0
    eps = 0 if net.exact else RESIDUAL_EPS
    # residual arcs: forward index 2i, reverse 2i+1
    head: list[int] = []
    cap: list[Any] = []
    adj: list[list[int]] = [[] for _ in range(n_nodes)]
    for t, h, c in net.arcs:
        adj[t].append(len(head))
        head.append(h)
        cap.append(c)
        adj[h].append(len(head))
        head.append(t)
        cap.append(zero)
    for a in adj:
        a.sort(key=lambda e: (head[e], e))
    s, t = net.source, net.sink
    total = zero
    while True:
        parent = [-1] * n_nodes
        parent[s] = -2
        q = deque([s])
        while q and parent[t] == -1:
            v = q.popleft()
            for e in adj[v]:
                w = head[e]
                if parent[w] == -1 and cap[e] > eps:
                    parent[w] = e
                    q.append(w)
        if parent[t] == -1:
            break
        delta = None
        v = t
        while v != s:
            e = parent[v]
            delta = cap[e] if delta is None or cap[e] < delta else delta
            v = head[e ^ 1]
        v = t
        while v != s:
            e = parent[v]
            cap[e] -= delta
            cap[e ^ 1] += delta
            v = head[e ^ 1]
        total += delta
    reach = frozenset(i for i in range(n_nodes) if parent[i] != -1)
    flow = tuple(cap[2 * i + 1] for i in range(len(net.arcs)))
    return FlowResult(net, total, flow, reach)


@dataclass(frozen=True)
class FeasibilityResult:
    inside: bool
    flow_value: float
    witness: int | None
    flow: FlowResult

    @property
    def network(self) -> FlowNetwork:
        return self.flow.network


def _cut_witness(res: FlowResult) -> int:
    """Outcomes on the source side of the min cut: a subset with ``P(A) > L(A)``."""
    net = res.network
    mask = 0
    for y in range(net.n_outcomes):
        if net.outcome_node(y) in res.source_side:
            mask |= 1 << y
    return mask


def feasible(
    combos: EquilibriumCombos,
    p: ProbabilityVector,
    *,
    tol: float = FEASIBILITY_TOL,
    exact: bool = False,
) -> FeasibilityResult:
    """Core membership via max flow: inside iff the flow value is at least ``total - tol``.

    In exact mode the comparison is exact and ``tol`` is ignored. When the
    instance is outside, ``witness`` is the violated subset read off the
    minimum cut.
    """
    net = build_network(combos, p, exact=exact)
    res = max_flow(net)
    target = p.exact_masses() if exact else None
    if exact:
        inside = res.value >= sum(target, Fraction(0))  # type: ignore[arg-type]
    else:
        inside = res.value >= p.total - tol
    witness = None if inside else _cut_witness(res)
    return FeasibilityResult(bool(inside), float(res.value), witness, res)


@dataclass(frozen=True)
class SelectionMechanism:
    """Joint masses ``alpha[(y, u)]`` of outcome ``y`` and combo ``u`` (labels)."""

    space: OutcomeSpace
    alpha: dict[tuple[str, tuple[str, ...]], float]

    def outcome_marginal(self) -> dict[str, float]:
        out = {lab: 0.0 for lab in self.space.labels}
        for (y, _), a in self.alpha.items():
            out[y] += a
        return out

    def combo_marginal(self) -> dict[tuple[str, ...], float]:
        out: dict[tuple[str, ...], float] = {}
        for (_, u), a in self.alpha.items():
            out[u] = out.get(u, 0.0) + a
        return out

    def to_json(self) -> list[dict[str, object]]:
        return [{"outcome": y, "combo": list(u), "mass": a} for (y, u), a in self.alpha.items()]


def selection_from_flow(result: FeasibilityResult | FlowResult, instance: BipartiteInstance | None = None, *, tol: float = FEASIBILITY_TOL) -> SelectionMechanism:
    """Read the selection mechanism off the middle-arc flows of a full flow."""
    flow = result.flow if isinstance(result, FeasibilityResult) else result
    net = flow.network
    inst = instance if instance is not None else net.instance
    if float(flow.value) < inst.p.total - tol:
        raise ValueError(f"flow value {float(flow.value)} is short of {inst.p.total}; no compatible selection exists")
    space, combos = inst.space, inst.combos
    alpha: dict[tuple[str, tuple[str, ...]], float] = {}
    n = space.size
    for (t, h, _), f in zip(net.arcs, flow.flow):
        if 1 <= t <= n and n < h < net.sink:
            y, j = t - 1, h - 1 - n
            alpha[(space.labels[y], space.subset(combos.masks[j]))] = float(f)
    return SelectionMechanism(space, alpha)
