from __future__ import annotations

import itertools
import json
import math
import warnings
from fractions import Fraction

import numpy as np
import pytest

from coreident import (
    Capacity,
    GridSpec,
    IncompatibleMethod,
    InputError,
    LatentDistribution,
    MixedCapacitySpec,
    OutcomeSpace,
    ProbabilityVector,
    builtin_game,
    capacity_from_combos,
    check,
    combos_analytic,
    compare_singleton,
    core_contains_bruteforce,
    core_vertices,
    custom_game,
    identify,
    make_context,
    mixed_capacity,
    montecarlo_scatter,
)
from coreident.identify import (
    MIXED_METHODS,
    PURE_METHODS,
    Axis,
    barycenter,
    evaluation_counts,
    read_probability_csv,
    throughput,
)
from coreident.instances import random_probability

POINT_P = np.array([0.1, 0.15, 0.15, 0.1, 0.0, 0.5, 0.0, 0.0, 0.0])
POINT_GRID = {
    "alpha1": {"min": -1, "max": -0.05, "step": 0.05},
    "beta2": {"min": -1, "max": -0.05, "step": 0.05},
    "beta1": {"expr": "beta2 - 0.1"},
}


def jov_p(p11: float) -> ProbabilityVector:
    g = builtin_game("jovanovic")
    return ProbabilityVector.from_mapping(g.space, {"00": 1 - p11, "11": p11})


def point_context(method: str):
    g = builtin_game("oligopoly-2type")
    return make_context(g, ProbabilityVector(g.space, POINT_P), method)


def family_mixed(theta: float = 0.25) -> MixedCapacitySpec:
    nu = LatentDistribution.uniform_box([(-2 * theta, theta)] * 2)
    return MixedCapacitySpec(builtin_game("family-bargaining"), {"theta": theta}, nu)


# ---------------------------------------------------------------- grids


def test_axis_forms():
    assert Axis.from_json("a", 0.5).values == (0.5,)
    assert Axis.from_json("a", [1, 2]).values == (1.0, 2.0)
    assert Axis.from_json("a", {"values": [3]}).values == (3.0,)
    assert Axis.from_json("a", {"min": 0, "max": 1, "steps": 5}).values == (0.0, 0.25, 0.5, 0.75, 1.0)
    assert Axis.from_json("a", {"min": 0, "max": 1, "step": 0.1}).values[-1] == 1.0
    assert len(Axis.from_json("a", {"min": 0, "max": 1, "step": 0.001}).values) == 1001
    assert Axis.from_json("a", {"expr": "b * 2"}).expr == "b * 2"


@pytest.mark.parametrize(
    "obj",
    [
        {"min": 0},
        {"min": 1, "max": 0, "steps": 3},
        {"min": 0, "max": 1},
        {"min": 0, "max": 1, "step": 0},
        {"min": 0, "max": 1, "steps": -1},
        {"expr": "b +"},
        "text",
    ],
)
def test_axis_rejects_bad_specs(obj):
    with pytest.raises(InputError):
        Axis.from_json("a", obj)


def test_grid_points_expr_and_filters():
    grid = GridSpec.from_json(
        {"x": [0, 1, 2], "y": [0, 1], "z": {"expr": "x + 10 * y"}, "where": [["x", "<=", "y"]], "method": "brute"}
    )
    assert grid.method == "brute"
    pts = list(grid.points())
    assert pts == [
        (0, {"x": 0.0, "y": 0.0, "z": 0.0}),
        (1, {"x": 0.0, "y": 1.0, "z": 10.0}),
        (2, {"x": 1.0, "y": 1.0, "z": 11.0}),
    ]
    assert list(grid.points(2)) == pts[2:]
    assert GridSpec.from_json(grid.to_json()).to_json() == grid.to_json()


def test_grid_expression_is_restricted():
    grid = GridSpec.from_json({"x": [1], "y": {"expr": "__import__('os').getcwd()"}})
    with pytest.raises(InputError):
        list(grid.points())


def test_grid_cap_and_validation():
    with pytest.raises(InputError):
        GridSpec.from_json({"a": {"min": 0, "max": 1, "steps": 1000}, "b": {"min": 0, "max": 1, "steps": 1000}, "max_points": 10**5})
    with pytest.raises(InputError):
        GridSpec.from_json({"a": [1]}, method="nope")
    with pytest.raises(InputError):
        GridSpec.from_json({"a": [1], "where": [["a", "~", 1]]})


def test_empty_grid_gives_empty_result():
    ctx = make_context(builtin_game("jovanovic"), jov_p(0.25), "maxflow")
    assert list(identify(ctx, GridSpec.from_json({}))) == []
    assert list(identify(ctx, GridSpec.from_json({"theta": []}))) == []


# ---------------------------------------------------------------- sweeps


@pytest.mark.parametrize("method", PURE_METHODS)
def test_jovanovic_sweep(method):
    ctx = make_context(builtin_game("jovanovic"), jov_p(0.25), method)
    recs = list(identify(ctx, GridSpec.from_json({"theta": {"min": 0, "max": 1, "step": 0.01}})))
    assert [r.index for r in recs] == list(range(101))
    inside = [r.theta["theta"] for r in recs if r.inside]
    assert inside == [round(0.5 + 0.01 * k, 12) for k in range(51)]
    out = [r for r in recs if not r.inside]
    assert all(r.witness == ["11"] for r in out if method != "cd")


@pytest.mark.parametrize("method", PURE_METHODS)
def test_point_sweep_finds_a_single_point(method):
    recs = list(identify(point_context(method), GridSpec.from_json(POINT_GRID)))
    assert len(recs) == 400
    assert [(r.theta["alpha1"], r.theta["beta2"]) for r in recs if r.inside] == [(-0.25, -0.4)]


def test_methods_agree_on_builtin_instances():
    rng = np.random.default_rng(0)
    cases = [
        ("jovanovic", lambda: {"theta": rng.uniform(0, 1)}),
        ("family-bargaining", lambda: {"theta": rng.uniform(0.05, 1)}),
        (
            "oligopoly-2type",
            lambda: (lambda b1, f: {"alpha1": rng.uniform(-1, 0), "beta1": b1, "beta2": b1 * f})(rng.uniform(-1, -0.01), rng.uniform(0.05, 0.95)),
        ),
    ]
    for name, draw in cases:
        g = builtin_game(name)
        for _ in range(1000):
            th = draw()
            p = random_probability(rng, g.space, combos_analytic(g, th))
            verdicts = {check(make_context(g, p, m), th, timing=False).verdict for m in PURE_METHODS}
            assert len(verdicts) == 1, (name, th, p.masses)


def test_reruns_are_byte_identical_and_resumable():
    ctx = point_context("submodular")
    grid = GridSpec.from_json(POINT_GRID)
    a = [json.dumps(r.to_json()) for r in identify(ctx, grid, timing=False)]
    b = [json.dumps(r.to_json()) for r in identify(ctx, grid, timing=False)]
    assert a == b
    tail = [json.dumps(r.to_json()) for r in identify(ctx, grid, start=137, timing=False)]
    assert tail == a[137:]


def test_base_theta_fills_missing_parameters():
    ctx = point_context("maxflow")
    grid = GridSpec.from_json({"alpha1": [-0.25, -0.5]})
    recs = list(identify(ctx, grid, base_theta={"beta1": -0.5, "beta2": -0.4}))
    assert [r.verdict for r in recs] == ["in", "out"]
    with pytest.raises(InputError):
        list(identify(ctx, grid))
    with pytest.raises(InputError):
        list(identify(ctx, GridSpec.from_json({"gamma": [1]}), base_theta={"alpha1": -0.2, "beta1": -0.5, "beta2": -0.4}))


def test_check_record():
    rec = check(make_context(builtin_game("jovanovic"), jov_p(0.25), "brute"), 0.4)
    assert rec.verdict == "out" and rec.witness == ["11"] and rec.method == "brute"
    assert rec.ms is not None and rec.ms >= 0
    assert set(rec.to_json()) == {"index", "theta", "verdict", "witness", "method", "ms"}


def test_cd_witness_after_failed_pretest():
    g = builtin_game("oligopoly-2type")
    p = ProbabilityVector(g.space, np.array([0.02, 0.02, 0.02, 0.01, 0.9, 0.01, 0.01, 0.005, 0.005]))
    rec = check(make_context(g, p, "cd"), {"alpha1": -0.25, "beta1": -0.5, "beta2": -0.4})
    assert rec.verdict == "out" and rec.witness == ["11"]


@pytest.mark.parametrize("method", MIXED_METHODS)
def test_mixed_methods_on_family(method):
    g = builtin_game("family-bargaining")
    nu = LatentDistribution.uniform_box([(-2, 1)] * 2)
    inside = ProbabilityVector(g.space, np.array([1 / 8, 3 / 8, 3 / 8, 1 / 8]))
    outside = ProbabilityVector(g.space, np.array([0.5, 0.25, 0.25, 0.0]))
    assert check(make_context(g, inside, method, nu=nu), 1.0).verdict == "in"
    rec = check(make_context(g, outside, method, nu=nu), 1.0)
    assert rec.verdict == "out"
    if method == "mixed-submodular":
        assert rec.witness == ["00"]
    else:
        assert len(rec.witness) == 4
    recs = list(identify(make_context(g, inside, method, nu=nu), GridSpec.from_json({"theta": [1.0, 1.5]})))
    assert len(recs) == 2


# ---------------------------------------------------------------- pairing errors


def test_incompatible_pairings():
    g = builtin_game("oligopoly-2type")
    p = ProbabilityVector(g.space, POINT_P)
    with pytest.raises(IncompatibleMethod):
        make_context(g, p, "mixed-convex")
    bad_order = ("00", "01", "10", "02", "11", "20", "12", "21", "22")
    ctx = make_context(g, p, "cd", ordering=tuple(reversed(bad_order[:3])) + bad_order[3:])
    with pytest.raises(IncompatibleMethod):
        check(ctx, {"alpha1": -0.1, "beta1": -0.3, "beta2": -0.2})
    pennies = custom_game(
        {
            "actions": [2, 2],
            "payoffs": {"0,0": [1, -1], "0,1": [-1, 1], "1,0": [-1, 1], "1,1": [1, -1]},
            "nu": {"kind": "uniform-box", "bounds": [[0, 1]]},
        }
    )
    pp = ProbabilityVector(pennies.space, np.full(4, 0.25))
    with pytest.raises(IncompatibleMethod):
        check(make_context(pennies, pp, "maxflow", n_draws=100), {})


def test_input_errors():
    g = builtin_game("jovanovic")
    fam = builtin_game("family-bargaining")
    with pytest.raises(InputError):
        make_context(g, ProbabilityVector(fam.space, np.full(4, 0.25)), "brute")
    with pytest.raises(InputError):
        make_context(g, jov_p(0.25), "brute", nu=LatentDistribution.uniform_box([(0, 1)]))
    with pytest.raises(InputError):
        make_context(g, jov_p(0.25), "fast")
    with pytest.raises(InputError):
        make_context(g, jov_p(0.25), "cd", ordering=("00",))
    with pytest.raises(InputError):
        check(make_context(g, jov_p(0.25), "brute"), {"gamma": 1})


# ---------------------------------------------------------------- probability files


def test_probability_csv():
    s = OutcomeSpace(("00", "11"))
    p = read_probability_csv("outcome,mass\n00,3/4\n11,1/4\n", s)
    assert p.exact_masses() == (Fraction(3, 4), Fraction(1, 4))
    assert read_probability_csv("outcome,mass\n11,0.25\n00,0.75\n\n", s)["11"] == 0.25


@pytest.mark.parametrize(
    "text",
    [
        "label,mass\n00,1\n",
        "outcome,mass\n01,1\n",
        "outcome,mass\n00,0.5\n00,0.5\n",
        "outcome,mass\n00,abc\n11,1\n",
        "outcome,mass\n00,0.7\n11,0.7\n",
        "outcome,mass\n00,0.5,1\n",
        "",
    ],
)
def test_probability_csv_errors(text):
    with pytest.raises(InputError):
        read_probability_csv(text, OutcomeSpace(("00", "11")))


# ---------------------------------------------------------------- singleton comparison


def test_point_singleton_region_is_strictly_larger():
    # on the coarse grid both sets are the single point
    coarse = compare_singleton(point_context("maxflow"), GridSpec.from_json(POINT_GRID))
    assert coarse.projection(("beta2", "alpha1")) == ({(-0.4, -0.25)}, {(-0.4, -0.25)})
    # a finer local grid, with beta1 free below beta2, separates them
    fine = {
        "alpha1": {"min": -0.4, "max": -0.1, "step": 0.01},
        "beta2": {"min": -0.55, "max": -0.25, "step": 0.01},
        "beta1": {"min": -1, "max": -0.3, "step": 0.05},
        "where": [["beta1", "<", "beta2"]],
    }
    cmp = compare_singleton(point_context("maxflow"), GridSpec.from_json(fine))
    assert np.all(cmp.singleton >= cmp.sharp)
    sharp, single = cmp.projection(("beta2", "alpha1"))
    assert sharp == {(-0.4, -0.25)}
    assert sharp < single
    sharp_cells, single_cells = cmp.cell_projection(("beta2", "alpha1"), 0.05, (-1.0, -1.0))
    assert sharp_cells == {(12, 15)}
    assert sharp_cells < single_cells


def test_additive_game_sets_coincide():
    # one pure equilibrium at every shock: every combo is a singleton
    table = {
        "actions": [2],
        "params": ["t"],
        "payoffs": {"0": [0], "1": [{"theta": {"t": 1}, "eps": [-1]}]},
        "outcomes": ["0", "1"],
        "nu": {"kind": "uniform-box", "bounds": [[0, 1]]},
    }
    g = custom_game(table)
    p = ProbabilityVector.from_mapping(g.space, {"0": 0.6, "1": 0.4})
    ctx = make_context(g, p, "brute", n_draws=20_000)
    cmp = compare_singleton(ctx, GridSpec.from_json({"t": [0.2, 0.4, 0.6]}))
    assert np.array_equal(cmp.sharp, cmp.singleton)


def test_family_singleton_only_point():
    g = builtin_game("family-bargaining")
    p = ProbabilityVector(g.space, np.array([0.0, 0.5, 0.5, 0.0]))
    cmp = compare_singleton(make_context(g, p, "brute"), GridSpec.from_json({"theta": {"min": 0.05, "max": 1, "step": 0.05}}))
    assert np.all(cmp.singleton >= cmp.sharp)
    gap = cmp.singleton & ~cmp.sharp
    assert 0.5 in cmp.values[gap][:, 0].tolist()


def test_singleton_comparison_needs_pure_method():
    g = builtin_game("family-bargaining")
    ctx = make_context(g, ProbabilityVector(g.space, np.full(4, 0.25)), "mixed-convex")
    with pytest.raises(IncompatibleMethod):
        compare_singleton(ctx, GridSpec.from_json({"theta": [0.5]}))


# ---------------------------------------------------------------- core vertices


def on_a_tight_chain(q: ProbabilityVector, cap: Capacity) -> bool:
    n = cap.space.size
    for perm in itertools.permutations(range(n)):
        s, ok = 0, True
        for y in perm:
            s |= 1 << y
            ok &= abs(q.prob(s) - cap(s)) <= 1e-12
        if ok:
            return True
    return False


def test_additive_capacity_has_one_vertex():
    s = OutcomeSpace(("a", "b", "c"))
    p = ProbabilityVector(s, np.array([0.2, 0.3, 0.5]))
    verts = core_vertices(Capacity.additive(p))
    assert len(verts) == 1 and np.allclose(verts[0].masses, p.masses)


def test_jovanovic_vertices():
    cap = capacity_from_combos(combos_analytic("jovanovic", 0.5))
    verts = sorted(tuple(v.masses) for v in core_vertices(cap))
    assert verts == [(0.75, 0.25), (1.0, 0.0)]


def test_family_mixed_vertices():
    cap = mixed_capacity(family_mixed(0.25))
    verts = core_vertices(cap)
    assert len(verts) >= 4
    for v in verts:
        assert core_contains_bruteforce(v, cap).inside
        assert on_a_tight_chain(v, cap)
    center = barycenter(verts)
    assert core_contains_bruteforce(center, cap).inside


def test_vertices_reject_bad_capacities():
    s = OutcomeSpace(("a", "b"))
    with pytest.raises(ValueError):
        core_vertices(Capacity(s, np.array([0.0, 0.2, 0.2, 1.0])))
    big = OutcomeSpace(tuple("abcdefghi"))
    with pytest.raises(ValueError):
        core_vertices(Capacity.additive(ProbabilityVector(big, np.full(9, 1 / 9))))


# ---------------------------------------------------------------- sampling clouds


def test_scatter_is_deterministic_and_trimmed():
    cap = mixed_capacity(family_mixed(0.25))
    center = barycenter(core_vertices(cap))
    a = montecarlo_scatter(cap, center, 1000, 100, seed=3)
    b = montecarlo_scatter(cap, center, 1000, 100, seed=3)
    assert a.to_csv() == b.to_csv()
    assert a.points.shape == (950, 4)
    assert a.dgp_inside
    full = montecarlo_scatter(cap, center, 1000, 100, seed=3, keep_fraction=1.0)
    assert a.distance.max() <= np.sort(full.distance)[949] + 1e-15


def test_scatter_concentrates_for_large_samples():
    cap = mixed_capacity(family_mixed(0.25))
    center = barycenter(core_vertices(cap))
    res = montecarlo_scatter(cap, center, 200, 10**6, seed=0)
    assert res.distance.max() < 0.005


def test_scatter_inside_and_outside_fractions():
    cap = mixed_capacity(family_mixed(0.25))
    verts = core_vertices(cap)
    center = montecarlo_scatter(cap, barycenter(verts), 2000, 1000, seed=0)
    assert center.fraction_outside <= 0.001
    vertex = montecarlo_scatter(cap, verts[0], 2000, 1000, seed=0)
    assert 0.3 <= vertex.fraction_outside <= 0.7


def test_scatter_warns_outside_the_core():
    cap = capacity_from_combos(combos_analytic("jovanovic", 0.5))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        res = montecarlo_scatter(cap, jov_p(0.5), 10, 10, seed=0)
    assert not res.dgp_inside and caught
    with pytest.raises(ValueError):
        montecarlo_scatter(cap, jov_p(0.25), 10, 10, seed=0, keep_fraction=0)


# ---------------------------------------------------------------- benchmarks


def test_throughput_and_evaluation_counts():
    ctx = point_context("maxflow")
    thetas = [{"alpha1": -0.25, "beta1": -0.5, "beta2": b} for b in np.linspace(-0.9, -0.1, 50)]
    row = throughput(ctx, thetas)
    assert row.instances == 50 and row.per_second > 0
    rows = evaluation_counts([6], 5, seed=0)
    by = {r.method: r for r in rows}
    assert by["brute-force"].mean_evaluations == 2**6
    assert by["min-norm-point"].mean_evaluations > 0
    assert math.isfinite(by["min-norm-point"].seconds)
