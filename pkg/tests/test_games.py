from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from coreident import (
    LatentDistribution,
    combos_analytic,
    combos_monte_carlo,
    custom_game,
    family_bargaining,
    jovanovic,
    load_game,
    mixed_correspondence,
    mixed_nash_2x2,
    oligopoly_2type,
    pure_nash,
)
from coreident.builtin import OLIGOPOLY_LABELS, builtin_game
from coreident.games import mixed_nash_2x2_detail

POINT_P = np.array([0.1, 0.15, 0.15, 0.1, 0.0, 0.5, 0.0, 0.0, 0.0])
POINT_THETA = {"alpha1": -0.25, "beta1": -0.5, "beta2": -0.4}
OLIGOPOLY_ROWS = {
    ("00",),
    ("01",),
    ("01", "10"),
    ("10",),
    ("10", "02"),
    ("02",),
    ("02", "20"),
    ("02", "11", "20"),
    ("20",),
    ("20", "12"),
    ("12",),
    ("12", "21"),
    ("21",),
    ("22",),
}

MATCHING_PENNIES = {
    "actions": [2, 2],
    "payoffs": {"0,0": [1, -1], "0,1": [-1, 1], "1,0": [-1, 1], "1,1": [1, -1]},
}


def oligopoly_grid_oracle(theta, n: int = 2000) -> dict[tuple[str, ...], float]:
    """Equilibrium count-pairs on the midpoints of an ``n x n`` grid over ``[0, 1]^2``."""
    a0, b0 = 1.0, 1.0
    a1, b1, b2 = theta["alpha1"], theta["beta1"], theta["beta2"]
    mid = (np.arange(n) + 0.5) / n
    f1, f2 = np.meshgrid(mid, mid, indexing="ij")

    def prof1(n1, n2):
        return a0 + a1 * (n1 + n2) - f1

    def prof2(n1, n2):
        return b0 + b1 * n1 + b2 * n2 - f2

    code = np.zeros(f1.shape, dtype=np.int64)
    for k, lab in enumerate(OLIGOPOLY_LABELS):
        n1, n2 = int(lab[0]), int(lab[1])
        ok = np.ones(f1.shape, dtype=bool)
        if n1 > 0:
            ok &= prof1(n1, n2) >= 0
        if n1 < 2:
            ok &= prof1(n1 + 1, n2) <= 0
        if n2 > 0:
            ok &= prof2(n1, n2) >= 0
        if n2 < 2:
            ok &= prof2(n1, n2 + 1) <= 0
        code |= ok.astype(np.int64) << k
    vals, cnt = np.unique(code, return_counts=True)
    out = {}
    for v, c in zip(vals.tolist(), cnt.tolist()):
        out[tuple(OLIGOPOLY_LABELS[k] for k in range(9) if v >> k & 1)] = c / n**2
    return out


# ---------------------------------------------------------------- pure equilibria


def test_jovanovic_pure_equilibria():
    g = jovanovic()
    assert pure_nash(g, 0.5, None, (0.1, 0.1)) == {(0, 0), (1, 1)}
    assert pure_nash(g, 0.5, None, (0.9, 0.9)) == {(0, 0)}


def test_family_pure_equilibria():
    g = family_bargaining()
    assert pure_nash(g, 0.3, None, (0.6, 0.6)) == {(1, 1)}
    assert pure_nash(g, 1.0, None, (0.0, 0.0)) == {(0, 1), (1, 0)}
    assert pure_nash(g, 1.0, None, (-3.0, -3.0)) == {(0, 0)}


def test_ties_count_as_equilibria():
    g = jovanovic()
    assert pure_nash(g, 0.5, None, (0.5, 0.5)) == {(0, 0), (1, 1)}


@given(
    st.lists(st.floats(-5, 5, allow_nan=False), min_size=12, max_size=12),
    st.floats(0.1, 10),
    st.floats(-10, 10),
    st.integers(0, 1),
)
def test_pure_nash_affine_invariance(vals, scale, shift, player):
    vals = [round(v, 3) for v in vals]
    keys = ["0,0", "0,1", "0,2", "1,0", "1,1", "1,2"]
    base = {k: [vals[2 * i], vals[2 * i + 1]] for i, k in enumerate(keys)}
    moved = {k: list(v) for k, v in base.items()}
    for k in keys:
        moved[k][player] = scale * moved[k][player] + shift
    g0 = custom_game({"actions": [2, 3], "payoffs": base})
    g1 = custom_game({"actions": [2, 3], "payoffs": moved})
    assert pure_nash(g0, {}, None, (0.0,)) == pure_nash(g1, {}, None, (0.0,))


def test_custom_game_with_parameters_and_labels():
    table = {
        "actions": [2, 2],
        "params": ["t"],
        "eps_dim": 2,
        "payoffs": {
            "0,0": [0, 0],
            "0,1": [0, {"const": 0, "eps": [0, -1]}],
            "1,0": [{"eps": [-1, 0]}, 0],
            "1,1": [{"theta": {"t": 1}, "eps": [-1, 0]}, {"theta": {"t": 1}, "eps": [0, -1]}],
        },
        "labels": {"0,0": "00", "0,1": None, "1,0": None, "1,1": "11"},
        "nu": {"kind": "uniform-box", "bounds": [[0, 1], [0, 1]]},
    }
    g = custom_game(table)
    assert g.space.labels == ("00", "11")
    assert pure_nash(g, {"t": 0.5}, None, (0.1, 0.1)) == pure_nash(jovanovic(), 0.5, None, (0.1, 0.1))
    mc = combos_monte_carlo(g, {"t": 0.5}, None, None, 100_000, seed=3)
    q, se = mc.mass_of(["00", "11"])
    assert abs(q - 0.25) < 4 * se


def test_custom_game_rejects_oversized_tables():
    with pytest.raises(ValueError):
        custom_game({"actions": [5, 2], "payoffs": {}})
    with pytest.raises(ValueError):
        custom_game({"actions": [2, 2], "payoffs": {"0,0": [0, 0]}})


def test_load_game_descriptor():
    game, theta, nu = load_game({"builtin": "jovanovic", "theta": [0.5], "nu": {"kind": "uniform-box", "bounds": [[0, 1], [0, 1]]}})
    assert game.name == "jovanovic" and theta == {"theta": 0.5}
    assert nu == LatentDistribution.uniform_box([(0, 1), (0, 1)])
    with pytest.raises(ValueError):
        load_game({"theta": 1})
    with pytest.raises(ValueError):
        builtin_game("nope")


def test_resolve_theta_errors():
    g = oligopoly_2type()
    with pytest.raises(ValueError):
        g.resolve_theta(0.5)
    with pytest.raises(ValueError):
        g.resolve_theta({"alpha1": -0.1})
    with pytest.raises(ValueError):
        g.resolve_theta({"alpha1": -0.1, "beta1": -0.2, "beta2": -0.1, "gamma": 1})
    assert g.resolve_theta([-0.1, -0.3, -0.2])["alpha0"] == 1.0


# ---------------------------------------------------------------- mixed 2x2


def test_family_mixed_equilibrium():
    g = family_bargaining()
    prof = mixed_nash_2x2(g, 1.0, None, (0.0, 0.0))
    assert prof.participation == pytest.approx((2 / 3, 2 / 3))
    assert prof.is_proper
    assert mixed_nash_2x2(g, 1.0, None, (2.0, 2.0)) is None


@given(st.floats(0.1, 2.0), st.floats(-0.99, 0.99), st.floats(-0.99, 0.99))
def test_family_mixed_formula(theta, u1, u2):
    # shocks inside (-2 theta, theta)
    e1, e2 = theta * (1.5 * u1 - 0.5), theta * (1.5 * u2 - 0.5)
    prof = mixed_nash_2x2(family_bargaining(), theta, None, (e1, e2))
    assert prof.participation == pytest.approx(((2 * theta + e2) / (3 * theta), (2 * theta + e1) / (3 * theta)), abs=1e-9)
    assert prof.sigma.sum() == pytest.approx(1.0, abs=1e-12)


def test_matching_pennies_mixed():
    g = custom_game(MATCHING_PENNIES)
    prof = mixed_nash_2x2(g, {}, None, (0.0,))
    assert prof.participation == pytest.approx((0.5, 0.5))
    assert prof.sigma == pytest.approx([0.25] * 4)


def test_degenerate_mixed_is_flagged():
    g = custom_game({"actions": [2, 2], "payoffs": {k: [0, 0] for k in ("0,0", "0,1", "1,0", "1,1")}})
    res = mixed_nash_2x2_detail(g, {}, None, (0.0,))
    assert res.profile is None and res.degenerate


def test_mixed_correspondence_regions():
    g = family_bargaining()
    mid = mixed_correspondence(g, 1.0, None, (0.0, 0.0))
    assert [p.participation for p in mid[:2]] == [(0.0, 1.0), (1.0, 0.0)]
    assert mid[2].participation == pytest.approx((2 / 3, 2 / 3))
    assert len(mid) == 3
    high = mixed_correspondence(g, 1.0, None, (2.0, 2.0))
    assert [p.participation for p in high] == [(1.0, 1.0)]
    low = mixed_correspondence(g, 1.0, None, (-3.0, -3.0))
    assert [p.participation for p in low] == [(0.0, 0.0)]
    with pytest.raises(ValueError):
        mixed_correspondence(oligopoly_2type(), POINT_THETA, None, (0.5, 0.5))


@given(st.floats(0.1, 2.0), st.floats(-5, 5), st.floats(-5, 5))
def test_mixed_profiles_are_distributions(theta, e1, e2):
    for prof in mixed_correspondence(family_bargaining(), theta, None, (e1, e2)):
        assert prof.sigma.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(prof.sigma >= 0)


# ---------------------------------------------------------------- combos


def test_jovanovic_combos():
    c = combos_analytic("jovanovic", 0.5)
    assert c.pairs() == [(("00",), 0.75), (("00", "11"), 0.25)]


def test_family_combos():
    c = combos_analytic("family-bargaining", 0.25)
    assert dict(c.pairs()) == pytest.approx(
        {("00",): 0.0625, ("01",): 0.328125, ("01", "10"): 0.140625, ("10",): 0.328125, ("11",): 0.140625}
    )


def test_oligopoly_combos_match_grid_oracle():
    c = combos_analytic(oligopoly_2type(), POINT_THETA)
    assert len(c) == 14 and sum(c.masses) == pytest.approx(1.0)
    oracle = oligopoly_grid_oracle(POINT_THETA)
    got = {u: q for u, q in c.pairs() if q > 0}
    assert set(got) == set(oracle)
    for u, q in got.items():
        assert q == pytest.approx(oracle[u], abs=1e-3)


@given(
    st.floats(-1, -0.01),
    st.floats(-1, -0.02),
    st.floats(0.01, 0.99),
)
def test_oligopoly_has_the_fourteen_combos(a1, b1, frac):
    b2 = b1 * frac
    c = combos_analytic(oligopoly_2type(), {"alpha1": a1, "beta1": b1, "beta2": b2})
    assert {c.space.subset(m) for m in c.masks} == OLIGOPOLY_ROWS


@pytest.mark.parametrize(
    "name,thetas",
    [
        ("jovanovic", [0.1, 0.3, 0.5, 0.7, 0.9]),
        ("family-bargaining", [0.1, 0.2, 0.25, 0.3, 0.5]),
        (
            "oligopoly-2type",
            [
                POINT_THETA,
                {"alpha1": -0.1, "beta1": -0.3, "beta2": -0.2},
                {"alpha1": -0.4, "beta1": -0.6, "beta2": -0.1},
                {"alpha1": -0.05, "beta1": -0.9, "beta2": -0.7},
                {"alpha1": -0.3, "beta1": -0.2, "beta2": -0.15},
            ],
        ),
    ],
)
def test_monte_carlo_matches_analytic(name, thetas):
    g = builtin_game(name)
    n = 200_000
    for k, th in enumerate(thetas):
        exact = combos_analytic(g, th)
        mc = combos_monte_carlo(g, th, None, None, n, seed=k)
        assert mc.no_equilibrium == 0
        for u, q in exact.pairs():
            got, _ = mc.mass_of(u)
            se = np.sqrt(q * (1 - q) / n)
            assert abs(got - q) <= 4 * se + 1e-12
        assert set(mc.masks) <= set(exact.masks)


def test_jovanovic_monte_carlo_many_draws():
    mc = combos_monte_carlo(jovanovic(), 0.5, None, None, 1_000_000, seed=0)
    q, se = mc.mass_of(["00", "11"])
    assert abs(q - 0.25) <= 3 * se


def test_single_draw_gives_one_combo():
    for name in ("jovanovic", "family-bargaining", "oligopoly-2type"):
        g = builtin_game(name)
        th = POINT_THETA if name == "oligopoly-2type" else 0.4
        c = combos_monte_carlo(g, th, None, None, 1, seed=7).to_combos()
        assert len(c) == 1 and c.masses[0] == 1.0


def test_monte_carlo_is_deterministic_and_chunk_independent():
    g = oligopoly_2type()
    a = combos_monte_carlo(g, POINT_THETA, None, None, 50_000, seed=11)
    b = combos_monte_carlo(g, POINT_THETA, None, None, 50_000, seed=11, chunk=7_000)
    assert a.masks == b.masks and np.array_equal(a.masses, b.masses)


def test_missing_equilibrium_is_reported():
    g = custom_game({**MATCHING_PENNIES, "nu": {"kind": "uniform-box", "bounds": [[0, 1]]}})
    mc = combos_monte_carlo(g, {}, None, None, 100, seed=0)
    assert mc.no_equilibrium == 1.0 and mc.masks == ()
    with pytest.raises(ValueError):
        mc.to_combos()
    with pytest.raises(ValueError):
        combos_monte_carlo(g, {}, None, None, 0, seed=0)


def test_latent_sampling_is_sliceable():
    nu = LatentDistribution.iid_normal(2)
    full = nu.sample(1000, seed=5)
    assert np.array_equal(full[300:700], nu.sample(400, seed=5, start=300))
    assert LatentDistribution.from_json(nu.to_json()) == nu
