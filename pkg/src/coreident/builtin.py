"""The built-in games and games described by explicit payoff tables."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .games import GameSpec
from .latent import LatentDistribution
from .outcomes import OutcomeSpace

BUILTINS = ("jovanovic", "family-bargaining", "oligopoly-2type")
OLIGOPOLY_LABELS = ("00", "01", "10", "02", "11", "20", "12", "21", "22")


def _stack(*cols: Any) -> np.ndarray:
    return np.stack(np.broadcast_arrays(*cols), axis=-1)


# ---------------------------------------------------------------- jovanovic


def _jovanovic_payoff(profile: tuple[int, ...], theta: Mapping[str, Any], x: Mapping[str, Any], eps: np.ndarray) -> np.ndarray:
    t = theta["theta"]
    y1, y2 = profile
    e1, e2 = eps[..., 0], eps[..., 1]
    return _stack((t * y2 - e1) * y1, (t * y1 - e2) * y2)


def _jovanovic_cuts(theta: Mapping[str, Any]) -> list[np.ndarray]:
    t = np.atleast_1d(np.asarray(theta["theta"], dtype=float))
    c = np.stack([np.zeros_like(t), t], axis=1)
    return [c, c]


def jovanovic() -> GameSpec:
    """Two players who both gain only from joint participation.

    Player ``i`` earns ``(theta * Y_j - eps_i) * Y_i``; with shocks on
    ``[0, 1]^2`` only ``00`` and ``11`` can be equilibria.
    """
    return GameSpec(
        name="jovanovic",
        n_actions=(2, 2),
        payoff=_jovanovic_payoff,
        space=OutcomeSpace(("00", "11")),
        eps_dim=2,
        params=("theta",),
        outcome_map=lambda pr: {(0, 0): "00", (1, 1): "11"}.get(pr),
        cuts=_jovanovic_cuts,
        extended_cells=False,
        default_nu=LatentDistribution.uniform_box([(0.0, 1.0), (0.0, 1.0)]),
    )


# ---------------------------------------------------------------- family bargaining


def _family_payoff(profile: tuple[int, ...], theta: Mapping[str, Any], x: Mapping[str, Any], eps: np.ndarray) -> np.ndarray:
    t = theta["theta"]
    e1, e2 = eps[..., 0], eps[..., 1]
    zero = np.zeros_like(e1)
    table = {
        (0, 0): (zero, zero),
        (0, 1): (4 * t + zero, 2 * t + e2),
        (1, 0): (2 * t + e1, 4 * t + zero),
        (1, 1): (3 * t + e1, 3 * t + e2),
    }
    return _stack(*table[profile])


def _family_cuts(theta: Mapping[str, Any]) -> list[np.ndarray]:
    t = np.atleast_1d(np.asarray(theta["theta"], dtype=float))
    c = np.stack([-2 * t, t], axis=1)
    return [c, c]


def family_bargaining() -> GameSpec:
    """Two children deciding whether to take part in caring for a parent.

    Label ``ab`` means child 1 plays ``a`` and child 2 plays ``b`` (1 =
    participate). Payoffs (child 1, child 2): ``00 -> (0, 0)``,
    ``01 -> (4t, 2t + e2)``, ``10 -> (2t + e1, 4t)``,
    ``11 -> (3t + e1, 3t + e2)``.
    """
    return GameSpec(
        name="family-bargaining",
        n_actions=(2, 2),
        payoff=_family_payoff,
        space=OutcomeSpace(("00", "01", "10", "11")),
        eps_dim=2,
        params=("theta",),
        cuts=_family_cuts,
        extended_cells=True,
        default_nu=LatentDistribution.uniform_box([(-1.0, 1.0), (-1.0, 1.0)]),
    )


# ---------------------------------------------------------------- oligopoly


def _oligopoly_payoff(profile: tuple[int, ...], theta: Mapping[str, Any], x: Mapping[str, Any], eps: np.ndarray) -> np.ndarray:
    f1, f2 = eps[..., 0], eps[..., 1]
    n1 = profile[0] + profile[1]
    n2 = profile[2] + profile[3]
    p1 = theta["alpha0"] + theta["alpha1"] * (n1 + n2) - f1
    p2 = theta["beta0"] + theta["beta1"] * n1 + theta["beta2"] * n2 - f2
    return _stack(profile[0] * p1, profile[1] * p1, profile[2] * p2, profile[3] * p2)


def _oligopoly_cuts(theta: Mapping[str, Any]) -> list[np.ndarray]:
    a0, a1 = (np.atleast_1d(np.asarray(theta[k], dtype=float)) for k in ("alpha0", "alpha1"))
    b0, b1, b2 = (np.atleast_1d(np.asarray(theta[k], dtype=float)) for k in ("beta0", "beta1", "beta2"))
    c1 = np.stack(np.broadcast_arrays(*[a0 + n * a1 for n in range(1, 5)]), axis=1)
    c2 = np.stack(np.broadcast_arrays(*[b0 + b1 * i + b2 * j for i in range(3) for j in (1, 2)]), axis=1)
    return [c1, c2]


def oligopoly_2type() -> GameSpec:
    """Entry game with two firms of each of two types.

    An entering type-1 firm earns ``alpha0 + alpha1 * (all entrants) - f1``;
    an entering type-2 firm earns ``beta0 + beta1 * (type-1 entrants) +
    beta2 * (type-2 entrants) - f2``. Outcome ``ij`` counts ``i`` type-1 and
    ``j`` type-2 entrants.
    """
    return GameSpec(
        name="oligopoly-2type",
        n_actions=(2, 2, 2, 2),
        payoff=_oligopoly_payoff,
        space=OutcomeSpace(OLIGOPOLY_LABELS),
        eps_dim=2,
        params=("alpha1", "beta1", "beta2"),
        fixed={"alpha0": 1.0, "beta0": 1.0},
        outcome_map=lambda pr: f"{pr[0] + pr[1]}{pr[2] + pr[3]}",
        cuts=_oligopoly_cuts,
        extended_cells=True,
        default_nu=LatentDistribution.uniform_box([(0.0, 1.0), (0.0, 1.0)]),
    )


_FACTORIES = {"jovanovic": jovanovic, "family-bargaining": family_bargaining, "oligopoly-2type": oligopoly_2type}


def builtin_game(name: str) -> GameSpec:
    try:
        return _FACTORIES[name]()
    except KeyError:
        raise ValueError(f"unknown built-in game {name!r}; choose from {BUILTINS}") from None


# ---------------------------------------------------------------- custom tables


def _linear_term(entry: Any, theta: Mapping[str, Any], eps: np.ndarray) -> Any:
    if isinstance(entry, (int, float)):
        return float(entry) + np.zeros(eps.shape[:-1])
    val = float(entry.get("const", 0.0)) + np.zeros(eps.shape[:-1])
    for name, coef in entry.get("theta", {}).items():
        val = val + float(coef) * theta[name]
    for k, coef in enumerate(entry.get("eps", [])):
        val = val + float(coef) * eps[..., k]
    return val


def custom_game(table: Mapping[str, Any]) -> GameSpec:
    """Game from an explicit payoff table.

    ``table`` holds ``actions`` (per player, at most 3 players with at most 4
    actions), ``payoffs`` mapping ``"a,b,..."`` to one entry per player, and
    optionally ``params``, ``eps_dim``, ``labels`` (profile key to outcome
    label, ``null`` for unobservable) and ``outcomes``. Each payoff entry is a
    number or ``{"const": c, "theta": {name: coef}, "eps": [coef, ...]}``.
    """
    actions = tuple(int(a) for a in table["actions"])
    if not 1 <= len(actions) <= 3 or any(not 1 <= a <= 4 for a in actions):
        raise ValueError("custom games support up to 3 players with up to 4 actions each")
    payoffs = {tuple(int(s) for s in key.split(",")): val for key, val in table["payoffs"].items()}
    import itertools

    for pr in itertools.product(*(range(a) for a in actions)):
        if pr not in payoffs or len(payoffs[pr]) != len(actions):
            raise ValueError(f"payoff table is missing profile {pr} or has the wrong length")
    labels_raw = table.get("labels")
    labels = {tuple(int(s) for s in k.split(",")): v for k, v in labels_raw.items()} if labels_raw else None
    if "outcomes" in table:
        outcomes = tuple(table["outcomes"])
    elif labels:
        outcomes = tuple(dict.fromkeys(v for v in labels.values() if v is not None))
    else:
        outcomes = tuple("".join(map(str, pr)) for pr in itertools.product(*(range(a) for a in actions)))
    eps_dim = int(table.get("eps_dim", 1))

    def payoff(profile: tuple[int, ...], theta: Mapping[str, Any], x: Mapping[str, Any], eps: np.ndarray) -> np.ndarray:
        return _stack(*[_linear_term(e, theta, eps) for e in payoffs[profile]])

    nu = LatentDistribution.from_json(table["nu"]) if "nu" in table else None
    return GameSpec(
        name=str(table.get("name", "custom")),
        n_actions=actions,
        payoff=payoff,
        space=OutcomeSpace(outcomes),
        eps_dim=eps_dim,
        params=tuple(table.get("params", ())),
        outcome_map=(lambda pr: labels.get(pr)) if labels else None,
        default_nu=nu,
    )


def load_game(obj: Mapping[str, Any] | str | Path) -> tuple[GameSpec, dict[str, Any] | None, LatentDistribution | None]:
    """Read a game descriptor: returns the game, its parameter value (if given) and nu."""
    if not isinstance(obj, Mapping):
        obj = json.loads(Path(obj).read_text())
    if "builtin" in obj:
        game = builtin_game(obj["builtin"])
    elif "custom" in obj:
        game = custom_game(obj["custom"])
    else:
        raise ValueError('a game descriptor needs a "builtin" or "custom" key')
    theta = game.resolve_theta(obj["theta"]) if "theta" in obj else None
    nu = LatentDistribution.from_json(obj["nu"]) if "nu" in obj else game.default_nu
    return game, theta, nu
