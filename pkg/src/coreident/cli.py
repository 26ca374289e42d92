"""Command-line entry point: ``coreident <subcommand> ...``.

Exit codes: 0 success, 2 input error, 3 method/game incompatibility.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import logging
import sys
from pathlib import Path
from typing import Any, Iterable, Sequence, TextIO

import numpy as np

from .builtin import BUILTINS, builtin_game, load_game
from .games import GameSpec
from .identify import (
    METHODS,
    PURE_METHODS,
    BenchRow,
    Context,
    GridSpec,
    IdentifyRecord,
    IncompatibleMethod,
    InputError,
    barycenter,
    bench_rows_csv,
    check,
    combos_at,
    compare_singleton,
    core_vertices,
    evaluation_counts,
    identify,
    load_probability,
    make_context,
    mixed_spec,
    montecarlo_scatter,
    throughput,
)
from .latent import LatentDistribution
from .mixed import mixed_capacity
from .outcomes import Capacity, OutcomeSpace, ProbabilityVector, capacity_from_combos

EXIT_OK, EXIT_INPUT, EXIT_INCOMPATIBLE = 0, 2, 3
THROUGHPUT_TARGETS = {"maxflow": 1000.0, "submodular": 100.0}

log = logging.getLogger("coreident")


# ---------------------------------------------------------------- argument helpers


def parse_theta(text: str | None) -> dict[str, Any] | float | None:
    """``{"a": 1}`` JSON, ``a=1,b=2`` pairs, or a bare number."""
    if text is None:
        return None
    text = text.strip()
    if text.startswith("{"):
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise InputError(f"bad --theta JSON: {exc}") from exc
    if "=" in text:
        out: dict[str, Any] = {}
        for part in text.split(","):
            key, _, val = part.partition("=")
            try:
                out[key.strip()] = float(val)
            except ValueError as exc:
                raise InputError(f"bad --theta value {part!r}") from exc
        return out
    try:
        return float(text)
    except ValueError as exc:
        raise InputError(f"bad --theta {text!r}") from exc


def _read_json(path: str) -> Any:
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from exc


def resolve_game(args: argparse.Namespace) -> tuple[GameSpec, dict[str, Any], LatentDistribution | None]:
    """Game, parameter values from the descriptor (possibly partial) and nu."""
    if bool(args.game) == bool(args.builtin):
        raise InputError("give exactly one of --game FILE or --builtin NAME")
    base: dict[str, Any] = {}
    if args.builtin:
        try:
            game = builtin_game(args.builtin)
        except ValueError as exc:
            raise InputError(str(exc)) from exc
        nu = game.default_nu
    else:
        obj = _read_json(args.game)
        partial = obj.pop("theta", None) if isinstance(obj, dict) else None
        try:
            game, _, nu = load_game(obj)
        except (KeyError, ValueError) as exc:
            raise InputError(f"bad game descriptor: {exc}") from exc
        if isinstance(partial, dict):
            base.update(partial)
        elif partial is not None:
            base.update(game.resolve_theta(partial))
    if getattr(args, "nu", None):
        try:
            nu = LatentDistribution.from_json(_read_json(args.nu))
        except (KeyError, ValueError) as exc:
            raise InputError(f"bad --nu: {exc}") from exc
    theta = parse_theta(getattr(args, "theta", None))
    if isinstance(theta, dict):
        base.update(theta)
    elif theta is not None:
        if len(game.params) != 1:
            raise InputError(f"{game.name} takes parameters {game.params}; pass them as name=value")
        base[game.params[0]] = theta
    return game, base, nu


def full_theta(game: GameSpec, base: dict[str, Any]) -> dict[str, Any]:
    try:
        return game.resolve_theta(base)
    except ValueError as exc:
        raise InputError(str(exc)) from exc


def build_context(args: argparse.Namespace, game: GameSpec, nu: LatentDistribution | None, method: str) -> Context:
    if not args.p:
        raise InputError("--p FILE is required")
    try:
        p = load_probability(args.p, game.space)
    except OSError as exc:
        raise InputError(f"cannot read {args.p}: {exc}") from exc
    ordering = args.ordering.split(",") if getattr(args, "ordering", None) else None
    return make_context(game, p, method, nu=nu, seed=args.seed, n_draws=args.draws, ordering=ordering)


class _Output:
    def __init__(self, path: str | None, append: bool = False) -> None:
        self.path = path
        self.append = append
        self.handle: TextIO | None = None

    def __enter__(self) -> TextIO:
        if self.path:
            self.handle = open(self.path, "a" if self.append else "w", encoding="utf-8", newline="")
            return self.handle
        return sys.stdout

    def __exit__(self, *exc: object) -> None:
        if self.handle is not None:
            self.handle.close()


def _dump(obj: Any) -> str:
    return json.dumps(obj, separators=(", ", ": "))


def _record_row(rec: IdentifyRecord, names: Sequence[str]) -> list[Any]:
    wit = "" if rec.witness is None else " ".join(str(w) for w in rec.witness)
    return [rec.index, *(repr(rec.theta[k]) for k in names), rec.verdict, wit, rec.method, "" if rec.ms is None else rec.ms]


def write_records(out: TextIO, records: Iterable[IdentifyRecord], fmt: str, names: Sequence[str], header: bool = True) -> int:
    n = 0
    writer = csv.writer(out, lineterminator="\n") if fmt == "csv" else None
    if writer is not None and header:
        writer.writerow(["index", *names, "verdict", "witness", "method", "ms"])
    for rec in records:
        if writer is not None:
            writer.writerow(_record_row(rec, names))
        else:
            out.write(_dump(rec.to_json()) + "\n")
        out.flush()
        n += 1
    return n


def _last_index(path: str, fmt: str) -> int | None:
    """Index of the last complete record in an existing output file."""
    p = Path(path)
    if not p.exists():
        return None
    last = None
    for line in p.read_text().splitlines():
        if not line.strip():
            continue
        try:
            last = int(json.loads(line)["index"]) if fmt == "json" else int(line.split(",")[0])
        except (ValueError, KeyError, json.JSONDecodeError):
            continue
    return last


# ---------------------------------------------------------------- capacity sources


def capacity_source(args: argparse.Namespace) -> Capacity:
    if args.capacity:
        obj = _read_json(args.capacity)
        try:
            space = OutcomeSpace.from_json(obj["outcomes"])
            return Capacity.from_json(space, obj["capacity"])
        except (KeyError, ValueError) as exc:
            raise InputError(f"bad capacity file: {exc}") from exc
    game, base, nu = resolve_game(args)
    theta = full_theta(game, base)
    method = "mixed-submodular" if args.mixed else "maxflow"
    if args.mixed and game.n_actions != (2, 2):
        raise IncompatibleMethod(f"mixed capacities need a 2x2 game; {game.name} has actions {game.n_actions}")
    dummy = ProbabilityVector(game.space, np.full(game.space.size, 1.0 / game.space.size))
    ctx = make_context(game, dummy, method, nu=nu, seed=args.seed, n_draws=args.draws)
    if args.mixed:
        return mixed_capacity(mixed_spec(ctx, theta))  # type: ignore[return-value]
    return capacity_from_combos(combos_at(ctx, theta))


def _vector_json(v: ProbabilityVector) -> dict[str, float]:
    return {lab: float(x) for lab, x in zip(v.space.labels, v.masses)}


# ---------------------------------------------------------------- subcommands


def cmd_check(args: argparse.Namespace) -> int:
    game, base, nu = resolve_game(args)
    ctx = build_context(args, game, nu, args.method)
    rec = check(ctx, full_theta(game, base), timing=not args.no_timing)
    with _Output(args.out) as out:
        write_records(out, [rec], args.format, game.params)
    return EXIT_OK


def cmd_identify(args: argparse.Namespace) -> int:
    game, base, nu = resolve_game(args)
    if not args.grid:
        raise InputError("--grid FILE is required")
    try:
        grid = GridSpec.from_json(_read_json(args.grid), args.method)
    except (TypeError, ValueError) as exc:
        raise InputError(f"bad grid: {exc}") from exc
    ctx = build_context(args, game, nu, grid.method)
    start, append = args.start, False
    if args.resume:
        if not args.out:
            raise InputError("--resume needs --out")
        last = _last_index(args.out, args.format)
        if last is not None:
            start, append = last + 1, True
    records = identify(ctx, grid, base_theta=base, start=start, timing=not args.no_timing)
    # pull the first record before opening the output so up-front errors leave no file behind
    first = next(records, None)
    with _Output(args.out, append) as out:
        head = [] if first is None else [first]
        write_records(out, itertools.chain(head, records), args.format, game.params, header=not append)
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    game, base, nu = resolve_game(args)
    if not args.grid:
        raise InputError("--grid FILE is required")
    grid = GridSpec.from_json(_read_json(args.grid), args.method)
    ctx = build_context(args, game, nu, grid.method)
    res = compare_singleton(ctx, grid, base_theta=base)
    with _Output(args.out) as out:
        if args.format == "csv":
            w = csv.writer(out, lineterminator="\n")
            w.writerow([*res.names, "sharp", "singleton"])
            for row, a, b in zip(res.values, res.sharp, res.singleton):
                w.writerow([*(repr(float(v)) for v in row), int(a), int(b)])
        else:
            out.write(_dump(res.to_json()) + "\n")
    return EXIT_OK


def cmd_vertices(args: argparse.Namespace) -> int:
    cap = capacity_source(args)
    try:
        verts = core_vertices(cap)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    with _Output(args.out) as out:
        if args.format == "csv":
            w = csv.writer(out, lineterminator="\n")
            w.writerow(list(cap.space.labels))
            for v in verts:
                w.writerow([repr(float(x)) for x in v.masses])
        else:
            out.write(_dump([_vector_json(v) for v in verts]) + "\n")
    return EXIT_OK


def _dgp(args: argparse.Namespace, cap: Capacity) -> ProbabilityVector:
    if args.dgp == "barycenter":
        return barycenter(core_vertices(cap))
    if args.dgp.startswith("vertex:"):
        verts = core_vertices(cap)
        k = int(args.dgp.split(":", 1)[1])
        if not 0 <= k < len(verts):
            raise InputError(f"vertex index {k} out of range (0..{len(verts) - 1})")
        return verts[k]
    try:
        return load_probability(args.dgp, cap.space)
    except OSError as exc:
        raise InputError(f"cannot read {args.dgp}: {exc}") from exc


def cmd_scatter(args: argparse.Namespace) -> int:
    cap = capacity_source(args)
    dgp = _dgp(args, cap)
    res = montecarlo_scatter(cap, dgp, args.n, args.sample_size, args.seed, args.keep_fraction)
    with _Output(args.out) as out:
        if args.format == "csv":
            out.write(res.to_csv())
        else:
            body = {
                "dgp": _vector_json(dgp),
                "dgp_inside": res.dgp_inside,
                "fraction_outside": res.fraction_outside,
                "points": [
                    {"p": [float(x) for x in row], "distance": float(d), "inside": bool(ok)}
                    for row, d, ok in zip(res.points, res.distance, res.inside)
                ],
            }
            out.write(_dump(body) + "\n")
    return EXIT_OK


def _bench_thetas(n: int, seed: int) -> list[dict[str, float]]:
    rng = np.random.default_rng(seed)
    return [{"alpha1": a, "beta1": b, "beta2": c} for a, b, c in rng.uniform(-1.0, 0.0, (n, 3))]


def cmd_bench(args: argparse.Namespace) -> int:
    sizes = [int(s) for s in args.sizes.split(",")]
    rows: list[BenchRow] = evaluation_counts(sizes, args.per_size, args.seed)
    game = builtin_game("oligopoly-2type")
    p = ProbabilityVector(game.space, np.array([0.1, 0.15, 0.15, 0.1, 0.0, 0.5, 0.0, 0.0, 0.0]))
    thetas = _bench_thetas(args.thetas, args.seed)
    for method, target in THROUGHPUT_TARGETS.items():
        row = throughput(make_context(game, p, method), thetas)
        rows.append(row)
        if row.per_second < target / 10:
            log.warning("%s: %.0f parameter values per second, below a tenth of the %.0f target", method, row.per_second, target)
    with _Output(args.out) as out:
        out.write(bench_rows_csv(rows))
    return EXIT_OK


# ---------------------------------------------------------------- parser


def _add_game(sp: argparse.ArgumentParser) -> None:
    g = sp.add_argument_group("game")
    g.add_argument("--game", metavar="FILE", help="game descriptor JSON")
    g.add_argument("--builtin", metavar="NAME", choices=BUILTINS, help="built-in game")
    g.add_argument("--theta", help='parameter value: JSON object, "name=value,..." or a number')
    g.add_argument("--nu", metavar="FILE", help="latent distribution JSON (overrides the game default)")
    g.add_argument("--seed", type=int, default=0, help="seed for every simulation (default 0)")
    g.add_argument("--draws", type=int, default=100_000, help="Monte Carlo draws where simulation is needed")


def _add_io(sp: argparse.ArgumentParser, formats: Sequence[str] = ("json", "csv")) -> None:
    sp.add_argument("--out", metavar="FILE", help="output file (default stdout)")
    sp.add_argument("--format", choices=formats, default=formats[0])


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="coreident", description="Core-membership tests for games with multiple equilibria.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("check", help="verdict at one parameter value")
    _add_game(sp)
    sp.add_argument("--p", metavar="FILE", help="observed distribution CSV (outcome,mass)")
    sp.add_argument("--method", choices=METHODS, default="maxflow")
    sp.add_argument("--ordering", help="comma-separated outcome order for the cd method")
    sp.add_argument("--no-timing", action="store_true", help="emit null instead of wall times")
    _add_io(sp)
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("identify", help="sweep a parameter grid (JSON lines)")
    _add_game(sp)
    sp.add_argument("--p", metavar="FILE")
    sp.add_argument("--grid", metavar="FILE")
    sp.add_argument("--method", choices=METHODS, help="overrides the grid file's method")
    sp.add_argument("--ordering")
    sp.add_argument("--start", type=int, default=0, help="first grid index to evaluate")
    sp.add_argument("--resume", action="store_true", help="continue after the last index found in --out")
    sp.add_argument("--no-timing", action="store_true")
    _add_io(sp)
    sp.set_defaults(func=cmd_identify)

    sp = sub.add_parser("compare-singleton", help="sharp set versus singleton-class set on a grid")
    _add_game(sp)
    sp.add_argument("--p", metavar="FILE")
    sp.add_argument("--grid", metavar="FILE")
    sp.add_argument("--method", choices=PURE_METHODS)
    sp.add_argument("--ordering")
    _add_io(sp)
    sp.set_defaults(func=cmd_compare)

    for name, func, helptext in (
        ("core-vertices", cmd_vertices, "extreme points of the core"),
        ("mc-scatter", cmd_scatter, "empirical distributions of simulated samples with core flags"),
    ):
        sp = sub.add_parser(name, help=helptext)
        _add_game(sp)
        sp.add_argument("--capacity", metavar="FILE", help='capacity JSON {"outcomes": [...], "capacity": [...]}')
        sp.add_argument("--mixed", action="store_true", help="use the mixed-strategy likelihood (2x2 games)")
        if name == "mc-scatter":
            sp.add_argument("--dgp", default="barycenter", help='"barycenter", "vertex:K" or a CSV file')
            sp.add_argument("--n", type=int, default=10_000, help="number of samples")
            sp.add_argument("--sample-size", type=int, default=1000)
            sp.add_argument("--keep-fraction", type=float, default=0.95)
        _add_io(sp, ("csv", "json") if name == "mc-scatter" else ("json", "csv"))
        sp.set_defaults(func=func)

    sp = sub.add_parser("bench", help="oracle-call counts and throughput (CSV)")
    sp.add_argument("--sizes", default="3,4,5,6,7,8,9,10", help="outcome counts for random instances")
    sp.add_argument("--per-size", type=int, default=20)
    sp.add_argument("--thetas", type=int, default=2000, help="parameter values for the throughput runs")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", metavar="FILE")
    sp.set_defaults(func=cmd_bench)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return int(args.func(args))
    except IncompatibleMethod as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INCOMPATIBLE
    except (InputError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
