"""Command-line entry point.

Every subcommand writes CSV or JSON to ``--out`` (or standard output) with
certificates as leading ``#`` lines.  Exit codes: 0 when every asserted
certificate holds, 1 when one fails, 2 for usage, domain or config errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from .errors import BubbleReduceError, DomainError
from .model_core import (Bubble, MaxPointModel, PerturbativeLandscape, PerturbativeModel,
                         SpaceDims, load_model)

EXIT_OK, EXIT_CERT, EXIT_USAGE = 0, 1, 2

TRANSFORM_POINTS = ((0.0, 0.0), (0.5, 0.0), (1.0, 0.5), (1.5, -1.0), (2.0, 2.0), (4.0, 1.0))


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that raises instead of exiting, so ``main`` returns codes."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


class _UsageError(Exception):
    pass


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _dims(text):
    try:
        vals = [int(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected N,k,h, got {text!r}")
    if len(vals) != 3:
        raise argparse.ArgumentTypeError(f"expected N,k,h, got {text!r}")
    return vals


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output path (default: standard output)")
    common.add_argument("--tol", type=float, help="acceptance tolerance")
    common.add_argument("--seed", type=int, default=0, help="multistart seed")

    parser = _Parser(prog="bubblereduce", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("constants", parents=[common],
                       help="closed-form versus quadrature table of the interaction constants")
    p.add_argument("--dims", type=_dims, help="N,k,h (default: the standard four instances)")
    p.add_argument("--gamma", type=_floats, help="gamma value(s), comma separated")

    p = sub.add_parser("check-lemma", parents=[common], help="asymptotic ladder for one expansion")
    p.add_argument("--lemma", required=True, help="5.1, 5.2, 5.3, 5.5, 5.6 or a descriptive name")
    p.add_argument("--dims", type=_dims, required=True)
    p.add_argument("--gamma", type=float)

    p = sub.add_parser("solve-reduced", parents=[common],
                       help="solve the reduced system and emit the ansatz as JSON")
    p.add_argument("--config", required=True, help="model JSON file")
    p.add_argument("--epsilon", type=float, help="perturbation size (perturbative models)")
    p.add_argument("--thm24", action="store_true",
                   help="maximum-point route (implied by a maxpoint config)")
    p.add_argument("--separation", type=float, help="rescale the maximum points to this distance")

    p = sub.add_parser("residual-sweep", parents=[common],
                       help="solve over a parameter list and tabulate residual metrics")
    p.add_argument("--config", required=True)
    p.add_argument("--epsilons", type=_floats)
    p.add_argument("--separations", type=_floats)

    p = sub.add_parser("transform-demo", parents=[common],
                       help="follow a built-in profile through the Heisenberg/Grushin chain")
    p.add_argument("--profile", default="bubble1", help="built-in profile name")

    p = sub.add_parser("energy-map", parents=[common],
                       help="energy on a log grid of (lambda1, lambda2) with centres fixed")
    p.add_argument("--config", required=True)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--separation", type=float)
    p.add_argument("--grid", type=int, default=16, help="nodes per axis")
    p.add_argument("--range", type=_floats, default=[0.1, 10.0], dest="trange",
                   help="t range as lo,hi (lambda_j = t_j times its scale)")
    return parser


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, bool):
        return str(v).lower()
    return str(v)


def _csv(header, columns, rows) -> str:
    buf = io.StringIO()
    for line in header:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# subcommands


def cmd_constants(args) -> int:
    from .constants import DEFAULT_DIMS, cross_check_table

    tol = args.tol if args.tol is not None else 1e-5
    dims_grid = DEFAULT_DIMS if args.dims is None else (SpaceDims(*args.dims),)
    report = cross_check_table(dims_grid, args.gamma, tol=tol)
    header = [f"max_rel_diff: {report.max_rel_diff!r}", f"tolerance: {tol!r}",
              f"sign_ledger: {'pass' if report.signs_ok else 'FAIL'}"]
    header += [f"error: {d} gamma={g}: {msg}" for d, g, msg in report.errors]
    _emit(report.to_csv(header), args.out)
    return EXIT_OK if report.ok else EXIT_CERT


def cmd_check_lemma(args) -> int:
    from .interaction import lemma_ladder

    rep = lemma_ladder(args.lemma, SpaceDims(*args.dims), args.gamma)
    header = [f"lemma: {rep.lemma}", f"dims: {rep.dims.as_tuple()}", f"gamma: {rep.gamma!r}",
              f"slope: {rep.slope!r} target {rep.slope_target} ({'pass' if rep.slope_ok else 'FAIL'})",
              f"ratio: {rep.ratio!r} ({'pass' if rep.ratio_ok else 'FAIL'})"]
    header += [f"note: {n}" for n in rep.notes]
    _emit(_csv(header, rep.columns, rep.rows), args.out)
    return EXIT_OK if rep.ok else EXIT_CERT


def _rescaled(model: MaxPointModel, separation: float) -> MaxPointModel:
    """Maximum points moved symmetrically about their midpoint to the given distance."""
    if not separation > 0:
        raise DomainError("separation must be positive")
    c1, c2 = model.centers[0], model.centers[1]
    mid = 0.5 * (c1 + c2)
    e = (c2 - c1) / np.linalg.norm(c2 - c1)
    cs = (mid - 0.5 * separation * e, mid + 0.5 * separation * e) + tuple(model.centers[2:])
    return MaxPointModel(model.dims, cs, model.K, model.gamma, model.q, model.a0, model.a1,
                         model.sigma, model.nu)


def _landscape(model):
    if isinstance(model, PerturbativeLandscape):
        return model
    if isinstance(model, PerturbativeModel):
        raise DomainError("the two-bubble route needs a config with two flatness points")
    raise DomainError(f"expected a perturbative model, got {type(model).__name__}")


def _load(path):
    try:
        return load_model(path)
    except OSError as exc:
        raise DomainError(f"cannot read config {path!r}: {exc}")
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise DomainError(f"malformed config {path!r}: {exc}")


def cmd_solve_reduced(args) -> int:
    from .reduction import solve_theorem23, solve_theorem24

    model = _load(args.config)
    if args.thm24 or isinstance(model, MaxPointModel):
        if not isinstance(model, MaxPointModel):
            raise DomainError("the maximum-point route needs a maxpoint config")
        if args.separation is not None:
            model = _rescaled(model, args.separation)
        ans = solve_theorem24(model, seed=args.seed)
        ok = bool(ans.certificates.get("interior"))
    else:
        if args.epsilon is None:
            raise DomainError("--epsilon is required for perturbative models")
        ans = solve_theorem23(_landscape(model), args.epsilon)
        ok = ans.certificates.get("degree") == -1
    _emit(ans.to_json() + "\n", args.out)
    return EXIT_OK if ok else EXIT_CERT


def _strictly_decreasing(vals) -> bool:
    return all(b < a for a, b in zip(vals[:-1], vals[1:]))


def cmd_residual_sweep(args) -> int:
    from .residual import SWEEP_COLUMNS, sweep_report

    if (args.epsilons is None) == (args.separations is None):
        raise DomainError("give exactly one of --epsilons or --separations")
    model = _load(args.config)
    if args.epsilons is not None:
        text = sweep_report(_landscape(model), epsilons=args.epsilons, seed=args.seed)
        n = len(args.epsilons)
    else:
        if not isinstance(model, MaxPointModel):
            raise DomainError("--separations needs a maxpoint config")
        text = sweep_report(model, separations=args.separations, seed=args.seed,
                            separation_builder=lambda s: _rescaled(model, s))
        n = len(args.separations)
    rows = [line for line in text.splitlines() if line and not line.startswith("#")][1:]
    col = SWEEP_COLUMNS.index("res_sup")
    sup = [float(r.split(",")[col]) for r in rows]
    l2 = [float(r.split(",")[col + 1]) for r in rows]
    ok = len(rows) == n and _strictly_decreasing(sup) and _strictly_decreasing(l2)
    cert = f"# residual_strictly_decreasing: {'pass' if ok else 'FAIL'}\n"
    _emit(cert + text, args.out)
    return EXIT_OK if ok else EXIT_CERT


def cmd_transform_demo(args) -> int:
    from .geometry import builtin_profiles, chain_table

    names = sorted(builtin_profiles())
    if args.profile not in names:
        raise DomainError(f"unknown profile {args.profile!r}; choose from {names}")
    rows = chain_table(args.profile, TRANSFORM_POINTS)
    back = max(abs(r[4] - r[2]) / max(abs(r[2]), 1e-300) for r in rows)
    tol = args.tol if args.tol is not None else 1e-12
    header = [f"profile: {args.profile}", "chain: psi(r, t) -> v(r^2, t) -> psi(r, t)",
              f"roundtrip_max_rel: {back!r} ({'pass' if back <= tol else 'FAIL'})"]
    _emit(_csv(header, ["r", "t", "psi", "v_at_r2", "psi_roundtrip"], rows), args.out)
    return EXIT_OK if back <= tol else EXIT_CERT


def energy_map(model, epsilon=None, grid: int = 16, trange=(0.1, 10.0)):
    """Energy with centres at the model points on a log grid of ``lambda``.

    Returns ``(header, columns, rows)``; ``excess`` is the energy minus its
    ``lambda``-independent self-energy part and locates the minimum cell.
    """
    from .reduction import (ConcentrationAnsatz, l_epsilon, theorem24_scales)
    from .residual import energy_excess, single_energy

    if grid < 1:
        raise DomainError("grid needs at least one node")
    lo, hi = trange
    if not 0 < lo <= hi:
        raise DomainError("t range must satisfy 0 < lo <= hi")
    ts = np.geomspace(lo, hi, grid) if grid > 1 else np.array([math.sqrt(lo * hi)])
    if isinstance(model, MaxPointModel):
        c1, c2 = model.centers[0], model.centers[1]
        dims = model.dims
        s = float(np.linalg.norm(c2 - c1))
        scale = theorem24_scales(model.gamma[0], model.gamma[1], dims.N, s)
        levels = (model.K[0], model.K[1])
        mdl = model
        anchors = (c1, c2)
        header = [f"separation: {s!r}", f"scales: {list(scale)!r}"]
    else:
        land = _landscape(model)
        if epsilon is None or not epsilon > 0:
            raise DomainError("a positive --epsilon is required for perturbative models")
        p1, p2 = land.points[:2]
        dims = p1.dims
        L = l_epsilon(p1.gamma, p2.gamma, dims.N, epsilon)
        scale = (L ** (1.0 / p1.gamma), L ** (1.0 / p2.gamma))
        levels = (1.0, 1.0)
        mdl = land.with_epsilon(epsilon)
        anchors = (p1.center, p2.center)
        header = [f"epsilon: {epsilon!r}", f"scales: {list(scale)!r}"]
    base = math.fsum(single_energy(dims, 1.0, lv, consistent=True) for lv in levels)
    rows = []
    for t1 in ts:
        for t2 in ts:
            bs = (Bubble(dims, anchors[0], t1 * scale[0]), Bubble(dims, anchors[1], t2 * scale[1]))
            ans = ConcentrationAnsatz(bs, levels=levels, anchors=anchors)
            ex = energy_excess(ans, mdl)
            rows.append([bs[0].lam, bs[1].lam, base + ex, ex])
    best = min(range(len(rows)), key=lambda i: rows[i][3])
    header.append(f"minimum_cell: lambda1={rows[best][0]!r} lambda2={rows[best][1]!r} "
                  f"excess={rows[best][3]!r}")
    return header, ["lambda1", "lambda2", "energy", "excess"], rows


def cmd_energy_map(args) -> int:
    model = _load(args.config)
    if isinstance(model, MaxPointModel) and args.separation is not None:
        model = _rescaled(model, args.separation)
    if len(args.trange) != 2:
        raise DomainError("--range takes lo,hi")
    header, cols, rows = energy_map(model, args.epsilon, args.grid, tuple(args.trange))
    _emit(_csv(header, cols, rows), args.out)
    return EXIT_OK


COMMANDS = {
    "constants": cmd_constants,
    "check-lemma": cmd_check_lemma,
    "solve-reduced": cmd_solve_reduced,
    "residual-sweep": cmd_residual_sweep,
    "transform-demo": cmd_transform_demo,
    "energy-map": cmd_energy_map,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        print("bubblereduce: error: a subcommand is required", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except DomainError as exc:
        print(f"bubblereduce: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BubbleReduceError as exc:
        print(f"bubblereduce: certificate failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CERT
    except NotImplementedError as exc:
        print(f"bubblereduce: unsupported configuration: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
