"""Command-line entry point: ``umdakit {run,sweep,fit,bound,verify}``.

Every subcommand accepts ``--config PATH`` pointing at a ``key = value`` file
whose keys are the long flag names (dashes or underscores); flags given on the
command line override the file. Exit status is 0 on success, 1 when a
verification battery finds a violation and 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

from umdakit import __version__
from umdakit.errors import InvalidInputError, InvalidParameterError, PreconditionError
from umdakit.fitness import FITNESS_NAMES, get_fitness
from umdakit.model import SCHEMA_VERSION, make_rng

OUT_ENV = "UMDAKIT_OUT"
EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _bounded(kind, lo=None, hi=None, lo_open=False, hi_open=False):
    """argparse type that converts with ``kind`` and range-checks the result."""

    def parse(text):
        try:
            value = kind(text)
        except ValueError:
            # accept "1e5" for integer flags
            try:
                f = float(text)
            except ValueError:
                f = math.nan
            if kind is not int or not f.is_integer():
                raise argparse.ArgumentTypeError(f"expected {kind.__name__}, got {text!r}") from None
            value = int(f)
        if lo is not None and (value < lo or (lo_open and value == lo)):
            raise argparse.ArgumentTypeError(f"{value} is below the allowed range")
        if hi is not None and (value > hi or (hi_open and value == hi)):
            raise argparse.ArgumentTypeError(f"{value} is above the allowed range")
        return value

    parse.__name__ = kind.__name__
    return parse


pos_int = _bounded(int, lo=1)
nonneg_int = _bounded(int, lo=0)
pos_float = _bounded(float, lo=0, lo_open=True)
unit_open = _bounded(float, lo=0, hi=1, lo_open=True, hi_open=True)


def read_config_file(path: str | Path) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidInputError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="umdakit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="single UMDA run, printed as JSON")
    p.add_argument("--config")
    p.add_argument("--n", type=pos_int, required=True)
    p.add_argument("--lambda", dest="lam", type=pos_int, required=True)
    p.add_argument("--mu", type=pos_int, required=True)
    p.add_argument("--margin", type=pos_float, required=True)
    p.add_argument("--fitness", choices=FITNESS_NAMES, default="onemax")
    p.add_argument("--seed", type=nonneg_int, default=0)
    p.add_argument("--max-generations", type=pos_int, default=10**5)
    p.add_argument("--trajectory", help="write a per-generation CSV here")

    p = sub.add_parser("sweep", help="replicated runs over problem sizes")
    p.add_argument("--config")
    p.add_argument("--out", default=os.environ.get(OUT_ENV, "."), help=f"output directory (default ${OUT_ENV} or .)")
    p.add_argument("--n-values", help="comma separated sizes")
    p.add_argument("--replicates", type=pos_int)
    p.add_argument("--lambda-rule")
    p.add_argument("--mu-rule")
    p.add_argument("--margin")
    p.add_argument("--fitness", choices=FITNESS_NAMES)
    p.add_argument("--master-seed", type=nonneg_int)
    p.add_argument("--max-generations", type=pos_int)
    p.add_argument("--jobs", type=pos_int, default=1)
    p.add_argument("--bootstrap", type=pos_int, default=100, help="bootstrap resamples for the CIs")

    p = sub.add_parser("fit", help="fit n log n, n^{3/2} and n^2 to a summary")
    p.add_argument("--config")
    p.add_argument("--summary", required=True)
    p.add_argument("--out", default=None, help="fits.json path (default next to the summary)")
    p.add_argument("--plot", help="SVG figure path")
    p.add_argument("--log-base", type=pos_float, default=math.e)

    p = sub.add_parser("bound", help="evaluate the population-size condition and the runtime bound")
    p.add_argument("--config")
    p.add_argument("--n", type=pos_int, required=True)
    p.add_argument("--lambda", dest="lam", type=pos_int, required=True)
    p.add_argument("--mu", type=pos_int, required=True)
    p.add_argument("--c", type=unit_open, required=True)
    p.add_argument("--delta", type=_bounded(float, lo=0, hi=1, lo_open=True))

    p = sub.add_parser("verify", help="inequality batteries")
    vsub = p.add_subparsers(dest="target", required=True)
    v = vsub.add_parser("pb", help="Poisson-Binomial inequalities")
    v.add_argument("--config")
    v.add_argument("--trials", type=pos_int, default=1000)
    v.add_argument("--n-max", type=pos_int, default=50)
    v.add_argument("--seed", type=nonneg_int, default=0)
    v = vsub.add_parser("levels", help="upgrade-probability checks on hypothesis instances")
    v.add_argument("--config")
    v.add_argument("--n", type=_bounded(int, lo=2), required=True)
    v.add_argument("--mu", type=pos_int)
    v.add_argument("--lambda", dest="lam", type=pos_int)
    v.add_argument("--c", type=unit_open, default=0.5)
    v.add_argument("--a", type=pos_float, default=1.0, help="constant in mu >= a ln n when mu is drawn")
    v.add_argument("--instances", type=pos_int, default=500)
    v.add_argument("--seed", type=nonneg_int, default=0)
    v.add_argument("--out", help="write the JSON records here instead of stdout")
    return parser


def _config_path(argv: list[str]) -> str | None:
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if tok.startswith("--config="):
            return tok.split("=", 1)[1]
    return None


def _subparser(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.ArgumentParser | None:
    positional = [t for t in argv if not t.startswith("-")]
    choices = parser._subparsers._group_actions[0].choices  # noqa: SLF001
    if not positional or positional[0] not in choices:
        return None
    sp = choices[positional[0]]
    if positional[0] == "verify":
        inner = sp._subparsers._group_actions[0].choices  # noqa: SLF001
        if len(positional) < 2 or positional[1] not in inner:
            return None
        sp = inner[positional[1]]
    return sp


def parse_args(argv: list[str] | None) -> argparse.Namespace:
    """Parse ``argv``, seeding defaults from the ``--config`` file when one is given."""
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    path = _config_path(argv)
    sp = _subparser(parser, argv) if path else None
    if sp is not None:
        try:
            values = read_config_file(path)
        except (OSError, InvalidInputError) as exc:
            parser.error(str(exc))
        values = {("lam" if k == "lambda" else k): v for k, v in values.items()}
        dests = {a.dest for a in sp._actions}  # noqa: SLF001
        unknown = sorted(set(values) - dests - {"config", "help"})
        if unknown:
            sp.error(f"unknown keys in {path}: {', '.join(unknown)}")
        for action in sp._actions:  # noqa: SLF001
            if action.dest in values:
                action.required = False
                if action.type is not None:
                    try:
                        values[action.dest] = action.type(values[action.dest])
                    except argparse.ArgumentTypeError as exc:
                        sp.error(f"{path}: {action.dest}: {exc}")
                if action.choices is not None and values[action.dest] not in action.choices:
                    sp.error(f"{path}: {action.dest}: invalid choice {values[action.dest]!r}")
        sp.set_defaults(**values)
    return parser.parse_args(argv)


def _emit(obj) -> None:
    sys.stdout.write(json.dumps(obj, indent=2) + "\n")


def cmd_run(args) -> int:
    from umdakit.umda import UmdaParams, run, write_trajectory

    params = UmdaParams(
        n=args.n,
        lam=args.lam,
        mu=args.mu,
        margin=args.margin,
        max_generations=args.max_generations,
        seed=args.seed,
    )
    f = get_fitness(args.fitness, args.n)
    if args.trajectory:
        record, rows = run(params, f, record_trajectory=True)
        write_trajectory(args.trajectory, rows)
    else:
        record = run(params, f)
    _emit({"schema_version": SCHEMA_VERSION, **record.to_dict()})
    return EXIT_OK


def cmd_sweep(args) -> int:
    from umdakit import experiments as ex

    keys = ("n_values", "replicates", "lambda_rule", "mu_rule", "margin", "fitness", "master_seed", "max_generations")
    values = {k: getattr(args, k) for k in keys if getattr(args, k) is not None}
    if "n_values" not in values:
        raise InvalidParameterError("sweep needs n_values (flag --n-values or config key)")
    config = ex.SweepConfig.from_mapping({k: str(v) for k, v in values.items()})
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = ex.run_sweep(config, jobs=args.jobs)
    summary = ex.summarize(rows, master_seed=config.master_seed, B=args.bootstrap)
    ex.write_runs_csv(out / "runs.csv", rows)
    ex.write_summary_csv(out / "summary.csv", summary)
    for r in summary.rows:
        sys.stdout.write(f"n={r.n} mean={r.mean:.1f} ci=[{r.ci_lo:.1f}, {r.ci_hi:.1f}] success={r.success_rate:.2f}\n")
    return EXIT_OK


def cmd_fit(args) -> int:
    from umdakit import experiments as ex

    summary = ex.read_summary_csv(args.summary)
    fits = ex.compare_models(summary, log_base=args.log_base)
    out = Path(args.out) if args.out else Path(args.summary).with_name("fits.json")
    ex.write_fits_json(out, fits)
    if args.plot:
        ex.plot_summary_svg(args.plot, summary, fits, args.log_base)
    sys.stdout.write(ex.format_fit_table(fits) + "\n")
    return EXIT_OK


def cmd_bound(args) -> int:
    from umdakit.levels import LevelParams, expected_time_bound, g3_min_lambda

    if args.mu > args.lam:
        raise InvalidParameterError("need mu <= lambda")
    if args.mu == args.lam:
        raise InvalidParameterError("need mu < lambda so that gamma0 = mu/lambda < 1")
    lp = LevelParams.for_umda(args.n, args.mu, args.lam, args.c, delta=args.delta)
    g3 = g3_min_lambda(lp.gamma0, lp.delta, lp.m, lp.z_star)
    bound = expected_time_bound(lp.z, lp.delta, args.lam)
    _emit(
        {
            "schema_version": SCHEMA_VERSION,
            "n": args.n,
            "lambda": args.lam,
            "mu": args.mu,
            "c": args.c,
            "gamma0": lp.gamma0,
            "delta": lp.delta,
            "m": lp.m,
            "z_star": lp.z_star,
            "g3_min_lambda": g3,
            "g3_satisfied": args.lam >= g3,
            "expected_time_bound": bound,
            "bound_over_n_lambda": bound / (args.n * args.lam),
        }
    )
    return EXIT_OK


def cmd_verify_pb(args) -> int:
    from umdakit.pbdist import pb_batteries

    results = pb_batteries(args.trials, args.n_max, make_rng(args.seed))
    report = {"schema_version": SCHEMA_VERSION, "trials": args.trials, "n_max": args.n_max, "seed": args.seed}
    ok = True
    for name, reps in results.items():
        bad = [r for r in reps if not r.satisfied]
        ok &= not bad
        margins = [r.bound - r.statistic if r.direction == "<=" else r.statistic - r.bound for r in reps]
        report[name] = {"instances": len(reps), "violations": len(bad), "smallest_margin": min(margins)}
    _emit(report)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_verify_levels(args) -> int:
    from umdakit.levels import check_upper_block, level_battery

    if (args.mu is None) != (args.lam is None):
        raise InvalidParameterError("give both --mu and --lambda, or neither")
    records = level_battery(
        args.n, args.instances, make_rng(args.seed), c=args.c, mu=args.mu, lam=args.lam, a=args.a
    )
    block = check_upper_block(args.n)
    payload = json.dumps(records, indent=1) + "\n"
    if args.out:
        Path(args.out).write_text(payload)
    else:
        sys.stdout.write(payload)
    bad = sum(not r["satisfied"] for r in records)
    status = "ok" if block.satisfied else "VIOLATED"
    sys.stderr.write(f"{len(records)} instances, {bad} violations; upper-block check {status}\n")
    return EXIT_OK if not bad and block.satisfied else EXIT_FAIL


def main(argv: list[str] | None = None) -> int:
    args = parse_args(argv)
    handlers = {
        "run": cmd_run,
        "sweep": cmd_sweep,
        "fit": cmd_fit,
        "bound": cmd_bound,
        "verify": lambda a: cmd_verify_pb(a) if a.target == "pb" else cmd_verify_levels(a),
    }
    try:
        return handlers[args.command](args)
    except (InvalidParameterError, InvalidInputError, PreconditionError) as exc:
        sys.stderr.write(f"umdakit {args.command}: error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
