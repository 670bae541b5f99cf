"""Replicated OneMax sweep followed by the growth-model comparison.

    python3 scripts/run_experiment.py --scale desk --margin mu/n --jobs 4 --out results/desk
    python3 scripts/run_experiment.py --scale full --jobs 16 --out results/full

``desk`` uses n in {100, 200, 400, 800, 1600}; ``full`` uses n = 100, 200, ..., 10000.
Both use 100 runs per size, lambda = ceil(sqrt n), mu = ceil(ln n). With the
default margin 0.5 the marginals cannot get closer than 0.5/mu to 1, and at these
sizes runs hit the generation cap; ``--margin mu/n`` puts the borders at 1/n.
"""

import argparse
import json
import math
import time
from pathlib import Path

from umdakit import experiments as ex

SCALES = {
    "desk": (100, 200, 400, 800, 1600),
    "full": tuple(range(100, 10001, 100)),
}


def main():
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--scale", choices=SCALES, default="desk")
    parser.add_argument("--margin", default="0.5", help="rule for the margin, e.g. 0.5 or mu/n")
    parser.add_argument("--replicates", type=int, default=100)
    parser.add_argument("--max-generations", type=int, default=10**5)
    parser.add_argument("--master-seed", type=int, default=0)
    parser.add_argument("--jobs", type=int, default=1)
    parser.add_argument("--log-base", type=float, default=math.e)
    parser.add_argument("--out", default="results")
    args = parser.parse_args()

    config = ex.SweepConfig(
        n_values=SCALES[args.scale],
        replicates=args.replicates,
        margin=args.margin,
        master_seed=args.master_seed,
        max_generations=args.max_generations,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    rows = ex.run_sweep(config, jobs=args.jobs)
    summary = ex.summarize(rows, master_seed=config.master_seed)
    ex.write_runs_csv(out / "runs.csv", rows)
    ex.write_summary_csv(out / "summary.csv", summary)
    for r in summary.rows:
        print(f"n={r.n:<6d} mean={r.mean:12.1f} ci=[{r.ci_lo:.1f}, {r.ci_hi:.1f}] success={r.success_rate:.2f}")
    print(f"{len(rows)} runs in {time.perf_counter() - start:.0f}s")

    if any(math.isnan(m) for m in summary.means):
        print("some sizes had no successful run; skipping the model comparison")
        return
    fits = ex.compare_models(summary, log_base=args.log_base)
    ex.write_fits_json(out / "fits.json", fits)
    ex.plot_summary_svg(out / "summary.svg", summary, fits, args.log_base)
    print(ex.format_fit_table(fits))
    print("reference: 2.806 * n log n 0.9994, 0.287 * n^{3/2} 0.9900, 0.003 * n^2 0.9689")
    (out / "config.json").write_text(json.dumps({**vars(args), "n_values": list(config.n_values)}, indent=2) + "\n")


if __name__ == "__main__":
    main()
