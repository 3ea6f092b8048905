"""Command-line entry point: ``corr-rr {synth,ingest,run,pyopt,check-ldp}``."""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .core import CorrRRError, metadata_path, save_dataset
from .grr import ldp_ratio
from .harness import ExperimentConfig, run_experiment, run_metadata, write_results
from .ingest import get_recipe, ingest_file
from .mechanisms import mechanism_channel
from .pyopt import PairContext, avg_mse, optimal_py, closed_form_py
from .synth import SynthSpec, gen_synthetic, measure_correlation, synth_metadata


def _floats(text: str) -> list[float]:
    parts = text.replace(",", " ").split()
    if not parts:
        raise argparse.ArgumentTypeError("expected a list of numbers")
    return [float(p) for p in parts]


def cmd_synth(args) -> int:
    spec = SynthSpec(n=args.n, d=args.d, k=args.k, rho=args.rho, seed=args.seed)
    dataset = gen_synthetic(spec)
    save_dataset(dataset, args.out, synth_metadata(spec, dataset))
    print(f"wrote {dataset.n} records (d={dataset.d}, k={spec.k}) to {args.out}")
    return 0


def cmd_ingest(args) -> int:
    recipe = get_recipe(args.recipe)
    dataset, meta = ingest_file(args.input, recipe)
    meta["correlation"] = np.round(measure_correlation(dataset), 6).tolist() if dataset.n > 1 else None
    save_dataset(dataset, args.out, meta)
    a = meta["achieved"]
    print(f"wrote {a['n']} records (d={a['d']}, k={a['k']}) to {args.out}")
    return 0


def cmd_run(args) -> int:
    config = ExperimentConfig.from_json(args.config)
    if args.seed is not None:
        config.seed = args.seed
    if args.no_timing:
        config.timing = False
    if args.repetitions is not None:
        config.repetitions = args.repetitions
    rows = run_experiment(config, workers=args.workers)
    write_results(rows, args.out)
    meta = run_metadata(config)
    metadata_path(args.out).write_text(json.dumps(meta, indent=2) + "\n")
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def cmd_pyopt(args) -> int:
    ctx = PairContext.from_epsilon(np.array(args.fa), np.array(args.fb), args.epsilon, args.n_prime,
                                   exact_kary=not args.binary_terms)
    p = optimal_py(ctx)
    print(f"p_y* = {p:.6f}")
    for label, value in (("0", 0.0), ("p_y*", p), ("1", 1.0)):
        print(f"avg_mse({label}) = {avg_mse(ctx, value):.6e}")
    print(f"closed-form ratio (comparison only) = {closed_form_py(ctx):.6f}")
    return 0


def cmd_check_ldp(args) -> int:
    py = None
    if args.py is not None:
        py = np.full((args.d, args.d), args.py)
        np.fill_diagonal(py, 1.0)
    prior = None
    if args.prior is not None:
        row = np.asarray(args.prior, dtype=float)
        prior = [row] * args.d
    channel = mechanism_channel(args.mechanism.upper(), args.epsilon, args.d, args.k, py_model=py, prior=prior)
    ratio = ldp_ratio(channel)
    bound = math.exp(args.epsilon)
    ok = ratio <= bound + 1e-9
    print(f"ldp_ratio = {ratio:.12g}  e^eps = {bound:.12g}  {'PASS' if ok else 'FAIL'}")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="corr-rr", description="Correlated multi-attribute LDP simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a correlated synthetic dataset")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", help="preprocess a raw categorical file")
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--recipe", required=True, help="clave, nursery, mushroom, or a recipe JSON path")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("run", help="run an experiment grid from a JSON config")
    p.add_argument("--config", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--seed", type=int, default=None, help="override the config's master seed")
    p.add_argument("--repetitions", type=int, default=None)
    p.add_argument("--no-timing", action="store_true", help="write wall_ms as 0 for byte-stable output")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("pyopt", help="optimal copy probability for one attribute pair")
    p.add_argument("--fa", type=_floats, required=True, help="marginal of attribute a, e.g. '0.3,0.7'")
    p.add_argument("--fb", type=_floats, required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--n-prime", type=float, required=True, help="number of Phase-II users")
    p.add_argument("--binary-terms", action="store_true", help="use the binary-form bias terms for every k")
    p.set_defaults(func=cmd_pyopt)

    p = sub.add_parser("check-ldp", help="enumerate a mechanism's channel and check the e^eps bound")
    p.add_argument("--mechanism", required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--py", type=float, default=None, help="copy probability used for every pair")
    p.add_argument("--prior", type=_floats, default=None, help="fake-value prior shared by all attributes")
    p.set_defaults(func=cmd_check_ldp)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CorrRRError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
