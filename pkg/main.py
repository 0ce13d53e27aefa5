import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from config import Config
from braid import normal_form, parse_word
from experiment import TrialOptions, read_records, run_experiment
from instances import VARIANTS, load_grid, load_instance, n_sweep_grid, parameter_grid
from lengths import LENGTH_KINDS, length_of_word
from plots import memory_chart, predicted_memory_chart, sweep_chart, trace_chart
from solver import (
    BacktrackConfig,
    BeamConfig,
    HaltMode,
    format_letters,
    result_to_dict,
    solve,
    solve_conjugacy,
    solve_membership,
    solve_with_backtracking,
)
from stats import (
    PUBLISHED_MODEL,
    fit_logistic,
    memory_doubling_factor,
    memory_for_probability,
    model_from_dict,
    model_to_dict,
    predict_success,
    required_memory,
    rows_from_records,
    success_fractions,
    summary,
)

logger = logging.getLogger("braidsolve")

EXIT_OK, EXIT_NOT_FOUND, EXIT_INPUT = 0, 1, 2


def backtrack_pair(text):
    try:
        lookback, multiplier = (int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected B,g (two integers), got {text!r}") from None
    if lookback < 0 or multiplier < 1:
        raise argparse.ArgumentTypeError(f"B must be >= 0 and g >= 1, got {text!r}")
    return lookback, multiplier


# ---------------------------------------------------------------------------
# Solving
# ---------------------------------------------------------------------------

def beam_config(args, truth):
    steps = args.steps if args.steps is not None else (len(truth) if truth is not None else None)
    if args.halt:
        halt = HaltMode(args.halt)
    else:
        halt = HaltMode.FIXED_STEPS if steps is not None else HaltMode.SCORE_SUM_RISES
    backtrack = None
    if args.backtrack:
        backtrack = BacktrackConfig(lookback=args.backtrack[0], multiplier=args.backtrack[1],
                                    max_backtracks=Config.MAX_BACKTRACKS)
    return BeamConfig(
        M=args.M,
        max_steps=steps,
        halt=halt,
        tau=args.tau,
        patience=args.patience,
        prune_immediate_inverse=args.prune_inverse,
        backtrack=backtrack,
        workers=args.threads,
    )


def report(result, args, label):
    if result.found:
        print(f"✅ {label}: halted at step {result.halted_at_step} ({result.halt_reason})")
    else:
        print(f"❌ {label}: nothing found, halted at step {result.halted_at_step} ({result.halt_reason})")
    if result.presentation is not None:
        print(f"   presentation: {format_letters(result.presentation) or '(empty)'}")
    if result.truth_rank is not None:
        print(f"   truth rank: {result.truth_rank or 'absent'}")
    listing = result.ranked_by_parameter or result.ranked
    for pos, cand in enumerate(listing[:5], start=1):
        print(f"   #{pos} score {cand.score}: {format_letters(cand.letters) or '(empty)'}")
    print(f"📊 {result.multiplications} multiplications, {result.length_evaluations} length evaluations"
          + (f", {result.backtracks} backtracks" if result.backtracks else ""))
    if args.out:
        Path(args.out).write_text(json.dumps(result_to_dict(result), indent=2) + "\n", encoding="utf-8")
        print(f"✅ Result written to {args.out}")
    return EXIT_OK if result.found else EXIT_NOT_FOUND


def cmd_solve(args):
    inst = load_instance(args.instance)
    cfg = beam_config(args, inst.truth)
    if cfg.backtrack is not None:
        result = solve_with_backtracking(inst.system, cfg, inst.truth)
    else:
        result = solve(inst.system, cfg, inst.truth)
    return report(result, args, "solve")


def cmd_conjugacy(args):
    inst = load_instance(args.instance)
    system = inst.system
    eq = system.equations[0]
    cfg = replace(beam_config(args, inst.truth), two_sided=not args.one_sided)
    if eq.prefix is not None and cfg.two_sided and args.steps is None:
        cfg = replace(cfg, max_steps=None)
    result = solve_conjugacy(eq.b, eq.prefix, system.generators, cfg, system.generator_words, inst.truth)
    return report(result, args, "conjugacy")


def cmd_membership(args):
    inst = load_instance(args.instance)
    system = inst.system
    cfg = beam_config(args, inst.truth)
    result = solve_membership(system.equations[0].b, system.generators, cfg, system.generator_words, inst.truth)
    return report(result, args, "membership")


# ---------------------------------------------------------------------------
# Experiments and statistics
# ---------------------------------------------------------------------------

def cmd_experiment(args):
    if args.sweep:
        cells, variants, grid_trials = n_sweep_grid(), ("plain",), None
    elif args.grid:
        grid = load_grid(args.grid)
        cells, variants, grid_trials = grid.cells, grid.variants, grid.trials
    else:
        cells, variants, grid_trials = parameter_grid(), ("plain",), None
    trials = args.trials or grid_trials or Config.TRIALS
    options = TrialOptions(
        tau=args.tau,
        patience=args.patience,
        prune_inverse=args.prune_inverse,
        backtrack=args.backtrack or (4, 8),
        max_backtracks=Config.MAX_BACKTRACKS,
        timing=not args.no_timing,
    )
    print(f"🚀 Running {len(cells)} cells x {len(variants)} variants x {trials} trials "
          f"with {args.threads} worker(s)")
    records = run_experiment(cells, variants, trials, args.seed, args.out, args.threads, options)
    for (N, m, n, k, l, M, variant), (hits, total) in success_fractions(records).items():
        print(f"📊 N={N} m={m} n={n} k={k} l={l} M={M} {variant}: {hits}/{total} = {hits / total:.2f}")
    print(f"✅ {len(records)} rows in {args.out}")
    return EXIT_OK


def cmd_fit(args):
    records = [r for r in read_records(args.csv) if r.variant == args.variant]
    model = fit_logistic(rows_from_records(records))
    print(f"📊 Logistic fit over {len(records)} {args.variant} trials")
    print(summary(model))
    if args.out:
        Path(args.out).write_text(json.dumps(model_to_dict(model), indent=2) + "\n", encoding="utf-8")
        print(f"✅ Model written to {args.out}")
    return EXIT_OK


def load_model(path):
    if path is None:
        return PUBLISHED_MODEL
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def cmd_predict(args):
    model = load_model(args.model)
    params = (args.m, args.n, args.k, args.l, args.M)
    p = predict_success(model, params)
    print(f"📊 p = {p:.3f}")
    if model is PUBLISHED_MODEL:
        print(f"   required M for even odds: {required_memory(args.m, args.n, args.k):.2f}")
    else:
        print(f"   required M for even odds: {memory_for_probability(model, args.m, args.n, args.k, args.l):.2f}")
    print(f"   doubling m multiplies M by {memory_doubling_factor(model):.2f}")
    return EXIT_OK


def cmd_plot(args):
    if args.kind == "memory":
        if args.model is not None:
            svg = predicted_memory_chart(load_model(None if args.model == "published" else args.model))
        elif args.input:
            svg = memory_chart(read_records(args.input))
        else:
            raise ValueError("memory plot needs a results CSV or --model")
    elif args.kind == "trace":
        if not args.input:
            raise ValueError("trace plot needs a solve result JSON")
        svg = trace_chart(json.loads(Path(args.input).read_text(encoding="utf-8")))
    else:
        if not args.input:
            raise ValueError("sweep plot needs a results CSV")
        svg = sweep_chart(read_records(args.input))
    Path(args.out).write_text(svg, encoding="utf-8")
    print(f"✅ {args.kind} plot written to {args.out}")
    return EXIT_OK


def cmd_len(args):
    word = parse_word(" ".join(args.word), args.N)
    print(length_of_word(word, args.kind))
    return EXIT_OK


def cmd_nf(args):
    nf = normal_form(parse_word(" ".join(args.word), args.N))
    print(nf)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(prog="braidsolve", description="Length-based equation solving in braid groups")
    parser.add_argument("--verbose", "-v", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def beam_flags(p):
        p.add_argument("instance", help="instance JSON file")
        p.add_argument("--M", type=int, default=16, help="beam width")
        p.add_argument("--steps", type=int, help="known n (defaults to the truth length when present)")
        p.add_argument("--halt", choices=[h.value for h in HaltMode])
        p.add_argument("--tau", type=float, default=Config.TAU)
        p.add_argument("--patience", type=int, default=1)
        p.add_argument("--prune-inverse", action="store_true")
        p.add_argument("--backtrack", type=backtrack_pair, metavar="B,g")
        p.add_argument("--out", help="write the result JSON here")
        p.add_argument("--threads", type=int, default=Config.THREADS, help="expansion worker threads")

    p = sub.add_parser("solve", help="solve X·W_i = b_i")
    beam_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("conjugacy", help="find X with b = X P X^-1")
    beam_flags(p)
    p.add_argument("--one-sided", action="store_true", help="peel from the left only")
    p.set_defaults(func=cmd_conjugacy)

    p = sub.add_parser("membership", help="express g over the subgroup generators")
    beam_flags(p)
    p.set_defaults(func=cmd_membership)

    p = sub.add_parser("experiment", help="run a parameter grid into a CSV")
    p.add_argument("--grid", help="grid JSON file (default: the full 648-cell grid)")
    p.add_argument("--sweep", action="store_true", help="run the strand-count sweep")
    p.add_argument("--seed", type=int, default=Config.MASTER_SEED, help="master seed")
    p.add_argument("--threads", type=int, default=Config.THREADS, help="worker processes")
    p.add_argument("--trials", type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--tau", type=float, default=Config.TAU)
    p.add_argument("--patience", type=int, default=1)
    p.add_argument("--prune-inverse", action=argparse.BooleanOptionalAction, default=True,
                   help="skip a_j^s a_j^-s steps (instances are freely reduced)")
    p.add_argument("--backtrack", type=backtrack_pair, metavar="B,g")
    p.add_argument("--no-timing", action="store_true", help="write wall_time_ms = 0")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("fit", help="fit the logistic model to a results CSV")
    p.add_argument("csv")
    p.add_argument("--variant", choices=VARIANTS, default="plain", help="rows to fit (default: plain)")
    p.add_argument("--out", help="write the fitted model JSON here")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="predicted success for (m, n, k, l, M)")
    for name in ("m", "n", "k", "l", "M"):
        p.add_argument(name, type=int)
    p.add_argument("--model", help="fitted model JSON (default: the published model)")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("plot", help="SVG figures")
    p.add_argument("kind", choices=("memory", "trace", "sweep"))
    p.add_argument("input", nargs="?", help="results CSV or solve result JSON")
    p.add_argument("--model", nargs="?", const="published", help="plot predicted curves (optionally from a model file)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("len", help="length of an Artin word")
    p.add_argument("word", nargs="*")
    p.add_argument("--N", type=int, default=8)
    p.add_argument("--kind", choices=LENGTH_KINDS, default="rg")
    p.set_defaults(func=cmd_len)

    p = sub.add_parser("nf", help="normal form of an Artin word")
    p.add_argument("word", nargs="*")
    p.add_argument("--N", type=int, default=8)
    p.set_defaults(func=cmd_nf)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose else getattr(logging, Config.LOG_LEVEL, logging.WARNING)
    logging.basicConfig(level=level if isinstance(level, int) else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError) as e:
        logger.debug("command failed", exc_info=True)
        print(f"❌ {e}")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
