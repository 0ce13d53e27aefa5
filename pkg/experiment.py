"""Trial runner and the resumable CSV experiment harness."""

from __future__ import annotations

import csv
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Iterable, Sequence

from braid import is_identity
from instances import (
    RNG_ALGORITHM,
    VARIANTS,
    ExperimentParams,
    derive_seed,
    make_rng,
    random_conjugacy_instance,
    random_instance,
)
from solver import (
    BacktrackConfig,
    BeamConfig,
    HaltMode,
    SolveResult,
    solve,
    solve_conjugacy,
    solve_membership,
    solve_with_backtracking,
)

logger = logging.getLogger(__name__)


class ExperimentError(ValueError):
    """CSV schema mismatch or a corrupt row in an existing results file."""


@dataclass(frozen=True)
class TrialRecord:
    seed: int
    N: int
    m: int
    n: int
    k: int
    l: int
    M: int
    variant: str
    success: bool
    rank: int
    steps: int
    halt_reason: str
    multiplications: int
    length_evals: int
    wall_time_ms: float
    rng: str = RNG_ALGORITHM

    def key(self) -> tuple:
        return self.N, self.m, self.n, self.k, self.l, self.M, self.variant, self.seed

    def to_row(self) -> dict[str, str]:
        row = {f.name: str(getattr(self, f.name)) for f in fields(self)}
        row["success"] = "1" if self.success else "0"
        row["wall_time_ms"] = f"{self.wall_time_ms:.3f}"
        return row

    @classmethod
    def from_row(cls, row: dict) -> TrialRecord:
        if None in row or any(row.get(name) is None for name in CSV_FIELDS):
            raise ExperimentError(f"Row has the wrong number of fields: {row}")
        try:
            record = cls(
                seed=int(row["seed"]),
                N=int(row["N"]),
                m=int(row["m"]),
                n=int(row["n"]),
                k=int(row["k"]),
                l=int(row["l"]),
                M=int(row["M"]),
                variant=row["variant"],
                success={"1": True, "0": False}[row["success"]],
                rank=int(row["rank"]),
                steps=int(row["steps"]),
                halt_reason=row["halt_reason"],
                multiplications=int(row["multiplications"]),
                length_evals=int(row["length_evals"]),
                wall_time_ms=float(row["wall_time_ms"]),
                rng=row["rng"],
            )
        except (KeyError, ValueError) as e:
            raise ExperimentError(f"Malformed row {row}: {e}") from None
        if record.variant not in VARIANTS:
            raise ExperimentError(f"Unknown variant {record.variant!r}")
        if not 0 <= record.rank <= record.M or record.success != (record.rank >= 1):
            raise ExperimentError(f"Inconsistent rank/success in row {row}")
        return record


CSV_FIELDS = tuple(f.name for f in fields(TrialRecord))


@dataclass(frozen=True)
class TrialOptions:
    tau: float = 0.5
    patience: int = 1
    prune_inverse: bool = True
    backtrack: tuple[int, int] = (4, 8)
    max_backtracks: int = 3
    timing: bool = True


def trial_seed(master_seed: int, params: ExperimentParams, variant: str, trial: int) -> int:
    return derive_seed(master_seed, *params.cell, params.gen_len, variant, trial)


def _membership_rank(result: SolveResult) -> int:
    for pos, cand in enumerate(result.ranked, start=1):
        if all(is_identity(r) for r in cand.residuals):
            return pos
    return 0


def run_trial(params: ExperimentParams, variant: str, options: TrialOptions = TrialOptions()) -> TrialRecord:
    """Generate the instance for params.seed, solve it under the variant and record the outcome."""
    if variant not in VARIANTS:
        raise ExperimentError(f"Unknown variant {variant!r}, expected one of {VARIANTS}")
    rng = make_rng(params.seed)
    base = BeamConfig(M=params.M, max_steps=params.n, halt=HaltMode.FIXED_STEPS,
                      tau=options.tau, patience=options.patience,
                      prune_immediate_inverse=options.prune_inverse)
    started = time.perf_counter()
    if variant == "plain":
        system, truth = random_instance(params, rng)
        result = solve(system, base, truth)
    elif variant == "parametric":
        system, truth = random_instance(params, rng, prefix_letters=params.l)
        result = solve(system, replace(base, halt=HaltMode.PARAMETRIC, max_steps=2 * params.n), truth)
    elif variant == "conjugacy":
        system, truth = random_conjugacy_instance(params, rng)
        eq = system.equations[0]
        cfg = replace(base, two_sided=True, max_steps=2 * params.n)
        result = solve_conjugacy(eq.b, eq.prefix, system.generators, cfg, system.generator_words, truth)
    elif variant == "membership":
        params = replace(params, k=1, l=0)
        system, truth = random_instance(params, rng)
        result = solve_membership(system.equations[0].b, system.generators, base, system.generator_words, truth)
    else:
        lookback, multiplier = options.backtrack
        cfg = replace(base, backtrack=BacktrackConfig(lookback=lookback, multiplier=multiplier,
                                                      max_backtracks=options.max_backtracks))
        system, truth = random_instance(params, rng)
        result = solve_with_backtracking(system, cfg, truth)
    elapsed = (time.perf_counter() - started) * 1000 if options.timing else 0.0

    rank = _membership_rank(result) if variant == "membership" else (result.truth_rank or 0)
    return TrialRecord(
        seed=params.seed,
        N=params.N,
        m=params.m,
        n=params.n,
        k=params.k,
        l=params.l,
        M=params.M,
        variant=variant,
        success=rank >= 1,
        rank=rank,
        steps=result.halted_at_step,
        halt_reason=result.halt_reason,
        multiplications=result.multiplications,
        length_evals=result.length_evaluations,
        wall_time_ms=elapsed,
    )


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

def read_records(path: str | Path) -> list[TrialRecord]:
    """
    Parse a results file. A truncated final row (no line terminator, or too few fields)
    is dropped with a warning so the trial reruns; a bad row anywhere else is an error.
    """
    text = Path(path).read_text(encoding="utf-8")
    if not text:
        return []
    lines = text.splitlines(keepends=True)
    reader = csv.DictReader(lines)
    if tuple(reader.fieldnames or ()) != CSV_FIELDS:
        raise ExperimentError(f"{path}: header {reader.fieldnames} does not match {list(CSV_FIELDS)}")
    rows = list(reader)
    truncated_tail = len(lines) > 1 and not lines[-1].endswith("\n")
    records = []
    for i, row in enumerate(rows):
        last = i == len(rows) - 1
        if last and truncated_tail:
            logger.warning("%s: dropping truncated final row", path)
            break
        try:
            records.append(TrialRecord.from_row(row))
        except ExperimentError:
            if last and (None in row or any(v is None for v in row.values())):
                logger.warning("%s: dropping incomplete final row", path)
                break
            raise
    return records


def write_records(path: str | Path, records: Iterable[TrialRecord]) -> None:
    """Write records sorted by key, replacing the file atomically."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=CSV_FIELDS)
        writer.writeheader()
        for record in sorted(records, key=TrialRecord.key):
            writer.writerow(record.to_row())
    os.replace(tmp, path)


def plan_trials(cells: Sequence[ExperimentParams], variants: Sequence[str], trials: int,
                master_seed: int) -> list[tuple[ExperimentParams, str]]:
    plan = []
    for cell in cells:
        for variant in variants:
            for t in range(trials):
                plan.append((replace(cell, seed=trial_seed(master_seed, cell, variant, t)), variant))
    return plan


def _planned_key(params: ExperimentParams, variant: str) -> tuple:
    if variant == "membership":
        params = replace(params, k=1, l=0)
    return params.N, params.m, params.n, params.k, params.l, params.M, variant, params.seed


def run_experiment(cells: Sequence[ExperimentParams], variants: Sequence[str], trials: int, master_seed: int,
                   out_path: str | Path, threads: int = 1,
                   options: TrialOptions = TrialOptions()) -> list[TrialRecord]:
    """
    Run every (cell, variant, trial) not already in out_path. Rows are appended and
    flushed as trials finish, then the whole file is rewritten sorted by key.
    """
    out_path = Path(out_path)
    done: list[TrialRecord] = read_records(out_path) if out_path.exists() else []
    done_keys = {r.key() for r in done}
    todo = [(p, v) for p, v in plan_trials(cells, variants, trials, master_seed)
            if _planned_key(p, v) not in done_keys]
    logger.info("%d trials planned, %d already in %s", len(todo) + len(done), len(done), out_path)

    # drop any truncated tail before appending
    write_records(out_path, done)
    fresh: list[TrialRecord] = []
    with open(out_path, "a", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=CSV_FIELDS)

        def collect(record: TrialRecord) -> None:
            writer.writerow(record.to_row())
            f.flush()
            fresh.append(record)
            logger.debug("trial %s: success=%s rank=%d", record.key(), record.success, record.rank)

        if threads > 1 and len(todo) > 1:
            with ProcessPoolExecutor(max_workers=threads) as pool:
                futures = [pool.submit(run_trial, p, v, options) for p, v in todo]
                for future in as_completed(futures):
                    collect(future.result())
        else:
            for p, v in todo:
                collect(run_trial(p, v, options))

    records = sorted(done + fresh, key=TrialRecord.key)
    write_records(out_path, records)
    return records
