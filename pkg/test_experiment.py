import csv
from dataclasses import replace

import pytest

from experiment import (
    CSV_FIELDS,
    ExperimentError,
    TrialOptions,
    TrialRecord,
    plan_trials,
    read_records,
    run_experiment,
    run_trial,
    trial_seed,
)
from instances import VARIANTS, ExperimentParams

TINY = ExperimentParams(N=4, m=2, n=2, k=1, l=2, M=4, gen_len=6, seed=99)
QUIET = TrialOptions(timing=False)


def sample_record(**changes) -> TrialRecord:
    record = TrialRecord(seed=7, N=8, m=2, n=16, k=1, l=4, M=16, variant="plain", success=True,
                         rank=3, steps=16, halt_reason="fixed_steps", multiplications=1200,
                         length_evals=1024, wall_time_ms=12.5)
    return replace(record, **changes)


class TestTrials:
    @pytest.mark.parametrize("variant", VARIANTS)
    def test_every_variant_runs(self, variant):
        record = run_trial(TINY, variant, QUIET)
        assert record.variant == variant
        assert record.seed == 99
        assert 0 <= record.rank <= TINY.M
        assert record.success == (record.rank >= 1)
        assert record.wall_time_ms == 0.0
        assert record.rng == "PCG64"

    def test_trials_are_deterministic(self):
        for variant in VARIANTS:
            assert run_trial(TINY, variant, QUIET) == run_trial(TINY, variant, QUIET)

    def test_plain_trial_runs_the_known_number_of_steps(self):
        record = run_trial(TINY, "plain", QUIET)
        assert record.halt_reason in ("fixed_steps", "identity_at_start")
        if record.halt_reason == "fixed_steps":
            assert record.steps == TINY.n
        assert record.multiplications <= 2 * TINY.k * TINY.m * TINY.n * TINY.M

    def test_membership_records_a_single_word(self):
        record = run_trial(TINY, "membership", QUIET)
        assert (record.k, record.l) == (1, 0)

    def test_unknown_variant(self):
        with pytest.raises(ExperimentError):
            run_trial(TINY, "sideways", QUIET)

    def test_seeds_differ_per_trial_and_variant(self):
        seeds = {trial_seed(2024, TINY, v, t) for v in VARIANTS for t in range(4)}
        assert len(seeds) == 4 * len(VARIANTS)
        assert trial_seed(2024, TINY, "plain", 0) == trial_seed(2024, TINY, "plain", 0)

    def test_plan_covers_every_combination(self):
        plan = plan_trials([TINY, replace(TINY, M=8)], ["plain", "membership"], 3, 1)
        assert len(plan) == 12
        assert len({(p.seed, v) for p, v in plan}) == 12


class TestRecords:
    def test_row_round_trip(self):
        record = sample_record()
        row = record.to_row()
        assert tuple(row) == CSV_FIELDS
        assert row["success"] == "1"
        assert row["wall_time_ms"] == "12.500"
        assert TrialRecord.from_row(row) == record

    @pytest.mark.parametrize("field,value", [
        ("success", "maybe"),
        ("rank", "x"),
        ("rank", "0"),
        ("rank", "17"),
        ("variant", "sideways"),
    ])
    def test_bad_rows(self, field, value):
        row = sample_record().to_row()
        row[field] = value
        with pytest.raises(ExperimentError):
            TrialRecord.from_row(row)


class TestHarness:
    def run(self, path, **kwargs):
        args = dict(cells=[TINY], variants=["plain"], trials=5, master_seed=3, out_path=path, options=QUIET)
        args.update(kwargs)
        return run_experiment(**args)

    def test_writes_one_row_per_trial(self, tmp_path):
        path = tmp_path / "results.csv"
        records = self.run(path)
        assert len(records) == 5
        with open(path, newline="") as f:
            rows = list(csv.DictReader(f))
        assert len(rows) == 5
        assert tuple(rows[0]) == CSV_FIELDS
        assert read_records(path) == records

    def test_rerun_is_byte_identical(self, tmp_path):
        path = tmp_path / "results.csv"
        self.run(path)
        first = path.read_bytes()
        self.run(path)
        assert path.read_bytes() == first

    def test_resume_after_truncated_row(self, tmp_path):
        path = tmp_path / "results.csv"
        self.run(path)
        full = path.read_text()
        lines = full.splitlines(keepends=True)
        path.write_text("".join(lines[:-1]) + lines[-1][: len(lines[-1]) // 2])
        assert len(read_records(path)) == 4
        self.run(path)
        assert path.read_text() == full

    def test_resume_after_missing_newline(self, tmp_path):
        path = tmp_path / "results.csv"
        self.run(path)
        full = path.read_text()
        path.write_text(full.rstrip("\r\n"))
        self.run(path)
        assert path.read_text() == full

    def test_growing_the_grid_keeps_old_rows(self, tmp_path):
        path = tmp_path / "results.csv"
        old = self.run(path, trials=2)
        new = self.run(path, trials=4)
        assert set(r.key() for r in old) <= set(r.key() for r in new)
        assert len(new) == 4

    def test_corrupt_middle_row(self, tmp_path):
        path = tmp_path / "results.csv"
        self.run(path)
        lines = path.read_text().splitlines(keepends=True)
        lines[2] = lines[2].rstrip("\n") + ",oops\n"
        path.write_text("".join(lines))
        with pytest.raises(ExperimentError):
            self.run(path)

    def test_header_mismatch(self, tmp_path):
        path = tmp_path / "results.csv"
        path.write_text("seed,N\n1,8\n")
        with pytest.raises(ExperimentError):
            self.run(path)

    def test_worker_pool_matches_serial_run(self, tmp_path):
        serial = tmp_path / "serial.csv"
        pooled = tmp_path / "pooled.csv"
        self.run(serial, variants=["plain", "membership"])
        self.run(pooled, variants=["plain", "membership"], threads=2)
        assert serial.read_bytes() == pooled.read_bytes()


def run_cell(params: ExperimentParams, variant: str, seeds: int) -> list[TrialRecord]:
    return [run_trial(replace(params, seed=trial_seed(2024, params, variant, t)), variant, QUIET)
            for t in range(seeds)]


def success_rate(records: list[TrialRecord]) -> float:
    return sum(r.success for r in records) / len(records)


@pytest.mark.slow
class TestDeskScale:
    SMALL = ExperimentParams(N=8, m=2, n=16, k=1, l=4, M=16)
    LARGE = ExperimentParams(N=8, m=8, n=32, k=1, l=4, M=32)

    @pytest.fixture(scope="class")
    def cells(self):
        return run_cell(self.SMALL, "plain", 50), run_cell(self.LARGE, "plain", 50)

    def test_small_cell_almost_always_succeeds(self, cells):
        assert success_rate(cells[0]) >= 0.90

    def test_large_cell_matches_the_model(self, cells):
        assert 0.50 <= success_rate(cells[1]) <= 0.88

    def test_truth_usually_ranks_first(self, cells):
        hits = [r for r in cells[0] + cells[1] if r.success]
        assert sum(r.rank == 1 for r in hits) / len(hits) >= 0.60

    def test_membership(self):
        records = run_cell(ExperimentParams(N=8, m=4, n=16, k=1, l=0, M=256), "membership", 50)
        assert success_rate(records) >= 0.90

    def test_success_shrinks_slowly_with_strands(self):
        rates = [success_rate(run_cell(ExperimentParams(N=N, m=2, n=16, k=8, l=8, M=2), "plain", 30))
                 for N in (8, 16, 32, 64)]
        rises = [b - a for a, b in zip(rates, rates[1:]) if b > a]
        assert len(rises) <= 1 and all(r <= 0.1 for r in rises)
        assert rates[-1] > 0
