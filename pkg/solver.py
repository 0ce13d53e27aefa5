"""
Memory-M length-based solver for systems X·W_i = b_i, where X is an unknown product of
the subgroup generators a_1 … a_m of B_N.

A candidate is a peel sequence ((j_1,σ_1), …, (j_s,σ_s)); its residuals are
a_{j_s}^-σ_s ⋯ a_{j_1}^-σ_1 · b_i and its score is the sum of their reduced Garside
lengths. The sequence is also the multiplication order of the candidate
X = a_{j_1}^σ_1 ⋯ a_{j_s}^σ_s. Each step expands every stored candidate by all 2m letters
and keeps the M least-scored, ties broken lexicographically on the letters.
"""

from __future__ import annotations

import heapq
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Sequence

from braid import (
    BraidWord,
    GarsideNormalForm,
    gnf_inverse,
    gnf_multiply,
    identity,
    is_identity,
    normal_form,
)
from lengths import rg_length

logger = logging.getLogger(__name__)

Letter = tuple[int, int]


class SolverConfigError(ValueError):
    """Inconsistent BeamConfig or a system that does not fit the requested mode."""


class HaltMode(str, Enum):
    FIXED_STEPS = "fixed_steps"
    SCORE_SUM_RISES = "score_sum_rises"
    PARAMETRIC = "parametric"


# ---------------------------------------------------------------------------
# Data types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Equation:
    b: GarsideNormalForm
    prefix: GarsideNormalForm | None = None
    b_word: BraidWord | None = None
    prefix_word: BraidWord | None = None
    w_hint: BraidWord | None = None


@dataclass(frozen=True)
class EquationSystem:
    strands: int
    generators: tuple[GarsideNormalForm, ...]
    equations: tuple[Equation, ...]
    generator_words: tuple[BraidWord, ...] = ()

    def __post_init__(self):
        if not self.generators:
            raise SolverConfigError("An equation system needs at least one generator")
        if not self.equations:
            raise SolverConfigError("An equation system needs at least one equation")
        if self.generator_words and len(self.generator_words) != len(self.generators):
            raise SolverConfigError("generator_words must match generators one to one")
        elements = list(self.generators)
        for eq in self.equations:
            elements.append(eq.b)
            if eq.prefix is not None:
                elements.append(eq.prefix)
        for u in elements:
            if u.strands != self.strands:
                raise SolverConfigError(f"Element in B_{u.strands} inside a B_{self.strands} system")

    @property
    def m(self) -> int:
        return len(self.generators)

    @property
    def k(self) -> int:
        return len(self.equations)

    @property
    def has_prefixes(self) -> bool:
        return all(eq.prefix is not None for eq in self.equations)

    @classmethod
    def from_words(cls, generator_words: Sequence[BraidWord], b_words: Sequence[BraidWord],
                   prefix_words: Sequence[BraidWord | None] | None = None) -> EquationSystem:
        if not generator_words:
            raise SolverConfigError("An equation system needs at least one generator")
        strands = generator_words[0].strands
        prefix_words = prefix_words or [None] * len(b_words)
        equations = tuple(
            Equation(
                b=normal_form(b),
                prefix=normal_form(p) if p is not None else None,
                b_word=b,
                prefix_word=p,
            )
            for b, p in zip(b_words, prefix_words)
        )
        return cls(
            strands=strands,
            generators=tuple(normal_form(w) for w in generator_words),
            equations=equations,
            generator_words=tuple(generator_words),
        )


@dataclass(frozen=True)
class Candidate:
    letters: tuple[Letter, ...]
    residuals: tuple[GarsideNormalForm, ...]
    score: int

    def sort_key(self) -> tuple[int, tuple[Letter, ...]]:
        return self.score, self.letters


@dataclass(frozen=True)
class BacktrackConfig:
    lookback: int = 4
    multiplier: int = 8
    window: int = 4
    epsilon: float = 0.01
    max_backtracks: int = 3


@dataclass(frozen=True)
class BeamConfig:
    M: int = 16
    max_steps: int | None = None
    halt: HaltMode = HaltMode.FIXED_STEPS
    tau: float = 0.5
    patience: int = 1
    two_sided: bool = False
    prune_immediate_inverse: bool = False
    backtrack: BacktrackConfig | None = None
    reuse_residuals: bool = True
    step_limit: int = 512
    workers: int = 1

    def validate(self, system: EquationSystem | None = None) -> None:
        if self.M < 1:
            raise SolverConfigError(f"Beam width M must be >= 1, got {self.M}")
        if self.patience < 1:
            raise SolverConfigError(f"patience must be >= 1, got {self.patience}")
        if self.step_limit < 1 or self.workers < 1:
            raise SolverConfigError("step_limit and workers must be >= 1")
        if self.max_steps is not None and self.max_steps < 0:
            raise SolverConfigError(f"max_steps must be >= 0, got {self.max_steps}")
        if self.halt == HaltMode.FIXED_STEPS and self.max_steps is None:
            raise SolverConfigError("fixed_steps halting needs max_steps (the known n)")
        if self.halt == HaltMode.PARAMETRIC:
            if self.tau <= 0:
                raise SolverConfigError(f"tau must be positive, got {self.tau}")
            if system is not None and not system.has_prefixes:
                raise SolverConfigError("parametric halting needs a known prefix P_i on every equation")
        bt = self.backtrack
        if bt is not None:
            if bt.lookback < 0 or bt.multiplier < 1 or bt.window < 1 or bt.epsilon < 0 or bt.max_backtracks < 0:
                raise SolverConfigError(f"Invalid backtrack settings {bt}")


@dataclass(frozen=True)
class StepTrace:
    step: int
    scores: tuple[int, ...]
    mean_score: float
    truth_rank: int | None = None


@dataclass
class SolveResult:
    ranked: tuple[Candidate, ...]
    halted_at_step: int
    halt_reason: str
    trace: list[StepTrace] = field(default_factory=list)
    multiplications: int = 0
    length_evaluations: int = 0
    truth_rank: int | None = None
    ranked_by_parameter: tuple[Candidate, ...] = ()
    presentation: tuple[Letter, ...] | None = None
    backtracks: int = 0
    found: bool = False

    @property
    def op_counts(self) -> tuple[int, int]:
        return self.multiplications, self.length_evaluations


# ---------------------------------------------------------------------------
# Peeling
# ---------------------------------------------------------------------------

class _Peeler:
    """Precomputed generator tables plus the per-step expansion of one candidate."""

    def __init__(self, system: EquationSystem, cfg: BeamConfig):
        self.system = system
        self.cfg = cfg
        self.gens = system.generators
        self.inverses = tuple(gnf_inverse(g) for g in system.generators)
        self.bases = tuple(eq.b for eq in system.equations)
        self.prefix_inverses = (
            tuple(gnf_inverse(eq.prefix) for eq in system.equations) if system.has_prefixes else None
        )
        self.letters = [(j, sigma) for j in range(1, system.m + 1) for sigma in (1, -1)]
        for j, word in enumerate(system.generator_words, start=1):
            length = rg_length(system.generators[j - 1])
            if 2 * length < len(word):
                logger.warning(
                    "Generator a_%d collapses from %d letters to length %d; "
                    "length monotonicity may fail for this subgroup", j, len(word), length)

    def peel(self, residual: GarsideNormalForm, letter: Letter) -> tuple[GarsideNormalForm, int]:
        j, sigma = letter
        left = self.inverses[j - 1] if sigma > 0 else self.gens[j - 1]
        peeled = gnf_multiply(left, residual)
        if not self.cfg.two_sided:
            return peeled, 1
        right = self.gens[j - 1] if sigma > 0 else self.inverses[j - 1]
        return gnf_multiply(peeled, right), 2

    def replay(self, letters: Sequence[Letter]) -> tuple[tuple[GarsideNormalForm, ...], int]:
        residuals = list(self.bases)
        mults = 0
        for letter in letters:
            for i, r in enumerate(residuals):
                residuals[i], used = self.peel(r, letter)
                mults += used
        return tuple(residuals), mults

    def expand(self, cand: Candidate) -> tuple[list[Candidate], int, int]:
        mults = evals = 0
        if self.cfg.reuse_residuals:
            base = cand.residuals
        else:
            base, mults = self.replay(cand.letters)
        last = cand.letters[-1] if cand.letters else None
        out = []
        for letter in self.letters:
            if self.cfg.prune_immediate_inverse and last is not None and letter == (last[0], -last[1]):
                continue
            residuals = []
            score = 0
            for r in base:
                peeled, used = self.peel(r, letter)
                mults += used
                residuals.append(peeled)
                score += rg_length(peeled)
                evals += 1
            out.append(Candidate(cand.letters + (letter,), tuple(residuals), score))
        return out, mults, evals

    def parametric_sums(self, cand: Candidate) -> tuple[int, int]:
        """(Σ ℓ(P_i^-1 W_i), Σ ℓ(W_i)) with W_i the candidate's residuals."""
        if self.prefix_inverses is None:
            raise SolverConfigError("parametric test needs a known prefix P_i on every equation")
        peeled = sum(rg_length(gnf_multiply(p, w)) for p, w in zip(self.prefix_inverses, cand.residuals))
        return peeled, cand.score


def _initial_candidate(system: EquationSystem) -> Candidate:
    residuals = tuple(eq.b for eq in system.equations)
    return Candidate((), residuals, sum(rg_length(r) for r in residuals))


def beam_step(beam: Sequence[Candidate], system: EquationSystem, cfg: BeamConfig,
              width: int | None = None, peeler: _Peeler | None = None,
              executor: ThreadPoolExecutor | None = None) -> list[Candidate]:
    """One step of the scheme: expand every candidate by all 2m letters, keep the best."""
    selected, _, _ = _beam_step(beam, peeler or _Peeler(system, cfg), width or cfg.M, executor)
    return selected


def _beam_step(beam, peeler, width, executor=None):
    if executor is not None:
        expansions = list(executor.map(peeler.expand, beam))
    else:
        expansions = [peeler.expand(c) for c in beam]
    pool = []
    mults = evals = 0
    for cands, used, scored in expansions:
        pool.extend(cands)
        mults += used
        evals += scored
    return heapq.nsmallest(width, pool, key=Candidate.sort_key), mults, evals


# ---------------------------------------------------------------------------
# Halting helpers
# ---------------------------------------------------------------------------

def parametric_halt_test(cand: Candidate, system: EquationSystem, tau: float) -> bool:
    """True iff Σ ℓ_RG(P_i^-1 W_i) ≤ τ · Σ ℓ_RG(W_i), W_i being the candidate's residuals."""
    if not system.has_prefixes:
        raise SolverConfigError("parametric test needs a known prefix P_i on every equation")
    peeled = sum(
        rg_length(gnf_multiply(gnf_inverse(eq.prefix), w))
        for eq, w in zip(system.equations, cand.residuals)
    )
    return peeled <= tau * sum(rg_length(w) for w in cand.residuals)


def detect_failure(trace: Sequence[StepTrace], window: int, epsilon: float) -> bool:
    """
    True iff the mean beam score did not drop by at least epsilon (relative) across
    the last `window` steps of the trace.
    """
    if window < 1 or len(trace) < window:
        return False
    first = trace[-window].mean_score
    last = trace[-1].mean_score
    if first <= 0:
        return False
    return (first - last) / first < epsilon


def lookback_step(step: int, lookback: int) -> int:
    return max(0, step - lookback)


def _rank_of(beam: Sequence[Candidate], residuals: tuple[GarsideNormalForm, ...]) -> int:
    for pos, cand in enumerate(beam, start=1):
        if cand.residuals == residuals:
            return pos
    return 0


# ---------------------------------------------------------------------------
# Solvers
# ---------------------------------------------------------------------------

def _run(system: EquationSystem, cfg: BeamConfig, truth: Sequence[Letter] | None,
         membership: bool = False, backtracking: bool = False) -> SolveResult:
    cfg.validate(system)
    peeler = _Peeler(system, cfg)
    parametric = cfg.halt == HaltMode.PARAMETRIC

    truth_residuals: list[tuple[GarsideNormalForm, ...]] = []
    if truth is not None:
        truth = tuple((int(j), int(s)) for j, s in truth)
        for j, _ in truth:
            if not 1 <= j <= system.m:
                raise SolverConfigError(f"Truth letter refers to a_{j}, system has m={system.m}")
        current = tuple(eq.b for eq in system.equations)
        truth_residuals.append(current)
        for letter in truth:
            current = tuple(peeler.peel(r, letter)[0] for r in current)
            truth_residuals.append(current)

    mults = evals = 0
    start = _initial_candidate(system)
    beam = [start]
    trace: list[StepTrace] = []
    halt_reason = None
    presentation = None
    param_fired = False

    def identity_candidate(cands):
        for cand in cands:
            if all(is_identity(r) for r in cand.residuals):
                return cand
        return None

    def parametric_fires(cands):
        nonlocal mults, evals
        fired = False
        for cand in cands:
            peeled, total = peeler.parametric_sums(cand)
            mults += len(cand.residuals)
            evals += len(cand.residuals)
            if peeled <= cfg.tau * total:
                fired = True
        return fired

    # step 0
    if membership:
        hit = identity_candidate(beam)
        if hit is not None:
            presentation, halt_reason = hit.letters, "identity_at_start"
    elif all(is_identity(r) for r in start.residuals):
        halt_reason = "identity_at_start"
    if halt_reason is None and parametric and parametric_fires(beam):
        param_fired, halt_reason = True, "parametric"

    if cfg.halt == HaltMode.FIXED_STEPS:
        limit = cfg.max_steps
    else:
        limit = cfg.max_steps if cfg.max_steps is not None else cfg.step_limit

    bt = cfg.backtrack if backtracking else None
    history = [beam]
    sites: set[int] = set()
    backtracks = 0
    boost_until = 0
    prev_sum = None
    rises = 0
    best_sum = None
    best_beam = None

    executor = ThreadPoolExecutor(max_workers=cfg.workers) if cfg.workers > 1 else None
    try:
        step = 0
        while halt_reason is None and step < limit:
            boosted = bt is not None and step + 1 <= boost_until
            width = cfg.M * bt.multiplier if boosted else cfg.M
            beam, used, scored = _beam_step(beam, peeler, width, executor)
            mults += used
            evals += scored
            step += 1
            scores = tuple(c.score for c in beam)
            rank = None
            if truth is not None and step < len(truth_residuals):
                rank = _rank_of(beam, truth_residuals[step])
            trace.append(StepTrace(step, scores, sum(scores) / len(scores), rank))
            logger.debug("step %d: width %d, mean score %.1f, truth rank %s",
                         step, len(beam), trace[-1].mean_score, rank)
            if bt is not None:
                history.append(beam)

            if membership:
                hit = identity_candidate(beam)
                if hit is not None:
                    presentation, halt_reason = hit.letters, "identity_residual"
                    break
            if parametric and parametric_fires(beam):
                param_fired, halt_reason = True, "parametric"
                break
            if cfg.halt == HaltMode.SCORE_SUM_RISES and not boosted and len(beam) == cfg.M:
                total = sum(scores)
                rises = rises + 1 if prev_sum is not None and total >= prev_sum else 0
                prev_sum = total
                if best_sum is None or total < best_sum:
                    best_sum, best_beam = total, beam
                if rises >= cfg.patience:
                    halt_reason = "score_sum_rises"
                    break

            if (bt is not None and step >= boost_until and backtracks < bt.max_backtracks
                    and step not in sites and detect_failure(trace, bt.window, bt.epsilon)):
                sites.add(step)
                backtracks += 1
                back = lookback_step(step, bt.lookback)
                logger.info("failure detected at step %d, backtracking to step %d with width %d",
                            step, back, cfg.M * bt.multiplier)
                beam = history[back]
                del history[back + 1:]
                del trace[back:]
                boost_until = back + bt.lookback + bt.window
                prev_sum, rises = None, 0
                step = back
    finally:
        if executor is not None:
            executor.shutdown()

    if halt_reason is None:
        halt_reason = "fixed_steps" if cfg.halt == HaltMode.FIXED_STEPS else "step_limit"

    final = beam
    if halt_reason == "score_sum_rises" and best_beam is not None:
        final = best_beam
    ranked = tuple(final[:cfg.M])

    by_parameter: tuple[Candidate, ...] = ()
    if parametric:
        keyed = []
        for cand in ranked:
            peeled, _ = peeler.parametric_sums(cand)
            keyed.append(((peeled,) + cand.sort_key(), cand))
        by_parameter = tuple(c for _, c in sorted(keyed, key=lambda kc: kc[0]))

    truth_rank = None
    if truth is not None:
        truth_rank = _rank_of(by_parameter or ranked, truth_residuals[-1])

    if membership:
        found = presentation is not None
    elif truth is not None:
        found = truth_rank > 0
    elif parametric:
        found = param_fired
    else:
        found = bool(ranked)

    logger.info("halted at step %d (%s), %d multiplications, found=%s",
                len(trace), halt_reason, mults, found)
    return SolveResult(
        ranked=ranked,
        halted_at_step=len(trace),
        halt_reason=halt_reason,
        trace=trace,
        multiplications=mults,
        length_evaluations=evals,
        truth_rank=truth_rank,
        ranked_by_parameter=by_parameter,
        presentation=presentation,
        backtracks=backtracks,
        found=found,
    )


def solve(system: EquationSystem, cfg: BeamConfig, truth: Sequence[Letter] | None = None) -> SolveResult:
    """Run the beam scheme under the configured halting rule."""
    return _run(system, cfg, truth)


def solve_with_backtracking(system: EquationSystem, cfg: BeamConfig,
                            truth: Sequence[Letter] | None = None) -> SolveResult:
    """
    Same as solve, but when the mean score plateaus the beam from a few steps back is
    restored and the next steps run with a wider beam.
    """
    if cfg.backtrack is None:
        raise SolverConfigError("solve_with_backtracking needs cfg.backtrack")
    return _run(system, cfg, truth, backtracking=True)


def solve_conjugacy(b: GarsideNormalForm, P: GarsideNormalForm | None,
                    generators: Sequence[GarsideNormalForm], cfg: BeamConfig,
                    generator_words: Sequence[BraidWord] = (),
                    truth: Sequence[Letter] | None = None) -> SolveResult:
    """
    Find X with b = X P X^-1. With P known and two-sided peeling, each letter is peeled
    from both sides and the run stops once P^-1·residual is short. Without P, the plain
    one-sided scheme runs for exactly the known n steps.
    """
    if P is not None and cfg.two_sided:
        system = EquationSystem(b.strands, tuple(generators), (Equation(b=b, prefix=P),),
                                tuple(generator_words))
        return _run(system, replace(cfg, halt=HaltMode.PARAMETRIC), truth)
    if cfg.max_steps is None:
        raise SolverConfigError("conjugacy without P (or one-sided) needs the known n as max_steps")
    system = EquationSystem(b.strands, tuple(generators), (Equation(b=b),), tuple(generator_words))
    return _run(system, replace(cfg, halt=HaltMode.FIXED_STEPS, two_sided=False), truth)


def solve_membership(g: GarsideNormalForm, generators: Sequence[GarsideNormalForm], cfg: BeamConfig,
                     generator_words: Sequence[BraidWord] = (),
                     truth: Sequence[Letter] | None = None) -> SolveResult:
    """
    Look for g among the products coded by the beam. A found presentation lists the
    letters of g over a_1 … a_m in multiplication order; not finding one proves nothing.
    """
    system = EquationSystem(g.strands, tuple(generators), (Equation(b=g),), tuple(generator_words))
    return _run(system, replace(cfg, two_sided=False), truth, membership=True)


# ---------------------------------------------------------------------------
# Reporting
# ---------------------------------------------------------------------------

def format_letters(letters: Sequence[Letter]) -> str:
    return " ".join(f"{j}:{s}" for j, s in letters)


def reconstruct(letters: Sequence[Letter], generators: Sequence[GarsideNormalForm]) -> GarsideNormalForm:
    """X = a_{j_1}^σ_1 ⋯ a_{j_s}^σ_s for a peel sequence."""
    x = identity(generators[0].strands)
    for j, sigma in letters:
        g = generators[j - 1]
        x = gnf_multiply(x, g if sigma > 0 else gnf_inverse(g))
    return x


def result_to_dict(result: SolveResult) -> dict:
    def cand(c: Candidate) -> dict:
        return {"letters": [list(l) for l in c.letters], "score": c.score}

    return {
        "halted_at_step": result.halted_at_step,
        "halt_reason": result.halt_reason,
        "found": result.found,
        "truth_rank": result.truth_rank,
        "multiplications": result.multiplications,
        "length_evaluations": result.length_evaluations,
        "backtracks": result.backtracks,
        "presentation": [list(l) for l in result.presentation] if result.presentation is not None else None,
        "ranked": [cand(c) for c in result.ranked],
        "ranked_by_parameter": [cand(c) for c in result.ranked_by_parameter],
        "trace": [
            {"step": t.step, "mean_score": t.mean_score, "scores": list(t.scores), "truth_rank": t.truth_rank}
            for t in result.trace
        ],
    }
