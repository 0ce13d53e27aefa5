"""
Logistic success model: L = log(p/(1-p)) = β0 + Σ β_i·x_i with x = log2(m, n, k, l, M).

Ships the published fit as PUBLISHED_MODEL, refits from experiment data by IRLS with
Wald significance and backward elimination at the 0.05 level, and evaluates the
derived memory and complexity formulas.
"""

from __future__ import annotations

import logging
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.special import expit
from scipy.stats import norm

logger = logging.getLogger(__name__)

PREDICTORS = ("m", "n", "k", "l", "M")
SIGNIFICANCE = 0.05


class FitError(ValueError):
    """The maximum-likelihood fit does not exist or cannot be computed."""


@dataclass(frozen=True)
class LogisticModel:
    intercept: float
    coefficients: tuple[float, ...]
    included: tuple[bool, ...] = (True,) * 5
    # intercept first, then x1..x5; NaN where unknown or excluded
    std_errors: tuple[float, ...] = (math.nan,) * 6
    p_values: tuple[float, ...] = (math.nan,) * 6

    def logit(self, params) -> float:
        x = features(params)
        return float(self.intercept + np.dot(self.coefficients, x))


PUBLISHED_MODEL = LogisticModel(
    intercept=7.0814,
    coefficients=(-1.7165, -0.7547, 0.1094, 0.0, 0.5437),
    included=(True, True, True, False, True),
)


def features(params) -> np.ndarray:
    """log2 of (m, n, k, l, M) from ExperimentParams, a TrialRecord or a plain 5-sequence."""
    if hasattr(params, "M"):
        values = (params.m, params.n, params.k, params.l, params.M)
    else:
        values = tuple(params)
    if len(values) != 5 or min(values) <= 0:
        raise ValueError(f"Expected five positive parameters (m, n, k, l, M), got {values}")
    return np.log2(np.asarray(values, dtype=float))


def predict_success(model: LogisticModel, params) -> float:
    return float(expit(model.logit(params)))


def required_memory(m: float, n: float, k: float) -> float:
    """Closed-form M needed for even odds, floored at 1."""
    return max(1.0, 0.00012 * m ** 3.16 * n ** 1.39 / k ** 0.2)


def memory_for_probability(model: LogisticModel, m, n, k, l=4, p: float = 0.5) -> float:
    """Invert the model for M: the beam width at which the predicted success equals p."""
    beta_m = model.coefficients[4]
    if beta_m <= 0:
        raise ValueError("Model has no positive memory coefficient to invert")
    partial = model.intercept + np.dot(model.coefficients[:4], np.log2([m, n, k, l]))
    x5 = (math.log(p / (1 - p)) - partial) / beta_m
    return float(2 ** x5)


def memory_doubling_factor(model: LogisticModel = PUBLISHED_MODEL) -> float:
    """Factor by which M must grow to keep p fixed when m doubles."""
    return 2 ** (abs(model.coefficients[0]) / model.coefficients[4])


def multiplication_count(n: int, m: int, k: int, M: int) -> tuple[int, int]:
    """(group multiplications, length evaluations) of a full-beam run of n steps."""
    return n * (n + 4 * m + 1) * k * M // 2, 2 * k * m * n * M


# ---------------------------------------------------------------------------
# Fitting
# ---------------------------------------------------------------------------

def _irls(X: np.ndarray, y: np.ndarray, max_iter: int, tol: float) -> tuple[np.ndarray, np.ndarray]:
    beta = np.zeros(X.shape[1])
    eta = X @ beta
    loglik = float(np.sum(y * eta - np.logaddexp(0, eta)))
    for i in range(max_iter):
        p = expit(eta)
        w = p * (1 - p)
        hessian = X.T @ (w[:, None] * X)
        try:
            step = np.linalg.solve(hessian, X.T @ (y - p))
        except np.linalg.LinAlgError:
            raise FitError("Singular information matrix; predictors are collinear") from None
        beta = beta + step
        if np.max(np.abs(beta)) > 50:
            raise FitError("Coefficients diverge: the outcomes are (quasi-)separated")
        eta = X @ beta
        new_loglik = float(np.sum(y * eta - np.logaddexp(0, eta)))
        converged = abs(new_loglik - loglik) < tol * max(abs(loglik), 1.0)
        loglik = new_loglik
        if converged:
            logger.debug("IRLS converged after %d iterations, log-likelihood %.6f", i + 1, loglik)
            break
    else:
        logger.warning("IRLS stopped after %d iterations without converging", max_iter)

    p = expit(eta)
    if (y == 1).any() and p[y == 1].min() > 1 - 1e-10 or (y == 0).any() and p[y == 0].max() < 1e-10:
        raise FitError("Fitted probabilities reach 0 or 1: the outcomes are separated")
    w = p * (1 - p)
    try:
        cov = np.linalg.inv(X.T @ (w[:, None] * X))
    except np.linalg.LinAlgError:
        raise FitError("Singular information matrix at the fitted coefficients") from None
    return beta, cov


def fit_logistic(rows: Iterable[tuple[object, bool]], alpha: float = SIGNIFICANCE,
                 max_iter: int = 50, tol: float = 1e-8, eliminate: bool = True) -> LogisticModel:
    """
    Maximum-likelihood fit over rows of (params, success). With eliminate set, the least
    significant predictor above alpha is dropped and the model refit until every
    remaining predictor is significant. The intercept always stays.
    """
    rows = list(rows)
    if not rows:
        raise FitError("No rows to fit")
    x = np.vstack([features(params) for params, _ in rows])
    y = np.asarray([1.0 if ok else 0.0 for _, ok in rows])
    if y.min() == y.max():
        raise FitError("All outcomes are identical; the maximum-likelihood fit does not exist")

    included = [True] * len(PREDICTORS)
    while True:
        cols = [i for i, keep in enumerate(included) if keep]
        design = np.column_stack([np.ones(len(y))] + [x[:, i] for i in cols])
        if np.linalg.matrix_rank(design) < design.shape[1]:
            raise FitError("Design matrix is rank deficient; some predictor is constant or collinear")
        beta, cov = _irls(design, y, max_iter, tol)
        se = np.sqrt(np.diag(cov))
        pvals = 2 * norm.sf(np.abs(beta / se))
        if not eliminate or not cols:
            break
        worst = int(np.argmax(pvals[1:]))
        if pvals[1 + worst] <= alpha:
            break
        logger.info("dropping x%d (%s) with p=%.3f", cols[worst] + 1, PREDICTORS[cols[worst]], pvals[1 + worst])
        included[cols[worst]] = False

    coefficients = [0.0] * len(PREDICTORS)
    std_errors = [float(se[0])] + [math.nan] * len(PREDICTORS)
    p_values = [float(pvals[0])] + [math.nan] * len(PREDICTORS)
    for pos, i in enumerate(cols, start=1):
        coefficients[i] = float(beta[pos])
        std_errors[1 + i] = float(se[pos])
        p_values[1 + i] = float(pvals[pos])
    return LogisticModel(
        intercept=float(beta[0]),
        coefficients=tuple(coefficients),
        included=tuple(included),
        std_errors=tuple(std_errors),
        p_values=tuple(p_values),
    )


def simulate_outcomes(model: LogisticModel, cells: Sequence, trials: int,
                      rng: np.random.Generator) -> list[tuple[object, bool]]:
    """Bernoulli outcomes drawn from the model's predicted success for every cell."""
    rows = []
    for cell in cells:
        p = predict_success(model, cell)
        rows.extend((cell, bool(hit)) for hit in rng.random(trials) < p)
    return rows


# ---------------------------------------------------------------------------
# Experiment records
# ---------------------------------------------------------------------------

def rows_from_records(records: Iterable) -> list[tuple[tuple[int, ...], bool]]:
    """Fit rows from trial records. Rows with l = 0 are skipped since log2(0) is undefined."""
    rows = []
    skipped = 0
    for r in records:
        if min(r.m, r.n, r.k, r.l, r.M) <= 0:
            skipped += 1
            continue
        rows.append(((r.m, r.n, r.k, r.l, r.M), bool(r.success)))
    if skipped:
        logger.warning("skipped %d records with a zero parameter", skipped)
    return rows


def success_fractions(records: Iterable) -> dict[tuple, tuple[int, int]]:
    """(successes, trials) per (N, m, n, k, l, M, variant)."""
    tally: dict[tuple, list[int]] = defaultdict(lambda: [0, 0])
    for r in records:
        entry = tally[(r.N, r.m, r.n, r.k, r.l, r.M, r.variant)]
        entry[0] += int(bool(r.success))
        entry[1] += 1
    return {key: (hits, total) for key, (hits, total) in sorted(tally.items())}


def summary(model: LogisticModel) -> str:
    def fmt(v: float) -> str:
        return "-" if math.isnan(v) else f"{v:.4f}"

    lines = [f"{'term':<12}{'coef':>10}{'se':>10}{'p':>10}  included"]
    lines.append(f"{'intercept':<12}{model.intercept:>10.4f}{fmt(model.std_errors[0]):>10}"
                 f"{fmt(model.p_values[0]):>10}  yes")
    for i, name in enumerate(PREDICTORS):
        lines.append(
            f"{f'x{i + 1} log2 {name}':<12}{model.coefficients[i]:>10.4f}{fmt(model.std_errors[i + 1]):>10}"
            f"{fmt(model.p_values[i + 1]):>10}  {'yes' if model.included[i] else 'no'}"
        )
    return "\n".join(lines)


def model_to_dict(model: LogisticModel) -> dict:
    def clean(values):
        return [None if math.isnan(v) else v for v in values]

    return {
        "intercept": model.intercept,
        "coefficients": list(model.coefficients),
        "included": list(model.included),
        "std_errors": clean(model.std_errors),
        "p_values": clean(model.p_values),
    }


def model_from_dict(doc: dict) -> LogisticModel:
    try:
        coefficients = tuple(float(v) for v in doc["coefficients"])
        if len(coefficients) != len(PREDICTORS):
            raise ValueError(f"expected {len(PREDICTORS)} coefficients, got {len(coefficients)}")

        def restore(key):
            values = doc.get(key) or [None] * 6
            return tuple(math.nan if v is None else float(v) for v in values)

        return LogisticModel(
            intercept=float(doc["intercept"]),
            coefficients=coefficients,
            included=tuple(bool(v) for v in doc.get("included", [True] * 5)),
            std_errors=restore("std_errors"),
            p_values=restore("p_values"),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise FitError(f"Malformed model document: {e}") from None
