"""
Seeded generation of random subgroups, secrets and equation systems, the parameter
grids experiments sweep over, and the JSON instance and grid files.

Every random draw comes from a numpy Generator over PCG64, seeded from (params, seed),
so an instance is a pure function of its parameters and seed.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from braid import BraidError, BraidWord, normal_form
from solver import Equation, EquationSystem, Letter

logger = logging.getLogger(__name__)

RNG_ALGORITHM = "PCG64"
INSTANCE_KINDS = ("equations", "conjugacy", "membership")
VARIANTS = ("plain", "parametric", "conjugacy", "membership", "backtracking")

GRID_DEFAULTS = {
    "N": (8,),
    "m": (2, 4, 8),
    "n": (16, 32, 64),
    "k": (1, 2, 4, 8),
    "l": (4, 8),
    "M": tuple(2 ** i for i in range(1, 10)),
}
N_SWEEP = (8, 10, 12, 14, 16, 20, 24, 28, 32, 36, 40, 50, 60, 70, 80, 96, 100)


class InstanceFormatError(ValueError):
    """Malformed instance or grid document."""


@dataclass(frozen=True)
class ExperimentParams:
    N: int = 8
    m: int = 2
    n: int = 16
    k: int = 1
    l: int = 4
    M: int = 16
    gen_len: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.N < 2:
            raise ValueError(f"N must be >= 2, got {self.N}")
        if min(self.m, self.k, self.M, self.gen_len) < 1:
            raise ValueError(f"m, k, M and gen_len must be positive: {self}")
        if min(self.n, self.l, self.seed) < 0:
            raise ValueError(f"n, l and seed must be non-negative: {self}")

    @property
    def cell(self) -> tuple[int, int, int, int, int, int]:
        return self.N, self.m, self.n, self.k, self.l, self.M


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def derive_seed(*parts) -> int:
    """Stable 64-bit seed from arbitrary parts (first 8 bytes of their SHA-256)."""
    digest = hashlib.sha256("/".join(str(p) for p in parts).encode()).digest()
    return int.from_bytes(digest[:8], "big")


# ---------------------------------------------------------------------------
# Random draws
# ---------------------------------------------------------------------------

def random_artin_word(strands: int, length: int, rng: np.random.Generator) -> BraidWord:
    """Uniform letters over the 2(N-1) signed Artin generators."""
    draws = rng.integers(0, 2 * (strands - 1), size=length)
    return BraidWord(strands, tuple(int(d // 2 + 1) * (1 if d % 2 == 0 else -1) for d in draws))


def random_letters(count: int, m: int, rng: np.random.Generator,
                   after: Letter | None = None) -> tuple[Letter, ...]:
    """
    A freely reduced product of count subgroup letters (j, σ): no letter is followed by
    its own inverse. With after set, the first letter also avoids cancelling against it.
    """
    alphabet = [(j, s) for j in range(1, m + 1) for s in (1, -1)]
    letters: list[Letter] = []
    previous = after
    for _ in range(count):
        choices = alphabet if previous is None else [a for a in alphabet if a != (previous[0], -previous[1])]
        previous = choices[int(rng.integers(0, len(choices)))]
        letters.append(previous)
    return tuple(letters)


def expand_letters(letters: Sequence[Letter], generator_words: Sequence[BraidWord], strands: int) -> BraidWord:
    """The Artin word of a_{j_1}^σ_1 ⋯ a_{j_s}^σ_s."""
    out: list[int] = []
    for j, sigma in letters:
        word = generator_words[j - 1]
        out.extend(word.letters if sigma > 0 else word.inverse().letters)
    return BraidWord(strands, tuple(out))


def random_subgroup(params: ExperimentParams, rng: np.random.Generator) -> tuple[BraidWord, ...]:
    """m generator words of gen_len uniform Artin letters each."""
    return tuple(random_artin_word(params.N, params.gen_len, rng) for _ in range(params.m))


def random_instance(params: ExperimentParams, rng: np.random.Generator,
                    prefix_letters: int | None = None) -> tuple[EquationSystem, tuple[Letter, ...]]:
    """
    Draw a subgroup, a secret X of n subgroup letters and k words W_i of l letters, and
    return the system X·W_i = b_i with the letters of X in multiplication order. X and
    every product X·W_i are freely reduced over the subgroup letters.

    With prefix_letters set, the first prefix_letters letters of each W_i are recorded as
    its known parameter P_i.
    """
    gen_words = random_subgroup(params, rng)
    truth = random_letters(params.n, params.m, rng)
    x_word = expand_letters(truth, gen_words, params.N)
    equations = []
    for _ in range(params.k):
        w_letters = random_letters(params.l, params.m, rng, after=truth[-1] if truth else None)
        w_word = expand_letters(w_letters, gen_words, params.N)
        b_word = x_word + w_word
        prefix_word = None
        if prefix_letters is not None:
            prefix_word = expand_letters(w_letters[:prefix_letters], gen_words, params.N)
        equations.append(Equation(
            b=normal_form(b_word),
            prefix=normal_form(prefix_word) if prefix_word is not None else None,
            b_word=b_word,
            prefix_word=prefix_word,
            w_hint=w_word,
        ))
    system = EquationSystem(
        strands=params.N,
        generators=tuple(normal_form(w) for w in gen_words),
        equations=tuple(equations),
        generator_words=gen_words,
    )
    return system, truth


def random_conjugacy_instance(params: ExperimentParams,
                              rng: np.random.Generator) -> tuple[EquationSystem, tuple[Letter, ...]]:
    """
    b = X·P·X^-1 with X of n letters over one subgroup and P of l letters over a second,
    independently drawn subgroup of the same shape. P is recorded as the known parameter.
    """
    gen_words = random_subgroup(params, rng)
    other_words = random_subgroup(params, rng)
    truth = random_letters(params.n, params.m, rng)
    x_word = expand_letters(truth, gen_words, params.N)
    p_word = expand_letters(random_letters(params.l, params.m, rng), other_words, params.N)
    b_word = x_word + p_word + x_word.inverse()
    equation = Equation(b=normal_form(b_word), prefix=normal_form(p_word), b_word=b_word, prefix_word=p_word)
    system = EquationSystem(
        strands=params.N,
        generators=tuple(normal_form(w) for w in gen_words),
        equations=(equation,),
        generator_words=gen_words,
    )
    return system, truth


# ---------------------------------------------------------------------------
# Grids
# ---------------------------------------------------------------------------

def parameter_grid(N=GRID_DEFAULTS["N"], m=GRID_DEFAULTS["m"], n=GRID_DEFAULTS["n"], k=GRID_DEFAULTS["k"],
                   l=GRID_DEFAULTS["l"], M=GRID_DEFAULTS["M"], gen_len: int = 10) -> list[ExperimentParams]:
    """Cross product of the value sets, in N, m, n, k, l, M order."""
    return [
        ExperimentParams(N=cN, m=cm, n=cn, k=ck, l=cl, M=cM, gen_len=gen_len)
        for cN, cm, cn, ck, cl, cM in itertools.product(N, m, n, k, l, M)
    ]


def n_sweep_grid(strands: Sequence[int] = N_SWEEP, m: int = 2, n: int = 16, k: int = 8, l: int = 8,
                 M: int = 2, gen_len: int = 10) -> list[ExperimentParams]:
    """Fixed (m, n, k, l, M), varying the strand count."""
    return parameter_grid(N=strands, m=(m,), n=(n,), k=(k,), l=(l,), M=(M,), gen_len=gen_len)


@dataclass(frozen=True)
class GridConfig:
    cells: tuple[ExperimentParams, ...]
    variants: tuple[str, ...] = ("plain",)
    trials: int | None = None


def _positive_ints(doc: dict, key: str, minimum: int = 1) -> tuple[int, ...]:
    values = doc[key]
    if not isinstance(values, list) or not values:
        raise InstanceFormatError(f"Grid key {key!r} must be a non-empty list")
    for v in values:
        if isinstance(v, bool) or not isinstance(v, int) or v < minimum:
            raise InstanceFormatError(f"Grid key {key!r} holds invalid value {v!r}")
    return tuple(values)


def grid_from_dict(doc: dict) -> GridConfig:
    if not isinstance(doc, dict):
        raise InstanceFormatError("Grid document must be a JSON object")
    known = set(GRID_DEFAULTS) | {"variants", "gen_len", "trials"}
    unknown = set(doc) - known
    if unknown:
        raise InstanceFormatError(f"Unknown grid keys: {sorted(unknown)}")
    values = {}
    for key, default in GRID_DEFAULTS.items():
        minimum = 0 if key in ("n", "l") else (2 if key == "N" else 1)
        values[key] = _positive_ints(doc, key, minimum) if key in doc else default
    gen_len = doc.get("gen_len", 10)
    trials = doc.get("trials")
    for name, value in (("gen_len", gen_len), ("trials", trials)):
        if value is not None and (isinstance(value, bool) or not isinstance(value, int) or value < 1):
            raise InstanceFormatError(f"Grid key {name!r} must be a positive integer, got {value!r}")
    variants = doc.get("variants", ["plain"])
    if not isinstance(variants, list) or not variants or any(v not in VARIANTS for v in variants):
        raise InstanceFormatError(f"Grid variants must be a non-empty list drawn from {VARIANTS}")
    return GridConfig(parameter_grid(gen_len=gen_len, **values), tuple(variants), trials)


def load_grid(path: str | Path) -> GridConfig:
    with open(path, encoding="utf-8") as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as e:
            raise InstanceFormatError(f"{path}: not valid JSON ({e})") from None
    return grid_from_dict(doc)


# ---------------------------------------------------------------------------
# Instance files
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InstanceFile:
    kind: str
    system: EquationSystem
    truth: tuple[Letter, ...] | None = None


def instance_to_dict(inst: InstanceFile) -> dict:
    system = inst.system
    gen_words = system.generator_words or tuple(g.artin_word() for g in system.generators)
    equations = []
    for eq in system.equations:
        b_word = eq.b_word if eq.b_word is not None else eq.b.artin_word()
        if eq.prefix_word is not None:
            p = list(eq.prefix_word.letters)
        elif eq.prefix is not None:
            p = list(eq.prefix.artin_word().letters)
        else:
            p = None
        equations.append({
            "b": list(b_word.letters),
            "P": p,
            "W_hint": list(eq.w_hint.letters) if eq.w_hint is not None else None,
        })
    return {
        "kind": inst.kind,
        "N": system.strands,
        "generators": [list(w.letters) for w in gen_words],
        "equations": equations,
        "truth": [[j, s] for j, s in inst.truth] if inst.truth is not None else None,
    }


def dumps_instance(inst: InstanceFile) -> str:
    return json.dumps(instance_to_dict(inst), sort_keys=True, indent=2) + "\n"


def save_instance(inst: InstanceFile, path: str | Path) -> None:
    Path(path).write_text(dumps_instance(inst), encoding="utf-8")


def _letter_list(value, what: str) -> list[int]:
    if not isinstance(value, list) or any(isinstance(e, bool) or not isinstance(e, int) for e in value):
        raise InstanceFormatError(f"{what} must be a list of integers")
    return value


def instance_from_dict(doc: dict) -> InstanceFile:
    if not isinstance(doc, dict):
        raise InstanceFormatError("Instance document must be a JSON object")
    for key in ("N", "generators", "equations"):
        if key not in doc:
            raise InstanceFormatError(f"Instance is missing {key!r}")
    kind = doc.get("kind", "equations")
    if kind not in INSTANCE_KINDS:
        raise InstanceFormatError(f"Unknown instance kind {kind!r}")
    strands = doc["N"]
    if isinstance(strands, bool) or not isinstance(strands, int):
        raise InstanceFormatError(f"N must be an integer, got {strands!r}")
    if not isinstance(doc["generators"], list) or not doc["generators"]:
        raise InstanceFormatError("generators must be a non-empty list")
    if not isinstance(doc["equations"], list) or not doc["equations"]:
        raise InstanceFormatError("equations must be a non-empty list")
    try:
        gen_words = tuple(BraidWord(strands, tuple(_letter_list(g, "generator"))) for g in doc["generators"])
        equations = []
        for i, raw in enumerate(doc["equations"]):
            if not isinstance(raw, dict) or "b" not in raw:
                raise InstanceFormatError(f"equation {i} must be an object with a 'b' word")
            b_word = BraidWord(strands, tuple(_letter_list(raw["b"], f"equation {i} b")))
            p = raw.get("P")
            hint = raw.get("W_hint")
            p_word = BraidWord(strands, tuple(_letter_list(p, f"equation {i} P"))) if p is not None else None
            w_hint = BraidWord(strands, tuple(_letter_list(hint, f"equation {i} W_hint"))) if hint is not None else None
            equations.append(Equation(
                b=normal_form(b_word),
                prefix=normal_form(p_word) if p_word is not None else None,
                b_word=b_word,
                prefix_word=p_word,
                w_hint=w_hint,
            ))
    except BraidError as e:
        raise InstanceFormatError(str(e)) from None

    truth = doc.get("truth")
    if truth is not None:
        if not isinstance(truth, list):
            raise InstanceFormatError("truth must be a list of [j, sigma] pairs")
        parsed = []
        for pair in truth:
            if (not isinstance(pair, list) or len(pair) != 2
                    or any(isinstance(x, bool) or not isinstance(x, int) for x in pair)
                    or not 1 <= pair[0] <= len(gen_words) or pair[1] not in (1, -1)):
                raise InstanceFormatError(f"Bad truth letter {pair!r}")
            parsed.append((int(pair[0]), int(pair[1])))
        truth = tuple(parsed)

    if kind != "equations" and len(equations) != 1:
        raise InstanceFormatError(f"A {kind} instance holds exactly one equation")
    system = EquationSystem(
        strands=strands,
        generators=tuple(normal_form(w) for w in gen_words),
        equations=tuple(equations),
        generator_words=gen_words,
    )
    return InstanceFile(kind, system, truth)


def load_instance(path: str | Path) -> InstanceFile:
    with open(path, encoding="utf-8") as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as e:
            raise InstanceFormatError(f"{path}: not valid JSON ({e})") from None
    return instance_from_dict(doc)
