"""
Exact arithmetic in the braid group B_N.

Elements are kept in left canonical (Garside) form Δ^-r · p_1 ⋯ p_q with r ≥ 0 minimal.
A permutation braid is stored as a permutation table: perm[i] is the image of position i
(0-based), and the permutation of a word is the composition of its letters' transpositions
taken in reading order, so perm(AB)[x] = perm(A)[perm(B)[x]]. Text formats and the public
index sets are 1-based, matching Artin generator numbering.
"""

from __future__ import annotations

import functools
import logging
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

logger = logging.getLogger(__name__)

Perm = tuple[int, ...]


class BraidError(ValueError):
    """Malformed braid input: bad token, generator index out of range, strand mismatch."""


# ---------------------------------------------------------------------------
# Permutation tables
# ---------------------------------------------------------------------------

@functools.lru_cache(maxsize=None)
def _identity_perm(n: int) -> Perm:
    return tuple(range(n))


@functools.lru_cache(maxsize=None)
def _delta_perm(n: int) -> Perm:
    return tuple(range(n - 1, -1, -1))


@functools.lru_cache(maxsize=1 << 16)
def _inversions(perm: Perm) -> int:
    n = len(perm)
    return sum(1 for i in range(n) for j in range(i + 1, n) if perm[i] > perm[j])


def _inverse(perm: Sequence[int]) -> list[int]:
    inv = [0] * len(perm)
    for i, v in enumerate(perm):
        inv[v] = i
    return inv


def _compose(a: Sequence[int], b: Sequence[int]) -> Perm:
    return tuple(a[x] for x in b)


@functools.lru_cache(maxsize=1 << 16)
def _tau(perm: Perm) -> Perm:
    # Δ^-1 A Δ: conjugation by the longest permutation
    n = len(perm)
    return tuple(n - 1 - perm[n - 1 - p] for p in range(n))


def _tau_power(perm: Perm, power: int) -> Perm:
    return _tau(perm) if power % 2 else perm


@functools.lru_cache(maxsize=1 << 16)
def _complement(perm: Perm) -> Perm:
    # right complement A* with A·A* = Δ
    return _compose(_inverse(perm), _delta_perm(len(perm)))


@functools.lru_cache(maxsize=1 << 18)
def _slide(a: Perm, b: Perm) -> tuple[Perm, Perm]:
    """
    Left-weight the pair (a, b): while some σ_i starts b but does not finish a,
    replace (a, b) by (a·σ_i, σ_i^-1·b). Returns the inputs unchanged when the
    pair is already left-weighted.
    """
    left = list(a)
    binv = _inverse(b)
    n = len(left)
    moved = False
    i = 0
    while i < n - 1:
        if binv[i] > binv[i + 1] and left[i] < left[i + 1]:
            left[i], left[i + 1] = left[i + 1], left[i]
            binv[i], binv[i + 1] = binv[i + 1], binv[i]
            moved = True
            i = i - 1 if i > 0 else 0
            continue
        i += 1
    if not moved:
        return a, b
    return tuple(left), tuple(_inverse(binv))


def _left_weight(factors: list[Perm], start: int, limit: int) -> None:
    """
    Restore left-weightedness in place. Pairs (i, i+1) with i < start or i > limit are
    assumed weighted unless one of their members changes. Whenever a slide changes a
    pair, the pair on its left is revisited and the pair on its right is queued.
    """
    last = len(factors) - 1
    i = start
    while i <= limit and i < last:
        a, b = _slide(factors[i], factors[i + 1])
        if a != factors[i]:
            factors[i] = a
            factors[i + 1] = b
            if i + 1 > limit:
                limit = i + 1
            if i > 0:
                i -= 1
                continue
        i += 1


def _strip(n: int, inf: int, factors: Sequence[Perm]) -> tuple[int, tuple[Perm, ...]]:
    """Absorb leading Δ factors into the power of Δ and drop trailing identities."""
    delta = _delta_perm(n)
    ident = _identity_perm(n)
    lo, hi = 0, len(factors)
    while lo < hi and factors[lo] == delta:
        lo += 1
    while lo < hi and factors[hi - 1] == ident:
        hi -= 1
    return inf + lo, tuple(factors[lo:hi])


def _multiply_raw(n: int, inf1: int, left: Sequence[Perm],
                  inf2: int, right: Sequence[Perm]) -> tuple[int, tuple[Perm, ...]]:
    # Δ^a A Δ^b B = Δ^(a+b) τ^b(A) B
    if inf2 % 2:
        left = [_tau(p) for p in left]
    factors = list(left) + list(right)
    if left and right:
        junction = len(left) - 1
        _left_weight(factors, junction, junction)
    return _strip(n, inf1 + inf2, factors)


# ---------------------------------------------------------------------------
# Words
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BraidWord:
    """A word in the Artin generators of B_N: +i is σ_i, -i is σ_i^-1."""
    strands: int
    letters: tuple[int, ...] = ()

    def __post_init__(self):
        if self.strands < 2:
            raise BraidError(f"B_N needs N >= 2, got N={self.strands}")
        letters = tuple(int(e) for e in self.letters)
        for e in letters:
            if e == 0:
                raise BraidError("Artin letter 0 is not a generator")
            if abs(e) >= self.strands:
                raise BraidError(f"Artin index {abs(e)} out of range for N={self.strands}")
        object.__setattr__(self, 'letters', letters)

    def __len__(self) -> int:
        return len(self.letters)

    def __str__(self) -> str:
        return " ".join(str(e) for e in self.letters)

    def __add__(self, other: BraidWord) -> BraidWord:
        if other.strands != self.strands:
            raise BraidError(f"Cannot concatenate words in B_{self.strands} and B_{other.strands}")
        return BraidWord(self.strands, self.letters + other.letters)

    def inverse(self) -> BraidWord:
        return BraidWord(self.strands, tuple(-e for e in reversed(self.letters)))

    def permutation(self) -> Perm:
        """Permutation induced by the word, letters applied in reading order."""
        table = list(range(self.strands))
        for e in self.letters:
            i = abs(e) - 1
            table[i], table[i + 1] = table[i + 1], table[i]
        return tuple(table)


def parse_word(text: str, strands: int) -> BraidWord:
    """Parse whitespace-separated signed Artin indices, e.g. "1 -2 1"."""
    letters = []
    for token in text.split():
        try:
            letters.append(int(token))
        except ValueError:
            raise BraidError(f"Malformed Artin letter {token!r}") from None
    return BraidWord(strands, tuple(letters))


# ---------------------------------------------------------------------------
# Permutation braids
# ---------------------------------------------------------------------------

class PermutationBraid(NamedTuple):
    """Positive braid in which each pair of strands crosses at most once."""
    perm: Perm

    @classmethod
    def from_one_line(cls, values: Sequence[int]) -> PermutationBraid:
        """Build from 1-based one-line notation, e.g. (3, 1, 2)."""
        n = len(values)
        if sorted(values) != list(range(1, n + 1)):
            raise BraidError(f"{list(values)} is not a permutation of 1..{n}")
        return cls(tuple(v - 1 for v in values))

    @property
    def strands(self) -> int:
        return len(self.perm)

    def one_line(self) -> tuple[int, ...]:
        return tuple(v + 1 for v in self.perm)

    def inversions(self) -> int:
        return _inversions(self.perm)

    def is_identity(self) -> bool:
        return self.perm == _identity_perm(len(self.perm))

    def is_delta(self) -> bool:
        return self.perm == _delta_perm(len(self.perm))

    def starting_set(self) -> frozenset[int]:
        inv = _inverse(self.perm)
        return frozenset(i + 1 for i in range(len(inv) - 1) if inv[i] > inv[i + 1])

    def finishing_set(self) -> frozenset[int]:
        p = self.perm
        return frozenset(i + 1 for i in range(len(p) - 1) if p[i] > p[i + 1])

    def tau(self) -> PermutationBraid:
        return PermutationBraid(_tau(self.perm))

    def complement(self) -> PermutationBraid:
        return PermutationBraid(_complement(self.perm))

    def word(self) -> tuple[int, ...]:
        """A reduced positive Artin word for the braid."""
        p = list(self.perm)
        letters = []
        while True:
            for i in range(len(p) - 1):
                if p[i] > p[i + 1]:
                    p[i], p[i + 1] = p[i + 1], p[i]
                    letters.append(i + 1)
                    break
            else:
                break
        return tuple(reversed(letters))

    def __str__(self) -> str:
        return " ".join(str(v) for v in self.one_line())


def inversions(p: PermutationBraid) -> int:
    return p.inversions()


def delta(strands: int) -> PermutationBraid:
    """The half twist Δ_N."""
    if strands < 2:
        raise BraidError(f"B_N needs N >= 2, got N={strands}")
    return PermutationBraid(_delta_perm(strands))


def is_left_weighted(a: PermutationBraid, b: PermutationBraid) -> bool:
    return b.starting_set() <= a.finishing_set()


# ---------------------------------------------------------------------------
# Normal forms
# ---------------------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class GarsideNormalForm:
    """
    Δ^-r · p_1 ⋯ p_q. With r > 0 no factor is Δ; with r = 0 the positive power of Δ
    appears as leading Δ factors. No factor is the identity.
    """
    strands: int
    r: int
    factors: tuple[PermutationBraid, ...]

    @classmethod
    def _from_raw(cls, strands: int, inf: int, perms: Iterable[Perm]) -> GarsideNormalForm:
        body = tuple(PermutationBraid(p) for p in perms)
        if inf >= 0:
            return cls(strands, 0, (delta(strands),) * inf + body)
        return cls(strands, -inf, body)

    def _raw(self) -> tuple[int, tuple[Perm, ...]]:
        if self.r > 0:
            return -self.r, tuple(f.perm for f in self.factors)
        d = _delta_perm(self.strands)
        lead = 0
        while lead < len(self.factors) and self.factors[lead].perm == d:
            lead += 1
        return lead, tuple(f.perm for f in self.factors[lead:])

    @property
    def inf(self) -> int:
        """Signed power of Δ in the Δ^inf · (proper factors) reading."""
        return self._raw()[0]

    @property
    def canonical_length(self) -> int:
        return len(self._raw()[1])

    def artin_word(self) -> BraidWord:
        """Expand back into Artin letters."""
        letters: list[int] = []
        delta_word = delta(self.strands).word()
        letters.extend(-e for e in reversed(delta_word * self.r))
        for f in self.factors:
            letters.extend(f.word())
        return BraidWord(self.strands, tuple(letters))

    def permutation(self) -> Perm:
        perm = _identity_perm(self.strands)
        for _ in range(self.r % 2):
            perm = _compose(perm, _delta_perm(self.strands))
        for f in self.factors:
            perm = _compose(perm, f.perm)
        return perm

    def __mul__(self, other: GarsideNormalForm) -> GarsideNormalForm:
        return gnf_multiply(self, other)

    def inverse(self) -> GarsideNormalForm:
        return gnf_inverse(self)

    def __str__(self) -> str:
        return f"D^-{self.r} | " + " ; ".join(str(f) for f in self.factors)


def identity(strands: int) -> GarsideNormalForm:
    if strands < 2:
        raise BraidError(f"B_N needs N >= 2, got N={strands}")
    return GarsideNormalForm(strands, 0, ())


def from_permutation(p: PermutationBraid) -> GarsideNormalForm:
    """Normal form of a single permutation braid."""
    inf, perms = _strip(p.strands, 0, [p.perm])
    return GarsideNormalForm._from_raw(p.strands, inf, perms)


def normal_form(word: BraidWord) -> GarsideNormalForm:
    """
    Left canonical form of a word. Each σ_i^-1 is rewritten as Δ^-1·(Δσ_i^-1), all Δ^-1
    are pushed to the front through the flip automorphism, and the resulting sequence of
    permutation braids is left-weighted by local sliding.
    """
    n = word.strands
    ident = _identity_perm(n)
    delta_perm = _delta_perm(n)
    negatives = sum(1 for e in word.letters if e < 0)
    after = negatives
    factors: list[Perm] = []
    for e in word.letters:
        i = abs(e) - 1
        s = list(ident)
        s[i], s[i + 1] = s[i + 1], s[i]
        if e < 0:
            after -= 1
            p = _compose(delta_perm, s)
        else:
            p = tuple(s)
        p = _tau_power(p, after)
        if p != ident:
            factors.append(p)
    if len(factors) > 1:
        _left_weight(factors, 0, len(factors) - 2)
    inf, perms = _strip(n, -negatives, factors)
    return GarsideNormalForm._from_raw(n, inf, perms)


def gnf_multiply(u: GarsideNormalForm, v: GarsideNormalForm) -> GarsideNormalForm:
    if u.strands != v.strands:
        raise BraidError(f"Strand mismatch: B_{u.strands} * B_{v.strands}")
    inf1, left = u._raw()
    inf2, right = v._raw()
    inf, perms = _multiply_raw(u.strands, inf1, left, inf2, right)
    return GarsideNormalForm._from_raw(u.strands, inf, perms)


def gnf_inverse(u: GarsideNormalForm) -> GarsideNormalForm:
    # (Δ^d A_1⋯A_k)^-1 = Δ^(-d-k) τ^(k+d)(A_k*) ⋯ τ^(1+d)(A_1*)
    inf, perms = u._raw()
    k = len(perms)
    factors = [_tau_power(_complement(perms[i - 1]), i + inf) for i in range(k, 0, -1)]
    if len(factors) > 1:
        _left_weight(factors, 0, len(factors) - 2)
    new_inf, new_perms = _strip(u.strands, -inf - k, factors)
    return GarsideNormalForm._from_raw(u.strands, new_inf, new_perms)


def is_identity(u: GarsideNormalForm) -> bool:
    return u.r == 0 and not u.factors


def parse_normal_form(text: str, strands: int) -> GarsideNormalForm:
    """
    Parse "D^-r | f1 ; f2 ; …" where each f is a 1-based one-line permutation.
    The result is the normal form of the element the text describes.
    """
    head, sep, tail = text.partition("|")
    head = head.strip()
    if not sep or not head.startswith("D^-"):
        raise BraidError(f"Malformed normal form {text!r}")
    try:
        r = int(head[3:])
    except ValueError:
        raise BraidError(f"Malformed Δ power {head!r}") from None
    if r < 0:
        raise BraidError(f"Δ power must be non-negative, got {r}")
    perms: list[Perm] = []
    for chunk in tail.split(";"):
        if not chunk.strip():
            continue
        try:
            values = [int(t) for t in chunk.split()]
        except ValueError:
            raise BraidError(f"Malformed factor {chunk.strip()!r}") from None
        if len(values) != strands:
            raise BraidError(f"Factor {chunk.strip()!r} does not have {strands} entries")
        perms.append(PermutationBraid.from_one_line(values).perm)
    if len(perms) > 1:
        _left_weight(perms, 0, len(perms) - 2)
    inf, stripped = _strip(strands, -r, perms)
    return GarsideNormalForm._from_raw(strands, inf, stripped)
