"""Length functions on Garside normal forms."""

from __future__ import annotations

from math import comb

from braid import BraidWord, GarsideNormalForm, normal_form

LENGTH_KINDS = ("rg", "naive")


def rg_length(u: GarsideNormalForm) -> int:
    """
    Reduced Garside length: r·C(N,2) plus the factors beyond the first min(r, q),
    minus the first min(r, q) factors, which cancel against the Δ^-r prefix.
    """
    r = u.r
    cancelled = min(r, len(u.factors))
    head = sum(f.inversions() for f in u.factors[:cancelled])
    tail = sum(f.inversions() for f in u.factors[cancelled:])
    return r * comb(u.strands, 2) + tail - head


def naive_garside_length(u: GarsideNormalForm) -> int:
    """Baseline: r·C(N,2) + Σ|p_i|."""
    return u.r * comb(u.strands, 2) + sum(f.inversions() for f in u.factors)


def length_of_word(word: BraidWord, kind: str = "rg") -> int:
    if kind not in LENGTH_KINDS:
        raise ValueError(f"Unknown length kind {kind!r}, expected one of {LENGTH_KINDS}")
    nf = normal_form(word)
    return rg_length(nf) if kind == "rg" else naive_garside_length(nf)
