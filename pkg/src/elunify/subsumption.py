"""Structural subsumption, equivalence and reduction of EL concept terms.

Subsumption between plain terms follows the recursive characterization:
``C`` is subsumed by ``D`` iff every top-level name of ``D`` appears at
the top level of ``C``, and every top-level existential ``some s.Dj`` of
``D`` is matched by some top-level ``some s.Ci`` of ``C`` whose child is
subsumed by ``Dj``.  Variables participate as opaque names.

Reduction rewrites a term to its normal form by absorbing top, merging
duplicate names, and absorbing an existential into a more specific one
over the same role.  Two terms are equivalent iff their reduced forms
are AC-identical, which the test suite cross-checks against the
two-sided subsumption definition.

Subsumption modulo an acyclic TBox never materializes the exponential
expansion: defined names are unfolded one surface level at a time into
sets of atoms, and verdicts are memoized per ordered pair of subterms,
giving a polynomial decision procedure.
"""

from __future__ import annotations

from .tbox import TBox, CyclicTBoxError, is_acyclic
from .terms import (
    Conj,
    ConceptTerm,
    Exists,
    Name,
    Top,
    conj,
    top_level_atoms,
)

# Verdict cache shared across calls.  Wiped wholesale when it grows past
# the bound; entries are tiny so this stays a constant-factor win for
# the solvers, which repeat queries heavily.
_CACHE: dict[tuple, bool] = {}
_CACHE_LIMIT = 1_000_000


def clear_caches() -> None:
    _CACHE.clear()


def subsumes(c: ConceptTerm, d: ConceptTerm) -> bool:
    """True iff ``c`` is subsumed by ``d`` (c's instances are d's)."""
    if c is d or c == d or isinstance(d, Top):
        return True
    if len(_CACHE) > _CACHE_LIMIT:
        _CACHE.clear()
    key = (c.key, d.key)
    hit = _CACHE.get(key)
    if hit is not None:
        return hit
    c_names, c_exists = _split(c)
    verdict = True
    for b in top_level_atoms(d):
        if isinstance(b, Name):
            if b not in c_names:
                verdict = False
                break
        else:
            if not any(
                e.role is b.role and subsumes(e.child, b.child) for e in c_exists
            ):
                verdict = False
                break
    _CACHE[key] = verdict
    return verdict


def _split(c: ConceptTerm) -> tuple[set, list]:
    names_ = set()
    exists_ = []
    for a in top_level_atoms(c):
        if isinstance(a, Name):
            names_.add(a)
        else:
            exists_.append(a)
    return names_, exists_


def equivalent(c: ConceptTerm, d: ConceptTerm) -> bool:
    return subsumes(c, d) and subsumes(d, c)


def strictly_subsumes(c: ConceptTerm, d: ConceptTerm) -> bool:
    return subsumes(c, d) and not subsumes(d, c)


def reduce(c: ConceptTerm) -> ConceptTerm:
    """The reduced form of ``c``: no rewrite rule applicable, children
    reduced first so existential absorption compares reduced children.

    On canonical representations, equivalent reduced atoms are
    identical, so the conjunction step only needs to drop syntactic
    duplicates and atoms strictly subsumed by another conjunct.
    """
    if isinstance(c, (Top, Name)):
        return c
    if isinstance(c, Exists):
        return Exists(c.role, reduce(c.child))
    kept: list[ConceptTerm] = []
    for a in c.children:
        r = reduce(a)
        if r not in kept:
            kept.append(r)
    survivors = [
        a
        for i, a in enumerate(kept)
        if not any(j != i and subsumes(b, a) for j, b in enumerate(kept))
    ]
    return conj(survivors)


def is_reduced(c: ConceptTerm) -> bool:
    """True iff no reduction rule applies anywhere in ``c``."""
    if isinstance(c, (Top, Name)):
        return True
    if isinstance(c, Exists):
        return is_reduced(c.child)
    ch = c.children
    if any(not is_reduced(a) for a in ch):
        return False
    for i, a in enumerate(ch):
        for j, b in enumerate(ch):
            if i != j and subsumes(a, b):
                return False
    return True


def equivalent_via_reduction(c: ConceptTerm, d: ConceptTerm) -> bool:
    """Equivalence decided by comparing reduced forms up to AC."""
    return reduce(c) == reduce(d)


class TBoxReasoner:
    """Subsumption between terms over an acyclic TBox, by memoized
    pairwise comparison of syntactic subterms with one-level unfolding
    of defined names.

    Each side is presented as its set of surface atoms: defined names
    are replaced by their bodies' surface atoms (computed once per
    name), so the top level never repeats atoms and stays linear in the
    TBox.  Pair verdicts are memoized; acyclicity makes the recursion
    well founded because both sides descend under an existential.
    """

    __slots__ = ("tbox", "_surface", "_memo")

    def __init__(self, tbox: TBox):
        if not is_acyclic(tbox):
            raise CyclicTBoxError("TBox contains a terminological cycle")
        self.tbox = tbox
        self._surface: dict = {}
        self._memo: dict[tuple, bool] = {}

    def surface_atoms(self, c: ConceptTerm) -> frozenset:
        """Top-level atoms of ``c`` with defined names expanded away:
        the result contains only primitive names and existentials (whose
        children may still mention defined names)."""
        cached = self._surface.get(c)
        if cached is not None:
            return cached
        out: set = set()
        stack = list(top_level_atoms(c))
        seen_names = set()
        while stack:
            a = stack.pop()
            if isinstance(a, Name):
                body = self.tbox.definition_of(a.name)
                if body is None:
                    out.add(a)
                elif a.name not in seen_names:
                    seen_names.add(a.name)
                    stack.extend(top_level_atoms(body))
            else:
                out.add(a)
        result = frozenset(out)
        self._surface[c] = result
        return result

    def subsumes(self, c: ConceptTerm, d: ConceptTerm) -> bool:
        if c == d:
            return True
        key = (c.key, d.key)
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        cs = self.surface_atoms(c)
        ds = self.surface_atoms(d)
        c_names = {a for a in cs if isinstance(a, Name)}
        c_exists = [a for a in cs if isinstance(a, Exists)]
        verdict = True
        for b in ds:
            if isinstance(b, Name):
                if b not in c_names:
                    verdict = False
                    break
            else:
                if not any(
                    e.role is b.role and self.subsumes(e.child, b.child)
                    for e in c_exists
                ):
                    verdict = False
                    break
        self._memo[key] = verdict
        return verdict

    def equivalent(self, c: ConceptTerm, d: ConceptTerm) -> bool:
        return self.subsumes(c, d) and self.subsumes(d, c)


def subsumes_wrt_tbox(t: TBox, c: ConceptTerm, d: ConceptTerm) -> bool:
    """Decide subsumption w.r.t. an acyclic TBox without expanding it."""
    return TBoxReasoner(t).subsumes(c, d)


def equivalent_wrt_tbox(t: TBox, c: ConceptTerm, d: ConceptTerm) -> bool:
    r = TBoxReasoner(t)
    return r.subsumes(c, d) and r.subsumes(d, c)
