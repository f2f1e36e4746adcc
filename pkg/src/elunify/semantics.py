"""Finite interpretations for EL: the evaluator used as a refutation
oracle for subsumption claims, plus a seeded random model generator.

A finite model can disprove a subsumption (one element in the left
extension but not the right) but never prove one, so the test harness
uses this module only in the disproving direction.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .tbox import TBox
from .terms import Conj, ConceptName, ConceptTerm, Exists, Name, RoleName, Top


@dataclass(frozen=True)
class Interpretation:
    """A finite interpretation: a domain of element ids, and extensions
    for concept constants and roles (missing entries mean empty)."""

    domain: frozenset[int]
    concept_ext: Mapping[ConceptName, frozenset[int]] = field(default_factory=dict)
    role_ext: Mapping[RoleName, frozenset[tuple[int, int]]] = field(default_factory=dict)

    def __post_init__(self):
        for ext in self.concept_ext.values():
            if not ext <= self.domain:
                raise ValueError("concept extension mentions elements outside the domain")
        for pairs in self.role_ext.values():
            for x, y in pairs:
                if x not in self.domain or y not in self.domain:
                    raise ValueError("role extension mentions elements outside the domain")


def evaluate(t: ConceptTerm, interp: Interpretation) -> frozenset[int]:
    """The extension of a ground term: top is the whole domain,
    conjunction intersects, and an existential collects the elements
    with a role successor inside the child's extension."""
    if isinstance(t, Top):
        return interp.domain
    if isinstance(t, Name):
        if t.name.is_variable:
            raise ValueError(f"cannot evaluate term containing variable {t.name.id}")
        return interp.concept_ext.get(t.name, frozenset())
    if isinstance(t, Exists):
        child = evaluate(t.child, interp)
        pairs = interp.role_ext.get(t.role, frozenset())
        return frozenset(x for x, y in pairs if y in child)
    assert isinstance(t, Conj)
    out = interp.domain
    for c in t.children:
        out = out & evaluate(c, interp)
        if not out:
            break
    return out


def is_model(interp: Interpretation, t: TBox) -> bool:
    """True iff every definition holds as an equality of extensions."""
    return all(
        interp.concept_ext.get(d.lhs, frozenset()) == evaluate(d.rhs, interp)
        for d in t.definitions
    )


def random_interpretation(
    constants: Iterable[ConceptName],
    roles: Iterable[RoleName],
    max_domain: int,
    seed: int,
) -> Interpretation:
    """A reproducible pseudo-random interpretation over the signature.

    Uses the stdlib Mersenne Twister seeded with ``seed``; names are
    processed in sorted order so the result is platform independent.
    """
    if max_domain < 1:
        raise ValueError("max_domain must be at least 1")
    rng = random.Random(seed)
    n = rng.randint(1, max_domain)
    domain = frozenset(range(n))
    concept_ext = {}
    for name in sorted(constants, key=lambda c: (c.id, c.kind.value)):
        concept_ext[name] = frozenset(x for x in range(n) if rng.random() < 0.5)
    role_ext = {}
    for r in sorted(roles, key=lambda r: r.id):
        role_ext[r] = frozenset(
            (x, y) for x in range(n) for y in range(n) if rng.random() < 0.4
        )
    return Interpretation(domain, concept_ext, role_ext)
