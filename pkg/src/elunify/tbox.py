"""Acyclic TBoxes: concept definitions, dependency analysis, expansion,
and the translation between TBoxes and unification problems in
dag-solved form.

A TBox is a finite list of definitions ``A = C`` with pairwise distinct
left-hand sides.  Acyclicity (no defined name transitively depending on
itself) is what makes expansion well defined; expansion can blow up
exponentially, so it is exposed as an explicit, opt-in materialization.
Polynomial reasoning modulo a TBox lives in :mod:`elunify.subsumption`
(structure-shared subsumption) and in :func:`reduce_modulo_tbox` (the
linear-size reduction of unification modulo a TBox to plain
unification).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Mapping

from .terms import (
    Conj,
    ConceptName,
    ConceptTerm,
    Exists,
    Name,
    NameKind,
    conj,
    names,
)

if TYPE_CHECKING:  # avoid an import cycle; problems imports tbox eagerly
    from .problems import Substitution, UnificationProblem


class CyclicTBoxError(ValueError):
    """Raised when an operation requires an acyclic TBox."""


class NotDagSolvedError(ValueError):
    """Raised when a problem claimed to be in dag-solved form is not."""


@dataclass(frozen=True)
class ConceptDefinition:
    lhs: ConceptName
    rhs: ConceptTerm

    def __repr__(self) -> str:
        return f"{self.lhs.id} = {self.rhs!r}"


class TBox:
    """An ordered set of concept definitions with unique left-hand sides.

    Cyclic TBoxes can be represented (so cyclicity can be queried); the
    operations that need acyclicity raise :class:`CyclicTBoxError`.
    """

    __slots__ = ("definitions", "index")

    def __init__(self, definitions: Iterable[ConceptDefinition]):
        defs = tuple(definitions)
        index: dict[ConceptName, ConceptDefinition] = {}
        for d in defs:
            if d.lhs in index:
                raise ValueError(f"duplicate definition for {d.lhs.id}")
            index[d.lhs] = d
        self.definitions = defs
        self.index = index

    def __len__(self) -> int:
        return len(self.definitions)

    def __repr__(self) -> str:
        return "TBox(" + ", ".join(repr(d) for d in self.definitions) + ")"

    def defined_concepts(self) -> frozenset[ConceptName]:
        return frozenset(self.index)

    def definition_of(self, name: ConceptName) -> ConceptTerm | None:
        d = self.index.get(name)
        return d.rhs if d is not None else None


EMPTY_TBOX = TBox(())


def direct_dependencies(t: TBox) -> dict[ConceptName, frozenset[ConceptName]]:
    """For each defined concept, the defined concepts its body mentions."""
    defined = t.defined_concepts()
    return {d.lhs: names(d.rhs) & defined for d in t.definitions}


def depends_on(t: TBox) -> frozenset[tuple[ConceptName, ConceptName]]:
    """The transitive closure of "directly depends on", as a set of
    (dependent, dependency) pairs over defined concepts."""
    direct = direct_dependencies(t)
    closure: set[tuple[ConceptName, ConceptName]] = set()
    for start in direct:
        seen: set[ConceptName] = set()
        stack = list(direct[start])
        while stack:
            n = stack.pop()
            if n in seen:
                continue
            seen.add(n)
            closure.add((start, n))
            stack.extend(direct.get(n, ()))
    return frozenset(closure)


def is_acyclic(t: TBox) -> bool:
    """A TBox is acyclic iff no defined concept depends on itself."""
    return all(a != b for a, b in depends_on(t))


def _require_acyclic(t: TBox) -> None:
    if not is_acyclic(t):
        raise CyclicTBoxError("TBox contains a terminological cycle")


# Counter of materializing expansions, used by tests to certify that the
# polynomial code paths never fall back to full expansion.
_expand_calls = 0


def expand_call_count() -> int:
    return _expand_calls


def expand(c: ConceptTerm, t: TBox) -> ConceptTerm:
    """Exhaustively replace defined concepts in ``c`` by their bodies.

    The result contains only primitive concepts.  Expansions of defined
    names are shared while computing, but the returned term is fully
    materialized, which can be exponentially larger than ``t``; callers
    needing polynomial behavior should use the TBox-aware subsumption or
    :func:`reduce_modulo_tbox` instead.
    """
    global _expand_calls
    _expand_calls += 1
    _require_acyclic(t)
    memo: dict[ConceptName, ConceptTerm] = {}
    return _expand(c, t, memo)


def _expand(c: ConceptTerm, t: TBox, memo: dict) -> ConceptTerm:
    if isinstance(c, Name):
        body = t.definition_of(c.name)
        if body is None:
            return c
        done = memo.get(c.name)
        if done is None:
            done = _expand(body, t, memo)
            memo[c.name] = done
        return done
    if isinstance(c, Exists):
        return Exists(c.role, _expand(c.child, t, memo))
    if isinstance(c, Conj):
        return conj(_expand(x, t, memo) for x in c.children)
    return c


def definition_order(t: TBox) -> tuple[ConceptDefinition, ...]:
    """Definitions ordered so that each left-hand side is absent from all
    later right-hand sides: dependents first, ties broken by name."""
    _require_acyclic(t)
    direct = direct_dependencies(t)
    # Kahn's algorithm on the reversed edges emits dependency-free names
    # last; collecting in reverse yields dependents-first order.
    remaining = {n: set(deps) for n, deps in direct.items()}
    out: list[ConceptName] = []
    while remaining:
        # Emitted dependency-first and reversed at the end, so sort each
        # layer descending to leave ties in ascending name order.
        ready = sorted((n for n, deps in remaining.items() if not deps),
                       key=lambda n: (n.id, n.kind.value), reverse=True)
        for n in ready:
            out.append(n)
            del remaining[n]
        for deps in remaining.values():
            deps.difference_update(ready)
    out.reverse()
    return tuple(t.index[n] for n in out)


def _as_variable(name: ConceptName) -> ConceptName:
    return ConceptName(name.id, NameKind.VARIABLE)


def _rekind_defined(c: ConceptTerm, defined: frozenset[ConceptName]) -> ConceptTerm:
    """Replace defined concept constants by variables of the same id."""
    if isinstance(c, Name):
        if c.name in defined:
            return Name(_as_variable(c.name))
        return c
    if isinstance(c, Exists):
        return Exists(c.role, _rekind_defined(c.child, defined))
    if isinstance(c, Conj):
        return conj(_rekind_defined(x, defined) for x in c.children)
    return c


def problem_of_tbox(t: TBox) -> "UnificationProblem":
    """The unification problem reading each definition as an equation,
    with defined concepts re-kinded as variables.

    The equations come out in dependents-first order, so the result is
    in dag-solved form by construction.
    """
    from .problems import UnificationProblem

    _require_acyclic(t)
    defined = t.defined_concepts()
    equations = tuple(
        (Name(_as_variable(d.lhs)), _rekind_defined(d.rhs, defined))
        for d in definition_order(t)
    )
    return UnificationProblem.from_equations(equations)


def is_dag_solved(g: "UnificationProblem") -> bool:
    """Check the dag-solved form: every equation is ``X = C`` for
    pairwise distinct variables X, and no X occurs in its own or any
    later right-hand side."""
    seen: set[ConceptName] = set()
    lhs_vars: list[ConceptName] = []
    for lhs, _ in g.equations:
        if not (isinstance(lhs, Name) and lhs.name.is_variable):
            return False
        if lhs.name in seen:
            return False
        seen.add(lhs.name)
        lhs_vars.append(lhs.name)
    for i, (_, rhs) in enumerate(g.equations):
        occurring = names(rhs)
        if any(x in occurring for x in lhs_vars[: i + 1]):
            return False
    return True


def dag_solved_unifier(g: "UnificationProblem") -> "Substitution":
    """The most general unifier induced by a problem in dag-solved form,
    obtained by back-substituting the equations from last to first."""
    from .problems import Substitution

    if not is_dag_solved(g):
        raise NotDagSolvedError("problem is not in dag-solved form")
    images: dict[ConceptName, ConceptTerm] = {}
    for lhs, rhs in reversed(g.equations):
        images[lhs.name] = _substitute(rhs, images)
    return Substitution.expanded(images)


def _substitute(c: ConceptTerm, images: Mapping[ConceptName, ConceptTerm]) -> ConceptTerm:
    if isinstance(c, Name):
        return images.get(c.name, c)
    if isinstance(c, Exists):
        return Exists(c.role, _substitute(c.child, images))
    if isinstance(c, Conj):
        return conj(_substitute(x, images) for x in c.children)
    return c


def reduce_modulo_tbox(g: "UnificationProblem", t: TBox) -> "UnificationProblem":
    """Reduce unification modulo an acyclic TBox to plain unification.

    Returns the problem consisting of ``g``'s equations plus one
    equation per definition of ``t``, with the defined concepts treated
    as variables throughout.  The output size is linear in the sizes of
    ``g`` and ``t``, and it is solvable iff ``g`` is solvable modulo
    ``t`` (by substitutions that avoid the defined concepts).
    """
    from .problems import UnificationProblem

    _require_acyclic(t)
    if len(t) == 0:
        return g
    defined = t.defined_concepts()
    bad = {n.id for n in defined} & {v.id for v in g.variables}
    if bad:
        raise ValueError(
            "defined concepts must be constants in the problem: " + ", ".join(sorted(bad))
        )
    rewritten = tuple(
        (_rekind_defined(lhs, defined), _rekind_defined(rhs, defined))
        for lhs, rhs in g.equations
    )
    gamma_t = problem_of_tbox(t)
    return UnificationProblem.from_equations(
        rewritten + gamma_t.equations,
        extra_constants=g.constants - defined,
        extra_roles=g.roles,
    )
