"""Unification problems, flattening, substitutions and unifier checks.

A unification problem is a list of equations between concept terms plus
its signature (variables, constants, roles).  Solvers work on *flat*
problems, where both sides of every equation are conjunctions of flat
atoms; :func:`flatten` performs the standard polynomial transformation,
introducing fresh ``_v``-prefixed variables for nested subterms.

Substitutions come in two forms.  An *expanded* substitution maps each
variable to a term free of bound variables.  A *dag* substitution's
bindings may reference other bound variables; read as definitions they
form an acyclic TBox, which lets :func:`is_unifier` check candidate
solutions in polynomial time without materializing the (possibly
exponential) expansion.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .subsumption import TBoxReasoner, equivalent, subsumes
from .tbox import ConceptDefinition, TBox
from .terms import (
    Atom,
    Conj,
    ConceptName,
    ConceptTerm,
    Exists,
    Name,
    NameKind,
    RoleName,
    Top,
    atoms as term_atoms,
    conj,
    is_flat_term,
    is_variable_atom,
    names,
    roles,
    top_level_atoms,
)

FRESH_PREFIX = "_v"


class UnificationProblem:
    """Equations between concept terms together with the signature."""

    __slots__ = ("equations", "variables", "constants", "roles")

    def __init__(
        self,
        equations: tuple[tuple[ConceptTerm, ConceptTerm], ...],
        variables: frozenset[ConceptName],
        constants: frozenset[ConceptName],
        roles: frozenset[RoleName],
    ):
        shared = {v.id for v in variables} & {c.id for c in constants}
        if shared:
            raise ValueError(
                "names used both as variable and constant: " + ", ".join(sorted(shared))
            )
        self.equations = equations
        self.variables = variables
        self.constants = constants
        self.roles = roles

    @classmethod
    def from_equations(
        cls,
        equations: Iterable[tuple[ConceptTerm, ConceptTerm]],
        extra_constants: Iterable[ConceptName] = (),
        extra_roles: Iterable[RoleName] = (),
        extra_variables: Iterable[ConceptName] = (),
    ) -> "UnificationProblem":
        eqs = tuple(equations)
        vs: set[ConceptName] = set(extra_variables)
        cs: set[ConceptName] = set(extra_constants)
        rs: set[RoleName] = set(extra_roles)
        for lhs, rhs in eqs:
            for side in (lhs, rhs):
                for n in names(side):
                    (vs if n.is_variable else cs).add(n)
                rs |= roles(side)
        return cls(eqs, frozenset(vs), frozenset(cs), frozenset(rs))

    def is_flat(self) -> bool:
        return all(
            is_flat_term(l) and is_flat_term(r) for l, r in self.equations
        )

    def sorted_variables(self) -> tuple[ConceptName, ...]:
        return tuple(sorted(self.variables, key=lambda v: (v.id, v.kind.value)))

    def non_variable_atoms(self) -> tuple[Atom, ...]:
        """All non-variable atoms of the problem, in term order."""
        out: set[Atom] = set()
        for lhs, rhs in self.equations:
            out |= term_atoms(lhs)
            out |= term_atoms(rhs)
        return tuple(sorted((a for a in out if not is_variable_atom(a)), key=lambda a: a.key))

    def __repr__(self) -> str:
        eqs = ", ".join(f"{l!r} =? {r!r}" for l, r in self.equations)
        return f"UnificationProblem({eqs})"


@dataclass(frozen=True)
class FlatEquation:
    """A flat equation as four sets: the variables and the non-variable
    atoms of each side's top-level conjunction.  Solved means the two
    atom sets coincide."""

    left_vars: frozenset[ConceptName]
    left_atoms: frozenset[Atom]
    right_vars: frozenset[ConceptName]
    right_atoms: frozenset[Atom]

    @classmethod
    def from_terms(cls, lhs: ConceptTerm, rhs: ConceptTerm) -> "FlatEquation":
        if not (is_flat_term(lhs) and is_flat_term(rhs)):
            raise ValueError("equation sides must be flat")
        lv, la = _split_side(lhs)
        rv, ra = _split_side(rhs)
        return cls(lv, la, rv, ra)

    def is_solved(self) -> bool:
        return self.left_atoms == self.right_atoms


def _split_side(t: ConceptTerm) -> tuple[frozenset, frozenset]:
    vs = set()
    ats = set()
    for a in top_level_atoms(t):
        if is_variable_atom(a):
            vs.add(a.name)
        else:
            ats.add(a)
    return frozenset(vs), frozenset(ats)


@dataclass(frozen=True)
class FlattenRecord:
    """Bookkeeping from flattening: the original variables and the fresh
    variables introduced, with the subterm each one names."""

    original_variables: frozenset[ConceptName]
    fresh: tuple[tuple[ConceptName, ConceptTerm], ...]

    def fresh_variables(self) -> frozenset[ConceptName]:
        return frozenset(v for v, _ in self.fresh)

    def project(self, s: "Substitution", keep_fresh: bool = False) -> "Substitution":
        """Restrict a unifier of the flat problem to the original
        variables (fresh flattening variables are hidden by default)."""
        if keep_fresh:
            return s
        return project_substitution(s, self.original_variables)


def fresh_variable_name(i: int) -> str:
    return f"{FRESH_PREFIX}{i}"


def flatten(g: UnificationProblem) -> tuple[UnificationProblem, FlattenRecord]:
    """Transform ``g`` into a flat problem solvable iff ``g`` is.

    Bottom-up: every non-flat atom ``some r.C`` is replaced by
    ``some r.X`` for a fresh variable ``X`` memoized per distinct ``C``
    (modulo AC), and the defining equation ``X =? C'`` is added, where
    ``C'`` is the flattened body.
    """
    memo: dict[ConceptTerm, ConceptName] = {}
    aux: list[tuple[ConceptTerm, ConceptTerm]] = []
    counter = itertools.count(1)

    def flat_term(t: ConceptTerm) -> ConceptTerm:
        return conj(flat_atom(a) for a in top_level_atoms(t))

    def flat_atom(a: Atom) -> Atom:
        if isinstance(a, Name):
            return a
        if isinstance(a.child, (Name, Top)):
            return a
        v = memo.get(a.child)
        if v is None:
            v = ConceptName(fresh_variable_name(next(counter)), NameKind.VARIABLE)
            memo[a.child] = v
            aux.append((Name(v), flat_term(a.child)))
        return Exists(a.role, Name(v))

    flat_eqs = [(flat_term(l), flat_term(r)) for l, r in g.equations]
    flat_eqs.extend(aux)
    out = UnificationProblem.from_equations(
        flat_eqs, extra_constants=g.constants, extra_roles=g.roles
    )
    record = FlattenRecord(
        g.variables, tuple((memo[t], t) for t in sorted(memo, key=lambda t: t.key))
    )
    return out, record


class SubstitutionForm(enum.Enum):
    EXPANDED = "expanded"
    DAG = "dag"


class CyclicAssignmentError(ValueError):
    """Raised when dag bindings or an assignment form a dependency cycle."""


def _binding_cycle(bindings: Mapping[ConceptName, ConceptTerm]) -> bool:
    graph = {v: img.vars & bindings.keys() for v, img in bindings.items()}
    seen: dict[ConceptName, int] = {}  # 1 = on stack, 2 = done

    def visit(v) -> bool:
        state = seen.get(v)
        if state == 1:
            return True
        if state == 2:
            return False
        seen[v] = 1
        if any(visit(w) for w in graph.get(v, ())):
            return True
        seen[v] = 2
        return False

    return any(visit(v) for v in bindings)


class Substitution:
    """A mapping from concept variables to concept terms."""

    __slots__ = ("bindings", "form")

    def __init__(self, bindings: Mapping[ConceptName, ConceptTerm], form: SubstitutionForm):
        for v in bindings:
            if not v.is_variable:
                raise ValueError(f"substitution binds non-variable {v.id}")
        bindings = dict(bindings)
        if form is SubstitutionForm.EXPANDED:
            bound = bindings.keys()
            for v, img in bindings.items():
                if img.vars & bound:
                    raise ValueError(
                        f"expanded substitution image of {v.id} mentions bound variables"
                    )
        else:
            if _binding_cycle(bindings):
                raise CyclicAssignmentError("dag substitution bindings are cyclic")
        self.bindings = bindings
        self.form = form

    @classmethod
    def expanded(cls, bindings: Mapping[ConceptName, ConceptTerm]) -> "Substitution":
        return cls(bindings, SubstitutionForm.EXPANDED)

    @classmethod
    def dag(cls, bindings: Mapping[ConceptName, ConceptTerm]) -> "Substitution":
        return cls(bindings, SubstitutionForm.DAG)

    @classmethod
    def identity(cls) -> "Substitution":
        return cls({}, SubstitutionForm.EXPANDED)

    def __repr__(self) -> str:
        items = ", ".join(
            f"{v.id} -> {img!r}"
            for v, img in sorted(self.bindings.items(), key=lambda kv: kv[0].id)
        )
        return "{" + items + "}"

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Substitution)
            and self.form == other.form
            and self.bindings == other.bindings
        )

    __hash__ = None  # type: ignore[assignment]

    def domain(self) -> frozenset[ConceptName]:
        return frozenset(self.bindings)

    def apply(self, t: ConceptTerm) -> ConceptTerm:
        """Homomorphic application; a dag substitution unfolds its
        definitions on the fly (this materializes the image)."""
        if self.form is SubstitutionForm.EXPANDED:
            return _substitute(t, self.bindings)
        memo: dict[ConceptName, ConceptTerm] = {}

        def image(v: ConceptName) -> ConceptTerm:
            done = memo.get(v)
            if done is None:
                done = walk(self.bindings[v])
                memo[v] = done
            return done

        def walk(t: ConceptTerm) -> ConceptTerm:
            if isinstance(t, Name):
                return image(t.name) if t.name in self.bindings else t
            if isinstance(t, Exists):
                return Exists(t.role, walk(t.child))
            if isinstance(t, Conj):
                return conj(walk(c) for c in t.children)
            return t

        return walk(t)

    def expand(self) -> "Substitution":
        """The expanded form of a dag substitution."""
        if self.form is SubstitutionForm.EXPANDED:
            return self
        images = {v: self.apply(Name(v)) for v in self.bindings}
        return Substitution.expanded(images)

    def as_tbox(self) -> TBox:
        """Dag bindings read as an acyclic TBox (structure sharing)."""
        defs = tuple(
            ConceptDefinition(v, img)
            for v, img in sorted(self.bindings.items(), key=lambda kv: (kv[0].id,))
        )
        return TBox(defs)

    def is_ground_over(self, variables: Iterable[ConceptName]) -> bool:
        exp = self.expand()
        return all(exp.apply(Name(v)).is_ground for v in variables)

    def restrict(self, variables: Iterable[ConceptName]) -> "Substitution":
        keep = set(variables)
        return Substitution(
            {v: img for v, img in self.bindings.items() if v in keep}, self.form
        )


def project_substitution(
    s: Substitution, keep_variables: Iterable[ConceptName]
) -> Substitution:
    """Drop bindings outside ``keep_variables``.  Dag-form bindings keep
    any definitions they transitively reference, since dropping those
    would break the structure sharing."""
    keep = set(keep_variables) & set(s.bindings)
    if s.form is SubstitutionForm.DAG:
        queue = list(keep)
        while queue:
            v = queue.pop()
            img = s.bindings.get(v)
            if img is None:
                continue
            for w in img.vars:
                if w in s.bindings and w not in keep:
                    keep.add(w)
                    queue.append(w)
    return Substitution(
        {v: img for v, img in s.bindings.items() if v in keep}, s.form
    )


def _substitute(t: ConceptTerm, bindings: Mapping[ConceptName, ConceptTerm]) -> ConceptTerm:
    if isinstance(t, Name):
        return bindings.get(t.name, t)
    if isinstance(t, Exists):
        return Exists(t.role, _substitute(t.child, bindings))
    if isinstance(t, Conj):
        return conj(_substitute(c, bindings) for c in t.children)
    return t


def apply(s: Substitution, t: ConceptTerm) -> ConceptTerm:
    return s.apply(t)


@dataclass(frozen=True)
class Assignment:
    """Per-variable sets of non-variable atoms, the guessed shape of a
    candidate unifier.  Acyclic assignments induce a dag substitution."""

    sets: Mapping[ConceptName, frozenset[Atom]]

    def dependency_graph(self) -> dict[ConceptName, frozenset[ConceptName]]:
        return {
            v: frozenset().union(*(a.vars for a in ats)) if ats else frozenset()
            for v, ats in self.sets.items()
        }

    def is_acyclic(self) -> bool:
        bindings = {v: conj(sorted(ats, key=lambda a: a.key)) for v, ats in self.sets.items()}
        return not _binding_cycle(bindings)


def substitution_of_assignment(a: Assignment) -> Substitution:
    """The dag substitution induced by an acyclic assignment: an empty
    set maps its variable to top, otherwise to the conjunction."""
    bindings = {
        v: conj(sorted(ats, key=lambda at: at.key)) for v, ats in a.sets.items()
    }
    if _binding_cycle(bindings):
        raise CyclicAssignmentError("assignment is cyclic")
    return Substitution.dag(bindings)


def is_unifier(s: Substitution, g: UnificationProblem) -> bool:
    """Does ``s`` make both sides of every equation equivalent?

    Dag substitutions are checked against their definition TBox in
    polynomial time; expanded substitutions by applying and comparing.
    """
    if s.form is SubstitutionForm.DAG:
        reasoner = TBoxReasoner(s.as_tbox())
        return all(reasoner.equivalent(l, r) for l, r in g.equations)
    return all(equivalent(s.apply(l), s.apply(r)) for l, r in g.equations)


class Comparison(enum.Enum):
    """Outcome of comparing two ground substitutions pointwise by
    subsumption of images (the specificity order on unifiers)."""

    EQUAL = "equal"
    GREATER = "greater"  # first is strictly more specific
    LESS = "less"
    INCOMPARABLE = "incomparable"

    @property
    def greater_or_equal(self) -> bool:
        return self in (Comparison.EQUAL, Comparison.GREATER)

    @property
    def less_or_equal(self) -> bool:
        return self in (Comparison.EQUAL, Comparison.LESS)


def compare_ground(
    s: Substitution, t: Substitution, variables: Iterable[ConceptName]
) -> Comparison:
    """Product-order comparison: ``s`` is at least ``t`` iff the image
    of every variable under ``s`` is subsumed by its image under ``t``;
    strictly greater additionally requires strictness somewhere."""
    vs = tuple(variables)
    s_exp = s.expand()
    t_exp = t.expand()
    s_images = {v: s_exp.apply(Name(v)) for v in vs}
    t_images = {v: t_exp.apply(Name(v)) for v in vs}
    for v in vs:
        if not (s_images[v].is_ground and t_images[v].is_ground):
            raise ValueError(f"compare_ground requires ground images; {v.id} is not")
    ge = all(subsumes(s_images[v], t_images[v]) for v in vs)
    le = all(subsumes(t_images[v], s_images[v]) for v in vs)
    if ge and le:
        return Comparison.EQUAL
    if ge:
        return Comparison.GREATER
    if le:
        return Comparison.LESS
    return Comparison.INCOMPARABLE


def substitutions_equivalent_on(
    s: Substitution, t: Substitution, variables: Iterable[ConceptName]
) -> bool:
    """Pointwise equivalence of images over the given variables."""
    s_exp = s.expand()
    t_exp = t.expand()
    return all(
        equivalent(s_exp.apply(Name(v)), t_exp.apply(Name(v))) for v in variables
    )


class SolveStatus(enum.Enum):
    SAT = "sat"
    UNSAT = "unsat"
    BUDGET_EXCEEDED = "budget-exceeded"


@dataclass
class SolveResult:
    """Outcome of a solver run.  ``substitution`` is set iff SAT, and
    always passes :func:`is_unifier` for the problem it was solved on."""

    status: SolveStatus
    substitution: Substitution | None = None
    stats: dict = field(default_factory=dict)
    trace: tuple[str, ...] = ()

    @property
    def is_sat(self) -> bool:
        return self.status is SolveStatus.SAT
