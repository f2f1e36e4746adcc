"""Instantiation-preorder checks and the descending-chain demonstration.

``is_instance(s, t)`` decides whether some substitution turns each image
of ``s`` into a term equivalent to the corresponding image of ``t``: it
builds the matching problem ``{s(X) =? t(X)}`` with the variables of
``s``'s images as unknowns and ``t``'s images frozen (their variables
re-kinded as constants), flattens it, and runs the goal-oriented solver.
Matching is just unification with one fixed side, so the verdict is
exact, and the direction convention is: ``is_instance(s, t)`` means
``t`` is an instance of ``s`` (``s`` is at most ``t`` in the preorder).

The chain generator exhibits unification type zero on the problem
``{X and some r.Y =? some r.Y}``: starting from ``X -> some r.A,
Y -> A``, each step conjoins a fresh-variable layer (``some r.Z`` onto
``X``, ``Z`` onto ``Y``), producing unifiers that are strictly earlier
in the preorder.  ``verify_chain`` recomputes every obligation: each
step is a unifier, each successor precedes its predecessor (an explicit
one-variable witness is tried first, then the matcher), and the reverse
direction is refuted by an exhaustive matcher run.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .problems import (
    FRESH_PREFIX,
    SolveStatus,
    Substitution,
    UnificationProblem,
    flatten,
    is_unifier,
)
from .solver_goal import GoalConfig, solve_goal
from .subsumption import equivalent
from .terms import (
    Conj,
    ConceptName,
    ConceptTerm,
    Exists,
    Name,
    NameKind,
    conj,
    constant,
    exists,
    top_level_atoms,
    variable,
)


class InconclusiveError(RuntimeError):
    """A matcher run hit its budget, so no verdict is available."""


def _freeze(t: ConceptTerm) -> ConceptTerm:
    """Re-kind every variable as a constant of the same id, turning a
    matching target into ground data that cannot be instantiated."""
    if isinstance(t, Name):
        if t.name.is_variable:
            return Name(ConceptName(t.name.id, NameKind.CONSTANT))
        return t
    if isinstance(t, Exists):
        return Exists(t.role, _freeze(t.child))
    if isinstance(t, Conj):
        return conj(_freeze(c) for c in t.children)
    return t


def is_instance(
    s: Substitution,
    t: Substitution,
    variables: Iterable[ConceptName],
    max_nodes: int | None = None,
) -> bool:
    """True iff ``t`` is an instance of ``s`` over ``variables``.

    Variables in ``t``'s images are treated as fixed symbols; the
    unknowns are the variables of ``s``'s images.  Raises
    :class:`InconclusiveError` if the matcher exhausts ``max_nodes``.
    """
    s_exp = s.expand()
    t_exp = t.expand()
    equations = tuple(
        (s_exp.apply(Name(v)), _freeze(t_exp.apply(Name(v)))) for v in variables
    )
    problem = UnificationProblem.from_equations(equations)
    flat, _ = flatten(problem)
    result = solve_goal(flat, GoalConfig(max_nodes=max_nodes))
    if result.status is SolveStatus.BUDGET_EXCEEDED:
        raise InconclusiveError("matching search exhausted its budget")
    return result.is_sat


@dataclass(frozen=True)
class UnifierChain:
    """A strictly descending sequence of unifiers of one problem, with
    the fresh variables introduced between consecutive steps."""

    problem: UnificationProblem
    steps: tuple[Substitution, ...]
    fresh_vars: tuple[ConceptName, ...]


def type_zero_problem() -> UnificationProblem:
    """The one-equation problem whose unifiers admit no minimal complete
    set: ``X and some r.Y =? some r.Y``."""
    x, y = variable("X"), variable("Y")
    r = "r"
    return UnificationProblem.from_equations(
        ((conj([x, exists(r, y)]), exists(r, y)),)
    )


def type_zero_chain(k: int) -> UnifierChain:
    """A chain of ``k + 1`` unifiers, each strictly below the previous
    one in the instantiation preorder.

    Step 0 maps ``X -> some r.A`` and ``Y -> A``; step ``i + 1`` adds a
    fresh variable layer: ``some r.Z`` conjoined onto ``X``'s image and
    ``Z`` onto ``Y``'s.
    """
    if k < 0:
        raise ValueError("chain length must be nonnegative")
    problem = type_zero_problem()
    x, y = variable("X").name, variable("Y").name
    a = constant("A")
    steps = [Substitution.expanded({x: exists("r", a), y: a})]
    fresh: list[ConceptName] = []
    for i in range(1, k + 1):
        z = ConceptName(f"{FRESH_PREFIX}Z{i}", NameKind.VARIABLE)
        fresh.append(z)
        prev = steps[-1]
        x_img = conj([prev.bindings[x], exists("r", Name(z))])
        y_img = conj([prev.bindings[y], Name(z)])
        steps.append(Substitution.expanded({x: x_img, y: y_img}))
    return UnifierChain(problem, tuple(steps), tuple(fresh))


@dataclass(frozen=True)
class ChainCheck:
    name: str
    index: int
    status: str  # "pass" | "fail" | "inconclusive"
    detail: str = ""


@dataclass(frozen=True)
class ChainReport:
    checks: tuple[ChainCheck, ...]

    @property
    def ok(self) -> bool:
        return all(c.status == "pass" for c in self.checks)

    def to_text(self) -> str:
        lines = [
            f"[{c.status}] {c.name} step {c.index}"
            + (f" ({c.detail})" if c.detail else "")
            for c in self.checks
        ]
        lines.append("chain verified" if self.ok else "chain NOT verified")
        return "\n".join(lines)

    def to_kv_lines(self) -> list[str]:
        out = [
            f"check={c.name} index={c.index} status={c.status}"
            for c in self.checks
        ]
        out.append(f"result={'pass' if self.ok else 'fail'}")
        return out


def _witness_descends(chain: UnifierChain, i: int) -> bool:
    """Try the explicit witness for step i+1 <= step i: map the step's
    fresh variable to the first existential child of step i's X-image
    and compare images for equivalence."""
    if i >= len(chain.fresh_vars):
        return False
    z = chain.fresh_vars[i]
    prev = chain.steps[i].expand()
    succ = chain.steps[i + 1].expand()
    x = variable("X").name
    x_atoms = top_level_atoms(prev.apply(Name(x)))
    witnesses = [a.child for a in x_atoms if isinstance(a, Exists)]
    if not witnesses:
        return False
    lam = Substitution.expanded({z: witnesses[0]})
    return all(
        equivalent(lam.apply(succ.apply(Name(v))), prev.apply(Name(v)))
        for v in chain.problem.variables
    )


def verify_chain(chain: UnifierChain, max_nodes: int | None = None) -> ChainReport:
    """Recheck every obligation of a descending chain.

    For each step: it unifies the problem.  For each consecutive pair:
    the successor is at most the predecessor (witness fast path, matcher
    fallback), and the predecessor is NOT at most the successor, where
    only an exhaustive UNSAT counts; a budgeted matcher run is reported
    as inconclusive, never as a pass.
    """
    checks: list[ChainCheck] = []
    variables = chain.problem.variables
    for i, step in enumerate(chain.steps):
        good = is_unifier(step, chain.problem)
        checks.append(
            ChainCheck("unifier", i, "pass" if good else "fail",
                       "" if good else "substitution does not unify the problem")
        )
    for i in range(len(chain.steps) - 1):
        succ, pred = chain.steps[i + 1], chain.steps[i]
        if _witness_descends(chain, i):
            checks.append(ChainCheck("descending", i, "pass", "witness"))
        else:
            try:
                ok = is_instance(succ, pred, variables, max_nodes)
                checks.append(
                    ChainCheck("descending", i, "pass" if ok else "fail", "matcher")
                )
            except InconclusiveError:
                checks.append(ChainCheck("descending", i, "inconclusive", "budget"))
        try:
            reverse = is_instance(pred, succ, variables, max_nodes)
            checks.append(
                ChainCheck(
                    "strict", i, "fail" if reverse else "pass",
                    "predecessor is an instance of successor" if reverse else "",
                )
            )
        except InconclusiveError:
            checks.append(ChainCheck("strict", i, "inconclusive", "budget"))
    return ChainReport(tuple(checks))
