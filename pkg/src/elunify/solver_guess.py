"""Systematic guess-and-test solver for flat EL-unification problems.

The search enumerates, per variable, a set of non-variable atoms of the
problem (the candidate assignment), rejects cyclic assignments, and
tests whether the induced dag substitution unifies the problem.  The
enumeration is deterministic: variables in term order, per-variable
subsets by increasing cardinality then lexicographically by atom order,
so small assignments are found first.

Pruning never changes verdicts: branches are cut on assignment cycles,
and an equation is checked as soon as every variable it transitively
depends on (through the partial assignment) has been fixed.  Candidate
checks run against the assignment-as-TBox, never against the
materialized expansion.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

from .problems import (
    Assignment,
    SolveResult,
    SolveStatus,
    Substitution,
    UnificationProblem,
    is_unifier,
    substitution_of_assignment,
)
from .subsumption import TBoxReasoner, reduce
from .tbox import ConceptDefinition, TBox
from .terms import Atom, ConceptName, Name, conj, names


class BudgetExceededError(RuntimeError):
    """Enumeration ran out of budget before completing."""


@dataclass(frozen=True)
class GuessConfig:
    """``max_assignments`` budgets the number of candidate per-variable
    subset choices explored (search steps), not just completed
    assignments; exceeding it yields BUDGET_EXCEEDED, never UNSAT."""

    max_assignments: int | None = None
    enumerate_all: bool = False
    jobs: int = 1

    def __post_init__(self):
        if self.max_assignments is not None and self.max_assignments <= 0:
            raise ValueError("max_assignments must be positive")
        if self.jobs < 1:
            raise ValueError("jobs must be at least 1")


class _Budget:
    __slots__ = ("left",)

    def __init__(self, limit: int | None):
        self.left = limit

    def spend(self) -> bool:
        if self.left is None:
            return True
        if self.left == 0:
            return False
        self.left -= 1
        return True


class _Search:
    """One deterministic DFS over assignments for a fixed problem.

    With ``exhaustive`` set the whole space is scanned and every
    verifying substitution is appended to ``found``; otherwise the
    search stops at the first one.
    """

    def __init__(self, g: UnificationProblem, budget: _Budget, exhaustive: bool = False):
        if not g.is_flat():
            raise ValueError("solver requires a flat problem")
        self.problem = g
        self.budget = budget
        self.exhaustive = exhaustive
        self.found: list[Substitution] = []
        self.variables = g.sorted_variables()
        self.atoms = g.non_variable_atoms()
        self.subsets = _subset_order(self.atoms)
        # Variables occurring directly in each equation (either side,
        # top level or inside atoms).
        self.eq_vars = [
            frozenset(n for n in (names(l) | names(r)) if n.is_variable)
            for l, r in g.equations
        ]
        self.assignment: dict[ConceptName, tuple[Atom, ...]] = {}

    # -- assignment bookkeeping ---------------------------------------

    def _makes_cycle(self, v: ConceptName, chosen: tuple[Atom, ...]) -> bool:
        # v depends on w if w occurs in a chosen atom; only already
        # assigned variables contribute outgoing edges, so a cycle can
        # appear iff v is reachable from one of its new dependencies.
        targets = set()
        for a in chosen:
            targets |= a.vars
        if v in targets:
            return True
        seen = set()
        stack = [w for w in targets if w in self.assignment]
        while stack:
            w = stack.pop()
            if w in seen:
                continue
            seen.add(w)
            for a in self.assignment.get(w, ()):
                for u in a.vars:
                    if u == v:
                        return True
                    if u in self.assignment and u not in seen:
                        stack.append(u)
        return False

    def _closure_assigned(self, start: frozenset[ConceptName]) -> bool:
        """Are all variables reachable from ``start`` through the
        current assignment already assigned?"""
        seen = set()
        stack = list(start)
        while stack:
            v = stack.pop()
            if v in seen:
                continue
            seen.add(v)
            chosen = self.assignment.get(v)
            if chosen is None:
                return False
            for a in chosen:
                stack.extend(a.vars)
        return True

    def _equations_ok(self, to_check: list[int]) -> bool:
        if not to_check:
            return True
        defs = tuple(
            ConceptDefinition(v, conj(ats))
            for v, ats in sorted(self.assignment.items(), key=lambda kv: kv[0].id)
        )
        reasoner = TBoxReasoner(TBox(defs))
        return all(reasoner.equivalent(*self.problem.equations[i]) for i in to_check)

    # -- enumeration ----------------------------------------------------

    def run(self) -> SolveStatus:
        pending = list(range(len(self.problem.equations)))
        return self._extend(0, pending)

    def _extend(self, depth: int, pending: list[int]) -> SolveStatus:
        if depth == len(self.variables):
            if not self._equations_ok(pending):
                return SolveStatus.UNSAT
            sub = substitution_of_assignment(
                Assignment({v: frozenset(ats) for v, ats in self.assignment.items()})
            )
            self.found.append(sub)
            return SolveStatus.UNSAT if self.exhaustive else SolveStatus.SAT
        v = self.variables[depth]
        for chosen in self.subsets:
            if not self.budget.spend():
                return SolveStatus.BUDGET_EXCEEDED
            if self._makes_cycle(v, chosen):
                continue
            self.assignment[v] = chosen
            now, later = [], []
            for i in pending:
                (now if self._closure_assigned(self.eq_vars[i]) else later).append(i)
            if self._equations_ok(now):
                status = self._extend(depth + 1, later)
                if status is not SolveStatus.UNSAT:
                    del self.assignment[v]
                    return status
            del self.assignment[v]
        return SolveStatus.UNSAT


def _subset_order(atoms: tuple[Atom, ...]) -> tuple[tuple[Atom, ...], ...]:
    out = []
    for size in range(len(atoms) + 1):
        out.extend(combinations(atoms, size))
    return tuple(out)


def solve_guess(g: UnificationProblem, cfg: GuessConfig | None = None) -> SolveResult:
    """Decide solvability of a flat problem by systematic assignment
    search.  SAT results carry a dag substitution that is re-verified
    against the problem before being returned."""
    cfg = cfg or GuessConfig()
    if cfg.jobs > 1:
        return _solve_parallel(g, cfg)
    search = _Search(g, _Budget(cfg.max_assignments))
    status = search.run()
    stats = {"variables": len(search.variables), "atoms": len(search.atoms)}
    if search.found:
        sub = search.found[0]
        if not is_unifier(sub, g):
            raise RuntimeError("internal error: candidate failed the unifier check")
        return SolveResult(SolveStatus.SAT, sub, stats)
    return SolveResult(status, None, stats)


def _solve_parallel(g: UnificationProblem, cfg: GuessConfig) -> SolveResult:
    """Split the search on the first variable's subset choice.  Workers
    share only immutable problem data; partition results are merged in
    enumeration order, so a SAT verdict reports the same substitution
    the serial search would find first.  Budgets apply per partition."""
    from concurrent.futures import ThreadPoolExecutor

    probe = _Search(g, _Budget(None))
    if not probe.variables:
        return solve_guess(g, GuessConfig(cfg.max_assignments, cfg.enumerate_all))
    first = probe.variables[0]

    def part(chosen: tuple[Atom, ...]) -> tuple[SolveStatus, Substitution | None]:
        search = _Search(g, _Budget(cfg.max_assignments))
        if search._makes_cycle(first, chosen):
            return (SolveStatus.UNSAT, None)
        search.assignment[first] = chosen
        now, later = [], []
        for i in range(len(g.equations)):
            (now if search._closure_assigned(search.eq_vars[i]) else later).append(i)
        if not search._equations_ok(now):
            return (SolveStatus.UNSAT, None)
        status = search._extend(1, later)
        if search.found:
            return (SolveStatus.SAT, search.found[0])
        return (status, None)

    with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
        results = list(pool.map(part, probe.subsets))
    stats = {"variables": len(probe.variables), "atoms": len(probe.atoms)}
    for status, sub in results:
        if status is SolveStatus.SAT:
            assert sub is not None
            if not is_unifier(sub, g):
                raise RuntimeError("internal error: candidate failed the unifier check")
            return SolveResult(SolveStatus.SAT, sub, stats)
        if status is SolveStatus.BUDGET_EXCEEDED:
            return SolveResult(SolveStatus.BUDGET_EXCEEDED, None, stats)
    return SolveResult(SolveStatus.UNSAT, None, stats)


def enumerate_unifiers(
    g: UnificationProblem, cfg: GuessConfig | None = None
) -> list[Substitution]:
    """All unifiers induced by acyclic assignments, deduplicated up to
    pointwise equivalence of images.  Exponential; meant for small
    problems and for certifying solver output."""
    cfg = cfg or GuessConfig(enumerate_all=True)
    search = _Search(g, _Budget(cfg.max_assignments), exhaustive=True)
    status = search.run()
    if status is SolveStatus.BUDGET_EXCEEDED:
        raise BudgetExceededError("enumeration budget exhausted")
    variables = g.sorted_variables()
    seen: set[tuple] = set()
    out: list[Substitution] = []
    for sub in search.found:
        if not is_unifier(sub, g):
            raise RuntimeError("internal error: candidate failed the unifier check")
        expanded = sub.expand()
        key = tuple(reduce(expanded.apply(Name(v))).key for v in variables)
        if key not in seen:
            seen.add(key)
            out.append(sub)
    return out
