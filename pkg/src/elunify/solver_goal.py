"""Goal-oriented solver for flat EL-unification problems.

Equations are kept as four sets (variables and non-variable atoms per
side); an equation is solved when both atom sets coincide.  The solver
maintains a per-variable assignment of non-variable atoms, keeps every
equation expanded with respect to it, and repeatedly attacks an
unsolved atom of an unsolved equation with one of three rules:

  * eager assignment -- mandatory, fires when one side of an equation
    has no atoms and a single unfinished variable remains: that
    variable's assignment is forced to the other side's atoms and the
    variable is frozen ("finished");
  * decomposition    -- an unsolved ``some r.C`` is matched against a
    chosen ``some r.B`` on the other side; the constraint that B's
    value be more specific than C's is recorded as the derived equation
    ``C and B =? B``;
  * extension        -- the unsolved atom is pushed into the assignment
    of a chosen unfinished variable on the other side.

Which equation and atom to attack is a don't-care choice (never
backtracked); which partner atom or variable to use is a don't-know
choice explored by depth-first search with trail-based undo.  Rules that
would make the assignment cyclic fail the current branch only.  Every
rule application keeps the expansion invariant; counters enforce the
polynomial per-branch bounds, and SAT results are re-verified.
"""

from __future__ import annotations

import enum
import sys
from dataclasses import dataclass

from .problems import (
    SolveResult,
    SolveStatus,
    Substitution,
    UnificationProblem,
    is_unifier,
)
from .terms import (
    Atom,
    ConceptName,
    Exists,
    atoms as term_atoms,
    conj,
    is_variable_atom,
    top_level_atoms,
)

sys.setrecursionlimit(max(sys.getrecursionlimit(), 20_000))


class RuleOutcome(enum.Enum):
    APPLIED = "applied"
    FAILED = "failed"
    NOT_APPLICABLE = "not-applicable"


class Side(enum.Enum):
    LEFT = "L"
    RIGHT = "R"

    @property
    def opposite(self) -> "Side":
        return Side.RIGHT if self is Side.LEFT else Side.LEFT


@dataclass(frozen=True)
class GoalConfig:
    """``max_nodes`` budgets the total number of rule applications over
    the whole search (including backtracked ones)."""

    max_nodes: int | None = None
    trace: bool = False
    validate: bool = True

    def __post_init__(self):
        if self.max_nodes is not None and self.max_nodes <= 0:
            raise ValueError("max_nodes must be positive")


class _Eq:
    """Mutable four-set equation."""

    __slots__ = ("left_vars", "left_atoms", "right_vars", "right_atoms")

    def __init__(self, left_vars, left_atoms, right_vars, right_atoms):
        self.left_vars: set[ConceptName] = set(left_vars)
        self.left_atoms: set[Atom] = set(left_atoms)
        self.right_vars: set[ConceptName] = set(right_vars)
        self.right_atoms: set[Atom] = set(right_atoms)

    def vars_of(self, side: Side) -> set[ConceptName]:
        return self.left_vars if side is Side.LEFT else self.right_vars

    def atoms_of(self, side: Side) -> set[Atom]:
        return self.left_atoms if side is Side.LEFT else self.right_atoms

    def is_solved(self) -> bool:
        return self.left_atoms == self.right_atoms

    def unsolved_atoms(self) -> set[Atom]:
        return self.left_atoms ^ self.right_atoms

    def contains(self, v: ConceptName) -> bool:
        return v in self.left_vars or v in self.right_vars


def _sides_of_term(t) -> tuple[set, set]:
    vs, ats = set(), set()
    for a in top_level_atoms(t):
        if is_variable_atom(a):
            vs.add(a.name)
        else:
            ats.add(a)
    return vs, ats


class GoalState:
    """The mutable search node: equations, assignment, finished flags,
    the derived-equation memo, and a trail of reversible mutations."""

    def __init__(self, problem: UnificationProblem, trace: bool = False):
        self.problem = problem
        self.equations: list[_Eq] = []
        for lhs, rhs in problem.equations:
            lv, la = _sides_of_term(lhs)
            rv, ra = _sides_of_term(rhs)
            self.equations.append(_Eq(lv, la, rv, ra))
        self.assignment: dict[ConceptName, set[Atom]] = {
            v: set() for v in problem.sorted_variables()
        }
        self.finished: set[ConceptName] = set()
        self.d_memo: set[tuple] = set()
        self.trail: list[tuple] = []
        self.trace: list[str] | None = [] if trace else None
        # Per-branch rule counters and their polynomial bounds.
        self.eager_count = 0
        self.de_count = 0
        self.var_count = len(self.assignment)
        all_atoms: set[Atom] = set()
        for lhs, rhs in problem.equations:
            all_atoms |= term_atoms(lhs)
            all_atoms |= term_atoms(rhs)
        self.atom_count = len(all_atoms)
        # High-water marks over the whole run, reported in stats.
        self.max_eager = 0
        self.max_de = 0
        self.max_equations = len(self.equations)
        self.applications = 0

    # -- trail ----------------------------------------------------------

    def mark(self) -> int:
        return len(self.trail)

    def undo_to(self, mark: int) -> None:
        while len(self.trail) > mark:
            kind, *payload = self.trail.pop()
            if kind == "ato":
                i, side, atom = payload
                self.equations[i].atoms_of(side).discard(atom)
            elif kind == "assign":
                v, atom = payload
                self.assignment[v].discard(atom)
            elif kind == "finish":
                self.finished.discard(payload[0])
            elif kind == "neweq":
                self.equations.pop()
            elif kind == "dmemo":
                self.d_memo.discard(payload[0])
            elif kind == "eager":
                self.eager_count -= 1
            elif kind == "de":
                self.de_count -= 1
        if self.trace is not None:
            self.trace.append(f"backtrack to={mark}")

    def _add_atom(self, i: int, side: Side, atom: Atom) -> None:
        target = self.equations[i].atoms_of(side)
        if atom not in target:
            target.add(atom)
            self.trail.append(("ato", i, side, atom))

    def _expand_with(self, v: ConceptName, new_atoms) -> None:
        """Distribute newly assigned atoms of v into every equation side
        that contains v, maintaining the expansion invariant."""
        for i, eq in enumerate(self.equations):
            if v in eq.left_vars:
                for a in new_atoms:
                    self._add_atom(i, Side.LEFT, a)
            if v in eq.right_vars:
                for a in new_atoms:
                    self._add_atom(i, Side.RIGHT, a)

    # -- assignment dependency checks ------------------------------------

    def _would_cycle(self, v: ConceptName, atom: Atom) -> bool:
        targets = atom.vars
        if v in targets:
            return True
        seen: set[ConceptName] = set()
        stack = list(targets)
        while stack:
            w = stack.pop()
            if w in seen:
                continue
            seen.add(w)
            for a in self.assignment.get(w, ()):
                for u in a.vars:
                    if u == v:
                        return True
                    if u not in seen:
                        stack.append(u)
        return False

    # -- invariants -------------------------------------------------------

    def check_invariants(self) -> None:
        for v, ats in self.assignment.items():
            if ats and self._would_cycle_from(v):
                raise AssertionError("assignment became cyclic")
        for eq in self.equations:
            for v in eq.left_vars:
                if not self.assignment[v] <= eq.left_atoms:
                    raise AssertionError("equation not expanded on the left")
            for v in eq.right_vars:
                if not self.assignment[v] <= eq.right_atoms:
                    raise AssertionError("equation not expanded on the right")

    def _would_cycle_from(self, v: ConceptName) -> bool:
        seen: set[ConceptName] = set()
        stack: list[ConceptName] = []
        for a in self.assignment.get(v, ()):
            stack.extend(a.vars)
        while stack:
            w = stack.pop()
            if w == v:
                return True
            if w in seen:
                continue
            seen.add(w)
            for a in self.assignment.get(w, ()):
                stack.extend(a.vars)
        return False

    def current_substitution(self) -> Substitution:
        bindings = {
            v: conj(sorted(ats, key=lambda a: a.key))
            for v, ats in self.assignment.items()
        }
        return Substitution.dag(bindings)

    def _log(self, line: str) -> None:
        if self.trace is not None:
            self.trace.append(line)

    def _count(self, kind: str) -> None:
        self.applications += 1
        if kind == "eager":
            self.eager_count += 1
            self.trail.append(("eager",))
            self.max_eager = max(self.max_eager, self.eager_count)
            if self.eager_count > self.var_count:
                raise AssertionError("eager-assignment exceeded the variable bound")
        else:
            self.de_count += 1
            self.trail.append(("de",))
            self.max_de = max(self.max_de, self.de_count)
            self.max_equations = max(self.max_equations, len(self.equations))
            if self.de_count > len(self.equations) * self.atom_count:
                raise AssertionError(
                    "decomposition/extension exceeded the equations-times-atoms bound"
                )


def rule_eager_assignment(state: GoalState, eq_index: int, side: Side) -> RuleOutcome:
    """Force the assignment of the single unfinished variable on a side
    whose atom set is empty, then freeze it.  Mandatory when it applies;
    a cycle fails the whole branch since there is no alternative."""
    eq = state.equations[eq_index]
    this_vars = eq.vars_of(side)
    other_side = side.opposite
    candidates = [
        x
        for x in this_vars
        if x not in state.finished
        and all(
            z in state.finished
            for z in (this_vars - {x}) | eq.vars_of(other_side)
        )
    ]
    if eq.atoms_of(side) or not candidates:
        return RuleOutcome.NOT_APPLICABLE
    x = min(candidates, key=lambda n: (n.id, n.kind.value))
    new_atoms = sorted(eq.atoms_of(other_side), key=lambda a: a.key)
    for a in new_atoms:
        if state._would_cycle(x, a):
            state._log(f"eager-assignment eq={eq_index} side={side.value} var={x.id} fail=cycle")
            return RuleOutcome.FAILED
    for a in new_atoms:
        if a not in state.assignment[x]:
            state.assignment[x].add(a)
            state.trail.append(("assign", x, a))
    state.finished.add(x)
    state.trail.append(("finish", x))
    state._expand_with(x, new_atoms)
    state._count("eager")
    state._log(
        f"eager-assignment eq={eq_index} side={side.value} var={x.id} "
        f"atoms=[{' '.join(repr(a) for a in new_atoms)}]"
    )
    return RuleOutcome.APPLIED


def rule_decomposition(
    state: GoalState, eq_index: int, atom: Atom, partner: Atom
) -> RuleOutcome:
    """Solve an unsolved existential by pairing it with a same-role
    existential on the other side; record the specificity constraint as
    the derived equation ``C and B =? B`` (created once per (C, B))."""
    eq = state.equations[eq_index]
    if not isinstance(atom, Exists) or not isinstance(partner, Exists):
        return RuleOutcome.NOT_APPLICABLE
    if atom in eq.left_atoms and atom not in eq.right_atoms:
        side = Side.LEFT
    elif atom in eq.right_atoms and atom not in eq.left_atoms:
        side = Side.RIGHT
    else:
        return RuleOutcome.NOT_APPLICABLE
    if partner.role is not atom.role or partner not in eq.atoms_of(side.opposite):
        return RuleOutcome.NOT_APPLICABLE
    state._add_atom(eq_index, side.opposite, atom)
    c, b = atom.child, partner.child
    key = (c.key, b.key)
    if key not in state.d_memo:
        state.d_memo.add(key)
        state.trail.append(("dmemo", key))
        lv, la = _sides_of_term(conj([c, b]))
        rv, ra = _sides_of_term(b)
        new = _Eq(lv, la, rv, ra)
        new_index = len(state.equations)
        state.equations.append(new)
        state.trail.append(("neweq",))
        for v in sorted(new.left_vars | new.right_vars, key=lambda n: n.id):
            assigned = sorted(state.assignment.get(v, ()), key=lambda a: a.key)
            if v in new.left_vars:
                for a in assigned:
                    state._add_atom(new_index, Side.LEFT, a)
            if v in new.right_vars:
                for a in assigned:
                    state._add_atom(new_index, Side.RIGHT, a)
    state._count("de")
    state._log(
        f"decomposition eq={eq_index} side={side.value} atom={atom!r} with={partner!r}"
    )
    return RuleOutcome.APPLIED


def rule_extension(
    state: GoalState, eq_index: int, atom: Atom, var: ConceptName
) -> RuleOutcome:
    """Solve an unsolved atom by adding it to the assignment of an
    unfinished variable on the other side; fails (branch-locally) if
    that would make the assignment cyclic."""
    eq = state.equations[eq_index]
    if atom in eq.left_atoms and atom not in eq.right_atoms:
        side = Side.LEFT
    elif atom in eq.right_atoms and atom not in eq.left_atoms:
        side = Side.RIGHT
    else:
        return RuleOutcome.NOT_APPLICABLE
    if var in state.finished or var not in eq.vars_of(side.opposite):
        return RuleOutcome.NOT_APPLICABLE
    if state._would_cycle(var, atom):
        state._log(
            f"extension eq={eq_index} side={side.value} atom={atom!r} var={var.id} fail=cycle"
        )
        return RuleOutcome.FAILED
    if atom not in state.assignment[var]:
        state.assignment[var].add(atom)
        state.trail.append(("assign", var, atom))
    state._expand_with(var, (atom,))
    state._count("de")
    state._log(f"extension eq={eq_index} side={side.value} atom={atom!r} var={var.id}")
    return RuleOutcome.APPLIED


def _find_eager(state: GoalState) -> tuple[int, Side] | None:
    for i in range(len(state.equations)):
        for side in (Side.LEFT, Side.RIGHT):
            eq = state.equations[i]
            this_vars = eq.vars_of(side)
            if eq.atoms_of(side):
                continue
            for x in this_vars:
                if x in state.finished:
                    continue
                others = (this_vars - {x}) | eq.vars_of(side.opposite)
                if all(z in state.finished for z in others):
                    return i, side
    return None


def _select_goal(state: GoalState) -> tuple[int, Atom, Side] | None:
    """Don't-care selection: the unsolved equation with the fewest
    unsolved atoms (ties by index), then its term-order-least unsolved
    atom."""
    best: tuple[int, int] | None = None
    for i, eq in enumerate(state.equations):
        n = len(eq.unsolved_atoms())
        if n and (best is None or n < best[0]):
            best = (n, i)
    if best is None:
        return None
    i = best[1]
    eq = state.equations[i]
    candidates = [
        (a, Side.LEFT) for a in eq.left_atoms - eq.right_atoms
    ] + [(a, Side.RIGHT) for a in eq.right_atoms - eq.left_atoms]
    atom, side = min(candidates, key=lambda c: (c[0].key, c[1].value))
    return i, atom, side


class _BudgetStop(Exception):
    pass


def solve_goal(g: UnificationProblem, cfg: GoalConfig | None = None) -> SolveResult:
    """Run the goal-oriented search on a flat problem.

    Don't-know alternatives (decomposition partners in term order, then
    extension variables in term order) are explored depth-first with
    trail undo; UNSAT is reported only after all branches fail."""
    cfg = cfg or GoalConfig()
    if not g.is_flat():
        raise ValueError("solver requires a flat problem")
    state = GoalState(g, trace=cfg.trace)
    budget = [cfg.max_nodes]

    def spend() -> None:
        if budget[0] is not None:
            if budget[0] == 0:
                raise _BudgetStop()
            budget[0] -= 1

    def search() -> bool:
        # Mandatory phase: eager assignments, in scan order.
        while True:
            found = _find_eager(state)
            if found is None:
                break
            spend()
            outcome = rule_eager_assignment(state, *found)
            if cfg.validate:
                state.check_invariants()
            if outcome is RuleOutcome.FAILED:
                return False
        goal = _select_goal(state)
        if goal is None:
            return True
        eq_index, atom, side = goal
        eq = state.equations[eq_index]
        other = side.opposite
        partners: list[Atom] = []
        if isinstance(atom, Exists):
            partners = sorted(
                (
                    b
                    for b in eq.atoms_of(other)
                    if isinstance(b, Exists) and b.role is atom.role
                ),
                key=lambda b: b.key,
            )
        ext_vars = sorted(
            (v for v in eq.vars_of(other) if v not in state.finished),
            key=lambda n: (n.id, n.kind.value),
        )
        if not partners and not ext_vars:
            return False
        for partner in partners:
            spend()
            mark = state.mark()
            if rule_decomposition(state, eq_index, atom, partner) is RuleOutcome.APPLIED:
                if cfg.validate:
                    state.check_invariants()
                if search():
                    return True
            state.undo_to(mark)
        for v in ext_vars:
            spend()
            mark = state.mark()
            if rule_extension(state, eq_index, atom, v) is RuleOutcome.APPLIED:
                if cfg.validate:
                    state.check_invariants()
                if search():
                    return True
            state.undo_to(mark)
        return False

    try:
        sat = search()
    except _BudgetStop:
        return SolveResult(
            SolveStatus.BUDGET_EXCEEDED, None, _stats(state), _trace(state)
        )
    if not sat:
        return SolveResult(SolveStatus.UNSAT, None, _stats(state), _trace(state))
    sub = state.current_substitution()
    if not is_unifier(sub, g):
        raise RuntimeError("internal error: computed substitution is not a unifier")
    return SolveResult(SolveStatus.SAT, sub, _stats(state), _trace(state))


def _stats(state: GoalState) -> dict:
    return {
        "variables": state.var_count,
        "atoms": state.atom_count,
        "applications": state.applications,
        "max_eager": state.max_eager,
        "max_decomposition_extension": state.max_de,
        "max_equations": state.max_equations,
    }


def _trace(state: GoalState) -> tuple[str, ...]:
    return tuple(state.trace) if state.trace is not None else ()
