"""Core syntax of EL concept terms.

A concept term is the top concept, a concept name, an existential
restriction over a role, or a conjunction of at least two atoms.  Every
term held by this package is kept in a canonical form modulo
associativity and commutativity of conjunction (AC):

  * nested conjunctions are flattened and the top concept is absorbed,
  * conjuncts are sorted by a fixed total order on terms,
  * duplicate conjuncts are PRESERVED (idempotency is an equivalence,
    handled by reduction, not by the representation).

Because construction normalizes, AC-equality of terms is plain equality
of the canonical forms, and the sort key doubles as a structural hash.
Concept and role names are interned so identical names share one object.
"""

from __future__ import annotations

import enum
import threading
from typing import Iterable, Iterator


class NameKind(enum.Enum):
    CONSTANT = 0
    VARIABLE = 1


class RoleName:
    """An interned role name."""

    __slots__ = ("id",)

    _table: dict[str, "RoleName"] = {}
    _lock = threading.Lock()

    def __new__(cls, id: str) -> "RoleName":
        obj = cls._table.get(id)
        if obj is None:
            with cls._lock:
                obj = cls._table.get(id)
                if obj is None:
                    if not id:
                        raise ValueError("role name must be nonempty")
                    obj = super().__new__(cls)
                    object.__setattr__(obj, "id", id)
                    cls._table[id] = obj
        return obj

    def __setattr__(self, name, value):
        raise AttributeError("RoleName is immutable")

    def __repr__(self) -> str:
        return self.id

    def __lt__(self, other: "RoleName") -> bool:
        return self.id < other.id


class ConceptName:
    """An interned concept name.  The kind (constant vs variable) is part
    of the identity: a constant ``A`` and a variable ``A`` are distinct
    names, and problems must not mix them."""

    __slots__ = ("id", "kind")

    _table: dict[tuple[str, NameKind], "ConceptName"] = {}
    _lock = threading.Lock()

    def __new__(cls, id: str, kind: NameKind) -> "ConceptName":
        key = (id, kind)
        obj = cls._table.get(key)
        if obj is None:
            with cls._lock:
                obj = cls._table.get(key)
                if obj is None:
                    if not id:
                        raise ValueError("concept name must be nonempty")
                    obj = super().__new__(cls)
                    object.__setattr__(obj, "id", id)
                    object.__setattr__(obj, "kind", kind)
                    cls._table[key] = obj
        return obj

    def __setattr__(self, name, value):
        raise AttributeError("ConceptName is immutable")

    @property
    def is_variable(self) -> bool:
        return self.kind is NameKind.VARIABLE

    def __repr__(self) -> str:
        return self.id

    def __lt__(self, other: "ConceptName") -> bool:
        return (self.id, self.kind.value) < (other.id, other.kind.value)


def role(id: str) -> RoleName:
    return RoleName(id)


def constant(id: str) -> "Name":
    return Name(ConceptName(id, NameKind.CONSTANT))


def variable(id: str) -> "Name":
    return Name(ConceptName(id, NameKind.VARIABLE))


# Constructor tags for the total term order: Top < Name < Exists < Conj.
_TAG_TOP = 0
_TAG_NAME = 1
_TAG_EXISTS = 2
_TAG_CONJ = 3


class ConceptTerm:
    """Base class of canonical concept terms.

    Each node carries:
      * ``key``   -- the total-order sort key, a nested tuple that fully
                     encodes the term, so key equality is term equality;
      * ``depth`` -- the role depth (maximal nesting of existentials);
      * ``vars``  -- the frozenset of concept variables occurring in it.
    """

    __slots__ = ("key", "depth", "vars", "_hash")

    def __eq__(self, other) -> bool:
        if self is other:
            return True
        return isinstance(other, ConceptTerm) and self.key == other.key

    def __ne__(self, other) -> bool:
        return not self.__eq__(other)

    def __hash__(self) -> int:
        return self._hash

    def __lt__(self, other: "ConceptTerm") -> bool:
        return self.key < other.key

    def __le__(self, other: "ConceptTerm") -> bool:
        return self.key <= other.key

    @property
    def is_ground(self) -> bool:
        return not self.vars


class Top(ConceptTerm):
    """The top concept (also the empty conjunction)."""

    __slots__ = ()

    def __new__(cls):
        try:
            return TOP
        except NameError:  # first construction of the singleton
            obj = super().__new__(cls)
            object.__setattr__(obj, "key", (_TAG_TOP,))
            object.__setattr__(obj, "depth", 0)
            object.__setattr__(obj, "vars", frozenset())
            object.__setattr__(obj, "_hash", hash((_TAG_TOP,)))
            return obj

    def __repr__(self) -> str:
        return "top"


TOP = Top()


class Name(ConceptTerm):
    __slots__ = ("name",)

    def __init__(self, name: ConceptName):
        object.__setattr__(self, "name", name)
        key = (_TAG_NAME, name.id, name.kind.value)
        object.__setattr__(self, "key", key)
        object.__setattr__(self, "depth", 0)
        object.__setattr__(
            self, "vars", frozenset((name,)) if name.is_variable else frozenset()
        )
        object.__setattr__(self, "_hash", hash(key))

    def __repr__(self) -> str:
        return self.name.id


class Exists(ConceptTerm):
    __slots__ = ("role", "child")

    def __init__(self, role: RoleName, child: ConceptTerm):
        object.__setattr__(self, "role", role)
        object.__setattr__(self, "child", child)
        key = (_TAG_EXISTS, role.id, child.key)
        object.__setattr__(self, "key", key)
        object.__setattr__(self, "depth", 1 + child.depth)
        object.__setattr__(self, "vars", child.vars)
        object.__setattr__(self, "_hash", hash(key))

    def __repr__(self) -> str:
        return f"(some {self.role.id} {self.child!r})"


class Conj(ConceptTerm):
    """A conjunction of >= 2 atoms, sorted, duplicates preserved.

    Do not call directly with unnormalized input; use :func:`conj`.
    """

    __slots__ = ("children",)

    def __init__(self, children: tuple[ConceptTerm, ...]):
        if len(children) < 2:
            raise ValueError("conjunction needs at least two conjuncts")
        for c in children:
            if not isinstance(c, (Name, Exists)):
                raise ValueError("conjuncts must be atoms (no nested and, no top)")
        if any(children[i].key > children[i + 1].key for i in range(len(children) - 1)):
            raise ValueError("conjuncts must be sorted; use conj()")
        object.__setattr__(self, "children", children)
        key = (_TAG_CONJ, tuple(c.key for c in children))
        object.__setattr__(self, "key", key)
        object.__setattr__(self, "depth", max(c.depth for c in children))
        v: frozenset[ConceptName] = frozenset()
        for c in children:
            v = v | c.vars
        object.__setattr__(self, "vars", v)
        object.__setattr__(self, "_hash", hash(key))

    def __repr__(self) -> str:
        return "(and " + " ".join(repr(c) for c in self.children) + ")"


Atom = Name | Exists


def is_atom(t: ConceptTerm) -> bool:
    """An atom is a concept name or an existential restriction."""
    return isinstance(t, (Name, Exists))


def is_variable_atom(t: ConceptTerm) -> bool:
    return isinstance(t, Name) and t.name.is_variable


def exists(r: RoleName | str, child: ConceptTerm) -> Exists:
    if isinstance(r, str):
        r = RoleName(r)
    return Exists(r, child)


def conj(terms: Iterable[ConceptTerm]) -> ConceptTerm:
    """Build the canonical conjunction of ``terms``.

    Flattens nested conjunctions, absorbs top, and sorts the conjuncts.
    The empty conjunction is top; a singleton collapses to its element.
    """
    acc: list[ConceptTerm] = []
    for t in terms:
        if isinstance(t, Top):
            continue
        if isinstance(t, Conj):
            acc.extend(t.children)
        else:
            acc.append(t)
    if not acc:
        return TOP
    if len(acc) == 1:
        return acc[0]
    acc.sort(key=lambda t: t.key)
    return Conj(tuple(acc))


def ac_normalize(t: ConceptTerm) -> ConceptTerm:
    """Rebuild ``t`` bottom-up through the normalizing constructors.

    All terms made by this module's constructors are already canonical,
    so this is the identity on them; it exists as the explicit canonical
    map and as a checker used in property tests.
    """
    if isinstance(t, (Top, Name)):
        return t
    if isinstance(t, Exists):
        return Exists(t.role, ac_normalize(t.child))
    return conj(ac_normalize(c) for c in t.children)


def ac_equal(s: ConceptTerm, t: ConceptTerm) -> bool:
    """Identity up to associativity/commutativity of conjunction."""
    return s == t


def top_level_atoms(t: ConceptTerm) -> tuple[Atom, ...]:
    """The top-level conjuncts: empty for top, singleton for an atom."""
    if isinstance(t, Top):
        return ()
    if isinstance(t, Conj):
        return t.children
    return (t,)


def atoms(t: ConceptTerm) -> frozenset[Atom]:
    """All atoms of ``t``: names and existential restrictions occurring
    at any level, with an existential contributing itself plus the atoms
    of its child."""
    out: set[Atom] = set()
    _collect_atoms(t, out)
    return frozenset(out)


def _collect_atoms(t: ConceptTerm, out: set) -> None:
    if isinstance(t, Name):
        out.add(t)
    elif isinstance(t, Exists):
        out.add(t)
        _collect_atoms(t.child, out)
    elif isinstance(t, Conj):
        for c in t.children:
            _collect_atoms(c, out)


def role_depth(t: ConceptTerm) -> int:
    return t.depth


def names(t: ConceptTerm) -> frozenset[ConceptName]:
    """All concept names occurring in ``t`` (constants and variables)."""
    out: set[ConceptName] = set()
    stack = [t]
    while stack:
        s = stack.pop()
        if isinstance(s, Name):
            out.add(s.name)
        elif isinstance(s, Exists):
            stack.append(s.child)
        elif isinstance(s, Conj):
            stack.extend(s.children)
    return frozenset(out)


def roles(t: ConceptTerm) -> frozenset[RoleName]:
    """All role names occurring in ``t``."""
    out: set[RoleName] = set()
    stack = [t]
    while stack:
        s = stack.pop()
        if isinstance(s, Exists):
            out.add(s.role)
            stack.append(s.child)
        elif isinstance(s, Conj):
            stack.extend(s.children)
    return frozenset(out)


def is_flat_atom(a: ConceptTerm) -> bool:
    """Flat atoms: a name, or an existential over a name or top."""
    if isinstance(a, Name):
        return True
    if isinstance(a, Exists):
        return isinstance(a.child, (Name, Top))
    return False


def is_flat_term(t: ConceptTerm) -> bool:
    """A flat term is a conjunction of flat atoms (top included)."""
    return all(is_flat_atom(a) for a in top_level_atoms(t))


def term_size(t: ConceptTerm) -> int:
    """Number of constructor nodes, used for output size limits."""
    if isinstance(t, Top) or isinstance(t, Name):
        return 1
    if isinstance(t, Exists):
        return 1 + term_size(t.child)
    return 1 + sum(term_size(c) for c in t.children)


def iter_subterms(t: ConceptTerm) -> Iterator[ConceptTerm]:
    yield t
    if isinstance(t, Exists):
        yield from iter_subterms(t.child)
    elif isinstance(t, Conj):
        for c in t.children:
            yield from iter_subterms(c)
