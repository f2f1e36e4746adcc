"""Bridge to the equational theory of semilattices with monotone
operators.

Terms over the signature (binary meet, unit 1, unary monotone operators
f_1..f_n, free constants, variables) translate structurally to and from
EL concept terms: meet is conjunction, 1 is top, and f_i is the
existential restriction over the i-th role.  Under this translation the
word problem of the theory coincides with EL equivalence, so it is
decided by translating and calling the EL equivalence check; no
separate rewriting engine is needed, and unification modulo the theory
is EL unification through the same bridge.

Textual syntax (s-expression style): ``1``, a lowercase name for a free
constant, ``?name`` for a variable, ``(meet s t)``, ``(f i s)``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping

from .subsumption import equivalent
from .terms import (
    Conj,
    ConceptTerm,
    Exists,
    Name,
    RoleName,
    Top,
    conj,
    constant,
    exists,
    role,
    variable,
)


class SLTerm:
    """Base class for terms over the semilattice signature."""

    __slots__ = ()


@dataclass(frozen=True)
class One(SLTerm):
    def __repr__(self) -> str:
        return "1"


ONE = One()


@dataclass(frozen=True)
class SLVar(SLTerm):
    id: str

    def __repr__(self) -> str:
        return f"?{self.id}"


@dataclass(frozen=True)
class SLConst(SLTerm):
    id: str

    def __repr__(self) -> str:
        return self.id


@dataclass(frozen=True)
class Meet(SLTerm):
    left: SLTerm
    right: SLTerm

    def __repr__(self) -> str:
        return f"(meet {self.left!r} {self.right!r})"


@dataclass(frozen=True)
class Mono(SLTerm):
    index: int
    arg: SLTerm

    def __post_init__(self):
        if self.index < 1:
            raise ValueError("operator indices start at 1")

    def __repr__(self) -> str:
        return f"(f {self.index} {self.arg!r})"


def to_slmo(c: ConceptTerm, role_index: Mapping[RoleName, int]) -> SLTerm:
    """Translate a concept term: constants to free constants, variables
    to variables, top to 1, conjunction to left-nested meets, and each
    existential to the operator its role is indexed with."""
    if isinstance(c, Top):
        return ONE
    if isinstance(c, Name):
        return SLVar(c.name.id) if c.name.is_variable else SLConst(c.name.id)
    if isinstance(c, Exists):
        idx = role_index.get(c.role)
        if idx is None:
            raise ValueError(f"role {c.role.id} has no operator index")
        return Mono(idx, to_slmo(c.child, role_index))
    assert isinstance(c, Conj)
    parts = [to_slmo(x, role_index) for x in c.children]
    out = parts[0]
    for p in parts[1:]:
        out = Meet(out, p)
    return out


def from_slmo(t: SLTerm, index_role: Mapping[int, RoleName]) -> ConceptTerm:
    """The inverse translation; meets flatten back into a canonical
    conjunction."""
    if isinstance(t, One):
        from .terms import TOP

        return TOP
    if isinstance(t, SLVar):
        return variable(t.id)
    if isinstance(t, SLConst):
        return constant(t.id)
    if isinstance(t, Mono):
        r = index_role.get(t.index)
        if r is None:
            raise ValueError(f"operator f{t.index} has no role assigned")
        return Exists(r, from_slmo(t.arg, index_role))
    assert isinstance(t, Meet)
    return conj([from_slmo(t.left, index_role), from_slmo(t.right, index_role)])


def operator_indices(t: SLTerm) -> frozenset[int]:
    if isinstance(t, Mono):
        return frozenset((t.index,)) | operator_indices(t.arg)
    if isinstance(t, Meet):
        return operator_indices(t.left) | operator_indices(t.right)
    return frozenset()


def default_index_role(indices: frozenset[int]) -> dict[int, RoleName]:
    return {i: role(f"r{i}") for i in indices}


def slmo_word_problem(
    s: SLTerm, t: SLTerm, index_role: Mapping[int, RoleName] | None = None
) -> bool:
    """Decide equality of two terms modulo the theory, by translating to
    EL and testing equivalence."""
    if index_role is None:
        index_role = default_index_role(operator_indices(s) | operator_indices(t))
    return equivalent(from_slmo(s, index_role), from_slmo(t, index_role))


# -- textual syntax ------------------------------------------------------

_TOKEN = re.compile(r"\s*(\(|\)|[^\s()]+)")
_NAME = re.compile(r"[A-Za-z][A-Za-z0-9_]*$")


class SLmoSyntaxError(ValueError):
    pass


def _tokenize(text: str) -> list[str]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            break
        tokens.append(m.group(1))
        pos = m.end()
    return tokens


def parse_slmo(text: str) -> SLTerm:
    """Parse the s-expression syntax for semilattice terms."""
    tokens = _tokenize(text)
    term, rest = _parse(tokens)
    if rest:
        raise SLmoSyntaxError(f"trailing input: {' '.join(rest)}")
    return term


def _parse(tokens: list[str]) -> tuple[SLTerm, list[str]]:
    if not tokens:
        raise SLmoSyntaxError("unexpected end of input")
    head, rest = tokens[0], tokens[1:]
    if head == "(":
        if not rest:
            raise SLmoSyntaxError("unexpected end of input after '('")
        op, rest = rest[0], rest[1:]
        if op == "meet":
            left, rest = _parse(rest)
            right, rest = _parse(rest)
            if not rest or rest[0] != ")":
                raise SLmoSyntaxError("expected ')' after meet")
            return Meet(left, right), rest[1:]
        if op == "f":
            if not rest or not rest[0].isdigit():
                raise SLmoSyntaxError("expected an operator index after 'f'")
            idx, rest = int(rest[0]), rest[1:]
            arg, rest = _parse(rest)
            if not rest or rest[0] != ")":
                raise SLmoSyntaxError("expected ')' after operator argument")
            return Mono(idx, arg), rest[1:]
        raise SLmoSyntaxError(f"unknown operator {op!r}")
    if head == ")":
        raise SLmoSyntaxError("unexpected ')'")
    if head == "1":
        return ONE, rest
    if head.startswith("?"):
        name = head[1:]
        if not _NAME.match(name):
            raise SLmoSyntaxError(f"bad variable name {head!r}")
        return SLVar(name), rest
    if not _NAME.match(head):
        raise SLmoSyntaxError(f"bad name {head!r}")
    return SLConst(head), rest


def format_slmo(t: SLTerm) -> str:
    return repr(t)
