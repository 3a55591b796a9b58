"""Two-valued evaluation families and the finite Boolean algebras they present.

A presentation is a pair (world, family): an ordered world of generator
labels and a family of {0,1}-valued maps on it.  The presented algebra is
realized concretely as the powerset algebra whose atoms are the distinct
family members; each generator becomes its evaluation column.  An
independent route to the same algebra (free algebra modulo the killed
sign patterns) is provided by :func:`relation_quotient_oracle` and is used
as the correctness oracle throughout the test suite.

Everything in this module is an immutable value; all operations are pure.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property, total_ordering
from typing import Iterable, Iterator, Mapping, Sequence


class BaforgeError(Exception):
    """Base class for all library errors."""


class AlgebraMismatchError(BaforgeError):
    """Raised when elements of different algebras are combined."""


class UnknownLabelError(BaforgeError):
    """Raised when a term mentions a label outside the evaluation world."""

    def __init__(self, label: "Label"):
        super().__init__(f"term variable {label} is not in the world")
        self.label = label


# ---------------------------------------------------------------------------
# Labels, worlds, two-valued maps
# ---------------------------------------------------------------------------

@total_ordering
@dataclass(frozen=True)
class Label:
    """Generator label: a 1-tuple (plain index) or 2-tuple (indexed pair).

    The total order is lexicographic on (arity, components), so plain and
    pair labels never interleave and pair labels sort by level first.
    """

    parts: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.parts) not in (1, 2):
            raise ValueError(f"label needs 1 or 2 components, got {self.parts}")
        if any(c < 0 for c in self.parts):
            raise ValueError(f"label components must be non-negative: {self.parts}")

    @property
    def kind(self) -> str:
        return "plain" if len(self.parts) == 1 else "pair"

    def _key(self) -> tuple[int, tuple[int, ...]]:
        return (len(self.parts), self.parts)

    def __lt__(self, other: "Label") -> bool:
        return self._key() < other._key()

    def __repr__(self) -> str:
        return "x" + ",".join(str(c) for c in self.parts)


def plain(i: int) -> Label:
    return Label((i,))


def pair(a: int, b: int) -> Label:
    return Label((a, b))


@dataclass(frozen=True)
class World:
    """Sorted duplicate-free tuple of labels."""

    labels: tuple[Label, ...]

    def __post_init__(self) -> None:
        if list(self.labels) != sorted(set(self.labels)):
            raise ValueError("world labels must be sorted and duplicate-free")

    @staticmethod
    def of(labels: Iterable[Label]) -> "World":
        return World(tuple(sorted(set(labels))))

    @cached_property
    def _index(self) -> dict[Label, int]:
        return {lab: i for i, lab in enumerate(self.labels)}

    def __len__(self) -> int:
        return len(self.labels)

    def __iter__(self) -> Iterator[Label]:
        return iter(self.labels)

    def __contains__(self, label: Label) -> bool:
        return label in self._index

    def position(self, label: Label) -> int:
        return self._index[label]


@dataclass(frozen=True)
class TwoValuedMap:
    """Total {0,1}-valued map on a world, stored as a bit vector in world order."""

    world: World
    bits: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.bits) != len(self.world):
            raise ValueError("bit vector length must equal world size")
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError("bits must be 0 or 1")

    @staticmethod
    def from_dict(world: World, values: Mapping[Label, int]) -> "TwoValuedMap":
        return TwoValuedMap(world, tuple(values[lab] for lab in world))

    @staticmethod
    def constant(world: World, value: int) -> "TwoValuedMap":
        return TwoValuedMap(world, (value,) * len(world))

    def __call__(self, label: Label) -> int:
        return self.bits[self.world.position(label)]

    def restrict_pattern(self, labels: Sequence[Label]) -> tuple[int, ...]:
        return tuple(self(lab) for lab in labels)

    def agrees_on(self, other: "TwoValuedMap", labels: Iterable[Label]) -> bool:
        return all(self(lab) == other(lab) for lab in labels)


@dataclass(frozen=True)
class Presentation:
    """World plus family of two-valued maps; duplicates are silently merged.

    Duplicate family members induce identical evaluation coordinates, so
    merging them does not change the presented algebra.  An empty family is
    legal and yields the degenerate one-element algebra (0 = 1).
    """

    world: World
    family: tuple[TwoValuedMap, ...]

    def __post_init__(self) -> None:
        for f in self.family:
            if f.world != self.world:
                raise ValueError("family member defined on a different world")
        deduped: list[TwoValuedMap] = []
        seen: set[tuple[int, ...]] = set()
        for f in self.family:
            if f.bits not in seen:
                seen.add(f.bits)
                deduped.append(f)
        object.__setattr__(self, "family", tuple(deduped))

    @staticmethod
    def of(labels: Iterable[Label], patterns: Iterable[Sequence[int]]) -> "Presentation":
        world = World.of(labels)
        return Presentation(world, tuple(TwoValuedMap(world, tuple(p)) for p in patterns))

    @property
    def is_degenerate(self) -> bool:
        return not self.family


# ---------------------------------------------------------------------------
# Terms
# ---------------------------------------------------------------------------

class Term:
    """Boolean term AST over generator labels."""

    __slots__ = ()

    def labels(self) -> frozenset[Label]:
        acc: set[Label] = set()
        _collect_labels(self, acc)
        return frozenset(acc)

    def eval_bits(self, columns: Mapping[Label, int], mask: int) -> int:
        """Evaluate over packed columns: bit i of a column is the value at atom i."""
        return _eval(self, columns, mask)

    def eval_assignment(self, assign: Mapping[Label, int]) -> int:
        """Evaluate at a single {0,1} assignment."""
        return _eval(self, {k: v for k, v in assign.items()}, 1)


@dataclass(frozen=True)
class Var(Term):
    label: Label

    def __repr__(self) -> str:
        return f"(var {' '.join(str(c) for c in self.label.parts)})"


@dataclass(frozen=True)
class Not(Term):
    arg: Term

    def __repr__(self) -> str:
        return f"(not {self.arg!r})"


@dataclass(frozen=True)
class And(Term):
    left: Term
    right: Term

    def __repr__(self) -> str:
        return f"(and {self.left!r} {self.right!r})"


@dataclass(frozen=True)
class Or(Term):
    left: Term
    right: Term

    def __repr__(self) -> str:
        return f"(or {self.left!r} {self.right!r})"


@dataclass(frozen=True)
class Const(Term):
    value: int

    def __post_init__(self) -> None:
        if self.value not in (0, 1):
            raise ValueError("constant must be 0 or 1")

    def __repr__(self) -> str:
        return f"(const {self.value})"


def _collect_labels(t: Term, acc: set[Label]) -> None:
    if isinstance(t, Var):
        acc.add(t.label)
    elif isinstance(t, Not):
        _collect_labels(t.arg, acc)
    elif isinstance(t, (And, Or)):
        _collect_labels(t.left, acc)
        _collect_labels(t.right, acc)


def _eval(t: Term, columns: Mapping[Label, int], mask: int) -> int:
    if isinstance(t, Var):
        try:
            return columns[t.label]
        except KeyError:
            raise UnknownLabelError(t.label) from None
    if isinstance(t, Not):
        return mask & ~_eval(t.arg, columns, mask)
    if isinstance(t, And):
        return _eval(t.left, columns, mask) & _eval(t.right, columns, mask)
    if isinstance(t, Or):
        return _eval(t.left, columns, mask) | _eval(t.right, columns, mask)
    if isinstance(t, Const):
        return mask if t.value else 0
    raise TypeError(f"not a term: {t!r}")


def subst_labels(t: Term, mapping: Mapping[Label, Label]) -> Term:
    """Relabel term variables; labels outside the mapping are kept."""
    if isinstance(t, Var):
        return Var(mapping.get(t.label, t.label))
    if isinstance(t, Not):
        return Not(subst_labels(t.arg, mapping))
    if isinstance(t, And):
        return And(subst_labels(t.left, mapping), subst_labels(t.right, mapping))
    if isinstance(t, Or):
        return Or(subst_labels(t.left, mapping), subst_labels(t.right, mapping))
    return t


def parse_term(text: str) -> Term:
    """Parse the prefix syntax, e.g. ``(and (var 0 0) (not (var 1 0)))``."""
    tokens = text.replace("(", " ( ").replace(")", " ) ").split()
    pos = 0

    def parse() -> Term:
        nonlocal pos
        if pos >= len(tokens):
            raise ValueError("unexpected end of term")
        tok = tokens[pos]
        if tok != "(":
            raise ValueError(f"expected '(' at token {pos}: {tok!r}")
        pos += 1
        if pos >= len(tokens):
            raise ValueError("unexpected end of term")
        head = tokens[pos]
        pos += 1
        if head == "var":
            comps = []
            while pos < len(tokens) and tokens[pos] != ")":
                comps.append(int(tokens[pos]))
                pos += 1
            if pos >= len(tokens):
                raise ValueError("expected ')'")
            pos += 1
            return Var(Label(tuple(comps)))
        if head == "const":
            if pos >= len(tokens):
                raise ValueError("unexpected end of term")
            val = int(tokens[pos])
            pos += 1
            _expect_close()
            return Const(val)
        if head == "not":
            arg = parse()
            _expect_close()
            return Not(arg)
        if head in ("and", "or"):
            left = parse()
            right = parse()
            _expect_close()
            return And(left, right) if head == "and" else Or(left, right)
        raise ValueError(f"unknown term head {head!r}")

    def _expect_close() -> None:
        nonlocal pos
        if pos >= len(tokens) or tokens[pos] != ")":
            raise ValueError("expected ')'")
        pos += 1

    term = parse()
    if pos != len(tokens):
        raise ValueError("trailing tokens after term")
    return term


def format_term(t: Term) -> str:
    return repr(t)


# ---------------------------------------------------------------------------
# Finite algebras and elements
# ---------------------------------------------------------------------------

class FiniteAlgebra:
    """Powerset algebra over a named atom set.

    Every finite Boolean algebra is of this form, so the carrier is exactly
    the set of bit vectors over the atoms.  Two algebras are equal iff they
    have the same atom-name tuple; named generators are derived metadata and
    do not participate in equality.
    """

    __slots__ = ("atoms", "gens", "__weakref__")

    def __init__(self, atoms: Sequence[object], gens: Mapping[Label, int] | None = None):
        self.atoms: tuple[object, ...] = tuple(atoms)
        if len(set(self.atoms)) != len(self.atoms):
            raise ValueError("atom names must be distinct")
        self.gens: dict[Label, int] = dict(gens or {})

    @property
    def size(self) -> int:
        return len(self.atoms)

    @property
    def mask(self) -> int:
        return (1 << len(self.atoms)) - 1

    @property
    def is_degenerate(self) -> bool:
        return not self.atoms

    def __eq__(self, other: object) -> bool:
        return isinstance(other, FiniteAlgebra) and self.atoms == other.atoms

    def __hash__(self) -> int:
        return hash(self.atoms)

    def __repr__(self) -> str:
        return f"FiniteAlgebra({len(self.atoms)} atoms)"

    # element constructors ---------------------------------------------------

    def element(self, bits: int) -> "Element":
        if bits < 0 or bits > self.mask:
            raise ValueError("bits out of range for this algebra")
        return Element(self, bits)

    @property
    def zero(self) -> "Element":
        return Element(self, 0)

    @property
    def one(self) -> "Element":
        return Element(self, self.mask)

    def atom(self, i: int) -> "Element":
        return Element(self, 1 << i)

    def atom_elements(self) -> list["Element"]:
        return [self.atom(i) for i in range(self.size)]

    def carrier(self) -> Iterator["Element"]:
        for bits in range(1 << self.size):
            yield Element(self, bits)

    def generator(self, label: Label) -> "Element":
        if label not in self.gens:
            raise UnknownLabelError(label)
        return Element(self, self.gens[label])


@dataclass(frozen=True)
class Element:
    """Element of a :class:`FiniteAlgebra`: a bit vector over its atoms."""

    alg: FiniteAlgebra
    bits: int

    def _check(self, other: "Element") -> None:
        if self.alg != other.alg:
            raise AlgebraMismatchError("elements belong to different algebras")

    def __and__(self, other: "Element") -> "Element":
        self._check(other)
        return Element(self.alg, self.bits & other.bits)

    def __or__(self, other: "Element") -> "Element":
        self._check(other)
        return Element(self.alg, self.bits | other.bits)

    def __invert__(self) -> "Element":
        return Element(self.alg, self.alg.mask & ~self.bits)

    def __le__(self, other: "Element") -> bool:
        self._check(other)
        return self.bits & ~other.bits == 0

    def __lt__(self, other: "Element") -> bool:
        return self <= other and self.bits != other.bits

    @property
    def is_zero(self) -> bool:
        return self.bits == 0

    def atom_names(self) -> tuple[object, ...]:
        return tuple(a for i, a in enumerate(self.alg.atoms) if self.bits >> i & 1)

    def __repr__(self) -> str:
        return f"<{format(self.bits, f'0{max(self.alg.size, 1)}b')[::-1] if self.alg.size else '·'}>"


def meet(x: Element, y: Element) -> Element:
    return x & y


def join(x: Element, y: Element) -> Element:
    return x | y


def complement(x: Element) -> Element:
    return ~x


def join_all(alg: FiniteAlgebra, xs: Iterable[Element]) -> Element:
    acc = alg.zero
    for x in xs:
        acc = acc | x
    return acc


def meet_all(alg: FiniteAlgebra, xs: Iterable[Element]) -> Element:
    acc = alg.one
    for x in xs:
        acc = acc & x
    return acc


# ---------------------------------------------------------------------------
# Presented algebras
# ---------------------------------------------------------------------------

def closure(pres: Presentation) -> frozenset[TwoValuedMap]:
    """Closure of the family under agreement on every finite sub-world.

    Computed literally by quantifying over all sub-worlds; on a finite world
    this equals the family itself.  The empty world is special-cased to the
    singleton containing the empty map (vacuous-quantifier convention), which
    keeps the degenerate presentation usable downstream.
    """
    world = pres.world
    if len(world) == 0:
        return frozenset({TwoValuedMap(world, ())})
    out = []
    subsets = list(_subsets(tuple(world)))
    for bits in itertools.product((0, 1), repeat=len(world)):
        g = TwoValuedMap(world, bits)
        if all(any(f.agrees_on(g, u) for f in pres.family) for u in subsets):
            out.append(g)
    return frozenset(out)


def _subsets(items: tuple) -> Iterator[tuple]:
    for r in range(len(items) + 1):
        yield from itertools.combinations(items, r)


def algebra_of_presentation(pres: Presentation) -> FiniteAlgebra:
    """Concrete algebra: one atom per distinct family member, generators as columns."""
    atoms = ["f" + "".join(str(b) for b in f.bits) for f in pres.family]
    gens: dict[Label, int] = {}
    for j, lab in enumerate(pres.world):
        col = 0
        for i, f in enumerate(pres.family):
            col |= f.bits[j] << i
        gens[lab] = col
    return FiniteAlgebra(atoms, gens)


def eval_term(pres: Presentation, t: Term) -> Element:
    """Value of a term in the presented algebra, one bit per family member.

    The term is zero in the presented algebra iff the resulting vector is
    all-zero (pointwise evaluation at every family member).
    """
    for lab in t.labels():
        if lab not in pres.world:
            raise UnknownLabelError(lab)
    alg = algebra_of_presentation(pres)
    return alg.element(t.eval_bits(alg.gens, alg.mask))


def extends_to_hom(pres: Presentation, sub: Iterable[Label], values: Mapping[Label, int]) -> bool:
    """Whether the partial generator assignment extends to a homomorphism onto {0,1}.

    For a finite world this holds iff some family member agrees with the
    assignment on the sub-world.
    """
    labels = list(sub)
    for lab in labels:
        if lab not in pres.world:
            raise UnknownLabelError(lab)
    return any(all(f(lab) == values[lab] for lab in labels) for f in pres.family)


def relation_quotient_oracle(pres: Presentation) -> FiniteAlgebra:
    """Independent construction of the presented algebra via killed minterms.

    Start from the free algebra on the world, whose atoms are all {0,1}
    assignments, and quotient by the relations that force a signed meet to
    zero whenever no family member realizes its sign pattern.  A full
    minterm survives iff its pattern is a family member, so the result is
    the relative algebra on the surviving assignments.  This path never
    inspects evaluation columns and serves as the oracle for zero-testing.
    """
    world = pres.world
    n = len(world)
    assignments = list(itertools.product((0, 1), repeat=n))
    killed: set[tuple[int, ...]] = set()
    labels = tuple(world)
    for u0 in _subsets(labels):
        for u1 in _subsets(labels):
            fires = not any(
                all(f(lab) == 0 for lab in u0) and all(f(lab) == 1 for lab in u1)
                for f in pres.family
            )
            if not fires:
                continue
            for h in assignments:
                hmap = dict(zip(labels, h))
                if all(hmap[lab] == 0 for lab in u0) and all(hmap[lab] == 1 for lab in u1):
                    killed.add(h)
    survivors = [h for h in assignments if h not in killed]
    atoms = ["h" + "".join(str(b) for b in h) for h in survivors]
    gens: dict[Label, int] = {}
    for j, lab in enumerate(labels):
        col = 0
        for i, h in enumerate(survivors):
            col |= h[j] << i
        gens[lab] = col
    return FiniteAlgebra(atoms, gens)


def oracle_zero_test(oracle: FiniteAlgebra, t: Term) -> bool:
    """True iff the term evaluates to zero in the quotient oracle."""
    return t.eval_bits(oracle.gens, oracle.mask) == 0


# ---------------------------------------------------------------------------
# Subalgebra closure
# ---------------------------------------------------------------------------

def _blocks(alg: FiniteAlgebra, elems: Sequence[Element]) -> list[int]:
    """Atom blocks of the partition induced by a set of elements."""
    for e in elems:
        if e.alg != alg:
            raise AlgebraMismatchError("elements belong to different algebras")
    sig_to_block: dict[tuple[int, ...], int] = {}
    for i in range(alg.size):
        sig = tuple(e.bits >> i & 1 for e in elems)
        sig_to_block[sig] = sig_to_block.get(sig, 0) | (1 << i)
    return list(sig_to_block.values())


def member_of_gen(x: Element, elems: Iterable[Element]) -> bool:
    """Decide membership of x in the subalgebra generated by elems."""
    elems = list(elems)
    alg = elems[0].alg if elems else x.alg
    if x.alg != alg:
        raise AlgebraMismatchError("elements belong to different algebras")
    for block in _blocks(alg, elems):
        inter = x.bits & block
        if inter != 0 and inter != block:
            return False
    return True


def gen_subalgebra(alg: FiniteAlgebra, elems: Iterable[Element]) -> frozenset[Element]:
    """Subalgebra generated by elems: closure under meet, join and complement.

    Computed as all unions of blocks of the induced atom partition, which is
    the finite fixed point of the closure.
    """
    blocks = _blocks(alg, list(elems))
    out = set()
    for r in range(len(blocks) + 1):
        for combo in itertools.combinations(blocks, r):
            bits = 0
            for b in combo:
                bits |= b
            out.add(Element(alg, bits))
    return frozenset(out)


# ---------------------------------------------------------------------------
# Products, free products, ideals, quotients
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Product:
    """Direct product: atoms are the tagged disjoint union of factor atoms."""

    left: FiniteAlgebra
    right: FiniteAlgebra
    algebra: FiniteAlgebra

    def pair(self, a: Element, b: Element) -> Element:
        if a.alg != self.left or b.alg != self.right:
            raise AlgebraMismatchError("pair components from wrong factors")
        return self.algebra.element(a.bits | (b.bits << self.left.size))

    def split(self, x: Element) -> tuple[Element, Element]:
        if x.alg != self.algebra:
            raise AlgebraMismatchError("element is not in the product")
        return (
            self.left.element(x.bits & self.left.mask),
            self.right.element(x.bits >> self.left.size),
        )

    def inject_left(self, a: Element) -> Element:
        return self.pair(a, self.right.zero)

    def inject_right(self, b: Element) -> Element:
        return self.pair(self.left.zero, b)


def product(left: FiniteAlgebra, right: FiniteAlgebra) -> Product:
    atoms = [("L", a) for a in left.atoms] + [("R", b) for b in right.atoms]
    return Product(left, right, FiniteAlgebra(atoms))


@dataclass(frozen=True)
class FreeProduct:
    """Free product: atoms are pairs of factor atoms; embeddings are coordinatewise."""

    left: FiniteAlgebra
    right: FiniteAlgebra
    algebra: FiniteAlgebra

    def _pos(self, i: int, j: int) -> int:
        return i * self.right.size + j

    def embed_left(self, a: Element) -> Element:
        if a.alg != self.left:
            raise AlgebraMismatchError("element is not in the left factor")
        bits = 0
        for i in range(self.left.size):
            if a.bits >> i & 1:
                for j in range(self.right.size):
                    bits |= 1 << self._pos(i, j)
        return self.algebra.element(bits)

    def embed_right(self, b: Element) -> Element:
        if b.alg != self.right:
            raise AlgebraMismatchError("element is not in the right factor")
        bits = 0
        for j in range(self.right.size):
            if b.bits >> j & 1:
                for i in range(self.left.size):
                    bits |= 1 << self._pos(i, j)
        return self.algebra.element(bits)

    def mixed(self, a: Element, b: Element) -> Element:
        """The element <a,b> := embed_left(a) ∧ embed_right(b)."""
        return self.embed_left(a) & self.embed_right(b)


def free_product(left: FiniteAlgebra, right: FiniteAlgebra) -> FreeProduct:
    atoms = [(a, b) for a in left.atoms for b in right.atoms]
    return FreeProduct(left, right, FiniteAlgebra(atoms))


@dataclass(frozen=True)
class Ideal:
    """Ideal of a finite algebra; always principal, stored by its bound."""

    alg: FiniteAlgebra
    bound: Element

    def __contains__(self, x: Element) -> bool:
        return x <= self.bound

    def members(self) -> Iterator[Element]:
        support = [i for i in range(self.alg.size) if self.bound.bits >> i & 1]
        for r in range(len(support) + 1):
            for combo in itertools.combinations(support, r):
                bits = 0
                for i in combo:
                    bits |= 1 << i
                yield Element(self.alg, bits)


def ideal_gen(alg: FiniteAlgebra, gens: Iterable[Element]) -> Ideal:
    """Ideal generated by a set: everything below the join of the generators."""
    return Ideal(alg, join_all(alg, gens))


def quotient(alg: FiniteAlgebra, ideal: Ideal):
    """Quotient by an ideal: relative algebra on the atoms outside its bound.

    Returns the quotient algebra and the projection, a surjective
    homomorphism whose kernel is the ideal.
    """
    if ideal.alg != alg:
        raise AlgebraMismatchError("ideal belongs to a different algebra")
    keep = [i for i in range(alg.size) if not ideal.bound.bits >> i & 1]
    qalg = FiniteAlgebra([alg.atoms[i] for i in keep])

    def project(x: Element) -> Element:
        if x.alg != alg:
            raise AlgebraMismatchError("element is not in the quotiented algebra")
        bits = 0
        for new_i, old_i in enumerate(keep):
            if x.bits >> old_i & 1:
                bits |= 1 << new_i
        return qalg.element(bits)

    return qalg, project
