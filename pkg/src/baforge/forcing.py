"""Structured forcing conditions: records, clause validators, orders, isomorphisms.

Five kinds of conditions are supported, each a finite record whose validity
is a conjunction of named clauses and whose extension order is checked
literally clause by clause:

* ``qmln``  -- world + family pairs with the n-cover property,
* ``qstar`` -- finite label set with three maps per label (clauses (a)-(i)),
* ``pk`` / ``pk0`` -- superatomic-style level/pair records with cover sets
  (the zero variant replaces the agreement clause (c) by the separation
  clause (c0)),
* ``qs``   -- column-structured records over a good-parameter proxy.

Ordinals are proxied by naturals.  The residue parameter K enters only the
E-relations, where the construction does arithmetic mod K; sup of an empty
set is 0 there.  Size budgets (|w| < mu and the like) are optional validator
flags, off by default.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence

from .core import (
    BaforgeError,
    Element,
    FiniteAlgebra,
    Label,
    Presentation,
    Term,
    TwoValuedMap,
    World,
    algebra_of_presentation,
    eval_term,
    join_all,
    pair,
    plain,
    subst_labels,
)
from .invariants import InvariantKind, check_property

KINDS = ("qmln", "qstar", "pk", "pk0", "qs")


class InvalidConditionError(BaforgeError):
    pass


class LabelSpaceError(BaforgeError):
    """No room left below the level cap to allocate fresh labels."""


class NormalFormFailure(BaforgeError):
    """The good-cover procedure found no representation; carries (p, s, b)."""

    def __init__(self, cond, s, b, reason: str):
        super().__init__(f"no layered normal form at {s}: {reason}")
        self.cond = cond
        self.s = s
        self.b = b


@dataclass(frozen=True)
class GoodParamProxy:
    """Finite stand-in for a good parameter: caps play the successor bounds.

    ``caps[i]`` is the inclusive top index of column i; column indices range
    over 0..cf_lambda-1.
    """

    mu: int
    cf_lambda: int
    caps: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.cf_lambda < 1 or self.mu < 1:
            raise ValueError("mu and cf_lambda must be positive")
        if len(self.caps) != self.cf_lambda:
            raise ValueError("need one cap per column index")
        if any(c2 <= c1 for c1, c2 in zip(self.caps, self.caps[1:])):
            raise ValueError("caps must be strictly increasing")
        if any(c < 1 for c in self.caps):
            raise ValueError("caps must be positive")


@dataclass(frozen=True)
class PosetParams:
    kind: str
    n: int | None = None
    K: int | None = None
    level_cap: int | None = None
    good: GoodParamProxy | None = None
    world_budget: int | None = None
    family_budget: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown poset kind {self.kind!r}")
        if self.kind == "qmln" and (self.n is None or self.n < 1):
            raise ValueError("qmln needs n >= 1")
        if self.kind in ("pk", "pk0"):
            if self.K is None or self.K < 2:
                raise ValueError("pk/pk0 need K >= 2")
        if self.kind == "qs" and self.good is None:
            raise ValueError("qs needs a good-parameter proxy")


@dataclass(frozen=True)
class Violation:
    clause: str
    offender: tuple
    message: str

    def __str__(self) -> str:
        return f"clause ({self.clause}) at {self.offender}: {self.message}"


@dataclass(frozen=True)
class ValidationResult:
    ok: bool
    violations: tuple[Violation, ...]


# ---------------------------------------------------------------------------
# condition records
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QmlnCond:
    w: tuple[int, ...]
    F: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        if list(self.w) != sorted(set(self.w)):
            raise InvalidConditionError("w must be sorted and duplicate-free")
        rows = sorted(set(self.F))
        if any(len(r) != len(self.w) for r in rows):
            raise InvalidConditionError("family rows must match |w|")
        object.__setattr__(self, "F", tuple(rows))

    def row_value(self, row: tuple[int, ...], level: int) -> int:
        return row[self.w.index(level)]


@dataclass(frozen=True)
class QStarCond:
    u: tuple[int, ...]
    f: tuple[tuple[tuple[int, ...], ...], ...]  # f[l][alpha_idx] over domain()

    def __post_init__(self) -> None:
        if list(self.u) != sorted(set(self.u)):
            raise InvalidConditionError("u must be sorted and duplicate-free")
        if len(self.f) != 3 or any(len(fl) != len(self.u) for fl in self.f):
            raise InvalidConditionError("need three maps per member of u")
        dom = 2 * len(self.u)
        if any(len(bits) != dom for fl in self.f for bits in fl):
            raise InvalidConditionError("map domain must be u x 2")

    @cached_property
    def domain(self) -> tuple[tuple[int, int], ...]:
        return tuple((a, i) for a in self.u for i in (0, 1))

    @cached_property
    def _dpos(self) -> dict[tuple[int, int], int]:
        return {t: i for i, t in enumerate(self.domain)}

    def value(self, ell: int, alpha: int, t: tuple[int, int]) -> int:
        return self.f[ell][self.u.index(alpha)][self._dpos[t]]


def qstar_from_maps(u: Iterable[int], maps: Mapping[tuple[int, int], Mapping[tuple[int, int], int]]) -> QStarCond:
    """Build from {(ell, alpha): {(beta, i): bit}}."""
    u = tuple(sorted(set(u)))
    dom = [(a, i) for a in u for i in (0, 1)]
    f = tuple(
        tuple(tuple(maps[(ell, alpha)][t] for t in dom) for alpha in u) for ell in range(3)
    )
    return QStarCond(u, f)


@dataclass(frozen=True)
class PkCond:
    variant: str
    w: tuple[int, ...]
    a: tuple[int, ...]
    u: tuple[tuple[int, int], ...]
    f: tuple[tuple[int, ...], ...]  # f[s_idx][t_idx]
    y: tuple[tuple[tuple[int, int], tuple[int, int], tuple[tuple[int, int], ...]], ...]

    def __post_init__(self) -> None:
        if self.variant not in ("base", "zero"):
            raise InvalidConditionError("variant must be 'base' or 'zero'")
        if list(self.w) != sorted(set(self.w)):
            raise InvalidConditionError("w must be sorted and duplicate-free")
        if list(self.a) != sorted(set(self.a)):
            raise InvalidConditionError("a must be sorted and duplicate-free")
        if list(self.u) != sorted(set(self.u)):
            raise InvalidConditionError("u must be sorted and duplicate-free")
        if len(self.f) != len(self.u) or any(len(row) != len(self.u) for row in self.f):
            raise InvalidConditionError("f must be a |u| x |u| bit matrix")
        ykeys = [(s0, s1) for s0, s1, _ in self.y]
        if ykeys != sorted(ykeys) or len(set(ykeys)) != len(ykeys):
            raise InvalidConditionError("y entries must be sorted by key and unique")
        for s0, s1, ys in self.y:
            if list(ys) != sorted(set(ys)):
                raise InvalidConditionError("y sets must be sorted and duplicate-free")

    @cached_property
    def _upos(self) -> dict[tuple[int, int], int]:
        return {s: i for i, s in enumerate(self.u)}

    def fval(self, s: tuple[int, int], t: tuple[int, int]) -> int:
        return self.f[self._upos[s]][self._upos[t]]

    @cached_property
    def ymap(self) -> dict[tuple[tuple[int, int], tuple[int, int]], tuple[tuple[int, int], ...]]:
        return {(s0, s1): ys for s0, s1, ys in self.y}


def pk_eligible_pairs(u: Sequence[tuple[int, int]]):
    """Ordered pairs (s0, s1), distinct, with level(s0) <= level(s1).

    Equal-level pairs appear in both orientations.
    """
    return [
        (s0, s1)
        for s0 in u
        for s1 in u
        if s0 != s1 and s0[0] <= s1[0]
    ]


def pk_from_maps(
    variant: str,
    w: Iterable[int],
    a: Iterable[int],
    u: Iterable[tuple[int, int]],
    fmaps: Mapping[tuple[int, int], Mapping[tuple[int, int], int]],
    ymaps: Mapping[tuple[tuple[int, int], tuple[int, int]], Iterable[tuple[int, int]]],
) -> PkCond:
    u = tuple(sorted(set(u)))
    f = tuple(tuple(fmaps[s][t] for t in u) for s in u)
    y = tuple(
        (s0, s1, tuple(sorted(set(ymaps.get((s0, s1), ())))))
        for s0, s1 in sorted(pk_eligible_pairs(u))
    )
    return PkCond(variant, tuple(sorted(set(w))), tuple(sorted(set(a))), u, f, y)


@dataclass(frozen=True)
class QsCond:
    gamma: int
    w: tuple[int, ...]
    u: tuple[tuple[int, int], ...]
    f: tuple[tuple[tuple[int, ...], ...], ...]  # f[pair_idx][alpha][t_idx]

    def __post_init__(self) -> None:
        if list(self.w) != sorted(set(self.w)):
            raise InvalidConditionError("w must be sorted and duplicate-free")
        if list(self.u) != sorted(set(self.u)):
            raise InvalidConditionError("u must be sorted and duplicate-free")
        if len(self.f) != len(self.u) or any(len(rows) != self.gamma for rows in self.f):
            raise InvalidConditionError("need one map per (pair, alpha)")
        if any(len(bits) != len(self.u) for rows in self.f for bits in rows):
            raise InvalidConditionError("map domain must be u")

    @cached_property
    def _upos(self) -> dict[tuple[int, int], int]:
        return {s: i for i, s in enumerate(self.u)}

    def fval(self, s: tuple[int, int], alpha: int, t: tuple[int, int]) -> int:
        return self.f[self._upos[s]][alpha][self._upos[t]]

    def column(self, i: int) -> list[int]:
        return [xi for (j, xi) in self.u if j == i]


def qs_from_maps(
    gamma: int,
    w: Iterable[int],
    u: Iterable[tuple[int, int]],
    fmaps: Mapping[tuple[tuple[int, int], int], Mapping[tuple[int, int], int]],
) -> QsCond:
    u = tuple(sorted(set(u)))
    f = tuple(
        tuple(tuple(fmaps[(s, alpha)][t] for t in u) for alpha in range(gamma)) for s in u
    )
    return QsCond(gamma, tuple(sorted(set(w))), u, f)


Cond = QmlnCond | QStarCond | PkCond | QsCond


# ---------------------------------------------------------------------------
# validators
# ---------------------------------------------------------------------------

def validate(params: PosetParams, cond: Cond) -> ValidationResult:
    """Check every clause of the kind's definition; name clause and offender."""
    v: list[Violation] = []
    kind = params.kind
    if kind == "qmln":
        _validate_qmln(params, cond, v)
    elif kind == "qstar":
        _validate_qstar(cond, v)
    elif kind in ("pk", "pk0"):
        _validate_pk(params, cond, v)
    elif kind == "qs":
        _validate_qs(params, cond, v)
    return ValidationResult(not v, tuple(v))


def _validate_qmln(params: PosetParams, p: QmlnCond, v: list[Violation]) -> None:
    n = params.n
    if params.world_budget is not None and len(p.w) >= params.world_budget:
        v.append(Violation("size", (len(p.w),), "|w| exceeds the world budget"))
    if params.family_budget is not None and len(p.F) >= params.family_budget:
        v.append(Violation("size", (len(p.F),), "|F| exceeds the family budget"))
    fset = set(p.F)
    idx = range(len(p.w))
    for r in range(min(n, len(p.w)) + 1):
        for upos in itertools.combinations(idx, r):
            found = False
            for base in p.F:
                if all(
                    tuple(
                        (h[upos.index(i)] if i in upos else base[i]) for i in idx
                    )
                    in fset
                    for h in itertools.product((0, 1), repeat=r)
                ):
                    found = True
                    break
            if not found:
                v.append(
                    Violation(
                        "cover",
                        tuple(p.w[i] for i in upos),
                        "no total map realizes all patterns on this sub-world",
                    )
                )


def _validate_qstar(p: QStarCond, v: list[Violation]) -> None:
    for alpha in p.u:
        below = [(b, i) for (b, i) in p.domain if b < alpha]
        for t in below:
            vals = {p.value(ell, alpha, t) for ell in range(3)}
            if len(vals) != 1:
                v.append(Violation("c", (alpha, t), "the three maps disagree below alpha"))
        if p.value(0, alpha, (alpha, 0)) != 1 or p.value(0, alpha, (alpha, 1)) != 0:
            v.append(Violation("d", (alpha,), "first map must be (1,0) at its own pair"))
        if p.value(1, alpha, (alpha, 0)) != 0 or p.value(1, alpha, (alpha, 1)) != 1:
            v.append(Violation("e", (alpha,), "second map must be (0,1) at its own pair"))
    for alpha in p.u:
        for beta in p.u:
            if alpha != beta and p.value(0, alpha, (beta, 0)) and p.value(1, alpha, (beta, 1)):
                v.append(Violation("f", (alpha, beta), "maps 0 and 1 overlap"))
            if p.value(0, alpha, (beta, 0)) and p.value(2, alpha, (beta, 1)):
                v.append(Violation("g", (alpha, beta), "maps 0 and 2 overlap"))
            if p.value(1, alpha, (beta, 1)) and p.value(2, alpha, (beta, 0)):
                v.append(Violation("h", (alpha, beta), "maps 1 and 2 overlap"))
            if p.value(2, alpha, (beta, 0)) and p.value(2, alpha, (beta, 1)):
                v.append(Violation("i", (alpha, beta), "map 2 hits both slots"))


def _validate_pk(params: PosetParams, p: PkCond, v: list[Violation]) -> None:
    if (params.kind == "pk") != (p.variant == "base"):
        v.append(Violation("kind", (p.variant,), "variant does not match the poset kind"))
    if not set(p.a) <= set(p.w):
        v.append(Violation("a", tuple(set(p.a) - set(p.w)), "a must be a subset of w"))
    wset = set(p.w)
    uset = set(p.u)
    for beta in p.w:
        if (beta, 0) not in uset or (beta, 1) not in uset:
            v.append(Violation("a", (beta,), "pairs (level,0) and (level,1) must be present"))
    for (beta, xi) in p.u:
        if beta not in wset:
            v.append(Violation("a", ((beta, xi),), "pair level outside w"))
    if params.level_cap is not None and any(beta >= params.level_cap for beta in p.w):
        v.append(Violation("size", (max(p.w),), "level exceeds the level cap"))
    for s in p.u:
        if p.fval(s, s) != 1:
            v.append(Violation("b", (s,), "map must be 1 at its own pair"))
        for t in p.u:
            if t != s and t[0] <= s[0] and p.fval(s, t) != 0:
                v.append(Violation("b", (s, t), "map must vanish at lower-or-equal levels"))
    if p.variant == "base":
        for alpha, beta in itertools.combinations(p.a, 2):
            if p.fval((alpha, 0), (beta, 0)) != p.fval((alpha, 1), (beta, 0)):
                v.append(Violation("c", (alpha, beta), "the two base maps disagree at (beta,0)"))
    else:
        for alpha, beta in itertools.combinations(p.a, 2):
            if not any(
                p.fval(s, (alpha, 0)) == 1 and p.fval(s, (beta, 0)) == 0 for s in p.u
            ):
                v.append(Violation("c0", (alpha, beta), "no map separates (alpha,0) from (beta,0)"))
    expected = sorted(pk_eligible_pairs(p.u))
    if [(s0, s1) for s0, s1, _ in p.y] != expected:
        v.append(Violation("d", (), "y must be defined exactly on the eligible pairs"))
        return
    for s0, s1, ys in p.y:
        for s in ys:
            if s not in uset or s[0] >= s0[0]:
                v.append(Violation("d", (s0, s1, s), "cover point must lie strictly below level(s0)"))
        yset = set(ys)
        for t in p.u:
            if p.fval(t, s0) == 1 and p.fval(t, s1) != p.fval(s0, s1):
                if not any(p.fval(t, s) == 1 for s in yset):
                    v.append(Violation("d", (s0, s1, t), "uncovered witness map"))


def _validate_qs(params: PosetParams, p: QsCond, v: list[Violation]) -> None:
    S = params.good
    if not 0 <= p.gamma < S.mu:
        v.append(Violation("a", (p.gamma,), "gamma must be below mu"))
    for i in p.w:
        if i >= S.cf_lambda:
            v.append(Violation("a", (i,), "column index out of range"))
    for i in p.w:
        if (i, 0) not in p._upos or (i, S.caps[i]) not in p._upos:
            v.append(Violation("b", (i,), "column must contain its bottom and top pairs"))
    for (i, xi) in p.u:
        if i not in set(p.w):
            v.append(Violation("b", ((i, xi),), "pair on a column outside w"))
        elif not 0 <= xi <= S.caps[i]:
            v.append(Violation("a", ((i, xi),), "pair index beyond the column cap"))
    for (i, xi) in p.u:
        for alpha in range(p.gamma):
            for (j, zeta) in p.u:
                val = p.fval((i, xi), alpha, (j, zeta))
                if j == i:
                    want = 0 if zeta < xi else 1
                    if val != want:
                        v.append(
                            Violation("c", ((i, xi), alpha, (j, zeta)), "column step broken")
                        )
                elif val != p.fval((i, 0), alpha, (j, zeta)):
                    v.append(
                        Violation("c", ((i, xi), alpha, (j, zeta)), "off-column disagreement")
                    )


# ---------------------------------------------------------------------------
# order
# ---------------------------------------------------------------------------

def leq(params: PosetParams, p: Cond, q: Cond) -> bool:
    """The extension order, checked literally per kind."""
    kind = params.kind
    if type(p) is not type(q):
        raise BaforgeError("kind mismatch in order check")
    if kind == "qmln":
        if not set(p.w) <= set(q.w):
            return False
        ppos = [q.w.index(l) for l in p.w]
        fset = set(p.F)
        # on a finite world the closure of the family is the family itself
        if not all(tuple(g[i] for i in ppos) in fset or not p.w for g in q.F):
            return False
        return all(any(all(g[q.w.index(l)] == row[j] for j, l in enumerate(p.w)) for g in q.F) for row in p.F)
    if kind == "qstar":
        if not set(p.u) <= set(q.u):
            return False
        pdom = p.domain
        old = {
            (ell, alpha): tuple(q.value(ell, alpha, t) for t in pdom)
            for ell in range(3)
            for alpha in q.u
        }
        for alpha in p.u:
            for ell in range(3):
                if old[(ell, alpha)] != tuple(p.value(ell, alpha, t) for t in pdom):
                    return False
        allowed = {tuple(p.value(k, beta, t) for t in pdom) for beta in p.u for k in range(3)}
        return all(old[(ell, alpha)] in allowed for alpha in q.u for ell in range(3))
    if kind in ("pk", "pk0"):
        if not (set(p.w) <= set(q.w) and set(p.u) <= set(q.u)):
            return False
        if set(p.a) != set(q.a) & set(p.w):
            return False
        for s0, s1 in pk_eligible_pairs(p.u):
            if q.ymap[(s0, s1)] != p.ymap[(s0, s1)]:
                return False
        for s in p.u:
            if any(q.fval(s, t) != p.fval(s, t) for t in p.u):
                return False
        zero = tuple(0 for _ in p.u)
        patterns = {tuple(p.fval(t, t2) for t2 in p.u) for t in p.u}
        patterns.add(zero)
        return all(tuple(q.fval(s, t) for t in p.u) in patterns for s in q.u)
    if kind == "qs":
        if not (p.gamma <= q.gamma and set(p.w) <= set(q.w) and set(p.u) <= set(q.u)):
            return False
        for s in p.u:
            for alpha in range(p.gamma):
                if any(q.fval(s, alpha, t) != p.fval(s, alpha, t) for t in p.u):
                    return False
        zero = tuple(0 for _ in p.u)
        patterns = {
            tuple(p.fval(t, beta, t2) for t2 in p.u)
            for t in p.u
            for beta in range(p.gamma)
        }
        patterns.add(zero)
        return all(
            tuple(q.fval(s, alpha, t) for t in p.u) in patterns
            for s in q.u
            for alpha in range(q.gamma)
        )
    raise ValueError(kind)


# ---------------------------------------------------------------------------
# presented algebras of conditions
# ---------------------------------------------------------------------------

def algebra_of(params: PosetParams, cond: Cond) -> Presentation:
    """The condition's presentation; pk/pk0/qs include the constant-zero map."""
    kind = params.kind
    if kind == "qmln":
        world = World.of(plain(l) for l in cond.w)
        fam = [TwoValuedMap(world, row) for row in cond.F]
        return Presentation(world, tuple(fam))
    if kind == "qstar":
        world = World.of(pair(*t) for t in cond.domain)
        fam = [
            TwoValuedMap(world, tuple(cond.value(ell, alpha, t) for t in cond.domain))
            for alpha in cond.u
            for ell in range(3)
        ]
        return Presentation(world, tuple(fam))
    if kind in ("pk", "pk0"):
        world = World.of(pair(*s) for s in cond.u)
        fam = [
            TwoValuedMap(world, tuple(cond.fval(s, t) for t in cond.u)) for s in cond.u
        ]
        fam.append(TwoValuedMap.constant(world, 0))
        return Presentation(world, tuple(fam))
    if kind == "qs":
        world = World.of(pair(*s) for s in cond.u)
        fam = [
            TwoValuedMap(world, tuple(cond.fval(s, alpha, t) for t in cond.u))
            for s in cond.u
            for alpha in range(cond.gamma)
        ]
        fam.append(TwoValuedMap.constant(world, 0))
        return Presentation(world, tuple(fam))
    raise ValueError(kind)


def generator_elements(
    params: PosetParams, cond: Cond
) -> tuple[dict[Label, Element], FiniteAlgebra, Presentation]:
    """Generator label -> Element map in the condition's concrete algebra."""
    pres = algebra_of(params, cond)
    alg = algebra_of_presentation(pres)
    return {lab: alg.generator(lab) for lab in pres.world}, alg, pres


# ---------------------------------------------------------------------------
# isomorphisms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Iso:
    """Structure-respecting bijection between two conditions of one kind."""

    kind: str
    level_map: tuple[tuple[int, int], ...]
    pair_map: tuple[tuple[tuple[int, int], tuple[int, int]], ...] = ()

    @cached_property
    def levels(self) -> dict[int, int]:
        return dict(self.level_map)

    @cached_property
    def pairs(self) -> dict[tuple[int, int], tuple[int, int]]:
        return dict(self.pair_map)

    def map_level(self, beta: int) -> int:
        return self.levels[beta]

    def map_pair(self, s: tuple[int, int]) -> tuple[int, int]:
        return self.pairs[s]

    def map_label(self, lab: Label) -> Label:
        if len(lab.parts) == 1:
            return plain(self.levels[lab.parts[0]])
        if self.pairs:
            return pair(*self.pairs[tuple(lab.parts)])
        # qstar world labels are (alpha, i) with only alpha relabeled
        return pair(self.levels[lab.parts[0]], lab.parts[1])

    def map_term(self, t: Term) -> Term:
        labs = t.labels()
        return subst_labels(t, {lab: self.map_label(lab) for lab in labs})

    def inverse(self) -> "Iso":
        return Iso(
            self.kind,
            tuple((b, a) for a, b in self.level_map),
            tuple((t, s) for s, t in self.pair_map),
        )


def iso_find(params: PosetParams, p: Cond, q: Cond) -> Iso | None:
    """The unique order-respecting candidate bijection, checked clause by clause.

    The defining clauses force order preservation on levels and on each
    column, so at most one bijection can work; return it or None.
    """
    kind = params.kind
    if kind == "qmln":
        if len(p.w) != len(q.w) or len(p.F) != len(q.F):
            return None
        levels = tuple(zip(p.w, q.w))
        lm = dict(levels)
        transported = {tuple(g[q.w.index(lm[l])] for l in p.w) for g in q.F}
        if transported != set(p.F):
            return None
        return Iso(kind, levels)
    if kind == "qstar":
        if len(p.u) != len(q.u):
            return None
        levels = tuple(zip(p.u, q.u))
        lm = dict(levels)
        for alpha in p.u:
            for ell in range(3):
                for (beta, i) in p.domain:
                    if p.value(ell, alpha, (beta, i)) != q.value(ell, lm[alpha], (lm[beta], i)):
                        return None
        return Iso(kind, levels)
    if kind in ("pk", "pk0"):
        if len(p.w) != len(q.w) or len(p.u) != len(q.u):
            return None
        levels = tuple(zip(p.w, q.w))
        lm = dict(levels)
        pm = {(beta, xi): (lm[beta], xi) for (beta, xi) in p.u}
        if set(pm.values()) != set(q.u):
            return None
        for beta in p.w:
            if (beta in set(p.a)) != (lm[beta] in set(q.a)):
                return None
        for s in p.u:
            for t in p.u:
                if p.fval(s, t) != q.fval(pm[s], pm[t]):
                    return None
        for s0, s1 in pk_eligible_pairs(p.u):
            if set(q.ymap[(pm[s0], pm[s1])]) != {pm[s] for s in p.ymap[(s0, s1)]}:
                return None
        return Iso(kind, levels, tuple(sorted(pm.items())))
    if kind == "qs":
        if p.gamma != q.gamma or len(p.w) != len(q.w):
            return None
        levels = tuple(zip(p.w, q.w))
        lm = dict(levels)
        pm: dict[tuple[int, int], tuple[int, int]] = {}
        for i in p.w:
            col_p = sorted(p.column(i))
            col_q = sorted(q.column(lm[i]))
            if len(col_p) != len(col_q):
                return None
            for xi, zeta in zip(col_p, col_q):
                pm[(i, xi)] = (lm[i], zeta)
        if set(pm.values()) != set(q.u):
            return None
        for s in p.u:
            for alpha in range(p.gamma):
                for t in p.u:
                    if p.fval(s, alpha, t) != q.fval(pm[s], alpha, pm[t]):
                        return None
        return Iso(kind, levels, tuple(sorted(pm.items())))
    raise ValueError(kind)


# ---------------------------------------------------------------------------
# point extensions
# ---------------------------------------------------------------------------

def extend_point(params: PosetParams, p: Cond, t) -> Cond:
    """One-point extension; the output always validates and extends p.

    qmln: the independent-point extension (both values of the new generator
    allowed on top of every old map).  qstar: the three-map construction over
    the third map of the least anchor in u.  pk/pk0: the new pair's map is 1
    at itself and 0 elsewhere, old maps extend by 0, new cover sets are empty.
    """
    kind = params.kind
    if kind == "qmln":
        if t in p.w:
            raise InvalidConditionError(f"level {t} already present")
        w = tuple(sorted(p.w + (t,)))
        pos = w.index(t)
        rows = []
        for row in p.F:
            for b in (0, 1):
                rows.append(row[:pos] + (b,) + row[pos:])
        return QmlnCond(w, tuple(rows))
    if kind == "qstar":
        if t in p.u:
            raise InvalidConditionError(f"label {t} already present")
        if not p.u:
            raise InvalidConditionError("qstar extension needs an anchor in u")
        alpha0 = min(p.u)
        u = tuple(sorted(p.u + (t,)))
        maps: dict[tuple[int, int], dict[tuple[int, int], int]] = {}
        for alpha in p.u:
            for ell in range(3):
                m = {s: p.value(ell, alpha, s) for s in p.domain}
                m[(t, 0)] = 0
                m[(t, 1)] = 0
                maps[(ell, alpha)] = m
        base = {s: p.value(2, alpha0, s) for s in p.domain}
        for ell in range(2):
            m = dict(base)
            m[(t, 0)] = 1 - ell
            m[(t, 1)] = ell
            maps[(ell, t)] = m
        m = dict(base)
        m[(t, 0)] = 0
        m[(t, 1)] = 0
        maps[(2, t)] = m
        return qstar_from_maps(u, maps)
    if kind in ("pk", "pk0"):
        alpha, xi = t
        if t in set(p.u):
            raise InvalidConditionError(f"pair {t} already present")
        w = tuple(sorted(set(p.w) | {alpha}))
        new_pairs = sorted({(alpha, 0), (alpha, 1), (alpha, xi)} - set(p.u))
        u = tuple(sorted(set(p.u) | set(new_pairs)))
        fmaps: dict[tuple[int, int], dict[tuple[int, int], int]] = {}
        for s in p.u:
            m = {t2: p.fval(s, t2) for t2 in p.u}
            for t2 in new_pairs:
                m[t2] = 0
            fmaps[s] = m
        for s in new_pairs:
            fmaps[s] = {t2: 1 if t2 == s else 0 for t2 in u}
        ymaps = {}
        for s0, s1 in pk_eligible_pairs(u):
            if s0 in p._upos and s1 in p._upos:
                ymaps[(s0, s1)] = p.ymap[(s0, s1)]
            else:
                ymaps[(s0, s1)] = ()
        return pk_from_maps(p.variant, w, p.a, u, fmaps, ymaps)
    raise BaforgeError(f"extend_point is not defined for kind {kind!r}")


# ---------------------------------------------------------------------------
# E-relations and extension transfer (pk)
# ---------------------------------------------------------------------------

def _sup_below(levels: Iterable[int], beta: int) -> int:
    xs = [x for x in levels if x < beta]
    return max(xs) if xs else 0  # sup of the empty set is 0 by convention


def e_relation(params: PosetParams, alpha: int, p0: PkCond, tau0: Term, p1: PkCond, tau1: Term) -> str:
    """Classify the pair-of-pairs relation: 'none', 'E-' or 'E'.

    E-: isomorphic conditions agreeing below alpha, with the term transported
    by the isomorphism (semantic equality in the target algebra).  E adds the
    mod-K residue clause and the +K threshold clause on every level.
    """
    H = iso_find(params, p0, p1)
    if H is None:
        return "none"
    if {b for b in p0.w if b < alpha} != {b for b in p1.w if b < alpha}:
        return "none"
    pres1 = algebra_of(params, p1)
    if eval_term(pres1, H.map_term(tau0)) != eval_term(pres1, tau1):
        return "none"
    K = params.K
    for beta in p0.w:
        im = H.map_level(beta)
        d0 = beta - _sup_below(p0.w, beta)
        d1 = im - _sup_below(p1.w, im)
        if d0 % K != d1 % K:
            return "E-"
        if (beta >= _sup_below(p0.w, beta) + K) != (im >= _sup_below(p1.w, im) + K):
            return "E-"
    return "E"


def transfer_extension(
    params: PosetParams,
    alpha: int,
    p0: PkCond,
    tau0: Term,
    p1: PkCond,
    tau1: Term,
    q0: PkCond,
) -> PkCond:
    """Transport an extension q0 of p0 into an extension q1 of p1.

    One concrete realization: keep levels below alpha, send p0 levels along
    the p0->p1 isomorphism, and squeeze the remaining new levels order-
    preservingly into the matching gaps (fresh levels above everything for
    the trailing block).  Output is validated and satisfies both p1 <= q1
    and the weak relation between (q0, tau0) and (q1, tau1).
    """
    if e_relation(params, alpha, p0, tau0, p1, tau1) != "E":
        raise BaforgeError("transfer requires the strong relation on the inputs")
    if not leq(params, p0, q0):
        raise BaforgeError("transfer requires q0 to extend p0")
    H = iso_find(params, p0, p1)
    cap = params.level_cap
    top = max(set(p1.w) | set(q0.w), default=-1)
    glevel: dict[int, int] = {}
    last = -1
    trailing_base = top
    max_p0 = max(p0.w, default=-1)
    next_p0_image: dict[int, int] = {}
    sorted_p0 = sorted(p0.w)
    for x in sorted(q0.w):
        if x in H.levels:
            img = H.map_level(x)
            if img <= last:
                raise LabelSpaceError("no room to keep the transported order")
        elif x < alpha:
            img = x
        elif x > max_p0:
            trailing_base += 1
            img = max(trailing_base, last + 1, alpha)
            trailing_base = img
        else:
            img = max(last + 1, alpha)
        if cap is not None and img >= cap:
            raise LabelSpaceError("level cap exhausted during transfer")
        glevel[x] = img
        last = img

    def tpair(s: tuple[int, int]) -> tuple[int, int]:
        return (glevel[s[0]], s[1])

    u1 = sorted(tpair(s) for s in q0.u)
    fmaps = {
        tpair(s): {tpair(t): q0.fval(s, t) for t in q0.u} for s in q0.u
    }
    ymaps = {
        (tpair(s0), tpair(s1)): tuple(tpair(s) for s in q0.ymap[(s0, s1)])
        for s0, s1 in pk_eligible_pairs(q0.u)
    }
    q1 = pk_from_maps(
        q0.variant,
        [glevel[b] for b in q0.w],
        [glevel[b] for b in q0.a],
        u1,
        fmaps,
        ymaps,
    )
    res = validate(params, q1)
    if not res.ok:
        raise BaforgeError(f"transferred condition is invalid: {res.violations[0]}")
    if not leq(params, p1, q1):
        raise BaforgeError("transferred condition does not extend the target")
    if e_relation(params, alpha, q0, tau0, q1, tau1) == "none":
        raise BaforgeError("transferred pair does not satisfy the weak relation")
    return q1


# ---------------------------------------------------------------------------
# layer structure (pk / pk0)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LayerReport:
    ok: bool
    failures: tuple[str, ...]
    checked_pairs: int


def layer_invariants(params: PosetParams, p: PkCond) -> LayerReport:
    """Per-condition layer checks in the condition's own algebra.

    (1) each ordered pair's signed meet is covered by its y-set's join,
    (2) each generator is outside its layer ideal and projects to an atom of
        the quotient by it,
    (3) the a-indexed degree-zero generators are irredundant (base variant)
        or pairwise incomparable (zero variant).
    """
    gens, alg, _pres = generator_elements(params, p)
    x = {s: gens[pair(*s)] for s in p.u}
    fails: list[str] = []
    checked = 0

    def layer_join(level: int) -> Element:
        return join_all(alg, [x[t] for t in p.u if t[0] < level])

    for s0, s1 in pk_eligible_pairs(p.u):
        checked += 1
        signed = x[s1] if p.fval(s0, s1) == 0 else ~x[s1]
        cover = join_all(alg, [x[s] for s in p.ymap[(s0, s1)]])
        if not (x[s0] & signed) <= cover:
            fails.append(f"cover relation fails at {(s0, s1)}")
    for s in p.u:
        J = layer_join(s[0])
        if x[s] <= J:
            fails.append(f"generator {s} lies in its layer ideal")
            continue
        survivors = alg.mask & ~J.bits
        image = x[s].bits & survivors
        if bin(image).count("1") != 1:
            fails.append(f"generator {s} is not an atom modulo its layer ideal")
    a_gens = {x[(beta, 0)] for beta in p.a}
    if len(a_gens) == len(p.a) and len(p.a) >= 1:
        kind = InvariantKind("irr", None) if p.variant == "base" else InvariantKind("inc")
        if len(p.a) > 1 and not check_property(kind, alg, frozenset(a_gens)):
            fails.append("a-indexed generators fail their structural property")
    elif len(a_gens) != len(p.a):
        fails.append("a-indexed generators collide")
    return LayerReport(not fails, tuple(fails), checked)


@dataclass(frozen=True)
class NormalForm:
    sign: str  # '+' for x_s ∧ b, '-' for x_s ∧ -b
    v0: tuple[tuple[int, int], ...]
    v1: tuple[tuple[int, int], ...]


def layer_normal_form(params: PosetParams, p: PkCond, s: tuple[int, int], b: Element) -> NormalForm:
    """Layered representation of x_s ∧ b (or its complemented mate).

    Follows the recursive good-cover procedure: whichever of x_s ∧ b,
    x_s ∧ -b lies in the layer ideal at level(s) is written as a join of
    generators below level(s), each stripped of the lower members of the
    support set.  Covers are chosen minimal by size then lexicographically.
    The identity is verified by evaluation before returning; failures
    surface as :class:`NormalFormFailure`.
    """
    gens, alg, _pres = generator_elements(params, p)
    if b.alg != alg:
        raise BaforgeError("element is not in the condition's algebra")
    x = {t: gens[pair(*t)] for t in p.u}

    def layer_join(level: int) -> Element:
        return join_all(alg, [x[t] for t in p.u if t[0] < level])

    target_plus = x[s] & b
    if target_plus <= layer_join(s[0]):
        sign, c = "+", target_plus
    else:
        sign, c = "-", x[s] & ~b

    v1: set[tuple[int, int]] = set()
    work = [s]
    done: set[tuple[int, int]] = set()
    while work:
        t = work.pop()
        if t in done:
            continue
        done.add(t)
        for e in (x[t] & c, x[t] & ~c):
            if e.is_zero or not e <= layer_join(t[0]):
                continue
            pool = [
                t2
                for t2 in p.u
                if t2[0] < t[0]
                and not (x[t2] & e).is_zero
                and not (x[t2] & e) <= layer_join(t2[0])
            ]
            cover = None
            for r in range(1, len(pool) + 1):
                for combo in itertools.combinations(sorted(pool), r):
                    if e <= join_all(alg, [x[t2] for t2 in combo]):
                        cover = combo
                        break
                if cover:
                    break
            if cover is None:
                raise NormalFormFailure(p, s, b, f"no good cover at {t}")
            for t2 in cover:
                v1.add(t2)
                if t2 not in done:
                    work.append(t2)

    v0 = sorted(
        t for t in v1 if not (x[t] & c).is_zero and not (x[t] & c) <= layer_join(t[0])
    )
    rhs = alg.zero
    for t in v0:
        piece = x[t]
        for t2 in v1:
            if t2[0] < t[0]:
                piece = piece & ~x[t2]
        rhs = rhs | piece
    if rhs != c:
        raise NormalFormFailure(p, s, b, "assembled join does not reproduce the target")
    return NormalForm(sign, tuple(v0), tuple(sorted(v1)))


# ---------------------------------------------------------------------------
# Δ-system instantiation
# ---------------------------------------------------------------------------

def instantiate_copies(params: PosetParams, template: Cond, count: int, heart_size: int) -> list[Cond]:
    """Pairwise isomorphic copies whose worlds form a separated Δ-system.

    The heart is the initial segment (first ``heart_size`` levels, or labels
    for qstar) of the template's world; copy 0 is the template itself and
    later copies move the tail to fresh blocks above everything previous.
    """
    if count < 1:
        raise ValueError("count must be positive")
    kind = params.kind
    if kind == "qmln":
        base_levels = template.w
    elif kind == "qstar":
        base_levels = template.u
    elif kind in ("pk", "pk0"):
        base_levels = template.w
    elif kind == "qs":
        base_levels = template.w
    else:
        raise ValueError(kind)
    if not 0 <= heart_size <= len(base_levels):
        raise ValueError("heart size out of range")
    heart = base_levels[:heart_size]
    tail = base_levels[heart_size:]
    out = [template]
    top = max(base_levels, default=-1)
    for k in range(1, count):
        shift = {h: h for h in heart}
        for j, lev in enumerate(tail):
            shift[lev] = top + 1 + (k - 1) * len(tail) + j
        out.append(_relabel(params, template, shift))
    if kind == "qs":
        S = params.good
        for cond in out[1:]:
            for i in cond.w:
                if i >= S.cf_lambda:
                    raise LabelSpaceError("column space exhausted while shifting copies")
    elif params.level_cap is not None:
        for cond in out[1:]:
            levels = cond.w if kind != "qstar" else cond.u
            if levels and max(levels) >= params.level_cap:
                raise LabelSpaceError("level cap exhausted while shifting copies")
    return out


def _relabel(params: PosetParams, cond: Cond, shift: Mapping[int, int]) -> Cond:
    kind = params.kind
    if kind == "qmln":
        order = sorted(cond.w, key=lambda l: shift[l])
        if order != list(cond.w):
            raise LabelSpaceError("relabeling must preserve the level order")
        return QmlnCond(tuple(shift[l] for l in cond.w), cond.F)
    if kind == "qstar":
        u = [shift[a] for a in cond.u]
        if u != sorted(u):
            raise LabelSpaceError("relabeling must preserve the label order")
        maps = {}
        sh = dict(shift)
        for alpha in cond.u:
            for ell in range(3):
                maps[(ell, sh[alpha])] = {
                    (sh[b], i): cond.value(ell, alpha, (b, i)) for (b, i) in cond.domain
                }
        return qstar_from_maps(u, maps)
    if kind in ("pk", "pk0"):
        w = [shift[b] for b in cond.w]
        if w != sorted(w):
            raise LabelSpaceError("relabeling must preserve the level order")

        def tp(s):
            return (shift[s[0]], s[1])

        fmaps = {tp(s): {tp(t): cond.fval(s, t) for t in cond.u} for s in cond.u}
        ymaps = {
            (tp(s0), tp(s1)): tuple(tp(s) for s in ys) for s0, s1, ys in cond.y
        }
        return pk_from_maps(
            cond.variant, w, [shift[b] for b in cond.a], [tp(s) for s in cond.u], fmaps, ymaps
        )
    if kind == "qs":
        S = params.good
        w = [shift[i] for i in cond.w]
        if w != sorted(w):
            raise LabelSpaceError("relabeling must preserve the column order")

        def tp(s):
            i, xi = s
            i2 = shift[i]
            if i2 >= S.cf_lambda:
                raise LabelSpaceError(f"column {i2} is beyond the parameter's range")
            if xi == S.caps[i]:
                return (i2, S.caps[i2])
            if xi >= S.caps[i2]:
                raise LabelSpaceError(
                    f"interior index {xi} does not fit below the cap of column {i2}"
                )
            return (i2, xi)

        fmaps = {}
        for s in cond.u:
            for alpha in range(cond.gamma):
                fmaps[(tp(s), alpha)] = {tp(t): cond.fval(s, alpha, t) for t in cond.u}
        return qs_from_maps(cond.gamma, w, [tp(s) for s in cond.u], fmaps)
    raise ValueError(kind)


def relabel_qs_pairs(params: PosetParams, cond: QsCond, pair_map: Mapping[tuple[int, int], tuple[int, int]]) -> QsCond:
    """Transport a qs condition along a pair bijection.

    The map must send columns to columns order-preservingly and each
    column's index set to the target column's index set order-preservingly;
    pairs outside the mapping are kept.
    """
    def tp(s):
        return pair_map.get(s, s)

    cols: dict[int, int] = {}
    for s in cond.u:
        i2 = tp(s)[0]
        if cols.setdefault(s[0], i2) != i2:
            raise LabelSpaceError("pair map splits a column")
    w = [cols[i] for i in cond.w]
    if w != sorted(w) or len(set(w)) != len(w):
        raise LabelSpaceError("pair map must preserve the column order")
    for i in cond.w:
        src = sorted(xi for (j, xi) in cond.u if j == i)
        dst = [tp((i, xi))[1] for xi in src]
        if dst != sorted(dst) or len(set(dst)) != len(dst):
            raise LabelSpaceError("pair map must preserve the index order in a column")
    fmaps = {}
    for s in cond.u:
        for alpha in range(cond.gamma):
            fmaps[(tp(s), alpha)] = {tp(t): cond.fval(s, alpha, t) for t in cond.u}
    return qs_from_maps(cond.gamma, w, [tp(s) for s in cond.u], fmaps)


# ---------------------------------------------------------------------------
# per-kind structural invariants used by tests and the CLI
# ---------------------------------------------------------------------------

def qs_free_sequence_holds(params: PosetParams, p: QsCond) -> bool:
    """Split-free property of each column's complemented generators.

    For every column i and nonempty position sets F < G drawn from the
    interior of the column, the meet of the -x over F with the meet of the
    x over G is nonzero in the condition's algebra.
    """
    if p.gamma < 1:
        return True
    gens, alg, _ = generator_elements(params, p)
    S = params.good
    for i in p.w:
        positions = [xi for xi in p.column(i) if xi < S.caps[i]]
        for cut in range(len(positions)):
            front, back = positions[: cut + 1], positions[cut + 1 :]
            if not front or not back:
                continue
            elem = alg.one
            for xi in front:
                elem = elem & ~gens[pair(i, xi)]
            for xi in back:
                elem = elem & gens[pair(i, xi)]
            if elem.is_zero:
                return False
    return True


def qmln_generators_independent(params: PosetParams, p: QmlnCond) -> bool:
    """n-independence of the generators in the condition's algebra."""
    gens, alg, _ = generator_elements(params, p)
    xs = [gens[plain(l)] for l in p.w]
    limit = min(params.n, len(xs))
    for r in range(1, limit + 1):
        for combo in itertools.combinations(xs, r):
            for signs in itertools.product((0, 1), repeat=r):
                acc = alg.one
                for e, sg in zip(combo, signs):
                    acc = acc & (e if sg == 0 else ~e)
                if acc.is_zero:
                    return False
    return True
