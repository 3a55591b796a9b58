"""The amalgamation catalog: explicit common upper bounds with verified output.

Each rule takes a cleaned family of conditions (pairwise isomorphic, worlds
forming a separated delta-system, terms and variable tuples transported by
the isomorphisms), builds the upper bound by the rule's displayed tables,
and verifies three things before returning: the output validates, it
extends exactly the inputs the rule promises, and the rule's forced Boolean
relation holds in the output's algebra by evaluation.  A failure of any of
these is surfaced as an error carrying the offending instance; none is ever
repaired silently.

Terms are written over placeholder variables ``(var 0) .. (var k)``; the
per-input tuples say which generator each placeholder means in that input.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Sequence

from .core import (
    BaforgeError,
    Term,
    algebra_of_presentation,
    eval_term,
    gen_subalgebra,
    member_of_gen,
    pair,
    plain,
    subst_labels,
)
from .forcing import (
    Cond,
    Iso,
    PkCond,
    PosetParams,
    QmlnCond,
    QsCond,
    QStarCond,
    algebra_of,
    iso_find,
    leq,
    pk_eligible_pairs,
    pk_from_maps,
    qs_from_maps,
    qstar_from_maps,
    validate,
)

RULE_IDS = (
    "qmln-pair",
    "qmln-tbound",
    "qstar-pair",
    "qstar-six",
    "pk-pair",
    "pk-inc",
    "pk-ideal",
    "pk0-seven",
    "qs-pair",
    "qs-free",
    "qs-depth",
)


class CleaningViolation(BaforgeError):
    pass


class AmalgamError(BaforgeError):
    """Postcondition failure: would contradict a proof step; carries details."""


@dataclass(frozen=True)
class AmalgamAux:
    term: Term | None = None
    var_tuples: tuple[tuple | None, ...] | None = None
    i0: int | None = None
    i1: int | None = None


@dataclass(frozen=True)
class AmalgamResult:
    rule: str
    output: Cond
    extends: tuple[int, ...]
    transcript: dict


def _tuple_term(term: Term, labels: Sequence) -> Term:
    """Instantiate a placeholder term at a concrete variable tuple."""
    mapping = {}
    for j, lab in enumerate(labels):
        mapping[plain(j)] = pair(*lab) if isinstance(lab, tuple) else plain(lab)
    out = subst_labels(term, mapping)
    return out


def _check_iso_family(params: PosetParams, conds: Sequence[Cond]) -> list[list[Iso | None]]:
    isos = [[None] * len(conds) for _ in conds]
    for i, a in enumerate(conds):
        for j, b in enumerate(conds):
            if i != j:
                isos[i][j] = iso_find(params, a, b)
                if isos[i][j] is None:
                    raise CleaningViolation(f"inputs {i} and {j} are not isomorphic")
    return isos


def _delta_check(parts: Sequence[Sequence[int]], what: str) -> tuple[int, ...]:
    """Pairwise-identical intersection plus the separation ordering."""
    sets = [set(p) for p in parts]
    heart = sets[0].copy()
    for s in sets[1:]:
        heart &= s
    for i, j in itertools.combinations(range(len(sets)), 2):
        if sets[i] & sets[j] != heart:
            raise CleaningViolation(f"{what}: intersection of {i},{j} is not the heart")
    tails = [sorted(s - heart) for s in sets]
    top = max(heart, default=-1)
    for i, tail in enumerate(tails):
        if not tail:
            continue
        if min(tail) <= top:
            raise CleaningViolation(f"{what}: tail {i} is not above the heart")
    for i, j in itertools.combinations(range(len(tails)), 2):
        if tails[i] and tails[j] and max(tails[i]) >= min(tails[j]):
            raise CleaningViolation(f"{what}: tails {i},{j} are not separated in order")
    return tuple(sorted(heart))


def _check_tuples(
    isos, conds: Sequence[Cond], tuples: Sequence[Sequence], what: str, as_pairs: bool
) -> None:
    for i, j in itertools.combinations(range(len(conds)), 2):
        H = isos[i][j]
        if as_pairs:
            moved = [H.map_pair(s) if H.pairs else (H.map_level(s[0]), s[1]) for s in tuples[i]]
        else:
            moved = [H.map_level(l) for l in tuples[i]]
        if list(moved) != list(tuples[j]):
            raise CleaningViolation(f"{what}: tuple of input {j} is not the transport of input {i}")


def check_cleaned(params: PosetParams, rule: str, inputs: Sequence[Cond], aux: AmalgamAux):
    """Verify the rule's hypotheses; raise CleaningViolation otherwise."""
    spec = _RULES[rule]
    if params.kind != spec.kind:
        raise CleaningViolation(f"rule {rule} needs kind {spec.kind}")
    if spec.arity is not None and len(inputs) != spec.arity:
        raise CleaningViolation(f"rule {rule} takes {spec.arity} inputs")
    for i, c in enumerate(inputs):
        res = validate(params, c)
        if not res.ok:
            raise CleaningViolation(f"input {i} invalid: {res.violations[0]}")
    isos = _check_iso_family(params, inputs)

    if rule in ("qmln-pair", "qmln-tbound"):
        _delta_check([c.w for c in inputs], "worlds")
        if rule == "qmln-tbound":
            n = params.n
            N = len(inputs) - 1
            if N < 2 ** -(-n // 2) + n:
                raise CleaningViolation("need at least 2^ceil(n/2) + n later inputs")
            if aux.term is None or aux.var_tuples is None:
                raise CleaningViolation("qmln-tbound needs a term and variable tuples")
            for i, c in enumerate(inputs):
                if not set(aux.var_tuples[i]) <= set(c.w):
                    raise CleaningViolation(f"tuple of input {i} leaves its world")
            _check_tuples(isos, inputs, aux.var_tuples, "tbound tuples", as_pairs=False)
    elif rule in ("qstar-pair", "qstar-six"):
        _delta_check([c.u for c in inputs], "label sets")
        if rule == "qstar-six" and aux.term is None:
            raise CleaningViolation("qstar-six needs the shared term")
        if rule == "qstar-six":
            arity = 2 * len(inputs[0].u)
            for lab in aux.term.labels():
                if lab.parts[0] >= arity:
                    raise CleaningViolation("term placeholder beyond the domain enumeration")
    elif rule in ("pk-pair", "pk-inc", "pk-ideal", "pk0-seven"):
        _delta_check([c.w for c in inputs], "worlds")
        heart_pairs = _delta_check([c.u for c in inputs], "pair sets")
        wstar = set.intersection(*[set(c.w) for c in inputs])
        for c in inputs:
            if {s for s in c.u if s[0] in wstar} != set(heart_pairs):
                raise CleaningViolation("heart-level pairs are not shared identically")
        for i, j in itertools.combinations(range(len(inputs)), 2):
            H = isos[i][j]
            if any(H.map_pair(s) != s for s in heart_pairs):
                raise CleaningViolation("isomorphism moves the heart")
        if rule == "pk-inc":
            if aux.term is None or aux.var_tuples is None:
                raise CleaningViolation("pk-inc needs a term and tuples for inputs 1 and 2")
            v1, v2 = aux.var_tuples[1], aux.var_tuples[2]
            if v1 is None or v2 is None:
                raise CleaningViolation("pk-inc tuples must cover inputs 1 and 2")
            H12 = isos[1][2]
            if [H12.map_pair(s) for s in v1] != list(v2):
                raise CleaningViolation("v2 must be the transport of v1")
        if rule in ("pk-ideal", "pk0-seven"):
            if aux.term is None or aux.var_tuples is None or any(
                t is None for t in aux.var_tuples
            ):
                raise CleaningViolation(f"{rule} needs a term and one tuple per input")
            _check_tuples(isos, inputs, aux.var_tuples, f"{rule} tuples", as_pairs=True)
    elif rule in ("qs-pair", "qs-free", "qs-depth"):
        if rule == "qs-pair":
            _delta_check([c.u for c in inputs], "pair sets")
            return isos
        if aux.term is None or aux.var_tuples is None or any(t is None for t in aux.var_tuples):
            raise CleaningViolation(f"{rule} needs a term and one tuple per input")
        if aux.i0 is None or aux.i1 is None:
            raise CleaningViolation(f"{rule} needs the block indices i0 and i1")
        _check_qs_square(params, inputs, isos, aux)
    return isos


def _check_qs_square(params: PosetParams, inputs: Sequence[QsCond], isos, aux: AmalgamAux):
    """The two-block delta-system shape behind the qs-free / qs-depth rules."""
    u = [set(c.u) for c in inputs]
    ustar = u[0] & u[1] & u[2] & u[3]
    u_i0 = u[0] & u[1]
    u_i1 = u[2] & u[3]
    for a in (0, 1):
        for b in (2, 3):
            if u[a] & u[b] != ustar:
                raise CleaningViolation("cross-group intersections must equal the global heart")
    for i, j in itertools.combinations(range(4), 2):
        H = isos[i][j]
        fixed = u_i0 if (i, j) == (0, 1) else u_i1 if (i, j) == (2, 3) else ustar
        if any(H.map_pair(s) != s for s in fixed):
            raise CleaningViolation("isomorphism moves a heart it must fix")
    for i in (0, 1):
        if {isos[i][2].map_pair(s) for s in u_i0} != u_i1:
            raise CleaningViolation("group hearts are not transported onto each other")
    star_cols = {i for (i, xi) in ustar}
    for col in star_cols:
        col_sets = [{xi for (i, xi) in c.u if i == col} for c in inputs]
        if any(cs != col_sets[0] for cs in col_sets[1:]):
            raise CleaningViolation("heart-column pair sets differ between inputs")
    if star_cols and aux.i0 <= max(star_cols):
        raise CleaningViolation("i0 must lie above every heart column")
    group0_cols = {i for c in inputs[:2] for (i, xi) in c.u}
    if aux.i1 <= aux.i0 + max(group0_cols, default=0):
        raise CleaningViolation("i1 must clear i0 plus every group-0 column")
    g1_own = {i for c in inputs[2:] for (i, xi) in c.u} - star_cols
    if g1_own and min(g1_own) < aux.i1:
        raise CleaningViolation("group-1 columns must start at i1")
    if g1_own and group0_cols - star_cols and max(group0_cols - star_cols) >= min(g1_own):
        raise CleaningViolation("group-0 and group-1 columns are not separated")
    _check_tuples(isos, inputs, aux.var_tuples, "square tuples", as_pairs=True)


# ---------------------------------------------------------------------------
# assembly helpers
# ---------------------------------------------------------------------------

class _MapBuilder:
    """Piecewise map assembly with an agreement check on overlaps."""

    def __init__(self, name: str):
        self.name = name
        self.vals: dict = {}

    def put(self, key, value: int) -> None:
        old = self.vals.get(key)
        if old is not None and old != value:
            raise AmalgamError(f"{self.name}: inconsistent pieces at {key}")
        self.vals[key] = value

    def fill_zero(self, keys) -> None:
        for k in keys:
            self.put(k, 0)


# ---------------------------------------------------------------------------
# rule constructions
# ---------------------------------------------------------------------------

def _amalg_qmln_pair(params, inputs, aux, isos):
    p0, p1 = inputs
    wq = tuple(sorted(set(p0.w) | set(p1.w)))
    heart = sorted(set(p0.w) & set(p1.w))
    rows = set()
    for f in p0.F:
        for g in p1.F:
            if all(p0.row_value(f, l) == p1.row_value(g, l) for l in heart):
                merged = dict(zip(p0.w, f))
                merged.update(zip(p1.w, g))
                rows.add(tuple(merged[l] for l in wq))
    out = QmlnCond(wq, tuple(sorted(rows)))
    return out, (0, 1), {"relation": "common upper bound"}


def _amalg_qmln_tbound(params, inputs, aux, isos):
    heart = sorted(set.intersection(*[set(c.w) for c in inputs]))
    wq = sorted(set().union(*[set(c.w) for c in inputs]))
    terms = [_tuple_term(aux.term, tup) for tup in aux.var_tuples]
    rows = []
    by_heart: list[dict[tuple, list]] = []
    for c in inputs:
        groups: dict[tuple, list] = {}
        for f in c.F:
            key = tuple(c.row_value(f, l) for l in heart)
            groups.setdefault(key, []).append(f)
        by_heart.append(groups)
    for key in by_heart[0]:
        if any(key not in g for g in by_heart):
            continue
        for combo in itertools.product(*[g[key] for g in by_heart]):
            assign = {}
            for c, f in zip(inputs, combo):
                for l, b in zip(c.w, f):
                    assign[plain(l)] = b
            if terms[0].eval_assignment(assign) == 1:
                if not any(terms[j].eval_assignment(assign) == 1 for j in range(1, len(inputs))):
                    continue
            rows.append(tuple(assign[plain(l)] for l in wq))
    out = QmlnCond(tuple(wq), tuple(sorted(set(rows))))
    return out, tuple(range(len(inputs))), {
        "relation": "tau(v0) ∧ ⋀_j -tau(vj) = 0",
        "terms": [repr(t) for t in terms],
    }


def _amalg_qstar_pair(params, inputs, aux, isos):
    p, q = inputs
    H = isos[0][1]
    ur = tuple(sorted(set(p.u) | set(q.u)))
    shared = set(p.u) & set(q.u)
    dom = [(a, i) for a in ur for i in (0, 1)]
    maps = {}
    for alpha in ur:
        for ell in range(3):
            mb = _MapBuilder(f"qstar-pair f[{ell},{alpha}]")
            if alpha in shared:
                for t in p.domain:
                    mb.put(t, p.value(ell, alpha, t))
                for t in q.domain:
                    mb.put(t, q.value(ell, alpha, t))
            elif alpha in set(p.u):
                for t in p.domain:
                    mb.put(t, p.value(ell, alpha, t))
                ha = H.map_level(alpha)
                for t in q.domain:
                    if t not in set(p.domain):
                        mb.put(t, q.value(2, ha, t))
            else:
                for t in q.domain:
                    mb.put(t, q.value(ell, alpha, t))
                ha = H.inverse().map_level(alpha)
                for t in p.domain:
                    if t not in set(q.domain):
                        mb.put(t, p.value(2, ha, t))
            maps[(ell, alpha)] = {t: mb.vals[t] for t in dom}
    out = qstar_from_maps(ur, maps)
    return out, (0, 1), {"relation": "common upper bound"}


def _amalg_qstar_six(params, inputs, aux, isos):
    ustar = set.intersection(*[set(c.u) for c in inputs])
    uq = tuple(sorted(set().union(*[set(c.u) for c in inputs])))
    dom = [(a, i) for a in uq for i in (0, 1)]
    owner = {}
    for i, c in enumerate(inputs):
        for alpha in c.u:
            owner.setdefault(alpha, i)
    maps = {}
    for alpha in uq:
        for ell in range(3):
            mb = _MapBuilder(f"qstar-six f[{ell},{alpha}]")
            if alpha in ustar:
                for i, c in enumerate(inputs):
                    for t in c.domain:
                        mb.put(t, c.value(ell, alpha, t))
            else:
                i = owner[alpha]
                c = inputs[i]
                if i == 0:
                    # the asymmetric block: sides 1,2 keep map 0, sides 3,4 keep map 1
                    keep = {0: {1: 0, 2: 0, 3: 2, 4: 2, 5: 2},
                            1: {1: 2, 2: 2, 3: 1, 4: 1, 5: 2},
                            2: {1: 2, 2: 2, 3: 2, 4: 2, 5: 2}}[ell]
                    for t in c.domain:
                        mb.put(t, c.value(ell, alpha, t))
                    for j in range(1, 6):
                        cj = inputs[j]
                        aj = isos[0][j].map_level(alpha)
                        for t in cj.domain:
                            mb.put(t, cj.value(keep[j], aj, t))
                else:
                    for t in c.domain:
                        mb.put(t, c.value(ell, alpha, t))
                    for j in range(6):
                        if j == i:
                            continue
                        cj = inputs[j]
                        aj = isos[i][j].map_level(alpha)
                        for t in cj.domain:
                            mb.put(t, cj.value(2, aj, t))
            maps[(ell, alpha)] = {t: mb.vals[t] for t in dom}
    out = qstar_from_maps(uq, maps)
    terms = [_tuple_term(aux.term, [tuple(t) for t in c.domain]) for c in inputs]
    return out, tuple(range(6)), {
        "relation": "tau(v0) ∈ span(tau(v1..v5))",
        "terms": [repr(t) for t in terms],
    }


def _pk_y_table(inputs, isos, s0, s1, owners, cross_rule):
    """Shared y-set case analysis for the pk amalgams."""
    for i, c in enumerate(inputs):
        if s0 in set(c.u) and s1 in set(c.u):
            return c.ymap[(s0, s1)]
    i, j = owners[s0], owners[s1]
    if i != 0 and j != 0:
        return cross_rule(i, j, s0, s1)
    if i == 0:
        k = j
        Hk0 = isos[k][0]
        back = Hk0.map_pair(s1)
        if back == s0:
            return ()
        if back[0] < s0[0]:
            return (back,)
        return inputs[0].ymap[(s0, back)]
    raise AmalgamError(f"unexpected y-case at {(s0, s1)}")


def _amalg_pk_pair(params, inputs, aux, isos):
    p0, p1, p2 = inputs
    uq = sorted(set(p0.u) | set(p1.u) | set(p2.u))
    owners = {}
    for i, c in enumerate(inputs):
        for s in c.u:
            owners.setdefault(s, i)
    u0 = set(p0.u)
    fmaps = {}
    for s in uq:
        mb = _MapBuilder(f"pk-pair f[{s}]")
        if s in u0:
            for i in range(3):
                Hi = isos[0][i]
                si = Hi.map_pair(s) if i else s
                for t in inputs[i].u:
                    mb.put(t, inputs[i].fval(si, t))
        elif owners[s] == 1:
            mb.fill_zero(p0.u)
            for t in p1.u:
                mb.put(t, p1.fval(s, t))
            mb.fill_zero(p2.u)
        else:
            mb.fill_zero(p0.u)
            mb.fill_zero(p1.u)
            for t in p2.u:
                mb.put(t, p2.fval(s, t))
        fmaps[s] = mb.vals

    def cross(i, j, s0, s1):
        # s0 in the first tail, s1 in the second: cover by the pulled-back point
        return (isos[j][0].map_pair(s1),)

    ymaps = {}
    for s0, s1 in pk_eligible_pairs(tuple(uq)):
        ymaps[(s0, s1)] = _pk_y_table(inputs, isos, s0, s1, owners, cross)
    wq = sorted(set(p0.w) | set(p1.w) | set(p2.w))
    aq = sorted(set(p1.a) | set(p2.a))
    out = pk_from_maps(p0.variant, wq, aq, uq, fmaps, ymaps)
    return out, (1, 2), {"relation": "upper bound of inputs 1 and 2 (input 0 not required)"}


def _amalg_pk_inc(params, inputs, aux, isos):
    p0, p1, p2 = inputs
    v1 = tuple(aux.var_tuples[1])
    v2 = tuple(aux.var_tuples[2])
    term = aux.term
    zero_val = term.eval_assignment({plain(j): 0 for j in range(len(v1))})
    case = "A" if zero_val == 0 else "B"
    want = 1 if case == "A" else 0
    tail2 = sorted(s for s in p2.u if s not in set(p0.u))
    star = None
    for s in tail2:
        val = term.eval_assignment(
            {plain(j): p2.fval(s, t) for j, t in enumerate(v2)}
        )
        if val == want:
            star = s
            break
    if star is None and tail2:
        star = tail2[0]
    owners = {}
    for i, c in enumerate(inputs):
        for s in c.u:
            owners.setdefault(s, i)
    uq = sorted(set(p0.u) | set(p1.u) | set(p2.u))
    u0 = set(p0.u)
    fmaps = {}
    for s in uq:
        mb = _MapBuilder(f"pk-inc f[{s}]")
        if s in u0:
            for i in range(3):
                si = isos[0][i].map_pair(s) if i else s
                for t in inputs[i].u:
                    mb.put(t, inputs[i].fval(si, t))
        elif owners[s] == 1:
            mb.fill_zero(p0.u)
            for t in p1.u:
                mb.put(t, p1.fval(s, t))
            for t in p2.u:
                mb.put(t, p2.fval(star, t))
        else:
            mb.fill_zero(p0.u)
            mb.fill_zero(p1.u)
            for t in p2.u:
                mb.put(t, p2.fval(s, t))
        fmaps[s] = mb.vals

    def cross(i, j, s0, s1):
        return (isos[i][0].map_pair(s0),)

    ymaps = {}
    for s0, s1 in pk_eligible_pairs(tuple(uq)):
        ymaps[(s0, s1)] = _pk_y_table(inputs, isos, s0, s1, owners, cross)
    wq = sorted(set(p0.w) | set(p1.w) | set(p2.w))
    aq = sorted(set(p1.a) | set(p2.a))
    out = pk_from_maps(p0.variant, wq, aq, uq, fmaps, ymaps)
    relation = "tau(v1) <= tau(v2)" if case == "A" else "tau(v1) >= tau(v2)"
    return out, (1, 2), {"relation": relation, "case": case, "star": star}


def _amalg_pk_ideal(params, inputs, aux, isos):
    q0, q1, q2, q3 = inputs
    tuples = [tuple(t) for t in aux.var_tuples]
    term = aux.term
    tail3 = sorted(s for s in q3.u if s not in set(q0.u))
    star = None
    for s in tail3:
        val = term.eval_assignment(
            {plain(j): q3.fval(s, t) for j, t in enumerate(tuples[3])}
        )
        if val == 1:
            star = s
            break
    if star is None and tail3:
        star = tail3[0]
    owners = {}
    for i, c in enumerate(inputs):
        for s in c.u:
            owners.setdefault(s, i)
    uq = sorted(set().union(*[set(c.u) for c in inputs]))
    u0 = set(q0.u)
    star2 = isos[3][2].map_pair(star) if star is not None else None
    fmaps = {}
    for s in uq:
        mb = _MapBuilder(f"pk-ideal f[{s}]")
        if s in u0:
            for i in range(4):
                si = isos[0][i].map_pair(s) if i else s
                for t in inputs[i].u:
                    mb.put(t, inputs[i].fval(si, t))
        elif owners[s] == 1:
            mb.fill_zero(q0.u)
            for t in q1.u:
                mb.put(t, q1.fval(s, t))
            for t in q2.u:
                mb.put(t, q2.fval(star2, t))
            for t in q3.u:
                mb.put(t, q3.fval(star, t))
        elif owners[s] == 2:
            mb.fill_zero(q0.u)
            mb.fill_zero(q1.u)
            for t in q2.u:
                mb.put(t, q2.fval(s, t))
            for t in q3.u:
                mb.put(t, q3.fval(star, t))
        else:
            mb.fill_zero(q0.u)
            mb.fill_zero(q1.u)
            mb.fill_zero(q2.u)
            for t in q3.u:
                mb.put(t, q3.fval(s, t))
        fmaps[s] = mb.vals

    def cross(i, j, s0, s1):
        return (isos[i][0].map_pair(s0),)

    ymaps = {}
    for s0, s1 in pk_eligible_pairs(tuple(uq)):
        ymaps[(s0, s1)] = _pk_y_table(inputs, isos, s0, s1, owners, cross)
    wq = sorted(set().union(*[set(c.w) for c in inputs]))
    aq = sorted(set(q1.a) | set(q2.a) | set(q3.a))
    out = pk_from_maps(q0.variant, wq, aq, uq, fmaps, ymaps)
    return out, (1, 2, 3), {"relation": "tau2 <= tau1 ∨ tau3", "star": star}


def _amalg_pk0_seven(params, inputs, aux, isos):
    ps = inputs
    owners = {}
    for i, c in enumerate(ps):
        for s in c.u:
            owners.setdefault(s, i)
    uq = sorted(set().union(*[set(c.u) for c in ps]))
    u0 = set(ps[0].u)
    zero_on = {
        1: (0, 2, 4),
        2: (0, 1, 5),
        3: (0, 1, 2, 6),
    }
    copy_from = {
        1: (1, 3, 5, 6),
        2: (2, 3, 4, 6),
        3: (3, 4, 5),
    }
    fmaps = {}
    for s in uq:
        mb = _MapBuilder(f"pk0-seven f[{s}]")
        if s in u0:
            for i in range(7):
                si = isos[0][i].map_pair(s) if i else s
                for t in ps[i].u:
                    mb.put(t, ps[i].fval(si, t))
        else:
            i = owners[s]
            if i in zero_on:
                for j in zero_on[i]:
                    mb.fill_zero(ps[j].u)
                for j in copy_from[i]:
                    sj = isos[i][j].map_pair(s) if j != i else s
                    for t in ps[j].u:
                        mb.put(t, ps[j].fval(sj, t))
            else:
                for j in range(7):
                    if j != i:
                        mb.fill_zero(ps[j].u)
                for t in ps[i].u:
                    mb.put(t, ps[i].fval(s, t))
        fmaps[s] = mb.vals

    def ymap_for(s0, s1):
        for i, c in enumerate(ps):
            if s0 in set(c.u) and s1 in set(c.u):
                return c.ymap[(s0, s1)]
        i, j = owners[s0], owners[s1]
        if i == 0:
            back = isos[j][0].map_pair(s1)
            if back == s0:
                return ()
            if back[0] < s0[0]:
                return (back,)
            return ps[0].ymap[(s0, back)]
        chain = tuple(isos[i][k].map_pair(s0) for k in range(i))
        if j == 0:
            raise AmalgamError(f"ordered pair {(s0, s1)} crosses downward")
        back = isos[j][i].map_pair(s1)
        if back == s0:
            return chain
        if back[0] < s0[0]:
            return chain + (back,)
        return chain + ps[i].ymap[(s0, back)]

    ymaps = {}
    for s0, s1 in pk_eligible_pairs(tuple(uq)):
        ymaps[(s0, s1)] = tuple(sorted(set(ymap_for(s0, s1))))
    wq = sorted(set().union(*[set(c.w) for c in ps]))
    aq = sorted(set().union(*[set(ps[i].a) for i in range(3, 7)]))
    out = pk_from_maps(ps[0].variant, wq, aq, uq, fmaps, ymaps)
    return out, (3, 4, 5, 6), {
        "relation": "tau(v3) = (tau(v4)∧tau(v5)) ∨ (tau(v4)∧tau(v6)) ∨ (tau(v5)∧tau(v6))"
    }


def _amalg_qs_pair(params, inputs, aux, isos):
    p, q = inputs
    H = isos[0][1]
    S = params.good
    ur = sorted(set(p.u) | set(q.u))
    wp, wq_ = set(p.w), set(q.w)
    gamma = p.gamma
    fmaps = {}
    for (i, xi) in ur:
        for alpha in range(gamma):
            mb = _MapBuilder(f"qs-pair f[{(i, xi)},{alpha}]")
            for (j, zeta) in ur:
                if j == i:
                    mb.put((j, zeta), 0 if zeta < xi else 1)
            if i in wp and i not in wq_:
                for t in p.u:
                    if t[0] != i:
                        mb.put(t, p.fval((i, xi), alpha, t))
                hi = H.map_level(i)
                for t in q.u:
                    if t[0] != i:
                        mb.put(t, q.fval((hi, 0), alpha, t))
            elif i in wq_ and i not in wp:
                for t in q.u:
                    if t[0] != i:
                        mb.put(t, q.fval((i, xi), alpha, t))
                hi = H.inverse().map_level(i)
                for t in p.u:
                    if t[0] != i:
                        mb.put(t, p.fval((hi, 0), alpha, t))
            else:
                for t in p.u:
                    if t[0] != i:
                        mb.put(t, p.fval((i, 0), alpha, t))
                for t in q.u:
                    if t[0] != i:
                        mb.put(t, q.fval((i, 0), alpha, t))
            fmaps[((i, xi), alpha)] = mb.vals
    out = qs_from_maps(gamma, sorted(wp | wq_), ur, fmaps)
    return out, (0, 1), {"relation": "common upper bound"}


def _qs_square_assemble(params, inputs, aux, isos, crossing: bool):
    """Shared assembly for the two four-condition qs amalgams.

    ``crossing`` False builds the free-sequence bound (tau00∧tau01∧tau10 <=
    tau11); True builds the depth bound (tau01∧-tau00 <= tau10∧-tau11).

    Per output column, one off-column map is assembled from the displayed
    pieces and shared by every index of that column; the per-index part is
    the column step.  This is what the off-column-agreement clause forces on
    any valid output.  For the crossing build the shared pieces are taken at
    the least splitting index of the column (0 when nothing splits), which
    realizes the proof's swap of evaluation patterns wherever it is needed.
    """
    u = [set(c.u) for c in inputs]
    ustar = u[0] & u[1] & u[2] & u[3]
    u_i0 = u[0] & u[1]
    u_i1 = u[2] & u[3]
    gamma = inputs[0].gamma
    uq = sorted(set().union(*u))
    wq = sorted(set().union(*[set(c.w) for c in inputs]))
    terms = [_tuple_term(aux.term, [tuple(s) for s in tup]) for tup in aux.var_tuples]
    owners = {}
    for idx, c in enumerate(inputs):
        for s in c.u:
            owners.setdefault(s, idx)

    def hom_val(cidx: int, s, alpha: int, tidx: int) -> int:
        assign = {pair(*t): inputs[cidx].fval(s, alpha, t) for t in inputs[cidx].u}
        return terms[tidx].eval_bits(
            {lab: assign.get(lab, 0) for lab in terms[tidx].labels()}, 1
        )

    def column(cidx: int, j: int) -> list[int]:
        return sorted(x for (i2, x) in inputs[cidx].u if i2 == j)

    shared: dict[tuple[int, int], dict] = {}
    for j in sorted({i2 for (i2, _) in uq}):
        for alpha in range(gamma):
            mb = _MapBuilder(f"qs-square off-column[{j},{alpha}]")

            def put_piece(idx: int, s) -> None:
                for t in inputs[idx].u:
                    if t[0] != j:
                        mb.put(t, inputs[idx].fval(s, alpha, t))

            base = (j, 0)
            if base in ustar:
                for idx in range(4):
                    put_piece(idx, base)
            elif base in u_i0 and not crossing:
                put_piece(0, base)
                put_piece(1, base)
                moved = isos[0][2].map_pair(base)
                put_piece(2, moved)
                put_piece(3, moved)
            elif base in u_i0 and crossing:
                col0, col1 = column(0, j), column(1, j)
                pick = (col0[0], col1[0])
                for zeta in sorted(x for (i2, x) in uq if i2 == j):
                    xi0 = min(x for x in col0 if x >= zeta)
                    xi1 = min(x for x in col1 if x >= zeta)
                    if (hom_val(0, (j, xi0), alpha, 0), hom_val(1, (j, xi1), alpha, 1)) == (0, 1):
                        pick = (xi0, xi1)
                        break
                xi0, xi1 = pick
                put_piece(0, (j, xi0))
                put_piece(1, (j, xi1))
                put_piece(2, isos[1][2].map_pair((j, xi1)))
                put_piece(3, isos[0][3].map_pair((j, xi0)))
            elif base in u_i1 and not crossing:
                jstar = isos[2][0].map_level(j)
                zstar = 0
                for x in column(0, jstar):
                    if hom_val(0, (jstar, x), alpha, 0) == 0:
                        zstar = x
                        break
                zprime = min(x for x in column(1, jstar) if x >= zstar)
                put_piece(0, (jstar, zstar))
                put_piece(1, (jstar, zprime))
                put_piece(2, base)
                put_piece(3, base)
            elif base in u_i1 and crossing:
                put_piece(2, base)
                put_piece(3, base)
                moved = isos[2][0].map_pair(base)
                put_piece(0, moved)
                put_piece(1, moved)
            else:
                own = owners[base]
                for idx in range(4):
                    put_piece(idx, base if idx == own else isos[own][idx].map_pair(base))
            shared[(j, alpha)] = mb.vals

    fmaps = {}
    for (j, zeta) in uq:
        for alpha in range(gamma):
            row = dict(shared[(j, alpha)])
            for (j2, z2) in uq:
                if j2 == j:
                    row[(j2, z2)] = 0 if z2 < zeta else 1
            fmaps[((j, zeta), alpha)] = row
    out = qs_from_maps(gamma, wq, uq, fmaps)
    return out, terms


def _amalg_qs_free(params, inputs, aux, isos):
    out, terms = _qs_square_assemble(params, inputs, aux, isos, crossing=False)
    return out, (0, 1, 2, 3), {
        "relation": "tau00 ∧ tau01 ∧ tau10 <= tau11",
        "terms": [repr(t) for t in terms],
    }


def _amalg_qs_depth(params, inputs, aux, isos):
    out, terms = _qs_square_assemble(params, inputs, aux, isos, crossing=True)
    return out, (0, 1, 2, 3), {
        "relation": "tau01 ∧ -tau00 <= tau10 ∧ -tau11",
        "terms": [repr(t) for t in terms],
    }


# ---------------------------------------------------------------------------
# postcondition verification
# ---------------------------------------------------------------------------

def _verify(params, rule, inputs, aux, result: AmalgamResult) -> dict:
    out = result.output
    res = validate(params, out)
    if not res.ok:
        raise AmalgamError(f"{rule}: output invalid: {res.violations[0]}")
    for idx in result.extends:
        if not leq(params, inputs[idx], out):
            raise AmalgamError(f"{rule}: output does not extend input {idx}")
    pres = algebra_of(params, out)
    transcript = dict(result.transcript)
    transcript["validated"] = True
    transcript["extends"] = list(result.extends)

    def ev(term):
        return eval_term(pres, term)

    if rule == "qmln-tbound":
        terms = [_tuple_term(aux.term, tup) for tup in aux.var_tuples]
        acc = ev(terms[0])
        for t in terms[1:]:
            acc = acc & ~ev(t)
        if not acc.is_zero:
            raise AmalgamError("qmln-tbound: the forced meet is nonzero")
        transcript["forced_zero"] = True
    elif rule == "qstar-six":
        terms = [
            _tuple_term(aux.term, [tuple(t) for t in c.domain]) for c in inputs
        ]
        alg = algebra_of_presentation(pres)
        vals = [ev(t) for t in terms]
        if not member_of_gen(vals[0], vals[1:]):
            raise AmalgamError("qstar-six: tau(v0) escapes the span of the others")
        # cross-check by full closure: the span member equal to tau(v0)
        if vals[0] not in gen_subalgebra(alg, vals[1:]):
            raise AmalgamError("qstar-six: closure disagrees with the block test")
        transcript["member_of_span"] = True
    elif rule == "pk-inc":
        v1 = [_tuple_term(aux.term, aux.var_tuples[1]), _tuple_term(aux.term, aux.var_tuples[2])]
        e1, e2 = ev(v1[0]), ev(v1[1])
        if result.transcript["case"] == "A":
            if not e1 <= e2:
                raise AmalgamError("pk-inc case A: tau(v1) <= tau(v2) fails")
        else:
            if not e2 <= e1:
                raise AmalgamError("pk-inc case B: tau(v1) >= tau(v2) fails")
        transcript["comparison_holds"] = True
    elif rule == "pk-ideal":
        terms = [_tuple_term(aux.term, tup) for tup in aux.var_tuples]
        if not ev(terms[2]) <= ev(terms[1]) | ev(terms[3]):
            raise AmalgamError("pk-ideal: tau2 <= tau1 ∨ tau3 fails")
        transcript["ideal_bound_holds"] = True
    elif rule == "pk0-seven":
        terms = [_tuple_term(aux.term, tup) for tup in aux.var_tuples]
        t3, t4, t5, t6 = (ev(terms[i]) for i in (3, 4, 5, 6))
        maj = (t4 & t5) | (t4 & t6) | (t5 & t6)
        if t3 != maj:
            raise AmalgamError("pk0-seven: the majority identity fails")
        transcript["majority_holds"] = True
    elif rule == "qs-free":
        terms = [_tuple_term(aux.term, [tuple(s) for s in tup]) for tup in aux.var_tuples]
        t00, t01, t10, t11 = (ev(t) for t in terms)
        if not (t00 & t01 & t10) <= t11:
            raise AmalgamError("qs-free: the front-meet bound fails")
        transcript["free_bound_holds"] = True
    elif rule == "qs-depth":
        terms = [_tuple_term(aux.term, [tuple(s) for s in tup]) for tup in aux.var_tuples]
        t00, t01, t10, t11 = (ev(t) for t in terms)
        if not (t01 & ~t00) <= (t10 & ~t11):
            raise AmalgamError("qs-depth: the difference bound fails")
        transcript["depth_bound_holds"] = True
    return transcript


@dataclass(frozen=True)
class RuleSpec:
    rule_id: str
    kind: str
    arity: int | None
    builder: Callable


_RULES: dict[str, RuleSpec] = {}


def _register(rule_id: str, kind: str, arity: int | None, builder) -> None:
    _RULES[rule_id] = RuleSpec(rule_id, kind, arity, builder)


_register("qmln-pair", "qmln", 2, _amalg_qmln_pair)
_register("qmln-tbound", "qmln", None, _amalg_qmln_tbound)
_register("qstar-pair", "qstar", 2, _amalg_qstar_pair)
_register("qstar-six", "qstar", 6, _amalg_qstar_six)
_register("pk-pair", "pk", 3, _amalg_pk_pair)
_register("pk-inc", "pk", 3, _amalg_pk_inc)
_register("pk-ideal", "pk", 4, _amalg_pk_ideal)
_register("pk0-seven", "pk0", 7, _amalg_pk0_seven)
_register("qs-pair", "qs", 2, _amalg_qs_pair)
_register("qs-free", "qs", 4, _amalg_qs_free)
_register("qs-depth", "qs", 4, _amalg_qs_depth)


def rule_ids() -> tuple[str, ...]:
    return RULE_IDS


def amalgamate(params: PosetParams, rule: str, inputs: Sequence[Cond], aux: AmalgamAux | None = None) -> AmalgamResult:
    """Run one catalog rule: check cleaning, build, verify, return."""
    if rule not in _RULES:
        raise BaforgeError(f"unknown amalgamation rule {rule!r}")
    aux = aux or AmalgamAux()
    isos = check_cleaned(params, rule, inputs, aux)
    output, extends, transcript = _RULES[rule].builder(params, inputs, aux, isos)
    result = AmalgamResult(rule, output, extends, transcript)
    transcript = _verify(params, rule, inputs, aux, result)
    return AmalgamResult(rule, output, extends, transcript)
