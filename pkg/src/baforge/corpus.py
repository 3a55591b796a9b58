"""Deterministic seeded corpora of presentations and valid conditions.

Generator algorithm, fixed across releases so identical seeds give byte-
identical corpora:

* randomness comes from one ``random.Random(seed)`` stream, consumed only
  through ``randrange``/``getrandbits`` (never ``sample``/``shuffle``, whose
  behaviour has changed between interpreter versions);
* presentations draw a world size, then family rows uniformly;
* qmln conditions grow a random seed family to the n-cover fixed point
  (for every small sub-world lacking a total map, all extensions of a
  randomly chosen member's restriction are added);
* qstar conditions are built by chained one-point extensions from the
  minimal condition, then hardened by random bit flips that are kept only
  when the validator still accepts (rejection against the validator);
* pk/pk0 conditions are built constructively: maps are forced below the
  diagonal, free above it, clause (c) is repaired by copying, and the cover
  sets are the exact witness sets; the zero variant rejection-samples until
  clause (c0) holds;
* qs conditions draw columns, column index sets and free off-column bits.
"""

from __future__ import annotations

import itertools
import random
from typing import Sequence

from .core import Presentation, plain
from .forcing import (
    GoodParamProxy,
    PkCond,
    PosetParams,
    QmlnCond,
    QsCond,
    QStarCond,
    extend_point,
    instantiate_copies,
    pk_eligible_pairs,
    pk_from_maps,
    qs_from_maps,
    qstar_from_maps,
    validate,
)


def _distinct(rng: random.Random, count: int, lo: int, hi: int) -> list[int]:
    """Sorted distinct draw implemented only with randrange, for stability."""
    pool = list(range(lo, hi))
    out = []
    for _ in range(count):
        out.append(pool.pop(rng.randrange(len(pool))))
    return sorted(out)


def gen_presentation(rng: random.Random, max_world: int = 4, max_family: int = 6) -> Presentation:
    n = rng.randrange(1, max_world + 1)
    fam_size = rng.randrange(1, max_family + 1)
    rows = [tuple(rng.randrange(2) for _ in range(n)) for _ in range(fam_size)]
    return Presentation.of([plain(i) for i in range(n)], rows)


def gen_qmln(rng: random.Random, params: PosetParams, max_world: int = 4) -> QmlnCond:
    size = rng.randrange(1, max_world + 1)
    w = tuple(_distinct(rng, size, 0, 3 * max_world))
    rows = {tuple(rng.randrange(2) for _ in range(size))}
    changed = True
    while changed:
        changed = False
        for r in range(min(params.n, size) + 1):
            for upos in itertools.combinations(range(size), r):
                have = False
                for base in list(rows):
                    if all(
                        tuple(h[upos.index(i)] if i in upos else base[i] for i in range(size))
                        in rows
                        for h in itertools.product((0, 1), repeat=r)
                    ):
                        have = True
                        break
                if not have:
                    base = sorted(rows)[rng.randrange(len(rows))]
                    for h in itertools.product((0, 1), repeat=r):
                        rows.add(
                            tuple(h[upos.index(i)] if i in upos else base[i] for i in range(size))
                        )
                    changed = True
    cond = QmlnCond(w, tuple(sorted(rows)))
    assert validate(params, cond).ok
    return cond


def gen_qstar(rng: random.Random, params: PosetParams, size: int = 3, flips: int = 6) -> QStarCond:
    base = rng.randrange(0, 4)
    cond = qstar_from_maps(
        [base],
        {
            (0, base): {(base, 0): 1, (base, 1): 0},
            (1, base): {(base, 0): 0, (base, 1): 1},
            (2, base): {(base, 0): 0, (base, 1): 0},
        },
    )
    label = base
    for _ in range(size - 1):
        label += 1 + rng.randrange(3)
        cond = extend_point(params, cond, label)
    for _ in range(flips):
        alpha = cond.u[rng.randrange(len(cond.u))]
        above = [t for t in cond.domain if t[0] > alpha]
        if not above:
            continue
        spot = above[rng.randrange(len(above))]
        ell = rng.randrange(3)
        maps = {
            (l, a): {t: cond.value(l, a, t) for t in cond.domain}
            for l in range(3)
            for a in cond.u
        }
        maps[(ell, alpha)][spot] ^= 1
        candidate = qstar_from_maps(cond.u, maps)
        if validate(params, candidate).ok:
            cond = candidate
    return cond


def gen_pk(
    rng: random.Random,
    params: PosetParams,
    n_levels: int = 2,
    extra_pairs: int = 1,
    max_retries: int = 64,
) -> PkCond:
    variant = "base" if params.kind == "pk" else "zero"
    for _ in range(max_retries):
        levels = _distinct(rng, n_levels, 0, 4 * n_levels + 2)
        a = tuple(beta for beta in levels if rng.randrange(2))
        u = {(beta, 0) for beta in levels} | {(beta, 1) for beta in levels}
        for _ in range(extra_pairs):
            u.add((levels[rng.randrange(len(levels))], 2 + rng.randrange(3)))
        u = tuple(sorted(u))
        fmaps = {}
        for s in u:
            row = {}
            for t in u:
                if t == s:
                    row[t] = 1
                elif t[0] <= s[0]:
                    row[t] = 0
                else:
                    row[t] = rng.randrange(2)
            fmaps[s] = row
        for alpha, beta in itertools.combinations(a, 2):
            fmaps[(alpha, 1)][(beta, 0)] = fmaps[(alpha, 0)][(beta, 0)]
        ymaps = {}
        for s0, s1 in pk_eligible_pairs(u):
            witness = [
                t
                for t in u
                if fmaps[t][s0] == 1 and fmaps[t][s1] != fmaps[s0][s1]
            ]
            ymaps[(s0, s1)] = tuple(sorted(witness))
        cond = pk_from_maps(variant, levels, a, u, fmaps, ymaps)
        if validate(params, cond).ok:
            return cond
    raise RuntimeError("pk generator failed to produce a valid condition")


def gen_qs(
    rng: random.Random,
    params: PosetParams,
    n_cols: int = 2,
    max_interior: int = 1,
    gamma: int | None = None,
    template_safe: bool = False,
    col_range: int | None = None,
) -> QsCond:
    S = params.good
    col_range = S.cf_lambda if col_range is None else min(col_range, S.cf_lambda)
    n_cols = min(n_cols, col_range)
    w = tuple(_distinct(rng, n_cols, 0, col_range))
    if gamma is None:
        gamma = rng.randrange(1, min(3, S.mu))
    u: set[tuple[int, int]] = set()
    top = (min(S.caps) - 1) if template_safe else None
    for i in w:
        u.add((i, 0))
        u.add((i, S.caps[i]))
        interior_top = S.caps[i] if top is None else min(top + 1, S.caps[i])
        for _ in range(rng.randrange(0, max_interior + 1)):
            if interior_top > 1:
                u.add((i, 1 + rng.randrange(interior_top - 1)))
    u = tuple(sorted(u))
    base_bits = {}
    for i in w:
        for alpha in range(gamma):
            base_bits[(i, alpha)] = {
                t: rng.randrange(2) for t in u if t[0] != i
            }
    fmaps = {}
    for (i, xi) in u:
        for alpha in range(gamma):
            row = {}
            for (j, zeta) in u:
                if j == i:
                    row[(j, zeta)] = 0 if zeta < xi else 1
                else:
                    row[(j, zeta)] = base_bits[(i, alpha)][(j, zeta)]
            fmaps[((i, xi), alpha)] = row
    cond = qs_from_maps(gamma, w, u, fmaps)
    assert validate(params, cond).ok
    return cond


def gen_condition(rng: random.Random, params: PosetParams, **kw):
    if params.kind == "qmln":
        return gen_qmln(rng, params, **kw)
    if params.kind == "qstar":
        return gen_qstar(rng, params, **kw)
    if params.kind in ("pk", "pk0"):
        return gen_pk(rng, params, **kw)
    if params.kind == "qs":
        return gen_qs(rng, params, **kw)
    raise ValueError(params.kind)


def corpus_conditions(params: PosetParams, count: int, seed: int, **kw) -> list:
    rng = random.Random(seed)
    return [gen_condition(rng, params, **kw) for _ in range(count)]


def corpus_presentations(count: int, seed: int, max_world: int = 4, max_family: int = 6):
    rng = random.Random(seed)
    return [gen_presentation(rng, max_world, max_family) for _ in range(count)]


def default_params(kind: str) -> PosetParams:
    """Reference parameters used by the corpus and the test suite."""
    if kind == "qmln":
        return PosetParams("qmln", n=1)
    if kind == "qstar":
        return PosetParams("qstar")
    if kind == "pk":
        return PosetParams("pk", K=3, level_cap=4096)
    if kind == "pk0":
        return PosetParams("pk0", K=3, level_cap=4096)
    if kind == "qs":
        return PosetParams(
            "qs", good=GoodParamProxy(mu=5, cf_lambda=40, caps=tuple(range(2, 42)))
        )
    raise ValueError(kind)


def _random_term_over(rng: random.Random, arity: int, size: int = 3):
    """Small random term over placeholder variables 0..arity-1."""
    from .core import And, Const, Not, Or, Var

    def build(depth: int):
        if depth == 0 or rng.randrange(4) == 0:
            return Var(plain(rng.randrange(arity)))
        op = rng.randrange(4)
        if op == 0:
            return Not(build(depth - 1))
        if op == 1:
            return And(build(depth - 1), build(depth - 1))
        if op == 2:
            return Or(build(depth - 1), build(depth - 1))
        return Var(plain(rng.randrange(arity)))

    return build(size)


def rule_instance(rng: random.Random, rule: str):
    """A seeded cleaned instance for one amalgamation rule.

    Returns (params, inputs, aux).  Sizes are kept at desk scale; every
    instance passes check_cleaned by construction.
    """
    from .amalgam import AmalgamAux
    from .forcing import iso_find

    if rule == "qmln-pair":
        params = default_params("qmln")
        template = gen_qmln(rng, params, max_world=3)
        h = rng.randrange(0, len(template.w))
        return params, instantiate_copies(params, template, 2, h), AmalgamAux()
    if rule == "qmln-tbound":
        params = default_params("qmln")
        template = gen_qmln(rng, params, max_world=2)
        h = rng.randrange(0, len(template.w))
        count = 4 + rng.randrange(2)  # N = 3 or 4 >= 2^ceil(1/2) + 1
        inputs = instantiate_copies(params, template, count, h)
        arity = rng.randrange(1, len(template.w) + 1)
        positions = _distinct(rng, arity, 0, len(template.w))
        term = _random_term_over(rng, arity)
        tuples = tuple(tuple(c.w[p] for p in positions) for c in inputs)
        return params, inputs, AmalgamAux(term=term, var_tuples=tuples)
    if rule == "qstar-pair":
        params = default_params("qstar")
        template = gen_qstar(rng, params, size=2 + rng.randrange(2))
        h = rng.randrange(0, len(template.u))
        return params, instantiate_copies(params, template, 2, h), AmalgamAux()
    if rule == "qstar-six":
        params = default_params("qstar")
        template = gen_qstar(rng, params, size=1 + rng.randrange(2))
        h = rng.randrange(0, len(template.u))
        inputs = instantiate_copies(params, template, 6, h)
        term = _random_term_over(rng, 2 * len(template.u))
        return params, inputs, AmalgamAux(term=term)
    if rule in ("pk-pair", "pk-inc", "pk-ideal", "pk0-seven"):
        kind = "pk0" if rule == "pk0-seven" else "pk"
        params = default_params(kind)
        template = gen_pk(rng, params, n_levels=1 + rng.randrange(2), extra_pairs=1)
        h = rng.randrange(0, len(template.w))
        count = {"pk-pair": 3, "pk-inc": 3, "pk-ideal": 4, "pk0-seven": 7}[rule]
        inputs = instantiate_copies(params, template, count, h)
        if rule == "pk-pair":
            return params, inputs, AmalgamAux()
        arity = 1 + rng.randrange(min(2, len(template.u)))
        pool = list(template.u)
        v0 = tuple(sorted(pool.pop(rng.randrange(len(pool))) for _ in range(arity)))
        term = _random_term_over(rng, arity)
        tuples = []
        for c in inputs:
            H = iso_find(params, inputs[0], c)
            tuples.append(tuple(H.map_pair(s) for s in v0))
        if rule == "pk-inc":
            tuples = (None, tuples[1], tuples[2])
        return params, inputs, AmalgamAux(term=term, var_tuples=tuple(tuples))
    if rule == "qs-pair":
        params = default_params("qs")
        template = gen_qs(rng, params, n_cols=1 + rng.randrange(2), col_range=8)
        h = rng.randrange(0, len(template.w))
        return params, instantiate_copies(params, template, 2, h), AmalgamAux()
    if rule in ("qs-free", "qs-depth"):
        params = default_params("qs")
        inputs, tuples, i0, i1 = qs_square(rng, params)
        if len(tuples[0]) == 1:
            term = _random_term_over(rng, 1)
        else:
            term = _random_term_over(rng, 2)
        return params, inputs, AmalgamAux(term=term, var_tuples=tuple(tuples), i0=i0, i1=i1)
    raise ValueError(rule)


def qs_square(
    rng: random.Random, params: PosetParams, gamma: int | None = None
):
    """Four qs conditions in the two-block delta-system shape, plus aux data.

    The four conditions share heart columns completely; the two members of
    each group differ only in one interior pair of the group's block column
    (the shape the cleaning procedure produces when conditions decide
    block-indexed elements).  Group 1 is the group-0 structure transported
    to a block column clearing every group-0 column.  Returns
    (inputs, var_tuples, i0, i1) with the tuples transported by the
    construction's isomorphisms.
    """
    from .forcing import _relabel, iso_find, relabel_qs_pairs

    S = params.good
    if gamma is None:
        gamma = rng.randrange(1, min(3, S.mu))
    hearts = list(range(rng.randrange(0, 2)))
    j0 = len(hearts) + 1 + rng.randrange(2)
    if S.caps[j0] < 3:
        j0 += 1
    xa = 1 + rng.randrange(S.caps[j0] - 2)
    xb = xa + 1 + rng.randrange(S.caps[j0] - 1 - xa)
    u00 = {(j0, 0), (j0, xa), (j0, S.caps[j0])}
    for i in hearts:
        u00.add((i, 0))
        u00.add((i, S.caps[i]))
        if rng.randrange(2) and S.caps[i] >= 2:
            u00.add((i, 1))
    u00 = tuple(sorted(u00))
    cols = hearts + [j0]
    data = {}
    for i in cols:
        for alpha in range(gamma):
            data[(i, alpha)] = {t: rng.randrange(2) for t in u00 if t[0] != i}
    fmaps = {}
    for (i, xi) in u00:
        for alpha in range(gamma):
            row = {}
            for (j, zeta) in u00:
                row[(j, zeta)] = (0 if zeta < xi else 1) if j == i else data[(i, alpha)][(j, zeta)]
            fmaps[((i, xi), alpha)] = row
    p00 = qs_from_maps(gamma, cols, u00, fmaps)
    p01 = relabel_qs_pairs(params, p00, {(j0, xa): (j0, xb)})
    i1 = 2 * j0 + 1 + rng.randrange(2)
    if i1 >= S.cf_lambda:
        raise RuntimeError("column space too small for the square construction")
    shift = {i: i for i in hearts}
    shift[j0] = i1
    p10 = _relabel(params, p00, shift)
    p11 = _relabel(params, p01, shift)
    inputs = [p00, p01, p10, p11]
    v0 = [(j0, xa)]
    if hearts and rng.randrange(2):
        v0.append((hearts[0], 0))
    tuples = [tuple(v0)]
    for cond in inputs[1:]:
        H = iso_find(params, inputs[0], cond)
        tuples.append(tuple(H.map_pair(s) for s in v0))
    return inputs, tuples, j0, i1
