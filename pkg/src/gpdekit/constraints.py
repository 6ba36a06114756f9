"""Constraint systems, ideal reduction, and equivalent-reduction moves.

A ``ConstraintSystem`` holds two kinds of data: *solved* rules (an acyclic
generator -> expression dictionary, applied as substitutions to a fixpoint)
and *residual* relations (polynomial ideal generators handled by
leading-monomial rewriting).  The residual step is sound but deliberately
incomplete: it certifies membership when it reaches zero and says nothing
otherwise, so verdicts built on it never overclaim.

The contractible-pair move removes a generator together with its image under
the homological field, substituting the solved partner everywhere; scripted
sequences of such moves replay the equivalence between bigger and smaller
presentations of the same model.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

from gpdekit.algebra import (
    AlgebraError,
    GradedAlgebra,
    GradedExpression,
    Monomial,
    Substitution,
)
from gpdekit.derivations import (
    Derivation,
    DerivationEntryError,
    GeneratorVerdict,
    contains_opaque,
    opaque_symbol,
)
from gpdekit.jets import JetOrderError
from gpdekit.linalg import solve_sparse


class ConstraintError(AlgebraError):
    """Malformed constraint data (cyclic solved rules, bad grades)."""


class ContractionError(AlgebraError):
    """A proposed generator pair is not contractible."""


def _monomial_divide(alg: GradedAlgebra, mono: Monomial, div: Monomial) -> Monomial | None:
    """Multiset quotient mono / div in canonical order, or None."""
    if len(div) > len(mono):
        return None
    out: list[int] = []
    i = j = 0
    n, m = len(mono), len(div)
    while i < n and j < m:
        if mono[i] == div[j]:
            i += 1
            j += 1
        elif alg._keys[mono[i]] <= alg._keys[div[j]]:
            out.append(mono[i])
            i += 1
        else:
            return None
    if j < m:
        return None
    out.extend(mono[i:])
    return tuple(out)


Rule = tuple[Monomial, Fraction, GradedExpression, frozenset]


def _make_rules(relations: Iterable[GradedExpression]) -> list[Rule]:
    rules: list[Rule] = []
    for r in relations:
        if not r.terms:
            continue
        lm, lc = r.leading()
        rules.append((lm, lc, r, frozenset(lm)))
    return rules


def _normal_form_terms(
    alg: GradedAlgebra, terms: dict, rules: Sequence[Rule]
) -> dict:
    """Rewrite a term dict to a fixpoint of leading-monomial division.

    Scan order does not affect termination: every rewrite replaces a monomial
    by strictly smaller ones (the term order is multiplicative), so the loop
    ends by multiset descent.  Irreducibility of a monomial never changes,
    so it is memoized across passes.
    """
    work = dict(terms)
    irreducible: set[Monomial] = set()
    changed = True
    while changed:
        changed = False
        for mono in list(work):
            coeff = work.get(mono)
            if coeff is None or mono in irreducible:
                continue
            mono_set = frozenset(mono)
            hit = False
            for lm, lc, rule, lm_set in rules:
                if not lm_set <= mono_set:
                    continue
                cof = _monomial_divide(alg, mono, lm)
                if cof is None:
                    continue
                merged = alg.merge_monomials(lm, cof)
                if merged is None:
                    continue
                sign, back = merged
                if back != mono:
                    continue
                delta = rule.mul_monomial(cof, coeff / (lc * sign))
                for dm, dc in delta.terms.items():
                    prev = work.get(dm)
                    if prev is None:
                        work[dm] = -dc
                    elif prev == dc:
                        del work[dm]
                    else:
                        work[dm] = prev - dc
                hit = True
                changed = True
                break
            if not hit:
                irreducible.add(mono)
    return work


def _monomial_lcm(alg: GradedAlgebra, m1: Monomial, m2: Monomial) -> Monomial:
    """Multiset least common multiple of two canonical even monomials."""
    from collections import Counter

    c1, c2 = Counter(m1), Counter(m2)
    out: list[int] = []
    for g in set(c1) | set(c2):
        out.extend([g] * max(c1.get(g, 0), c2.get(g, 0)))
    out.sort(key=lambda g: alg._keys[g])
    return tuple(out)


def groebner_basis(
    alg: GradedAlgebra, relations: Sequence[GradedExpression]
) -> list[GradedExpression]:
    """Buchberger completion for relations in even generators only.

    Leading-monomial rewriting alone is incomplete; completing the basis once
    makes it a decision procedure for ideal membership.  Restricted to the
    commutative (ghost-even) sector where S-polynomials need no Koszul signs.
    """
    basis: list[GradedExpression] = []
    for r in relations:
        if not r.terms:
            continue
        for m in r.terms:
            for g in m:
                if alg.parity_of(g):
                    raise ConstraintError(
                        "completion is only implemented for even generators"
                    )
        basis.append(r)
    import heapq

    rules = _make_rules(basis)

    def push(heap: list, i: int, j: int) -> None:
        si, sj = rules[i][3], rules[j][3]
        if not (si & sj):
            return  # coprime leading monomials: S-polynomial reduces to zero
        lcm = _monomial_lcm(alg, rules[i][0], rules[j][0])
        # Normal selection: smallest lcm first keeps intermediates small.
        heapq.heappush(heap, (len(lcm), alg.monomial_order_key(lcm), i, j, lcm))

    heap: list = []
    for i in range(len(basis)):
        for j in range(i + 1, len(basis)):
            push(heap, i, j)
    while heap:
        _, _, i, j, lcm = heapq.heappop(heap)
        lm_i, lc_i, r_i, _ = rules[i]
        lm_j, lc_j, r_j, _ = rules[j]
        cof_i = _monomial_divide(alg, lcm, lm_i)
        cof_j = _monomial_divide(alg, lcm, lm_j)
        if cof_i is None or cof_j is None:
            continue
        spoly = r_i.mul_monomial(cof_i, Fraction(1) / lc_i) - r_j.mul_monomial(
            cof_j, Fraction(1) / lc_j
        )
        nf = GradedExpression(alg, _normal_form_terms(alg, spoly.terms, rules))
        if nf.terms:
            k = len(basis)
            basis.append(nf)
            lm, lc = nf.leading()
            rules.append((lm, lc, nf, frozenset(lm)))
            for i2 in range(k):
                push(heap, i2, k)
    return basis


class ConstraintSystem:
    """Solved substitution rules plus residual ideal generators."""

    def __init__(
        self,
        alg: GradedAlgebra,
        solved: dict[int, GradedExpression] | None = None,
        residual: Iterable[GradedExpression] = (),
        label: str = "",
    ) -> None:
        self.alg = alg
        self.label = label
        self.solved = dict(solved or {})
        self._check_acyclic()
        self._sub = Substitution(alg, self.solved, label=label)
        self.residual: list[GradedExpression] = []
        for r in residual:
            rr = self.apply_solved(r)
            if rr.terms:
                self.residual.append(rr)
        self._rules = _make_rules(self.residual)

    def _check_acyclic(self) -> None:
        color: dict[int, int] = {}

        def visit(g: int) -> None:
            color[g] = 1
            for m in self.solved[g].terms:
                for h in m:
                    if h in self.solved:
                        st = color.get(h, 0)
                        if st == 1:
                            raise ConstraintError(
                                f"cyclic solved rules through {self.alg.display(h)}"
                            )
                        if st == 0:
                            visit(h)
            color[g] = 2

        for g in self.solved:
            if color.get(g, 0) == 0:
                visit(g)

    def apply_solved(self, expr: GradedExpression) -> GradedExpression:
        """Apply the solved rules to a fixpoint (acyclicity bounds the loop)."""
        prev = expr
        for _ in range(len(self.solved) + 1):
            nxt = self._sub(prev)
            if nxt == prev:
                return nxt
            prev = nxt
        raise ConstraintError("solved rules failed to stabilize")

    def reduce(self, expr: GradedExpression) -> GradedExpression:
        """Normal form: solved rules, then residual leading-term rewriting."""
        e = self.apply_solved(expr)
        if not self._rules or not e.terms:
            return e
        return GradedExpression(
            self.alg, _normal_form_terms(self.alg, e.terms, self._rules)
        )

    def relations(self) -> list[GradedExpression]:
        """Residual relations, for span-based membership fallbacks."""
        return list(self.residual)

    def with_extra(self, residual: Iterable[GradedExpression]) -> "ConstraintSystem":
        return ConstraintSystem(
            self.alg, self.solved, list(self.residual) + list(residual), self.label
        )

    def substituted(self, sub: Substitution) -> "ConstraintSystem":
        """Image of the system under a generator substitution."""
        solved = {}
        for gid, val in self.solved.items():
            if gid in sub.mapping:
                continue
            solved[gid] = sub(val)
        residual = [sub(r) for r in self.residual]
        return ConstraintSystem(
            self.alg, solved, [r for r in residual if r.terms], self.label
        )


def reduce_modulo(expr: GradedExpression, system: ConstraintSystem) -> GradedExpression:
    return system.reduce(expr)


def membership_certificate(
    expr: GradedExpression,
    relations: Sequence[GradedExpression],
    rounds: int = 3,
    max_products: int = 4000,
) -> dict[int, GradedExpression] | None:
    """Exact ideal-membership test by bounded-span linear algebra.

    Rewriting modulo a non-confluent presentation can strand honest ideal
    members in nonzero normal forms.  This searches for an explicit
    combination expr = sum m_i * R_i instead: candidate multipliers are
    quotients of monomials seen so far by monomials of the relations, the
    reachable span grows for a few rounds, and an exact sparse solve over
    the rationals decides membership inside it.  Returns the multiplier
    map (relation index -> expression) on success and None otherwise; a
    None only means nothing was found within the searched span.
    """
    alg = expr.alg
    if not expr.terms:
        return {}
    products: list[tuple[int, Monomial, GradedExpression]] = []
    seen: set[tuple[int, Monomial]] = set()
    universe: set[Monomial] = set(expr.terms)
    frontier: set[Monomial] = set(universe)
    full = False
    for _ in range(rounds):
        grown: set[Monomial] = set()
        for ri, rel in enumerate(relations):
            for nu in rel.terms:
                for mu in frontier:
                    q = _monomial_divide(alg, mu, nu)
                    if q is None or (ri, q) in seen:
                        continue
                    seen.add((ri, q))
                    prod = alg.from_terms([(Fraction(1), q)]) * rel
                    if not prod.terms:
                        continue
                    products.append((ri, q, prod))
                    for m in prod.terms:
                        if m not in universe:
                            universe.add(m)
                            grown.add(m)
                    if len(products) >= max_products:
                        full = True
                        break
                if full:
                    break
            if full:
                break
        frontier = grown
        if full or not frontier:
            break
    by_mono: dict[Monomial, dict[int, Fraction]] = {m: {} for m in universe}
    for j, (_, _, prod) in enumerate(products):
        for m, c in prod.terms.items():
            col = by_mono[m]
            col[j] = col.get(j, Fraction(0)) + c
    equations = [
        (cols, expr.terms.get(m, Fraction(0))) for m, cols in by_mono.items()
    ]
    res = solve_sparse(equations)
    if res.forced:
        return None
    assignment = res.particular_solution()
    cert: dict[int, GradedExpression] = {}
    for j, (ri, q, _) in enumerate(products):
        val = assignment.get(j, Fraction(0))
        if val:
            bump = alg.from_terms([(val, q)])
            cert[ri] = cert[ri] + bump if ri in cert else bump
    return cert


@dataclass
class StagedReduction:
    """Reduce through a sequence of constraint systems to a joint fixpoint.

    Rewriting modulo the union of two rule sets need not be confluent even
    when each set is well behaved alone: a rule from one set can consume a
    monomial into a shape the other set's decision procedure no longer
    recognizes.  Running the stages in order, completed sectors first, and
    iterating until the answer stops moving keeps each sector's guarantees.
    The composite stays one-sided like its parts: zero certifies membership,
    nonzero certifies nothing.
    """

    stages: Sequence[ConstraintSystem]
    rounds: int = 16
    label: str | None = None

    def reduce(self, expr: GradedExpression) -> GradedExpression:
        prev = None
        cur = expr
        for _ in range(self.rounds):
            for stage in self.stages:
                cur = stage.reduce(cur)
            if prev is not None and cur == prev:
                break
            prev = cur
        return cur

    def relations(self) -> list[GradedExpression]:
        """Residual relations of all stages, for membership fallbacks."""
        out: list[GradedExpression] = []
        for stage in self.stages:
            out.extend(stage.relations())
        return out


def completed_metric_rules(ctx) -> list[GradedExpression]:
    """Completed contraction relations for a metric/inverse pair on a context.

    The raw relations (sum of products minus a unit) are far from confluent;
    their completion is computed once per context and cached there, making
    normal forms modulo the pair a true membership test for that sector.
    """
    cached = getattr(ctx, "_pair_basis", None)
    if cached is None:
        from gpdekit.jets import metric_pair_relations

        cached = groebner_basis(ctx.alg, metric_pair_relations(ctx))
        ctx._pair_basis = cached
    return list(cached)


@dataclass
class InvarianceItem:
    relation: GradedExpression
    verdict: str  # pass | conditional | inconclusive
    residue: GradedExpression | None = None
    note: str = ""


@dataclass
class InvarianceReport:
    label: str
    items: list[InvarianceItem] = field(default_factory=list)

    @property
    def aggregate(self) -> str:
        order = {"pass": 0, "conditional": 1, "inconclusive": 2}
        worst = "pass"
        for it in self.items:
            if order[it.verdict] > order[worst]:
                worst = it.verdict
        return worst

    def counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for it in self.items:
            out[it.verdict] = out.get(it.verdict, 0) + 1
        return out


def q_invariance(
    q: Derivation,
    system: ConstraintSystem,
    relations: Sequence[GradedExpression] | None = None,
    q_open: Callable[[int], bool] | None = None,
    label: str = "",
) -> InvarianceReport:
    """Check that Q maps the constraint ideal into itself.

    Every relation r (default: the system's own content, solved rules as
    generator - value) gets Q(r) reduced modulo the system.  Zero residue is a
    pass; a residue tainted by opaque curvature actions is conditional; any
    other residue is inconclusive, because the reducer is incomplete and
    cannot certify non-membership.
    """
    alg = q.alg
    if q_open is not None:
        base = q

        def fallback(gid: int) -> GradedExpression:
            if q_open(gid):
                return opaque_symbol(alg, gid, base.degree)
            raise AlgebraError(f"no entry for {alg.display(gid)}")

        q = q.with_fallback(fallback)

    if relations is None:
        relations = [
            alg.of_gen(gid) - val for gid, val in system.solved.items()
        ] + list(system.residual)

    report = InvarianceReport(label=label or f"Q-invariance of {system.label}")
    for r in relations:
        try:
            residue = system.reduce(q(r))
        except JetOrderError as exc:
            report.items.append(
                InvarianceItem(r, "inconclusive", None, f"truncation overflow: {exc}")
            )
            continue
        if not residue.terms:
            report.items.append(InvarianceItem(r, "pass"))
        elif contains_opaque(alg, residue):
            report.items.append(
                InvarianceItem(
                    r, "conditional", residue, "residue involves undeclared curvature action"
                )
            )
        else:
            report.items.append(
                InvarianceItem(r, "inconclusive", residue, "reduction left a residue")
            )
    return report


# -- contractible pairs and scripted reductions ---------------------------------


@dataclass
class ReductionStep:
    kind: str  # pair | relation | redefine
    removed: tuple[str, ...]
    introduced: tuple[str, ...] = ()
    detail: str = ""


def _linear_solve_for(
    expr: GradedExpression, gid: int
) -> tuple[Fraction, GradedExpression]:
    """Write expr = c*gid + rest with c a nonzero rational; raise otherwise."""
    coeff = expr.coefficient_of_gen(gid)
    c = coeff.constant_value()
    if c is None:
        raise ContractionError(
            f"coefficient of {expr.alg.display(gid)} is not a rational constant: {coeff}"
        )
    if c == 0:
        raise ContractionError(
            f"{expr.alg.display(gid)} does not occur linearly with nonzero coefficient"
        )
    rest = expr - expr.alg.of_gen(gid, c)
    if gid in rest.generators_present():
        raise ContractionError(f"{expr.alg.display(gid)} occurs nonlinearly")
    return c, rest


def eliminate_contractible_pair(model, partner_gid: int, value: GradedExpression, solve_gid: int):
    """Remove (partner, Q partner) by solving Q(partner)=0 for ``solve_gid``.

    ``value`` is what the partner generator is set to (its ghost-degree must
    match).  The move demands that, after substituting the partner's value,
    ``solve_gid`` occurs in Q(partner) linearly with an invertible rational
    coefficient; otherwise the pair is not contractible as ordered and a
    ``ContractionError`` explains why.  Returns (reduced model, step record).
    """
    alg: GradedAlgebra = model.alg
    if partner_gid not in model.generators or solve_gid not in model.generators:
        raise ContractionError("pair members must be current model generators")
    if alg.ghost_of(solve_gid) != alg.ghost_of(partner_gid) + 1:
        raise ContractionError(
            f"{alg.display(solve_gid)} does not sit one degree above "
            f"{alg.display(partner_gid)}"
        )
    g = value.grade()
    if g != "zero" and g != alg.ghost_of(partner_gid):
        raise ContractionError("value has the wrong ghost degree")

    veq = Substitution(alg, {partner_gid: value})(model.q.of(partner_gid))
    c, rest = _linear_solve_for(veq, solve_gid)
    solved_value = rest.scale(Fraction(-1) / c)
    if partner_gid in solved_value.generators_present():
        raise ContractionError("solved expression still involves the partner")

    sub = Substitution(
        alg,
        {partner_gid: value, solve_gid: solved_value},
        label=f"drop({alg.display(partner_gid)},{alg.display(solve_gid)})",
    )
    # Consistency of the move: Q(partner) itself must die under the combined
    # substitution (true by construction, asserted for safety).
    if sub(model.q.of(partner_gid)).terms:
        raise ContractionError("internal inconsistency: pair does not contract")

    survivors = [gid for gid in model.generators if gid not in (partner_gid, solve_gid)]
    new_q = _substituted_table(model, sub, survivors)
    new_constraints = model.constraints.substituted(sub) if model.constraints else None
    step = ReductionStep(
        kind="pair",
        removed=(alg.display(partner_gid), alg.display(solve_gid)),
        detail=(
            f"{alg.display(partner_gid)} -> {value}; "
            f"{alg.display(solve_gid)} -> {solved_value}"
        ),
    )
    new_model = dataclasses.replace(
        model, generators=survivors, q=new_q, constraints=new_constraints
    )
    return new_model, step


def eliminate_contractible_block(model, triples):
    """Remove several contractible pairs in one simultaneous move.

    ``triples`` lists (partner, value, solve).  All partner values are
    substituted at once, then the resulting equations are solved for the
    solve generators by repeated passes.  This is the right primitive when
    pairwise orderings couple through not-yet-substituted partners, as
    happens for the symmetric block of a metric.
    """
    alg: GradedAlgebra = model.alg
    partners: dict[int, GradedExpression] = {}
    order: list[tuple[int, int]] = []
    for partner_gid, value, solve_gid in triples:
        if partner_gid not in model.generators or solve_gid not in model.generators:
            raise ContractionError("pair members must be current model generators")
        if alg.ghost_of(solve_gid) != alg.ghost_of(partner_gid) + 1:
            raise ContractionError(
                f"{alg.display(solve_gid)} does not sit one degree above "
                f"{alg.display(partner_gid)}"
            )
        g = value.grade()
        if g != "zero" and g != alg.ghost_of(partner_gid):
            raise ContractionError("value has the wrong ghost degree")
        if partner_gid in partners:
            raise ContractionError("repeated partner in block")
        partners[partner_gid] = value
        order.append((partner_gid, solve_gid))
    if len({s for _, s in order}) != len(order):
        raise ContractionError("repeated solve target in block")

    part_sub = Substitution(alg, partners, label="block values")
    pending = {s: part_sub(model.q.of(p)) for p, s in order}
    solved: dict[int, GradedExpression] = {}
    while pending:
        progress = False
        for solve_gid in list(pending):
            veq = pending[solve_gid]
            if solved:
                veq = Substitution(alg, dict(solved))(veq)
            if any(s in veq.generators_present() for s in pending if s != solve_gid):
                continue
            try:
                c, rest = _linear_solve_for(veq, solve_gid)
            except ContractionError:
                continue
            solved[solve_gid] = rest.scale(Fraction(-1) / c)
            del pending[solve_gid]
            progress = True
        if not progress:
            raise ContractionError(
                "block does not contract; stalled on "
                + ", ".join(alg.display(s) for s in pending)
            )
    # Close the solved values under each other until they stabilize.
    for _ in range(len(solved) + 1):
        sub_now = Substitution(alg, {**partners, **solved})
        refreshed = {s: sub_now(v) for s, v in solved.items()}
        if refreshed == solved:
            break
        solved = refreshed
    else:
        raise ContractionError("block solution did not stabilize")

    sub = Substitution(alg, {**partners, **solved}, label="block drop")
    for p, s in order:
        if sub(model.q.of(p)).terms:
            raise ContractionError("internal inconsistency: block does not contract")
    dropped = set(partners) | set(solved)
    survivors = [gid for gid in model.generators if gid not in dropped]
    new_q = _substituted_table(model, sub, survivors)
    new_constraints = model.constraints.substituted(sub) if model.constraints else None
    step = ReductionStep(
        kind="pair",
        removed=tuple(alg.display(g) for pair in order for g in pair),
        detail="; ".join(
            f"{alg.display(p)} -> {partners[p]}; {alg.display(s)} -> {solved[s]}"
            for p, s in order
        ),
    )
    new_model = dataclasses.replace(
        model, generators=survivors, q=new_q, constraints=new_constraints
    )
    return new_model, step


def solve_relation_for(model, relation_index: int, solve_gid: int):
    """Use a residual relation to eliminate a degree-0 generator.

    The relation must be linear in ``solve_gid`` with a rational coefficient;
    the relation is consumed (removed from the residual list).
    """
    alg: GradedAlgebra = model.alg
    if model.constraints is None or not (
        0 <= relation_index < len(model.constraints.residual)
    ):
        raise ContractionError("no such residual relation")
    rel = model.constraints.residual[relation_index]
    c, rest = _linear_solve_for(rel, solve_gid)
    solved_value = rest.scale(Fraction(-1) / c)
    sub = Substitution(alg, {solve_gid: solved_value})
    survivors = [gid for gid in model.generators if gid != solve_gid]
    new_q = _substituted_table(model, sub, survivors)
    remaining = [
        r for i, r in enumerate(model.constraints.residual) if i != relation_index
    ]
    new_constraints = ConstraintSystem(
        alg,
        {g: sub(v) for g, v in model.constraints.solved.items() if g != solve_gid},
        [sub(r) for r in remaining if sub(r).terms],
        model.constraints.label,
    )
    step = ReductionStep(
        kind="relation",
        removed=(alg.display(solve_gid),),
        detail=f"{alg.display(solve_gid)} -> {solved_value} (from relation {rel})",
    )
    new_model = dataclasses.replace(
        model, generators=survivors, q=new_q, constraints=new_constraints
    )
    return new_model, step


def redefine_generators(
    model,
    forward: dict[int, GradedExpression],
    backward: dict[int, GradedExpression],
    introduced: Sequence[int],
):
    """Invertible linear change of fiber generators.

    ``forward`` sends each old generator to its expression in the new ones
    (used to substitute the table); ``backward`` sends each new generator to
    its expression in the old ones (used to derive the new Q entries).
    """
    alg: GradedAlgebra = model.alg
    sub = Substitution(alg, forward, label="redefine")
    survivors = [gid for gid in model.generators if gid not in forward]
    new_gens = survivors + list(introduced)
    new_q = _substituted_table(model, sub, survivors)
    for gid in introduced:
        new_q.set_entry(gid, sub(model.q(backward[gid])))
    new_constraints = model.constraints.substituted(sub) if model.constraints else None
    step = ReductionStep(
        kind="redefine",
        removed=tuple(alg.display(g) for g in forward),
        introduced=tuple(alg.display(g) for g in introduced),
    )
    new_model = dataclasses.replace(
        model, generators=new_gens, q=new_q, constraints=new_constraints
    )
    return new_model, step


def _substituted_table(model, sub: Substitution, survivors: Sequence[int]) -> Derivation:
    alg = model.alg
    new_q = Derivation(alg, model.q.degree, label=model.q.label, ctx=model.q.ctx)
    for gid in survivors:
        try:
            entry = model.q.of(gid)
        except DerivationEntryError:
            # intentionally undeclared (curvature towers); stays undeclared
            continue
        new_q.set_entry(gid, sub(entry))
    for gid, entry in model.q.entries.items():
        if gid not in sub.mapping and gid not in new_q.entries:
            new_q.set_entry(gid, sub(entry))
    for hook in model.q.hooks:
        new_q.add_hook(lambda g, _h=hook, _s=sub: _apply_opt(_s, _h(g)))
    return new_q


def _apply_opt(sub: Substitution, expr: GradedExpression | None) -> GradedExpression | None:
    return sub(expr) if expr is not None else None
