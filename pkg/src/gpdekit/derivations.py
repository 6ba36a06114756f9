"""Graded derivations, commutators, nilpotency verdicts, horizontal homotopy.

A derivation is stored as a generator table plus optional hooks (for lazily
prolonged jet entries) and extended by the graded Leibniz rule.  Squaring a
degree-1 odd derivation and classifying the residue per generator is the
core verification primitive of the package.

Verdict discipline for ``check_nilpotency``:

- ``pass``: the residue reduces to exactly zero;
- ``conditional``: the residue involves an opaque symbol standing for an
  undeclared action on a curvature-type generator, so it cannot be judged
  either way until that action is declared;
- ``fail``: a nonzero residue free of opaque symbols;
- ``inconclusive``: the computation overflowed the jet truncation ceiling.

An ``inconclusive`` or ``conditional`` item never upgrades to ``pass``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, combinations_with_replacement
from typing import Callable, Iterable, Sequence

from gpdekit.algebra import (
    AlgebraError,
    GradedAlgebra,
    GradedExpression,
    GRADE_ZERO,
)
from gpdekit.jets import JetContext, JetOrderError
from gpdekit.linalg import solve_sparse

OPAQUE_NAME = "?Q"


class DerivationEntryError(AlgebraError):
    """The derivation has no declared action on a generator."""


class Derivation:
    """A graded derivation given by its action on generators.

    ``degree`` is the ghost shift.  Entries may come from an explicit table,
    from registered hooks (tried in order), or from jet prolongation when a
    ``JetContext`` is attached: the action on a jet generator is then the
    iterated total derivative of the action on its base generator, which
    makes the derivation commute with every D_a by construction.
    """

    def __init__(
        self,
        alg: GradedAlgebra,
        degree: int,
        label: str = "",
        ctx: JetContext | None = None,
        fallback: Callable[[int], GradedExpression] | None = None,
    ) -> None:
        self.alg = alg
        self.degree = degree
        self.parity = degree % 2
        self.label = label
        self.ctx = ctx
        self.fallback = fallback
        self.entries: dict[int, GradedExpression] = {}
        self.hooks: list[Callable[[int], GradedExpression | None]] = []
        self._cache: dict[int, GradedExpression] = {}

    def set_entry(self, gid: int, image: GradedExpression) -> None:
        want = self.alg.ghost_of(gid) + self.degree
        g = image.grade()
        if g != GRADE_ZERO and g != want:
            raise AlgebraError(
                f"{self.label or 'derivation'} entry for {self.alg.display(gid)} "
                f"has grade {g}, expected {want}"
            )
        self.entries[gid] = image
        self._cache.pop(gid, None)

    def add_hook(self, hook: Callable[[int], GradedExpression | None]) -> None:
        self.hooks.append(hook)

    def of(self, gid: int) -> GradedExpression:
        got = self._cache.get(gid)
        if got is not None:
            return got
        out = self._compute(gid)
        self._cache[gid] = out
        return out

    def _compute(self, gid: int) -> GradedExpression:
        ent = self.entries.get(gid)
        if ent is not None:
            return ent
        for hook in self.hooks:
            out = hook(gid)
            if out is not None:
                return out
        if self.ctx is not None:
            gen = self.alg.gen(gid)
            if gen.deriv and gen.name in self.ctx.fields:
                prev = self.of(
                    self.alg.generator(gen.name, gen.indices, gen.ghost, gen.deriv[:-1])
                )
                return self.ctx.total_derivative(prev, gen.deriv[-1])
        if self.fallback is not None:
            return self.fallback(gid)
        raise DerivationEntryError(
            f"{self.label or 'derivation'} undeclared on {self.alg.display(gid)}"
        )

    def __call__(self, expr: GradedExpression) -> GradedExpression:
        alg = self.alg
        out = alg.zero()
        for m, c in expr.terms.items():
            prefix_parity = 0
            for i, gid in enumerate(m):
                v = self.of(gid)
                if v.terms:
                    rest = m[:i] + m[i + 1:]
                    # Graded Leibniz through the prefix plus moving the image
                    # to the front combine into a single sign: the parity of
                    # the original generator times that of the prefix.
                    sign = -1 if (alg.parity_of(gid) and prefix_parity) else 1
                    out = out + v.mul_monomial(rest, c if sign > 0 else -c)
                prefix_parity ^= alg.parity_of(gid)
        return out

    def with_fallback(self, fallback: Callable[[int], GradedExpression]) -> "Derivation":
        clone = Derivation(self.alg, self.degree, self.label, self.ctx, fallback)
        clone.entries = self.entries
        clone.hooks = self.hooks
        return clone


def apply(v: Derivation, expr: GradedExpression) -> GradedExpression:
    return v(expr)


def graded_commutator(v: Derivation, w: Derivation) -> Derivation:
    """[v, w] = v w - (-1)^{|v||w|} w v, assembled lazily per generator."""
    if v.alg is not w.alg:
        raise AlgebraError("commutator across different algebras")
    sign = -1 if (v.parity and w.parity) else 1
    out = Derivation(v.alg, v.degree + w.degree, label=f"[{v.label},{w.label}]", ctx=v.ctx or w.ctx)

    def hook(gid: int) -> GradedExpression:
        first = v(w.of(gid))
        second = w(v.of(gid))
        return first - second if sign > 0 else first + second

    out.add_hook(hook)
    return out


# -- opaque symbols for undeclared curvature actions ---------------------------


def opaque_symbol(alg: GradedAlgebra, gid: int, degree: int) -> GradedExpression:
    """A fresh symbol standing for the undeclared image of ``gid``."""
    sym = alg.generator(OPAQUE_NAME, (gid,), alg.ghost_of(gid) + degree)
    return alg.of_gen(sym)


def contains_opaque(alg: GradedAlgebra, expr: GradedExpression) -> bool:
    return any(alg.gen(g).name == OPAQUE_NAME for m in expr.terms for g in m)


# -- nilpotency ----------------------------------------------------------------


@dataclass
class GeneratorVerdict:
    gid: int
    verdict: str  # pass | conditional | fail | inconclusive
    residue: GradedExpression | None = None
    note: str = ""


@dataclass
class NilpotencyReport:
    label: str
    items: list[GeneratorVerdict] = field(default_factory=list)

    @property
    def aggregate(self) -> str:
        order = {"pass": 0, "conditional": 1, "inconclusive": 2, "fail": 3}
        worst = "pass"
        for it in self.items:
            if order[it.verdict] > order[worst]:
                worst = it.verdict
        return worst

    def failures(self) -> list[GeneratorVerdict]:
        return [it for it in self.items if it.verdict == "fail"]

    def counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for it in self.items:
            out[it.verdict] = out.get(it.verdict, 0) + 1
        return out


def check_nilpotency(
    q: Derivation,
    generators: Iterable[int],
    modulo=None,
    q_open: Callable[[int], bool] | None = None,
) -> NilpotencyReport:
    """Classify Q(Q(g)) per generator, optionally modulo a constraint system.

    ``q_open`` marks generators whose Q-action is intentionally undeclared;
    their images become opaque symbols and taint residues into the
    ``conditional`` verdict instead of ``fail``.
    """
    alg = q.alg

    if q_open is not None:
        def fallback(gid: int) -> GradedExpression:
            if q_open(gid) or alg.gen(gid).name == OPAQUE_NAME:
                return opaque_symbol(alg, gid, q.degree)
            raise DerivationEntryError(
                f"{q.label or 'derivation'} undeclared on {alg.display(gid)}"
            )
        q = q.with_fallback(fallback)

    report = NilpotencyReport(label=f"{q.label or 'Q'}^2")
    for gid in generators:
        if q_open is not None and q_open(gid):
            report.items.append(
                GeneratorVerdict(gid, "conditional", None, "generator action is undeclared")
            )
            continue
        try:
            raw = q(q.of(gid))
            residue = raw
            if residue.terms and modulo is not None:
                residue = modulo.reduce(residue)
        except JetOrderError as exc:
            report.items.append(
                GeneratorVerdict(gid, "inconclusive", None, f"truncation overflow: {exc}")
            )
            continue
        if not residue.terms:
            report.items.append(GeneratorVerdict(gid, "pass"))
        elif contains_opaque(alg, residue):
            report.items.append(
                GeneratorVerdict(
                    gid, "conditional", residue, "residue involves undeclared curvature action"
                )
            )
        elif _membership_fallback(raw, residue, modulo):
            report.items.append(
                GeneratorVerdict(gid, "pass", None, "residue certified by explicit combination")
            )
        else:
            report.items.append(GeneratorVerdict(gid, "fail", residue))
    return report


def _membership_fallback(raw: GradedExpression, residue: GradedExpression, modulo) -> bool:
    """Last resort for nonzero normal forms: search for an ideal certificate.

    Normal forms modulo a non-confluent presentation are one-sided, so a
    leftover residue may still be an honest ideal member.  When the modulo
    object can list its relations, a bounded span search for an explicit
    combination settles those cases exactly.  The raw square is tried
    first: reduction discards the very products a certificate is built
    from, so the unreduced form is usually the easier target.
    """
    rels = getattr(modulo, "relations", None)
    if rels is None:
        return False
    from gpdekit.constraints import membership_certificate

    relations = rels()
    if membership_certificate(raw, relations) is not None:
        return True
    return membership_certificate(residue, relations) is not None


# -- horizontal exactness witness ----------------------------------------------


@dataclass
class WitnessResult:
    status: str  # witness | evolutionary | not-cocycle | obstructed | mixed-degree
    witness: Derivation | None = None
    residues: list[tuple[int, GradedExpression]] = field(default_factory=list)
    verified_levels: int = -1
    note: str = ""


def _theta_degree(alg: GradedAlgebra, expr: GradedExpression) -> int | None:
    """Common theta-degree of all terms, or None if mixed."""
    degs = set()
    for m in expr.terms:
        degs.add(sum(1 for g in m if alg.gen(g).name == "th"))
    if not degs:
        return None
    return degs.pop() if len(degs) == 1 else -1


def _strip_theta(alg: GradedAlgebra, expr: GradedExpression):
    """Split each term into (sorted theta index set, jet monomial, coeff).

    Theta factors are pulled to the front of the monomial; the Koszul sign
    of that move is absorbed into the coefficient.
    """
    out: dict[tuple[tuple[int, ...], tuple[int, ...]], Fraction] = {}
    for m, c in expr.terms.items():
        thetas: list[int] = []
        rest: list[int] = []
        sign = 1
        odd_rest_seen = 0
        for g in reversed(m):
            if alg.gen(g).name == "th":
                thetas.append(alg.gen(g).indices[0])
                if odd_rest_seen & 1:
                    sign = -sign
            else:
                rest.append(g)
                if alg.parity_of(g):
                    odd_rest_seen += 1
        thetas.reverse()
        rest.reverse()
        key = (tuple(thetas), tuple(rest))
        prev = out.get(key, Fraction(0))
        val = prev + (c if sign > 0 else -c)
        if val:
            out[key] = val
        elif key in out:
            del out[key]
    return out


def dh_exactness_witness(
    ctx: JetContext,
    v: Derivation,
    fields: Sequence[str],
    max_level: int | None = None,
) -> WitnessResult:
    """Solve [d_h, W] = V for a vertical W, one jet level at a time.

    V must be vertical with all entries of one positive theta-degree k; the
    witness W has theta-degree k-1 and is normalized by W = 0 on the
    underived generators.  Entries of V are consumed up to ``max_level``
    (default: context order), and the returned witness reproduces V on all
    levels strictly below that.  theta-degree-0 input is evolutionary and is
    reported as a nontrivial representative rather than witnessed.
    """
    alg = ctx.alg
    top = ctx.order if max_level is None else max_level

    def jet_ids_at(level: int) -> list[int]:
        out = []
        for name in fields:
            fld = ctx.fields[name]
            idx_pool = (
                [tuple(sorted(i)) if fld.symmetric else i
                 for i in combinations_with_replacement(range(ctx.dim), fld.nindices)]
                if fld.nindices
                else [()]
            )
            for idx in idx_pool:
                for deriv in combinations_with_replacement(range(ctx.dim), level):
                    out.append(ctx.jet_id(name, idx, deriv))
        return sorted(set(out))

    # Degree screening.
    kset = set()
    for level in range(0, top + 1):
        for gid in jet_ids_at(level):
            img = v.of(gid)
            if img.terms:
                kset.add(_theta_degree(alg, img))
    if not kset:
        return WitnessResult(
            "witness",
            witness=Derivation(alg, 0, label="0", ctx=ctx),
            verified_levels=top - 1,
            note="input is identically zero",
        )
    if len(kset) > 1 or -1 in kset:
        return WitnessResult("mixed-degree", note=f"theta-degrees seen: {sorted(kset)}")
    k = kset.pop()
    if k == 0:
        return WitnessResult(
            "evolutionary",
            note="theta-degree 0: evolutionary representative, no horizontal witness",
        )

    # Cocycle check: theta^a V(phi_{s+a}) = d_h V(phi_s) for levels with headroom.
    residues: list[tuple[int, GradedExpression]] = []
    try:
        for level in range(0, top):
            for gid in jet_ids_at(level):
                gen = alg.gen(gid)
                lhs = alg.zero()
                for a in range(ctx.dim):
                    up = ctx.jet_id(gen.name, gen.indices, gen.deriv + (a,))
                    lhs = lhs + alg.of_gen(ctx.theta_ids[a]) * v.of(up)
                diff = lhs - ctx.base_differential(v.of(gid))
                if diff.terms:
                    residues.append((gid, diff))
    except JetOrderError as exc:
        return WitnessResult("obstructed", note=f"truncation overflow: {exc}")
    if residues:
        return WitnessResult("not-cocycle", residues=residues)

    # Level-by-level solve.  Unknowns: the coefficient of W(phi_t) on each
    # (theta-set, jet-monomial) component; equations couple all parents of a
    # level at once, so no per-parent choice is ever made.
    w = Derivation(alg, k - 1, label=f"h({v.label})", ctx=ctx)
    for gid in ctx.x_ids + ctx.theta_ids:
        w.set_entry(gid, alg.zero())
    for gid in jet_ids_at(0):
        w.set_entry(gid, alg.zero())
    try:
        for level in range(0, top):
            parents = jet_ids_at(level)
            parent_parts: dict[int, dict] = {}
            all_jms: set[tuple[int, ...]] = set()
            for gid in parents:
                parts = _strip_theta(alg, ctx.base_differential(w.of(gid)) - v.of(gid))
                parent_parts[gid] = parts
                all_jms.update(jm for (_, jm) in parts)
            jms = sorted(all_jms, key=alg.monomial_order_key)
            equations = []
            for gid in parents:
                gen = alg.gen(gid)
                lhs_cols: dict[tuple, dict] = {}
                for b in range(ctx.dim):
                    child = ctx.jet_id(gen.name, gen.indices, gen.deriv + (b,))
                    for tset in combinations(range(ctx.dim), k - 1):
                        if b in tset:
                            continue
                        full = tuple(sorted(tset + (b,)))
                        # theta_b theta^{tset} = (-1)^pos theta^{full}.
                        sgn = Fraction(-1) ** full.index(b)
                        lhs_cols.setdefault(full, {})[(child, tset)] = sgn
                parts = parent_parts[gid]
                for full, cols in lhs_cols.items():
                    for jm in jms:
                        coeffs = {
                            (child, tset, jm): sgn for (child, tset), sgn in cols.items()
                        }
                        equations.append((coeffs, parts.get((full, jm), Fraction(0))))
                for (full, jm), val in parts.items():
                    if full not in lhs_cols:
                        equations.append(({}, val))
            sol = solve_sparse(equations)
            if any(isinstance(r, Fraction) and r for r in sol.forced):
                return WitnessResult(
                    "obstructed",
                    note=f"level {level}: {len(sol.forced)} unsolvable components",
                )
            # Solved coefficients become the next level's entries; components
            # the system leaves free default to zero.
            acc: dict[int, list[tuple[Fraction, list[int]]]] = {}
            for var, val in sol.particular_solution().items():
                child, tset, jm = var
                if val:
                    mono = [ctx.theta_ids[t] for t in tset] + list(jm)
                    acc.setdefault(child, []).append((val, mono))
            for child in jet_ids_at(level + 1):
                w.set_entry(child, alg.from_terms(acc.get(child, [])))

        # Final verification strictly below the consumed level.
        check = graded_commutator(_horizontal_derivation(ctx), w)
        bad: list[tuple[int, GradedExpression]] = []
        for level in range(0, top):
            for gid in jet_ids_at(level):
                diff = check.of(gid) - v.of(gid)
                if diff.terms:
                    bad.append((gid, diff))
    except JetOrderError as exc:
        return WitnessResult("obstructed", note=f"truncation overflow: {exc}")
    if bad:
        return WitnessResult("obstructed", residues=bad, note="verification residue")
    return WitnessResult("witness", witness=w, verified_levels=top - 1)


def _horizontal_derivation(ctx: JetContext) -> Derivation:
    """d_h as a Derivation: x -> theta, theta -> 0, jets via the tower."""
    alg = ctx.alg
    dh = Derivation(alg, 1, label="d_h", ctx=ctx)

    def hook(gid: int) -> GradedExpression | None:
        gen = alg.gen(gid)
        if gen.name == "x":
            return alg.of_gen(ctx.theta_ids[gen.indices[0]])
        if gen.name == "th":
            return alg.zero()
        if gen.name in ctx.fields or (
            gen.name.startswith("~") and gen.name[1:] in ctx.formal_fields
        ):
            return ctx.base_differential(alg.of_gen(gid))
        return None

    dh.add_hook(hook)
    return dh


def horizontal_differential(ctx: JetContext) -> Derivation:
    return _horizontal_derivation(ctx)
