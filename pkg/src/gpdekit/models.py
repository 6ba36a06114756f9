"""Built-in catalogue of graded bundle models with a homological action.

Two families live here.  The jet-bundle models (plain and conformally
extended gravity) carry a ``JetContext`` and get their action on higher
jets by prolongation.  The fiber models live on a finite-dimensional
graded fiber whose degree-0 sector holds a metric, its inverse, a null
direction and a curvature tower, with the action given by explicit
tables; their constraint ideals and scripted reductions reproduce the
passage from the boundary presentation to its minimal one.

Generator name conventions shared by the fiber models: "g"/"ginv" for
the metric pair, "n" for the distinguished direction, "Om" for the
defining scale, "rho" (scalar) for its second-order trace datum, "xi"
for the vector ghost, "C" for the matrix ghost, "lam" for the scale
ghost, "lamv" for the vector partner ghost, "W" for the curvature
tower.  The adapted fiber split fixes index 0 as the scale direction
and, when present, index 1 as the null direction.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations_with_replacement
from typing import Callable, Iterable, Sequence

from gpdekit.algebra import (
    AlgebraError,
    GradedAlgebra,
    GradedExpression,
    Substitution,
)
from gpdekit.constraints import (
    ConstraintSystem,
    ContractionError,
    ReductionStep,
    StagedReduction,
    eliminate_contractible_block,
    eliminate_contractible_pair,
    groebner_basis,
    redefine_generators,
    solve_relation_for,
)
from gpdekit.derivations import Derivation, NilpotencyReport, check_nilpotency
from gpdekit.jets import JetContext, christoffel_schouten
from gpdekit.weyl import CurvatureFamily


class ModelError(AlgebraError):
    """Malformed model data or an unknown catalogue entry."""


class ReplayError(AlgebraError):
    """A scripted reduction step failed; the message names the step."""


@dataclass
class ModelSpec:
    """A graded bundle with a degree-1 homological action.

    ``generators`` lists the fiber (or jet) coordinates the model owns;
    the action may additionally touch base coordinates.  ``curvature``
    marks a generator family whose action is intentionally undeclared,
    which turns nilpotency residues involving it into "conditional"
    verdicts rather than failures.
    """

    name: str
    alg: GradedAlgebra
    generators: list[int]
    q: Derivation
    ctx: JetContext | None = None
    constraints: ConstraintSystem | None = None
    curvature: CurvatureFamily | None = None
    metadata: dict = field(default_factory=dict)

    def q_open(self) -> Callable[[int], bool] | None:
        fam = self.curvature
        if fam is None:
            return None
        return fam.is_member

    def declared_generators(self) -> list[int]:
        """Generators with an explicit action entry (curvature tower excluded)."""
        fam = self.curvature
        if fam is None:
            return list(self.generators)
        return [g for g in self.generators if not fam.is_member(g)]

    def nilpotency(
        self, generators: Iterable[int] | None = None, completed: bool = False
    ) -> NilpotencyReport:
        gens = list(generators) if generators is not None else list(self.generators)
        modulo = completed_fiber_system(self) if completed else self.constraints
        return check_nilpotency(self.q, gens, modulo=modulo, q_open=self.q_open())


def flipped(model: ModelSpec) -> ModelSpec:
    """The same model with the vertical action negated.

    Negating every entry of a degree-1 derivation squares to the same
    zero, and realizes the sign convention in which degree-1 fiber
    coordinates are replaced by their negatives.
    """
    q = Derivation(model.alg, model.q.degree, label=model.q.label, ctx=model.q.ctx)
    for gid, entry in model.q.entries.items():
        q.set_entry(gid, -entry)
    for hook in model.q.hooks:
        q.add_hook(lambda g, _h=hook: (lambda v: -v if v is not None else None)(_h(g)))
    meta = dict(model.metadata)
    meta["sign_flag"] = "flipped" if meta.get("sign_flag") != "flipped" else "plain"
    return dataclasses.replace(model, q=q, metadata=meta)


def completed_fiber_system(model: ModelSpec):
    """The model's ideal, staged for reliable membership tests.

    Leading-monomial rewriting against the raw contraction relations
    misses most of their consequences, so residues that are honest ideal
    members survive reduction.  Completing just the pair sector restores
    a decision procedure there, but mixing the completed rules with the
    remaining relations in one pass breaks again: a trace or direction
    rule can fire first and derail the pair telescope.  Completing the
    whole even sector does not terminate in reasonable time, so the pair
    basis and the leftover relations run as separate stages iterated to a
    fixpoint instead.  Completion is also known to run away above four
    dimensions, so callers needing this stay at dimension four.

    Models without a metric pair (the minimal ones, or jet models) are
    returned unchanged.
    """
    cached = model.metadata.get("_completed_system")
    if cached is not None:
        return cached
    fib = model.metadata.get("fiber")
    if fib is None or not hasattr(fib, "pair_relations") or model.constraints is None:
        return model.constraints
    pairs = fib.pair_relations()
    if not pairs:
        return model.constraints
    completed = groebner_basis(model.alg, pairs)
    others = [r for r in model.constraints.residual if r not in pairs]
    base = model.constraints.label or "ideal"
    out = StagedReduction(
        stages=(
            ConstraintSystem(model.alg, None, completed, label=base + " (pair sector)"),
            ConstraintSystem(model.alg, None, others, label=base + " (rest)"),
        ),
        label=base + " (staged)",
    )
    model.metadata["_completed_system"] = out
    return out


def _multisets(dim: int, size: int):
    return combinations_with_replacement(range(dim), size)


def _jet_gen_ids(ctx: JetContext, name: str, max_order: int) -> list[int]:
    fld = ctx.fields[name]
    if fld.nindices == 0:
        idx_pool: list[tuple[int, ...]] = [()]
    elif fld.nindices == 1:
        idx_pool = [(a,) for a in range(ctx.dim)]
    elif fld.symmetric:
        idx_pool = [tuple(s) for s in _multisets(ctx.dim, 2)]
    else:
        idx_pool = [(a, b) for a in range(ctx.dim) for b in range(ctx.dim)]
    top = 0 if fld.no_prolong else max_order
    out = []
    for idx in idx_pool:
        for k in range(top + 1):
            for s in _multisets(ctx.dim, k):
                out.append(ctx.jet_id(name, idx, s))
    return out


# -- jet-bundle models -----------------------------------------------------------


def build_offshell_gr(dim: int = 4, order: int = 1) -> ModelSpec:
    """Unconstrained metric gravity: diffeomorphism ghost acting by Lie drag.

    The context gets two orders of headroom so that squaring the action
    on the listed generators stays under the truncation ceiling.
    """
    if dim < 4:
        raise ModelError("the metric models assume base dimension >= 4")
    if order < 0:
        raise ModelError("jet order must be nonnegative")
    alg = GradedAlgebra(label=f"offshell-gr d={dim}")
    ctx = JetContext(alg, dim, order + 2)
    ctx.declare_field("g", 2, ghost=0, symmetric=True)
    ctx.declare_field("xi", 1, ghost=1)
    q = Derivation(alg, 1, label="Q", ctx=ctx)
    for mu in range(dim):
        q.set_entry(ctx.x_ids[mu], ctx.theta(mu))
        q.set_entry(ctx.theta_ids[mu], alg.zero())

    def lie_drag(b: int, c: int) -> GradedExpression:
        out = alg.zero()
        for a in range(dim):
            out = out + ctx.jet("xi", (a,)) * ctx.jet("g", (b, c), (a,))
            out = out + ctx.jet("g", (a, c)) * ctx.jet("xi", (a,), (b,))
            out = out + ctx.jet("g", (b, a)) * ctx.jet("xi", (a,), (c,))
        return out

    for b in range(dim):
        for c in range(b, dim):
            q.set_entry(ctx.jet_id("g", (b, c)), lie_drag(b, c))
    for b in range(dim):
        ent = alg.zero()
        for a in range(dim):
            ent = ent + ctx.jet("xi", (a,)) * ctx.jet("xi", (b,), (a,))
        q.set_entry(ctx.jet_id("xi", (b,)), ent)

    generators = _jet_gen_ids(ctx, "g", order) + _jet_gen_ids(ctx, "xi", order)
    return ModelSpec(
        name="offshell-gr",
        alg=alg,
        generators=generators,
        q=q,
        ctx=ctx,
        metadata={"dim": dim, "order": order, "regime": "exact"},
    )


def hessian_constraint_parts(ctx: JetContext, geo, scale: str = "Om"):
    """Second-derivative data of the scale field, split as (core, trace part).

    core(b, c) is the covariant second derivative plus the curvature
    correction; the trace part is chosen so that the full constraint
    tensor core + trace*g is metric-traceless by construction.
    """
    alg = ctx.alg
    dim = ctx.dim

    def core(b: int, c: int) -> GradedExpression:
        out = ctx.jet(scale, (), (b, c))
        for d_ in range(dim):
            out = out - geo.gamma(d_, b, c) * ctx.jet(scale, (), (d_,))
        out = out + ctx.jet(scale) * geo.schouten(b, c)
        return out

    trace = alg.zero()
    for b in range(dim):
        for c in range(dim):
            trace = trace + geo.ginv(b, c) * core(b, c)
    trace = trace.scale(Fraction(-1, dim))
    return core, trace


def build_conformal_like(
    dim: int = 4,
    order: int = 2,
    on_shell: bool = False,
    cosmological: Fraction = Fraction(0),
    complete_pairs: bool | None = None,
) -> ModelSpec:
    """Gravity with a positive scale field and a rescaling ghost.

    ``on_shell`` installs the constraint ideal generated by the
    traceless second-derivative tensor of the scale, its symmetrized
    derivatives up to ``order``, and a scalar relation fixing the norm
    of the scale gradient against the cosmological constant.
    """
    if dim < 4:
        raise ModelError("the metric models assume base dimension >= 4")
    alg = GradedAlgebra(label=f"conformal d={dim}")
    ctx = JetContext(alg, dim, order + 2)
    geo = christoffel_schouten(ctx)
    ctx.declare_field("Om", 0, ghost=0)
    ctx.declare_field("lam", 0, ghost=1)
    ctx.declare_field("xi", 1, ghost=1)
    q = Derivation(alg, 1, label="Q", ctx=ctx)
    for mu in range(dim):
        q.set_entry(ctx.x_ids[mu], ctx.theta(mu))
        q.set_entry(ctx.theta_ids[mu], alg.zero())

    def q_metric(b: int, c: int) -> GradedExpression:
        out = alg.of_gen(ctx.jet_id("lam"), 2) * ctx.jet("g", (b, c))
        for a in range(dim):
            out = out + ctx.jet("xi", (a,)) * ctx.jet("g", (b, c), (a,))
            out = out + ctx.jet("g", (a, c)) * ctx.jet("xi", (a,), (b,))
            out = out + ctx.jet("g", (b, a)) * ctx.jet("xi", (a,), (c,))
        return out

    for b in range(dim):
        for c in range(b, dim):
            q.set_entry(ctx.jet_id("g", (b, c)), q_metric(b, c))
    for b in range(dim):
        ent = alg.zero()
        for a in range(dim):
            ent = ent + ctx.jet("xi", (a,)) * ctx.jet("xi", (b,), (a,))
        q.set_entry(ctx.jet_id("xi", (b,)), ent)
    ent = ctx.jet("lam") * ctx.jet("Om")
    for a in range(dim):
        ent = ent + ctx.jet("xi", (a,)) * ctx.jet("Om", (), (a,))
    q.set_entry(ctx.jet_id("Om"), ent)
    ent = alg.zero()
    for a in range(dim):
        ent = ent + ctx.jet("xi", (a,)) * ctx.jet("lam", (), (a,))
    q.set_entry(ctx.jet_id("lam"), ent)
    # The inverse metric has no tower; its action follows from the pair
    # identity: Q g^{bc} = -g^{be} g^{cf} Q g_{ef}.
    for b in range(dim):
        for c in range(b, dim):
            ent = alg.zero()
            for e in range(dim):
                for f in range(dim):
                    ent = ent - geo.ginv(b, e) * geo.ginv(c, f) * q.of(
                        ctx.jet_id("g", tuple(sorted((e, f))))
                    )
            q.set_entry(ctx.jet_id("ginv", (b, c)), ent)

    generators = (
        _jet_gen_ids(ctx, "g", order)
        + _jet_gen_ids(ctx, "ginv", order)
        + _jet_gen_ids(ctx, "Om", order)
        + _jet_gen_ids(ctx, "lam", order)
        + _jet_gen_ids(ctx, "xi", order)
    )

    constraints = None
    name = "conformal-like"
    if on_shell:
        name = "conformal-onshell"
        core, trace = hessian_constraint_parts(ctx, geo)

        def tensor(b: int, c: int) -> GradedExpression:
            return core(b, c) + trace * ctx.jet("g", (b, c))

        residual: list[GradedExpression] = []
        for k in range(order + 1):
            for s in _multisets(dim, k):
                for b in range(dim):
                    for c in range(b, dim):
                        residual.append(ctx.total_derivative_multi(tensor(b, c), s))
        scalar = ctx.jet("Om") * trace + alg.scalar(
            Fraction(cosmological, (dim - 1) * (dim - 2))
        )
        half = Fraction(1, 2)
        for a in range(dim):
            for b in range(dim):
                scalar = scalar + (
                    geo.ginv(a, b) * ctx.jet("Om", (), (a,)) * ctx.jet("Om", (), (b,))
                ).scale(half)
        residual.append(scalar)
        if complete_pairs is None:
            complete_pairs = dim <= 4
        if complete_pairs:
            from gpdekit.constraints import completed_metric_rules

            residual.extend(completed_metric_rules(ctx))
        else:
            from gpdekit.jets import metric_pair_relations

            residual.extend(metric_pair_relations(ctx))
        constraints = ConstraintSystem(alg, None, residual, label="on-shell ideal")

    return ModelSpec(
        name=name,
        alg=alg,
        generators=generators,
        q=q,
        ctx=ctx,
        constraints=constraints,
        metadata={
            "dim": dim,
            "order": order,
            "cosmological": Fraction(cosmological),
            "regime": "modulo-constraints" if on_shell else "exact",
            "scalar_index": len(constraints.residual) - 1 if on_shell else None,
        },
    )


# -- fiber models ----------------------------------------------------------------


class _FiberBasis:
    """Generator accessors for the finite-dimensional fiber models."""

    def __init__(self, alg: GradedAlgebra, dim: int, order: int, with_scale: bool):
        if dim < 4:
            raise ModelError("the fiber models assume fiber dimension >= 4")
        if order < 1:
            raise ModelError("the curvature tower needs order >= 1")
        self.alg = alg
        self.dim = dim
        self.order = order
        self.with_scale = with_scale
        self.fam = CurvatureFamily(alg, "W", dim, order)

    # generator ids

    def g_id(self, b: int, c: int) -> int:
        return self.alg.generator("g", tuple(sorted((b, c))), 0)

    def gi_id(self, b: int, c: int) -> int:
        return self.alg.generator("ginv", tuple(sorted((b, c))), 0)

    def n_id(self, b: int) -> int:
        return self.alg.generator("n", (b,), 0)

    def om_id(self) -> int:
        return self.alg.generator("Om", (), 0)

    def rho_id(self) -> int:
        return self.alg.generator("rho", (), 0)

    def xi_id(self, b: int) -> int:
        return self.alg.generator("xi", (b,), 1)

    def c_id(self, b: int, c: int) -> int:
        return self.alg.generator("C", (b, c), 1)

    def lam_id(self) -> int:
        return self.alg.generator("lam", (), 1)

    def lamv_id(self, b: int) -> int:
        return self.alg.generator("lamv", (b,), 1)

    # expressions

    def g(self, b, c):
        return self.alg.of_gen(self.g_id(b, c))

    def gi(self, b, c):
        return self.alg.of_gen(self.gi_id(b, c))

    def n(self, b):
        return self.alg.of_gen(self.n_id(b))

    def om(self):
        return self.alg.of_gen(self.om_id())

    def rho(self):
        return self.alg.of_gen(self.rho_id())

    def xi(self, b):
        return self.alg.of_gen(self.xi_id(b))

    def c(self, b, c):
        return self.alg.of_gen(self.c_id(b, c))

    def lam(self):
        return self.alg.of_gen(self.lam_id())

    def lamv(self, b):
        return self.alg.of_gen(self.lamv_id(b))

    def lam_lower(self, a) -> GradedExpression:
        out = self.alg.zero()
        for b in range(self.dim):
            out = out + self.g(a, b) * self.lamv(b)
        return out

    def xi_lower(self, a) -> GradedExpression:
        out = self.alg.zero()
        for b in range(self.dim):
            out = out + self.g(a, b) * self.xi(b)
        return out

    def w_upper(self, c: int, b: int, a: int, d: int) -> GradedExpression:
        """First index of the curvature raised by the inverse metric."""
        out = self.alg.zero()
        for e in range(self.dim):
            out = out + self.gi(c, e) * self.fam.lower((e, b, a, d))
        return out

    def cotton(self, d_: int, a: int, b: int, deriv: tuple[int, ...] = ()) -> GradedExpression:
        """Contracted first derivative of the curvature tower, all indices low."""
        out = self.alg.zero()
        for c in range(self.dim):
            for e in range(self.dim):
                out = out + self.gi(c, e) * self.fam.lower(
                    (e, d_, a, b), tuple(sorted((c,) + deriv))
                )
        return out.scale(Fraction(-1, self.dim - 3))

    def cotton_upper(self, d_: int, a: int, b: int) -> GradedExpression:
        out = self.alg.zero()
        for f in range(self.dim):
            out = out + self.gi(d_, f) * self.cotton(f, a, b)
        return out

    # shared pieces of the action

    def q_metric(self, b: int, c: int) -> GradedExpression:
        out = self.lam() * self.g(b, c) * 2
        for a in range(self.dim):
            out = out + self.c(b, a) * self.g(a, c) + self.c(c, a) * self.g(a, b)
        return out

    def q_inverse(self, b: int, c: int) -> GradedExpression:
        out = self.alg.zero()
        for e in range(self.dim):
            for f in range(self.dim):
                out = out - self.gi(b, e) * self.gi(c, f) * self.q_metric(e, f)
        return out

    def q_xi(self, b: int) -> GradedExpression:
        out = self.alg.zero()
        for a in range(self.dim):
            out = out + self.xi(a) * self.c(a, b)
        return out

    def q_lam(self) -> GradedExpression:
        out = self.alg.zero()
        for a in range(self.dim):
            out = out + self.xi(a) * self.lam_lower(a)
        return out

    def q_lamv(self, b: int) -> GradedExpression:
        # Nilpotency forces the transposed ghost matrix here: conjugating
        # with the metric instead leaves Q^2 proportional to the symmetric
        # ghost part, which is a free coordinate at this level.  Both forms
        # agree after the equivalent reduction solves that part.
        out = self.alg.zero()
        for a in range(self.dim):
            out = out - self.c(a, b) * self.lamv(a)
        out = out - (self.lam() * self.lamv(b)).scale(Fraction(2))
        half = Fraction(1, 2)
        for a in range(self.dim):
            for d_ in range(self.dim):
                term = self.xi(a) * self.xi(d_) * self.cotton_upper(b, a, d_)
                out = out + term.scale(half)
        return out

    def q_cmatrix(self, b: int, c: int) -> GradedExpression:
        out = self.alg.zero()
        for a in range(self.dim):
            out = out + self.c(b, a) * self.c(a, c)
        out = out + self.lam_lower(b) * self.xi(c) - self.lamv(c) * self.xi_lower(b)
        if b == c:
            for a in range(self.dim):
                out = out + self.lam_lower(a) * self.xi(a)
        half = Fraction(1, 2)
        for a in range(self.dim):
            for d_ in range(self.dim):
                term = self.xi(a) * self.xi(d_) * self.w_upper(c, b, a, d_)
                out = out + term.scale(half)
        return out

    def q_n(self, b: int) -> GradedExpression:
        out = -self.xi(b) * self.rho() - self.lam() * self.n(b)
        for a in range(self.dim):
            out = out - self.n(a) * self.c(a, b)
        if self.with_scale:
            out = out + self.lamv(b) * self.om()
        return out

    def q_rho(self) -> GradedExpression:
        out = -self.lam() * self.rho()
        for a in range(self.dim):
            out = out - self.lam_lower(a) * self.n(a)
        return out

    def q_om(self) -> GradedExpression:
        out = self.lam() * self.om()
        for a in range(self.dim):
            for b in range(self.dim):
                out = out + self.xi(a) * self.g(a, b) * self.n(b)
        return out

    # constraint material

    def pair_relations(self) -> list[GradedExpression]:
        out = []
        for a in range(self.dim):
            for c in range(self.dim):
                rel = self.alg.zero()
                for b in range(self.dim):
                    rel = rel + self.gi(a, b) * self.g(b, c)
                if a == c:
                    rel = rel - self.alg.one()
                if rel.terms:
                    out.append(rel)
        return out

    def trace_relations(self) -> list[GradedExpression]:
        """Metric traces of the curvature tower vanish."""
        out = []
        for k in range(self.order + 1):
            for s in _multisets(self.dim, k):
                for b in range(self.dim):
                    for e in range(b, self.dim):
                        rel = self.alg.zero()
                        for a in range(self.dim):
                            for c in range(self.dim):
                                rel = rel + self.gi(a, c) * self.fam.lower(
                                    (a, b, c, e), s
                                )
                        if rel.terms:
                            out.append(rel)
        return out

    def curvature_direction_relations(self) -> list[GradedExpression]:
        """The derivative family tying the curvature tower to the direction.

        Built by formally differentiating the base relation with the
        covariant rules the tables dictate: tower and third-tensor jets
        shift a derivative slot, the scale differentiates to the lowered
        direction, the direction to minus the expansion times a Kronecker
        delta, and the metric and expansion are constant.

        Scale-free variants restrict the scale coordinate to zero only
        after differentiating, so every Leibniz remnant except the bare
        scale term survives.  They also reach one derivative order higher:
        without the scale term the deepest tensor needed at weight k is
        the k-jet of the tower rather than the (k+1)-jet hidden in its
        divergence.
        """
        out = []
        for k in range(self.direction_depth()):
            for s in _multisets(self.dim, k):
                for d_ in range(self.dim):
                    for b1 in range(self.dim):
                        for b2 in range(b1 + 1, self.dim):
                            rel = self.direction_member(d_, b1, b2, s)
                            if rel.terms:
                                out.append(rel)
        return out

    def direction_depth(self) -> int:
        return self.order if self.with_scale else self.order + 1

    def direction_member(
        self, d_: int, b1: int, b2: int, s: tuple[int, ...]
    ) -> GradedExpression:
        rel = self.alg.zero()
        for c in range(self.dim):
            rel = rel + self.fam.lower((d_, c, b1, b2), s) * self.n(c)
        if self.with_scale:
            rel = rel - self.cotton(d_, b1, b2, s) * self.om()
        for i, e in enumerate(s):
            rest = s[:i] + s[i + 1:]
            rel = rel - self.rho() * self.fam.lower((d_, e, b1, b2), rest)
            grad = self.alg.zero()
            for c in range(self.dim):
                grad = grad + self.g(e, c) * self.n(c)
            rel = rel - grad * self.cotton(d_, b1, b2, rest)
            for j in range(i + 1, len(s)):
                pair_rest = rest[:j - 1] + rest[j:]
                rel = rel + self.rho() * self.g(e, s[j]) * self.cotton(
                    d_, b1, b2, pair_rest
                )
        return rel

    def direction_trace_relations(self) -> list[GradedExpression]:
        """Inverse-metric traces of the first-derivative family members.

        Contracting the first slot against the derivative index turns the
        tower's divergence into the third tensor, so these combinations
        tie that tensor's contraction with the direction back to the
        ideal.  They are consequences of the family modulo the pair and
        trace relations, stated here in contracted form because rewriting
        prefers the high-degree debris monomials of the raw members and
        never assembles a trace on its own.
        """
        out = []
        if self.direction_depth() < 2:
            return out
        for b1 in range(self.dim):
            for b2 in range(b1 + 1, self.dim):
                rel = self.alg.zero()
                for c in range(self.dim):
                    term = self.cotton(c, b1, b2) * self.n(c)
                    rel = rel + term.scale(Fraction(self.dim - 2))
                if self.with_scale:
                    for f in range(self.dim):
                        for e in range(self.dim):
                            rel = rel + self.gi(f, e) * self.cotton(
                                e, b1, b2, (f,)
                            ) * self.om()
                if rel.terms:
                    out.append(rel)
        return out

    def scalar_relation(self, cosmological: Fraction) -> GradedExpression:
        half = Fraction(1, 2)
        rel = self.alg.scalar(
            Fraction(cosmological, (self.dim - 1) * (self.dim - 2))
        )
        for a in range(self.dim):
            for b in range(self.dim):
                rel = rel + (self.g(a, b) * self.n(a) * self.n(b)).scale(half)
        if self.with_scale:
            rel = rel + self.om() * self.rho()
        return rel

    def generator_list(self) -> list[int]:
        gens: list[int] = []
        for b in range(self.dim):
            for c in range(b, self.dim):
                gens.append(self.g_id(b, c))
        for b in range(self.dim):
            for c in range(b, self.dim):
                gens.append(self.gi_id(b, c))
        if self.with_scale:
            gens.append(self.om_id())
        gens.extend(self.n_id(b) for b in range(self.dim))
        gens.append(self.rho_id())
        gens.extend(self.xi_id(b) for b in range(self.dim))
        gens.extend(
            self.c_id(b, c) for b in range(self.dim) for c in range(self.dim)
        )
        gens.append(self.lam_id())
        gens.extend(self.lamv_id(b) for b in range(self.dim))
        gens.extend(self.fam.tower_ids())
        return gens


def _build_fiber_model(
    name: str, dim: int, order: int, cosmological: Fraction, with_scale: bool
) -> ModelSpec:
    alg = GradedAlgebra(label=f"{name} d={dim}")
    fib = _FiberBasis(alg, dim, order, with_scale)
    q = Derivation(alg, 1, label="Q")
    for b in range(dim):
        for c in range(b, dim):
            q.set_entry(fib.g_id(b, c), fib.q_metric(b, c))
            q.set_entry(fib.gi_id(b, c), fib.q_inverse(b, c))
    if with_scale:
        q.set_entry(fib.om_id(), fib.q_om())
    for b in range(dim):
        q.set_entry(fib.n_id(b), fib.q_n(b))
    q.set_entry(fib.rho_id(), fib.q_rho())
    for b in range(dim):
        q.set_entry(fib.xi_id(b), fib.q_xi(b))
    for b in range(dim):
        for c in range(dim):
            q.set_entry(fib.c_id(b, c), fib.q_cmatrix(b, c))
    q.set_entry(fib.lam_id(), fib.q_lam())
    for b in range(dim):
        q.set_entry(fib.lamv_id(b), fib.q_lamv(b))

    residual = [fib.scalar_relation(cosmological)]
    if not with_scale:
        rel = alg.zero()
        for a in range(dim):
            for b in range(dim):
                rel = rel + fib.xi(a) * fib.g(a, b) * fib.n(b)
        residual.append(rel)
    residual.extend(fib.curvature_direction_relations())
    residual.extend(fib.direction_trace_relations())
    residual.extend(fib.trace_relations())
    residual.extend(fib.pair_relations())
    constraints = ConstraintSystem(alg, None, residual, label=f"{name} ideal")

    return ModelSpec(
        name=name,
        alg=alg,
        generators=fib.generator_list(),
        q=q,
        constraints=constraints,
        curvature=fib.fam,
        metadata={
            "dim": dim,
            "order": order,
            "cosmological": Fraction(cosmological),
            "regime": "conditional",
            "split": {"scale": 0, "null": 1} if cosmological == 0 else {"scale": 0},
            "family_range": order - 1 if fib.with_scale else order,
            "fiber": fib,
            "sign_flag": "plain",
        },
    )


def build_preminimal(dim: int = 4, order: int = 1, cosmological: Fraction = Fraction(0)) -> ModelSpec:
    """Bulk fiber model: metric pair, scale, direction, ghosts, curvature tower.

    The eliminated symmetric derivative tower of the scale is recorded in
    the metadata as a solved-rule system: the second symmetrized
    derivative equals minus the trace datum times the metric, and all
    higher totally-symmetric ones vanish.
    """
    model = _build_fiber_model("preminimal", dim, order, cosmological, True)
    alg = model.alg
    fib: _FiberBasis = model.metadata["fiber"]
    solved: dict[int, GradedExpression] = {}
    for k in range(2, order + 3):
        for s in _multisets(dim, k):
            gid = alg.generator("Oms", s, 0)
            if k == 2:
                solved[gid] = -fib.rho() * fib.g(s[0], s[1])
            else:
                solved[gid] = alg.zero()
    model.metadata["eliminated_tower"] = ConstraintSystem(
        alg, solved, (), label="symmetric scale tower"
    )
    return model


def build_boundary_gpde(dim: int = 4, order: int = 1, cosmological: Fraction = Fraction(0)) -> ModelSpec:
    """Boundary fiber model: the scale is pulled back to zero.

    Relative to the bulk table the direction loses its scale term, the
    scalar relation keeps only the direction norm, and the invariance of
    the zero scale adds the degree-1 closure relation.
    """
    return _build_fiber_model("boundary", dim, order, cosmological, False)


# -- minimal models --------------------------------------------------------------


class _MinimalFlatBasis(_FiberBasis):
    """Accessors evaluated on the reduced basis at zero cosmological constant.

    The metric is the constant light-cone form (scale and null directions
    paired, transverse block minus the identity) and the matrix ghost is
    expressed through the surviving rotation block and boundary vector.
    """

    def __init__(self, alg: GradedAlgebra, dim: int, order: int):
        super().__init__(alg, dim, order, with_scale=False)

    def rot_id(self, a: int, b: int) -> int:
        return self.alg.generator("rho", (a, b), 1)

    def cvec_id(self, a: int) -> int:
        return self.alg.generator("cA", (a,), 1)

    def _mg(self, a: int, b: int) -> Fraction:
        if {a, b} == {0, 1}:
            return Fraction(1)
        if a == b and a >= 2:
            return Fraction(-1)
        return Fraction(0)

    def g(self, b, c):
        return self.alg.scalar(self._mg(b, c))

    def gi(self, b, c):
        return self.alg.scalar(self._mg(b, c))

    def n(self, b):
        return self.alg.one() if b == 1 else self.alg.zero()

    def rho(self):
        return self.alg.zero()

    def xi(self, b):
        if b == 0:
            return self.alg.zero()
        return self.alg.of_gen(self.xi_id(b))

    def lamv(self, b):
        if b == 0:
            return self.alg.zero()
        return self.alg.of_gen(self.lamv_id(b))

    def rot(self, a: int, b: int) -> GradedExpression:
        if a == b:
            return self.alg.zero()
        if a < b:
            return self.alg.of_gen(self.rot_id(a, b))
        return -self.alg.of_gen(self.rot_id(b, a))

    def c(self, b, c):
        if b == 0:
            if c == 0:
                return -self.lam()
            if c == 1:
                return self.alg.zero()
            return self.alg.of_gen(self.cvec_id(c))
        if b == 1:
            return -self.lam() if c == 1 else self.alg.zero()
        if c == 0:
            return self.alg.zero()
        if c == 1:
            return self.alg.of_gen(self.cvec_id(b))
        if b == c:
            return -self.lam()
        return -self.rot(b, c)

    def generator_list(self) -> list[int]:
        gens = [self.xi_id(b) for b in range(1, self.dim)]
        gens.extend(self.cvec_id(a) for a in range(2, self.dim))
        gens.extend(
            self.rot_id(a, b)
            for a in range(2, self.dim)
            for b in range(a + 1, self.dim)
        )
        gens.append(self.lam_id())
        gens.extend(self.lamv_id(b) for b in range(1, self.dim))
        gens.extend(self.fam.tower_ids())
        return gens


class _MinimalCosmologicalBasis(_FiberBasis):
    """Reduced-basis accessors at nonzero cosmological constant.

    The direction points along the scale index; the remaining block is
    the unit diagonal whose leading entry carries the sign of the
    constant, and the scale-scale metric entry stores the normalized
    constant itself.
    """

    def __init__(self, alg: GradedAlgebra, dim: int, order: int, cosmological: Fraction):
        if cosmological == 0:
            raise ModelError("this basis needs a nonzero cosmological constant")
        super().__init__(alg, dim, order, with_scale=False)
        self.lam_norm = Fraction(2 * cosmological, (dim - 1) * (dim - 2))
        self.eps = 1 if cosmological > 0 else -1

    def rot_id(self, a: int, b: int) -> int:
        return self.alg.generator("rho", (a, b), 1)

    def eta(self, a: int, b: int) -> Fraction:
        if a != b or a == 0:
            return Fraction(0)
        return Fraction(self.eps) if a == 1 else Fraction(-1)

    def g(self, b, c):
        if b == 0 and c == 0:
            return self.alg.scalar(-self.lam_norm)
        return self.alg.scalar(self.eta(b, c))

    def gi(self, b, c):
        if b == 0 and c == 0:
            return self.alg.scalar(Fraction(-1) / self.lam_norm)
        return self.alg.scalar(self.eta(b, c))

    def n(self, b):
        return self.alg.one() if b == 0 else self.alg.zero()

    def rho(self):
        return self.alg.zero()

    def xi(self, b):
        if b == 0:
            return self.alg.zero()
        return self.alg.of_gen(self.xi_id(b))

    def lamv(self, b):
        if b == 0:
            return self.alg.zero()
        return self.alg.of_gen(self.lamv_id(b))

    def rot(self, a: int, b: int) -> GradedExpression:
        if a == b:
            return self.alg.zero()
        if a < b:
            return self.alg.of_gen(self.rot_id(a, b))
        return -self.alg.of_gen(self.rot_id(b, a))

    def c(self, b, c):
        if b == 0 or c == 0:
            return -self.lam() if b == c else self.alg.zero()
        if b == c:
            return -self.lam()
        return self.rot(b, c) * self.eta(c, c)

    def generator_list(self) -> list[int]:
        gens = [self.xi_id(b) for b in range(1, self.dim)]
        gens.extend(
            self.rot_id(a, b)
            for a in range(1, self.dim)
            for b in range(a + 1, self.dim)
        )
        gens.append(self.lam_id())
        gens.extend(self.lamv_id(b) for b in range(1, self.dim))
        gens.extend(self.fam.tower_ids())
        return gens


def _minimal_constraints(fib: _FiberBasis) -> ConstraintSystem:
    residual = fib.curvature_direction_relations() + fib.trace_relations()
    return ConstraintSystem(fib.alg, None, residual, label="minimal ideal")


def build_minimal_flat(dim: int = 4, order: int = 1) -> ModelSpec:
    """Stored reduced boundary model at zero cosmological constant.

    The action table is the scripted-reduction output in closed form: the
    shared fiber formulas evaluated on the light-cone constants with the
    matrix ghost split into its rotation block and boundary vector.
    """
    alg = GradedAlgebra(label=f"minimal-flat d={dim}")
    fib = _MinimalFlatBasis(alg, dim, order)
    q = Derivation(alg, 1, label="Q")
    for b in range(1, dim):
        q.set_entry(fib.xi_id(b), fib.q_xi(b))
    for a in range(2, dim):
        q.set_entry(fib.cvec_id(a), fib.q_cmatrix(0, a))
    half = Fraction(1, 2)
    for a in range(2, dim):
        for b in range(a + 1, dim):
            q.set_entry(
                fib.rot_id(a, b),
                (fib.q_cmatrix(a, b) - fib.q_cmatrix(b, a)).scale(-half),
            )
    q.set_entry(fib.lam_id(), fib.q_lam())
    for b in range(1, dim):
        q.set_entry(fib.lamv_id(b), fib.q_lamv(b))
    return ModelSpec(
        name="minimal-flat",
        alg=alg,
        generators=fib.generator_list(),
        q=q,
        constraints=_minimal_constraints(fib),
        curvature=fib.fam,
        metadata={
            "dim": dim,
            "order": order,
            "cosmological": Fraction(0),
            "regime": "conditional",
            "split": {"scale": 0, "null": 1},
            "family_range": order,
            "fiber": fib,
            "sign_flag": "plain",
        },
    )


def build_minimal_cosmological(
    dim: int = 4, order: int = 1, epsilon: int = 1, cosmological: Fraction | None = None
) -> ModelSpec:
    """Stored reduced boundary model at nonzero cosmological constant.

    ``epsilon`` is the sign of the constant; by default the constant is
    normalized so the scale-scale metric entry is minus that sign.  The
    rotation block survives over the full non-scale range.
    """
    if epsilon not in (1, -1):
        raise ModelError("epsilon must be +1 or -1")
    if cosmological is None:
        cosmological = Fraction(epsilon * (dim - 1) * (dim - 2), 2)
    if (cosmological > 0) != (epsilon > 0) or cosmological == 0:
        raise ModelError("cosmological constant must be nonzero with sign epsilon")
    alg = GradedAlgebra(label=f"minimal-cosmological d={dim} eps={epsilon}")
    fib = _MinimalCosmologicalBasis(alg, dim, order, Fraction(cosmological))
    q = Derivation(alg, 1, label="Q")
    for b in range(1, dim):
        q.set_entry(fib.xi_id(b), fib.q_xi(b))
    half = Fraction(1, 2)
    for a in range(1, dim):
        for b in range(a + 1, dim):
            low_a = alg.zero()
            low_b = alg.zero()
            for cc in range(1, dim):
                low_a = low_a + fib.q_cmatrix(a, cc) * fib.eta(cc, b)
                low_b = low_b + fib.q_cmatrix(b, cc) * fib.eta(cc, a)
            q.set_entry(fib.rot_id(a, b), (low_a - low_b).scale(half))
    q.set_entry(fib.lam_id(), fib.q_lam())
    for b in range(1, dim):
        q.set_entry(fib.lamv_id(b), fib.q_lamv(b))
    return ModelSpec(
        name="minimal-ads" if epsilon > 0 else "minimal-ds",
        alg=alg,
        generators=fib.generator_list(),
        q=q,
        constraints=_minimal_constraints(fib),
        curvature=fib.fam,
        metadata={
            "dim": dim,
            "order": order,
            "cosmological": Fraction(cosmological),
            "regime": "conditional",
            "split": {"scale": 0},
            "family_range": order,
            "fiber": fib,
            "sign_flag": "plain",
            "epsilon": epsilon,
        },
    )


# -- sections and structure equations ---------------------------------------------


@dataclass
class SectionAnsatz:
    """A degree-respecting assignment of fiber coordinates over a base context.

    The context must live on the same algebra as the model so the
    assignment can be applied by substitution.  ``nondegenerate`` is the
    caller's assertion that the frame part of the assignment is
    invertible; consumers that need it refuse to run without it.
    """

    ctx: JetContext
    assignment: dict[int, GradedExpression]
    label: str = ""
    nondegenerate: bool = False

    def __post_init__(self):
        alg = self.ctx.alg
        for gid, val in self.assignment.items():
            g = val.grade()
            if g != "zero" and g != alg.ghost_of(gid):
                raise ModelError(
                    f"section value for {alg.display(gid)} has degree {g}"
                )

    def pullback(self, expr: GradedExpression) -> GradedExpression:
        return Substitution(self.ctx.alg, self.assignment, label="section")(expr)


def structure_equations(
    model: ModelSpec, section: SectionAnsatz
) -> list[tuple[int, GradedExpression]]:
    """Flatness expressions of a section: horizontal differential vs action.

    For each assigned generator with a declared action the returned
    expression is d(section value) minus the section image of the
    action entry; a genuine solution makes every expression vanish.
    """
    if section.ctx.alg is not model.alg:
        raise ModelError("section context must share the model algebra")
    out = []
    open_pred = model.q_open() or (lambda g: False)
    for gid in model.generators:
        if gid not in section.assignment or open_pred(gid):
            continue
        lhs = section.ctx.base_differential(section.assignment[gid])
        rhs = section.pullback(model.q.of(gid))
        out.append((gid, lhs - rhs))
    return out


# -- scripted reductions ---------------------------------------------------------


def _find_relation(model: ModelSpec, gid: int) -> int:
    """Index of a residual relation usable to solve for ``gid``."""
    from gpdekit.constraints import _linear_solve_for

    assert model.constraints is not None
    for i, rel in enumerate(model.constraints.residual):
        if gid not in rel.generators_present():
            continue
        try:
            _linear_solve_for(rel, gid)
        except ContractionError:
            continue
        return i
    raise ReplayError(f"no residual relation solves for {model.alg.display(gid)}")


def _pair(model, steps, label, partner, value, solve):
    try:
        model, st = eliminate_contractible_pair(model, partner, value, solve)
    except (ContractionError, AlgebraError) as exc:
        raise ReplayError(f"step {label!r}: {exc}") from exc
    st.detail = f"{label}: {st.detail}"
    steps.append(st)
    return model


def _relation(model, steps, label, solve):
    try:
        idx = _find_relation(model, solve)
        model, st = solve_relation_for(model, idx, solve)
    except (ContractionError, AlgebraError) as exc:
        raise ReplayError(f"step {label!r}: {exc}") from exc
    st.detail = f"{label}: {st.detail}"
    steps.append(st)
    return model


def _block(model, steps, label, triples):
    try:
        model, st = eliminate_contractible_block(model, triples)
    except (ContractionError, AlgebraError) as exc:
        raise ReplayError(f"step {label!r}: {exc}") from exc
    st.detail = f"{label}: {st.detail}"
    steps.append(st)
    return model


def _sweep_inverse_metric(model: ModelSpec, steps: list[ReductionStep]) -> ModelSpec:
    """Solve the inverse-metric components out of the pair relations.

    Valid once every metric component has been fixed to a constant: the
    pair relations are then linear with rational coefficients.  Consumed
    relations disappear; the remaining copies reduce to zero and are
    dropped by the constraint-system constructor.
    """
    alg = model.alg
    while True:
        targets = [
            gid for gid in model.generators if alg.gen(gid).name == "ginv"
        ]
        if not targets:
            return model
        assert model.constraints is not None
        hit = False
        for i, rel in enumerate(model.constraints.residual):
            present = rel.generators_present()
            for gid in targets:
                if gid not in present:
                    continue
                try:
                    model, st = solve_relation_for(model, i, gid)
                except (ContractionError, AlgebraError):
                    continue
                st.detail = f"inverse-metric sweep: {st.detail}"
                steps.append(st)
                hit = True
                break
            if hit:
                break
        if not hit:
            raise ReplayError(
                "inverse-metric sweep stalled with "
                + ", ".join(alg.display(g) for g in targets)
            )


def _script_flat(model: ModelSpec) -> tuple[ModelSpec, list[ReductionStep]]:
    """Reduce the scale-free fiber model at zero cosmological constant.

    Index conventions: 0 is the scale direction, 1 the null direction,
    2..dim-1 the transverse block.  The transverse metric lands on
    minus the identity and the matrix ghost splits into its symmetric
    part (eliminated) and the surviving rotation block.
    """
    if model.metadata.get("cosmological", Fraction(0)) != 0:
        raise ReplayError("the flat script needs a zero cosmological constant")
    alg = model.alg
    fib: _FiberBasis = model.metadata["fiber"]
    dim = fib.dim
    trans = range(2, dim)
    steps: list[ReductionStep] = []
    one = alg.one()
    zero = alg.zero()

    m = _pair(model, steps, "null normalization", fib.n_id(1), one, fib.c_id(1, 1))
    m = _pair(m, steps, "scale component of direction", fib.n_id(0), zero, fib.c_id(1, 0))
    for a in trans:
        m = _pair(m, steps, f"transverse direction {a}", fib.n_id(a), zero, fib.c_id(1, a))
    m = _relation(m, steps, "null norm", fib.g_id(1, 1))
    m = _pair(m, steps, "null-scale pairing", fib.g_id(0, 1), one, fib.c_id(0, 0))
    for a in trans:
        m = _pair(m, steps, f"null-transverse pairing {a}", fib.g_id(1, a), zero, fib.c_id(a, 0))
    m = _relation(m, steps, "scale ghost component", fib.xi_id(0))
    m = _pair(m, steps, "trace datum", fib.rho_id(), zero, fib.lamv_id(0))
    m = _pair(m, steps, "scale-scale metric", fib.g_id(0, 0), zero, fib.c_id(0, 1))
    for a in trans:
        m = _pair(m, steps, f"scale-transverse metric {a}", fib.g_id(0, a), zero, fib.c_id(a, 1))

    # Split the transverse matrix ghost into symmetric and rotation parts,
    # lowered with the transverse metric block (minus the identity).
    forward: dict[int, GradedExpression] = {}
    backward: dict[int, GradedExpression] = {}
    introduced: list[int] = []

    def sym_id(a: int, b: int) -> int:
        return alg.generator("csym", tuple(sorted((a, b))), 1)

    def rot_id(a: int, b: int) -> int:
        return alg.generator("rho", (a, b), 1)

    def rot_expr(a: int, b: int) -> GradedExpression:
        if a == b:
            return alg.zero()
        if a < b:
            return alg.of_gen(rot_id(a, b))
        return -alg.of_gen(rot_id(b, a))

    for a in trans:
        for b in trans:
            forward[fib.c_id(a, b)] = -(alg.of_gen(sym_id(a, b)) + rot_expr(a, b))
    half = Fraction(1, 2)
    for a in trans:
        for b in trans:
            if a <= b:
                backward[sym_id(a, b)] = (fib.c(a, b) + fib.c(b, a)).scale(-half)
                if a < b:
                    backward[rot_id(a, b)] = (fib.c(a, b) - fib.c(b, a)).scale(-half)
    for a in trans:
        for b in trans:
            if a <= b:
                introduced.append(sym_id(a, b))
                if a < b:
                    introduced.append(rot_id(a, b))
    cvec: dict[int, int] = {}
    for a in trans:
        gid = alg.generator("cA", (a,), 1)
        cvec[a] = gid
        forward[fib.c_id(0, a)] = alg.of_gen(gid)
        backward[gid] = fib.c(0, a)
        introduced.append(gid)
    try:
        m, st = redefine_generators(m, forward, backward, introduced)
    except (ContractionError, AlgebraError) as exc:
        raise ReplayError(f"step 'ghost split': {exc}") from exc
    steps.append(st)

    triples = [(fib.g_id(a, a), -one, sym_id(a, a)) for a in trans]
    triples += [
        (fib.g_id(a, b), zero, sym_id(a, b))
        for a in trans
        for b in trans
        if a < b
    ]
    m = _block(m, steps, "transverse metric block", triples)

    m = _sweep_inverse_metric(m, steps)
    meta = dict(m.metadata)
    meta["replay_steps"] = steps
    return dataclasses.replace(m, metadata=meta), steps


def _script_cosmological(model: ModelSpec) -> tuple[ModelSpec, list[ReductionStep]]:
    """Reduce the scale-free fiber model at nonzero cosmological constant.

    The direction is normalized along the scale index; the remaining
    block lands on the unit-signature diagonal with the leading entry
    carrying the sign of the cosmological constant.
    """
    lam_val: Fraction = model.metadata.get("cosmological", Fraction(0))
    if lam_val == 0:
        raise ReplayError("the cosmological script needs a nonzero constant")
    alg = model.alg
    fib: _FiberBasis = model.metadata["fiber"]
    dim = fib.dim
    trans = range(1, dim)
    eps = 1 if lam_val > 0 else -1
    lam_norm = Fraction(2 * lam_val, (dim - 1) * (dim - 2))
    steps: list[ReductionStep] = []
    one = alg.one()
    zero = alg.zero()

    def eta(a: int, b: int) -> Fraction:
        if a != b:
            return Fraction(0)
        return Fraction(eps) if a == 1 else Fraction(-1)

    m = _pair(model, steps, "scale normalization", fib.n_id(0), one, fib.c_id(0, 0))
    for a in trans:
        m = _pair(m, steps, f"transverse direction {a}", fib.n_id(a), zero, fib.c_id(0, a))
    m = _relation(m, steps, "scale norm", fib.g_id(0, 0))
    for a in trans:
        m = _pair(m, steps, f"scale-transverse metric {a}", fib.g_id(0, a), zero, fib.c_id(a, 0))
    m = _relation(m, steps, "scale ghost component", fib.xi_id(0))
    m = _pair(m, steps, "trace datum", fib.rho_id(), zero, fib.lamv_id(0))

    forward: dict[int, GradedExpression] = {}
    backward: dict[int, GradedExpression] = {}
    introduced: list[int] = []

    def sym_id(a: int, b: int) -> int:
        return alg.generator("csym", tuple(sorted((a, b))), 1)

    def rot_id(a: int, b: int) -> int:
        return alg.generator("rho", (a, b), 1)

    def rot_expr(a: int, b: int) -> GradedExpression:
        if a == b:
            return alg.zero()
        if a < b:
            return alg.of_gen(rot_id(a, b))
        return -alg.of_gen(rot_id(b, a))

    for a in trans:
        for b in trans:
            acc = alg.zero()
            for c in trans:
                if eta(c, b):
                    acc = acc + (alg.of_gen(sym_id(a, c)) + rot_expr(a, c)).scale(
                        Fraction(1) / eta(c, b)
                    )
            forward[fib.c_id(a, b)] = acc
    half = Fraction(1, 2)
    for a in trans:
        for b in trans:
            if a <= b:
                low_a = alg.zero()
                low_b = alg.zero()
                for c in trans:
                    low_a = low_a + fib.c(a, c) * eta(c, b)
                    low_b = low_b + fib.c(b, c) * eta(c, a)
                backward[sym_id(a, b)] = (low_a + low_b).scale(half)
                if a < b:
                    backward[rot_id(a, b)] = (low_a - low_b).scale(half)
    for a in trans:
        for b in trans:
            if a <= b:
                introduced.append(sym_id(a, b))
                if a < b:
                    introduced.append(rot_id(a, b))
    try:
        m, st = redefine_generators(m, forward, backward, introduced)
    except (ContractionError, AlgebraError) as exc:
        raise ReplayError(f"step 'ghost split': {exc}") from exc
    steps.append(st)

    triples = [
        (fib.g_id(a, a), alg.scalar(eta(a, a)), sym_id(a, a)) for a in trans
    ]
    triples += [
        (fib.g_id(a, b), zero, sym_id(a, b))
        for a in trans
        for b in trans
        if a < b
    ]
    m = _block(m, steps, "transverse metric block", triples)

    m = _sweep_inverse_metric(m, steps)
    meta = dict(m.metadata)
    meta["replay_steps"] = steps
    meta["epsilon"] = eps
    return dataclasses.replace(m, metadata=meta), steps


_SCRIPTS = {
    "flat": _script_flat,
    "cosmological": _script_cosmological,
}


def replay_reduction(model: ModelSpec, script) -> ModelSpec:
    """Run a named or explicit reduction script; empty scripts are identity."""
    if isinstance(script, str):
        fn = _SCRIPTS.get(script)
        if fn is None:
            raise ReplayError(f"unknown reduction script {script!r}")
        out, _steps = fn(model)
        return out
    steps: list[ReductionStep] = []
    m = model
    for i, action in enumerate(script):
        try:
            m, st = action(m)
        except (ContractionError, AlgebraError) as exc:
            raise ReplayError(f"script step {i}: {exc}") from exc
        steps.append(st)
    meta = dict(m.metadata)
    meta["replay_steps"] = steps
    return dataclasses.replace(m, metadata=meta)


# -- catalogue --------------------------------------------------------------------


def catalogue() -> dict[str, Callable[[], ModelSpec]]:
    """Name-keyed builders with their default parameters."""
    return {
        "offshell-gr": lambda: build_offshell_gr(4, 1),
        "conformal-like": lambda: build_conformal_like(4, 1, on_shell=False),
        "conformal-onshell": lambda: build_conformal_like(4, 2, on_shell=True),
        "preminimal": lambda: build_preminimal(4, 1),
        "boundary": lambda: build_boundary_gpde(4, 1),
        "minimal-flat": lambda: build_minimal_flat(4, 1),
        "minimal-ads": lambda: build_minimal_cosmological(4, 1, 1),
        "minimal-ds": lambda: build_minimal_cosmological(4, 1, -1),
    }


def build_model(name: str, **overrides) -> ModelSpec:
    """Build a catalogue model, optionally overriding builder defaults."""
    table = {
        "offshell-gr": build_offshell_gr,
        "conformal-like": lambda **kw: build_conformal_like(on_shell=False, **kw),
        "conformal-onshell": lambda **kw: build_conformal_like(
            on_shell=True, **{"order": 2, **kw}
        ),
        "preminimal": build_preminimal,
        "boundary": build_boundary_gpde,
        "minimal-flat": build_minimal_flat,
        "minimal-ads": lambda **kw: build_minimal_cosmological(epsilon=1, **kw),
        "minimal-ds": lambda **kw: build_minimal_cosmological(epsilon=-1, **kw),
    }
    if name not in table:
        raise ModelError(
            f"unknown model {name!r}; known: {', '.join(sorted(table))}"
        )
    return table[name](**overrides)


# -- comparison helper -----------------------------------------------------------


def translate_expression(
    expr: GradedExpression, target: GradedAlgebra, gidmap: dict[int, int]
) -> GradedExpression:
    """Rebuild an expression in another algebra along a generator map."""
    items = []
    for m, c in expr.terms.items():
        items.append((c, [gidmap[g] for g in m]))
    return target.from_terms(items)


def tables_match(m1: ModelSpec, m2: ModelSpec) -> list[str]:
    """Compare generator sets and action tables by display name.

    Returns a list of human-readable mismatches; empty means the models
    agree generator-for-generator and entry-for-entry.
    """
    out: list[str] = []
    d1 = {m1.alg.display(g): g for g in m1.generators}
    d2 = {m2.alg.display(g): g for g in m2.generators}
    only1 = sorted(set(d1) - set(d2))
    only2 = sorted(set(d2) - set(d1))
    if only1:
        out.append(f"only in {m1.name}: {', '.join(only1)}")
    if only2:
        out.append(f"only in {m2.name}: {', '.join(only2)}")
    if out:
        return out
    gidmap: dict[int, int] = {}
    for name, g1 in d1.items():
        g2 = d2[name]
        if m1.alg.ghost_of(g1) != m2.alg.ghost_of(g2):
            out.append(f"ghost degree differs on {name}")
        gidmap[g1] = g2
    if out:
        return out
    open1 = m1.q_open() or (lambda g: False)
    for name, g1 in sorted(d1.items()):
        g2 = d2[name]
        if open1(g1):
            continue
        e1 = m1.q.of(g1)
        for g in e1.generators_present():
            if g not in gidmap:
                gidmap[g] = d2.get(m1.alg.display(g), -1)
        if any(gidmap.get(g, -1) == -1 for g in e1.generators_present()):
            out.append(f"entry for {name} uses generators outside the shared set")
            continue
        moved = translate_expression(e1, m2.alg, gidmap)
        e2 = m2.q.of(g2)
        if moved != e2:
            out.append(f"action differs on {name}: {moved} vs {e2}")
    return out
