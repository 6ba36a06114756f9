"""Boundary conditions and asymptotic symmetries of the reduced models.

The minimal boundary theory, taken in its sign-flipped orientation,
supports a distinguished family of boundary conditions: kill the scale
ghost, lock the odd frame to a chosen base coframe, and close the family
under the vertical action.  A symmetry of the family is a degree -1
vertical field Y whose induced variation of any admissible section stays
tangent to the family; expanding that tangency condition constraint by
constraint produces the familiar asymptotic relations.  On the flat
defaults the relations integrate to scale parameters constant along the
null time, a null parameter linear in it, and transverse parameters
obeying the conformal Killing equation, which is the usual
supertranslation-plus-conformal picture.

The module mechanizes four pieces: relation extraction for an arbitrary
parameter ansatz, verification of the explicit solution family built
from polynomial conformal Killing vectors, the induced bracket on
solution data together with its Lie-algebra identification, and the
separation of genuine asymptotic symmetries from trivial pure-trace
shifts of the transverse section data.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

from .algebra import GradedAlgebra, GradedExpression, Substitution
from .constraints import ConstraintSystem, StagedReduction, q_invariance, solve_sparse
from .derivations import Derivation, contains_opaque, opaque_symbol
from .jets import JetContext
from .lie import LiePresentation, MatchVerdict, match_lie_algebra
from .models import ModelSpec


class BmsError(Exception):
    """Ill-posed boundary data or parameter ansatz."""


HALF = Fraction(1, 2)

K_SCALE = "scale-ghost"
K_NULL = "null-frame"
K_TRANS = "transverse-frame"
K_SCALE_CLOSURE = "scale-ghost-closure"
K_NULL_CLOSURE = "null-frame-closure"
K_TRANS_CLOSURE = "transverse-frame-closure"

# Section-data component fields, declared on the boundary jet context.
F_LAM = "lamc"  # transverse scale-covector components, symmetric pair
F_CCMP = "ccmp"  # transverse frame-momentum components, symmetric pair
F_UCMP = "ucmp"  # null-covector components, one base index
F_WCMP = "wcmp"  # curvature-tower components, keyed by generator id
F_ANGLE = "tang"  # angle-dependent supertranslation datum
F_UBAR = "ubar"  # free parameter along the trivial null-covector direction


@dataclass(frozen=True)
class Constraint:
    """One boundary condition: ``expression ~ 0`` on admissible sections."""

    label: str
    index: int | None
    expression: GradedExpression
    derived: bool = False

    @property
    def name(self) -> str:
        if self.index is None:
            return self.label
        return f"{self.label}[{self.index}]"


@dataclass(frozen=True)
class Relation:
    """A theta-direction component of the tangency condition."""

    constraint: str
    direction: int
    expression: GradedExpression
    open: bool = False

    @property
    def holds(self) -> bool:
        return not self.expression.terms

    def __str__(self) -> str:
        body = "0" if self.holds else str(self.expression)
        tag = " (open)" if self.open else ""
        return f"{self.constraint} @ th[{self.direction}]: {body} = 0{tag}"


def extended_action(model: ModelSpec, ctx: JetContext) -> Derivation:
    """The vertical action prolonged by the horizontal differential.

    Base coordinates map to their odd partners, odd partners to zero, and
    formal section data to its first jets, so the operator restricts to
    d_J on pulled-back functions while acting as Q along the fiber.
    """
    alg = model.alg
    out = Derivation(alg, 1, label="Q+d_J", ctx=ctx)
    for gid, entry in model.q.entries.items():
        out.set_entry(gid, entry)
    for hook in model.q.hooks:
        out.add_hook(hook)

    def jet_hook(gid: int) -> GradedExpression | None:
        gen = alg.gen(gid)
        if gen.name == "x":
            return alg.of_gen(ctx.theta_ids[gen.indices[0]])
        if gen.name == "th":
            return alg.zero()
        if gen.name.startswith("~") and gen.name[1:] in ctx.formal_fields:
            return ctx.base_differential(alg.of_gen(gid))
        return None

    out.add_hook(jet_hook)
    return out


def _drop_scale_monomials(alg: GradedAlgebra, expr: GradedExpression, lam_gid: int) -> GradedExpression:
    """Remove every monomial containing the scale ghost.

    The dropped part lies in the ideal generated by the scale constraint,
    so the closure conditions may be normalized this way without changing
    the constraint ideal.
    """
    kept = {m: c for m, c in expr.terms.items() if lam_gid not in m}
    return GradedExpression(alg, kept)


def _is_flat_minimal(model: ModelSpec) -> bool:
    split = model.metadata.get("split")
    return isinstance(split, dict) and "null" in split


def _is_cosmological_minimal(model: ModelSpec) -> bool:
    split = model.metadata.get("split")
    return isinstance(split, dict) and "null" not in split and "scale" in split


@dataclass
class BoundaryConditionSet:
    """Boundary conditions over a minimal model with a chosen base coframe.

    The constraint ideal is verified to be invariant under the extended
    action at construction; an inconclusive invariance reduction is
    treated as a construction error rather than a silent weakening.
    """

    model: ModelSpec
    ctx: JetContext
    frame: dict[int, GradedExpression]
    constraints: tuple[Constraint, ...]
    invariance: object
    frame_invertible: bool
    orientation: str

    def __post_init__(self) -> None:
        alg = self.model.alg
        qx = extended_action(self.model, self.ctx)
        is_open = self.model.q_open()

        def fallback(gid: int) -> GradedExpression:
            if is_open is not None and is_open(gid):
                return opaque_symbol(alg, gid, 1)
            raise BmsError(f"no action entry for {alg.display(gid)}")

        self.action = qx
        self.open_action = qx.with_fallback(fallback)

    @property
    def alg(self) -> GradedAlgebra:
        return self.model.alg

    @property
    def dim(self) -> int:
        return int(self.model.metadata["dim"])

    def primary(self) -> list[Constraint]:
        return [c for c in self.constraints if not c.derived]

    def constraint(self, name: str) -> Constraint:
        for c in self.constraints:
            if c.name == name or c.label == name:
                return c
        raise BmsError(f"no boundary condition named {name!r}")

    def reduction(self) -> StagedReduction:
        system = getattr(self, "_system", None)
        if system is None:
            base = ConstraintSystem(
                self.alg,
                residual=[c.expression for c in self.constraints],
                label="boundary conditions",
            )
            system = StagedReduction((base, self.model.constraints), label="boundary+model")
            self._system = system
        return system


def boundary_conditions(
    model: ModelSpec | None = None,
    dim: int = 4,
    order: int = 2,
    frame: Mapping[int, GradedExpression] | None = None,
    frame_invertible: bool | None = None,
) -> BoundaryConditionSet:
    """Assemble the boundary-condition ideal for a minimal model.

    With no model given, the flat minimal model at the requested
    dimension is built and flipped into the orientation in which the
    asymptotic analysis is usually written.  A custom coframe must come
    with an explicit invertibility declaration: the machinery never
    divides by frame components, but downstream solved forms assume the
    coframe spans the transverse directions.
    """
    from .models import build_minimal_flat, flipped

    if model is None:
        model = flipped(build_minimal_flat(dim, 1))
    fib = model.metadata.get("fiber")
    if fib is None:
        raise BmsError("boundary conditions require a minimal model with fiber metadata")
    d = int(model.metadata["dim"])
    alg = model.alg
    ctx = JetContext(alg, d - 1, order)
    qx = extended_action(model, ctx)
    orientation = str(model.metadata.get("sign_flag", "plain"))

    if frame is None:
        if _is_flat_minimal(model):
            frame_map = {a: ctx.theta(a - 1) for a in range(2, d)}
        else:
            frame_map = {a: ctx.theta(a - 1) for a in range(1, d)}
        if frame_invertible is None:
            frame_invertible = True
    else:
        frame_map = dict(frame)
        if frame_invertible is None:
            raise BmsError(
                "a custom coframe needs an explicit frame_invertible declaration"
            )
    for a, e in frame_map.items():
        if e.grade() not in (1, "zero"):
            raise BmsError(f"coframe entry {a} must carry ghost degree one")

    lam_gid = fib.lam_id()
    constraints: list[Constraint] = [
        Constraint(K_SCALE, None, alg.of_gen(lam_gid)),
        Constraint(K_SCALE_CLOSURE, None, _drop_scale_monomials(alg, qx(alg.of_gen(lam_gid)), lam_gid), derived=True),
    ]
    if _is_flat_minimal(model):
        null_expr = alg.of_gen(fib.xi_id(1)) - ctx.theta(0)
        constraints.append(Constraint(K_NULL, None, null_expr))
        constraints.append(
            Constraint(
                K_NULL_CLOSURE,
                None,
                _drop_scale_monomials(alg, qx(null_expr), lam_gid),
                derived=True,
            )
        )
    for a in sorted(frame_map):
        expr = alg.of_gen(fib.xi_id(a)) - frame_map[a]
        constraints.append(Constraint(K_TRANS, a, expr))
        constraints.append(
            Constraint(
                K_TRANS_CLOSURE,
                a,
                _drop_scale_monomials(alg, qx(expr), lam_gid),
                derived=True,
            )
        )

    # One-sided rewriting needs more than the bare generators: add the
    # frame-substituted image of every condition plus its products with
    # odd base coordinates, all inside the same ideal, so each reduction
    # path the invariance check takes can terminate at zero.
    frame_sub = Substitution(
        alg,
        {fib.xi_id(a): e for a, e in frame_map.items()}
        | ({fib.xi_id(1): ctx.theta(0)} if _is_flat_minimal(model) else {}),
        label="frame rules",
    )
    residual = [c.expression for c in constraints]
    thetas = [ctx.theta(mu) for mu in range(d - 1)]
    for c in constraints:
        sub = frame_sub(c.expression)
        for base_expr in (sub,):
            if base_expr.terms and base_expr not in residual:
                residual.append(base_expr)
            for i, t in enumerate(thetas):
                once = base_expr * t
                if once.terms:
                    residual.append(once)
                for t2 in thetas[i + 1 :]:
                    twice = once * t2
                    if twice.terms:
                        residual.append(twice)
    base = ConstraintSystem(alg, residual=residual, label="boundary conditions")
    system = StagedReduction((base, model.constraints), label="boundary+model")
    report = q_invariance(
        qx,
        system,
        relations=[c.expression for c in constraints],
        q_open=model.q_open(),
        label="boundary conditions",
    )
    if report.aggregate == "inconclusive":
        raise BmsError("boundary conditions are not visibly action-invariant")
    out = BoundaryConditionSet(
        model=model,
        ctx=ctx,
        frame=frame_map,
        constraints=tuple(constraints),
        invariance=report,
        frame_invertible=bool(frame_invertible),
        orientation=orientation,
    )
    out._system = system
    return out


@dataclass
class GaugeParameterAnsatz:
    """A degree -1 vertical field with formal-function coefficients.

    Entries map fiber generators to parameter expressions one ghost
    degree below; unlisted generators are annihilated.  Coefficients may
    reference jets of section-data components, which is what makes the
    ansatz a generalized vector field rather than a pointwise one.
    """

    boundary: BoundaryConditionSet
    entries: dict[int, GradedExpression]
    label: str = ""

    def __post_init__(self) -> None:
        alg = self.boundary.alg
        for gid, expr in self.entries.items():
            want = alg.ghost_of(gid) - 1
            got = expr.grade()
            if got != "zero" and got != want:
                raise BmsError(
                    f"parameter entry for {alg.display(gid)} has degree {got}, "
                    f"expected {want}"
                )
        self._derivation = self.as_derivation()

    def as_derivation(self) -> Derivation:
        alg = self.boundary.alg
        y = Derivation(
            alg,
            -1,
            label=self.label or "Y",
            ctx=self.boundary.ctx,
            fallback=lambda gid: alg.zero(),
        )
        for gid, expr in self.entries.items():
            y.set_entry(gid, expr)
        return y

    def __call__(self, expr: GradedExpression) -> GradedExpression:
        return self._derivation(expr)


def generic_parameter(boundary: BoundaryConditionSet) -> GaugeParameterAnsatz:
    """The fully undetermined ansatz: one formal function per entry.

    Used to extract the raw relation set before any solving; every
    declared degree-one fiber generator gets an independent coefficient
    depending on all base coordinates.
    """
    ctx = boundary.ctx
    alg = boundary.alg
    entries: dict[int, GradedExpression] = {}
    for gid in boundary.model.declared_generators():
        if alg.ghost_of(gid) != 1:
            continue
        gen = alg.gen(gid)
        ctx.declare_formal(f"gp_{gen.name}", nindices=len(gen.indices))
        entries[gid] = ctx.formal(f"gp_{gen.name}", gen.indices)
    return GaugeParameterAnsatz(boundary, entries, label="generic")


def flat_section_facts(boundary: BoundaryConditionSet) -> Substitution:
    """Pullback data of an admissible section over the flat coframe.

    The degree-one generators pull back to their constrained values; the
    unconstrained covector directions pull back to symmetric component
    matrices, which is exactly the consequence of the closure conditions
    holding on the section.  Curvature-tower generators become opaque
    component functions keyed by generator id.
    """
    model = boundary.model
    if not _is_flat_minimal(model):
        raise BmsError("flat section facts require the flat minimal model")
    fib = model.metadata["fiber"]
    ctx = boundary.ctx
    alg = boundary.alg
    d = boundary.dim
    ctx.declare_formal(F_LAM, nindices=2)
    ctx.declare_formal(F_CCMP, nindices=2)
    ctx.declare_formal(F_UCMP, nindices=1)
    ctx.declare_formal(F_WCMP, nindices=1)

    def sym(name: str, a: int, b: int) -> GradedExpression:
        return ctx.formal(name, tuple(sorted((a, b))))

    mapping: dict[int, GradedExpression] = {
        fib.lam_id(): alg.zero(),
        fib.xi_id(1): ctx.theta(0),
    }
    for a in range(2, d):
        mapping[fib.xi_id(a)] = boundary.frame[a]
        lam_val = alg.zero()
        c_val = alg.zero()
        for b in range(2, d):
            lam_val = lam_val + sym(F_LAM, a, b) * boundary.frame[b]
            c_val = c_val + sym(F_CCMP, a, b) * boundary.frame[b]
        mapping[fib.lamv_id(a)] = lam_val
        mapping[fib.cvec_id(a)] = c_val
    u_val = alg.zero()
    for mu in range(d - 1):
        u_val = u_val + ctx.formal(F_UCMP, (mu,)) * ctx.theta(mu)
    mapping[fib.lamv_id(1)] = u_val
    for a, b in itertools.combinations(range(2, d), 2):
        mapping[fib.rot_id(a, b)] = alg.zero()
    for gid in model.curvature.tower_ids():
        mapping[gid] = ctx.formal(F_WCMP, (gid,))
    return Substitution(alg, mapping, label="flat section data")


def theta_components(ctx: JetContext, expr: GradedExpression) -> dict[int, GradedExpression]:
    """Split an expression linear in the odd base coordinates.

    Returns the coefficient of each theta direction with the Koszul sign
    of moving that factor to the front.  A monomial with no theta factor,
    more than one, or a repeated one is an error: the tangency residuals
    this feeds on are theta-linear whenever the section facts cover every
    fiber generator the action produced.
    """
    alg = ctx.alg
    out_terms: dict[int, dict[tuple[int, ...], Fraction]] = {}
    for mono, coeff in expr.terms.items():
        hits = [i for i, g in enumerate(mono) if alg.gen(g).name == "th"]
        if len(hits) != 1:
            raise BmsError(
                "residual is not linear in the odd base coordinates: "
                f"offending monomial {[alg.display(g) for g in mono]}"
            )
        pos = hits[0]
        mu = alg.gen(mono[pos]).indices[0]
        sign = 1
        for g in mono[:pos]:
            if alg.parity_of(g):
                sign = -sign
        rest = mono[:pos] + mono[pos + 1 :]
        bucket = out_terms.setdefault(mu, {})
        bucket[rest] = bucket.get(rest, Fraction(0)) + sign * coeff
    out: dict[int, GradedExpression] = {}
    for mu, terms in out_terms.items():
        clean = {m: c for m, c in terms.items() if c}
        out[mu] = GradedExpression(alg, clean)
    return out


def pullback_variation(
    boundary: BoundaryConditionSet,
    parameter: GaugeParameterAnsatz,
    facts: Substitution,
    expr: GradedExpression,
    *,
    open_action: bool = False,
) -> GradedExpression:
    """Induced variation of the pulled-back expression under the parameter.

    This is the base differential of the pulled-back parameter action
    plus the pullback of the parameter acting on the vertical image; a
    section family generated by the parameter stays admissible exactly
    when this vanishes on every constraint.
    """
    ctx = boundary.ctx
    y = parameter
    action = boundary.open_action if open_action else boundary.action
    return ctx.base_differential(facts(y(expr))) + facts(y(action(expr)))


def verify_cond_asym(
    boundary: BoundaryConditionSet,
    parameter: GaugeParameterAnsatz,
    facts: Substitution,
    include_derived: bool = False,
) -> list[Relation]:
    """Expand the tangency condition into theta-direction relations.

    Every primary constraint contributes one relation per base direction;
    closure constraints are included on request and may carry opaque
    curvature actions, in which case the relation is marked open.  The
    output is independent of the order in which constraints are handled:
    each relation depends on its own constraint only.
    """
    alg = boundary.alg
    out: list[Relation] = []
    for c in boundary.constraints:
        if c.derived and not include_derived:
            continue
        resid = pullback_variation(
            boundary, parameter, facts, c.expression, open_action=c.derived
        )
        comps = theta_components(boundary.ctx, resid)
        for mu in range(boundary.dim - 1):
            coeff = comps.get(mu, alg.zero())
            out.append(
                Relation(c.name, mu, coeff, open=contains_opaque(alg, coeff))
            )
    return out


# -- conformal Killing data --------------------------------------------------


def conformal_killing_catalogue(
    ctx: JetContext, dim: int
) -> list[tuple[str, tuple[GradedExpression, ...]]]:
    """Polynomial conformal Killing vectors of the flat transverse space.

    Components are indexed by the transverse base directions 1..dim-2 and
    depend on those coordinates only.  For three transverse dimensions
    this is the ten-generator family: translations, rotations, the
    dilation, and the special conformal generators.
    """
    n = dim - 2
    if n < 2:
        raise BmsError("the transverse catalogue needs at least two directions")
    ys = [ctx.x(a) for a in range(1, n + 1)]
    zero = ctx.alg.zero()
    out: list[tuple[str, tuple[GradedExpression, ...]]] = []
    for a in range(n):
        comps = [zero] * n
        comps[a] = ctx.alg.one()
        out.append((f"translation[{a + 1}]", tuple(comps)))
    for a, b in itertools.combinations(range(n), 2):
        comps = [zero] * n
        comps[a] = ys[b]
        comps[b] = -ys[a]
        out.append((f"rotation[{a + 1},{b + 1}]", tuple(comps)))
    out.append(("dilation", tuple(ys)))
    ysq = zero
    for y in ys:
        ysq = ysq + y * y
    for a in range(n):
        comps = [Fraction(2) * ys[c] * ys[a] for c in range(n)]
        comps[a] = comps[a] - ysq
        out.append((f"special[{a + 1}]", tuple(comps)))
    return out


def divergence_scale(ctx: JetContext, eps: Sequence[GradedExpression]) -> GradedExpression:
    """The scale datum fixed by the trace of the conformal Killing equation."""
    n = len(eps)
    total = ctx.alg.zero()
    for i, comp in enumerate(eps):
        total = total + ctx.total_derivative(comp, i + 1)
    return Fraction(1, n) * total


def conformal_killing_residual(
    ctx: JetContext, eps: Sequence[GradedExpression]
) -> dict[tuple[int, int], GradedExpression]:
    """Residuals of the conformal Killing equation on flat transverse space.

    Zero everywhere exactly when the components define a conformal
    Killing vector for the flat metric with scale fixed by the trace.
    """
    n = len(eps)
    lam = divergence_scale(ctx, eps)
    out: dict[tuple[int, int], GradedExpression] = {}
    for i in range(n):
        for j in range(i, n):
            r = HALF * (
                ctx.total_derivative(eps[i], j + 1)
                + ctx.total_derivative(eps[j], i + 1)
            )
            if i == j:
                r = r - lam
            out[(i + 1, j + 1)] = r
    return out


@dataclass
class BmsData:
    """Solution data: transverse components, angle datum, induced scale."""

    ctx: JetContext
    dim: int
    eps: tuple[GradedExpression, ...]
    t_angle: GradedExpression
    label: str = ""
    lambar: GradedExpression = field(init=False)

    def __post_init__(self) -> None:
        if len(self.eps) != self.dim - 2:
            raise BmsError("transverse component count must match the dimension")
        for comp in self.eps:
            if comp.terms and comp.grade() != 0:
                raise BmsError("transverse components must have ghost degree zero")
            if self.ctx.total_derivative(comp, 0).terms:
                raise BmsError("transverse components must not depend on the null time")
        if self.t_angle.terms and self.t_angle.grade() != 0:
            raise BmsError("the angle datum must have ghost degree zero")
        if self.ctx.total_derivative(self.t_angle, 0).terms:
            raise BmsError("the angle datum must not depend on the null time")
        self.lambar = divergence_scale(self.ctx, self.eps)

    @property
    def null_component(self) -> GradedExpression:
        """The null-direction component u*scale + angle datum."""
        return self.ctx.x(0) * self.lambar + self.t_angle

    def is_supertranslation(self) -> bool:
        return not any(c.terms for c in self.eps)

    def conformal_killing_defects(self) -> dict[tuple[int, int], GradedExpression]:
        return {
            k: v
            for k, v in conformal_killing_residual(self.ctx, self.eps).items()
            if v.terms
        }


def supertranslation(
    ctx: JetContext, dim: int, t_angle: GradedExpression | None = None, label: str = ""
) -> BmsData:
    if t_angle is None:
        ctx.declare_formal(F_ANGLE, nindices=0, killed=(0,))
        t_angle = ctx.formal(F_ANGLE)
        label = label or "supertranslation[formal]"
    zero = ctx.alg.zero()
    return BmsData(ctx, dim, tuple([zero] * (dim - 2)), t_angle, label=label)


def catalogue_data(
    boundary_or_ctx, dim: int | None = None, with_formal_angle: bool = True
) -> list[BmsData]:
    """The explicit generator family as solution data objects."""
    if isinstance(boundary_or_ctx, BoundaryConditionSet):
        ctx = boundary_or_ctx.ctx
        dim = boundary_or_ctx.dim
    else:
        ctx = boundary_or_ctx
        if dim is None:
            raise BmsError("catalogue_data needs the model dimension")
    zero = ctx.alg.zero()
    t_angle = zero
    if with_formal_angle:
        ctx.declare_formal(F_ANGLE, nindices=0, killed=(0,))
        t_angle = ctx.formal(F_ANGLE)
    return [
        BmsData(ctx, dim, eps, t_angle, label=label)
        for label, eps in conformal_killing_catalogue(ctx, dim)
    ]


def bms_vector(
    boundary: BoundaryConditionSet,
    datum: BmsData,
    facts: Substitution | None = None,
) -> GaugeParameterAnsatz:
    """The solved parameter ansatz generated by one solution datum.

    The primary entries are the solution family itself; the covector and
    rotation entries are the solved forms the relation extraction forces,
    written with the section-data components of the flat facts.  Only the
    flipped orientation is supported: the solved signs are stated in that
    convention.
    """
    model = boundary.model
    if boundary.orientation != "flipped":
        raise BmsError(
            "the solved parameter family is stated in the flipped orientation; "
            "flip the model first"
        )
    if not _is_flat_minimal(model):
        raise BmsError("the solved parameter family requires the flat minimal model")
    if facts is None:
        facts = flat_section_facts(boundary)
    fib = model.metadata["fiber"]
    ctx = boundary.ctx
    alg = boundary.alg
    d = boundary.dim
    ctx.declare_formal(F_UBAR, nindices=0)

    def sym(name: str, a: int, b: int) -> GradedExpression:
        return ctx.formal(name, tuple(sorted((a, b))))

    def eps_fiber(a: int) -> GradedExpression:
        return datum.eps[a - 2]

    entries: dict[int, GradedExpression] = {
        fib.xi_id(1): datum.null_component,
        fib.lam_id(): datum.lambar,
        fib.lamv_id(1): ctx.formal(F_UBAR),
    }
    for a in range(2, d):
        entries[fib.xi_id(a)] = eps_fiber(a)
        lam_val = ctx.total_derivative(datum.lambar, a - 1)
        c_val = -ctx.total_derivative(datum.null_component, a - 1)
        for b in range(2, d):
            lam_val = lam_val + eps_fiber(b) * sym(F_LAM, b, a)
            c_val = c_val + eps_fiber(b) * sym(F_CCMP, b, a)
        entries[fib.lamv_id(a)] = lam_val
        entries[fib.cvec_id(a)] = c_val
    for a, b in itertools.combinations(range(2, d), 2):
        entries[fib.rot_id(a, b)] = HALF * (
            ctx.total_derivative(eps_fiber(b), a - 1)
            - ctx.total_derivative(eps_fiber(a), b - 1)
        )
    return GaugeParameterAnsatz(boundary, entries, label=datum.label or "bms")


# -- verification ------------------------------------------------------------


@dataclass
class BmsItem:
    """Verification record for one solution datum."""

    label: str
    relations: list[Relation]
    d_squared_ok: bool
    scale_terms_ok: bool

    @property
    def failures(self) -> list[Relation]:
        return [r for r in self.relations if not r.holds]

    @property
    def passed(self) -> bool:
        return not self.failures and self.d_squared_ok and self.scale_terms_ok


@dataclass
class BmsVerdict:
    """Aggregate verdict for the asymptotic-symmetry verification."""

    dim: int
    orientation: str
    items: list[BmsItem]
    invariance_aggregate: str
    nilpotency_aggregate: str

    @property
    def derived_consequences_ok(self) -> bool:
        return (
            all(it.d_squared_ok and it.scale_terms_ok for it in self.items)
            and self.invariance_aggregate in ("pass", "conditional")
            and self.nilpotency_aggregate in ("pass", "conditional")
        )

    @property
    def passed(self) -> bool:
        return all(it.passed for it in self.items) and self.derived_consequences_ok

    def failures(self) -> list[tuple[str, Relation]]:
        return [(it.label, r) for it in self.items for r in it.failures]

    def __str__(self) -> str:
        lines = [
            f"asymptotic verification at dim={self.dim} ({self.orientation} orientation)"
        ]
        for it in self.items:
            status = "pass" if it.passed else "FAIL"
            lines.append(
                f"  {it.label}: {status} "
                f"({len(it.relations)} relations, {len(it.failures)} violated)"
            )
        lines.append(
            "  derived consequences: "
            + ("pass" if self.derived_consequences_ok else "FAIL")
            + f" (invariance {self.invariance_aggregate}, "
            + f"nilpotency {self.nilpotency_aggregate})"
        )
        lines.append("verdict: " + ("pass" if self.passed else "FAIL"))
        return "\n".join(lines)


def _derived_consequence_item(
    boundary: BoundaryConditionSet,
    parameter: GaugeParameterAnsatz,
    facts: Substitution,
) -> tuple[bool, bool]:
    """Mechanical half of the closure-conditions-are-automatic argument.

    The closure conditions differ from the action applied to the primary
    ones by scale-proportional terms.  Their tangency residual therefore
    splits into the base differential of the primary residuals, a double
    base differential, scale-term residuals, and the pulled-back square
    of the action.  The first piece vanishes with the primary relations;
    the second and third are checked here exactly; the last is the
    model's nilpotency on the quotient, reported separately.
    """
    ctx = boundary.ctx
    alg = boundary.alg
    fib = boundary.model.metadata["fiber"]
    d = boundary.dim
    y = parameter
    d_sq_ok = True
    for c in boundary.primary():
        pulled = facts(y(c.expression))
        if ctx.base_differential(ctx.base_differential(pulled)).terms:
            d_sq_ok = False
    scale_ok = True
    lam = alg.of_gen(fib.lam_id())
    partners = [alg.of_gen(fib.xi_id(1))]
    partners += [alg.of_gen(fib.xi_id(a)) for a in range(2, d)]
    for h in partners:
        resid = pullback_variation(boundary, parameter, facts, lam * h)
        if resid.terms:
            scale_ok = False
    return d_sq_ok, scale_ok


def verify_bms_ansatz(
    dim: int = 5,
    data: BmsData | Iterable[BmsData] | None = None,
    boundary: BoundaryConditionSet | None = None,
) -> BmsVerdict:
    """Verify the solution family against every tangency relation.

    With no data given, the whole polynomial generator catalogue plus a
    formal-angle supertranslation is swept.  Each datum is turned into
    its solved parameter ansatz, every primary relation is required to
    vanish identically, and the derived-consequence argument for the
    closure conditions is checked mechanically: double base differential,
    scale-term residuals, action-invariance of the ideal, and nilpotency
    of the action on the quotient.
    """
    if boundary is None:
        boundary = boundary_conditions(dim=dim)
    dim = boundary.dim
    facts = flat_section_facts(boundary)
    if data is None:
        sweep = catalogue_data(boundary)
        sweep.append(supertranslation(boundary.ctx, dim))
    elif isinstance(data, BmsData):
        sweep = [data]
    else:
        sweep = list(data)

    items: list[BmsItem] = []
    for datum in sweep:
        param = bms_vector(boundary, datum, facts)
        relations = verify_cond_asym(boundary, param, facts)
        d_sq_ok, scale_ok = _derived_consequence_item(boundary, param, facts)
        items.append(
            BmsItem(
                label=datum.label or "datum",
                relations=relations,
                d_squared_ok=d_sq_ok,
                scale_terms_ok=scale_ok,
            )
        )
    fib = boundary.model.metadata["fiber"]
    gens = [fib.lam_id(), fib.xi_id(1)] + [fib.xi_id(a) for a in range(2, dim)]
    nil = boundary.model.nilpotency(generators=gens, completed=True)
    return BmsVerdict(
        dim=dim,
        orientation=boundary.orientation,
        items=items,
        invariance_aggregate=boundary.invariance.aggregate,
        nilpotency_aggregate=nil.aggregate,
    )


# -- bracket -----------------------------------------------------------------


def _require_bms(datum: BmsData, facts: Substitution | None = None) -> None:
    defects = conformal_killing_residual(datum.ctx, datum.eps)
    for key, resid in defects.items():
        if facts is not None:
            resid = facts(resid)
        if resid.terms:
            raise BmsError(
                f"input transverse components violate the conformal Killing "
                f"equation at {key}"
            )


def bms_bracket(
    a: BmsData, b: BmsData, facts: Substitution | None = None
) -> BmsData:
    """Lie bracket of two solution data, again in solution form.

    This is the commutator of the corresponding boundary vector fields:
    the transverse part is the ordinary bracket of the transverse
    components, and the angle part collects the transport of each angle
    datum plus its scale-weighted shift.  Inputs must satisfy the
    conformal Killing equation, either identically for polynomial data or
    after applying the supplied facts for formal data; the output's scale
    datum is recomputed from its own trace, which certifies the result is
    again of solution form.
    """
    if a.ctx is not b.ctx or a.dim != b.dim:
        raise BmsError("bracket inputs must live on the same boundary context")
    ctx = a.ctx
    _require_bms(a, facts)
    _require_bms(b, facts)
    n = a.dim - 2
    eps12 = []
    for i in range(n):
        total = ctx.alg.zero()
        for j in range(n):
            total = total + a.eps[j] * ctx.total_derivative(b.eps[i], j + 1)
            total = total - b.eps[j] * ctx.total_derivative(a.eps[i], j + 1)
        eps12.append(total)
    t12 = ctx.alg.zero()
    for j in range(n):
        t12 = t12 + a.eps[j] * ctx.total_derivative(b.t_angle, j + 1)
        t12 = t12 - b.eps[j] * ctx.total_derivative(a.t_angle, j + 1)
    t12 = t12 + a.t_angle * b.lambar - b.t_angle * a.lambar
    label = f"[{a.label or 'a'}, {b.label or 'b'}]"
    out = BmsData(a.ctx, a.dim, tuple(eps12), t12, label=label)
    # The scale datum of a commutator of conformal vector fields is the
    # transport of the scales; cross-check it against the recomputed trace.
    expect = ctx.alg.zero()
    for j in range(n):
        expect = expect + a.eps[j] * ctx.total_derivative(b.lambar, j + 1)
        expect = expect - b.eps[j] * ctx.total_derivative(a.lambar, j + 1)
    mismatch = out.lambar - expect
    if facts is not None:
        mismatch = facts(mismatch)
    if mismatch.terms:
        raise BmsError("bracket scale datum does not match the transported scales")
    return out


def conformal_killing_facts(
    ctx: JetContext,
    dim: int,
    eps_name: str,
    *,
    scale_name: str | None = None,
    depth: int = 2,
) -> Substitution:
    """Rewrite rules for a formal conformal Killing vector.

    Declares component fields and maps their first jets to antisymmetric
    spin components plus the trace scale, and their second jets to the
    flat-space prolongation formula in terms of scale jets.  Applying the
    returned substitution to any expression enforces the conformal
    Killing equation and its first prolongation on the named field.
    """
    n = dim - 2
    scale_name = scale_name or eps_name + "_scale"
    spin_name = eps_name + "_spin"
    ctx.declare_formal(eps_name, nindices=1, killed=(0,))
    ctx.declare_formal(scale_name, nindices=0, killed=(0,))
    ctx.declare_formal(spin_name, nindices=2, killed=(0,))
    alg = ctx.alg

    def spin(i: int, j: int) -> GradedExpression:
        if i == j:
            return alg.zero()
        if i < j:
            return ctx.formal(spin_name, (i, j))
        return -ctx.formal(spin_name, (j, i))

    def delta(i: int, j: int) -> Fraction:
        return Fraction(1 if i == j else 0)

    mapping: dict[int, GradedExpression] = {}
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            gid = ctx.formal_id(eps_name, (i,), (j,))
            mapping[gid] = spin(i, j) + delta(i, j) * ctx.formal(scale_name)
    if depth >= 2:
        for i in range(1, n + 1):
            for j in range(1, n + 1):
                for k in range(j, n + 1):
                    gid = ctx.formal_id(eps_name, (i,), (j, k))
                    val = (
                        delta(i, j) * ctx.formal(scale_name, (), (k,))
                        + delta(i, k) * ctx.formal(scale_name, (), (j,))
                        - delta(j, k) * ctx.formal(scale_name, (), (i,))
                    )
                    mapping[gid] = val
    return Substitution(ctx.alg, mapping, label=f"conformal Killing facts for {eps_name}")


def formal_ckv_data(ctx: JetContext, dim: int, eps_name: str) -> tuple[BmsData, Substitution]:
    """A formal conformal Killing datum plus the facts that certify it."""
    facts = conformal_killing_facts(ctx, dim, eps_name)
    n = dim - 2
    eps = tuple(ctx.formal(eps_name, (i,)) for i in range(1, n + 1))
    zero = ctx.alg.zero()
    return BmsData(ctx, dim, eps, zero, label=f"formal[{eps_name}]"), facts


def chain_facts(*facts: Callable[[GradedExpression], GradedExpression]):
    """Compose several fact substitutions into one rewrite pass."""

    def apply(expr: GradedExpression) -> GradedExpression:
        for f in facts:
            expr = f(expr)
        return expr

    return apply


def _data_sum(items: Sequence[BmsData]) -> tuple[tuple[GradedExpression, ...], GradedExpression]:
    ctx = items[0].ctx
    n = items[0].dim - 2
    eps = [ctx.alg.zero() for _ in range(n)]
    t = ctx.alg.zero()
    for it in items:
        for i in range(n):
            eps[i] = eps[i] + it.eps[i]
        t = t + it.t_angle
    return tuple(eps), t


def bms_jacobi_defects(
    data: Sequence[BmsData], limit: int | None = None
) -> list[tuple[str, str, str]]:
    """Cyclic bracket defects over all triples of the given data."""
    out: list[tuple[str, str, str]] = []
    for x, y, z in itertools.combinations(data, 3):
        cyc = [
            bms_bracket(x, bms_bracket(y, z)),
            bms_bracket(y, bms_bracket(z, x)),
            bms_bracket(z, bms_bracket(x, y)),
        ]
        eps, t = _data_sum(cyc)
        if any(c.terms for c in eps) or t.terms:
            out.append((x.label, y.label, z.label))
            if limit is not None and len(out) >= limit:
                return out
    return out


def angle_polynomial_basis(ctx: JetContext, dim: int, degree: int = 2) -> list[BmsData]:
    """Supertranslation data with polynomial angle functions up to a degree."""
    n = dim - 2
    ys = [ctx.x(a) for a in range(1, n + 1)]
    zero = ctx.alg.zero()
    polys: list[tuple[str, GradedExpression]] = [("1", ctx.alg.one())]
    if degree >= 1:
        for i, y in enumerate(ys):
            polys.append((f"y{i + 1}", y))
    if degree >= 2:
        for i, j in itertools.combinations_with_replacement(range(n), 2):
            polys.append((f"y{i + 1}y{j + 1}", ys[i] * ys[j]))
    return [
        BmsData(ctx, dim, tuple([zero] * n), poly, label=f"supertranslation[{name}]")
        for name, poly in polys
    ]


def _x_monomial_coefficients(
    ctx: JetContext, expr: GradedExpression
) -> dict[tuple[int, ...], Fraction]:
    alg = ctx.alg
    out: dict[tuple[int, ...], Fraction] = {}
    for mono, coeff in expr.terms.items():
        for g in mono:
            if alg.gen(g).name != "x":
                raise BmsError("expected a polynomial in the base coordinates")
        out[mono] = coeff
    return out


def ckv_presentation(ctx: JetContext, dim: int) -> LiePresentation:
    """Structure constants of the polynomial generator family.

    Brackets of catalogue generators are expanded back in the catalogue
    basis by exact linear solve on monomial coefficients.  The keys are
    chosen so the generic matcher can compare directly against the
    orthogonal oracle one dimension up: translations play the null-plus
    translations, special generators the null-minus ones, rotations the
    transverse rotations, and the dilation the null boost.
    """
    n = dim - 2
    catalogue = conformal_killing_catalogue(ctx, dim)
    labels = [label for label, _ in catalogue]
    keys: list[tuple[str, tuple[int, ...]]] = []
    for label, _ in catalogue:
        if label.startswith("translation"):
            keys.append(("xi", (int(label.split("[")[1].rstrip("]")),)))
        elif label.startswith("rotation"):
            i, j = label.split("[")[1].rstrip("]").split(",")
            keys.append(("rho", (int(i), int(j))))
        elif label == "dilation":
            keys.append(("lam", ()))
        else:
            keys.append(("lamv", (int(label.split("[")[1].rstrip("]")),)))

    # Column profile of each basis element over (component, monomial).
    columns: list[dict[tuple[int, tuple[int, ...]], Fraction]] = []
    for _, eps in catalogue:
        col: dict[tuple[int, tuple[int, ...]], Fraction] = {}
        for i, comp in enumerate(eps):
            for mono, coeff in _x_monomial_coefficients(ctx, comp).items():
                col[(i, mono)] = coeff
        columns.append(col)

    def expand(eps: Sequence[GradedExpression]) -> dict[int, Fraction]:
        rows: dict[tuple[int, tuple[int, ...]], dict[int, Fraction]] = {}
        rhs: dict[tuple[int, tuple[int, ...]], Fraction] = {}
        for k, col in enumerate(columns):
            for key, coeff in col.items():
                rows.setdefault(key, {})[k] = coeff
        for i, comp in enumerate(eps):
            for mono, coeff in _x_monomial_coefficients(ctx, comp).items():
                rhs[(i, mono)] = coeff
                rows.setdefault((i, mono), {})
        equations = [(row, rhs.get(key, Fraction(0))) for key, row in rows.items()]
        result = solve_sparse(equations)
        if any(result.forced):
            raise BmsError("bracket left the polynomial generator span")
        assignment = result.particular_solution()
        out = {
            k: assignment.get(k, Fraction(0))
            for k in range(len(columns))
            if assignment.get(k)
        }
        # Exact back-substitution: the expansion must reproduce the input.
        for key, row in rows.items():
            total = sum((out.get(k, Fraction(0)) * c for k, c in row.items()), Fraction(0))
            if total != rhs.get(key, Fraction(0)):
                raise BmsError("bracket expansion failed verification")
        return out

    zero = ctx.alg.zero()
    data = [BmsData(ctx, dim, eps, zero, label=label) for label, eps in catalogue]
    brackets: dict[tuple[int, int], dict[int, Fraction]] = {}
    for j, k in itertools.combinations(range(len(data)), 2):
        out = bms_bracket(data[j], data[k])
        coeffs = expand(out.eps)
        if coeffs:
            brackets[(j, k)] = coeffs
    return LiePresentation(labels=labels, keys=keys, brackets=brackets, convention="direct")


def match_ckv_algebra(ctx: JetContext, dim: int) -> MatchVerdict:
    """Identify the polynomial generator family with the orthogonal oracle."""
    pres = ckv_presentation(ctx, dim)
    return match_lie_algebra(pres, f"o({dim - 1},1)")


# -- triviality --------------------------------------------------------------


@dataclass
class SectionVariation:
    """Variation of the transverse covector data under a parameter."""

    matrix: dict[tuple[int, int], GradedExpression]
    null_parts: dict[int, GradedExpression]
    trace: GradedExpression
    trace_free: dict[tuple[int, int], GradedExpression]

    @property
    def pure_trace(self) -> bool:
        return not any(v.terms for v in self.trace_free.values()) and not any(
            v.terms for v in self.null_parts.values()
        )

    @property
    def trace_free_nonzero(self) -> bool:
        return any(v.terms for v in self.trace_free.values())


def covector_variation(
    boundary: BoundaryConditionSet,
    parameter: GaugeParameterAnsatz,
    facts: Substitution | None = None,
) -> SectionVariation:
    """Induced variation of the pulled-back transverse covector components.

    The variation of each covector pullback is theta-linear; its matrix
    of transverse components is split into trace and trace-free parts,
    with the null-direction components reported separately.
    """
    model = boundary.model
    fib = model.metadata["fiber"]
    ctx = boundary.ctx
    alg = boundary.alg
    d = boundary.dim
    if facts is None:
        facts = flat_section_facts(boundary)
    matrix: dict[tuple[int, int], GradedExpression] = {}
    null_parts: dict[int, GradedExpression] = {}
    for a in range(2, d):
        resid = pullback_variation(
            boundary, parameter, facts, alg.of_gen(fib.cvec_id(a)), open_action=True
        )
        comps = theta_components(ctx, resid)
        null_parts[a] = comps.get(0, alg.zero())
        for b in range(2, d):
            matrix[(a, b)] = comps.get(b - 1, alg.zero())
    n = d - 2
    trace = alg.zero()
    for a in range(2, d):
        trace = trace + matrix[(a, a)]
    trace = Fraction(1, n) * trace
    trace_free = {
        (a, b): matrix[(a, b)] - (trace if a == b else alg.zero())
        for a in range(2, d)
        for b in range(2, d)
    }
    return SectionVariation(
        matrix=matrix, null_parts=null_parts, trace=trace, trace_free=trace_free
    )


def trivial_parameter(boundary: BoundaryConditionSet) -> GaugeParameterAnsatz:
    """The residual parameter direction that moves no constrained generator."""
    fib = boundary.model.metadata["fiber"]
    boundary.ctx.declare_formal(F_UBAR, nindices=0)
    return GaugeParameterAnsatz(
        boundary,
        {fib.lamv_id(1): boundary.ctx.formal(F_UBAR)},
        label="trivial",
    )


@dataclass
class TrivialityReport:
    """Trivial parameters shift the covector data by a pure trace only."""

    dim: int
    variation: SectionVariation
    trace_matches_parameter: bool

    @property
    def pure_trace(self) -> bool:
        return self.variation.pure_trace

    @property
    def passed(self) -> bool:
        return self.pure_trace and self.trace_matches_parameter

    def __str__(self) -> str:
        return (
            f"trivial-parameter variation at dim={self.dim}: "
            + ("pure trace" if self.pure_trace else "NOT pure trace")
            + (", trace tracks the parameter" if self.trace_matches_parameter else "")
        )


def triviality_check(model: ModelSpec | None = None, dim: int = 4) -> TrivialityReport:
    """Certify that the residual trivial family only shifts the trace.

    The trivial parameter moves the unconstrained null covector direction
    only; its induced variation of the transverse covector data comes out
    proportional to the transverse metric, so the trace-free shear part
    is invariant under every trivial symmetry.
    """
    from .models import build_minimal_flat, flipped

    if model is None:
        model = flipped(build_minimal_flat(dim, 1))
    boundary = boundary_conditions(model=model)
    facts = flat_section_facts(boundary)
    param = trivial_parameter(boundary)
    var = covector_variation(boundary, param, facts)
    expect = -boundary.ctx.formal(F_UBAR)
    ok = not (var.trace - expect).terms
    return TrivialityReport(
        dim=boundary.dim, variation=var, trace_matches_parameter=ok
    )
