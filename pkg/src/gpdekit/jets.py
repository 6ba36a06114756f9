"""Jet coordinates over a base with odd directions, and total derivatives.

A ``JetContext`` fixes the base dimension, a hard truncation order for the
jet tower, and the declared fiber fields.  Jet generators are labelled by a
base-field name plus a sorted derivative multi-index; the total derivative
``D_a`` shifts that multi-index and is, by construction, symmetric in
repeated applications.  Crossing the truncation ceiling raises
``JetOrderError`` rather than silently dropping terms: callers that need
headroom enlarge the context instead.

Formal fields model unconstrained functions of the base (frame components,
symmetry parameters).  They prolong like jets but carry no ceiling, and may
declare killed directions (``D_a f = 0`` facts).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable

from gpdekit.algebra import AlgebraError, GradedAlgebra, GradedExpression

X_NAME = "x"
THETA_NAME = "th"


class JetOrderError(Exception):
    """A derivative would exceed the context's truncation order."""


@dataclass(frozen=True)
class JetField:
    """A fiber field carried to the jet tower.

    ``symmetric`` marks a pair-symmetric 2-index field (stored with sorted
    indices).  ``no_prolong`` blocks tower generation; such fields must have
    a custom derivative rule registered (used for the inverse metric, whose
    derivative re-expands through the metric jets).
    """

    name: str
    nindices: int
    ghost: int = 0
    symmetric: bool = False
    no_prolong: bool = False


@dataclass(frozen=True)
class FormalField:
    """An unconstrained function of the base, with optional killed directions."""

    name: str
    nindices: int
    ghost: int = 0
    killed: frozenset[int] = frozenset()


class JetContext:
    """Base coordinates, jet tower bookkeeping, and total derivatives."""

    def __init__(
        self,
        alg: GradedAlgebra,
        dim: int,
        order: int,
        index_names: Iterable[str] | None = None,
    ) -> None:
        if dim < 1:
            raise ValueError("base dimension must be positive")
        if order < 0:
            raise ValueError("truncation order must be nonnegative")
        self.alg = alg
        self.dim = dim
        self.order = order
        self.fields: dict[str, JetField] = {}
        self.formal_fields: dict[str, FormalField] = {}
        self._drules: dict[str, Callable[[int, int], GradedExpression]] = {}
        self._dcache: dict[tuple[int, int], GradedExpression] = {}
        if index_names is not None:
            names = list(index_names)
            if len(names) != dim:
                raise ValueError("index_names length must match dim")
            for i, nm in enumerate(names):
                alg.index_names[i] = nm
        self.x_ids = [alg.generator(X_NAME, (mu,), ghost=0) for mu in range(dim)]
        self.theta_ids = [alg.generator(THETA_NAME, (mu,), ghost=1) for mu in range(dim)]

    # -- declarations --------------------------------------------------------

    def declare_field(
        self,
        name: str,
        nindices: int,
        ghost: int = 0,
        symmetric: bool = False,
        no_prolong: bool = False,
    ) -> JetField:
        if name in (X_NAME, THETA_NAME):
            raise AlgebraError(f"field name {name!r} is reserved")
        fld = JetField(name, nindices, ghost, symmetric, no_prolong)
        prior = self.fields.get(name)
        if prior is not None and prior != fld:
            raise AlgebraError(f"field {name!r} re-declared inconsistently")
        self.fields[name] = fld
        return fld

    def declare_formal(
        self,
        name: str,
        nindices: int = 0,
        ghost: int = 0,
        killed: Iterable[int] = (),
    ) -> FormalField:
        fld = FormalField(name, nindices, ghost, frozenset(killed))
        prior = self.formal_fields.get(name)
        if prior is not None and prior != fld:
            raise AlgebraError(f"formal field {name!r} re-declared inconsistently")
        self.formal_fields[name] = fld
        return fld

    def register_derivative_rule(
        self, name: str, rule: Callable[[int, int], GradedExpression]
    ) -> None:
        """Custom D_a for generators of field ``name``: rule(gid, a) -> expr."""
        self._drules[name] = rule

    # -- generator accessors ---------------------------------------------------

    def x(self, mu: int) -> GradedExpression:
        return self.alg.of_gen(self.x_ids[mu])

    def theta(self, mu: int) -> GradedExpression:
        return self.alg.of_gen(self.theta_ids[mu])

    def jet_id(self, name: str, indices: Iterable[int] = (), deriv: Iterable[int] = ()) -> int:
        fld = self.fields.get(name)
        if fld is None:
            raise AlgebraError(f"unknown jet field {name!r}")
        idx = tuple(indices)
        if len(idx) != fld.nindices:
            raise AlgebraError(f"field {name!r} takes {fld.nindices} indices, got {idx}")
        if fld.symmetric:
            idx = tuple(sorted(idx))
        dv = tuple(sorted(deriv))
        if fld.no_prolong and dv:
            raise AlgebraError(f"field {name!r} carries no jet tower")
        if len(dv) > self.order:
            raise JetOrderError(
                f"jet {name}{idx}:{dv} exceeds truncation order {self.order}"
            )
        return self.alg.generator(name, idx, fld.ghost, dv)

    def jet(self, name: str, indices: Iterable[int] = (), deriv: Iterable[int] = ()) -> GradedExpression:
        return self.alg.of_gen(self.jet_id(name, indices, deriv))

    def formal_id(self, name: str, indices: Iterable[int] = (), deriv: Iterable[int] = ()) -> int:
        fld = self.formal_fields.get(name)
        if fld is None:
            raise AlgebraError(f"unknown formal field {name!r}")
        idx = tuple(indices)
        if len(idx) != fld.nindices:
            raise AlgebraError(f"formal field {name!r} takes {fld.nindices} indices")
        dv = tuple(sorted(deriv))
        if any(a in fld.killed for a in dv):
            raise AlgebraError(f"formal field {name!r} is constant along {fld.killed}")
        return self.alg.generator("~" + name, idx, fld.ghost, dv)

    def formal(self, name: str, indices: Iterable[int] = (), deriv: Iterable[int] = ()) -> GradedExpression:
        fld = self.formal_fields.get(name)
        if fld is None:
            raise AlgebraError(f"unknown formal field {name!r}")
        if any(a in fld.killed for a in deriv):
            return self.alg.zero()
        return self.alg.of_gen(self.formal_id(name, indices, deriv))

    def enlarged(self, extra: int) -> "JetContext":
        """A view over the same algebra with a raised truncation ceiling."""
        ctx = JetContext.__new__(JetContext)
        ctx.alg = self.alg
        ctx.dim = self.dim
        ctx.order = self.order + extra
        ctx.fields = self.fields
        ctx.formal_fields = self.formal_fields
        ctx._drules = self._drules
        ctx._dcache = {}
        ctx.x_ids = self.x_ids
        ctx.theta_ids = self.theta_ids
        return ctx

    # -- derivatives -----------------------------------------------------------

    def _derivative_of_gen(self, gid: int, a: int) -> GradedExpression:
        cached = self._dcache.get((gid, a))
        if cached is not None:
            return cached
        alg = self.alg
        g = alg.gen(gid)
        name = g.name
        if name == X_NAME:
            out = alg.one() if g.indices[0] == a else alg.zero()
        elif name == THETA_NAME:
            out = alg.zero()
        elif name in self._drules:
            out = self._drules[name](gid, a)
        elif name in self.fields:
            out = self.jet(name, g.indices, g.deriv + (a,))
        elif name.startswith("~") and name[1:] in self.formal_fields:
            out = self.formal(name[1:], g.indices, g.deriv + (a,))
        else:
            raise AlgebraError(
                f"no derivative rule for generator {alg.display(gid)}"
            )
        self._dcache[(gid, a)] = out
        return out

    def total_derivative(self, expr: GradedExpression, a: int) -> GradedExpression:
        """D_a expr: even derivation extending the jet shift."""
        if not (0 <= a < self.dim):
            raise AlgebraError(f"derivative direction {a} out of range")
        alg = self.alg
        out = alg.zero()
        for m, c in expr.terms.items():
            for i, gid in enumerate(m):
                d = self._derivative_of_gen(gid, a)
                if not d.terms:
                    continue
                rest = m[:i] + m[i + 1:]
                # D_a is even, and d has the parity of gid; moving d to the
                # front of the monomial crosses the prefix only.
                sign = -1 if (alg.parity_of(gid) and alg.monomial_parity(m[:i])) else 1
                out = out + d.mul_monomial(rest, c if sign > 0 else -c)
        return out

    def total_derivative_multi(self, expr: GradedExpression, deriv: Iterable[int]) -> GradedExpression:
        for a in deriv:
            expr = self.total_derivative(expr, a)
        return expr

    def base_differential(self, expr: GradedExpression) -> GradedExpression:
        """theta^a D_a expr: the horizontal (base) differential."""
        out = self.alg.zero()
        for a in range(self.dim):
            d = self.total_derivative(expr, a)
            if d.terms:
                out = out + self.alg.of_gen(self.theta_ids[a]) * d
        return out


def total_derivative(ctx: JetContext, expr: GradedExpression, a: int) -> GradedExpression:
    return ctx.total_derivative(expr, a)


def base_differential(ctx: JetContext, expr: GradedExpression) -> GradedExpression:
    return ctx.base_differential(expr)


class MetricGeometry:
    """Curvature combinations of a metric jet field, all exact.

    Conventions: Gamma^d_{bc} = g^{de}(D_b g_{ec} + D_c g_{eb} - D_e g_{bc})/2,
    R^a_{bcd} = D_c Gamma^a_{db} - D_d Gamma^a_{cb} + Gamma^a_{ce}Gamma^e_{db}
    - Gamma^a_{de}Gamma^e_{cb}, Ricci_{bd} = R^a_{bad}.  The trace-adjusted
    Ricci combination is (Ricci_{bc} - g_{bc} R/(2(dim-1)))/(dim-2).
    """

    def __init__(self, ctx: JetContext, metric: str = "g", inverse: str = "ginv") -> None:
        if ctx.dim < 3:
            raise AlgebraError("curvature combinations need base dimension >= 3")
        self.ctx = ctx
        self.metric = metric
        self.inverse = inverse
        ctx.declare_field(metric, 2, ghost=0, symmetric=True)
        ctx.declare_field(inverse, 2, ghost=0, symmetric=True, no_prolong=True)
        install_inverse_metric_rule(ctx, metric, inverse)
        self._gamma: dict[tuple[int, int, int], GradedExpression] = {}
        self._ricci: dict[tuple[int, int], GradedExpression] = {}
        self._scalar: GradedExpression | None = None
        self._schouten: dict[tuple[int, int], GradedExpression] = {}

    def g(self, b: int, c: int, deriv: Iterable[int] = ()) -> GradedExpression:
        return self.ctx.jet(self.metric, (b, c), deriv)

    def ginv(self, b: int, c: int) -> GradedExpression:
        return self.ctx.jet(self.inverse, (b, c))

    def gamma(self, d: int, b: int, c: int) -> GradedExpression:
        if b > c:
            b, c = c, b
        got = self._gamma.get((d, b, c))
        if got is not None:
            return got
        ctx = self.ctx
        half = Fraction(1, 2)
        acc = ctx.alg.zero()
        for e in range(ctx.dim):
            inner = self.g(e, c, (b,)) + self.g(e, b, (c,)) - self.g(b, c, (e,))
            acc = acc + self.ginv(d, e) * inner
        out = acc.scale(half)
        self._gamma[(d, b, c)] = out
        return out

    def riemann_ud(self, a: int, b: int, c: int, d: int) -> GradedExpression:
        ctx = self.ctx
        out = ctx.total_derivative(self.gamma(a, d, b), c) - ctx.total_derivative(
            self.gamma(a, c, b), d
        )
        for e in range(ctx.dim):
            out = out + self.gamma(a, c, e) * self.gamma(e, d, b)
            out = out - self.gamma(a, d, e) * self.gamma(e, c, b)
        return out

    def ricci(self, b: int, d: int) -> GradedExpression:
        if b > d:
            b, d = d, b
        got = self._ricci.get((b, d))
        if got is not None:
            return got
        out = self.ctx.alg.zero()
        for a in range(self.ctx.dim):
            out = out + self.riemann_ud(a, b, a, d)
        self._ricci[(b, d)] = out
        return out

    def scalar_curvature(self) -> GradedExpression:
        if self._scalar is None:
            out = self.ctx.alg.zero()
            for b in range(self.ctx.dim):
                for d in range(self.ctx.dim):
                    out = out + self.ginv(b, d) * self.ricci(b, d)
            self._scalar = out
        return self._scalar

    def schouten(self, b: int, c: int) -> GradedExpression:
        if b > c:
            b, c = c, b
        got = self._schouten.get((b, c))
        if got is not None:
            return got
        n = self.ctx.dim
        out = (
            self.ricci(b, c)
            - self.g(b, c) * self.scalar_curvature().scale(Fraction(1, 2 * (n - 1)))
        ).scale(Fraction(1, n - 2))
        self._schouten[(b, c)] = out
        return out


def install_inverse_metric_rule(ctx: JetContext, metric: str, inverse: str) -> None:
    """D_a g^{bc} = -g^{be} g^{cf} D_a g_{ef}, as a derivative rule."""

    def rule(gid: int, a: int) -> GradedExpression:
        b, c = ctx.alg.gen(gid).indices
        out = ctx.alg.zero()
        for e in range(ctx.dim):
            for f in range(ctx.dim):
                out = out - ctx.jet(inverse, (b, e)) * ctx.jet(inverse, (c, f)) * ctx.jet(
                    metric, (e, f), (a,)
                )
        return out

    ctx.register_derivative_rule(inverse, rule)


def christoffel_schouten(ctx: JetContext, metric: str = "g", inverse: str = "ginv") -> MetricGeometry:
    """Curvature calculator over ``ctx`` for the named metric pair."""
    return MetricGeometry(ctx, metric, inverse)


def metric_pair_relations(ctx: JetContext, metric: str = "g", inverse: str = "ginv") -> list[GradedExpression]:
    """The defining relations sum_b g^{ab} g_{bc} - delta^a_c, all (a, c)."""
    out: list[GradedExpression] = []
    for a in range(ctx.dim):
        for c in range(ctx.dim):
            rel = ctx.alg.zero()
            for b in range(ctx.dim):
                rel = rel + ctx.jet(inverse, (a, b)) * ctx.jet(metric, (b, c))
            if a == c:
                rel = rel - ctx.alg.one()
            out.append(rel)
    return out
