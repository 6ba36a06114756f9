"""Jet tower mechanics and the curvature calculator.

The trace identity for the adjusted Ricci combination is checked here by
exact rational point evaluation (random metric jets, exact matrix inverse),
which is independent of any symbolic reduction machinery.
"""

from __future__ import annotations

import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gpdekit.algebra import AlgebraError, GradedAlgebra, Substitution
from gpdekit.jets import JetContext, JetOrderError, christoffel_schouten


def make_ctx(dim=4, order=3):
    alg = GradedAlgebra()
    ctx = JetContext(alg, dim=dim, order=order)
    ctx.declare_field("phi", 0, ghost=0)
    ctx.declare_field("xi", 1, ghost=1)
    return ctx


def test_x_theta_rules():
    ctx = make_ctx()
    assert ctx.total_derivative(ctx.x(2), 2) == ctx.alg.one()
    assert ctx.total_derivative(ctx.x(2), 1).is_zero()
    assert ctx.total_derivative(ctx.theta(0), 0).is_zero()


def test_jet_shift_and_sorting():
    ctx = make_ctx()
    e = ctx.jet("phi", (), (2, 0))
    assert e == ctx.jet("phi", (), (0, 2))
    d = ctx.total_derivative(e, 1)
    assert d == ctx.jet("phi", (), (0, 1, 2))


def test_truncation_ceiling_is_loud():
    ctx = make_ctx(order=1)
    e = ctx.jet("phi", (), (0,))
    with pytest.raises(JetOrderError):
        ctx.total_derivative(e, 0)
    bigger = ctx.enlarged(1)
    assert bigger.total_derivative(e, 0) == bigger.jet("phi", (), (0, 0))


def test_total_derivatives_commute():
    ctx = make_ctx(order=4)
    e = ctx.jet("phi", (), (1,)) * ctx.jet("xi", (0,), ()) + ctx.x(0) * ctx.jet("phi", ())
    ab = ctx.total_derivative(ctx.total_derivative(e, 0), 2)
    ba = ctx.total_derivative(ctx.total_derivative(e, 2), 0)
    assert ab == ba


def test_leibniz_even_derivation():
    ctx = make_ctx()
    f = ctx.jet("xi", (1,), ()) * ctx.jet("phi", ())
    g = ctx.jet("xi", (2,), ()) + ctx.theta(0)
    lhs = ctx.total_derivative(f * g, 1)
    rhs = ctx.total_derivative(f, 1) * g + f * ctx.total_derivative(g, 1)
    assert lhs == rhs


def test_base_differential_squares_to_zero():
    ctx = make_ctx(order=4)
    e = ctx.jet("phi", (), (1,)) * ctx.jet("xi", (3,), (2,)) + ctx.x(1) * ctx.theta(2)
    dd = ctx.base_differential(ctx.base_differential(e))
    assert dd.is_zero()


def test_base_differential_on_x_is_theta():
    ctx = make_ctx()
    assert ctx.base_differential(ctx.x(3)) == ctx.theta(3)


def test_formal_field_killed_directions():
    ctx = make_ctx()
    ctx.declare_formal("T", 0, killed=(0,))
    t = ctx.formal("T")
    assert ctx.total_derivative(t, 0).is_zero()
    assert ctx.total_derivative(t, 1) == ctx.formal("T", (), (1,))


# -- exact point evaluation of the curvature calculator ------------------------


def rational_inverse(mat: list[list[Fraction]]) -> list[list[Fraction]]:
    n = len(mat)
    aug = [row[:] + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(mat)]
    for col in range(n):
        piv = next((r for r in range(col, n) if aug[r][col] != 0), None)
        assert piv is not None, "singular test metric"
        aug[col], aug[piv] = aug[piv], aug[col]
        inv = Fraction(1) / aug[col][col]
        aug[col] = [v * inv for v in aug[col]]
        for r in range(n):
            if r != col and aug[r][col]:
                f = aug[r][col]
                aug[r] = [v - f * w for v, w in zip(aug[r], aug[col])]
    return [row[n:] for row in aug]


def random_metric_point(ctx, rng, max_order=2):
    """Substitution sending metric jets to random rationals, inverse exact."""
    dim = ctx.dim
    g0 = [[Fraction(0)] * dim for _ in range(dim)]
    mapping = {}
    for b in range(dim):
        for c in range(b, dim):
            val = Fraction(int(b == c)) + Fraction(rng.randint(-2, 2), 7)
            g0[b][c] = g0[c][b] = val
            mapping[ctx.jet_id("g", (b, c))] = ctx.alg.scalar(val)
    ginv0 = rational_inverse(g0)
    for b in range(dim):
        for c in range(b, dim):
            mapping[ctx.jet_id("ginv", (b, c))] = ctx.alg.scalar(ginv0[b][c])

    def fill(deriv):
        for b in range(dim):
            for c in range(b, dim):
                gid = ctx.jet_id("g", (b, c), deriv)
                if gid not in mapping:
                    mapping[gid] = ctx.alg.scalar(Fraction(rng.randint(-3, 3), 5))

    from itertools import combinations_with_replacement

    for k in range(1, max_order + 1):
        for deriv in combinations_with_replacement(range(dim), k):
            fill(deriv)
    return Substitution(ctx.alg, mapping)


def test_schouten_trace_identity_dim4():
    """g^{bc} P_{bc} = R / (2 (dim-1)) at dim = 4, exactly, at random points."""
    alg = GradedAlgebra()
    ctx = JetContext(alg, dim=4, order=2)
    geo = christoffel_schouten(ctx)
    trace = alg.zero()
    for b in range(4):
        for c in range(4):
            trace = trace + geo.ginv(b, c) * geo.schouten(b, c)
    target = geo.scalar_curvature().scale(Fraction(1, 6))
    diff = trace - target
    rng = random.Random(20260815)
    for _ in range(3):
        point = random_metric_point(ctx, rng)
        val = point(diff)
        assert val.is_zero()


def test_gamma_flat_point_vanishes():
    alg = GradedAlgebra()
    ctx = JetContext(alg, dim=4, order=2)
    geo = christoffel_schouten(ctx)
    mapping = {}
    for b in range(4):
        for c in range(b, 4):
            one = alg.one() if b == c else alg.zero()
            mapping[ctx.jet_id("g", (b, c))] = one
            mapping[ctx.jet_id("ginv", (b, c))] = one
            for a in range(4):
                mapping[ctx.jet_id("g", (b, c), (a,))] = alg.zero()
    flat = Substitution(alg, mapping)
    for d in range(4):
        for b in range(4):
            for c in range(b, 4):
                assert flat(geo.gamma(d, b, c)).is_zero()


def test_inverse_metric_derivative_rule_consistent():
    """D_a (g^{be} g_{ec}) evaluates to zero at exact random points."""
    alg = GradedAlgebra()
    ctx = JetContext(alg, dim=3, order=2)
    geo = christoffel_schouten(ctx)
    rng = random.Random(7)
    point = random_metric_point(ctx, rng, max_order=1)
    for a in range(3):
        for b in range(3):
            for c in range(3):
                contr = alg.zero()
                for e in range(3):
                    contr = contr + geo.ginv(b, e) * geo.g(e, c)
                d = ctx.total_derivative(contr, a)
                assert point(d).is_zero()


@settings(max_examples=60)
@given(st.integers(0, 3), st.integers(0, 3))
def test_derivative_directions_commute_on_curvature(a, b):
    ctx = make_ctx(dim=4, order=4)
    e = ctx.jet("phi", (), (0,)) * ctx.jet("phi", (), (1, 2))
    ab = ctx.total_derivative(ctx.total_derivative(e, a), b)
    ba = ctx.total_derivative(ctx.total_derivative(e, b), a)
    assert ab == ba
