"""Normal forms modulo constraint systems and model-surgery steps."""

from dataclasses import dataclass, field
from fractions import Fraction

import pytest

from gpdekit.algebra import GradedAlgebra, GradedExpression
from gpdekit.constraints import (
    ConstraintError,
    ConstraintSystem,
    ContractionError,
    completed_metric_rules,
    eliminate_contractible_pair,
    groebner_basis,
    q_invariance,
    redefine_generators,
    reduce_modulo,
    solve_relation_for,
)
from gpdekit.derivations import Derivation
from gpdekit.jets import JetContext, JetField, MetricGeometry, metric_pair_relations


def simple_algebra():
    alg = GradedAlgebra()
    a = alg.generator("a", (), 0)
    b = alg.generator("b", (), 0)
    c = alg.generator("c", (), 0)
    return alg, a, b, c


def test_solved_rules_apply_to_fixpoint():
    alg, a, b, c = simple_algebra()
    sys = ConstraintSystem(
        alg,
        solved={a: alg.of_gen(b) + alg.one(), b: alg.of_gen(c) * alg.of_gen(c)},
    )
    e = alg.of_gen(a)
    red = sys.reduce(e)
    expected = alg.of_gen(c) * alg.of_gen(c) + alg.one()
    assert red == expected


def test_cyclic_solved_rules_rejected():
    alg, a, b, _ = simple_algebra()
    with pytest.raises(ConstraintError):
        ConstraintSystem(alg, solved={a: alg.of_gen(b), b: alg.of_gen(a)})


def test_residual_rewriting_terminates_and_reduces():
    alg, a, b, c = simple_algebra()
    # Relation a*b - c: leading monomial ab rewrites to c.
    rel = alg.of_gen(a) * alg.of_gen(b) - alg.of_gen(c)
    sys = ConstraintSystem(alg, residual=[rel])
    e = alg.of_gen(a) * alg.of_gen(b) * alg.of_gen(a) * alg.of_gen(b)
    red = sys.reduce(e)
    assert red == alg.of_gen(c) * alg.of_gen(c)
    assert sys.reduce(rel).is_zero()


def test_completion_closes_simple_inverse_ideal():
    # One-variable inverse pair: relations {x*y - 1} complete quickly and
    # certify membership of x*y*x*y - 1.
    alg = GradedAlgebra()
    x = alg.generator("x", (), 0)
    y = alg.generator("y", (), 0)
    rel = alg.of_gen(x) * alg.of_gen(y) - alg.one()
    basis = groebner_basis(alg, [rel])
    sys = ConstraintSystem(alg, residual=basis)
    prod = alg.of_gen(x) * alg.of_gen(y)
    assert sys.reduce(prod * prod - alg.one()).is_zero()


def test_metric_contraction_relations_close_schouten_trace():
    # Symbolic counterpart of the point-evaluation oracle: the trace of the
    # Schouten combination reduces to zero modulo the completed pair rules.
    dim = 3
    ctx = JetContext(GradedAlgebra(), dim=dim, order=2)
    geo = MetricGeometry(ctx)
    sys = ConstraintSystem(ctx.alg, residual=completed_metric_rules(ctx))
    trace = ctx.alg.zero()
    for b in range(dim):
        for c in range(dim):
            trace = trace + geo.ginv(b, c) * geo.schouten(b, c)
    trace = trace - geo.scalar_curvature() * Fraction(1, 2 * (dim - 1))
    assert sys.reduce(trace).is_zero()


@dataclass
class ToyModel:
    alg: GradedAlgebra
    generators: list
    q: Derivation
    constraints: ConstraintSystem | None = None
    metadata: dict = field(default_factory=dict)


def lie_pair_model():
    """Ghost pair (p, s) with Q(p) = 2 s plus an inert ghost t."""
    alg = GradedAlgebra()
    p = alg.generator("p", (), 1)
    s = alg.generator("s", (), 2)
    t = alg.generator("t", (), 1)
    q = Derivation(alg, 1, label="q")
    q.set_entry(p, alg.of_gen(s, Fraction(2)))
    q.set_entry(s, alg.zero())
    q.set_entry(t, alg.of_gen(s) * Fraction(0))
    return ToyModel(alg, [p, s, t], q), p, s, t


def test_contractible_pair_elimination():
    model, p, s, t = lie_pair_model()
    reduced, step = eliminate_contractible_pair(model, p, model.alg.zero(), s)
    assert set(reduced.generators) == {t}
    assert step.removed == ("p", "s")
    assert reduced.q(reduced.alg.of_gen(t)).is_zero()


def test_contractible_pair_requires_adjacent_degrees():
    model, p, s, t = lie_pair_model()
    with pytest.raises(ContractionError):
        eliminate_contractible_pair(model, s, model.alg.zero(), t)


def test_contractible_pair_requires_constant_coefficient():
    alg = GradedAlgebra()
    w = alg.generator("w", (), 0)
    p = alg.generator("p", (), 1)
    s = alg.generator("s", (), 2)
    q = Derivation(alg, 1, label="q")
    q.set_entry(w, alg.zero())
    q.set_entry(p, alg.of_gen(w) * alg.of_gen(s))
    q.set_entry(s, alg.zero())
    model = ToyModel(alg, [w, p, s], q)
    with pytest.raises(ContractionError):
        eliminate_contractible_pair(model, p, alg.zero(), s)


def test_solve_relation_consumes_residual():
    alg = GradedAlgebra()
    u = alg.generator("u", (), 0)
    v = alg.generator("v", (), 0)
    q = Derivation(alg, 1, label="q")
    q.set_entry(u, alg.zero())
    q.set_entry(v, alg.zero())
    rel = alg.of_gen(u) - alg.of_gen(v) - alg.one()
    model = ToyModel(alg, [u, v], q, ConstraintSystem(alg, residual=[rel]))
    reduced, step = solve_relation_for(model, 0, u)
    assert reduced.generators == [v]
    assert not reduced.constraints.residual
    assert step.kind == "relation"


def test_redefinition_round_trip():
    alg = GradedAlgebra()
    a = alg.generator("a", (), 1)
    b = alg.generator("b", (), 1)
    q = Derivation(alg, 1, label="q")
    q.set_entry(a, alg.zero())
    q.set_entry(b, alg.zero())
    model = ToyModel(alg, [a, b], q)
    sm = alg.generator("sm", (), 1)
    dfm = alg.generator("df", (), 1)
    half = Fraction(1, 2)
    forward = {
        a: alg.of_gen(sm, half) + alg.of_gen(dfm, half),
        b: alg.of_gen(sm, half) - alg.of_gen(dfm, half),
    }
    backward = {
        sm: alg.of_gen(a) + alg.of_gen(b),
        dfm: alg.of_gen(a) - alg.of_gen(b),
    }
    redef, step = redefine_generators(model, forward, backward, [sm, dfm])
    assert set(redef.generators) == {sm, dfm}
    assert redef.q(redef.alg.of_gen(sm)).is_zero()
    assert step.kind == "redefine"


def grading_toy():
    """One even scalar n and odd ghosts (e, f) with Q(n) = e, Q(e) = 0."""
    alg = GradedAlgebra()
    n = alg.generator("n", (), 0)
    e = alg.generator("e", (), 1)
    f = alg.generator("f", (), 1)
    q = Derivation(alg, 1, label="q")
    q.set_entry(n, alg.of_gen(e))
    q.set_entry(e, alg.zero())
    q.set_entry(f, alg.zero())
    return alg, n, e, f, q


def test_q_invariance_pass():
    alg, n, e, f, q = grading_toy()
    sys = ConstraintSystem(alg, solved={n: alg.zero(), e: alg.zero()})
    rep = q_invariance(q, sys)
    assert rep.aggregate == "pass"


def test_q_invariance_inconclusive_when_reduction_stalls():
    alg, n, e, f, q = grading_toy()
    # Q maps the relation n - 1 to e, which nothing reduces away.
    sys = ConstraintSystem(alg, residual=[alg.of_gen(n) - alg.one()])
    rep = q_invariance(q, sys)
    assert rep.aggregate == "inconclusive"


def test_q_invariance_conditional_with_opaque_entries():
    alg = GradedAlgebra()
    n = alg.generator("n", (), 0)
    f = alg.generator("f", (), 1)
    q = Derivation(alg, 1, label="q")
    q.set_entry(n, alg.zero())
    # f has no declared image: the opaque fallback stands in for it.
    sys = ConstraintSystem(alg, residual=[alg.of_gen(f)])
    rep = q_invariance(q, sys, q_open=lambda gid: gid == f)
    assert rep.aggregate == "conditional"
