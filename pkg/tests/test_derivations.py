"""Derivation laws, nilpotency verdicts, and the horizontal witness solver."""

from __future__ import annotations

import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gpdekit.algebra import GradedAlgebra
from gpdekit.derivations import (
    Derivation,
    DerivationEntryError,
    check_nilpotency,
    dh_exactness_witness,
    graded_commutator,
    horizontal_differential,
)
from gpdekit.jets import JetContext


def su2_like_bundle():
    """Three odd ghosts with the antisymmetric bracket differential."""
    alg = GradedAlgebra()
    c = [alg.generator("c", (i,), ghost=1) for i in range(3)]
    q = Derivation(alg, 1, label="Q")
    # Qc^i = -(1/2) eps_{ijk} c^j c^k = -c^{i+1} c^{i+2} (cyclic).
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        q.set_entry(c[i], -(alg.of_gen(c[j]) * alg.of_gen(c[k])))
    return alg, c, q


def test_leibniz_rule():
    alg, c, q = su2_like_bundle()
    e = alg.of_gen(c[0])
    f = alg.of_gen(c[1]) * alg.of_gen(c[2])
    lhs = q(e * f)
    rhs = q(e) * f + (-1) * e * q(f)  # |Q| odd, |e| odd
    assert lhs == rhs


def test_nilpotency_pass_for_jacobi_bracket():
    alg, c, q = su2_like_bundle()
    report = check_nilpotency(q, c)
    assert report.aggregate == "pass"
    assert all(it.verdict == "pass" for it in report.items)


def test_nilpotency_fail_with_residue_for_broken_bracket():
    alg = GradedAlgebra()
    c = [alg.generator("c", (i,), ghost=1) for i in range(5)]
    q = Derivation(alg, 1, label="Q")
    # Qc0 = c1 c2 and Qc1 = c3 c4 leave Q^2 c0 = c2 c3 c4 standing.
    q.set_entry(c[0], alg.of_gen(c[1]) * alg.of_gen(c[2]))
    q.set_entry(c[1], alg.of_gen(c[3]) * alg.of_gen(c[4]))
    for i in (2, 3, 4):
        q.set_entry(c[i], alg.zero())
    report = check_nilpotency(q, c)
    assert report.aggregate == "fail"
    bad = report.failures()
    assert [it.gid for it in bad] == [c[0]]
    expected = alg.of_gen(c[3]) * alg.of_gen(c[4]) * alg.of_gen(c[2])
    assert bad[0].residue == expected


def test_nilpotency_conditional_with_q_open():
    alg = GradedAlgebra()
    w = alg.generator("W", (0,), ghost=1)
    c = alg.generator("c", (), ghost=1)
    q = Derivation(alg, 1, label="Q")
    # Qc = c*W squares to terms proportional to the undeclared Q(W).
    q.set_entry(c, alg.of_gen(c) * alg.of_gen(w))
    report = check_nilpotency(q, [c], q_open=lambda gid: alg.gen(gid).name == "W")
    assert report.aggregate == "conditional"
    assert report.items[0].residue is not None


def test_nilpotency_inconclusive_on_truncation_overflow():
    alg = GradedAlgebra()
    ctx = JetContext(alg, dim=2, order=1)
    ctx.declare_field("phi", 0, ghost=0)
    c = alg.generator("c", (), ghost=0)
    q = Derivation(alg, 1, label="Q", ctx=ctx)
    # Qc = theta^0 phi_{(0)} forces a second derivative on the next pass.
    q.set_entry(c, ctx.theta(0) * ctx.jet("phi", (), (0,)))
    for name in ("phi",):
        q.set_entry(ctx.jet_id(name), ctx.theta(0) * ctx.jet("phi", (), (0,)))
    q.set_entry(ctx.x_ids[0], ctx.theta(0))
    q.set_entry(ctx.x_ids[1], ctx.theta(1))
    q.set_entry(ctx.theta_ids[0], alg.zero())
    q.set_entry(ctx.theta_ids[1], alg.zero())
    report = check_nilpotency(q, [c])
    assert report.aggregate == "inconclusive"


def test_undeclared_entry_is_loud():
    alg = GradedAlgebra()
    c = alg.generator("c", (), ghost=1)
    q = Derivation(alg, 1)
    with pytest.raises(DerivationEntryError):
        q.of(c)


def test_graded_commutator_even_odd():
    """[D, Q] on a toy pair reproduces the direct difference."""
    alg, c, q = su2_like_bundle()
    d = Derivation(alg, 0, label="rot")
    # An even rotation c0 -> c1, c1 -> -c0, c2 -> 0.
    d.set_entry(c[0], alg.of_gen(c[1]))
    d.set_entry(c[1], -alg.of_gen(c[0]))
    d.set_entry(c[2], alg.zero())
    comm = graded_commutator(d, q)
    e = alg.of_gen(c[0]) * alg.of_gen(c[2])
    assert comm(e) == d(q(e)) - q(d(e))


def jacobi_triple():
    """Three derivations on a small even algebra for the graded Jacobi law."""
    alg = GradedAlgebra()
    a = [alg.generator("a", (i,), ghost=0) for i in range(3)]
    outs = []
    rng = random.Random(5)
    for _ in range(3):
        d = Derivation(alg, 0)
        for gid in a:
            img = alg.from_terms(
                [(Fraction(rng.randint(-2, 2)), [rng.choice(a)]) for _ in range(2)]
            )
            d.set_entry(gid, img)
        outs.append(d)
    return alg, a, outs


def test_even_commutator_jacobi():
    alg, a, (u, v, w) = jacobi_triple()
    lhs = graded_commutator(u, graded_commutator(v, w))
    mid = graded_commutator(graded_commutator(u, v), w)
    rhs = graded_commutator(v, graded_commutator(u, w))
    for gid in a:
        assert lhs.of(gid) == mid.of(gid) + rhs.of(gid)


# -- horizontal witness ---------------------------------------------------------


def witness_ctx(dim=2, order=3):
    alg = GradedAlgebra()
    ctx = JetContext(alg, dim=dim, order=order)
    ctx.declare_field("phi", 0, ghost=0)
    return alg, ctx


def all_jets(ctx, up_to):
    from itertools import combinations_with_replacement

    out = []
    for lvl in range(up_to + 1):
        for deriv in combinations_with_replacement(range(ctx.dim), lvl):
            out.append(ctx.jet_id("phi", (), deriv))
    return out


def random_vertical(alg, ctx, rng, theta_deg, max_jet_level, density=0.6):
    v = Derivation(alg, theta_deg, label="V0", ctx=ctx)
    from itertools import combinations, combinations_with_replacement

    jet_pool = all_jets(ctx, max_jet_level)
    for gid in all_jets(ctx, ctx.order):
        terms = []
        if rng.random() < density:
            for _ in range(rng.randint(1, 2)):
                tset = rng.choice(list(combinations(range(ctx.dim), theta_deg)))
                mono = [ctx.theta_ids[t] for t in tset]
                mono += [rng.choice(jet_pool) for _ in range(rng.randint(0, 2))]
                terms.append((Fraction(rng.randint(-3, 3)), mono))
        v.set_entry(gid, alg.from_terms(terms))
    for gid in ctx.x_ids + ctx.theta_ids:
        v.set_entry(gid, alg.zero())
    return v


def test_witness_round_trip_small():
    alg, ctx = witness_ctx(dim=2, order=3)
    rng = random.Random(99)
    for trial in range(25):
        w0 = random_vertical(alg, ctx, rng, theta_deg=rng.choice([0, 1]), max_jet_level=1)
        dh = horizontal_differential(ctx)
        v = graded_commutator(dh, w0)
        res = dh_exactness_witness(ctx, v, ["phi"], max_level=2)
        assert res.status == "witness", (trial, res.status, res.note)
        assert res.verified_levels == 1


def test_witness_rejects_evolutionary_input():
    alg, ctx = witness_ctx()
    v = Derivation(alg, 0, label="ev", ctx=ctx)
    for gid in all_jets(ctx, ctx.order):
        gen = alg.gen(gid)
        # The prolongation of phi -> phi^2 is a genuine symmetry direction.
        if not gen.deriv:
            v.set_entry(gid, ctx.jet("phi") * ctx.jet("phi"))
    # Prolong explicitly so every entry is present.
    for gid in all_jets(ctx, ctx.order):
        gen = alg.gen(gid)
        if gen.deriv:
            v.set_entry(gid, ctx.total_derivative_multi(ctx.jet("phi") * ctx.jet("phi"), gen.deriv))
    res = dh_exactness_witness(ctx, v, ["phi"], max_level=2)
    assert res.status == "evolutionary"


def test_witness_rejects_non_cocycle():
    alg, ctx = witness_ctx()
    v = Derivation(alg, 1, label="junk", ctx=ctx)
    for gid in all_jets(ctx, ctx.order):
        v.set_entry(gid, alg.zero())
    # One arbitrary entry that no bracket with d_h produces.
    v.set_entry(ctx.jet_id("phi"), ctx.theta(0) * ctx.jet("phi", (), (1,)))
    res = dh_exactness_witness(ctx, v, ["phi"], max_level=2)
    assert res.status == "not-cocycle"
    assert res.residues
