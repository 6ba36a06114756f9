"""Model catalogue: builders, scripted reductions, and nilpotency verdicts."""

from fractions import Fraction

import pytest

from gpdekit.constraints import reduce_modulo
from gpdekit.jets import JetContext
from gpdekit.models import (
    ModelError,
    SectionAnsatz,
    build_boundary_gpde,
    build_minimal_cosmological,
    build_minimal_flat,
    build_model,
    build_preminimal,
    catalogue,
    flipped,
    replay_reduction,
    structure_equations,
    tables_match,
)

HALF = Fraction(1, 2)


# -- scripted reduction vs stored builders -----------------------------------


@pytest.mark.parametrize("dim", [4, 5])
def test_replay_flat_matches_builder(dim):
    red = replay_reduction(build_boundary_gpde(dim, 1), "flat")
    built = build_minimal_flat(dim, 1)
    assert tables_match(red, built) == []


@pytest.mark.parametrize("dim", [4, 5])
@pytest.mark.parametrize("eps", [1, -1])
def test_replay_cosmological_matches_builder(dim, eps):
    lam = Fraction(eps * (dim - 1) * (dim - 2), 2)
    red = replay_reduction(build_boundary_gpde(dim, 1, lam), "cosmological")
    built = build_minimal_cosmological(dim, 1, eps)
    assert tables_match(red, built) == []


def test_tables_match_flags_differences():
    a = build_minimal_flat(4, 1)
    b = build_minimal_flat(4, 1)
    fib = b.metadata["fiber"]
    b.q.set_entry(fib.lam_id(), b.alg.zero())
    bad = tables_match(a, b)
    assert bad and any("lam" in line for line in bad)


# -- stored tables equal the closed displays modulo the ideal ----------------


def _assert_display(model, entries):
    for gid, want in entries:
        diff = reduce_modulo(model.q.of(gid) - want, model.constraints)
        assert not diff.terms, f"{model.alg.display(gid)}: {diff}"


@pytest.mark.parametrize("dim", [4, 5])
def test_minimal_flat_display_form(dim):
    m = build_minimal_flat(dim, 1)
    fib = m.metadata["fiber"]
    alg = m.alg
    trans = range(2, dim)

    def rho_ud(a, b):
        return -fib.rot(a, b)

    entries = []
    for A in trans:
        e = -fib.xi(A) * fib.lam()
        for B in trans:
            e = e + fib.xi(B) * rho_ud(B, A)
        entries.append((fib.xi_id(A), e))
    for A in trans:
        for B in trans:
            if A < B:
                e = alg.zero()
                for C in trans:
                    e = e + rho_ud(A, C) * rho_ud(C, B)
                e = e + (-fib.lamv(A)) * fib.xi(B) - fib.lamv(B) * (-fib.xi(A))
                for C in range(1, dim):
                    for D in range(1, dim):
                        e = e + (
                            fib.xi(C) * fib.xi(D) * (-fib.fam.lower((B, A, C, D)))
                        ).scale(HALF)
                entries.append((fib.rot_id(A, B), -e))
    e = alg.zero()
    for A in trans:
        e = e + fib.xi(A) * (-fib.lamv(A))
    entries.append((fib.lam_id(), e))
    for A in trans:
        e = -fib.lam() * fib.lamv(A)
        for B in trans:
            e = e + (-fib.rot(A, B)) * fib.lamv(B)
        for C in trans:
            for D in trans:
                e = e + (fib.xi(C) * fib.xi(D) * (-fib.cotton(A, C, D))).scale(HALF)
        for D in trans:
            e = e + fib.xi(1) * fib.xi(D) * (-fib.cotton(A, 1, D))
        entries.append((fib.lamv_id(A), e))
    e = -fib.xi(1) * fib.lam()
    for A in trans:
        e = e - fib.xi(A) * (-alg.of_gen(fib.cvec_id(A)))
    entries.append((fib.xi_id(1), e))
    for A in trans:
        e = fib.lamv(1) * fib.xi(A) - fib.lamv(A) * fib.xi(1)
        for B in trans:
            e = e + alg.of_gen(fib.cvec_id(B)) * rho_ud(B, A)
        for C in range(1, dim):
            for D in range(1, dim):
                e = e + (
                    fib.xi(C) * fib.xi(D) * (-fib.fam.lower((A, 0, C, D)))
                ).scale(HALF)
        entries.append((fib.cvec_id(A), e))
    e = -fib.lam() * fib.lamv(1)
    for A in trans:
        e = e + alg.of_gen(fib.cvec_id(A)) * (-fib.lamv(A))
    for C in trans:
        for D in trans:
            e = e + (fib.xi(C) * fib.xi(D) * fib.cotton(0, C, D)).scale(HALF)
    for D in trans:
        e = e + fib.xi(1) * fib.xi(D) * fib.cotton(0, 1, D)
    entries.append((fib.lamv_id(1), e))
    _assert_display(m, entries)


@pytest.mark.parametrize("dim", [4, 5])
@pytest.mark.parametrize("eps", [1, -1])
def test_minimal_cosmological_display_form(dim, eps):
    m = build_minimal_cosmological(dim, 1, eps)
    fib = m.metadata["fiber"]
    alg = m.alg
    trans = range(1, dim)

    def rho_ud(a, b):
        return fib.rot(a, b) * fib.eta(b, b)

    entries = []
    for A in trans:
        e = -fib.xi(A) * fib.lam()
        for B in trans:
            e = e + fib.xi(B) * rho_ud(B, A)
        entries.append((fib.xi_id(A), e))
    for A in trans:
        for B in trans:
            if A < B:
                e = alg.zero()
                for C in trans:
                    e = e + rho_ud(A, C) * rho_ud(C, B)
                e = e + (fib.eta(A, A) * fib.lamv(A)) * fib.xi(B)
                e = e - fib.lamv(B) * (fib.eta(A, A) * fib.xi(A))
                for C in trans:
                    for D in trans:
                        wud = alg.zero()
                        for E in trans:
                            wud = wud + fib.eta(B, E) * fib.fam.lower((E, A, C, D))
                        e = e + (fib.xi(C) * fib.xi(D) * wud).scale(HALF)
                entries.append((fib.rot_id(A, B), fib.eta(B, B) * e))
    e = alg.zero()
    for A in trans:
        e = e + fib.xi(A) * (fib.eta(A, A) * fib.lamv(A))
    entries.append((fib.lam_id(), e))
    for A in trans:
        e = -fib.lam() * fib.lamv(A)
        for B in trans:
            rho_du = alg.zero()
            for C in trans:
                rho_du = rho_du + fib.eta(A, C) * fib.rot(C, B)
            e = e + rho_du * fib.lamv(B)
        for B in trans:
            for C in trans:
                cot_ud = alg.zero()
                for E in trans:
                    cot_ud = cot_ud + fib.eta(A, E) * fib.cotton(E, B, C)
                e = e + (fib.xi(B) * fib.xi(C) * cot_ud).scale(HALF)
        entries.append((fib.lamv_id(A), e))
    _assert_display(m, entries)


# -- coordinate counts -------------------------------------------------------


@pytest.mark.parametrize("dim,free", [(4, 20), (5, 50)])
def test_tower_free_count(dim, free):
    m = build_minimal_flat(dim, 1)
    assert m.curvature.component_count() == free


@pytest.mark.parametrize("dim", [4, 5])
def test_minimal_ghost_one_count(dim):
    for m in (
        build_minimal_flat(dim, 1),
        build_minimal_cosmological(dim, 1, 1),
        build_minimal_cosmological(dim, 1, -1),
    ):
        odd = [g for g in m.declared_generators() if m.alg.ghost_of(g) == 1]
        assert len(odd) == dim * (dim + 1) // 2
        assert len(odd) == len(m.declared_generators())


def test_offshell_gr_counts_and_base_action():
    m = build_model("offshell-gr")
    assert len(m.generators) == 70  # 10 + 40 metric jets, 4 + 16 ghost jets
    for mu in range(4):
        assert m.q.of(m.ctx.x_ids[mu]) == m.ctx.theta(mu)
        assert not m.q.of(m.ctx.theta_ids[mu]).terms


def test_catalogue_names_build():
    cat = catalogue()
    assert set(cat) == {
        "offshell-gr",
        "conformal-like",
        "conformal-onshell",
        "preminimal",
        "boundary",
        "minimal-flat",
        "minimal-ads",
        "minimal-ds",
    }
    m = cat["minimal-flat"]()
    assert m.metadata["dim"] == 4
    with pytest.raises(ModelError):
        build_model("no-such-model")


# -- nilpotency --------------------------------------------------------------


def _clean(report):
    counts = report.counts()
    return (
        report.aggregate,
        counts.get("fail", 0),
        counts.get("inconclusive", 0),
    )


def test_minimal_models_square_to_zero():
    for m in (
        build_minimal_flat(4, 1),
        build_minimal_cosmological(4, 1, 1),
        build_minimal_cosmological(4, 1, -1),
        build_minimal_flat(5, 1),
    ):
        rep = m.nilpotency()
        assert _clean(rep) == ("conditional", 0, 0), m.name


def test_boundary_squares_to_zero_modulo_ideal():
    rep = build_boundary_gpde(4, 1).nilpotency(completed=True)
    assert _clean(rep) == ("conditional", 0, 0)


def test_bulk_squares_to_zero_with_jet_headroom():
    # The scale-chain consequences live one jet deeper than the base
    # relation, so the bulk check needs order 2 the same way the jet
    # models need prolongation headroom.
    rep = build_preminimal(4, 2).nilpotency(completed=True)
    assert _clean(rep) == ("conditional", 0, 0)


def test_flip_is_an_involution_and_preserves_nilpotency():
    m = build_minimal_flat(4, 1)
    f = flipped(m)
    assert f.metadata["sign_flag"] == "flipped"
    for gid in m.declared_generators():
        assert f.q.of(gid) == -m.q.of(gid)
    assert tables_match(flipped(f), m) == []
    rep = f.nilpotency()
    assert _clean(rep) == ("conditional", 0, 0)


# -- auxiliary model data ----------------------------------------------------


def test_preminimal_eliminated_scale_tower():
    m = build_preminimal(4, 3)
    sys = m.metadata["eliminated_tower"]
    fib = m.metadata["fiber"]
    alg = m.alg
    second = alg.of_gen(alg.generator("Oms", (0, 1), 0))
    assert sys.reduce(second) == -fib.rho() * fib.g(0, 1)
    third = alg.of_gen(alg.generator("Oms", (0, 1, 2), 0))
    assert not sys.reduce(third).terms


def test_section_structure_equations():
    m = build_minimal_flat(4, 1)
    ctx = JetContext(m.alg, 3, 1)
    zero = SectionAnsatz(
        ctx,
        {gid: m.alg.zero() for gid in m.declared_generators()},
        label="zero section",
    )
    eqs = structure_equations(m, zero)
    assert eqs and all(not e.terms for _, e in eqs)


def test_section_rejects_wrong_degree():
    m = build_minimal_flat(4, 1)
    ctx = JetContext(m.alg, 3, 1)
    fib = m.metadata["fiber"]
    with pytest.raises(ModelError):
        SectionAnsatz(ctx, {fib.lam_id(): ctx.x(0)})
