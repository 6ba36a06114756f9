"""Curvature-zero algebra extraction and oracle matching."""

from fractions import Fraction

import pytest

from gpdekit.lie import (
    LieError,
    curvature_zero_limit,
    match_lie_algebra,
    oracle_presentation,
    symmetric_signature,
)
from gpdekit.models import (
    build_boundary_gpde,
    build_minimal_cosmological,
    build_minimal_flat,
    flipped,
)


def test_flat_extraction_dimension():
    p = curvature_zero_limit(build_minimal_flat(4, 1))
    assert p.dim == 10
    assert p.jacobi_defects() == []


@pytest.mark.parametrize(
    "builder,args",
    [
        (build_minimal_flat, (4, 1)),
        (build_minimal_flat, (5, 1)),
        (build_minimal_cosmological, (4, 1, 1)),
        (build_minimal_cosmological, (4, 1, -1)),
        (build_minimal_cosmological, (5, 1, 1)),
        (build_minimal_cosmological, (5, 1, -1)),
    ],
)
def test_every_extracted_presentation_satisfies_jacobi(builder, args):
    for m in (builder(*args), flipped(builder(*args))):
        assert curvature_zero_limit(m).jacobi_defects() == []


@pytest.mark.parametrize(
    "builder,args,target",
    [
        (build_minimal_flat, (4, 1), "iso(3,1)"),
        (build_minimal_flat, (5, 1), "iso(4,1)"),
        (build_minimal_cosmological, (4, 1, 1), "o(3,2)"),
        (build_minimal_cosmological, (4, 1, -1), "o(4,1)"),
        (build_minimal_cosmological, (5, 1, 1), "o(4,2)"),
        (build_minimal_cosmological, (5, 1, -1), "o(5,1)"),
    ],
)
def test_minimal_models_match_their_oracles(builder, args, target):
    verdict = match_lie_algebra(curvature_zero_limit(builder(*args)), target)
    assert verdict.isomorphic, verdict.diagnostics
    assert len(verdict.basis_map) == args[0] * (args[0] + 1) // 2
    assert all(scale for scale, _ in verdict.basis_map.values())


def test_flat_map_sends_null_frame_ghosts_to_translations():
    verdict = match_lie_algebra(
        curvature_zero_limit(build_minimal_flat(4, 1)), "iso(3,1)"
    )
    translations = [
        lbl for lbl, (_, tgt) in verdict.basis_map.items() if tgt.startswith("P")
    ]
    assert len(translations) == 4
    assert any("xi" in lbl for lbl in translations)
    assert any("cA" in lbl for lbl in translations)
    assert any("lamv" in lbl for lbl in translations)


def test_poincare_is_not_anti_de_sitter():
    p = curvature_zero_limit(build_minimal_flat(4, 1))
    verdict = match_lie_algebra(p, "o(3,2)")
    assert not verdict.isomorphic
    assert any("Killing" in d for d in verdict.diagnostics)


def test_signature_separates_the_two_cosmological_signs():
    p = curvature_zero_limit(build_minimal_cosmological(4, 1, 1))
    verdict = match_lie_algebra(p, "o(4,1)")
    assert not verdict.isomorphic
    assert any("inertia" in d for d in verdict.diagnostics)


def test_corrupted_constant_breaks_jacobi():
    p = curvature_zero_limit(build_minimal_flat(4, 1))
    pair = next(iter(p.brackets))
    tgt = next(iter(p.brackets[pair]))
    p.brackets[pair][tgt] += Fraction(1)
    assert p.jacobi_defects() != []


def test_background_dependent_table_is_rejected():
    with pytest.raises(LieError):
        curvature_zero_limit(build_boundary_gpde(4, 1))


def test_rotation_block_closes_on_itself():
    p = curvature_zero_limit(build_minimal_cosmological(5, 1, 1))
    block = [i for i, (nm, ix) in enumerate(p.keys) if nm == "rho" and min(ix) >= 2]
    assert len(block) == 3
    sub = [[Fraction(0)] * 3 for _ in range(3)]
    for a, j in enumerate(block):
        for b, k in enumerate(block):
            vec = p.bracket_vector(j, k)
            for i, c in enumerate(vec):
                if c and i not in block:
                    raise AssertionError("rotation bracket leaves the block")
            for m in range(3):
                for l in range(3):
                    sub[a][b] += (
                        p.structure_constant(block[m], j, block[l])
                        * p.structure_constant(block[l], k, block[m])
                    )
    assert symmetric_signature(sub) == (0, 3, 0)


def test_oracle_presentations_are_lie_algebras():
    for target, dim in [("iso(3,1)", 10), ("o(3,2)", 10), ("o(4,1)", 10)]:
        o = oracle_presentation(target)
        assert o.presentation.dim == dim
        assert o.presentation.jacobi_defects() == []


def test_unparseable_target_raises():
    with pytest.raises(LieError):
        oracle_presentation("sp(4)")
