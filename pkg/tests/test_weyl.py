"""Index symmetries of the curvature-type generator family."""

from itertools import permutations

import pytest

from gpdekit.algebra import GradedAlgebra
from gpdekit.jets import JetOrderError
from gpdekit.weyl import CurvatureFamily, pair_canonical


def test_component_counts_match_riemann_dimension():
    # d^2 (d^2 - 1) / 12 independent components.
    for dim, expected in ((3, 6), (4, 20), (5, 50)):
        fam = CurvatureFamily(GradedAlgebra(), "W", dim, order=1)
        assert fam.component_count() == expected


def test_pair_antisymmetry_and_exchange():
    fam = CurvatureFamily(GradedAlgebra(), "W", 4, order=0)
    assert fam.lower((0, 1, 2, 3)) == -fam.lower((1, 0, 2, 3))
    assert fam.lower((0, 1, 2, 3)) == -fam.lower((0, 1, 3, 2))
    assert fam.lower((0, 1, 2, 3)) == fam.lower((2, 3, 0, 1))
    assert fam.lower((0, 0, 2, 3)).is_zero()
    assert fam.lower((0, 1, 2, 2)).is_zero()


def test_cyclic_identity_holds_for_all_index_choices():
    dim = 4
    fam = CurvatureFamily(GradedAlgebra(), "W", dim, order=0)
    for a in range(dim):
        for b, c, d in permutations(range(dim), 3):
            total = fam.lower((a, b, c, d)) + fam.lower((a, c, d, b)) + fam.lower(
                (a, d, b, c)
            )
            assert total.is_zero()


def test_tower_is_symmetric_in_derivative_slots():
    fam = CurvatureFamily(GradedAlgebra(), "W", 4, order=2)
    assert fam.lower((0, 1, 2, 3), (2, 1)) == fam.lower((0, 1, 2, 3), (1, 2))
    with pytest.raises(JetOrderError):
        fam.lower((0, 1, 2, 3), (0, 1, 2))


def test_pair_canonical_detects_forced_zero():
    assert pair_canonical((1, 1, 2, 3)) is None
    sign, rep = pair_canonical((3, 2, 1, 0))
    assert rep == (0, 1, 2, 3)
    assert sign == 1


def test_tower_id_enumeration_counts():
    dim = 4
    fam = CurvatureFamily(GradedAlgebra(), "W", dim, order=1)
    ids = fam.tower_ids()
    assert len(ids) == 20 * (1 + dim)
    assert len(set(ids)) == len(ids)
