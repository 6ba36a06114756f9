"""Curvature-type generator families with algebraic index symmetries.

Components W_{bcde;(s)} are stored all-lower with a plain-symmetric
derivative tower.  Only metric-independent symmetries are imposed:
antisymmetry within each index pair, exchange of the pairs, and the cyclic
first-pair identity W_{b[cde]} = 0.  Traces are deliberately left loose (the
stored family is overcomplete in that direction); raising an index is the
caller's business via an inverse metric.

Canonicalization happens in two stages: the 8-element sign group is handled
combinatorially (orbit minimum with tracked sign), and the cyclic identity
by a small exact row reduction computed once per dimension, expressing
non-free orbit representatives through the free ones.
"""

from __future__ import annotations

from fractions import Fraction
from itertools import combinations, combinations_with_replacement

from gpdekit.algebra import GradedAlgebra, GradedExpression
from gpdekit.jets import JetOrderError
from gpdekit.linalg import rref_rational

#: The pair-symmetry group: permutation of (0,1,2,3) slots plus its sign.
_PAIR_GROUP = (
    ((0, 1, 2, 3), 1),
    ((1, 0, 2, 3), -1),
    ((0, 1, 3, 2), -1),
    ((1, 0, 3, 2), 1),
    ((2, 3, 0, 1), 1),
    ((3, 2, 0, 1), -1),
    ((2, 3, 1, 0), -1),
    ((3, 2, 1, 0), 1),
)


def pair_canonical(idx: tuple[int, int, int, int]) -> tuple[int, tuple[int, int, int, int]] | None:
    """Minimal representative under the pair symmetries, or None if zero."""
    if idx[0] == idx[1] or idx[2] == idx[3]:
        return None
    best: tuple[int, int, int, int] | None = None
    best_sign = 1
    seen: dict[tuple[int, int, int, int], int] = {}
    for perm, sign in _PAIR_GROUP:
        img = (idx[perm[0]], idx[perm[1]], idx[perm[2]], idx[perm[3]])
        prior = seen.get(img)
        if prior is not None and prior != sign:
            return None  # the component is forced to vanish
        seen[img] = sign
        if best is None or img < best:
            best, best_sign = img, sign
    assert best is not None
    return best_sign, best


class CurvatureFamily:
    """Riemann-symmetric generator family over a fixed index alphabet."""

    def __init__(self, alg: GradedAlgebra, name: str, dim: int, order: int) -> None:
        self.alg = alg
        self.name = name
        self.dim = dim
        self.order = order
        reps = sorted(
            {
                pc[1]
                for idx in combinations_with_replacement(range(dim), 4)
                for perm in _all_orderings(idx)
                if (pc := pair_canonical(perm)) is not None
            }
        )
        self._rep_pos = {r: i for i, r in enumerate(reps)}
        self._reps = reps
        # Cyclic identity rows: W_{a b c d} + W_{a c d b} + W_{a d b c} = 0
        # for distinct b < c < d and any a.
        rows: list[list[Fraction]] = []
        for a in range(dim):
            for b, c, d in combinations(range(dim), 3):
                row = [Fraction(0)] * len(reps)
                nonzero = False
                for quad in ((a, b, c, d), (a, c, d, b), (a, d, b, c)):
                    pc = pair_canonical(quad)
                    if pc is None:
                        continue
                    sign, rep = pc
                    row[self._rep_pos[rep]] += sign
                    nonzero = True
                if nonzero and any(row):
                    rows.append(row)
        solved: dict[tuple[int, int, int, int], list[tuple[Fraction, tuple]]] = {}
        if rows:
            mat, pivots = rref_rational(rows)
            for r, pc_col in enumerate(pivots):
                combo = [
                    (-mat[r][c], self._reps[c])
                    for c in range(len(reps))
                    if c != pc_col and mat[r][c]
                ]
                solved[self._reps[pc_col]] = combo
        self._solved = solved
        self.free_reps = [r for r in reps if r not in solved]

    def component_count(self) -> int:
        return len(self.free_reps)

    def gen_id(self, rep: tuple[int, int, int, int], deriv: tuple[int, ...] = ()) -> int:
        if rep not in self._rep_pos or rep in self._solved:
            raise ValueError(f"{rep} is not a free representative")
        return self.alg.generator(self.name, rep, 0, tuple(sorted(deriv)))

    def lower(self, idx, deriv=()) -> GradedExpression:
        """Component W_{idx;(deriv)} as a combination of free generators."""
        dv = tuple(sorted(deriv))
        if len(dv) > self.order:
            raise JetOrderError(
                f"{self.name} tower at {idx};{dv} exceeds order {self.order}"
            )
        pc = pair_canonical(tuple(idx))
        if pc is None:
            return self.alg.zero()
        sign, rep = pc
        combo = self._solved.get(rep)
        if combo is None:
            return self.alg.of_gen(self.gen_id(rep, dv), sign)
        return self.alg.from_terms(
            (sign * c, [self.gen_id(r, dv)]) for c, r in combo
        )

    def tower_ids(self, max_order: int | None = None) -> list[int]:
        """All free generator ids with derivative depth up to the ceiling."""
        top = self.order if max_order is None else max_order
        out: list[int] = []
        for k in range(top + 1):
            for deriv in combinations_with_replacement(range(self.dim), k):
                for rep in self.free_reps:
                    out.append(self.gen_id(rep, deriv))
        return out

    def is_member(self, gid: int) -> bool:
        return self.alg.gen(gid).name == self.name


def _all_orderings(idx: tuple[int, ...]):
    """Distinct permutations of a sorted multiset of 4 indices."""
    from itertools import permutations

    return set(permutations(idx))
