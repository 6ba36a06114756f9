"""Exact linear solving over the rationals with pluggable right-hand sides.

Right-hand sides only need addition, subtraction, scaling by Fraction, and
truthiness (nonzero test); both ``Fraction`` and ``GradedExpression`` qualify.
Variables are arbitrary hashable labels.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Hashable, Iterable


@dataclass
class LinearSolveResult:
    """Outcome of Gaussian elimination on a sparse rational system."""

    solved: dict[Hashable, Any] = field(default_factory=dict)
    #: Equations whose left side vanished but right side did not:
    #: 0 = rhs facts forced on the right-hand-side data.
    forced: list[Any] = field(default_factory=list)
    free: set[Hashable] = field(default_factory=set)
    #: Echelon rows still relating several variables, as (pivot, coeffs, rhs)
    #: meaning pivot + sum coeffs[v]*v = rhs.
    relations: list[tuple[Hashable, dict[Hashable, Fraction], Any]] = field(default_factory=list)

    def particular_solution(self) -> dict[Hashable, Any]:
        """One full assignment: solved values, relation pivots at rhs, rest zero."""
        out = dict(self.solved)
        for pivot, _coeffs, rhs in self.relations:
            out[pivot] = rhs
        return out

    @property
    def consistent_over_rationals(self) -> bool:
        """True when no forced equation has a purely rational nonzero rhs."""
        return not any(isinstance(r, Fraction) and r for r in self.forced)


def solve_sparse(
    equations: Iterable[tuple[dict[Hashable, Fraction], Any]],
    zero: Any = Fraction(0),
) -> LinearSolveResult:
    """Solve lhs·vars = rhs equations; lhs maps variable -> coefficient.

    Convention: an input pair (coeffs, rhs) encodes sum_v coeffs[v]*v = rhs.
    Solved variables are expressed purely in right-hand-side data (all
    variables eliminated from the reported solutions).
    """
    rows: list[tuple[dict[Hashable, Fraction], Any]] = []
    for coeffs, rhs in equations:
        rows.append(({v: c for v, c in coeffs.items() if c}, rhs))

    pivots: list[tuple[Hashable, dict[Hashable, Fraction], Any]] = []
    forced: list[Any] = []
    seen_vars: set[Hashable] = set()

    for coeffs, rhs in rows:
        seen_vars.update(coeffs)
        coeffs = dict(coeffs)
        # Reduce against existing pivots.
        for pv, pcoeffs, prhs in pivots:
            c = coeffs.get(pv)
            if c:
                del coeffs[pv]
                for v, pc in pcoeffs.items():
                    nv = coeffs.get(v, Fraction(0)) - c * pc
                    if nv:
                        coeffs[v] = nv
                    elif v in coeffs:
                        del coeffs[v]
                rhs = rhs - prhs * c
        if not coeffs:
            if rhs:
                forced.append(rhs)
            continue
        # Normalize on a deterministic pivot choice.
        pv = sorted(coeffs, key=repr)[0]
        inv = Fraction(1) / coeffs.pop(pv)
        coeffs = {v: c * inv for v, c in coeffs.items()}
        rhs = rhs * inv
        # Back-substitute into earlier pivots to reach reduced echelon form.
        newpivots = []
        for qv, qcoeffs, qrhs in pivots:
            c = qcoeffs.get(pv)
            if c:
                qcoeffs = dict(qcoeffs)
                del qcoeffs[pv]
                for v, pc in coeffs.items():
                    nv = qcoeffs.get(v, Fraction(0)) - c * pc
                    if nv:
                        qcoeffs[v] = nv
                    elif v in qcoeffs:
                        del qcoeffs[v]
                qrhs = qrhs - rhs * c
            newpivots.append((qv, qcoeffs, qrhs))
        pivots = newpivots
        pivots.append((pv, coeffs, rhs))

    solved: dict[Hashable, Any] = {}
    relations: list[tuple[Hashable, dict[Hashable, Fraction], Any]] = []
    underdetermined: set[Hashable] = set()
    for pv, coeffs, rhs in pivots:
        if coeffs:
            underdetermined.add(pv)
            underdetermined.update(coeffs)
            relations.append((pv, dict(coeffs), rhs))
        else:
            solved[pv] = rhs
    free = (seen_vars - set(solved)) | underdetermined
    return LinearSolveResult(solved=solved, forced=forced, free=free, relations=relations)


def rref_rational(rows: list[list[Fraction]]) -> tuple[list[list[Fraction]], list[int]]:
    """Reduced row echelon form of a dense rational matrix; returns pivots."""
    mat = [row[:] for row in rows]
    nrows = len(mat)
    ncols = len(mat[0]) if mat else 0
    pivots: list[int] = []
    r = 0
    for c in range(ncols):
        piv = next((i for i in range(r, nrows) if mat[i][c]), None)
        if piv is None:
            continue
        mat[r], mat[piv] = mat[piv], mat[r]
        inv = Fraction(1) / mat[r][c]
        mat[r] = [v * inv for v in mat[r]]
        for i in range(nrows):
            if i != r and mat[i][c]:
                f = mat[i][c]
                mat[i] = [v - f * w for v, w in zip(mat[i], mat[r])]
        pivots.append(c)
        r += 1
        if r == nrows:
            break
    return mat, pivots


def kernel_basis(rows: list[list[Fraction]]) -> list[list[Fraction]]:
    """Rational basis of the null space of the given matrix."""
    if not rows:
        return []
    mat, pivots = rref_rational(rows)
    ncols = len(rows[0])
    free_cols = [c for c in range(ncols) if c not in pivots]
    basis = []
    for fc in free_cols:
        vec = [Fraction(0)] * ncols
        vec[fc] = Fraction(1)
        for r, pc in enumerate(pivots):
            vec[pc] = -mat[r][fc]
        basis.append(vec)
    return basis
