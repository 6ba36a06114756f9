"""Finite Lie algebras read off from homological tables at curvature zero.

Setting every curvature-tower generator to zero turns the degree-1 sector
of a fiber table into a Chevalley-Eilenberg differential, from which exact
rational structure constants are extracted and certified against the Jacobi
identity.  Independent oracles realize the expected algebras as explicit
matrices in a basis adapted to the null split of the boundary coordinates,
so a match is an explicit generator-by-generator dictionary rather than an
abstract invariant comparison.  Invariants (derived series, Killing form)
are computed only to explain a mismatch.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations

from gpdekit.algebra import GradedExpression, Substitution
from gpdekit.linalg import rref_rational, solve_sparse
from gpdekit.models import ModelSpec

Matrix = tuple[tuple[Fraction, ...], ...]
GenKey = tuple[str, tuple[int, ...]]


class LieError(Exception):
    """Extraction or matching cannot proceed."""


# -- presentations ----------------------------------------------------------


@dataclass
class LiePresentation:
    """Structure constants over a labelled basis.

    ``brackets[(j, k)]`` with j < k maps a target index i to the rational
    coefficient of basis element i in [e_j, e_k]; omitted pairs commute.
    ``keys`` carries machine-readable (name, indices) tags used by the
    oracle matcher, ``labels`` the printable forms.
    """

    labels: list[str]
    keys: list[GenKey]
    brackets: dict[tuple[int, int], dict[int, Fraction]]
    convention: str = "plain"

    @property
    def dim(self) -> int:
        return len(self.labels)

    def structure_constant(self, i: int, j: int, k: int) -> Fraction:
        if j == k:
            return Fraction(0)
        if j < k:
            return self.brackets.get((j, k), {}).get(i, Fraction(0))
        return -self.brackets.get((k, j), {}).get(i, Fraction(0))

    def bracket_vector(self, j: int, k: int) -> list[Fraction]:
        return [self.structure_constant(i, j, k) for i in range(self.dim)]

    def jacobi_defects(self, limit: int = 10) -> list[tuple[int, int, int, int]]:
        """Index quadruples (i, j, k, l) where the cyclic sum is nonzero."""
        n = self.dim
        out = []
        for j, k, l in combinations(range(n), 3):
            for i in range(n):
                total = Fraction(0)
                for m in range(n):
                    total += self.structure_constant(m, j, k) * self.structure_constant(i, m, l)
                    total += self.structure_constant(m, k, l) * self.structure_constant(i, m, j)
                    total += self.structure_constant(m, l, j) * self.structure_constant(i, m, k)
                if total:
                    out.append((i, j, k, l))
                    if len(out) >= limit:
                        return out
        return out

    def killing_matrix(self) -> list[list[Fraction]]:
        n = self.dim
        out = [[Fraction(0)] * n for _ in range(n)]
        for i in range(n):
            for j in range(i, n):
                val = Fraction(0)
                for m in range(n):
                    for l in range(n):
                        val += self.structure_constant(m, i, l) * self.structure_constant(l, j, m)
                out[i][j] = val
                out[j][i] = val
        return out

    def derived_series_dims(self, max_steps: int = 8) -> list[int]:
        """Dimensions of L, [L, L], [[L, L], [L, L]], ... until stable."""
        n = self.dim
        span = [[Fraction(1) if c == r else Fraction(0) for c in range(n)] for r in range(n)]
        dims = [n]
        for _ in range(max_steps):
            prods = []
            for u in span:
                for v in span:
                    vec = [Fraction(0)] * n
                    for j in range(n):
                        if not u[j]:
                            continue
                        for k in range(n):
                            if not v[k]:
                                continue
                            c = u[j] * v[k]
                            for i, f in enumerate(self.bracket_vector(j, k)):
                                if f:
                                    vec[i] += c * f
                    if any(vec):
                        prods.append(vec)
            if not prods:
                dims.append(0)
                break
            reduced, pivots = rref_rational(prods)
            span = reduced[: len(pivots)]
            dims.append(len(pivots))
            if dims[-1] == dims[-2]:
                break
        return dims


def symmetric_signature(mat: list[list[Fraction]]) -> tuple[int, int, int]:
    """(positive, negative, null) inertia of a rational symmetric matrix."""
    a = [row[:] for row in mat]
    n = len(a)
    pos = neg = 0
    done = 0
    while done < n:
        piv = next((i for i in range(done, n) if a[i][i]), None)
        if piv is None:
            off = next(
                ((i, j) for i in range(done, n) for j in range(i + 1, n) if a[i][j]),
                None,
            )
            if off is None:
                break
            i, j = off
            for c in range(n):
                a[i][c] += a[j][c]
            for r in range(n):
                a[r][i] += a[r][j]
            piv = i
        if piv != done:
            a[done], a[piv] = a[piv], a[done]
            for r in range(n):
                a[r][done], a[r][piv] = a[r][piv], a[r][done]
        d = a[done][done]
        if d > 0:
            pos += 1
        else:
            neg += 1
        for r in range(done + 1, n):
            if a[r][done]:
                factor = a[r][done] / d
                for c in range(n):
                    a[r][c] -= factor * a[done][c]
                for rr in range(n):
                    a[rr][r] -= factor * a[rr][done]
        done += 1
    return pos, neg, n - pos - neg


# -- extraction from a fiber table -------------------------------------------


def curvature_zero_limit(model: ModelSpec) -> LiePresentation:
    """Read structure constants off the degree-1 table with curvatures killed.

    Every entry must become purely quadratic in the degree-1 basis after the
    tower generators are substituted by zero; any surviving foreign factor
    means the table is not a Chevalley-Eilenberg differential and raises.
    The sign convention for reading f off Q c = -(1/2) f c c follows the
    model's orientation flag.  Jacobi is certified before returning.
    """
    alg = model.alg
    if model.curvature is None:
        raise LieError(f"model {model.name!r} declares no curvature family")
    gens = sorted(g for g in model.declared_generators() if alg.ghost_of(g) == 1)
    if not gens:
        raise LieError(f"model {model.name!r} has no degree-1 generators")
    index = {g: i for i, g in enumerate(gens)}

    kill = {}
    for gid in gens:
        for mono in model.q.of(gid).terms:
            for g in mono:
                if g not in kill and model.curvature.is_member(g):
                    kill[g] = alg.zero()
    drop = Substitution(alg, kill, label="curvature zero")

    # Reading Q c = -(1/2) f c c with f antisymmetric: the stored coefficient
    # of an ordered pair monomial already absorbs both f slots, so the
    # structure constant is minus that coefficient (plus under the flipped
    # orientation).  Stored monomials follow the algebra's canonical order,
    # which need not agree with the basis enumeration, hence the swap sign.
    sign = Fraction(1) if model.metadata.get("sign_flag") == "flipped" else Fraction(-1)
    brackets: dict[tuple[int, int], dict[int, Fraction]] = {}
    for gid in gens:
        i = index[gid]
        entry = drop(model.q.of(gid))
        for mono, coeff in entry.terms.items():
            if len(mono) != 2 or mono[0] not in index or mono[1] not in index:
                bad = " ".join(alg.display(g) for g in mono)
                raise LieError(
                    f"entry for {alg.display(gid)} keeps non-algebra factor"
                    f" {bad!r} at curvature zero"
                )
            j, k = index[mono[0]], index[mono[1]]
            val = sign * coeff
            if j > k:
                j, k, val = k, j, -val
            pair = brackets.setdefault((j, k), {})
            pair[i] = pair.get(i, Fraction(0)) + val
    brackets = {
        jk: {i: c for i, c in tgt.items() if c}
        for jk, tgt in brackets.items()
        if any(tgt.values())
    }

    pres = LiePresentation(
        labels=[alg.display(g) for g in gens],
        keys=[(alg.gen(g).name, alg.gen(g).indices) for g in gens],
        brackets=brackets,
        convention=model.metadata.get("sign_flag", "plain"),
    )
    defects = pres.jacobi_defects(limit=3)
    if defects:
        raise LieError(f"extracted constants violate Jacobi at {defects}")
    return pres


# -- matrix oracles -----------------------------------------------------------


def _zeros(n: int) -> list[list[Fraction]]:
    return [[Fraction(0)] * n for _ in range(n)]


def _freeze(rows: list[list[Fraction]]) -> Matrix:
    return tuple(tuple(row) for row in rows)


def _commutator(a: Matrix, b: Matrix) -> Matrix:
    n = len(a)
    out = _zeros(n)
    for i in range(n):
        for j in range(n):
            val = Fraction(0)
            for k in range(n):
                val += a[i][k] * b[k][j] - b[i][k] * a[k][j]
            out[i][j] = val
    return _freeze(out)


def _rotation_matrix(n: int, form: list[Fraction], a: int, b: int) -> Matrix:
    """(M_ab)^c_d = delta^c_a form_bd - delta^c_b form_ad for a diagonalish form."""
    out = _zeros(n)
    for d in range(len(form)):
        out[a][d] += _form_entry(form, b, d)
        out[b][d] -= _form_entry(form, a, d)
    return _freeze(out)


def _form_entry(form: list[Fraction], i: int, j: int) -> Fraction:
    # Index 0 pairs with index 1 as a null couple when form[0] is None-coded
    # by a stored 0; the transverse block is diagonal.
    if {i, j} == {0, 1} and form[0] == 0 == form[1]:
        return Fraction(1)
    if i == j:
        return form[i]
    return Fraction(0)


def _null_pair_form(transverse: list[Fraction]) -> list[Fraction]:
    """Bilinear form with a null pair in slots 0, 1 and a diagonal rest."""
    return [Fraction(0), Fraction(0)] + list(transverse)


@dataclass
class OracleAlgebra:
    name: str
    keys: list[GenKey]
    matrices: list[Matrix]
    presentation: LiePresentation


def _presentation_from_matrices(name: str, keys: list[GenKey], mats: list[Matrix]) -> LiePresentation:
    n = len(mats)
    size = len(mats[0])
    brackets: dict[tuple[int, int], dict[int, Fraction]] = {}
    for j in range(n):
        for k in range(j + 1, n):
            comm = _commutator(mats[j], mats[k])
            equations = []
            for r in range(size):
                for c in range(size):
                    coeffs = {i: mats[i][r][c] for i in range(n) if mats[i][r][c]}
                    equations.append((coeffs, comm[r][c]))
            res = solve_sparse(equations)
            if any(isinstance(v, Fraction) and v for v in res.forced):
                raise LieError(f"{name}: commutator [{j},{k}] leaves the basis span")
            tgt = {
                i: v for i, v in res.particular_solution().items() if v
            }
            if tgt:
                brackets[(j, k)] = tgt
    return LiePresentation(
        labels=[f"{nm}{list(ix)}" for nm, ix in keys],
        keys=keys,
        brackets=brackets,
        convention="matrix",
    )


def _orthogonal_oracle(name: str, form: list[Fraction]) -> OracleAlgebra:
    n = len(form)
    keys: list[GenKey] = []
    mats: list[Matrix] = []
    for a in range(n):
        for b in range(a + 1, n):
            keys.append(("M", (a, b)))
            mats.append(_rotation_matrix(n, form, a, b))
    return OracleAlgebra(name, keys, mats, _presentation_from_matrices(name, keys, mats))


def _poincare_oracle(name: str, form: list[Fraction]) -> OracleAlgebra:
    n = len(form)
    keys: list[GenKey] = []
    mats: list[Matrix] = []
    for a in range(n):
        for b in range(a + 1, n):
            keys.append(("M", (a, b)))
            rot = _rotation_matrix(n, form, a, b)
            mats.append(_freeze([list(row) + [Fraction(0)] for row in rot] + [[Fraction(0)] * (n + 1)]))
    for a in range(n):
        keys.append(("P", (a,)))
        mat = _zeros(n + 1)
        mat[a][n] = Fraction(1)
        mats.append(_freeze(mat))
    return OracleAlgebra(name, keys, mats, _presentation_from_matrices(name, keys, mats))


_TARGET_RE = re.compile(r"^\s*(iso|o)\s*\(\s*(\d+)\s*,\s*(\d+)\s*\)\s*$")


def oracle_presentation(target: str) -> OracleAlgebra:
    """Matrix oracle for iso(p,1) or o(p,q), in the null-split basis.

    Slots 0 and 1 of the defining representation form the null couple;
    the transverse block is diagonal.  The transverse signs are chosen so
    the full form has the requested signature (as always, only up to the
    overall sign, which does not change the algebra).
    """
    m = _TARGET_RE.match(target)
    if m is None:
        raise LieError(f"cannot parse target algebra {target!r}")
    family, p, q = m.group(1), int(m.group(2)), int(m.group(3))
    if family == "iso":
        if q != 1:
            raise LieError(f"only Poincare-type iso(p,1) oracles are built, got {target!r}")
        transverse = [Fraction(-1)] * (p - 1)
        oracle = _poincare_oracle(target, _null_pair_form(transverse))
        expect = (p + 1) * p // 2 + (p + 1)
    else:
        # The null couple contributes one plus and one minus; the transverse
        # diagonal supplies the rest of the requested inertia.  The overall
        # sign of a bilinear form does not change its orthogonal algebra, so
        # the signs are laid out minority-first to align with the timelike-
        # leading convention of the reduced bases.
        transverse = [Fraction(1)] * (q - 1) + [Fraction(-1)] * (p - 1)
        oracle = _orthogonal_oracle(target, _null_pair_form(transverse))
        expect = (p + q) * (p + q - 1) // 2
    if oracle.presentation.dim != expect:
        raise LieError(
            f"oracle {target!r} has dimension {oracle.presentation.dim}, expected {expect}"
        )
    return oracle


# -- matching -----------------------------------------------------------------


@dataclass
class MatchVerdict:
    isomorphic: bool
    target: str
    basis_map: dict[str, tuple[Fraction, str]] = field(default_factory=dict)
    diagnostics: list[str] = field(default_factory=list)

    def __str__(self) -> str:
        if self.isomorphic:
            return f"isomorphic to {self.target} via explicit map"
        return f"mismatch with {self.target}: " + "; ".join(self.diagnostics)


def _invariant_diagnostics(p: LiePresentation, o: LiePresentation, target: str) -> list[str]:
    out = []
    if p.dim != o.dim:
        out.append(f"dimension {p.dim} vs {o.dim}")
        return out
    dp, do = p.derived_series_dims(), o.derived_series_dims()
    if dp != do:
        out.append(f"derived series {dp} vs {do}")
    kp, ko = p.killing_matrix(), o.killing_matrix()
    sp, so = symmetric_signature(kp), symmetric_signature(ko)
    if sp[2] != so[2]:
        out.append(f"Killing form rank {p.dim - sp[2]} vs {o.dim - so[2]}")
    elif sp != so:
        out.append(f"Killing form inertia {sp} vs {so}")
    if not out:
        out.append("invariants agree; no generator dictionary found")
    return out


def _candidate_map(
    p: LiePresentation, oracle: OracleAlgebra, plus: int
) -> dict[int, int] | None:
    """Name-based dictionary from extracted generators to oracle slots.

    ``plus`` picks which member of the null couple plays the expanding
    role (the other one contracts); both choices are tried by the caller.
    Rotation indices carry over directly when the extracted basis already
    lives in the null-split labelling (Poincare targets) and shift past
    the couple otherwise.
    """
    has_p = any(nm == "P" for nm, _ in oracle.keys)
    shift = 0 if has_p else 1
    minus = 1 - plus
    slot = {key: pos for pos, key in enumerate(oracle.keys)}

    def want(key: GenKey) -> GenKey | None:
        nm, ix = key
        if nm == "rho":
            return ("M", tuple(sorted(i + shift for i in ix)))
        if nm == "lam":
            return ("M", (0, 1))
        if has_p:
            if nm == "xi" and ix[0] == 1:
                return ("P", (plus,))
            if nm == "lamv" and ix[0] == 1:
                return ("P", (minus,))
            if nm == "cA":
                return ("P", ix)
        if nm == "xi":
            return ("M", tuple(sorted((plus, ix[0] + shift))))
        if nm == "lamv":
            return ("M", tuple(sorted((minus, ix[0] + shift))))
        return None

    out: dict[int, int] = {}
    for i, key in enumerate(p.keys):
        tgt = want(key)
        if tgt is None or tgt not in slot:
            return None
        out[i] = slot[tgt]
    if len(set(out.values())) != len(out):
        return None
    return out


def _solve_scalings(
    p: LiePresentation, o: LiePresentation, corr: dict[int, int]
) -> list[Fraction] | None:
    """Diagonal rescaling making the correspondence a homomorphism.

    Each nonzero bracket coefficient yields a multiplicative relation
    s_j s_k g = f s_i; relations are propagated from an arbitrary seed until
    every scale is pinned, then the full table is verified by the caller.
    """
    n = p.dim
    back = {v: kk for kk, v in corr.items()}
    relations = []
    for j in range(n):
        for k in range(j + 1, n):
            fv = p.bracket_vector(j, k)
            oj, ok = corr[j], corr[k]
            raw = o.brackets.get((min(oj, ok), max(oj, ok)), {})
            flip = -1 if oj > ok else 1
            gv = [Fraction(0)] * n
            for oi, c in raw.items():
                bi = back.get(oi)
                if bi is None:
                    return None
                gv[bi] = flip * c
            for i in range(n):
                if bool(fv[i]) != bool(gv[i]):
                    return None
                if fv[i]:
                    relations.append((i, j, k, fv[i], gv[i]))
    # Valid rescalings form a torus, so propagation alone can starve: any
    # still-free scale is then seeded to one and propagation resumes.  No
    # relation is quadratic in a single scale (the pair indices are strict),
    # so seeding a free coordinate never forecloses a solution; the final
    # verification pass rejects inconsistent seeds anyway.
    scale: list[Fraction | None] = [None] * n
    while True:
        free = next((i for i, s in enumerate(scale) if s is None), None)
        if free is None:
            break
        scale[free] = Fraction(1)
        changed = True
        while changed:
            changed = False
            for i, j, k, f, g in relations:
                si, sj, sk = scale[i], scale[j], scale[k]
                if sj is not None and sk is not None and si is None:
                    scale[i] = sj * sk * g / f
                elif si is not None and sk is not None and sj is None and i != j:
                    scale[j] = f * si / (sk * g)
                elif si is not None and sj is not None and sk is None and i != k:
                    scale[k] = f * si / (sj * g)
                else:
                    continue
                changed = True
    result = [Fraction(1) if s is None else s for s in scale]
    for i, j, k, f, g in relations:
        if result[j] * result[k] * g != f * result[i]:
            return None
    return result


def match_lie_algebra(p: LiePresentation, target: str) -> MatchVerdict:
    """Compare a presentation against the named oracle.

    Success means an explicit invertible dictionary basis -> scaled oracle
    basis under which every bracket coefficient agrees exactly.  On failure
    the verdict carries the first distinguishing invariant instead.
    """
    oracle = oracle_presentation(target)
    o = oracle.presentation
    if p.dim != o.dim:
        return MatchVerdict(False, target, diagnostics=[f"dimension {p.dim} vs {o.dim}"])
    for plus in (0, 1):
        corr = _candidate_map(p, oracle, plus)
        if corr is None:
            continue
        scales = _solve_scalings(p, o, corr)
        if scales is not None:
            basis_map = {
                p.labels[i]: (scales[i], o.labels[corr[i]]) for i in range(p.dim)
            }
            return MatchVerdict(True, target, basis_map=basis_map)
    return MatchVerdict(False, target, diagnostics=_invariant_diagnostics(p, o, target))
