"""Exact arithmetic in Z-graded supercommutative polynomial algebras.

Generators carry an integer ghost degree; parity is ghost mod 2.  Monomials
are kept in a canonical order (sorted by generator key) with Koszul signs
absorbed into the coefficient, odd generators never repeated, and zero
coefficients dropped.  All coefficients are ``fractions.Fraction``; nothing
here ever touches a float.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Iterator, Mapping, Union

Rat = Union[Fraction, int]
Monomial = tuple[int, ...]

#: Ghost grade of an expression: an integer for homogeneous expressions,
#: or one of the two sentinel strings.
Grade = Union[int, str]

GRADE_ZERO = "zero"
GRADE_MIXED = "inhomogeneous"


class AlgebraError(Exception):
    """Raised for structurally invalid algebra operations."""


class GradingError(AlgebraError):
    """Raised when an operation would violate the grading contract."""


@dataclass(frozen=True)
class GradedGenerator:
    """A single generator: a named symbol with index decorations.

    ``indices`` are the tensor slots; ``deriv`` is the symmetric derivative
    multi-index for jet-type generators (empty for plain symbols).  The pair
    (name, indices, deriv) is unique inside an algebra.  Parity is not stored:
    it is ghost mod 2 by convention.
    """

    name: str
    indices: tuple[int, ...] = ()
    ghost: int = 0
    deriv: tuple[int, ...] = ()

    @property
    def parity(self) -> int:
        return self.ghost % 2

    def sort_key(self) -> tuple:
        # Global canonical order: ghost first, then name, then decorations.
        return (self.ghost, self.name, self.indices, self.deriv)

    def display(self, index_names: Callable[[int], str] | None = None) -> str:
        nm = index_names or str
        out = self.name
        if self.indices:
            out += "[" + ",".join(nm(i) for i in self.indices) + "]"
        if self.deriv:
            if not self.indices:
                out += "[;" + ",".join(nm(i) for i in self.deriv) + "]"
            else:
                out = out[:-1] + ";" + ",".join(nm(i) for i in self.deriv) + "]"
        return out


class GradedAlgebra:
    """Registry of generators plus expression constructors.

    Generators are interned and addressed by small integer ids.  Ids reflect
    registration order, which is arbitrary; every canonical form sorts by the
    intrinsic generator key instead, so lazy registration (jets created on
    demand) cannot perturb normal forms.
    """

    def __init__(self, label: str = "") -> None:
        self.label = label
        self._gens: list[GradedGenerator] = []
        self._keys: list[tuple] = []
        self._parities: list[int] = []
        self._ghosts: list[int] = []
        self._ids: dict[GradedGenerator, int] = {}
        self._by_symbol: dict[tuple, int] = {}
        # Optional display table for index values, set by model builders.
        self.index_names: dict[int, str] = {}

    # -- registry ----------------------------------------------------------

    def generator(
        self,
        name: str,
        indices: Iterable[int] = (),
        ghost: int = 0,
        deriv: Iterable[int] = (),
    ) -> int:
        gen = GradedGenerator(name, tuple(indices), ghost, tuple(deriv))
        got = self._ids.get(gen)
        if got is not None:
            return got
        symbol = (gen.name, gen.indices, gen.deriv)
        prior = self._by_symbol.get(symbol)
        if prior is not None:
            raise AlgebraError(
                f"generator {gen.display()} re-registered with ghost {ghost} "
                f"(was {self._ghosts[prior]})"
            )
        gid = len(self._gens)
        self._gens.append(gen)
        self._keys.append(gen.sort_key())
        self._parities.append(gen.parity)
        self._ghosts.append(gen.ghost)
        self._ids[gen] = gid
        self._by_symbol[symbol] = gid
        return gid

    def gen(self, gid: int) -> GradedGenerator:
        return self._gens[gid]

    def ghost_of(self, gid: int) -> int:
        return self._ghosts[gid]

    def parity_of(self, gid: int) -> int:
        return self._parities[gid]

    def display(self, gid: int) -> str:
        names = self.index_names
        return self._gens[gid].display((lambda i: names.get(i, str(i))) if names else None)

    def __len__(self) -> int:
        return len(self._gens)

    def all_ids(self) -> range:
        return range(len(self._gens))

    # -- monomial plumbing --------------------------------------------------

    def sort_monomial(self, gids: Iterable[int]) -> tuple[int, Monomial] | None:
        """Canonicalize a raw generator sequence.

        Returns (sign, sorted tuple), or None when the monomial vanishes
        because an odd generator repeats.  The sign is the Koszul sign of the
        permutation taking the input order to canonical order: -1 per
        odd-odd inversion.
        """
        seq = list(gids)
        keys = self._keys
        par = self._parities
        # Insertion sort; fine at the arities that occur here (<= ~10).
        sign = 1
        for i in range(1, len(seq)):
            g = seq[i]
            kg = keys[g]
            j = i - 1
            crossed_odd = 0
            while j >= 0 and keys[seq[j]] > kg:
                seq[j + 1] = seq[j]
                if par[seq[j]]:
                    crossed_odd += 1
                j -= 1
            seq[j + 1] = g
            if par[g] and (crossed_odd & 1):
                sign = -sign
        for a, b in zip(seq, seq[1:]):
            if a == b and par[a]:
                return None
        return sign, tuple(seq)

    def merge_monomials(self, m1: Monomial, m2: Monomial) -> tuple[int, Monomial] | None:
        """Product of two canonical monomials: merged order plus Koszul sign."""
        if not m1:
            return 1, m2
        if not m2:
            return 1, m1
        keys = self._keys
        par = self._parities
        odd_left = 0  # odd generators of m1 not yet emitted
        for g in m1:
            odd_left += par[g]
        out: list[int] = []
        sign = 1
        i = j = 0
        n1, n2 = len(m1), len(m2)
        while i < n1 and j < n2:
            a, b = m1[i], m2[j]
            if a == b and par[a]:
                return None
            if keys[a] <= keys[b]:
                out.append(a)
                odd_left -= par[a]
                i += 1
            else:
                out.append(b)
                if par[b] and (odd_left & 1):
                    sign = -sign
                j += 1
        if i < n1:
            tail = m1[i:]
            for a, b in zip(tail, tail[1:]):
                if a == b and par[a]:
                    return None
            out.extend(tail)
        if j < n2:
            tail = m2[j:]
            for a, b in zip(tail, tail[1:]):
                if a == b and par[a]:
                    return None
            out.extend(tail)
        # Adjacent equal odd generators across the seam.
        for a, b in zip(out, out[1:]):
            if a == b and par[a]:
                return None
        return sign, tuple(out)

    def monomial_ghost(self, m: Monomial) -> int:
        gh = self._ghosts
        return sum(gh[g] for g in m)

    def monomial_parity(self, m: Monomial) -> int:
        par = self._parities
        return sum(par[g] for g in m) & 1

    def monomial_order_key(self, m: Monomial) -> tuple:
        """Graded-lexicographic term order key (bigger key = leading)."""
        keys = self._keys
        return (len(m), tuple(keys[g] for g in m))

    # -- expression constructors --------------------------------------------

    def zero(self) -> "GradedExpression":
        return GradedExpression(self, {})

    def one(self) -> "GradedExpression":
        return GradedExpression(self, {(): Fraction(1)})

    def scalar(self, c: Rat) -> "GradedExpression":
        c = Fraction(c)
        return GradedExpression(self, {(): c} if c else {})

    def of_gen(self, gid: int, coeff: Rat = 1) -> "GradedExpression":
        c = Fraction(coeff)
        return GradedExpression(self, {(gid,): c} if c else {})

    def from_terms(self, terms: Iterable[tuple[Rat, Iterable[int]]]) -> "GradedExpression":
        acc: dict[Monomial, Fraction] = {}
        for coeff, gids in terms:
            c = Fraction(coeff)
            if not c:
                continue
            sm = self.sort_monomial(gids)
            if sm is None:
                continue
            sign, mono = sm
            c = c if sign > 0 else -c
            prev = acc.get(mono)
            if prev is None:
                acc[mono] = c
            else:
                tot = prev + c
                if tot:
                    acc[mono] = tot
                else:
                    del acc[mono]
        return GradedExpression(self, acc)


class GradedExpression:
    """Normal-form polynomial over a GradedAlgebra.

    Internally a dict {canonical monomial: Fraction}, no zero entries.
    Instances are treated as immutable; arithmetic returns new objects.
    """

    __slots__ = ("alg", "terms")

    def __init__(self, alg: GradedAlgebra, terms: dict[Monomial, Fraction]) -> None:
        self.alg = alg
        self.terms = terms

    # -- basic queries -------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def __bool__(self) -> bool:
        return bool(self.terms)

    def __len__(self) -> int:
        return len(self.terms)

    def grade(self) -> Grade:
        if not self.terms:
            return GRADE_ZERO
        ghosts = {self.alg.monomial_ghost(m) for m in self.terms}
        if len(ghosts) == 1:
            return ghosts.pop()
        return GRADE_MIXED

    def constant_value(self) -> Fraction | None:
        """The rational value if the expression is a constant, else None."""
        if not self.terms:
            return Fraction(0)
        if len(self.terms) == 1 and () in self.terms:
            return self.terms[()]
        return None

    def generators_present(self) -> set[int]:
        out: set[int] = set()
        for m in self.terms:
            out.update(m)
        return out

    def leading(self) -> tuple[Monomial, Fraction]:
        if not self.terms:
            raise AlgebraError("zero expression has no leading term")
        key = self.alg.monomial_order_key
        m = max(self.terms, key=key)
        return m, self.terms[m]

    def coefficient_of_gen(self, gid: int) -> "GradedExpression":
        """Left coefficient of ``gid`` over terms linear in it.

        Writes each monomial containing ``gid`` exactly once as
        ``gid * rest`` and accumulates the rests; terms without ``gid`` are
        ignored, terms quadratic in it are an error.
        """
        alg = self.alg
        par = alg.parity_of(gid)
        acc: dict[Monomial, Fraction] = {}
        for m, c in self.terms.items():
            k = m.count(gid)
            if k == 0:
                continue
            if k > 1:
                raise AlgebraError(
                    f"expression not linear in {alg.display(gid)}"
                )
            pos = m.index(gid)
            rest = m[:pos] + m[pos + 1:]
            # Move gid to the front across m[:pos].
            if par and alg.monomial_parity(m[:pos]):
                c = -c
            prev = acc.get(rest)
            tot = c if prev is None else prev + c
            if tot:
                acc[rest] = tot
            elif prev is not None:
                del acc[rest]
        return GradedExpression(alg, acc)

    # -- arithmetic ----------------------------------------------------------

    def __add__(self, other: "GradedExpression") -> "GradedExpression":
        self._check_sibling(other)
        if not other.terms:
            return self
        if not self.terms:
            return other
        acc = dict(self.terms)
        for m, c in other.terms.items():
            prev = acc.get(m)
            if prev is None:
                acc[m] = c
            else:
                tot = prev + c
                if tot:
                    acc[m] = tot
                else:
                    del acc[m]
        return GradedExpression(self.alg, acc)

    def __neg__(self) -> "GradedExpression":
        return GradedExpression(self.alg, {m: -c for m, c in self.terms.items()})

    def __sub__(self, other: "GradedExpression") -> "GradedExpression":
        return self + (-other)

    def scale(self, c: Rat) -> "GradedExpression":
        c = Fraction(c)
        if not c:
            return GradedExpression(self.alg, {})
        if c == 1:
            return self
        return GradedExpression(self.alg, {m: c * v for m, v in self.terms.items()})

    def __mul__(self, other: Union["GradedExpression", Rat]) -> "GradedExpression":
        if isinstance(other, (int, Fraction)):
            return self.scale(other)
        self._check_sibling(other)
        alg = self.alg
        merge = alg.merge_monomials
        acc: dict[Monomial, Fraction] = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                res = merge(m1, m2)
                if res is None:
                    continue
                sign, mono = res
                c = c1 * c2
                if sign < 0:
                    c = -c
                prev = acc.get(mono)
                if prev is None:
                    acc[mono] = c
                else:
                    tot = prev + c
                    if tot:
                        acc[mono] = tot
                    else:
                        del acc[mono]
        return GradedExpression(alg, acc)

    def __rmul__(self, other: Rat) -> "GradedExpression":
        return self.scale(other)

    def mul_monomial(self, mono: Monomial, coeff: Rat = 1) -> "GradedExpression":
        """Right-multiply by a canonical monomial (fast path)."""
        alg = self.alg
        merge = alg.merge_monomials
        cf = Fraction(coeff)
        acc: dict[Monomial, Fraction] = {}
        for m, c in self.terms.items():
            res = merge(m, mono)
            if res is None:
                continue
            sign, out = res
            v = c * cf if sign > 0 else -c * cf
            prev = acc.get(out)
            if prev is None:
                acc[out] = v
            else:
                tot = prev + v
                if tot:
                    acc[out] = tot
                else:
                    del acc[out]
        return GradedExpression(alg, acc)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GradedExpression):
            return NotImplemented
        return self.alg is other.alg and self.terms == other.terms

    def __hash__(self) -> int:
        return hash(frozenset(self.terms.items()))

    def _check_sibling(self, other: "GradedExpression") -> None:
        if self.alg is not other.alg:
            raise AlgebraError("expressions belong to different algebras")

    # -- display -------------------------------------------------------------

    def sorted_terms(self) -> Iterator[tuple[Monomial, Fraction]]:
        key = self.alg.monomial_order_key
        for m in sorted(self.terms, key=key, reverse=True):
            yield m, self.terms[m]

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        alg = self.alg
        parts: list[str] = []
        for m, c in self.sorted_terms():
            factors = "*".join(alg.display(g) for g in m)
            if not m:
                chunk = str(c)
            elif c == 1:
                chunk = factors
            elif c == -1:
                chunk = "-" + factors
            else:
                chunk = f"{c}*{factors}"
            if parts and not chunk.startswith("-"):
                parts.append("+" + chunk)
            else:
                parts.append(chunk)
        return " ".join(parts)

    def __repr__(self) -> str:
        return f"<expr {self}>"


def normalize(expr: GradedExpression) -> GradedExpression:
    """Identity on well-formed expressions; re-canonicalizes defensively.

    Every constructor already produces normal form, so this mostly serves as
    an executable statement of the invariant (and is what property tests
    drive): sorted monomials, odd squares killed, zero coefficients dropped.
    """
    return expr.alg.from_terms((c, m) for m, c in expr.terms.items())


def grade_of(expr: GradedExpression) -> Grade:
    """Ghost grade: an int, 'zero', or 'inhomogeneous'."""
    return expr.grade()


class Substitution:
    """A graded algebra endomorphism given on generators.

    Every image must be homogeneous of the same ghost degree as the
    generator it replaces (or identically zero); this keeps substitution a
    degree- and parity-preserving homomorphism, which is what makes it
    commute with normal forms.
    """

    def __init__(
        self,
        alg: GradedAlgebra,
        mapping: Mapping[int, GradedExpression],
        label: str = "",
    ) -> None:
        self.alg = alg
        self.label = label
        self.mapping: dict[int, GradedExpression] = {}
        for gid, image in mapping.items():
            g = image.grade()
            want = alg.ghost_of(gid)
            if g != GRADE_ZERO and g != want:
                raise GradingError(
                    f"substitution image for {alg.display(gid)} has grade "
                    f"{g}, expected {want}"
                )
            self.mapping[gid] = image

    def __contains__(self, gid: int) -> bool:
        return gid in self.mapping

    def __call__(self, expr: GradedExpression) -> GradedExpression:
        alg = self.alg
        if expr.alg is not alg:
            raise AlgebraError("substitution applied across algebras")
        mapping = self.mapping
        out = alg.zero()
        untouched: dict[Monomial, Fraction] = {}
        for m, c in expr.terms.items():
            if not any(g in mapping for g in m):
                prev = untouched.get(m)
                if prev is None:
                    untouched[m] = c
                else:
                    tot = prev + c
                    if tot:
                        untouched[m] = tot
                    else:
                        del untouched[m]
                continue
            piece = alg.scalar(c)
            for g in m:
                img = mapping.get(g)
                piece = piece * img if img is not None else piece.mul_monomial((g,))
                if not piece.terms:
                    break
            out = out + piece
        return out + GradedExpression(alg, untouched)

    def compose_after(self, other: "Substitution") -> "Substitution":
        """self ∘ other: apply other first, then self."""
        merged = {gid: self(img) for gid, img in other.mapping.items()}
        for gid, img in self.mapping.items():
            if gid not in merged:
                merged[gid] = img
        return Substitution(self.alg, merged, label=f"{self.label}∘{other.label}")


def substitute(expr: GradedExpression, sub: Substitution) -> GradedExpression:
    return sub(expr)
