"""Sparse multivariate polynomials, graded-lex monomial bases, Gram matrices.

A monomial is an exponent tuple (one nonnegative integer per variable); a
polynomial is a sparse map from monomials to float coefficients.  Everything
here is immutable after construction and safe to share across threads.

Monomial bases are ordered graded-lexicographically, i.e. ascending total
degree, and within a degree class the order produced by iterating variable
index combinations: for two variables and degree two that is

    [1, x1, x2, x1^2, x1*x2, x2^2]

This fixed order is what moment matrices and localizing maps index against,
so it must never change.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

Monomial = tuple[int, ...]

# Coefficients smaller than this are treated as literal zeros and pruned.
COEFF_PRUNE = 1e-300


def _validate_exponents(exp: Monomial, nvars: int) -> None:
    if len(exp) != nvars:
        raise ValueError(f"exponent vector {exp} has length {len(exp)}, expected {nvars}")
    if any(e < 0 for e in exp):
        raise ValueError(f"negative exponent in {exp}")


@dataclass(frozen=True)
class Polynomial:
    """Sparse polynomial in ``nvars`` real variables with float coefficients.

    ``terms`` maps exponent tuples to coefficients; zero coefficients are
    pruned at construction so the stored support is always exact.
    """

    nvars: int
    terms: dict[Monomial, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.nvars < 1:
            raise ValueError("nvars must be >= 1")
        pruned: dict[Monomial, float] = {}
        for exp, coef in self.terms.items():
            exp = tuple(int(e) for e in exp)
            _validate_exponents(exp, self.nvars)
            c = float(coef)
            if abs(c) >= COEFF_PRUNE:
                pruned[exp] = c
        object.__setattr__(self, "terms", pruned)

    # -- constructors ------------------------------------------------------

    @staticmethod
    def zero(nvars: int) -> "Polynomial":
        return Polynomial(nvars, {})

    @staticmethod
    def constant(nvars: int, value: float) -> "Polynomial":
        return Polynomial(nvars, {(0,) * nvars: float(value)})

    @staticmethod
    def variable(nvars: int, j: int) -> "Polynomial":
        """The polynomial x_j (0-based index)."""
        if not 0 <= j < nvars:
            raise ValueError(f"variable index {j} out of range for nvars={nvars}")
        exp = [0] * nvars
        exp[j] = 1
        return Polynomial(nvars, {tuple(exp): 1.0})

    @staticmethod
    def from_affine(nvars: int, coeffs: Iterable[float], const: float = 0.0) -> "Polynomial":
        """c0 + sum_j coeffs[j] * x_j."""
        terms: dict[Monomial, float] = {(0,) * nvars: float(const)}
        for j, c in enumerate(coeffs):
            exp = [0] * nvars
            exp[j] = 1
            terms[tuple(exp)] = float(c)
        return Polynomial(nvars, terms)

    # -- structure ---------------------------------------------------------

    @property
    def degree(self) -> int:
        """Max total degree; the zero polynomial has degree 0."""
        if not self.terms:
            return 0
        return max(sum(exp) for exp in self.terms)

    def is_zero(self) -> bool:
        return not self.terms

    def coefficient_vector(self) -> np.ndarray:
        """Coefficients in graded-lex term order (for norms and hashing)."""
        return np.array([self.terms[m] for m in sorted_monomials(self.terms)], dtype=float)

    def coefficient_norm(self) -> float:
        if not self.terms:
            return 0.0
        return float(np.linalg.norm(list(self.terms.values())))

    # -- evaluation --------------------------------------------------------

    def __call__(self, x) -> float:
        return evaluate(self, x)

    def eval_many(self, X: np.ndarray) -> np.ndarray:
        """Evaluate at many points at once; ``X`` has shape (npoints, nvars)."""
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.nvars:
            raise ValueError(f"point array has shape {X.shape}, expected (*, {self.nvars})")
        out = np.zeros(X.shape[0])
        for exp, coef in self.terms.items():
            term = np.full(X.shape[0], coef)
            for j, e in enumerate(exp):
                if e:
                    term *= X[:, j] ** e
            out += term
        return out

    # -- arithmetic --------------------------------------------------------

    def _check_compat(self, other: "Polynomial") -> None:
        if self.nvars != other.nvars:
            raise ValueError(f"nvars mismatch: {self.nvars} vs {other.nvars}")

    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = Polynomial.constant(self.nvars, other)
        self._check_compat(other)
        terms = dict(self.terms)
        for exp, coef in other.terms.items():
            terms[exp] = terms.get(exp, 0.0) + coef
        return Polynomial(self.nvars, terms)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self.nvars, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        if isinstance(other, (int, float)):
            other = Polynomial.constant(self.nvars, other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return Polynomial(self.nvars, {e: c * float(other) for e, c in self.terms.items()})
        self._check_compat(other)
        terms: dict[Monomial, float] = {}
        for ea, ca in self.terms.items():
            for eb, cb in other.terms.items():
                exp = tuple(a + b for a, b in zip(ea, eb))
                terms[exp] = terms.get(exp, 0.0) + ca * cb
        return Polynomial(self.nvars, terms)

    __rmul__ = __mul__

    def diff(self, j: int) -> "Polynomial":
        """Partial derivative with respect to x_j."""
        terms: dict[Monomial, float] = {}
        for exp, coef in self.terms.items():
            if exp[j] == 0:
                continue
            new = list(exp)
            new[j] -= 1
            terms[tuple(new)] = terms.get(tuple(new), 0.0) + coef * exp[j]
        return Polynomial(self.nvars, terms)

    # -- serialization -----------------------------------------------------

    def to_json(self) -> dict:
        """JSON form: {"nvars": n, "terms": [{"exp": [...], "coef": c}, ...]}.

        Terms are emitted in graded-lex order so output bytes are stable.
        """
        return {
            "nvars": self.nvars,
            "terms": [
                {"exp": list(m), "coef": self.terms[m]} for m in sorted_monomials(self.terms)
            ],
        }

    @staticmethod
    def from_json(obj: Mapping) -> "Polynomial":
        terms = {tuple(t["exp"]): float(t["coef"]) for t in obj["terms"]}
        return Polynomial(int(obj["nvars"]), terms)

    def __repr__(self):
        if not self.terms:
            return f"Polynomial({self.nvars}, 0)"
        bits = []
        for m in sorted_monomials(self.terms):
            mono = "*".join(
                f"x{j + 1}" + (f"^{e}" if e > 1 else "") for j, e in enumerate(m) if e
            ) or "1"
            bits.append(f"{self.terms[m]:+g}*{mono}")
        return f"Polynomial({self.nvars}, {' '.join(bits)})"


def grlex_key(m: Monomial) -> tuple:
    """Sort key realizing the graded-lex order used everywhere in this package."""
    return (sum(m), tuple(-e for e in m))


def sorted_monomials(monos: Iterable[Monomial]) -> list[Monomial]:
    return sorted(monos, key=grlex_key)


def evaluate(p: Polynomial, x) -> float:
    """Evaluate p at the point x (length must equal p.nvars)."""
    x = np.asarray(x, dtype=float)
    if x.shape != (p.nvars,):
        raise ValueError(f"point has shape {x.shape}, expected ({p.nvars},)")
    total = 0.0
    for exp, coef in p.terms.items():
        term = coef
        for xj, e in zip(x, exp):
            if e:
                term *= xj ** e
        total += term
    return total


def normalize(p: Polynomial) -> Polynomial:
    """Rescale so the coefficient 2-norm is one; the zero set is unchanged."""
    nrm = p.coefficient_norm()
    if nrm == 0.0:
        raise ValueError("cannot normalize the zero polynomial")
    return p * (1.0 / nrm)


class PolyBatch:
    """Vectorized evaluation of a fixed list of polynomials.

    Stacks every term into one exponent matrix so values and Jacobians of the
    whole system come out of a handful of numpy passes; used by the
    Gauss-Newton polish and the consensus classifier, which evaluate the same
    residual system at many points.
    """

    def __init__(self, polys: Iterable[Polynomial], nvars: int):
        exps, coefs, ptr = [], [], [0]
        for p in polys:
            if p.nvars != nvars:
                raise ValueError("nvars mismatch in batch")
            for e, c in sorted(p.terms.items()):
                exps.append(e)
                coefs.append(c)
            ptr.append(len(coefs))
        self.nvars = nvars
        self.npolys = len(ptr) - 1
        self.E = np.array(exps, dtype=float) if exps else np.zeros((0, nvars))
        self.c = np.array(coefs) if coefs else np.zeros(0)
        self.ptr = np.array(ptr)
        # per-variable derivative structures, precomputed once
        self._jac = []
        for j in range(nvars):
            act = np.nonzero(self.E[:, j] > 0)[0]
            Ej = self.E[act].copy()
            Ej[:, j] -= 1.0
            cj = self.c[act] * self.E[act, j]
            self._jac.append((act, Ej, cj))

    def _segment_sum(self, terms: np.ndarray) -> np.ndarray:
        sums = np.add.reduceat(np.append(terms, 0.0), self.ptr[:-1])
        sums[self.ptr[:-1] == self.ptr[1:]] = 0.0
        return sums[: self.npolys]

    def values(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.c.size == 0:
            return np.zeros(self.npolys)
        terms = self.c * np.prod(x[None, :] ** self.E, axis=1)
        return self._segment_sum(terms)

    def jacobian(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        J = np.zeros((self.npolys, self.nvars))
        if self.c.size == 0:
            return J
        for j, (act, Ej, cj) in enumerate(self._jac):
            if len(act) == 0:
                continue
            terms = np.zeros(len(self.c))
            terms[act] = cj * np.prod(x[None, :] ** Ej, axis=1)
            J[:, j] = self._segment_sum(terms)
        return J


def scale_variables(p: Polynomial, sigma) -> Polynomial:
    """The polynomial q(y) = p(sigma * y) (componentwise variable rescaling).

    Values are preserved under the substitution x = sigma * y, so residual
    magnitudes and thresholds are unchanged; only conditioning improves.
    """
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape != (p.nvars,):
        raise ValueError("scale vector length must equal nvars")
    terms = {}
    for exp, coef in p.terms.items():
        f = coef
        for sj, e in zip(sigma, exp):
            if e:
                f *= sj ** e
        terms[exp] = terms.get(exp, 0.0) + f
    return Polynomial(p.nvars, terms)


@dataclass(frozen=True)
class MonomialBasis:
    """All monomials of degree <= maxdeg in nvars variables, graded-lex ordered.

    ``index`` is the inverse lookup; ``monomials[0]`` is always the constant.
    """

    nvars: int
    maxdeg: int
    monomials: tuple[Monomial, ...]
    index: dict[Monomial, int]

    @property
    def size(self) -> int:
        return len(self.monomials)

    def eval_vector(self, x) -> np.ndarray:
        """The numeric vector z_d(x)."""
        x = np.asarray(x, dtype=float)
        out = np.empty(self.size)
        for i, m in enumerate(self.monomials):
            v = 1.0
            for xj, e in zip(x, m):
                if e:
                    v *= xj ** e
            out[i] = v
        return out


_BASIS_CACHE: dict[tuple[int, int], MonomialBasis] = {}


def monomial_basis(n: int, d: int) -> MonomialBasis:
    """Graded-lex basis of all monomials of degree <= d; size C(n+d, d)."""
    if n < 1:
        raise ValueError("need at least one variable")
    if d < 0:
        raise ValueError("degree must be nonnegative")
    key = (n, d)
    cached = _BASIS_CACHE.get(key)
    if cached is not None:
        return cached
    monos: list[Monomial] = []
    for deg in range(d + 1):
        for combo in itertools.combinations_with_replacement(range(n), deg):
            exp = [0] * n
            for j in combo:
                exp[j] += 1
            monos.append(tuple(exp))
    basis = MonomialBasis(n, d, tuple(monos), {m: i for i, m in enumerate(monos)})
    assert basis.size == math.comb(n + d, d)
    _BASIS_CACHE[key] = basis
    return basis


@dataclass(frozen=True)
class GramMatrix:
    """Symmetric G with z_d(x)^T G z_d(x) == p(x) over the attached basis."""

    basis: MonomialBasis
    G: np.ndarray

    def reconstruct(self) -> Polynomial:
        """Expand z^T G z symbolically back into a Polynomial (test oracle hook)."""
        n = self.basis.nvars
        terms: dict[Monomial, float] = {}
        for i, mi in enumerate(self.basis.monomials):
            for j, mj in enumerate(self.basis.monomials):
                if abs(self.G[i, j]) < COEFF_PRUNE:
                    continue
                exp = tuple(a + b for a, b in zip(mi, mj))
                terms[exp] = terms.get(exp, 0.0) + self.G[i, j]
        return Polynomial(n, terms)


def product_pairs(basis: MonomialBasis) -> dict[Monomial, list[tuple[int, int]]]:
    """Map each product monomial to all basis index pairs (i <= j) producing it."""
    pairs: dict[Monomial, list[tuple[int, int]]] = {}
    for i, mi in enumerate(basis.monomials):
        for j in range(i, basis.size):
            mj = basis.monomials[j]
            prod = tuple(a + b for a, b in zip(mi, mj))
            pairs.setdefault(prod, []).append((i, j))
    return pairs


def gram_matrix(p: Polynomial, basis: MonomialBasis) -> GramMatrix:
    """Canonical symmetric Gram matrix of p over the given basis.

    Each coefficient is split evenly across every basis pair (i, j), i <= j,
    whose monomial product matches, with off-diagonal weight halved between
    the two symmetric cells.  Any Gram matrix of p gives the same value of
    trace(G * Y) for a moment matrix Y on the same basis, so the particular
    split is immaterial downstream.
    """
    if p.nvars != basis.nvars:
        raise ValueError("variable count mismatch between polynomial and basis")
    if p.degree > 2 * basis.maxdeg:
        raise ValueError(
            f"polynomial degree {p.degree} exceeds 2*maxdeg = {2 * basis.maxdeg}"
        )
    pairs = product_pairs(basis)
    G = np.zeros((basis.size, basis.size))
    for exp, coef in p.terms.items():
        owners = pairs.get(exp)
        if not owners:
            raise ValueError(f"monomial {exp} not representable over the basis")
        share = coef / len(owners)
        for (i, j) in owners:
            if i == j:
                G[i, i] += share
            else:
                G[i, j] += share / 2.0
                G[j, i] += share / 2.0
    return GramMatrix(basis, G)
