"""Moment-matrix indexing and localizing maps for the Lasserre hierarchy.

Pseudo-moments are deduplicated scalar decision variables, one w_alpha per
exponent vector of degree <= 2r.  The order-r moment matrix is then the
linear image  M^r(w)[i, j] = w_{alpha_i + alpha_j}  over the order-r basis,
which enforces the moment structure w_{alpha beta} = w_{alpha+beta}
structurally instead of through extra equality constraints.

A localizing map applies the Riesz substitution x^gamma -> w_gamma to the
matrix polynomial p(x) * z_s(x) z_s(x)^T; at a point mass (w_alpha = x^alpha)
it evaluates to p(x) * z_s(x) z_s(x)^T exactly, which is the oracle the tests
lean on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .poly import MonomialBasis, Monomial, Polynomial, monomial_basis


@dataclass(frozen=True)
class MomentIndex:
    """Index structure for pseudo-moments of degree <= 2*order.

    ``basis`` spans the order-r moment matrix rows; ``momvars`` lists all
    monomials of degree <= 2r (the scalar decision variables), and ``pair``
    maps basis cell (i, j) to the momvar id of monomials[i] * monomials[j].
    """

    nvars: int
    order: int
    basis: MonomialBasis
    momvars: tuple[Monomial, ...]
    mom_id: dict[Monomial, int]
    pair: np.ndarray  # (basis.size, basis.size) int array of momvar ids

    @property
    def n_moments(self) -> int:
        return len(self.momvars)

    def moment_matrix(self, momvals: np.ndarray) -> np.ndarray:
        """Assemble M^r(w) from a moment value vector."""
        momvals = np.asarray(momvals, dtype=float)
        return momvals[self.pair]

    def point_mass(self, x) -> np.ndarray:
        """Moments of the Dirac measure at x: w_alpha = x^alpha."""
        x = np.asarray(x, dtype=float)
        out = np.empty(self.n_moments)
        for i, m in enumerate(self.momvars):
            v = 1.0
            for xj, e in zip(x, m):
                if e:
                    v *= xj ** e
            out[i] = v
        return out


def moment_index(n: int, r: int) -> MomentIndex:
    """Build the moment index for n variables at relaxation order r >= 1."""
    if n < 1 or r < 1:
        raise ValueError("need n >= 1 and r >= 1")
    basis = monomial_basis(n, r)
    full = monomial_basis(n, 2 * r)
    momvars = full.monomials
    mom_id = dict(full.index)
    size = basis.size
    pair = np.empty((size, size), dtype=np.int64)
    for i, mi in enumerate(basis.monomials):
        for j in range(i, size):
            mj = basis.monomials[j]
            mid = mom_id[tuple(a + b for a, b in zip(mi, mj))]
            pair[i, j] = mid
            pair[j, i] = mid
    return MomentIndex(n, r, basis, momvars, mom_id, pair)


def riesz_vector(p: Polynomial, idx: MomentIndex) -> np.ndarray:
    """Dense coefficient vector of the Riesz image L(p) over the momvars."""
    out = np.zeros(idx.n_moments)
    for exp, coef in p.terms.items():
        mid = idx.mom_id.get(exp)
        if mid is None:
            raise ValueError(
                f"monomial {exp} of degree {sum(exp)} exceeds moment order 2r = {2 * idx.order}"
            )
        out[mid] += coef
    return out


@dataclass(frozen=True)
class LocalizingMap:
    """Linear map from moment values to the order-s localizing matrix of p.

    ``entries`` is an upper-triangular COO list (a, b, momvar_id, coef) with
    a <= b; the matrix is symmetric by construction since cell (a, b) collects
    exactly the coefficients of p shifted by alpha_a + alpha_b.
    """

    poly: Polynomial
    order: int
    basis: MonomialBasis
    entries: tuple[tuple[int, int, int, float], ...]

    @property
    def rows(self) -> int:
        return self.basis.size

    def substitute(self, momvals: np.ndarray) -> np.ndarray:
        """Evaluate the map at a moment vector; returns the dense matrix."""
        momvals = np.asarray(momvals, dtype=float)
        M = np.zeros((self.rows, self.rows))
        for a, b, mid, coef in self.entries:
            M[a, b] += coef * momvals[mid]
        M = M + np.triu(M, 1).T
        return M

    def linear_forms(self, n_moments: int) -> np.ndarray:
        """Dense (rows, rows, n_moments) tensor of the cell linear forms."""
        T = np.zeros((self.rows, self.rows, n_moments))
        for a, b, mid, coef in self.entries:
            T[a, b, mid] += coef
            if a != b:
                T[b, a, mid] += coef
        return T


def localizing_map(p: Polynomial, idx: MomentIndex, s: int) -> LocalizingMap:
    """Riesz substitution applied to p(x) * z_s(x) z_s(x)^T.

    Requires degree(p) + 2s <= 2*order so every shifted moment exists; the
    s = 0 map is the 1x1 Riesz image of p itself (the Shor constraint).
    """
    if s < 0:
        raise ValueError("localizing order must be nonnegative")
    if p.nvars != idx.nvars:
        raise ValueError("variable count mismatch")
    if p.degree + 2 * s > 2 * idx.order:
        raise ValueError(
            f"localizing order {s} too high: need degree {p.degree} + 2*{s} <= {2 * idx.order}"
        )
    sbasis = monomial_basis(idx.nvars, s)
    entries: list[tuple[int, int, int, float]] = []
    for a, ma in enumerate(sbasis.monomials):
        for b in range(a, sbasis.size):
            mb = sbasis.monomials[b]
            shift = tuple(x + y for x, y in zip(ma, mb))
            for exp, coef in p.terms.items():
                target = tuple(x + y for x, y in zip(exp, shift))
                mid = idx.mom_id.get(target)
                if mid is None:
                    raise ValueError(
                        f"moment {target} missing at order {idx.order} (order too low)"
                    )
                entries.append((a, b, mid, coef))
    return LocalizingMap(p, s, sbasis, tuple(entries))
