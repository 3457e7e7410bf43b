"""Dense primal-dual interior-point solver via homogeneous self-dual embedding.

Solves the conic pair

    (P)  min c'x   s.t.  G x + s = h,  A x = b,  s in K
    (D)  max -h'z - b'y   s.t.  G'z + A'y + c = 0,  z in K

with K a product of nonnegative, second-order and PSD cones (see cones.Dims).
Free variables live in x natively. The embedding tracks (x, y, z, s, tau,
kappa) and drives the residuals

    rx = A'y + G'z + c*tau          ry = A x - b*tau
    rz = G x + s - h*tau            rt = c'x + b'y + h'z + kappa

to zero together with the complementarity s o z = 0, tau*kappa = 0, using
Nesterov-Todd scaling and a Mehrotra predictor-corrector step.  Infeasibility
and unboundedness are certified through the embedding (tau -> 0, kappa > 0).

Per iteration, one factorization of the reduced KKT matrix

    [ Gs'Gs  A' ]          with  Gs = W^{-T} G
    [ A      0  ]

is reused for all three right-hand sides, after eliminating the cone block;
an iterative-refinement pass against the unreduced 3x3 system keeps the
elimination honest when the scaling becomes ill-conditioned near optimality.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.linalg
from threadpoolctl import threadpool_limits

from .cones import (Dims, Scaling, identity, jordan_prod, jordan_solve,
                    max_step, svec)


class Status(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    NUMERICAL_LIMIT = "numerical_limit"


@dataclass
class SolverOptions:
    feastol: float = 1e-8
    abstol: float = 1e-8
    reltol: float = 1e-8
    maxiter: int = 200
    step: float = 0.99
    refine: int = 2
    psd_cap: int = 200
    verbose: int = 0


@dataclass
class RawSolution:
    status: Status
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    s: np.ndarray
    tau: float
    kappa: float
    pobj: float
    dobj: float
    gap: float
    relgap: float
    pres: float
    dres: float
    iterations: int
    trace: list = field(default_factory=list)


class _KKT:
    """Factor once per iteration; solve the 3x3 system for several RHS."""

    def __init__(self, G, A, W: Scaling, refine: int):
        self.G, self.A, self.W, self.refine = G, A, W, refine
        self.n = G.shape[1]
        self.p = A.shape[0]
        self.Gs = W.apply_cols(G, inv=True, trans=True)  # W^{-T} G
        S = self.Gs.T @ self.Gs
        if not np.all(np.isfinite(S)):
            raise np.linalg.LinAlgError("scaling overflow in Schur complement")
        M = np.zeros((self.n + self.p, self.n + self.p))
        M[: self.n, : self.n] = S
        if self.p:
            M[: self.n, self.n:] = A.T
            M[self.n:, : self.n] = A
        # static regularization keeps the factorization sound on degenerate
        # faces (rank-deficient A or singular Schur complement); iterative
        # refinement against the unregularized system removes the bias
        delta = 1e-12 * (1.0 + float(np.max(np.abs(np.diag(S)))))
        M[: self.n, : self.n] += delta * np.eye(self.n)
        M[self.n:, self.n:] = -delta * np.eye(self.p)
        self.lu = scipy.linalg.lu_factor(M, check_finite=False)

    def _solve_once(self, bx, by, bz):
        bzt = self.W.apply(bz, inv=True, trans=True)
        rhs = np.concatenate([bx + self.Gs.T @ bzt, by])
        sol = scipy.linalg.lu_solve(self.lu, rhs, check_finite=False)
        ux, uy = sol[: self.n], sol[self.n:]
        uz = self.W.apply(self.Gs @ ux - bzt, inv=True)
        return ux, uy, uz

    def solve(self, bx, by, bz):
        ux, uy, uz = self._solve_once(bx, by, bz)
        for _ in range(self.refine):
            # residuals of: A'uy + G'uz = bx ; A ux = by ; G ux - W'W uz = bz
            r1 = bx - (self.A.T @ uy if self.p else 0.0) - self.G.T @ uz
            r2 = by - self.A @ ux if self.p else np.zeros(0)
            r3 = bz - self.G @ ux + self.W.apply(self.W.apply(uz), trans=True)
            dx, dy, dz = self._solve_once(r1, r2, r3)
            ux, uy, uz = ux + dx, uy + dy, uz + dz
        return ux, uy, uz


def solve_conelp(c, G, h, A, b, dims: Dims, options: SolverOptions | None = None) -> RawSolution:
    """Solve the conic LP; deterministic for identical inputs and options."""
    opts = options or SolverOptions()
    c = np.asarray(c, dtype=float)
    G = np.asarray(G, dtype=float).reshape(len(h), len(c))
    h = np.asarray(h, dtype=float)
    A = np.asarray(A, dtype=float).reshape(len(b), len(c))
    b = np.asarray(b, dtype=float)
    n, p, k = len(c), len(b), len(h)
    if k != dims.cone_dim:
        raise ValueError("cone dims inconsistent with h")
    if any(t > opts.psd_cap for t in dims.s):
        raise ValueError(f"PSD block exceeds cap {opts.psd_cap}")
    if k == 0:
        raise ValueError("program has no conic constraints; nothing to solve")

    # single-threaded BLAS: the blocks here are far too small to gain from
    # threading, and thread scheduling would cost determinism
    with threadpool_limits(limits=1):
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            return _solve_loop(c, G, h, A, b, dims, opts)


def _solve_loop(c, G, h, A, b, dims, opts):
    n, p = len(c), len(b)
    e = identity(dims)
    nu = dims.degree
    x = np.zeros(n)
    y = np.zeros(p)
    s = e.copy()
    z = e.copy()
    tau, kappa = 1.0, 1.0

    nrm_c = 1.0 + np.linalg.norm(c)
    nrm_b = 1.0 + np.linalg.norm(b)
    nrm_h = 1.0 + np.linalg.norm(h)

    trace: list[dict] = []
    best: dict | None = None
    best_score = np.inf

    def snapshot(status: Status, iters: int) -> RawSolution:
        # report the best-scored iterate; late iterations can drift off the
        # feasible manifold once the scaling becomes ill-conditioned
        if best is not None and status != Status.OPTIMAL:
            bb = best
            t = max(bb["tau"], 1e-300)
            return RawSolution(status, bb["x"] / t, bb["y"] / t, bb["z"] / t,
                               bb["s"] / t, bb["tau"], bb["kappa"], bb["pobj"],
                               bb["dobj"], bb["gap"], bb["relgap"], bb["pres"],
                               bb["dres"], iters, trace)
        t = max(tau, 1e-300)
        return RawSolution(status, x / t, y / t, z / t, s / t, tau, kappa,
                           pobj, dobj, gap, relgap, pres, dres, iters, trace)

    for it in range(opts.maxiter):
        if tau <= 1e-120 or not math.isfinite(tau):
            return snapshot(Status.NUMERICAL_LIMIT, it)
        rx = (A.T @ y if p else 0.0) + G.T @ z + c * tau
        ry = A @ x - b * tau if p else np.zeros(0)
        rz = G @ x + s - h * tau
        rt = float(c @ x + (b @ y if p else 0.0) + h @ z + kappa)
        mu = (float(s @ z) + tau * kappa) / (nu + 1)

        pobj = float(c @ x) / tau
        dobj = -(float(b @ y) if p else 0.0) / tau - float(h @ z) / tau
        gap = float(s @ z) / tau ** 2
        relgap = gap / max(1.0, abs(pobj))
        pres = max(np.linalg.norm(ry) / nrm_b, np.linalg.norm(rz) / nrm_h) / tau
        dres = np.linalg.norm(rx) / nrm_c / tau
        trace.append({"iter": it, "pobj": pobj, "dobj": dobj, "gap": gap,
                      "pres": pres, "dres": dres, "mu": mu})
        if opts.verbose:
            print(f"[conelp] it={it:3d} pobj={pobj:+.6e} dobj={dobj:+.6e} "
                  f"gap={gap:.2e} pres={pres:.2e} dres={dres:.2e}")

        score = max(pres, dres, abs(relgap))
        if score < best_score:
            best_score = score
            best = {"x": x.copy(), "y": y.copy(), "z": z.copy(), "s": s.copy(),
                    "tau": tau, "kappa": kappa, "pobj": pobj, "dobj": dobj,
                    "gap": gap, "relgap": relgap, "pres": pres, "dres": dres}

        if pres <= opts.feastol and dres <= opts.feastol and (
                gap <= opts.abstol or relgap <= opts.reltol):
            return snapshot(Status.OPTIMAL, it)
        if best_score < 1e-6 and score > 1e4 * best_score:
            # numerics have broken down past the best achievable point
            return snapshot(Status.NUMERICAL_LIMIT, it)

        # infeasibility certificates from the embedding
        by_hz = -(float(b @ y) if p else 0.0) - float(h @ z)
        if by_hz > opts.feastol * max(tau, 1e-12):
            cert = np.linalg.norm((A.T @ y if p else 0.0) + G.T @ z) / by_hz / nrm_c
            if cert <= opts.feastol and tau <= 1e-6 * kappa:
                return snapshot(Status.INFEASIBLE, it)
        mcx = -float(c @ x)
        if mcx > opts.feastol * max(tau, 1e-12):
            cert = max(np.linalg.norm(A @ x) if p else 0.0,
                       np.linalg.norm(G @ x + s)) / mcx / nrm_h
            if cert <= opts.feastol and tau <= 1e-6 * kappa:
                return snapshot(Status.UNBOUNDED, it)

        try:
            W = Scaling.compute(s, z, dims)
            kkt = _KKT(G, A, W, opts.refine)
            x1, y1, z1 = kkt.solve(-c, b, h)
            lam = W.lam
            den = float(c @ x1) + (float(b @ y1) if p else 0.0) \
                + float(h @ z1) - kappa / tau
            lamlam = jordan_prod(dims, lam, lam)

            def direction(eta, ds, dtv):
                bz_sys = -eta * rz - W.apply(jordan_solve(dims, lam, ds), trans=True)
                x2, y2, z2 = kkt.solve(-eta * rx, -eta * ry, bz_sys)
                num = -eta * rt - (float(c @ x2) + (float(b @ y2) if p else 0.0)
                                   + float(h @ z2)) - dtv / tau
                dtau = num / den
                dx = x2 + dtau * x1
                dy = y2 + dtau * y1
                dz = z2 + dtau * z1
                dsv = W.apply(jordan_solve(dims, lam, ds) - W.apply(dz), trans=True)
                dkappa = (dtv - kappa * dtau) / tau
                return dx, dy, dz, dsv, dtau, dkappa

            # predictor (affine)
            dxa, dya, dza, dsa, dta, dka = direction(1.0, -lamlam, -tau * kappa)
            alpha = min(max_step(dims, s, dsa), max_step(dims, z, dza))
            if dta < 0:
                alpha = min(alpha, -tau / dta)
            if dka < 0:
                alpha = min(alpha, -kappa / dka)
            alpha = min(1.0, alpha)
            rho = ((float((s + alpha * dsa) @ (z + alpha * dza))
                    + (tau + alpha * dta) * (kappa + alpha * dka))
                   / (float(s @ z) + tau * kappa))
            sigma = min(1.0, max(0.0, rho)) ** 3

            # corrector (combined direction with Mehrotra second-order term)
            cross = jordan_prod(dims, W.apply(dsa, inv=True, trans=True),
                                W.apply(dza))
            ds_comb = -lamlam - cross + sigma * mu * identity(dims)
            dt_comb = -tau * kappa - dta * dka + sigma * mu
            dx, dy, dz, dsv, dtau, dkappa = direction(1.0 - sigma, ds_comb, dt_comb)

            amax = min(max_step(dims, s, dsv), max_step(dims, z, dz))
        except (np.linalg.LinAlgError, FloatingPointError, ZeroDivisionError,
                ValueError):
            return snapshot(Status.NUMERICAL_LIMIT, it)
        if dtau < 0:
            amax = min(amax, -tau / dtau)
        if dkappa < 0:
            amax = min(amax, -kappa / dkappa)
        alpha = min(1.0, opts.step * amax)
        if not math.isfinite(alpha) or alpha <= 1e-10:
            return snapshot(Status.NUMERICAL_LIMIT, it)

        x += alpha * dx
        y += alpha * dy
        z += alpha * dz
        s += alpha * dsv
        tau += alpha * dtau
        kappa += alpha * dkappa

    return snapshot(Status.NUMERICAL_LIMIT, opts.maxiter)
