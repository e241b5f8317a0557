"""Homogeneous primal-dual interior-point method for cone QPs.

The iteration follows the quadratic homogeneous embedding

    P x + A'y + G'z + c tau         = 0
    A x - b tau                     = 0
    G x + s - h tau                 = 0
    c'x + b'y + h'z + x'Px/tau + k  = 0,   (s, z) in K x K*, tau, k >= 0

with Nesterov-Todd scaling on every cone block and a Mehrotra
predictor-corrector step.  The quadratic term enters the KKT matrix
directly.  Infeasibility certificates are read off the embedding when
tau collapses.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .cones import NTScaling, centrality, jordan_divide, jordan_product, margin, max_step
from .polish import polish
from .program import ConicProgram, SolveResult, Status, kkt_residuals

log = logging.getLogger(__name__)


@dataclass
class SolverOptions:
    tol: float = 1e-8
    tol_infeas: float = 1e-8
    # when the target tol is not reached (stall, breakdown, iteration cap) the
    # best iterate is still reported optimal if it meets this level
    tol_accept: float = 1e-8
    patience: int = 8
    max_iter: int = 200
    static_reg: float = 1e-9
    refine_steps: int = 6
    step_fraction: float = 0.99
    # wide neighbourhood: every block keeps sqrt(det s det z) >= neighbourhood * mu
    neighbourhood: float = 1e-3
    # Newton steps on exact complementarity after an optimal finish
    polish: bool = True
    verbose: bool = False
    log_file: str | None = None


class _KKT:
    """Factorization of the scaled KKT matrix with iterative refinement.

    The cone block is kept in scaled form: with ``Winv`` the inverse NT
    scaling, the system ``G dx - W^2 dz = r`` is solved as
    ``(Winv G) dx - dzt = Winv r`` with ``dz = Winv dzt``.  The matrix then
    carries ``Winv`` instead of ``W^2``, which roughly halves the exponent
    of its condition number near the boundary of the cone.
    """

    def __init__(self, P, A, G, Winv, reg):
        n, p, m = P.shape[0], A.shape[0], G.shape[0]
        self.n, self.p, self.m = n, p, m
        self.Winv = Winv
        Gt = sp.csc_matrix(Winv @ G) if m else G
        I = sp.identity(m, format="csc")
        self.K = sp.bmat([[P, A.T, Gt.T],
                          [A, None, None],
                          [Gt, None, -I]], format="csc") if (p or m) else sp.csc_matrix(P)
        self.K = sp.csc_matrix(self.K)
        size = n + p + m
        d = np.concatenate([np.full(n, reg), np.full(p + m, -reg)])
        Kreg = (self.K + sp.diags(d, shape=(size, size))).tocsc()
        self.lu = spla.splu(Kreg, permc_spec="COLAMD")

    def solve(self, rhs, steps):
        n, p = self.n, self.p
        rhs = np.array(rhs, dtype=float)
        if self.m:
            rhs[n + p:] = self.Winv @ rhs[n + p:]
        x = self.lu.solve(rhs)
        for _ in range(steps):
            r = rhs - self.K @ x
            if not np.all(np.isfinite(r)):
                break
            if np.max(np.abs(r)) <= 1e-15 * max(1.0, np.max(np.abs(rhs))):
                break
            x = x + self.lu.solve(r)
        if self.m:
            x[n + p:] = self.Winv @ x[n + p:]
        return x


def solve(prog: ConicProgram, opts: SolverOptions | None = None) -> SolveResult:
    """Solve ``prog`` to the requested relative accuracy.

    Returns a ``SolveResult`` in every case; failures are signalled through
    ``status`` with the last iterate attached, never by silent garbage.
    """
    opts = opts or SolverOptions()
    P, c, A, b, G, h = prog.P, prog.c, prog.A, prog.b, prog.G, prog.h
    n, p, m = prog.n, len(b), len(h)
    layout = prog.layout
    e = layout.identity()
    nu = layout.degree
    history = []
    logfh = open(opts.log_file, "w") if opts.log_file else None

    best = {"score": np.inf}

    def finish(status, x, y, z, s, tau, it):
        if status in (Status.NUMERICAL_FAILURE, Status.ITER_LIMIT) and \
                best["score"] <= opts.tol_accept:
            status = Status.OPTIMAL
            x, y, z, s, tau = best["iterate"]
        xs, ys, zs, ss = x / tau, y / tau, z / tau, s / tau
        if status in (Status.PRIMAL_INFEASIBLE, Status.DUAL_INFEASIBLE):
            xs, ys, zs, ss = x, y, z, s
        if status == Status.OPTIMAL and opts.polish:
            better = polish(prog, xs, ys, zs, ss)
            if better is not None:
                xs, ys, zs, ss = better
                if history:
                    history[-1]["polished"] = True
        res = kkt_residuals(prog, xs, ys, zs, ss)
        if logfh:
            logfh.close()
        return SolveResult(status=status, x=xs, y=ys, z=zs, s=ss,
                           objective=float(prog.objective(xs)), gap=res.gap,
                           r_primal=res.r_primal, r_dual=res.r_dual, iterations=it,
                           log=history)

    # initial point: solve the KKT system with identity scaling
    try:
        kkt = _KKT(P, A, G, sp.identity(m, format="csc"), opts.static_reg)
    except RuntimeError:
        return finish(Status.NUMERICAL_FAILURE, np.zeros(n), np.zeros(p), e.copy(), e.copy(), 1.0, 0)
    sol = kkt.solve(np.concatenate([-c, b, h]), opts.refine_steps)
    x, y, zr = sol[:n], sol[n:n + p], sol[n + p:]
    s, z = -zr, zr.copy()
    if m:
        ms = margin(layout, s)
        if ms < 1.0:
            s = s + (1.0 - ms) * e
        mz = margin(layout, z)
        if mz < 1.0:
            z = z + (1.0 - mz) * e
    tau, kappa = 1.0, 1.0
    # Mehrotra scheme keeps iterates deterministic: no randomness anywhere.
    stall = 0
    for it in range(opts.max_iter + 1):
        Px = P @ x
        xPx = x @ Px
        r_x = Px + A.T @ y + G.T @ z + c * tau
        r_y = A @ x - b * tau
        r_z = G @ x + s - h * tau
        r_tau = c @ x + b @ y + h @ z + kappa + xPx / tau
        mu = (s @ z + tau * kappa) / (nu + 1)

        # termination on the de-homogenized iterate
        xs, ys, zs, ss = x / tau, y / tau, z / tau, s / tau
        kres = kkt_residuals(prog, xs, ys, zs, ss)
        pobj = 0.5 * xs @ (P @ xs) + c @ xs
        entry = {"iter": it, "pobj": float(pobj + prog.const), "r_primal": kres.r_primal,
                 "r_dual": kres.r_dual, "gap": kres.gap, "mu": float(mu), "tau": float(tau),
                 "kappa": float(kappa)}
        score = max(kres.r_primal, kres.r_dual, kres.gap)
        if score < 0.5 * best["score"]:
            best.update(score=score, iterate=(x, y, z, s, tau), it=it)
        elif score < best["score"]:
            best.update(score=score, iterate=(x, y, z, s, tau))
        if score <= opts.tol:
            _emit(entry, history, logfh, opts)
            return finish(Status.OPTIMAL, x, y, z, s, tau, it)
        if best["score"] <= opts.tol_accept and it - best["it"] >= opts.patience:
            # accuracy floor reached: no real progress for a while
            _emit(entry, history, logfh, opts)
            return finish(Status.NUMERICAL_FAILURE, x, y, z, s, tau, it)
        # infeasibility certificates
        byhz = b @ y + h @ z
        if byhz < 0 and tau < 1e-2 * kappa:
            sc = -1.0 / byhz
            rr = np.max(np.abs(A.T @ y + G.T @ z), initial=0.0) * sc
            if rr <= opts.tol_infeas:
                _emit(entry, history, logfh, opts)
                return finish(Status.PRIMAL_INFEASIBLE, x * 0, y * sc, z * sc, s * 0, 1.0, it)
        cx = c @ x
        if cx < 0 and tau < 1e-2 * kappa:
            sc = -1.0 / cx
            bad = max(np.max(np.abs(Px), initial=0.0), np.max(np.abs(A @ x), initial=0.0),
                      np.max(np.abs(G @ x + s), initial=0.0)) * sc
            if bad <= opts.tol_infeas:
                _emit(entry, history, logfh, opts)
                return finish(Status.DUAL_INFEASIBLE, x * sc, y * 0, z * 0, s * sc, 1.0, it)
        if it == opts.max_iter:
            _emit(entry, history, logfh, opts)
            return finish(Status.ITER_LIMIT, x, y, z, s, tau, it)

        W = NTScaling(layout, s, z) if m else None
        lam = W.lam if m else np.zeros(0)
        try:
            kkt = _KKT(P, A, G, W.inverse_matrix() if m else sp.csc_matrix((0, 0)),
                       opts.static_reg)
        except RuntimeError:
            _emit(entry, history, logfh, opts)
            return finish(Status.NUMERICAL_FAILURE, x, y, z, s, tau, it)

        u1 = kkt.solve(np.concatenate([-c, b, h]), opts.refine_steps)
        x1, z1 = u1[:n], u1[n + p:]
        dx1 = x1 - x / tau
        wz1 = W.apply(z1) if m else np.zeros(0)
        denom = -(dx1 @ (P @ dx1)) - wz1 @ wz1 - kappa / tau
        g = np.concatenate([c + 2.0 * Px / tau, b, h])

        def direction(eta, d_s, d_k):
            ds_t = jordan_divide(layout, lam, d_s) if m else np.zeros(0)
            rhs = np.concatenate([-eta * r_x, -eta * r_y, -eta * r_z - (W.apply(ds_t) if m else 0.0)])
            u2 = kkt.solve(rhs, opts.refine_steps)
            dtau = (-eta * r_tau - g @ u2 - d_k / tau) / denom
            u = u2 + dtau * u1
            dx, dy, dz = u[:n], u[n:n + p], u[n + p:]
            # ds from the linear primal row rather than W (ds_t - W dz): the
            # latter cancels badly near the boundary and spoils feasibility
            ds = -eta * r_z - G @ dx + h * dtau if m else np.zeros(0)
            dk = (d_k - kappa * dtau) / tau
            return dx, dy, dz, dtau, ds, dk

        def step_to_boundary(dz, dtau, ds, dk):
            a = np.inf
            if m:
                a = min(a, max_step(layout, s, ds), max_step(layout, z, dz))
            if dtau < 0:
                a = min(a, -tau / dtau)
            if dk < 0:
                a = min(a, -kappa / dk)
            return a

        # predictor
        d_s = -jordan_product(layout, lam, lam) if m else np.zeros(0)
        aff = direction(1.0, d_s, -tau * kappa)
        a_aff = min(1.0, step_to_boundary(aff[2], aff[3], aff[4], aff[5]))
        sigma = (1.0 - a_aff) ** 3
        # corrector
        if m:
            corr = jordan_product(layout, W.apply(aff[4], inverse=True), W.apply(aff[2]))
            d_s = -jordan_product(layout, lam, lam) - corr + sigma * mu * e
        d_k = -tau * kappa - aff[3] * aff[5] + sigma * mu
        dx, dy, dz, dtau, ds, dk = direction(1.0 - sigma, d_s, d_k)
        alpha = min(1.0, opts.step_fraction * step_to_boundary(dz, dtau, ds, dk))
        if m and np.isfinite(alpha):
            alpha = _backtrack(layout, nu, s, z, tau, kappa, ds, dz, dtau, dk, alpha,
                               opts.neighbourhood)
        entry.update(step=float(alpha), sigma=float(sigma))
        _emit(entry, history, logfh, opts)
        if not np.isfinite(alpha) or not all(np.all(np.isfinite(v)) for v in (dx, dy, dz, ds)):
            return finish(Status.NUMERICAL_FAILURE, x, y, z, s, tau, it)
        stall = stall + 1 if alpha < 1e-8 else 0
        if stall >= 5:
            return finish(Status.NUMERICAL_FAILURE, x, y, z, s, tau, it)
        x = x + alpha * dx
        y = y + alpha * dy
        z = z + alpha * dz
        s = s + alpha * ds
        tau = tau + alpha * dtau
        kappa = kappa + alpha * dk
    return finish(Status.ITER_LIMIT, x, y, z, s, tau, opts.max_iter)


def _backtrack(layout, nu, s, z, tau, kappa, ds, dz, dtau, dk, alpha, gamma):
    """Shrink ``alpha`` until the next iterate is strictly inside and central enough.

    An iterate that starts outside the neighbourhood only has to keep half
    of its current proximity, so a poorly centred start can recover.
    """
    mu0 = (s @ z + tau * kappa) / (nu + 1)
    if mu0 > 0:
        gamma = min(gamma, 0.5 * min(centrality(layout, s, z), tau * kappa) / mu0)
    for _ in range(60):
        s1, z1 = s + alpha * ds, z + alpha * dz
        t1, k1 = tau + alpha * dtau, kappa + alpha * dk
        mu1 = (s1 @ z1 + t1 * k1) / (nu + 1)
        c = centrality(layout, s1, z1)
        if c > 0 and c >= gamma * mu1 and t1 * k1 >= gamma * mu1:
            return alpha
        alpha *= 0.8
    return alpha


def _emit(entry, history, fh, opts):
    history.append(entry)
    if fh:
        fh.write(json.dumps(entry) + "\n")
    if opts.verbose:
        log.info("it %3d pobj %+.8e rp %.2e rd %.2e gap %.2e mu %.2e", entry["iter"],
                 entry["pobj"], entry["r_primal"], entry["r_dual"], entry["gap"], entry["mu"])
