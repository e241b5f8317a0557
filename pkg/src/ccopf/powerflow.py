"""Polar AC power flow: residuals, Newton-Raphson and analytic Jacobians."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import DimensionMismatch, NonConvergence, VoltageCollapse
from .network import BusKind, Network, branch_admittances

log = logging.getLogger(__name__)

V_SAFE = (0.5, 1.5)


@dataclass(frozen=True)
class BranchMatrices:
    Yf: np.ndarray
    Yt: np.ndarray
    Cf: np.ndarray
    Ct: np.ndarray


def branch_matrices(net: Network) -> BranchMatrices:
    """Line-end admittance matrices so that ``I_from = Yf V`` and ``I_to = Yt V``."""
    f, t = net.line_ends
    L, n = net.n_line, net.n_bus
    Cf = np.zeros((L, n))
    Ct = np.zeros((L, n))
    Cf[np.arange(L), f] = 1.0
    Ct[np.arange(L), t] = 1.0
    yff, yft, ytf, ytt = branch_admittances(net)
    Yf = yff[:, None] * Cf + yft[:, None] * Ct
    Yt = ytf[:, None] * Cf + ytt[:, None] * Ct
    return BranchMatrices(Yf, Yt, Cf, Ct)


@dataclass
class SystemState:
    """Voltages plus the net injections and directed flows they imply.

    ``fp_from[l]`` is the active flow leaving the from-end of line ``l``
    towards its to-end, ``fp_to[l]`` the one leaving the to-end.
    """

    v: np.ndarray
    theta: np.ndarray
    p_inj: np.ndarray
    q_inj: np.ndarray
    fp_from: np.ndarray = field(default_factory=lambda: np.zeros(0))
    fq_from: np.ndarray = field(default_factory=lambda: np.zeros(0))
    fp_to: np.ndarray = field(default_factory=lambda: np.zeros(0))
    fq_to: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def flow_map(self, net: Network):
        """{(from id, to id): (p, q)} for both orientations of every line."""
        out = {}
        for k, l in enumerate(net.lines):
            out[(l.from_bus, l.to_bus)] = (float(self.fp_from[k]), float(self.fq_from[k]))
            out[(l.to_bus, l.from_bus)] = (float(self.fp_to[k]), float(self.fq_to[k]))
        return out


def _check(net, v, theta):
    if len(v) != net.n_bus or len(theta) != net.n_bus:
        raise DimensionMismatch(f"state has {len(v)}/{len(theta)} entries for {net.n_bus} buses")


def injections(net: Network, v, theta):
    """Complex power injected into the network at every bus (includes bus shunts)."""
    V = v * np.exp(1j * theta)
    return V * np.conj(net.admittance @ V)


def flows(net: Network, v, theta, bm: BranchMatrices | None = None):
    """Complex power leaving the from- and to-end of every line."""
    bm = bm or branch_matrices(net)
    V = v * np.exp(1j * theta)
    Sf = (bm.Cf @ V) * np.conj(bm.Yf @ V)
    St = (bm.Ct @ V) * np.conj(bm.Yt @ V)
    return Sf, St


def evaluate_state(net: Network, v, theta) -> SystemState:
    v = np.asarray(v, dtype=float)
    theta = np.asarray(theta, dtype=float)
    _check(net, v, theta)
    S = injections(net, v, theta)
    Sf, St = flows(net, v, theta)
    return SystemState(v=v, theta=theta, p_inj=S.real, q_inj=S.imag, fp_from=Sf.real,
                       fq_from=Sf.imag, fp_to=St.real, fq_to=St.imag)


def _index_sets(net):
    kinds = [b.kind for b in net.buses]
    pick = lambda kind: np.array([i for i, k in enumerate(kinds) if k == kind], dtype=int)
    return pick(BusKind.PQ), pick(BusKind.PV), pick(BusKind.REF)


def pf_residual(net: Network, state: SystemState) -> np.ndarray:
    """Mismatch between computed and specified injections.

    Active rows for every non-REF bus (in bus order), then reactive rows
    for every PQ bus.
    """
    _check(net, state.v, state.theta)
    if len(state.p_inj) != net.n_bus or len(state.q_inj) != net.n_bus:
        raise DimensionMismatch("injection vectors do not match the bus count")
    pq, pv, ref = _index_sets(net)
    nonref = np.sort(np.concatenate([pq, pv]))
    S = injections(net, state.v, state.theta)
    return np.concatenate([S.real[nonref] - state.p_inj[nonref], S.imag[pq] - state.q_inj[pq]])


# ---------------------------------------------------------------------------
# derivatives


def _dS(Y, V):
    """dS/dtheta and dS/dv for ``S = V conj(Y V)`` (rows: outputs, cols: buses)."""
    I = Y @ V
    Vn = V / np.abs(V)
    dS_dth = 1j * (np.diag(V * np.conj(I)) - V[:, None] * np.conj(Y * V[None, :]))
    dS_dv = V[:, None] * np.conj(Y * Vn[None, :]) + np.diag(np.conj(I) * Vn)
    return dS_dth, dS_dv


def _dSbr(Yb, Cb, V):
    """Derivatives of ``S_b = (Cb V) conj(Yb V)`` for one set of line ends."""
    Ib = Yb @ V
    Vb = Cb @ V
    Vn = V / np.abs(V)
    dth = 1j * (np.conj(Ib)[:, None] * (Cb * V[None, :]) - Vb[:, None] * np.conj(Yb * V[None, :]))
    dv = np.conj(Ib)[:, None] * (Cb * Vn[None, :]) + Vb[:, None] * np.conj(Yb * Vn[None, :])
    return dth, dv


@dataclass(frozen=True)
class Jacobian:
    """Raw (unpartitioned) derivatives with respect to (v, theta) at every bus.

    ``fp_*``/``fq_*`` refer to from-end flows; ``tp_*``/``tq_*`` to to-end flows.
    """

    p_v: np.ndarray
    p_th: np.ndarray
    q_v: np.ndarray
    q_th: np.ndarray
    fp_v: np.ndarray
    fp_th: np.ndarray
    fq_v: np.ndarray
    fq_th: np.ndarray
    tp_v: np.ndarray
    tp_th: np.ndarray
    tq_v: np.ndarray
    tq_th: np.ndarray

    def full(self):
        """Bus block ``[[p_v, p_th], [q_v, q_th]]``."""
        return np.block([[self.p_v, self.p_th], [self.q_v, self.q_th]])


def pf_jacobian(net: Network, state: SystemState) -> Jacobian:
    _check(net, state.v, state.theta)
    V = state.v * np.exp(1j * state.theta)
    dth, dv = _dS(net.admittance, V)
    bm = branch_matrices(net)
    fth, fv = _dSbr(bm.Yf, bm.Cf, V)
    tth, tv = _dSbr(bm.Yt, bm.Ct, V)
    return Jacobian(p_v=dv.real, p_th=dth.real, q_v=dv.imag, q_th=dth.imag,
                    fp_v=fv.real, fp_th=fth.real, fq_v=fv.imag, fq_th=fth.imag,
                    tp_v=tv.real, tp_th=tth.real, tq_v=tv.imag, tq_th=tth.imag)


# ---------------------------------------------------------------------------
# Newton-Raphson


@dataclass
class OperatingPoint:
    state: SystemState
    p_G: np.ndarray
    q_G: np.ndarray
    residual_norm: float
    iterations: int = 0
    history: list = field(default_factory=list)

    @property
    def v(self):
        return self.state.v

    @property
    def theta(self):
        return self.state.theta


def specified_injections(net: Network, p_G, q_G, p_u=None, q_u=None):
    """Net bus injections ``p_G - p_D + p_U`` (and reactive analogue)."""
    p_u = net.p_u if p_u is None else np.asarray(p_u, dtype=float)
    q_u = net.q_u if q_u is None else np.asarray(q_u, dtype=float)
    p = -net.p_d + p_u
    q = -net.q_d + q_u
    np.add.at(p, net.gen_bus, p_G)
    np.add.at(q, net.gen_bus, q_G)
    return p, q


def newton_pf(net: Network, p_G=None, q_G=None, v_set=None, *, p_u=None, q_u=None,
              warm: SystemState | None = None, tol: float = 1e-8,
              max_iter: int = 30) -> OperatingPoint:
    """Solve the AC power flow for a given dispatch.

    ``p_G`` fixes active output everywhere except at the REF bus, which
    takes the slack.  ``q_G`` fixes reactive output at generators on PQ
    buses; PV and REF buses hold ``v_set`` (defaults to each generator's
    set-point) and absorb reactive mismatch.
    """
    pq, pv, ref = _index_sets(net)
    nonref = np.sort(np.concatenate([pq, pv]))
    p_G = np.zeros(net.n_gen) if p_G is None else np.asarray(p_G, float)
    q_G = np.zeros(net.n_gen) if q_G is None else np.asarray(q_G, float)
    if v_set is None:
        v_set = np.array([g.v_set for g in net.generators])
    v_set = np.asarray(v_set, float)
    if len(p_G) != net.n_gen or len(q_G) != net.n_gen or len(v_set) != net.n_gen:
        raise DimensionMismatch("dispatch vectors must have one entry per generator")
    p_spec, q_spec = specified_injections(net, p_G, q_G, p_u, q_u)

    if warm is not None:
        _check(net, warm.v, warm.theta)
        v, th = warm.v.astype(float).copy(), warm.theta.astype(float).copy()
    else:
        v, th = np.ones(net.n_bus), np.zeros(net.n_bus)
    for k, g in enumerate(net.generators):
        b = net.gen_bus[k]
        if net.buses[b].kind != BusKind.PQ:
            v[b] = v_set[k]
    th[ref] = 0.0 if warm is None else th[ref]

    def mismatch(v, th):
        S = injections(net, v, th)
        return np.concatenate([S.real[nonref] - p_spec[nonref], S.imag[pq] - q_spec[pq]])

    F = mismatch(v, th)
    norm = np.max(np.abs(F), initial=0.0)
    history = [float(norm)]
    it = 0
    while norm > tol:
        if it >= max_iter:
            raise NonConvergence(it, norm)
        V = v * np.exp(1j * th)
        dth, dv = _dS(net.admittance, V)
        J = np.block([[dth.real[np.ix_(nonref, nonref)], dv.real[np.ix_(nonref, pq)]],
                      [dth.imag[np.ix_(pq, nonref)], dv.imag[np.ix_(pq, pq)]]])
        try:
            dx = -sla.solve(J, F)
        except (sla.LinAlgError, ValueError) as exc:
            raise NonConvergence(it, norm) from exc
        step = 1.0
        for _ in range(7):
            th_new, v_new = th.copy(), v.copy()
            th_new[nonref] += step * dx[:len(nonref)]
            v_new[pq] += step * dx[len(nonref):]
            F_new = mismatch(v_new, th_new)
            norm_new = np.max(np.abs(F_new), initial=0.0)
            if np.isfinite(norm_new) and norm_new < norm:
                break
            step *= 0.5
        # accept the last trial even if halving did not help; the iteration
        # cap turns persistent failure into NonConvergence
        it += 1
        if np.any(v_new <= V_SAFE[0]) or np.any(v_new >= V_SAFE[1]):
            raise VoltageCollapse(f"voltage left {V_SAFE} at iteration {it} "
                                  f"(min {v_new.min():.3f}, max {v_new.max():.3f})")
        th, v, F, norm = th_new, v_new, F_new, norm_new
        history.append(float(norm))
        if not np.isfinite(norm):
            raise NonConvergence(it, norm)

    state = evaluate_state(net, v, th)
    pG_out, qG_out = dispatch_from_state(net, state, p_G, q_G, p_u, q_u)
    return OperatingPoint(state=state, p_G=pG_out, q_G=qG_out, residual_norm=float(norm),
                          iterations=it, history=history)


def dispatch_from_state(net, state, p_G=None, q_G=None, p_u=None, q_u=None):
    """Generator outputs implied by a state: slack at REF, reactive at PV/REF."""
    p_u = net.p_u if p_u is None else np.asarray(p_u, float)
    q_u = net.q_u if q_u is None else np.asarray(q_u, float)
    p_need = state.p_inj + net.p_d - p_u
    q_need = state.q_inj + net.q_d - q_u
    pG = p_need[net.gen_bus].copy()
    qG = q_need[net.gen_bus].copy()
    for k in range(net.n_gen):
        kind = net.buses[net.gen_bus[k]].kind
        if p_G is not None and kind != BusKind.REF:
            pG[k] = p_G[k]
        if q_G is not None and kind == BusKind.PQ:
            qG[k] = q_G[k]
    return pG, qG


# ---------------------------------------------------------------------------
# operating-point files


def point_to_dict(point: OperatingPoint) -> dict:
    return {"schema_version": 1, "v": point.v.tolist(), "theta": point.theta.tolist(),
            "p": point.state.p_inj.tolist(), "q": point.state.q_inj.tolist(),
            "p_G": point.p_G.tolist(), "q_G": point.q_G.tolist()}


def point_from_dict(net: Network, doc: dict, tol: float = 1e-6) -> OperatingPoint:
    """Rebuild an operating point from stored voltages.

    Only (v, theta) define the point; injections are recomputed and the
    stored ones, if present, are checked for consistency.
    """
    v = np.asarray(doc["v"], float)
    th = np.asarray(doc["theta"], float)
    state = evaluate_state(net, v, th)
    for key, calc in (("p", state.p_inj), ("q", state.q_inj)):
        if key in doc:
            given = np.asarray(doc[key], float)
            if given.shape != calc.shape:
                raise DimensionMismatch(f"operating point '{key}' has the wrong length")
            err = np.max(np.abs(given - calc), initial=0.0)
            if err > tol:
                log.warning("stored '%s' injections differ from recomputed ones by %.2e", key, err)
    pG, qG = dispatch_from_state(net, state)
    if "p_G" in doc:
        pG = np.asarray(doc["p_G"], float)
    if "q_G" in doc:
        qG = np.asarray(doc["q_G"], float)
    p_spec, q_spec = specified_injections(net, pG, qG)
    res = np.max(np.abs(np.concatenate([state.p_inj - p_spec, state.q_inj - q_spec])), initial=0.0)
    return OperatingPoint(state=state, p_G=pG, q_G=qG, residual_norm=float(res))


def load_point(net: Network, path) -> OperatingPoint:
    with open(path) as fh:
        return point_from_dict(net, json.load(fh))


def save_point(point: OperatingPoint, path):
    with open(path, "w") as fh:
        json.dump(point_to_dict(point), fh, indent=1)
