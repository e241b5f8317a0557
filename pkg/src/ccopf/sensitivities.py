"""Response of uncontrolled quantities to nodal disturbances.

The bus Jacobian is partitioned by control role.  Controlled variables
(v at PV and REF buses, theta at REF) stay put, so a disturbance in the
specified injections ``(p at PQ, p at PV, q at PQ)`` moves the remaining
state through ``J_A^{-1}``.  Everything else (slack injections, reactive
output at voltage-controlled buses, line flows) follows by chaining.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg as sla

from .errors import SingularJA
from .network import BusKind, Network
from .powerflow import Jacobian, OperatingPoint, pf_jacobian


@dataclass(frozen=True)
class NodePartition:
    pq: np.ndarray
    pv: np.ndarray
    ref: np.ndarray

    @classmethod
    def from_network(cls, net: Network):
        kinds = [b.kind for b in net.buses]
        pick = lambda k: np.array([i for i, x in enumerate(kinds) if x == k], dtype=int)
        return cls(pick(BusKind.PQ), pick(BusKind.PV), pick(BusKind.REF))

    @property
    def n(self):
        return len(self.pq) + len(self.pv) + len(self.ref)

    @property
    def order(self):
        """Partitioned position -> raw bus position."""
        return np.concatenate([self.pq, self.pv, self.ref])

    @property
    def inverse(self):
        inv = np.empty(self.n, dtype=int)
        inv[self.order] = np.arange(self.n)
        return inv

    # row/column index sets into the stacked [p; q] and [v; theta] vectors
    def a_rows(self):
        n = self.n
        return np.concatenate([self.pq, self.pv, n + self.pq])

    def c_rows(self):
        n = self.n
        return np.concatenate([self.ref, n + self.pv, n + self.ref])

    def a_cols(self):
        n = self.n
        return np.concatenate([self.pq, n + self.pq, n + self.pv])

    def b_cols(self):
        n = self.n
        return np.concatenate([self.pv, n + self.ref, self.ref])


@dataclass(frozen=True)
class JacobianBlocks:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    partition: NodePartition

    def reassemble(self):
        """Inverse permutation back to the raw ``[[p_v, p_th], [q_v, q_th]]`` layout."""
        P = self.partition
        rows = np.concatenate([P.a_rows(), P.c_rows()])
        cols = np.concatenate([P.a_cols(), P.b_cols()])
        M = np.block([[self.A, self.B], [self.C, self.D]])
        out = np.empty_like(M)
        out[np.ix_(rows, cols)] = M
        return out


def partition_jacobian(jac: Jacobian, partition: NodePartition) -> JacobianBlocks:
    J = jac.full()
    P = partition
    ar, cr, ac, bc = P.a_rows(), P.c_rows(), P.a_cols(), P.b_cols()
    return JacobianBlocks(A=J[np.ix_(ar, ac)], B=J[np.ix_(ar, bc)], C=J[np.ix_(cr, ac)],
                          D=J[np.ix_(cr, bc)], partition=P)


def _factor(A):
    if A.size == 0:
        return None
    try:
        lu, piv = sla.lu_factor(A, check_finite=True)
    except (ValueError, sla.LinAlgError) as exc:
        raise SingularJA(str(exc)) from exc
    d = np.abs(np.diag(lu))
    if d.min() <= 1e-12 * max(1.0, d.max()):
        raise SingularJA(f"J_A is numerically singular (pivot ratio {d.min() / d.max():.2e})")
    return lu, piv


@dataclass(frozen=True)
class SensitivityFactors:
    """Bus-level response matrices at one operating point.

    ``R_*[:, k]`` is the response to a unit active injection at bus ``k``;
    ``X_*[:, k]`` the response to a unit reactive injection at bus ``k``.
    Rows: ``*_q`` per generator, ``*_v`` per bus, ``*_fp``/``*_fq`` per line
    (from-end flow).
    """

    blocks: JacobianBlocks
    R_q: np.ndarray
    X_q: np.ndarray
    R_v: np.ndarray
    X_v: np.ndarray
    R_fp: np.ndarray
    X_fp: np.ndarray
    R_fq: np.ndarray
    X_fq: np.ndarray
    R_th: np.ndarray
    X_th: np.ndarray
    R_p: np.ndarray
    X_p: np.ndarray
    jacobian: Jacobian
    gen_bus: np.ndarray
    wind_bus: np.ndarray

    def matrices(self):
        return {"q": (self.R_q, self.X_q), "v": (self.R_v, self.X_v),
                "fp": (self.R_fp, self.X_fp), "fq": (self.R_fq, self.X_fq)}

    def wind_columns(self, key):
        """(R_w, X_w, R_g): columns at wind buses and, for R, at generator buses."""
        R, X = self.matrices()[key]
        return R[:, self.wind_bus], X[:, self.wind_bus], R[:, self.gen_bus]

    def compose(self, key, alpha, gamma):
        """``R (I - alpha e') + X diag(gamma)`` in wind-unit coordinates."""
        R_w, X_w, R_g = self.wind_columns(key)
        return R_w - np.outer(R_g @ alpha, np.ones(R_w.shape[1])) + X_w * gamma[None, :]

    @cached_property
    def injection_response(self):
        """Linearized response of all bus injections (active, reactive)."""
        return self.R_p, self.X_p


def response_matrices(net: Network, point: OperatingPoint,
                      partition: NodePartition | None = None) -> SensitivityFactors:
    P = partition or NodePartition.from_network(net)
    jac = pf_jacobian(net, point.state)
    blocks = partition_jacobian(jac, P)
    fac = _factor(blocks.A)
    n = net.n_bus
    n_pq, n_pv = len(P.pq), len(P.pv)

    # disturbance right-hand sides: unit active injection at every bus,
    # unit reactive injection at every bus (zero where the bus absorbs it)
    na = blocks.A.shape[0]
    rhs_p = np.zeros((na, n))
    rhs_p[np.arange(n_pq), P.pq] = 1.0
    rhs_p[n_pq + np.arange(n_pv), P.pv] = 1.0
    rhs_q = np.zeros((na, n))
    rhs_q[n_pq + n_pv + np.arange(n_pq), P.pq] = 1.0
    if fac is None:
        dx_p = np.zeros((0, n))
        dx_q = np.zeros((0, n))
    else:
        dx_p = sla.lu_solve(fac, rhs_p)
        dx_q = sla.lu_solve(fac, rhs_q)

    def lift(dx):
        # uncontrolled increments -> full (dv, dtheta) per bus
        dv = np.zeros((n, dx.shape[1]))
        dth = np.zeros((n, dx.shape[1]))
        dv[P.pq] = dx[:n_pq]
        dth[P.pq] = dx[n_pq:2 * n_pq]
        dth[P.pv] = dx[2 * n_pq:]
        return dv, dth

    dv_p, dth_p = lift(dx_p)
    dv_q, dth_q = lift(dx_q)

    # implicit injection changes at every bus (equal to the disturbance at
    # buses whose injection is specified, slack response elsewhere)
    R_p = jac.p_v @ dv_p + jac.p_th @ dth_p
    X_p = jac.p_v @ dv_q + jac.p_th @ dth_q
    R_qi = jac.q_v @ dv_p + jac.q_th @ dth_p
    X_qi = jac.q_v @ dv_q + jac.q_th @ dth_q

    # generator reactive output q_G = q_inj + q_D - q_U: the disturbance
    # itself is an injection, so PV/REF units back it off one-for-one
    gb = net.gen_bus
    R_q = R_qi[gb].copy()
    X_q = X_qi[gb].copy()
    for k, b in enumerate(gb):
        if net.buses[b].kind == BusKind.PQ:
            R_q[k] = 0.0
            X_q[k] = 0.0
        else:
            X_q[k, b] -= 1.0

    R_fp = jac.fp_v @ dv_p + jac.fp_th @ dth_p
    X_fp = jac.fp_v @ dv_q + jac.fp_th @ dth_q
    R_fq = jac.fq_v @ dv_p + jac.fq_th @ dth_p
    X_fq = jac.fq_v @ dv_q + jac.fq_th @ dth_q

    return SensitivityFactors(blocks=blocks, R_q=R_q, X_q=X_q, R_v=dv_p, X_v=dv_q,
                              R_fp=R_fp, X_fp=X_fp, R_fq=R_fq, X_fq=X_fq, R_th=dth_p,
                              X_th=dth_q, R_p=R_p, X_p=X_p, jacobian=jac, gen_bus=gb,
                              wind_bus=net.wind_bus)


def dump_csv(sf: SensitivityFactors, net: Network, path):
    """Long-format dump: matrix, row label, disturbance bus id, value."""
    labels = {
        "q": [f"gen@{net.buses[b].id}" for b in sf.gen_bus],
        "v": [f"bus{b.id}" for b in net.buses],
        "fp": [f"line{l.from_bus}-{l.to_bus}" for l in net.lines],
        "fq": [f"line{l.from_bus}-{l.to_bus}" for l in net.lines],
    }
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["matrix", "row", "bus", "value"])
        for key, (R, X) in sf.matrices().items():
            for name, M in (("R_" + key, R), ("X_" + key, X)):
                for i, lab in enumerate(labels[key]):
                    for k, b in enumerate(net.buses):
                        if M[i, k] != 0.0:
                            w.writerow([name, lab, b.id, repr(float(M[i, k]))])
