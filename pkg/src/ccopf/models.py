"""Conic programs for the deterministic and chance-constrained OPF variants.

Every model is linearized around one operating point: balance and flow
rows are affine in deviation form, chance constraints become linear rows
tightened by standard-deviation variables ``t`` bounded through SOC rows.

Variable and row names used in the registry:

    variables  p_G q_G v theta fp fq alpha t_q rho_q t_v rho_v
               t_fp rho_fp a_fp t_fq rho_fq a_fq
    equalities lambda_p lambda_q beta_p beta_q theta_ref chi nu_q nu_v nu_fp nu_fq
    linear <=  delta_p_plus delta_p_minus delta_q_plus delta_q_minus mu_plus mu_minus
               alpha_lo alpha_hi xi_fp_plus xi_fp_minus xi_fp_zero
               xi_fq_plus xi_fq_minus xi_fq_zero
    SOC        eta zeta_q zeta_v zeta_fp zeta_fq
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .conic import ConicProgram, NonNegative, SecondOrder
from .errors import InfeasibleBounds, InfeasibleReserve
from .network import Network
from .powerflow import OperatingPoint
from .sensitivities import SensitivityFactors
from .stochastic import RiskParams, Uncertainty, VariancePenalties


class ModelKind(str, enum.Enum):
    DET = "det"
    GEN_CC = "gen-cc"
    EQV_CC = "eqv-cc"
    VA_CC = "va-cc"


SOC_KEYS = ("q", "v", "fp", "fq")


@dataclass
class Registry:
    variables: dict = field(default_factory=dict)
    equalities: dict = field(default_factory=dict)
    inequalities: dict = field(default_factory=dict)
    socs: dict = field(default_factory=dict)

    def has(self, name):
        return any(name in d for d in (self.variables, self.equalities, self.inequalities,
                                       self.socs))

    def to_dict(self):
        conv = lambda d: {k: np.asarray(v).tolist() for k, v in d.items()}
        return {"variables": conv(self.variables), "equalities": conv(self.equalities),
                "inequalities": conv(self.inequalities), "socs": conv(self.socs)}


class _Builder:
    """Accumulates named variables and rows as sparse triplets."""

    def __init__(self):
        self.n = 0
        self.reg = Registry()
        self.eq = ([], [], [], [])       # rows, cols, vals, rhs
        self.lin = ([], [], [], [])
        self.soc_blocks = []             # (name, rows, cols, vals, h)
        self.P_diag = {}
        self.c = {}

    def var(self, name, size):
        idx = np.arange(self.n, self.n + size)
        self.n += size
        self.reg.variables[name] = idx
        return idx

    @staticmethod
    def _triplets(blocks, nrows, row0):
        rows, cols, vals = [], [], []
        for idx, M in blocks:
            M = sp.coo_matrix(np.atleast_2d(M) if not sp.issparse(M) else M)
            if M.shape != (nrows, len(idx)):
                raise ValueError(f"block shape {M.shape} != {(nrows, len(idx))}")
            rows.append(M.row + row0)
            cols.append(np.asarray(idx)[M.col])
            vals.append(M.data)
        cat = lambda xs: np.concatenate(xs) if xs else np.zeros(0)
        return cat(rows).astype(int), cat(cols).astype(int), cat(vals)

    def _add(self, store, registry, name, blocks, rhs):
        rhs = np.atleast_1d(np.asarray(rhs, dtype=float))
        row0 = sum(len(r) for r in store[3])
        r, c, v = self._triplets(blocks, len(rhs), row0)
        store[0].append(r)
        store[1].append(c)
        store[2].append(v)
        store[3].append(rhs)
        registry[name] = np.arange(row0, row0 + len(rhs))

    def add_eq(self, name, blocks, rhs):
        self._add(self.eq, self.reg.equalities, name, blocks, rhs)

    def add_leq(self, name, blocks, rhs):
        self._add(self.lin, self.reg.inequalities, name, blocks, rhs)

    def add_soc(self, name, blocks, h):
        """One cone ``h - G x in Q`` with ``G`` given by ``blocks``."""
        h = np.asarray(h, dtype=float)
        r, c, v = self._triplets(blocks, len(h), 0)
        self.soc_blocks.append((name, r, c, v, h))

    def quad(self, idx, diag):
        for i, d in zip(idx, np.broadcast_to(diag, (len(idx),))):
            self.P_diag[i] = self.P_diag.get(i, 0.0) + float(d)

    def lin_cost(self, idx, coef):
        for i, d in zip(idx, np.broadcast_to(coef, (len(idx),))):
            self.c[i] = self.c.get(i, 0.0) + float(d)

    def build(self, const=0.0):
        n = self.n

        def stack(store):
            if not store[3]:
                return sp.csc_matrix((0, n)), np.zeros(0)
            rhs = np.concatenate(store[3])
            M = sp.csc_matrix((np.concatenate(store[2]), (np.concatenate(store[0]),
                                                           np.concatenate(store[1]))),
                              shape=(len(rhs), n))
            return M, rhs

        A, b = stack(self.eq)
        Gl, hl = stack(self.lin)
        cones = [NonNegative(len(hl))] if len(hl) else []
        g_rows, h_parts = [Gl], [hl]
        offset = len(hl)
        socs = {}
        for name, r, c, v, h in self.soc_blocks:
            g_rows.append(sp.csc_matrix((v, (r, c)), shape=(len(h), n)))
            h_parts.append(h)
            cones.append(SecondOrder(len(h)))
            socs.setdefault(name, []).append(offset)
            offset += len(h)
        self.reg.socs = {k: np.array(v) for k, v in socs.items()}
        self.soc_dims = {name: len(h) for name, *_, h in self.soc_blocks}
        G = sp.vstack(g_rows, format="csc") if g_rows else sp.csc_matrix((0, n))
        h = np.concatenate(h_parts) if h_parts else np.zeros(0)
        idx = np.array(sorted(self.P_diag), dtype=int)
        P = sp.csc_matrix((np.array([self.P_diag[i] for i in idx]), (idx, idx)), shape=(n, n))
        c = np.zeros(n)
        for i, val in self.c.items():
            c[i] = val
        return ConicProgram(P=P, c=c, A=A, b=b, G=G, h=h, cones=cones, const=const)


@dataclass
class SocData:
    """Constant data of the standard-deviation cones for one quantity."""

    C: np.ndarray      # rows of (R_w + X_w diag(gamma)) B
    R_g: np.ndarray    # R restricted to generator buses (rows x generators)
    d: np.ndarray      # B' e


@dataclass
class ModelInstance:
    kind: ModelKind
    program: ConicProgram
    registry: Registry
    net: Network
    point: OperatingPoint
    sf: SensitivityFactors
    unc: Uncertainty | None = None
    risk: RiskParams | None = None
    psi: VariancePenalties | None = None
    soc_data: dict = field(default_factory=dict)

    @property
    def S(self):
        return self.unc.s_total if self.unc is not None else 0.0

    def var(self, x, name):
        return x[self.registry.variables[name]]

    def to_dict(self):
        """Sparse conic export plus the registry, for cross-solver debugging."""
        return {"kind": self.kind.value, "program": self.program.to_dict(),
                "registry": self.registry.to_dict()}


# ---------------------------------------------------------------------------


def _check_bounds(net):
    for g in net.generators:
        if g.p_min > g.p_max or g.q_min > g.q_max:
            raise InfeasibleBounds(f"generator at bus {g.bus} has inverted limits")


def _gen_matrix(net):
    """Bus x generator incidence."""
    M = np.zeros((net.n_bus, net.n_gen))
    M[net.gen_bus, np.arange(net.n_gen)] = 1.0
    return M


def _base(b: _Builder, net: Network, point: OperatingPoint, sf: SensitivityFactors,
          flow_vars_in_eta=True):
    N, L, Gn = net.n_bus, net.n_line, net.n_gen
    pG = b.var("p_G", Gn)
    qG = b.var("q_G", Gn)
    v = b.var("v", N)
    th = b.var("theta", N)
    fp = b.var("fp", L)
    fq = b.var("fq", L)
    jac = sf.jacobian
    st = point.state
    vbar, tbar = st.v, st.theta
    Mg = _gen_matrix(net)
    # p_G - J (x - xbar) = pbar + p_D - p_U  (per bus)
    b.add_eq("lambda_p", [(pG, Mg), (v, -jac.p_v), (th, -jac.p_th)],
             st.p_inj - jac.p_v @ vbar - jac.p_th @ tbar + net.p_d - net.p_u)
    b.add_eq("lambda_q", [(qG, Mg), (v, -jac.q_v), (th, -jac.q_th)],
             st.q_inj - jac.q_v @ vbar - jac.q_th @ tbar + net.q_d - net.q_u)
    if L:
        I = np.eye(L)
        b.add_eq("beta_p", [(fp, I), (v, -jac.fp_v), (th, -jac.fp_th)],
                 st.fp_from - jac.fp_v @ vbar - jac.fp_th @ tbar)
        b.add_eq("beta_q", [(fq, I), (v, -jac.fq_v), (th, -jac.fq_th)],
                 st.fq_from - jac.fq_v @ vbar - jac.fq_th @ tbar)
    ref = net.ref
    b.add_eq("theta_ref", [(th[[ref]], np.ones((1, 1)))], [tbar[ref]])
    c2 = np.array([g.c2 for g in net.generators])
    c1 = np.array([g.c1 for g in net.generators])
    b.quad(pG, 2.0 * c2)
    b.lin_cost(pG, c1)
    return c2


def _bounds(b, net, z_p_S=None, z_q=None, z_v=None):
    """Generator and voltage boxes, optionally tightened by reserve / sigma terms."""
    v = b.reg.variables
    Gn, N = net.n_gen, net.n_bus
    pmax = np.array([g.p_max for g in net.generators])
    pmin = np.array([g.p_min for g in net.generators])
    qmax = np.array([g.q_max for g in net.generators])
    qmin = np.array([g.q_min for g in net.generators])
    vmax = np.array([bb.v_max for bb in net.buses])
    vmin = np.array([bb.v_min for bb in net.buses])
    Ig, In = np.eye(Gn), np.eye(N)
    extra_p = [(v["alpha"], z_p_S * Ig)] if z_p_S is not None else []
    extra_q = [(v["t_q"], z_q * Ig)] if z_q is not None else []
    extra_v = [(v["t_v"], z_v * In)] if z_v is not None else []
    b.add_leq("delta_p_plus", [(v["p_G"], Ig)] + extra_p, pmax)
    b.add_leq("delta_p_minus", [(v["p_G"], -Ig)] + extra_p, -pmin)
    b.add_leq("delta_q_plus", [(v["q_G"], Ig)] + extra_q, qmax)
    b.add_leq("delta_q_minus", [(v["q_G"], -Ig)] + extra_q, -qmin)
    b.add_leq("mu_plus", [(v["v"], In)] + extra_v, vmax)
    b.add_leq("mu_minus", [(v["v"], -In)] + extra_v, -vmin)


def _eta(b, net, p_name, q_name):
    v = b.reg.variables
    for k, line in enumerate(net.lines):
        b.add_soc("eta", [(v[p_name][[k]], -np.array([[0.0], [1.0], [0.0]])),
                          (v[q_name][[k]], -np.array([[0.0], [0.0], [1.0]]))],
                  [line.s_max, 0.0, 0.0])


def _alpha_block(b, net, unc, risk, c2, psi_p=None):
    Gn = net.n_gen
    a = b.var("alpha", Gn)
    b.add_eq("chi", [(a, np.ones((1, Gn)))], [1.0])
    b.add_leq("alpha_lo", [(a, -np.eye(Gn))], np.zeros(Gn))
    b.add_leq("alpha_hi", [(a, np.eye(Gn))], np.ones(Gn))
    S2 = unc.s_total ** 2
    w = c2 if psi_p is None else c2 + psi_p
    b.quad(a, 2.0 * w * S2)
    zS = risk.z_p * unc.s_total
    pmax = np.array([g.p_max for g in net.generators])
    pmin = np.array([g.p_min for g in net.generators])
    if zS > (pmax - pmin).sum() / 2 + 1e-12 and Gn:
        # even splitting reserve over every unit cannot fit both bounds
        raise InfeasibleReserve(f"reserve z_p*S = {zS:.4g} exceeds total headroom")
    return zS


def build_det(net: Network, point: OperatingPoint, sf: SensitivityFactors) -> ModelInstance:
    _check_bounds(net)
    b = _Builder()
    _base(b, net, point, sf)
    _bounds(b, net)
    _eta(b, net, "fp", "fq")
    prog = b.build(const=sum(g.c0 for g in net.generators))
    return ModelInstance(ModelKind.DET, prog, b.reg, net, point, sf)


def build_gen_cc(net, point, sf, unc: Uncertainty, risk: RiskParams) -> ModelInstance:
    _check_bounds(net)
    b = _Builder()
    c2 = _base(b, net, point, sf)
    zS = _alpha_block(b, net, unc, risk, c2)
    _bounds(b, net, z_p_S=zS)
    _eta(b, net, "fp", "fq")
    prog = b.build(const=sum(g.c0 for g in net.generators))
    return ModelInstance(ModelKind.GEN_CC, prog, b.reg, net, point, sf, unc, risk)


def soc_data(net, sf, unc) -> dict:
    B = unc.root
    gamma = net.gamma
    out = {}
    for key in SOC_KEYS:
        R_w, X_w, R_g = sf.wind_columns(key)
        C = (R_w + X_w * gamma[None, :]) @ B
        out[key] = SocData(C=C, R_g=R_g, d=unc.d)
    return out


def build_eqv_cc(net, point, sf, unc: Uncertainty, risk: RiskParams,
                 psi: VariancePenalties | None = None) -> ModelInstance:
    """EQV-CC; with ``psi`` the variance-penalized VA-CC objective is added."""
    _check_bounds(net)
    if unc.n != net.n_wind:
        raise ValueError(f"uncertainty has {unc.n} units, network has {net.n_wind}")
    b = _Builder()
    c2 = _base(b, net, point, sf)
    zS = _alpha_block(b, net, unc, risk, c2, None if psi is None else psi.psi_p)
    Gn, N, L = net.n_gen, net.n_bus, net.n_line
    sizes = {"q": Gn, "v": N, "fp": L, "fq": L}
    for key in SOC_KEYS:
        b.var("t_" + key, sizes[key])
        b.var("rho_" + key, sizes[key])
    for key in ("fp", "fq"):
        b.var("a_" + key, L)
    _bounds(b, net, z_p_S=zS, z_q=risk.z_q, z_v=risk.z_v)
    v = b.reg.variables
    data = soc_data(net, sf, unc)
    n_w = unc.n
    for key in SOC_KEYS:
        D = data[key]
        m = sizes[key]
        if m == 0:
            continue
        b.add_eq("nu_" + key, [(v["alpha"], D.R_g), (v["rho_" + key], -np.eye(m))], np.zeros(m))
        t, rho = v["t_" + key], v["rho_" + key]
        Gt = np.zeros((n_w + 1, 1))
        Gt[0, 0] = -1.0
        Grho = np.concatenate([[0.0], D.d])[:, None]
        for j in range(m):
            b.add_soc("zeta_" + key, [(t[[j]], Gt), (rho[[j]], Grho)],
                      np.concatenate([[0.0], D.C[j]]))
    IL = np.eye(L)
    for key in ("fp", "fq"):
        if not L:
            continue
        f, t, a = v[key], v["t_" + key], v["a_" + key]
        b.add_leq(f"xi_{key}_plus", [(a, -IL), (t, risk.z_f25 * IL), (f, -IL)], np.zeros(L))
        b.add_leq(f"xi_{key}_minus", [(a, -IL), (t, risk.z_f25 * IL), (f, IL)], np.zeros(L))
        b.add_leq(f"xi_{key}_zero", [(a, -IL), (t, risk.z_f5 * IL)], np.zeros(L))
    _eta(b, net, "a_fp", "a_fq")
    kind = ModelKind.EQV_CC
    if psi is not None:
        kind = ModelKind.VA_CC
        for key, w in (("q", psi.psi_q), ("v", psi.psi_v), ("fp", psi.psi_fp),
                       ("fq", psi.psi_fq)):
            b.quad(v["t_" + key], 2.0 * w)
    prog = b.build(const=sum(g.c0 for g in net.generators))
    return ModelInstance(kind, prog, b.reg, net, point, sf, unc, risk, psi, data)


def build_va_cc(net, point, sf, unc, risk, psi: VariancePenalties) -> ModelInstance:
    return build_eqv_cc(net, point, sf, unc, risk, psi)


def build_model(kind, net, point, sf, unc=None, risk=None, psi=None) -> ModelInstance:
    kind = ModelKind(kind)
    if kind == ModelKind.DET:
        return build_det(net, point, sf)
    if kind == ModelKind.GEN_CC:
        return build_gen_cc(net, point, sf, unc, risk)
    if kind == ModelKind.EQV_CC:
        return build_eqv_cc(net, point, sf, unc, risk)
    return build_va_cc(net, point, sf, unc, risk, psi if psi is not None else
                       VariancePenalties.zero(net))


def expected_generation_cost(inst: ModelInstance, x) -> float:
    """``sum c(p_G) + alpha^2 S^2 / (2b)`` at a primal point."""
    pG = inst.var(x, "p_G")
    cost = sum(g.cost(p) for g, p in zip(inst.net.generators, pG))
    if "alpha" in inst.registry.variables:
        al = inst.var(x, "alpha")
        cost += sum(g.c2 * a * a for g, a in zip(inst.net.generators, al)) * inst.S ** 2
    return float(cost)


def v_metric(inst: ModelInstance, x) -> float:
    """Un-weighted sum of squared standard-deviation variables."""
    if "t_q" not in inst.registry.variables:
        return 0.0
    return float(sum(np.sum(inst.var(x, "t_" + k) ** 2) for k in SOC_KEYS))
