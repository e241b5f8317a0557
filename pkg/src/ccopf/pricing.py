"""Dual extraction and the price decompositions of the chance-constrained models.

Sign conventions (fixed here, once):

* equality duals are reported as ``-y`` of the solver, so nodal prices are
  positive when extra demand raises cost;
* every inequality and cone dual is reported non-negative;
* ``eta`` is the multiplier of ``fp^2 + fq^2 <= s_max^2``, recovered from
  the SOC dual ``(z0, z1, z2)`` of ``||(fp, fq)|| <= s_max`` as ``z0 / (2 s_max)``.

With these conventions the stationarity conditions give

    lambda_p = (p_G + a) / b + delta_p_plus - delta_p_minus
    lambda_q = delta_q_plus - delta_q_minus
    alpha_i S^2 / b_eff_i = chi + y_i - z_p S (delta_p_plus + delta_p_minus)_i
                            - (alpha_hi - alpha_lo)_i

where ``y_i = sum_j [R_j]_i zeta_j (c_j.d - rho_j S^2) / sigma_j`` over all
standard-deviation cones and ``b_eff = b / (1 + 2 psi_p b)``.  Summing with
``sum alpha = 1`` yields the balancing-price reconstruction used below.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .conic import SolveResult, Status
from .errors import DegenerateSigma, MissingConstraint, NegativeZeta, NotOptimal
from .models import SOC_KEYS, ModelInstance, ModelKind

log = logging.getLogger(__name__)

REPORT_SCHEMA = 1
ZETA_TOL = 1e-7
SIGMA_TOL = 1e-10

# linear rows whose duals are rents, keyed by report name
_LINEAR = ("delta_p_plus", "delta_p_minus", "delta_q_plus", "delta_q_minus", "mu_plus",
           "mu_minus", "alpha_lo", "alpha_hi", "xi_fp_plus", "xi_fp_minus", "xi_fp_zero",
           "xi_fq_plus", "xi_fq_minus", "xi_fq_zero")
_EQUAL = ("lambda_p", "lambda_q", "beta_p", "beta_q", "chi", "nu_q", "nu_v", "nu_fp", "nu_fq")
_SOC = ("eta", "zeta_q", "zeta_v", "zeta_fp", "zeta_fq")

# which rows every model must carry
_REQUIRED = {
    ModelKind.DET: ("lambda_p", "lambda_q", "beta_p", "beta_q", "delta_p_plus", "delta_p_minus",
                    "delta_q_plus", "delta_q_minus", "mu_plus", "mu_minus", "eta"),
}
_REQUIRED[ModelKind.GEN_CC] = _REQUIRED[ModelKind.DET] + ("chi", "alpha_lo", "alpha_hi")
_REQUIRED[ModelKind.EQV_CC] = _REQUIRED[ModelKind.GEN_CC] + (
    "nu_q", "nu_v", "zeta_q", "zeta_v", "xi_fp_plus", "xi_fp_minus", "xi_fp_zero",
    "xi_fq_plus", "xi_fq_minus", "xi_fq_zero")
_REQUIRED[ModelKind.VA_CC] = _REQUIRED[ModelKind.EQV_CC]


@dataclass
class DualSolution:
    """Named multipliers; ``absent`` lists symbols the model does not have (held at zero)."""

    values: dict
    soc_vectors: dict
    absent: tuple = ()

    def __getattr__(self, name):
        try:
            return self.__dict__["values"][name]
        except KeyError as exc:
            raise AttributeError(name) from exc

    def min_inequality(self):
        vals = [np.min(v) for k, v in self.values.items() if k not in _EQUAL and np.size(v)]
        return float(min(vals)) if vals else 0.0


def _sizes(inst):
    net = inst.net
    return {"lambda_p": net.n_bus, "lambda_q": net.n_bus, "beta_p": net.n_line,
            "beta_q": net.n_line, "chi": 1, "nu_q": net.n_gen, "nu_v": net.n_bus,
            "nu_fp": net.n_line, "nu_fq": net.n_line, "delta_p_plus": net.n_gen,
            "delta_p_minus": net.n_gen, "delta_q_plus": net.n_gen, "delta_q_minus": net.n_gen,
            "mu_plus": net.n_bus, "mu_minus": net.n_bus, "alpha_lo": net.n_gen,
            "alpha_hi": net.n_gen, "eta": net.n_line, "zeta_q": net.n_gen,
            "zeta_v": net.n_bus, "zeta_fp": net.n_line, "zeta_fq": net.n_line,
            **{k: net.n_line for k in _LINEAR if k.startswith("xi_")}}


def extract_duals(inst: ModelInstance, result: SolveResult) -> DualSolution:
    if result.status != Status.OPTIMAL:
        raise NotOptimal(f"solve status is {result.status.value}")
    reg = inst.registry
    for name in _REQUIRED[inst.kind]:
        if not reg.has(name) and _sizes(inst)[name] > 0:
            raise MissingConstraint(f"{inst.kind.value} model lacks row '{name}'")
    sizes = _sizes(inst)
    values, vectors, absent = {}, {}, []
    for name in _EQUAL:
        if name in reg.equalities:
            values[name] = -result.y[reg.equalities[name]]
        else:
            values[name] = np.zeros(sizes[name])
            absent.append(name)
    for name in _LINEAR:
        if name in reg.inequalities:
            values[name] = result.z[reg.inequalities[name]]
        else:
            values[name] = np.zeros(sizes[name])
            absent.append(name)
    for name in _SOC:
        starts = reg.socs.get(name)
        if starts is None or len(starts) == 0:
            values[name] = np.zeros(sizes[name])
            vectors[name] = np.zeros((sizes[name], 0))
            if sizes[name] or name != "eta":
                absent.append(name)
            continue
        dim = _soc_dim(inst, name)
        Z = np.stack([result.z[s:s + dim] for s in starts])
        vectors[name] = Z
        if name == "eta":
            smax = np.array([l.s_max for l in inst.net.lines])
            values[name] = Z[:, 0] / (2.0 * smax)
        else:
            values[name] = Z[:, 0]
    values["chi"] = values["chi"].reshape(-1)
    return DualSolution(values=values, soc_vectors=vectors, absent=tuple(absent))


def _soc_dim(inst, name):
    return 3 if name == "eta" else inst.unc.n + 1


# ---------------------------------------------------------------------------
# decompositions


def decompose_lambda(duals: DualSolution, gens, p_G):
    """Per-generator residuals of the nodal-price identities.

    Returns ``(res_p, res_q)`` in the units of the duals (per-unit prices).
    """
    a = np.array([g.a for g in gens])
    b = np.array([g.b for g in gens])
    return _lambda_parts(duals, a, b, p_G)


def _lambda_parts(duals, a, b, p_G, gen_bus=None):
    lp = duals.lambda_p if gen_bus is None else duals.lambda_p[gen_bus]
    lq = duals.lambda_q if gen_bus is None else duals.lambda_q[gen_bus]
    formula_p = (p_G + a) / b + duals.delta_p_plus - duals.delta_p_minus
    formula_q = duals.delta_q_plus - duals.delta_q_minus
    return np.abs(lp - formula_p), np.abs(lq - formula_q)


def lambda_residuals(inst, result, duals=None):
    """Max relative residual of both nodal identities at generator buses."""
    duals = duals or extract_duals(inst, result)
    net = inst.net
    pG = inst.var(result.x, "p_G")
    a = np.array([g.a for g in net.generators])
    b = np.array([g.b for g in net.generators])
    rp, rq = _lambda_parts(duals, a, b, pG, net.gen_bus)
    scale = max(1.0, float(np.max(np.abs(duals.lambda_p), initial=0.0)))
    return float(np.max(rp, initial=0.0)) / scale, float(np.max(rq, initial=0.0)) / scale


def chi_gen_cc(duals, gens, S, z_p, b_eff=None):
    """Balancing price from generator rents only (no system-risk terms)."""
    b = np.array([g.b for g in gens]) if b_eff is None else np.asarray(b_eff)
    rent = duals.delta_p_plus + duals.delta_p_minus
    ab = duals.alpha_hi - duals.alpha_lo
    return float((S * S + z_p * S * np.sum(b * rent) + np.sum(b * ab)) / np.sum(b))


@dataclass
class SigmaTerms:
    """Per-cone reconstruction for one quantity (q, v, fp or fq)."""

    zeta: np.ndarray        # reconstructed from rents
    zeta_raw: np.ndarray    # the cone dual itself
    sigma: np.ndarray       # SOC norm at the optimum
    t: np.ndarray
    y: np.ndarray           # contribution per generator
    degenerate: list = field(default_factory=list)


def zeta_from_rents(inst, duals, x, key):
    """Cone multipliers implied by the rents (plus the variance penalty in VA-CC)."""
    r = inst.risk
    if key == "q":
        z = r.z_q * (duals.delta_q_plus + duals.delta_q_minus)
    elif key == "v":
        z = r.z_v * (duals.mu_plus + duals.mu_minus)
    else:
        val = duals.values
        z = (r.z_f25 * (val[f"xi_{key}_plus"] + val[f"xi_{key}_minus"])
             + r.z_f5 * val[f"xi_{key}_zero"])
    if inst.psi is not None:
        t = inst.var(x, "t_" + key)
        z = z + 2.0 * t * getattr(inst.psi, "psi_" + key)
    return z


def sigma_terms(inst, duals, x, key) -> SigmaTerms:
    D = inst.soc_data[key]
    rho = inst.var(x, "rho_" + key)
    t = inst.var(x, "t_" + key)
    U = D.C - rho[:, None] * D.d[None, :]
    sigma = np.linalg.norm(U, axis=1)
    num = D.C @ D.d - rho * (D.d @ D.d)
    zeta = zeta_from_rents(inst, duals, x, key)
    if np.any(zeta < -1e-6):
        raise NegativeZeta(f"zeta_{key} reconstruction is negative: {zeta.min():.3e}")
    coef = np.zeros_like(zeta)
    degenerate = []
    for j in range(len(zeta)):
        if zeta[j] <= ZETA_TOL:
            continue
        if t[j] <= SIGMA_TOL:
            # apex cones only matter when the row actually feels alpha
            if np.any(D.R_g[j]):
                degenerate.append(j)
            continue
        coef[j] = zeta[j] * num[j] / t[j]
    y = D.R_g.T @ coef
    return SigmaTerms(zeta=zeta, zeta_raw=duals.values["zeta_" + key], sigma=sigma, t=t, y=y,
                      degenerate=degenerate)


def chi_system(inst, duals, x):
    """``(chi_formula, {key: SigmaTerms})`` for EQV-CC and VA-CC solves."""
    net = inst.net
    b = np.array([g.b for g in net.generators])
    if inst.psi is not None:
        b = b / (1.0 + 2.0 * inst.psi.psi_p * b)
    terms = {key: sigma_terms(inst, duals, x, key) for key in SOC_KEYS
             if key in inst.soc_data and inst.soc_data[key].C.shape[0]}
    y = sum((t.y for t in terms.values()), np.zeros(net.n_gen))
    base = chi_gen_cc(duals, net.generators, inst.S, inst.risk.z_p, b_eff=b)
    chi = base - float(np.sum(b * y)) / float(np.sum(b))
    return chi, terms


def chi_eqv_cc(inst, duals, x):
    if inst.kind != ModelKind.EQV_CC:
        raise ValueError("chi_eqv_cc expects an EQV-CC instance")
    return chi_system(inst, duals, x)


def chi_va_cc(inst, duals, x):
    if inst.kind != ModelKind.VA_CC:
        raise ValueError("chi_va_cc expects a VA-CC instance")
    return chi_system(inst, duals, x)


def chi_formula(inst, duals, x):
    """Reconstructed balancing price appropriate to the model kind."""
    if inst.kind == ModelKind.DET:
        return None, {}
    if inst.kind == ModelKind.GEN_CC:
        return chi_gen_cc(duals, inst.net.generators, inst.S, inst.risk.z_p), {}
    return chi_system(inst, duals, x)


# ---------------------------------------------------------------------------
# report


@dataclass
class PriceReport:
    model: str
    base_mva: float
    bus_ids: list
    lmp_p: list                    # $/MWh
    lmp_q: list                    # $/MVArh
    eta: list
    chi: float | None = None       # $ (the adequacy dual is already in $)
    chi_formula: float | None = None
    chi_tilde: list | None = None  # per bus; None where no generator sits
    y_q: list | None = None
    y_v: list | None = None
    y_fp: list | None = None
    y_fq: list | None = None
    sigma_q: list | None = None
    sigma_v: list | None = None
    sigma_fp: list | None = None
    sigma_fq: list | None = None
    decomposition_residuals: dict = field(default_factory=dict)
    absent: list = field(default_factory=list)
    degenerate: dict = field(default_factory=dict)
    schema_version: int = REPORT_SCHEMA

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["bus", "lmp_p", "lmp_q", "chi_tilde", "y_q", "y_v", "y_fp", "y_fq"])
        for k, bus in enumerate(self.bus_ids):
            pick = lambda arr: "" if arr is None or arr[k] is None else repr(arr[k])
            w.writerow([bus, repr(self.lmp_p[k]), repr(self.lmp_q[k]), pick(self.chi_tilde),
                        pick(self.y_q), pick(self.y_v), pick(self.y_fp), pick(self.y_fq)])
        return buf.getvalue()


def _per_bus(net, per_gen):
    out = [None] * net.n_bus
    for k, b in enumerate(net.gen_bus):
        out[b] = float(per_gen[k])
    return out


def price_report(inst: ModelInstance, result: SolveResult) -> PriceReport:
    duals = extract_duals(inst, result)
    net = inst.net
    x = result.x
    base = net.base_mva
    rp, rq = lambda_residuals(inst, result, duals)
    rep = PriceReport(model=inst.kind.value, base_mva=base, bus_ids=[b.id for b in net.buses],
                      lmp_p=(duals.lambda_p / base).tolist(),
                      lmp_q=(duals.lambda_q / base).tolist(), eta=duals.eta.tolist(),
                      absent=list(duals.absent))
    rep.decomposition_residuals = {"lambda_p": rp, "lambda_q": rq}
    if inst.kind == ModelKind.DET:
        return rep
    chi = float(duals.chi[0])
    formula, terms = chi_formula(inst, duals, x)
    rep.chi = chi
    rep.chi_formula = formula
    rep.decomposition_residuals["chi"] = abs(formula - chi) / max(1.0, abs(chi))
    ys = {key: terms[key].y if key in terms else np.zeros(net.n_gen) for key in SOC_KEYS}
    rep.chi_tilde = _per_bus(net, chi + sum(ys.values()))
    if inst.kind in (ModelKind.EQV_CC, ModelKind.VA_CC):
        rep.y_q, rep.y_v = _per_bus(net, ys["q"]), _per_bus(net, ys["v"])
        rep.y_fp, rep.y_fq = _per_bus(net, ys["fp"]), _per_bus(net, ys["fq"])
        for key in SOC_KEYS:
            if key in terms:
                setattr(rep, "sigma_" + key, terms[key].sigma.tolist())
                if terms[key].degenerate:
                    rep.degenerate[key] = terms[key].degenerate
                    log.warning("%s: %d cones with zeta > 0 but sigma ~ 0; skipped", key,
                                len(terms[key].degenerate))
                zr = np.abs(terms[key].zeta - terms[key].zeta_raw)
                rep.decomposition_residuals["zeta_" + key] = float(
                    np.max(zr, initial=0.0) / max(1.0, np.max(np.abs(terms[key].zeta_raw),
                                                              initial=0.0)))
    return rep


__all__ = ["DualSolution", "PriceReport", "extract_duals", "decompose_lambda",
           "lambda_residuals", "chi_gen_cc", "chi_eqv_cc", "chi_va_cc", "chi_formula",
           "price_report", "zeta_from_rents", "sigma_terms", "DegenerateSigma"]
