"""Monte Carlo check of a solved policy against the raw chance constraints.

A policy is the scheduled state plus the participation factors.  Each
draw of the forecast error is pushed through either the linear response
the models assume (``Linearized``) or a full Newton power flow
(``FullAC``), and every one-sided limit is counted separately.
"""

from __future__ import annotations

import csv
import enum
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .conic import SolveResult, Status
from .errors import CCOPFError, MissingSolution, NonConvergence, NotOptimal, VoltageCollapse
from .models import SOC_KEYS, ModelInstance
from .network import BusKind, Network
from .powerflow import OperatingPoint, newton_pf
from .sensitivities import SensitivityFactors
from .stochastic import RiskParams, Uncertainty

log = logging.getLogger(__name__)

VALIDATION_SCHEMA = 1
Z99 = 2.5758293035489004  # two-sided 99% normal quantile
TRACE_CAP = 10_000


class Mode(str, enum.Enum):
    LINEARIZED = "linearized"
    FULL_AC = "full-ac"


@dataclass(frozen=True)
class Policy:
    """Scheduled operation and affine response of one solved model (per-unit)."""

    kind: str
    p_G: np.ndarray
    q_G: np.ndarray
    v: np.ndarray
    theta: np.ndarray
    fp: np.ndarray
    fq: np.ndarray
    alpha: np.ndarray
    t: dict = field(default_factory=dict)

    @classmethod
    def from_solve(cls, inst: ModelInstance, result: SolveResult):
        if result.status != Status.OPTIMAL:
            raise NotOptimal(f"solve status is {result.status.value}")
        x = result.x
        net = inst.net
        get = lambda name: np.array(inst.var(x, name), dtype=float)
        if "alpha" in inst.registry.variables:
            alpha = get("alpha")
        else:
            alpha = reference_participation(net)
        t = {k: get("t_" + k) for k in SOC_KEYS if "t_" + k in inst.registry.variables}
        return cls(kind=inst.kind.value, p_G=get("p_G"), q_G=get("q_G"), v=get("v"),
                   theta=get("theta"), fp=get("fp"), fq=get("fq"), alpha=alpha, t=t)

    def to_dict(self):
        d = {k: getattr(self, k).tolist() for k in ("p_G", "q_G", "v", "theta", "fp", "fq",
                                                     "alpha")}
        d["kind"] = self.kind
        d["t"] = {k: v.tolist() for k, v in self.t.items()}
        return d

    @classmethod
    def from_dict(cls, d):
        try:
            arr = {k: np.asarray(d[k], dtype=float) for k in ("p_G", "q_G", "v", "theta", "fp",
                                                               "fq", "alpha")}
            t = {k: np.asarray(v, dtype=float) for k, v in d.get("t", {}).items()}
            return cls(kind=d["kind"], t=t, **arr)
        except KeyError as exc:
            raise MissingSolution(f"solution lacks field {exc}") from exc


def reference_participation(net: Network):
    """Deterministic dispatch has no response policy: the reference unit takes it all."""
    alpha = np.zeros(net.n_gen)
    k = net.gen_at(net.ref)
    if k is None:
        alpha[:] = 1.0 / max(net.n_gen, 1)
    else:
        alpha[k] = 1.0
    return alpha


def sample_omega(unc: Uncertainty, n: int, seed) -> np.ndarray:
    """``n`` draws (rows) of ``B xi`` with standard normal ``xi``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    xi = rng.standard_normal((n, unc.n))
    return xi @ unc.root.T


@dataclass
class Realized:
    p_G: np.ndarray
    q_G: np.ndarray
    v: np.ndarray
    fp: np.ndarray
    fq: np.ndarray


def response_operators(policy: Policy, sf: SensitivityFactors, net: Network):
    """Matrices mapping a wind deviation to changes of q_G, v, fp and fq."""
    return {key: sf.compose(key, policy.alpha, net.gamma) for key in SOC_KEYS}


def apply_response(policy: Policy, sf: SensitivityFactors, net: Network, omega,
                   ops=None) -> Realized:
    """Affine response for one draw (1-D) or a batch of draws (rows)."""
    om = np.atleast_2d(np.asarray(omega, dtype=float))
    ops = ops or response_operators(policy, sf, net)
    Om = om.sum(axis=1)
    out = Realized(p_G=policy.p_G[None, :] - Om[:, None] * policy.alpha[None, :],
                   q_G=policy.q_G[None, :] + om @ ops["q"].T,
                   v=policy.v[None, :] + om @ ops["v"].T,
                   fp=policy.fp[None, :] + om @ ops["fp"].T,
                   fq=policy.fq[None, :] + om @ ops["fq"].T)
    if np.ndim(omega) == 1:
        out = Realized(*(a[0] for a in (out.p_G, out.q_G, out.v, out.fp, out.fq)))
    return out


def full_ac_state(policy: Policy, net: Network, omega, warm=None) -> OperatingPoint:
    """Nonlinear re-solve at one disturbance: controlled quantities follow the policy."""
    om = np.asarray(omega, dtype=float)
    p_u = net.p_u.copy()
    q_u = net.q_u.copy()
    np.add.at(p_u, net.wind_bus, om)
    np.add.at(q_u, net.wind_bus, net.gamma * om)
    p_G = policy.p_G - om.sum() * policy.alpha
    v_set = policy.v[net.gen_bus]
    return newton_pf(net, p_G, policy.q_G, v_set, p_u=p_u, q_u=q_u, warm=warm)


def _full_ac_batch(policy, net, omega, warm):
    n = omega.shape[0]
    res = {k: np.full((n, m), np.nan) for k, m in (("p_G", net.n_gen), ("q_G", net.n_gen),
                                                   ("v", net.n_bus), ("fp", net.n_line),
                                                   ("fq", net.n_line))}
    failed = np.zeros(n, dtype=bool)
    for i in range(n):
        try:
            op = full_ac_state(policy, net, omega[i], warm)
        except (NonConvergence, VoltageCollapse):
            failed[i] = True
            continue
        res["p_G"][i], res["q_G"][i] = op.p_G, op.q_G
        res["v"][i] = op.state.v
        res["fp"][i], res["fq"][i] = op.state.fp_from, op.state.fq_from
    return res, failed


@dataclass
class ValidationReport:
    mode: str
    samples: int
    seed: int | None
    rates: dict                 # name -> per-row violation rate
    half_widths: dict           # name -> per-row 99% half-width
    realized_std: dict          # q, v, fp, fq -> per-row std over draws
    scheduled_std: dict         # t variables of the model (when present)
    expected_cost: float
    expected_cost_se: float
    pf_failures: int = 0
    schema_version: int = VALIDATION_SCHEMA

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    def exceedances(self, risk: RiskParams, k: float = 3.0):
        """Rows whose empirical rate exceeds ``eps + k`` binomial sigmas."""
        eps = {"p_hi": risk.eps_p, "p_lo": risk.eps_p, "q_hi": risk.eps_q,
               "q_lo": risk.eps_q, "v_hi": risk.eps_v, "v_lo": risk.eps_v, "s": risk.eps_f}
        out = []
        for name, e in eps.items():
            lim = e + k * np.sqrt(e * (1.0 - e) / self.samples)
            for i, r in enumerate(self.rates.get(name, [])):
                if r > lim:
                    out.append((name, i, r, lim))
        return out


def _rate(mask, valid):
    n = max(int(valid.sum()), 1)
    r = mask[valid].sum(axis=0) / n
    hw = Z99 * np.sqrt(r * (1.0 - r) / n)
    return r, hw


def _workers():
    try:
        return max(1, int(os.environ.get("CCOPF_THREADS", "1")))
    except ValueError:
        return 1


def validate(policy: Policy, net: Network, sf: SensitivityFactors, unc: Uncertainty,
             n: int = 10_000, seed=0, mode: Mode | str = Mode.LINEARIZED, trace=None,
             tol: float = 1e-9) -> ValidationReport:
    """Empirical violation rate of every one-sided limit over ``n`` draws.

    ``trace``, if given, is a writable text stream receiving a per-draw CSV
    (at most ``TRACE_CAP`` rows).  ``tol`` absorbs rounding at limits that
    bind exactly in the scheduled state.
    """
    mode = Mode(mode)
    omega = sample_omega(unc, n, seed)
    if mode == Mode.LINEARIZED:
        r = apply_response(policy, sf, net, omega)
        arrays = {"p_G": r.p_G, "q_G": r.q_G, "v": r.v, "fp": r.fp, "fq": r.fq}
        failed = np.zeros(n, dtype=bool)
    else:
        warm = None
        chunks = np.array_split(np.arange(n), _workers())
        with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
            parts = list(pool.map(lambda ix: _full_ac_batch(policy, net, omega[ix], warm),
                                  chunks))
        arrays = {k: np.concatenate([p[0][k] for p in parts]) for k in parts[0][0]}
        failed = np.concatenate([p[1] for p in parts])
        if failed.mean() > 0.01:
            raise CCOPFError(f"power flow failed on {failed.sum()} of {n} draws")
    valid = ~failed
    gens, buses = net.generators, net.buses
    pmax = np.array([g.p_max for g in gens])
    pmin = np.array([g.p_min for g in gens])
    qmax = np.array([g.q_max for g in gens])
    qmin = np.array([g.q_min for g in gens])
    vmax = np.array([b.v_max for b in buses])
    vmin = np.array([b.v_min for b in buses])
    smax = np.array([l.s_max for l in net.lines])
    # reactive limits only bind where the unit actually moves
    q_moves = np.array([buses[b].kind != BusKind.PQ for b in net.gen_bus])
    masks = {
        "p_hi": arrays["p_G"] > pmax + tol,
        "p_lo": arrays["p_G"] < pmin - tol,
        "q_hi": (arrays["q_G"] > qmax + tol) & q_moves,
        "q_lo": (arrays["q_G"] < qmin - tol) & q_moves,
        "v_hi": arrays["v"] > vmax + tol,
        "v_lo": arrays["v"] < vmin - tol,
        "s": arrays["fp"] ** 2 + arrays["fq"] ** 2 > smax ** 2 * (1 + tol),
    }
    rates, hws = {}, {}
    for name, mask in masks.items():
        r, hw = _rate(mask, valid)
        rates[name], hws[name] = r.tolist(), hw.tolist()
    realized = {k: np.std(arrays[{"q": "q_G"}.get(k, k)][valid], axis=0).tolist()
                for k in SOC_KEYS}
    cost = np.array([sum(g.cost(p) for g, p in zip(gens, row)) for row in arrays["p_G"][valid]])
    report = ValidationReport(
        mode=mode.value, samples=int(n), seed=None if seed is None else int(seed),
        rates=rates, half_widths=hws, realized_std=realized,
        scheduled_std={k: v.tolist() for k, v in policy.t.items()},
        expected_cost=float(cost.mean()),
        expected_cost_se=float(cost.std(ddof=1) / np.sqrt(len(cost))) if len(cost) > 1 else 0.0,
        pf_failures=int(failed.sum()))
    if trace is not None:
        _write_trace(trace, omega, masks, cost, valid)
    return report


def _write_trace(fh, omega, masks, cost, valid):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["draw", "omega_total", "cost", "violations", "pf_ok"])
    costs = np.full(len(valid), np.nan)
    costs[valid] = cost
    nviol = sum(m.sum(axis=1) for m in masks.values())
    for i in range(min(len(valid), TRACE_CAP)):
        w.writerow([i, repr(float(omega[i].sum())), repr(float(costs[i])), int(nviol[i]),
                    int(valid[i])])


__all__ = ["Mode", "Policy", "Realized", "ValidationReport", "sample_omega", "apply_response",
           "response_operators", "full_ac_state", "validate", "reference_participation",
           "TRACE_CAP"]
