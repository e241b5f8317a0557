"""End-to-end runs: case -> operating point -> model -> solve -> prices.

Shared by the command line and the scripts.  Pricing needs a tighter
solve than the bare solver default: the balancing-price reconstruction
divides cone duals by small standard deviations, so the default here is
``tol = 1e-12`` (the solver falls back to its best iterate at 1e-8 when
the floor of double precision is reached first).
"""

from __future__ import annotations

import csv
import io
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .conic import SolverOptions, Status, solve
from .errors import (CCOPFError, InfeasibleBounds, InfeasibleReserve, MissingSolution,
                     OutOfRange)
from .linpoint import linearization_point
from .models import SOC_KEYS, ModelKind, build_model, expected_generation_cost, v_metric
from .network import Network, load_network
from .powerflow import OperatingPoint, point_from_dict, point_to_dict
from .pricing import PriceReport, extract_duals, price_report
from .sensitivities import SensitivityFactors, response_matrices
from .stochastic import RiskParams, Uncertainty, VariancePenalties
from .validation import Policy

log = logging.getLogger(__name__)

SOLUTION_SCHEMA = 1
TABLE_SCHEMA = 1
PRICING_TOL = 1e-12


@dataclass(frozen=True)
class RunConfig:
    case: str
    model: str = "eqv-cc"
    eps: float = 0.1
    eps_p: float | None = None
    eps_q: float | None = None
    eps_v: float | None = None
    eps_f: float | None = None
    psi: float = 0.0
    lin_point: str | None = None
    rel_std: float | None = None
    tol: float = PRICING_TOL
    samples: int = 10_000
    seed: int | None = None

    def __post_init__(self):
        ModelKind(self.model)
        for name in ("eps", "eps_p", "eps_q", "eps_v", "eps_f"):
            e = getattr(self, name)
            if e is not None and not 0.0 < e < 0.5:
                raise OutOfRange(f"{name} must lie in (0, 0.5), got {e}")
        if self.psi < 0:
            raise OutOfRange(f"psi must be >= 0, got {self.psi}")
        if not self.tol > 0:
            raise OutOfRange("tol must be positive")

    @property
    def risk(self):
        pick = lambda v: self.eps if v is None else v
        return RiskParams(pick(self.eps_p), pick(self.eps_q), pick(self.eps_v), pick(self.eps_f))

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass
class Context:
    """Everything that does not depend on the model kind, risk level or penalty."""

    net: Network
    point: OperatingPoint
    sf: SensitivityFactors
    unc: Uncertainty | None


def prepare(cfg: RunConfig, point: OperatingPoint | None = None) -> Context:
    net = load_network(cfg.case)
    if point is None:
        point = linearization_point(net, cfg.lin_point)
    sf = response_matrices(net, point)
    unc = None
    if net.n_wind:
        unc = Uncertainty.from_network(net, cfg.rel_std)
    elif cfg.model != "det":
        raise CCOPFError("chance-constrained models need at least one wind unit")
    return Context(net, point, sf, unc)


@dataclass
class Outcome:
    cfg: RunConfig
    ctx: Context
    instance: object
    result: object
    report: PriceReport | None = None
    policy: Policy | None = None

    @property
    def optimal(self):
        return self.result.status == Status.OPTIMAL

    @property
    def infeasible(self):
        return self.result.status in (Status.PRIMAL_INFEASIBLE, Status.DUAL_INFEASIBLE)


def run_solve(cfg: RunConfig, ctx: Context | None = None, log_file=None) -> Outcome:
    ctx = ctx or prepare(cfg)
    psi = VariancePenalties.uniform(ctx.net, cfg.psi) if cfg.model == "va-cc" else None
    inst = build_model(cfg.model, ctx.net, ctx.point, ctx.sf, ctx.unc, cfg.risk, psi)
    result = solve(inst.program, SolverOptions(tol=cfg.tol, log_file=log_file))
    out = Outcome(cfg, ctx, inst, result)
    if out.optimal:
        out.report = price_report(inst, result)
        out.policy = Policy.from_solve(inst, result)
    return out


def solution_document(out: Outcome) -> dict:
    inst, res = out.instance, out.result
    doc = {"schema_version": SOLUTION_SCHEMA, "config": out.cfg.to_dict(),
           "status": res.status.value, "objective": res.objective,
           "kkt": {"r_primal": res.r_primal, "r_dual": res.r_dual, "gap": res.gap},
           "iterations": res.iterations, "operating_point": point_to_dict(out.ctx.point)}
    if out.optimal:
        x = res.x
        doc["expected_cost"] = expected_generation_cost(inst, x)
        doc["v_metric"] = v_metric(inst, x)
        doc["primal"] = {k: np.asarray(x[v]).tolist() for k, v in inst.registry.variables.items()}
        duals = extract_duals(inst, res)
        doc["duals"] = {k: np.asarray(v).tolist() for k, v in duals.values.items()
                        if k not in duals.absent}
        doc["policy"] = out.policy.to_dict()
    return doc


def load_solution(doc: dict):
    """(RunConfig, Context, Policy) from a stored solution document."""
    cfg = RunConfig.from_dict(doc["config"])
    net = load_network(cfg.case)
    point = point_from_dict(net, doc["operating_point"])
    ctx = prepare(cfg, point)
    if "policy" not in doc:
        raise MissingSolution(f"stored solve has status {doc.get('status')!r}; nothing to check")
    return cfg, ctx, Policy.from_dict(doc["policy"])


# ---------------------------------------------------------------------------
# tidy price data and the sweep table


def tidy_rows(report: PriceReport, label: str):
    """(bus, quantity, model, value) rows for plotting."""
    rows = []
    for k, bus in enumerate(report.bus_ids):
        rows.append((bus, "lambda_p", label, report.lmp_p[k]))
        rows.append((bus, "lambda_q", label, report.lmp_q[k]))
        if report.chi_tilde is not None and report.chi_tilde[k] is not None:
            rows.append((bus, "chi_tilde", label, report.chi_tilde[k]))
        if report.sigma_v is not None:
            rows.append((bus, "sigma_v", label, report.sigma_v[k]))
    return rows


def tidy_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["bus", "quantity", "model", "value"])
    for r in rows:
        w.writerow([r[0], r[1], r[2], repr(float(r[3]))])
    return buf.getvalue()


TABLE_COLUMNS = ["model", "eps", "psi", "status", "objective", "expected_cost",
                 "cost_rel_eqv_pct", "chi", "v_metric", "dsigma2_q_pct", "dsigma2_v_pct",
                 "dsigma2_fp_pct", "dsigma2_fq_pct", "error"]

_ORDER = {"det": 0, "gen-cc": 1, "eqv-cc": 2, "va-cc": 3}


@dataclass
class SweepRow:
    model: str
    eps: float
    psi: float | None
    status: str
    objective: float | None = None
    expected_cost: float | None = None
    chi: float | None = None
    v_metric: float | None = None
    sigma2: dict = field(default_factory=dict)
    error: str = ""
    report: PriceReport | None = None

    @property
    def key(self):
        return (-self.eps, _ORDER[self.model], -1.0 if self.psi is None else self.psi)


def _cell(base: RunConfig, ctx: Context, model, eps, psi) -> SweepRow:
    cfg = replace(base, model=model, eps=eps, psi=0.0 if psi is None else psi)
    try:
        out = run_solve(cfg, ctx)
    except (InfeasibleReserve, InfeasibleBounds) as exc:
        return SweepRow(model, eps, psi, "infeasible", error=str(exc))
    except CCOPFError as exc:
        return SweepRow(model, eps, psi, "error", error=f"{type(exc).__name__}: {exc}")
    row = SweepRow(model, eps, psi, out.result.status.value)
    if not out.optimal:
        return row
    x = out.result.x
    inst = out.instance
    row.objective = out.result.objective
    row.expected_cost = expected_generation_cost(inst, x)
    row.chi = out.report.chi
    row.v_metric = v_metric(inst, x)
    row.sigma2 = {k: float(np.sum(inst.var(x, "t_" + k) ** 2)) for k in SOC_KEYS
                  if "t_" + k in inst.registry.variables}
    row.report = out.report
    return row


def workers():
    try:
        return max(1, int(os.environ.get("CCOPF_THREADS", "1")))
    except ValueError:
        return 1


def run_sweep(base: RunConfig, eps_values, psi_values, ctx: Context | None = None):
    """Det, GEN-CC and EQV-CC per risk level plus one VA-CC row per penalty.

    Rows come back sorted by (risk level descending, model, penalty).
    """
    if not eps_values or not psi_values:
        raise ValueError("a sweep needs at least one eps and one psi")
    ctx = ctx or prepare(replace(base, model="eqv-cc"))
    cells = []
    for eps in eps_values:
        cells += [("det", eps, None), ("gen-cc", eps, None), ("eqv-cc", eps, None)]
        cells += [("va-cc", eps, psi) for psi in psi_values]
    with ThreadPoolExecutor(max_workers=workers()) as pool:
        rows = list(pool.map(lambda c: _cell(base, ctx, *c), cells))
    return sorted(rows, key=lambda r: r.key)


def _fmt(v):
    return "" if v is None else repr(float(v))


def table_csv(rows) -> str:
    """Table-I style CSV; relative columns use the EQV-CC row at the same eps."""
    eqv = {r.eps: r for r in rows if r.model == "eqv-cc" and r.objective is not None}
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"# schema_version={TABLE_SCHEMA}"])
    w.writerow(TABLE_COLUMNS)
    for r in rows:
        ref = eqv.get(r.eps)
        rel_cost = None
        if ref is not None and r.expected_cost is not None:
            rel_cost = 100.0 * r.expected_cost / ref.expected_cost
        rel = {}
        for k in SOC_KEYS:
            if ref is not None and k in r.sigma2 and ref.sigma2.get(k, 0.0) > 0:
                rel[k] = 100.0 * r.sigma2[k] / ref.sigma2[k]
        w.writerow([r.model, repr(r.eps), _fmt(r.psi), r.status, _fmt(r.objective),
                    _fmt(r.expected_cost), _fmt(rel_cost), _fmt(r.chi), _fmt(r.v_metric),
                    *(_fmt(rel.get(k)) for k in SOC_KEYS), r.error])
    return buf.getvalue()


def row_label(r: SweepRow):
    psi = "" if r.psi is None else f"/psi={r.psi:g}"
    return f"{r.model}/eps={r.eps:g}{psi}"


__all__ = ["RunConfig", "Context", "Outcome", "prepare", "run_solve", "solution_document",
           "load_solution", "run_sweep", "table_csv", "tidy_rows", "tidy_csv", "SweepRow",
           "PRICING_TOL", "row_label", "workers"]
