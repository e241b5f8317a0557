"""Operating points to linearize around.

Either a user-supplied point (JSON) or one computed here: a loss-less
merit-order dispatch, a Newton power flow with the reference bus picking
up losses, and optionally a few rounds of re-dispatch with the observed
losses added to demand until the dispatch stops moving.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import InfeasibleBounds
from .network import Network
from .powerflow import OperatingPoint, load_point, newton_pf

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LinPointConfig:
    iterate: bool = True
    max_rounds: int = 10
    tol: float = 1e-6
    pf_tol: float = 1e-10


def merit_order_dispatch(net: Network, demand: float) -> tuple[np.ndarray, float]:
    """Cheapest ``p_G`` with ``sum p_G = demand`` inside the generator boxes.

    Returns the dispatch and the system marginal price (per-unit).
    """
    gens = net.generators
    a = np.array([g.a for g in gens])
    b = np.array([g.b for g in gens])
    lo = np.array([g.p_min for g in gens])
    hi = np.array([g.p_max for g in gens])
    if not lo.sum() - 1e-12 <= demand <= hi.sum() + 1e-12:
        raise InfeasibleBounds(f"demand {demand:.6g} outside generation range "
                               f"[{lo.sum():.6g}, {hi.sum():.6g}]")

    def p_of(lam):
        return np.clip(lam * b - a, lo, hi)

    # marginal cost (p + a)/b spans these at the box corners
    mc = np.concatenate([(lo + a) / b, (hi + a) / b])
    lam_lo, lam_hi = mc.min() - 1.0, mc.max() + 1.0
    f = lambda lam: p_of(lam).sum() - demand
    if abs(f(lam_lo)) <= 1e-12:
        return p_of(lam_lo), lam_lo
    if abs(f(lam_hi)) <= 1e-12:
        return p_of(lam_hi), lam_hi
    lam = brentq(f, lam_lo, lam_hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)
    p = p_of(lam)
    # spread the last rounding error over units strictly inside their box
    free = (p > lo + 1e-12) & (p < hi - 1e-12)
    if free.any():
        p[free] += (demand - p.sum()) / free.sum()
    return p, lam


def compute_point(net: Network, cfg: LinPointConfig | None = None) -> OperatingPoint:
    cfg = cfg or LinPointConfig()
    base_demand = float(net.p_d.sum() - net.p_u.sum())
    losses = 0.0
    point = None
    pG = None
    for rnd in range(cfg.max_rounds if cfg.iterate else 1):
        new_pG, _ = merit_order_dispatch(net, base_demand + losses)
        if pG is not None and np.max(np.abs(new_pG - pG)) < cfg.tol:
            pG = new_pG
            break
        pG = new_pG
        point = newton_pf(net, pG, tol=cfg.pf_tol,
                          warm=None if point is None else point.state)
        losses = float(point.p_G.sum()) - base_demand
        log.debug("round %d: losses %.6g", rnd, losses)
    else:
        if cfg.iterate:
            log.warning("dispatch/power-flow iteration stopped after %d rounds", cfg.max_rounds)
    return newton_pf(net, pG, tol=cfg.pf_tol, warm=point.state if point else None)


def linearization_point(net: Network, path=None, cfg: LinPointConfig | None = None):
    """Load the point at ``path`` if given, else compute one."""
    if path is not None:
        return load_point(net, path)
    return compute_point(net, cfg)


__all__ = ["LinPointConfig", "merit_order_dispatch", "compute_point", "linearization_point"]
