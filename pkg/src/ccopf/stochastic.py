"""Forecast-error model, risk levels and variance penalties."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .errors import InconsistentDimension, OutOfRange


def z_quantile(eps: float) -> float:
    """``Phi^{-1}(1 - eps)`` for the standard normal."""
    if not (0.0 < eps < 1.0):
        raise OutOfRange(f"eps must lie in (0, 1), got {eps}")
    if eps == 0.5:
        return 0.0
    return float(-ndtri(eps))


def expected_cost(gen, p, alpha, S):
    """Expected cost of a generator following ``p - alpha * Omega``, Var(Omega) = S^2."""
    return gen.cost(p) + alpha * alpha / (2.0 * gen.b) * S * S


def psd_root(sigma, clip=1e-12):
    """Factor ``B`` with ``B B' = sigma``: Cholesky, or a clipped eigen-root when singular."""
    sigma = np.asarray(sigma, dtype=float)
    if sigma.size == 0:
        return np.zeros((0, 0))
    try:
        return np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        w, U = np.linalg.eigh(0.5 * (sigma + sigma.T))
        if w.min() < -1e-9 * max(1.0, abs(w).max()):
            raise ValueError("covariance matrix is not positive semidefinite")
        w = np.where(w < clip, 0.0, w)
        return U * np.sqrt(w)[None, :]


@dataclass(frozen=True, eq=False)
class Uncertainty:
    """Zero-mean Gaussian forecast errors of the wind units (per-unit)."""

    sigma: np.ndarray
    ordering: tuple = ()

    def __post_init__(self):
        sig = np.array(self.sigma, dtype=float, ndmin=2) if np.size(self.sigma) else np.zeros((0, 0))
        if sig.shape[0] != sig.shape[1]:
            raise InconsistentDimension("sigma must be square")
        if not np.allclose(sig, sig.T, atol=1e-12, rtol=0):
            raise ValueError("sigma must be symmetric")
        sig = 0.5 * (sig + sig.T)
        sig.setflags(write=False)
        object.__setattr__(self, "sigma", sig)
        root = psd_root(sig)
        root.setflags(write=False)
        object.__setattr__(self, "root", root)
        if self.ordering and len(self.ordering) != sig.shape[0]:
            raise InconsistentDimension("ordering does not match sigma")

    @classmethod
    def diagonal(cls, std, ordering=()):
        std = np.asarray(std, dtype=float)
        return cls(np.diag(std ** 2), tuple(ordering))

    @classmethod
    def from_network(cls, net, rel_std=None):
        """Embedded covariance, or ``rel_std * p_u`` independent errors."""
        order = tuple(w.bus for w in net.wind)
        if rel_std is None:
            if net.sigma is None:
                raise ValueError("network carries no covariance and no rel_std given")
            return cls(net.sigma, order)
        return cls.diagonal([rel_std * w.p_u for w in net.wind], order)

    @property
    def n(self):
        return self.sigma.shape[0]

    @property
    def d(self):
        """``B' e``; its norm is S."""
        return self.root.T @ np.ones(self.n)

    @property
    def s_total(self):
        return math.sqrt(max(0.0, float(np.ones(self.n) @ self.sigma @ np.ones(self.n))))

    def scaled(self, k):
        return Uncertainty(self.sigma * k, self.ordering)


@dataclass(frozen=True)
class RiskParams:
    eps_p: float = 0.1
    eps_q: float = 0.1
    eps_v: float = 0.1
    eps_f: float = 0.1
    div_f1: float = 2.5
    div_f2: float = 5.0

    def __post_init__(self):
        for name in ("eps_p", "eps_q", "eps_v", "eps_f"):
            e = getattr(self, name)
            if not (0.0 < e < 0.5):
                raise OutOfRange(f"{name} must lie in (0, 0.5), got {e}")

    @classmethod
    def uniform(cls, eps):
        return cls(eps, eps, eps, eps)

    @property
    def z_p(self):
        return z_quantile(self.eps_p)

    @property
    def z_q(self):
        return z_quantile(self.eps_q)

    @property
    def z_v(self):
        return z_quantile(self.eps_v)

    @property
    def z_f25(self):
        return z_quantile(self.eps_f / self.div_f1)

    @property
    def z_f5(self):
        return z_quantile(self.eps_f / self.div_f2)


@dataclass(frozen=True, eq=False)
class VariancePenalties:
    """Penalty weights on squared standard deviations, $ per per-unit^2."""

    psi_p: np.ndarray
    psi_q: np.ndarray
    psi_v: np.ndarray
    psi_fp: np.ndarray
    psi_fq: np.ndarray

    def __post_init__(self):
        for name in ("psi_p", "psi_q", "psi_v", "psi_fp", "psi_fq"):
            a = np.array(getattr(self, name), dtype=float)
            if np.any(a < 0) or not np.all(np.isfinite(a)):
                raise OutOfRange(f"{name} must be finite and non-negative")
            object.__setattr__(self, name, a)

    @classmethod
    def uniform(cls, net, psi):
        g, n, l = net.n_gen, net.n_bus, net.n_line
        return cls(np.full(g, psi), np.full(g, psi), np.full(n, psi), np.full(l, psi),
                   np.full(l, psi))

    @classmethod
    def zero(cls, net):
        return cls.uniform(net, 0.0)

    def is_zero(self):
        return all(not np.any(getattr(self, k)) for k in
                   ("psi_p", "psi_q", "psi_v", "psi_fp", "psi_fq"))


__all__ = ["z_quantile", "expected_cost", "psd_root", "Uncertainty", "RiskParams",
           "VariancePenalties"]
