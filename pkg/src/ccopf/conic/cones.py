"""Cone primitives: membership, Jordan algebra and Nesterov-Todd scaling.

Two cone families are supported, the non-negative orthant and the
second-order (Lorentz) cone ``{(u0, u1) : u0 >= ||u1||}``.  Every routine
works on one block; ``ConeLayout`` maps a stacked vector onto blocks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class NonNegative:
    dim: int


@dataclass(frozen=True)
class SecondOrder:
    dim: int


def cone_from_dict(d):
    kind = d["type"]
    if kind == "l":
        return NonNegative(int(d["dim"]))
    if kind == "q":
        return SecondOrder(int(d["dim"]))
    raise ValueError(f"unknown cone type {kind!r}")


def cone_to_dict(cone):
    return {"type": "l" if isinstance(cone, NonNegative) else "q", "dim": cone.dim}


class ConeLayout:
    """Offsets of each cone block inside a stacked slack/dual vector."""

    def __init__(self, cones):
        self.cones = list(cones)
        self.slices = []
        start = 0
        for c in self.cones:
            if c.dim < 1 or (isinstance(c, SecondOrder) and c.dim < 1):
                raise ValueError("cone dimension must be positive")
            self.slices.append(slice(start, start + c.dim))
            start += c.dim
        self.dim = start
        # barrier degree: one per orthant coordinate, one per SOC
        self.degree = sum(c.dim if isinstance(c, NonNegative) else 1 for c in self.cones)

    def __iter__(self):
        return iter(zip(self.cones, self.slices))

    def identity(self):
        e = np.zeros(self.dim)
        for c, sl in self:
            if isinstance(c, NonNegative):
                e[sl] = 1.0
            else:
                e[sl.start] = 1.0
        return e


def soc_residual(u):
    """J-norm squared ``u0^2 - ||u1||^2`` computed as a product to limit cancellation."""
    n1 = np.linalg.norm(u[1:])
    return (u[0] - n1) * (u[0] + n1)


def margin(layout, u):
    """Largest ``a`` such that ``u - a*e`` lies in the cone (negative when outside)."""
    m = np.inf
    for c, sl in layout:
        b = u[sl]
        if isinstance(c, NonNegative):
            m = min(m, b.min())
        else:
            m = min(m, b[0] - np.linalg.norm(b[1:]))
    return m


def centrality(layout, s, z):
    """Smallest per-block ``sqrt(det s * det z)`` (``s_i z_i`` on the orthant).

    Zero or negative once either vector touches its cone boundary.
    """
    m = np.inf
    for c, sl in layout:
        a, b = s[sl], z[sl]
        if isinstance(c, NonNegative):
            m = min(m, np.min(a * b))
        else:
            ra, rb = soc_residual(a), soc_residual(b)
            if a[0] <= 0 or b[0] <= 0 or ra <= 0 or rb <= 0:
                return -np.inf
            m = min(m, np.sqrt(ra * rb))
    return m


def in_cone(layout, u, tol=0.0):
    return margin(layout, u) >= -tol


def project(layout, u):
    """Euclidean projection onto the cone."""
    out = np.array(u, dtype=float)
    for c, sl in layout:
        b = out[sl]
        if isinstance(c, NonNegative):
            out[sl] = np.maximum(b, 0.0)
            continue
        t, x = b[0], b[1:]
        nx = np.linalg.norm(x)
        if nx <= t:
            continue
        if nx <= -t:
            out[sl] = 0.0
            continue
        a = 0.5 * (t + nx)
        out[sl] = np.concatenate([[a], a * x / nx])
    return out


def jordan_product(layout, u, v):
    out = np.empty(layout.dim)
    for c, sl in layout:
        a, b = u[sl], v[sl]
        if isinstance(c, NonNegative):
            out[sl] = a * b
        else:
            out[sl.start] = a @ b
            out[sl.start + 1:sl.stop] = a[0] * b[1:] + b[0] * a[1:]
    return out


def jordan_divide(layout, lam, d):
    """Solve ``lam o x = d`` for x."""
    out = np.empty(layout.dim)
    for c, sl in layout:
        l, r = lam[sl], d[sl]
        if isinstance(c, NonNegative):
            out[sl] = r / l
        else:
            l0, l1 = l[0], l[1:]
            det = soc_residual(l)
            x0 = (l0 * r[0] - l1 @ r[1:]) / det
            out[sl.start] = x0
            out[sl.start + 1:sl.stop] = (r[1:] - x0 * l1) / l0
    return out


def max_step(layout, u, du):
    """Largest step ``a`` with ``u + a*du`` in the closed cone (inf if unbounded)."""
    amax = np.inf
    for c, sl in layout:
        x, d = u[sl], du[sl]
        if isinstance(c, NonNegative):
            neg = d < 0
            if neg.any():
                amax = min(amax, np.min(-x[neg] / d[neg]))
            continue
        a = d[0] ** 2 - d[1:] @ d[1:]
        b = 2.0 * (x[0] * d[0] - x[1:] @ d[1:])
        cc = soc_residual(x)
        amax = min(amax, _smallest_positive_root(a, b, cc))
        if d[0] < 0:
            amax = min(amax, -x[0] / d[0])
    return amax


def _smallest_positive_root(a, b, c):
    # roots of a*t^2 + b*t + c with c > 0 (start strictly inside the cone)
    if abs(a) < 1e-300:
        return -c / b if b < 0 else np.inf
    disc = b * b - 4.0 * a * c
    if disc < 0:
        return np.inf
    sq = np.sqrt(disc)
    q = -0.5 * (b + np.copysign(sq, b))
    roots = []
    if q != 0:
        roots.append(c / q)
    roots.append(q / a)
    pos = [r for r in roots if r > 0]
    return min(pos) if pos else np.inf


class NTScaling:
    """Nesterov-Todd scaling ``W`` with ``W z = W^{-T} s = lam``.

    ``W`` is symmetric and block diagonal; blocks are stored densely since
    the cones in this package are small.
    """

    def __init__(self, layout, s, z):
        self.layout = layout
        self.blocks = []
        self.lam = np.empty(layout.dim)
        for c, sl in layout:
            sb, zb = s[sl], z[sl]
            if isinstance(c, NonNegative):
                w = np.sqrt(sb / zb)
                self.blocks.append(("l", w))
                self.lam[sl] = np.sqrt(sb * zb)
                continue
            sn = np.sqrt(soc_residual(sb))
            zn = np.sqrt(soc_residual(zb))
            sbar = sb / sn
            zbar = zb / zn
            gam = np.sqrt(0.5 * (1.0 + sbar @ zbar))
            wbar = np.empty_like(sbar)
            wbar[0] = (sbar[0] + zbar[0]) / (2.0 * gam)
            wbar[1:] = (sbar[1:] - zbar[1:]) / (2.0 * gam)
            eta = np.sqrt(sn / zn)
            n = c.dim
            Wb = np.empty((n, n))
            Wb[0, 0] = wbar[0]
            Wb[0, 1:] = wbar[1:]
            Wb[1:, 0] = wbar[1:]
            Wb[1:, 1:] = np.eye(n - 1) + np.outer(wbar[1:], wbar[1:]) / (1.0 + wbar[0])
            W = eta * Wb
            Winv = (Wb * _jsign(n)[:, None] * _jsign(n)[None, :]) / eta
            self.blocks.append(("q", (W, Winv)))
            # closed form of W z in the normalized variables; forming W @ z
            # directly cancels badly once both vectors approach the boundary
            lb = np.empty(n)
            lb[0] = gam
            lb[1:] = ((gam + zbar[0]) * sbar[1:] + (gam + sbar[0]) * zbar[1:]) / \
                (sbar[0] + zbar[0] + 2.0 * gam)
            self.lam[sl] = np.sqrt(sn * zn) * lb

    def apply(self, u, inverse=False):
        out = np.empty(self.layout.dim)
        for (kind, data), (_, sl) in zip(self.blocks, self.layout):
            if kind == "l":
                out[sl] = u[sl] / data if inverse else u[sl] * data
            else:
                out[sl] = (data[1] if inverse else data[0]) @ u[sl]
        return out

    def inverse_matrix(self):
        """Sparse ``W^{-1}`` (symmetric, block diagonal)."""
        mats = []
        for kind, data in self.blocks:
            mats.append(sp.diags(1.0 / data) if kind == "l" else sp.csc_matrix(data[1]))
        if not mats:
            return sp.csc_matrix((0, 0))
        return sp.block_diag(mats, format="csc")

    def wtw(self):
        """Sparse ``W^T W`` (the Hessian block entering the KKT matrix)."""
        mats = []
        for kind, data in self.blocks:
            if kind == "l":
                mats.append(sp.diags(data ** 2))
            else:
                mats.append(sp.csc_matrix(data[0] @ data[0]))
        if not mats:
            return sp.csc_matrix((0, 0))
        return sp.block_diag(mats, format="csc")


def _jsign(n):
    j = -np.ones(n)
    j[0] = 1.0
    return j
