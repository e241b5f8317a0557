"""Newton polishing of an interior-point solution.

At an interior-point optimum every complementary pair is only approximately
complementary: on a second-order cone block where both ``s`` and ``z`` sit on
the boundary, their directions are mirror images only up to an angle of
order ``sqrt(s'z)``.  Quantities that project a multiplier onto a direction
nearly orthogonal to it inherit that error at full size.

The polish takes a few plain Newton steps on the KKT system with the exact
complementarity condition ``s o z = 0`` (Jordan product, no centring and no
scaling).  Under strict complementarity the Jacobian is nonsingular at the
solution, so the steps converge quadratically from the interior-point
iterate.  A polished point is only kept when it stays in the cones and
improves the KKT residuals.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .cones import NonNegative, jordan_product, margin, project
from .program import ConicProgram, kkt_residuals


def _arrow(layout, u):
    """Block-diagonal arrow matrix: ``arrow(u) @ v == u o v``."""
    blocks = []
    for c, sl in layout:
        b = u[sl]
        if isinstance(c, NonNegative):
            blocks.append(sp.diags(b))
        else:
            m = np.eye(c.dim) * b[0]
            m[0, 1:] = b[1:]
            m[1:, 0] = b[1:]
            blocks.append(sp.csc_matrix(m))
    return sp.block_diag(blocks, format="csc")


def _score(prog, x, y, z, s):
    r = kkt_residuals(prog, x, y, z, s)
    return max(r.r_primal, r.r_dual, r.gap, r.complementarity)


def _worst_pair(layout, s, z):
    """Largest per-block complementarity ``||s o z||`` scaled by the block sizes."""
    w = jordan_product(layout, s, z)
    out = 0.0
    for _, sl in layout:
        out = max(out, np.linalg.norm(w[sl]) / max(1.0, np.linalg.norm(s[sl]) *
                                                    np.linalg.norm(z[sl])))
    return out


def polish(prog: ConicProgram, x, y, z, s, steps=3):
    """Return a polished ``(x, y, z, s)`` or ``None`` when polishing does not help."""
    layout = prog.layout
    if not layout.dim:
        return None
    n, p, m = prog.n, prog.A.shape[0], prog.G.shape[0]
    I = sp.identity(m, format="csc")
    score, pair = _score(prog, x, y, z, s), _worst_pair(layout, s, z)
    cur, best = (x, y, z, s), None
    for _ in range(steps):
        x, y, z, s = cur
        r_x = prog.P @ x + prog.c + prog.A.T @ y + prog.G.T @ z
        r_y = prog.A @ x - prog.b
        r_z = prog.G @ x + s - prog.h
        r_c = jordan_product(layout, s, z)
        J = sp.bmat([[prog.P, prog.A.T, prog.G.T, None],
                     [prog.A, None, None, None],
                     [prog.G, None, None, I],
                     [None, None, _arrow(layout, s), _arrow(layout, z)]], format="csc")
        rhs = -np.concatenate([r_x, r_y, r_z, r_c])
        try:
            d = spla.splu(J, permc_spec="COLAMD").solve(rhs)
        except RuntimeError:
            break
        size = max(1.0, *(float(np.max(np.abs(v), initial=0.0)) for v in cur))
        # once the remaining pairs are all ~0 the Jacobian turns singular
        if not np.all(np.isfinite(d)) or np.max(np.abs(d)) > 1e-3 * size:
            break
        cur = (x + d[:n], y + d[n:n + p], z + d[n + p:n + p + m], s + d[n + p + m:])
        x, y, z, s = cur
        # Newton ignores the cones; pull back tiny excursions, reject real ones
        if min(margin(layout, s), margin(layout, z)) < -1e-8 * size:
            break
        s, z = project(layout, s), project(layout, z)
        cur = (x, y, z, s)
        new_score, new_pair = _score(prog, x, y, z, s), _worst_pair(layout, s, z)
        if new_score > max(score, 1e-14) or new_pair >= pair:
            break
        best, pair = cur, new_pair
    return best


__all__ = ["polish"]
