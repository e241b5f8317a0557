"""Canonical conic program and its primal-dual solution record.

The program is

    minimize    1/2 x'Px + c'x + const
    subject to  A x = b                (duals y, free)
                G x + s = h, s in K    (duals z in K*)

with K a product of non-negative orthants and second-order cones.  The
Lagrangian is ``f(x) + y'(Ax - b) + z'(Gx - h)`` so that stationarity
reads ``Px + c + A'y + G'z = 0`` and ``z >= 0`` on every ``<=`` row.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .cones import ConeLayout, NonNegative, SecondOrder, cone_from_dict, cone_to_dict, margin

FORMAT_VERSION = 1


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    PRIMAL_INFEASIBLE = "PrimalInfeasible"
    DUAL_INFEASIBLE = "DualInfeasible"
    ITER_LIMIT = "IterLimit"
    NUMERICAL_FAILURE = "NumericalFailure"


@dataclass
class ConicProgram:
    P: sp.csc_matrix
    c: np.ndarray
    A: sp.csc_matrix
    b: np.ndarray
    G: sp.csc_matrix
    h: np.ndarray
    cones: list
    const: float = 0.0

    def __post_init__(self):
        n = len(self.c)
        self.c = np.asarray(self.c, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        self.h = np.asarray(self.h, dtype=float)
        self.P = sp.csc_matrix(self.P if self.P is not None else (n, n), dtype=float)
        self.A = sp.csc_matrix(self.A if self.A is not None else (0, n), dtype=float)
        self.G = sp.csc_matrix(self.G if self.G is not None else (0, n), dtype=float)
        self.validate()

    @property
    def n(self):
        return len(self.c)

    @property
    def layout(self):
        return ConeLayout(self.cones)

    def validate(self):
        n = self.n
        if self.P.shape != (n, n):
            raise ValueError(f"P has shape {self.P.shape}, expected {(n, n)}")
        if self.A.shape != (len(self.b), n):
            raise ValueError("A/b dimensions inconsistent")
        if self.G.shape != (len(self.h), n):
            raise ValueError("G/h dimensions inconsistent")
        if sum(cn.dim for cn in self.cones) != len(self.h):
            raise ValueError("cone dimensions do not sum to the number of cone rows")
        if self.P.nnz:
            if abs(self.P - self.P.T).max() > 1e-12 * max(1.0, abs(self.P).max()):
                raise ValueError("P is not symmetric")
            # attempted factorization of P + tiny shift certifies PSD
            try:
                np.linalg.cholesky(self.P.toarray() + 1e-10 * max(1.0, abs(self.P).max()) * np.eye(n))
            except np.linalg.LinAlgError as exc:
                raise ValueError("P is not positive semidefinite") from exc

    def objective(self, x):
        return 0.5 * x @ (self.P @ x) + self.c @ x + self.const

    def to_dict(self):
        """Sparse export: objective (P, c), equality rows, cone rows grouped by cone."""

        def coo(M):
            M = sp.coo_matrix(M)
            return {"shape": list(M.shape), "row": M.row.tolist(), "col": M.col.tolist(),
                    "val": M.data.tolist()}

        return {"format_version": FORMAT_VERSION, "n": self.n, "P": coo(self.P),
                "c": self.c.tolist(), "const": self.const, "A": coo(self.A),
                "b": self.b.tolist(), "G": coo(self.G), "h": self.h.tolist(),
                "cones": [cone_to_dict(c) for c in self.cones]}

    @classmethod
    def from_dict(cls, d):
        def mat(m):
            return sp.csc_matrix((m["val"], (m["row"], m["col"])), shape=tuple(m["shape"]))

        return cls(P=mat(d["P"]), c=np.array(d["c"]), A=mat(d["A"]), b=np.array(d["b"]),
                   G=mat(d["G"]), h=np.array(d["h"]),
                   cones=[cone_from_dict(c) for c in d["cones"]], const=d.get("const", 0.0))


@dataclass
class SolveResult:
    status: Status
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    s: np.ndarray
    objective: float
    gap: float
    r_primal: float
    r_dual: float
    iterations: int
    log: list = field(default_factory=list, repr=False)

    @property
    def optimal(self):
        return self.status == Status.OPTIMAL

    def to_dict(self):
        return {"status": self.status.value, "x": self.x.tolist(), "y": self.y.tolist(),
                "z": self.z.tolist(), "s": self.s.tolist(), "objective": self.objective,
                "gap": self.gap, "r_primal": self.r_primal, "r_dual": self.r_dual,
                "iterations": self.iterations}

    @classmethod
    def from_dict(cls, d):
        return cls(status=Status(d["status"]), x=np.array(d["x"]), y=np.array(d["y"]),
                   z=np.array(d["z"]), s=np.array(d["s"]), objective=d["objective"],
                   gap=d["gap"], r_primal=d["r_primal"], r_dual=d["r_dual"],
                   iterations=d["iterations"])


@dataclass
class KKTResiduals:
    r_primal: float
    r_dual: float
    gap: float
    complementarity: float
    cone_violation: float

    def max(self):
        return max(self.r_primal, self.r_dual, self.gap, self.complementarity)


def _inf(v):
    return float(np.max(np.abs(v))) if len(v) else 0.0


def kkt_residuals(prog: ConicProgram, x, y, z, s) -> KKTResiduals:
    """Relative KKT residuals recomputed from the raw primal-dual vectors.

    Nothing from the solver's internal state is used.  Primal and dual
    residuals are infinity norms scaled by the size of the data they are
    built from; the gap is ``|pobj - dobj|`` relative to ``max(1, |pobj|, |dobj|)``.
    """
    x, y, z, s = (np.asarray(v, dtype=float) for v in (x, y, z, s))
    Px = prog.P @ x
    Ax = prog.A @ x
    Gx = prog.G @ x
    rp = np.concatenate([Ax - prog.b, Gx + s - prog.h])
    aty = prog.A.T @ y
    gtz = prog.G.T @ z
    rd = Px + prog.c + aty + gtz
    p_scale = max(1.0, _inf(prog.b), _inf(prog.h), _inf(Ax), _inf(Gx), _inf(s))
    d_scale = max(1.0, _inf(prog.c), _inf(Px), _inf(aty), _inf(gtz))
    pobj = 0.5 * x @ Px + prog.c @ x
    dobj = -0.5 * x @ Px - prog.b @ y - prog.h @ z
    gap = abs(pobj - dobj) / max(1.0, abs(pobj), abs(dobj))
    comp = abs(s @ z) / max(1.0, abs(pobj), abs(dobj))
    layout = prog.layout
    viol = 0.0
    if layout.dim:
        viol = max(0.0, -margin(layout, s), -margin(layout, z))
    return KKTResiduals(r_primal=_inf(rp) / p_scale, r_dual=_inf(rd) / d_scale, gap=gap,
                        complementarity=comp, cone_violation=viol)


__all__ = ["ConicProgram", "SolveResult", "Status", "KKTResiduals", "kkt_residuals",
           "NonNegative", "SecondOrder"]
