"""Interior-point solver: certification suite, duality, statuses and invariants."""

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ccopf.conic import (ConicProgram, NonNegative, SecondOrder, SolverOptions, Status,
                         kkt_residuals, solve)
from ccopf.conic.cones import ConeLayout, in_cone, jordan_product

from _util import program

TOL = 1e-7
# the argmin is only pinned to about sqrt(gap); compare points from tight solves
TIGHT = SolverOptions(tol=1e-11)
SQ2 = np.sqrt(2.0)


# ---------------------------------------------------------------------------
# independent oracle


def cvxopt_solve(prog: ConicProgram):
    """Reference solution from cvxopt's cone QP solver at tight tolerances."""
    import cvxopt
    from cvxopt import solvers

    m = lambda M: cvxopt.matrix(np.asarray(M.toarray() if hasattr(M, "toarray") else M,
                                           dtype=float))
    v = lambda a: cvxopt.matrix(np.asarray(a, dtype=float).reshape(-1, 1))
    dims = {"l": sum(c.dim for c in prog.cones if isinstance(c, NonNegative)),
            "q": [c.dim for c in prog.cones if isinstance(c, SecondOrder)], "s": []}
    # cvxopt wants the orthant rows first; the test problems respect that
    kw = {}
    if prog.A.shape[0]:
        kw = {"A": m(prog.A), "b": v(prog.b)}
    opts = {"show_progress": False, "abstol": 1e-11, "reltol": 1e-11, "feastol": 1e-11,
            "maxiters": 200}
    sol = solvers.coneqp(m(prog.P), v(prog.c), m(prog.G), v(prog.h), dims, options=opts, **kw)
    assert sol["status"] in ("optimal", "unknown")
    x = np.array(sol["x"]).ravel()
    return x, float(prog.objective(x))


# ---------------------------------------------------------------------------
# problem collection: (name, program, oracle) with oracle returning
# {"obj": value, "x": optional unique minimizer}


def _random_socp(rng, n, cone_dims, n_eq=0, quad=False):
    """Feasible, bounded instance: strictly feasible primal and dual points by construction."""
    m = sum(cone_dims)
    G = rng.standard_normal((m, n))
    cones, s0, z0 = [], [], []
    for k, d in enumerate(cone_dims):
        if k == 0 and d > 1:
            cones.append(NonNegative(d))
            s0.append(rng.uniform(0.5, 1.5, d))
            z0.append(rng.uniform(0.5, 1.5, d))
        else:
            cones.append(SecondOrder(d))
            for store in (s0, z0):
                u = rng.standard_normal(d - 1) * 0.3
                store.append(np.concatenate([[np.linalg.norm(u) + 1.0], u]))
    s0, z0 = np.concatenate(s0), np.concatenate(z0)
    x0 = rng.standard_normal(n)
    h = G @ x0 + s0
    A = rng.standard_normal((n_eq, n)) if n_eq else None
    b = A @ x0 if n_eq else None
    y0 = rng.standard_normal(n_eq) if n_eq else np.zeros(0)
    P = None
    c = -G.T @ z0 - (A.T @ y0 if n_eq else 0.0)
    if quad:
        L = rng.standard_normal((n, n))
        P = L @ L.T / n + 0.1 * np.eye(n)
    return program(c, P=P, A=A, b=b, G=G, h=h, cones=cones)


def _cases():
    out = []
    add = lambda name, prog, obj=None, x=None: out.append((name, prog, obj, x))

    # min x  s.t. ||(1, 1)|| <= x
    add("soc_sqrt2", program([1.0], G=[[-1.0], [0.0], [0.0]], h=[0.0, 1.0, 1.0],
                             cones=[SecondOrder(3)]), SQ2, [SQ2])
    # min x^2/2 - x
    add("qp_unconstrained", program([-1.0], P=[[1.0]]), -0.5, [1.0])
    # min -x - y  s.t. x + y <= 1, x, y >= 0 (vertex enumeration gives -1)
    add("lp_simplex", program([-1.0, -1.0], G=[[1, 1], [-1, 0], [0, -1]], h=[1, 0, 0],
                              cones=[NonNegative(3)]), -1.0)
    # min x1 + 2 x2 + 3 x3  s.t. sum x = 1, x >= 0
    add("lp_equality", program([1, 2, 3], A=[[1, 1, 1]], b=[1], G=-np.eye(3), h=np.zeros(3),
                               cones=[NonNegative(3)]), 1.0, [1, 0, 0])
    # projection of (2, -1, 0.5) on the unit box
    p = np.array([2.0, -1.0, 0.5])
    add("qp_box", program(-p, P=np.eye(3), G=np.vstack([np.eye(3), -np.eye(3)]),
                          h=np.r_[np.ones(3), np.zeros(3)], cones=[NonNegative(6)]),
        0.5 * np.sum(np.clip(p, 0, 1) ** 2) - p @ np.clip(p, 0, 1), np.clip(p, 0, 1))
    # equality-constrained QP: closed-form KKT solve
    Pq = np.array([[4.0, 1.0, 0.0], [1.0, 3.0, 0.5], [0.0, 0.5, 2.0]])
    q = np.array([1.0, -2.0, 0.5])
    Aq = np.array([[1.0, 1.0, 1.0], [1.0, -1.0, 0.0]])
    bq = np.array([1.0, 0.2])
    K = np.block([[Pq, Aq.T], [Aq, np.zeros((2, 2))]])
    xq = np.linalg.solve(K, np.r_[-q, bq])[:3]
    add("qp_equality", program(q, P=Pq, A=Aq, b=bq), 0.5 * xq @ Pq @ xq + q @ xq, xq)
    # min c'x  s.t. ||x|| <= 1
    cb = np.array([3.0, -4.0])
    add("soc_ball_linear", program(cb, G=np.vstack([np.zeros(2), -np.eye(2)]),
                                   h=[1.0, 0.0, 0.0], cones=[SecondOrder(3)]),
        -5.0, -cb / 5.0)
    # projection of p onto the ball ||x - c|| <= r
    pp, cc, r = np.array([3.0, 1.0]), np.array([0.5, 0.0]), 1.5
    xp = cc + r * (pp - cc) / np.linalg.norm(pp - cc)
    add("soc_ball_projection", program(-pp, P=np.eye(2), G=np.vstack([np.zeros(2), -np.eye(2)]),
                                       h=np.r_[r, -cc], cones=[SecondOrder(3)]),
        0.5 * xp @ xp - pp @ xp, xp)
    # min t  s.t. ||M x - d|| <= t: least-squares residual norm
    M = np.array([[1.0, 0.0], [1.0, 1.0], [1.0, 2.0], [1.0, 3.0]])
    d = np.array([1.0, 2.0, 2.5, 5.0])
    xl = np.linalg.lstsq(M, d, rcond=None)[0]
    Gl = np.zeros((5, 3))
    Gl[0, 2] = -1.0
    Gl[1:, :2] = -M
    add("soc_least_squares", program([0, 0, 1], G=Gl, h=np.r_[0.0, -d], cones=[SecondOrder(5)]),
        np.linalg.norm(M @ xl - d), np.r_[xl, np.linalg.norm(M @ xl - d)])
    # min t  s.t. |x - 2| <= t, x >= 3
    add("soc_2d_abs", program([0, 1], G=[[-1, 0], [0, -1], [-1, 0]], h=[-3, 0, -2],
                              cones=[NonNegative(1), SecondOrder(2)]), 1.0, [3, 1])
    # degenerate LP: min x1  s.t. x1 + x2 >= 1, x >= 0 (x2 not unique)
    add("lp_degenerate", program([1, 0], G=[[-1, -1], [-1, 0], [0, -1]], h=[-1, 0, 0],
                                 cones=[NonNegative(3)]), 0.0)
    # Chebyshev centre of [0, 2]^2: max r s.t. box shrunk by r
    Gc = np.array([[1, 0, 1], [-1, 0, 1], [0, 1, 1], [0, -1, 1], [0, 0, -1]], dtype=float)
    add("lp_chebyshev", program([0, 0, -1], G=Gc, h=[2, 0, 2, 0, 0], cones=[NonNegative(5)]),
        -1.0, [1, 1, 1])
    # min t  s.t. |x1 - 1| <= t, |x2 - 4| <= t, x1 = x2  -> t = 1.5
    Gm = np.array([[0, 0, -1], [-1, 0, 0], [0, 0, -1], [0, -1, 0]], dtype=float)
    add("soc_minmax", program([0, 0, 1], A=[[1, -1, 0]], b=[0], G=Gm, h=[0, -1, 0, -4],
                              cones=[SecondOrder(2), SecondOrder(2)]), 1.5, [2.5, 2.5, 1.5])
    # badly scaled LP: min 1e4 x  s.t. x >= 1e-2
    add("lp_scaled", program([1e4], G=[[-1.0]], h=[-1e-2], cones=[NonNegative(1)]), 100.0,
        [1e-2])
    # two-generator dispatch: min sum (c2 p^2 + c1 p) s.t. p1 + p2 = 1, 0 <= p <= 0.8
    c2, c1 = np.array([1.0, 2.0]), np.array([10.0, 9.0])
    lam = (1.0 + np.sum(c1 / (2 * c2))) / np.sum(1 / (2 * c2))  # equal marginal cost
    pd = (lam - c1) / (2 * c2)
    add("qp_dispatch", program(c1, P=np.diag(2 * c2), A=[[1, 1]], b=[1],
                               G=np.vstack([np.eye(2), -np.eye(2)]), h=[0.8, 0.8, 0, 0],
                               cones=[NonNegative(4)]), float(c2 @ pd ** 2 + c1 @ pd), pd)

    rng = np.random.default_rng(7)
    add("rand_lp", _random_socp(rng, 5, [8]))
    add("rand_qp", _random_socp(rng, 6, [9], n_eq=2, quad=True))
    add("rand_socp", _random_socp(rng, 6, [4, 5, 3], n_eq=1))
    add("rand_mixed", _random_socp(rng, 8, [6, 4, 4, 3], n_eq=2, quad=True))
    add("rand_socp_large", _random_socp(rng, 20, [15, 6, 6, 6, 5, 4], n_eq=4))
    return out


CASES = _cases()


def test_twenty_problems():
    assert len(CASES) == 20


@pytest.mark.parametrize("name,prog,obj,x", CASES, ids=[c[0] for c in CASES])
def test_certification(name, prog, obj, x):
    res = solve(prog)
    assert res.status == Status.OPTIMAL, name
    kkt = kkt_residuals(prog, res.x, res.y, res.z, res.s)
    assert kkt.r_primal <= TOL and kkt.r_dual <= TOL and kkt.gap <= TOL
    assert kkt.complementarity <= TOL
    assert kkt.cone_violation <= 1e-9
    if obj is None:
        x_ref, obj = cvxopt_solve(prog)
        if prog.P.nnz:
            x = x_ref  # strictly convex: the minimizer is unique
    assert res.objective == pytest.approx(obj, abs=TOL * max(1.0, abs(obj)))
    if x is not None:
        np.testing.assert_allclose(solve(prog, TIGHT).x, x, atol=1e-6)


def test_analytic_duals():
    # SOC dual of the sqrt(2) problem has first component 1
    res = solve(CASES[0][1])
    assert res.z[0] == pytest.approx(1.0, abs=TOL)
    # LP simplex: the row x + y <= 1 carries dual 1
    res = solve(CASES[2][1])
    assert res.z[0] == pytest.approx(1.0, abs=TOL)


def test_dual_cone_membership():
    for name, prog, *_ in CASES:
        res = solve(prog)
        if prog.layout.dim:
            assert in_cone(prog.layout, res.z, tol=1e-9), name
            assert in_cone(prog.layout, res.s, tol=1e-9), name


def test_deterministic():
    prog = CASES[-1][1]
    r1, r2 = solve(prog), solve(prog)
    assert r1.iterations == r2.iterations
    for a, b in ((r1.x, r2.x), (r1.y, r2.y), (r1.z, r2.z), (r1.s, r2.s)):
        assert np.array_equal(a, b)
    assert json.dumps(r1.to_dict()) == json.dumps(r2.to_dict())


@pytest.mark.parametrize("k", [0.01, 3.0, 250.0])
def test_objective_scaling(k):
    _, prog, *_ = CASES[18]  # rand_mixed
    scaled = ConicProgram(P=prog.P * k, c=prog.c * k, A=prog.A, b=prog.b, G=prog.G, h=prog.h,
                          cones=prog.cones)
    # termination is absolute below unit objective scale, so ask k times more
    r1, rk = solve(prog, TIGHT), solve(scaled, SolverOptions(tol=1e-11 * min(1.0, k)))
    assert rk.status == Status.OPTIMAL
    np.testing.assert_allclose(rk.x, r1.x, atol=1e-6)
    np.testing.assert_allclose(rk.z, k * r1.z, atol=2e-6 * k)
    np.testing.assert_allclose(rk.y, k * r1.y, atol=2e-6 * k)


def test_primal_infeasible():
    # x >= 1 and x <= 0
    prog = program([1.0], G=[[-1.0], [1.0]], h=[-1.0, 0.0], cones=[NonNegative(2)])
    assert solve(prog).status == Status.PRIMAL_INFEASIBLE


def test_dual_infeasible():
    # min -x  s.t. x >= 0 is unbounded
    prog = program([-1.0], G=[[-1.0]], h=[0.0], cones=[NonNegative(1)])
    assert solve(prog).status == Status.DUAL_INFEASIBLE


def test_infeasible_soc():
    # ||x|| <= 1 and x1 >= 2
    prog = program([0.0, 0.0], G=[[-1.0, 0.0], [0.0, 0.0], [-1.0, 0.0], [0.0, -1.0]],
                   h=[-2.0, 1.0, 0.0, 0.0], cones=[NonNegative(1), SecondOrder(3)])
    assert solve(prog).status == Status.PRIMAL_INFEASIBLE


def test_iteration_cap_reported():
    res = solve(CASES[-1][1], SolverOptions(max_iter=2, tol_accept=1e-16))
    assert res.status == Status.ITER_LIMIT
    assert res.iterations == 2


# ---------------------------------------------------------------------------
# residual checker


def test_kkt_hand_built_pair():
    prog = CASES[0][1]
    x = np.array([SQ2])
    s = np.array([SQ2, 1.0, 1.0])
    z = np.array([1.0, -1 / SQ2, -1 / SQ2])
    kkt = kkt_residuals(prog, x, np.zeros(0), z, s)
    assert kkt.max() <= 1e-12
    assert kkt.cone_violation <= 1e-12


def test_kkt_perturbation_detected():
    prog = CASES[14][1]  # qp_dispatch
    res = solve(prog)
    base = kkt_residuals(prog, res.x, res.y, res.z, res.s)
    bumped = kkt_residuals(prog, res.x + 1e-3, res.y, res.z, res.s)
    assert bumped.r_primal > base.r_primal
    assert bumped.r_primal > 1e-4


def test_polish_restores_exact_complementarity():
    # min c'x over the unit disc: x = -c/|c|, z = (|c|, c)
    c = np.array([1.0, 0.02])
    G = -np.vstack([np.zeros(2), np.eye(2)])
    prog = ConicProgram(None, c, None, [], G, np.array([1.0, 0.0, 0.0]), [SecondOrder(3)])
    rough = solve(prog, SolverOptions(polish=False))
    res = solve(prog, SolverOptions())
    assert res.status == Status.OPTIMAL
    pair = lambda r: np.linalg.norm(jordan_product(prog.layout, r.s, r.z))
    assert pair(res) <= 1e-14 < pair(rough)
    np.testing.assert_allclose(res.x, -c / np.linalg.norm(c), atol=1e-14)
    np.testing.assert_allclose(res.z, [np.linalg.norm(c), *c], atol=1e-13)


def test_program_roundtrip():
    prog = CASES[-1][1]
    back = ConicProgram.from_dict(json.loads(json.dumps(prog.to_dict())))
    np.testing.assert_array_equal(back.G.toarray(), prog.G.toarray())
    np.testing.assert_array_equal(back.c, prog.c)
    assert back.cones == prog.cones


def test_rejects_indefinite_objective():
    with pytest.raises(ValueError):
        program([0.0, 0.0], P=[[1.0, 0.0], [0.0, -1.0]])


def test_solver_log(tmp_path):
    path = tmp_path / "log.jsonl"
    res = solve(CASES[0][1], SolverOptions(log_file=str(path)))
    lines = path.read_text().splitlines()
    assert len(lines) == len(res.log) > 0
    assert {"iter", "r_primal", "r_dual"} <= set(json.loads(lines[-1]))


# ---------------------------------------------------------------------------
# property-based: random feasible SOCPs certify against their own residuals


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2 ** 31 - 1), n=st.integers(2, 8), n_soc=st.integers(1, 3),
       quad=st.booleans())
def test_random_socp_property(seed, n, n_soc, quad):
    rng = np.random.default_rng(seed)
    dims = [n + 1] + [int(d) for d in rng.integers(2, 5, n_soc)]
    prog = _random_socp(rng, n, dims, n_eq=int(rng.integers(0, 2)), quad=quad)
    res = solve(prog)
    assert res.status == Status.OPTIMAL
    kkt = kkt_residuals(prog, res.x, res.y, res.z, res.s)
    assert max(kkt.r_primal, kkt.r_dual, kkt.gap) <= TOL
    layout = ConeLayout(prog.cones)
    assert in_cone(layout, res.z, tol=1e-9) and in_cone(layout, res.s, tol=1e-9)
