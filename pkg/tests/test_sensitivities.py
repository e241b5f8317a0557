import numpy as np
import pytest

from ccopf.network import Bus, BusKind, Generator, Line, Network, WindUnit, load_network
from ccopf.powerflow import newton_pf, pf_jacobian
from ccopf.sensitivities import NodePartition, dump_csv, partition_jacobian, response_matrices

from _util import case_path, context, fd_relative_error


def _chain(kinds):
    buses = [Bus(k + 1, kind, 0.9, 1.1, p_d=0.1 if kind == "PQ" else 0.0)
             for k, kind in enumerate(kinds)]
    lines = [Line(k + 1, k + 2, 0.01, 0.1) for k in range(len(kinds) - 1)]
    gens = [Generator(k + 1, 0, 1, -1, 1, c2=1.0) for k, kind in enumerate(kinds)
            if kind != "PQ"]
    return Network(100.0, buses, lines, gens)


@pytest.mark.parametrize("kinds, a_shape, c_shape", [
    (["REF", "PQ"], (2, 2), (2, 2)),
    (["REF", "PV", "PQ"], (3, 3), (3, 3)),
])
def test_partition_dimensions(kinds, a_shape, c_shape):
    net = _chain(kinds)
    jac = pf_jacobian(net, newton_pf(net).state)
    blocks = partition_jacobian(jac, NodePartition.from_network(net))
    assert blocks.A.shape == a_shape
    assert blocks.C.shape == c_shape


@pytest.mark.parametrize("name", ["case5.json", "case14.m"])
def test_reassembly_is_a_pure_permutation(name):
    net = load_network(case_path(name))
    jac = pf_jacobian(net, newton_pf(net).state)
    blocks = partition_jacobian(jac, NodePartition.from_network(net))
    np.testing.assert_array_equal(blocks.reassemble(), jac.full())


@pytest.mark.parametrize("name", ["case5.json", "case14_wind.json"])
def test_zero_rows_at_controlled_buses(name):
    ctx = context(name)
    net, sf = ctx.net, ctx.sf
    controlled = [k for k, b in enumerate(net.buses) if b.kind != BusKind.PQ]
    assert np.all(sf.R_v[controlled] == 0.0)
    assert np.all(sf.X_v[controlled] == 0.0)
    assert np.all(sf.R_th[net.ref] == 0.0)
    # slack absorbs active injections at the REF bus itself
    assert np.all(sf.R_v[:, net.ref] == 0.0)
    # reactive injections at voltage-controlled buses are absorbed locally
    assert np.all(sf.X_v[:, controlled] == 0.0)
    pq_gens = [k for k, b in enumerate(net.gen_bus) if net.buses[b].kind == BusKind.PQ]
    assert np.all(sf.R_q[pq_gens] == 0.0)


@pytest.mark.parametrize("name", ["case2.json", "case5.json", "case14_wind.json", "mc5.json"])
def test_composed_response_against_nonlinear_resolve(name, rng):
    ctx = context(name)
    net = ctx.net
    for alpha in (np.full(net.n_gen, 1.0 / net.n_gen), rng.dirichlet(np.ones(net.n_gen))):
        assert fd_relative_error(net, ctx.point, ctx.sf, alpha) <= 1e-4


def test_balancing_at_disturbed_bus_cancels_active_channel():
    # wind at a PV generator bus balanced entirely by that generator
    base = load_network(case_path("case5.json"))
    k = 1
    bus = base.buses[base.gen_bus[k]].id
    net = base.replace(wind=(WindUnit(bus, 0.5, 1.0),), sigma=np.eye(1) * 0.01)
    sf = response_matrices(net, newton_pf(net))
    alpha = np.zeros(net.n_gen)
    alpha[k] = 1.0
    for key in ("v", "fp", "fq", "q"):
        R_w, _, R_g = sf.wind_columns(key)
        active = R_w - np.outer(R_g @ alpha, np.ones(1))
        np.testing.assert_allclose(active, 0.0, atol=1e-14)


def test_injection_response_identity():
    ctx = context("case14_wind.json")
    net, sf = ctx.net, ctx.sf
    P = NodePartition.from_network(net)
    specified = np.concatenate([P.pq, P.pv])
    # specified injections move one-for-one with the disturbance
    np.testing.assert_allclose(sf.R_p[np.ix_(specified, specified)], np.eye(len(specified)),
                               atol=1e-10)
    np.testing.assert_allclose(sf.X_p[np.ix_(P.pq, P.pq)], 0.0, atol=1e-10)


def test_dump_csv(tmp_path):
    ctx = context("case5.json")
    path = tmp_path / "sens.csv"
    dump_csv(ctx.sf, ctx.net, path)
    rows = path.read_text().splitlines()
    assert rows[0] == "matrix,row,bus,value"
    assert any(r.startswith("R_v,bus") for r in rows)
