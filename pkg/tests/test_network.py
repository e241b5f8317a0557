import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ccopf.errors import (InconsistentDimension, InvalidNetwork, MalformedRow, MissingTable,
                          MultipleRefBuses, NoRefBus, SchemaViolation, SingularBranch,
                          UnsupportedCostModel)
from ccopf.network import (Bus, BusKind, Generator, Line, Network, WindUnit,
                           aggregate_generators, build_admittance, emit_network_json,
                           load_network, network_to_dict, parse_matpower, parse_network_json)

from _util import case_path

TWO_BUS = """
function mpc = two
mpc.version = '2';
mpc.baseMVA = 100;
%% bus_i type Pd Qd Gs Bs area Vm Va baseKV zone Vmax Vmin
mpc.bus = [
	1	3	0	0	0	0	1	1	0	135	1	1.05	0.95;
	2	1	50	10	0	0	1	1	0	135	1	1.05	0.95;
];
%% bus Pg Qg Qmax Qmin Vg mBase status Pmax Pmin
mpc.gen = [
	1	0	0	100	-100	1.02	100	1	200	0;
];
%% fbus tbus r x b rateA rateB rateC ratio angle status
mpc.branch = [
	1	2	0.01	0.1	0.02	120	120	120	0	0	1;
];
mpc.gencost = [
	2	0	0	3	0.01	40	0;
];
"""


def _two_bus(**edits):
    text = TWO_BUS
    for old, new in edits.items():
        text = text.replace(old, new)
    return text


def test_two_bus_fixture_field_by_field():
    net = parse_matpower(TWO_BUS, name="two")
    assert (net.n_bus, net.n_line, net.n_gen) == (2, 1, 1)
    b1, b2 = net.buses
    assert (b1.id, b1.kind, b2.kind) == (1, BusKind.REF, BusKind.PQ)
    assert (b2.p_d, b2.q_d) == (0.5, 0.1)
    assert (b2.v_min, b2.v_max) == (0.95, 1.05)
    (line,) = net.lines
    assert (line.from_bus, line.to_bus) == (1, 2)
    assert (line.r, line.x, line.b_charge) == (0.01, 0.1, 0.02)
    assert line.s_max == pytest.approx(1.2)
    (g,) = net.generators
    assert (g.p_min, g.p_max, g.q_min, g.q_max, g.v_set) == (0.0, 2.0, -1.0, 1.0, 1.02)
    assert net.ref == 0


def test_missing_ref_bus():
    with pytest.raises(NoRefBus):
        parse_matpower(_two_bus(**{"1\t3\t0\t0": "1\t2\t0\t0"}))


def test_two_ref_buses():
    with pytest.raises(MultipleRefBuses):
        parse_matpower(_two_bus(**{"2\t1\t50": "2\t3\t50"}))


def test_missing_table_and_bad_rows():
    with pytest.raises(MissingTable):
        parse_matpower(TWO_BUS.replace("mpc.branch", "mpc.branches"))
    with pytest.raises(MalformedRow) as exc:
        parse_matpower(_two_bus(**{"0.01\t0.1\t0.02": "0.01\tx\t0.02"}))
    assert exc.value.line_no > 0
    with pytest.raises(UnsupportedCostModel):
        parse_matpower(_two_bus(**{"2\t0\t0\t3": "1\t0\t0\t3"}))


def test_cost_scaling_dimensional_analysis():
    # (c2, c1, c0) = (0.01 $/MW^2, 40 $/MW, 0) at 100 MVA
    (g,) = parse_matpower(TWO_BUS).generators
    assert g.c2 == pytest.approx(100.0)
    assert g.c1 == pytest.approx(4000.0)
    for mw in (0.0, 37.5, 180.0):
        dollars_mw = 0.01 * mw ** 2 + 40.0 * mw
        assert g.cost(mw / 100.0) == pytest.approx(dollars_mw, rel=1e-12)


@pytest.mark.parametrize("cos_phi, gamma", [(1.0, 0.0), (0.8, math.sqrt(1 - 0.64) / 0.8)])
def test_wind_gamma(cos_phi, gamma):
    w = WindUnit(bus=1, p_u=0.3, cos_phi=cos_phi)
    assert w.gamma == pytest.approx(gamma, abs=1e-15)
    if cos_phi == 0.8:
        assert w.gamma == pytest.approx(0.75)
    assert w.q_u == pytest.approx(0.3 * gamma)


@pytest.mark.parametrize("name", ["case2.json", "case5.json", "case14_wind.json", "mc5.json"])
def test_json_round_trip(name):
    net = load_network(case_path(name))
    for physical in (False, True):
        assert parse_network_json(emit_network_json(net, physical)) == net


def test_matpower_round_trip_through_json():
    net = load_network(case_path("case14.m"))
    again = parse_network_json(emit_network_json(net))
    assert again == net
    np.testing.assert_array_equal(again.admittance, net.admittance)


def test_schema_violations():
    doc = network_to_dict(load_network(case_path("case2.json")))
    bad = json.loads(json.dumps(doc))
    del bad["lines"][0]["x"]
    with pytest.raises(SchemaViolation) as exc:
        parse_network_json(json.dumps(bad))
    assert "lines[0].x" in exc.value.path
    bad = json.loads(json.dumps(doc))
    bad["uncertainty"]["sigma"] = [[1.0, 0.0], [0.0, 1.0]]
    with pytest.raises(InconsistentDimension):
        parse_network_json(json.dumps(bad))
    with pytest.raises(SchemaViolation):
        parse_network_json("{not json")


def test_series_admittance_single_line():
    net = Network(100.0, [Bus(1, "REF", 0.9, 1.1), Bus(2, "PQ", 0.9, 1.1)],
                  [Line(1, 2, r=0.0, x=0.1)])
    Y = build_admittance(net)
    assert Y[0, 1] == pytest.approx(10j)
    assert Y[0, 0] == pytest.approx(-10j)
    with pytest.raises(SingularBranch):
        Line(1, 2, r=0.0, x=0.0).series_admittance


def test_kirchhoff_row_sums_without_shunts():
    buses = [Bus(1, "REF", 0.9, 1.1), Bus(2, "PQ", 0.9, 1.1), Bus(3, "PQ", 0.9, 1.1)]
    lines = [Line(1, 2, 0.01, 0.1), Line(2, 3, 0.02, 0.2), Line(1, 3, 0.03, 0.25)]
    Y = build_admittance(Network(100.0, buses, lines))
    np.testing.assert_allclose(Y.sum(axis=1), 0.0, atol=1e-12)


def _naive_ybus(net):
    idx = {b.id: k for k, b in enumerate(net.buses)}
    Y = [[0j] * net.n_bus for _ in range(net.n_bus)]
    for line in net.lines:
        i, j = idx[line.from_bus], idx[line.to_bus]
        y = 1 / complex(line.r, line.x)
        half = 1j * line.b_charge / 2
        Y[i][i] += y + half
        Y[j][j] += y + half
        Y[i][j] -= y
        Y[j][i] -= y
    for k, b in enumerate(net.buses):
        Y[k][k] += complex(b.shunt_g, b.shunt_b)
    return np.array(Y)


@pytest.mark.parametrize("name", ["case5.json", "case14.m", "case30.m"])
def test_ybus_against_loop_construction(name):
    net = load_network(case_path(name))
    np.testing.assert_allclose(build_admittance(net), _naive_ybus(net), rtol=0, atol=1e-12)


def test_aggregation_matches_two_unit_dispatch():
    g1 = Generator(1, 0.0, 5.0, -1, 1, c2=2.0, c1=10.0)
    g2 = Generator(1, 0.0, 5.0, -1, 1, c2=5.0, c1=12.0)
    (agg,) = aggregate_generators([g1, g2])
    for total in (0.6, 1.0, 2.5):
        # equal marginal cost: 2 c2_k p_k + c1_k = lam, p1 + p2 = total
        lam = (total + 10.0 / 4.0 + 12.0 / 10.0) / (1 / 4.0 + 1 / 10.0)
        p1, p2 = (lam - 10.0) / 4.0, (lam - 12.0) / 10.0
        assert min(p1, p2) > 0
        assert agg.cost(total) == pytest.approx(g1.cost(p1) + g2.cost(p2), rel=1e-12)
        assert agg.marginal_cost(total) == pytest.approx(lam, rel=1e-12)
    assert (agg.p_max, agg.q_min) == (10.0, -2)


def test_parallel_lines_merge_and_validation():
    text = TWO_BUS.replace("];\nmpc.gencost", "\t1\t2\t0.01\t0.1\t0.02\t120\t120\t120\t0\t0\t1;\n];"
                                             "\nmpc.gencost", 1)
    net = parse_matpower(text)
    assert net.n_line == 1
    assert net.lines[0].x == pytest.approx(0.05)
    with pytest.raises(InvalidNetwork):
        Network(100.0, [Bus(1, "REF", 0.9, 1.1), Bus(2, "PQ", 0.9, 1.1), Bus(3, "PQ", 0.9, 1.1)],
                [Line(1, 2, 0.01, 0.1)])


@settings(max_examples=30, deadline=None)
@given(st.floats(0.001, 0.1), st.floats(1.0, 60.0), st.floats(0.0, 3.0))
def test_per_unit_cost_invariance(c2, c1, p_mw_scale):
    # the same MW dispatch costs the same in both unit systems
    doc = network_to_dict(load_network(case_path("case2.json")), physical=True)
    doc["generators"][0].update(c2=c2, c1=c1)
    net = parse_network_json(json.dumps(doc))
    p_mw = 50.0 * p_mw_scale
    assert net.generators[0].cost(p_mw / 100.0) == pytest.approx(c2 * p_mw ** 2 + c1 * p_mw,
                                                                  rel=1e-12, abs=1e-12)
