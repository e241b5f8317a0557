"""Write the JSON fixture cases under cases/ (deterministic).

    python3 scripts/make_cases.py [--out cases]
"""

from __future__ import annotations

import json
from pathlib import Path

import click
import numpy as np

from ccopf.network import load_network, network_to_dict

REL_STD = 0.125


def _bus(i, kind, p_d=0.0, q_d=0.0, v_min=0.94, v_max=1.06):
    return {"id": i, "kind": kind, "v_min": v_min, "v_max": v_max, "p_d": p_d, "q_d": q_d,
            "shunt_g": 0.0, "shunt_b": 0.0}


def _line(f, t, r, x, b, s_max):
    return {"from": f, "to": t, "r": r, "x": x, "b_charge": b, "s_max": s_max}


def _gen(bus, p_max, q_lim, c2, c1, p_min=0.0, v_set=1.0):
    return {"bus": bus, "p_min": p_min, "p_max": p_max, "q_min": -q_lim, "q_max": q_lim,
            "c2": c2, "c1": c1, "c0": 0.0, "v_set": v_set}


def _uncertainty(wind, rel_std=REL_STD):
    std = np.array([rel_std * w["p_u"] for w in wind])
    return {"sigma": np.diag(std ** 2).tolist(), "ordering": [w["bus"] for w in wind]}


def case2():
    wind = [{"bus": 2, "p_u": 20.0, "cos_phi": 0.95}]
    return {"name": "case2", "units": "physical", "base_mva": 100.0,
            "buses": [_bus(1, "REF"), _bus(2, "PQ", 60.0, 20.0)],
            "lines": [_line(1, 2, 0.01, 0.1, 0.02, 150.0)],
            "generators": [_gen(1, 150.0, 100.0, 0.02, 20.0, v_set=1.02),
                           _gen(2, 50.0, 30.0, 0.05, 25.0)],
            "wind": wind, "uncertainty": _uncertainty(wind)}


def case5():
    wind = [{"bus": 2, "p_u": 150.0, "cos_phi": 0.95}, {"bus": 5, "p_u": 100.0, "cos_phi": 1.0}]
    return {"name": "case5", "units": "physical", "base_mva": 100.0,
            "buses": [_bus(1, "REF"), _bus(2, "PQ", 300.0, 98.0), _bus(3, "PV", 200.0, 60.0),
                      _bus(4, "PQ", 300.0, 98.0), _bus(5, "PQ")],
            "lines": [_line(1, 2, 0.00281, 0.0281, 0.00712, 400.0),
                      _line(1, 4, 0.00304, 0.0304, 0.00658, 400.0),
                      _line(1, 5, 0.00064, 0.0064, 0.03126, 400.0),
                      _line(2, 3, 0.00108, 0.0108, 0.01852, 400.0),
                      _line(3, 4, 0.00297, 0.0297, 0.00674, 400.0),
                      _line(4, 5, 0.00297, 0.0297, 0.00674, 400.0)],
            "generators": [_gen(1, 400.0, 300.0, 0.02, 14.0, v_set=1.03),
                           _gen(3, 520.0, 390.0, 0.01, 30.0, v_set=1.02)],
            "wind": wind, "uncertainty": _uncertainty(wind)}


def mc5():
    """case5 tightened so one row of every limit class binds with variance."""
    d = case5()
    d["name"] = "mc5"
    d["generators"] = [_gen(1, 150.0, 300.0, 0.02, 14.0, v_set=1.03),
                       _gen(3, 520.0, 120.0, 0.01, 16.0, v_set=1.02),
                       _gen(4, 300.0, 100.0, 0.015, 15.0)]
    d["buses"][4]["v_max"] = 1.03
    d["lines"][0]["s_max"] = 120.0
    return d


def case14_wind(src):
    """IEEE 14-bus with three wind units and finite line ratings."""
    net = load_network(src)
    doc = network_to_dict(net, physical=True)
    doc["name"] = "case14_wind"
    wind = [{"bus": 2, "p_u": 15.0, "cos_phi": 0.95}, {"bus": 9, "p_u": 20.0, "cos_phi": 0.95},
            {"bus": 14, "p_u": 10.0, "cos_phi": 0.9}]
    doc["wind"] = wind
    doc["uncertainty"] = _uncertainty(wind)
    ratings = {(1, 2): 160.0, (1, 5): 100.0, (2, 3): 100.0, (2, 4): 80.0, (2, 5): 60.0,
               (3, 4): 60.0, (4, 5): 80.0}
    for line in doc["lines"]:
        line["s_max"] = ratings.get((line["from"], line["to"]), 50.0)
    return doc


@click.command()
@click.option("--out", default="cases", type=click.Path(file_okay=False))
def main(out):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    docs = {"case2.json": case2(), "case5.json": case5(), "mc5.json": mc5(),
            "case14_wind.json": case14_wind(out / "case14.m")}
    for name, doc in docs.items():
        (out / name).write_text(json.dumps(doc, indent=1) + "\n")
        click.echo(f"wrote {out / name}")


if __name__ == "__main__":
    main()
