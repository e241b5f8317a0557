"""Risk-level and variance-penalty sweep in the layout of the case-study table.

    python3 scripts/run_table.py --case cases/case14_wind.json --out results/case14

Writes table.csv (one row per model / eps / psi) and prices_tidy.csv
(bus, quantity, model, value) and prints the table.
"""

from __future__ import annotations

import csv
import io
import time
from pathlib import Path

import click

from ccopf.pipeline import RunConfig, row_label, run_sweep, table_csv, tidy_csv, tidy_rows


@click.command()
@click.option("--case", default="cases/case14_wind.json", show_default=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--lin-point", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--eps", "eps_values", multiple=True, type=float, default=(0.1, 0.01),
              show_default=True)
@click.option("--psi", "psi_values", multiple=True, type=float,
              default=(0.1, 1.0, 10.0, 100.0, 1000.0), show_default=True)
@click.option("--out", default="results", type=click.Path(file_okay=False), show_default=True)
def main(case, lin_point, eps_values, psi_values, out):
    t0 = time.perf_counter()
    rows = run_sweep(RunConfig(case=case, lin_point=lin_point), list(eps_values),
                     list(psi_values))
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    text = table_csv(rows)
    (out / "table.csv").write_text(text)
    tidy = [r for row in rows if row.report is not None
            for r in tidy_rows(row.report, row_label(row))]
    (out / "prices_tidy.csv").write_text(tidy_csv(tidy))

    body = list(csv.DictReader(io.StringIO(text.split("\n", 1)[1])))
    fmt = lambda v, p=2: "-" if v == "" else f"{float(v):.{p}f}"
    click.echo(f"{'row':28s} {'objective':>12s} {'exp. cost':>12s} {'chi':>9s} "
               f"{'dS2_q%':>8s} {'dS2_v%':>8s} {'dS2_fp%':>8s} {'dS2_fq%':>8s}")
    for r, row in zip(body, rows):
        click.echo(f"{row_label(row):28s} {fmt(r['objective']):>12s} "
                   f"{fmt(r['expected_cost']):>12s} {fmt(r['chi']):>9s} "
                   f"{fmt(r['dsigma2_q_pct'], 3):>8s} {fmt(r['dsigma2_v_pct'], 3):>8s} "
                   f"{fmt(r['dsigma2_fp_pct'], 3):>8s} {fmt(r['dsigma2_fq_pct'], 3):>8s}")
    click.echo(f"{len(rows)} rows in {time.perf_counter() - t0:.1f} s -> {out}")


if __name__ == "__main__":
    main()
