"""Command line front-end.

    ccopf solve    --case cases/case5.json --model eqv-cc --eps 0.1 --out out/
    ccopf sweep    --case cases/case14_wind.json --eps 0.1 --eps 0.01 --psi 1 --psi 100
    ccopf validate --solution out/solution.json --seed 1 --samples 10000
    ccopf linpoint --case cases/case5.json --out point.json

Exit codes: 0 success, 1 error or bad usage, 2 infeasible model,
3 empirical violation rate above eps + 3 binomial sigmas.
"""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click

from .conic import Status
from .errors import CCOPFError, InfeasibleBounds, InfeasibleReserve, MissingSolution
from .linpoint import compute_point
from .network import load_network
from .pipeline import (PRICING_TOL, RunConfig, load_solution, row_label, run_solve, run_sweep,
                       solution_document, table_csv, tidy_csv, tidy_rows)
from .powerflow import save_point
from .validation import Mode, validate

EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE, EXIT_EXCEEDED = 0, 1, 2, 3

_EPS = click.FloatRange(0.0, 0.5, min_open=True, max_open=True)
_MODELS = click.Choice(["det", "gen-cc", "eqv-cc", "va-cc"])


class Failure(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _risk_options(f):
    for opt in reversed([
        click.option("--eps", type=_EPS, default=0.1, show_default=True,
                     help="Risk level for every constraint class."),
        click.option("--eps-p", type=_EPS, default=None),
        click.option("--eps-q", type=_EPS, default=None),
        click.option("--eps-v", type=_EPS, default=None),
        click.option("--eps-f", type=_EPS, default=None),
    ]):
        f = opt(f)
    return f


def _common(f):
    for opt in reversed([
        click.option("--case", required=True, type=click.Path(exists=True, dir_okay=False)),
        click.option("--lin-point", type=click.Path(exists=True, dir_okay=False), default=None,
                     help="Operating point JSON to linearize around (else computed)."),
        click.option("--rel-std", type=click.FloatRange(min=0.0), default=None,
                     help="Forecast std as a fraction of each wind forecast "
                          "(overrides the covariance stored in the case)."),
        click.option("--tol", type=click.FloatRange(min=0.0, min_open=True),
                     default=PRICING_TOL, show_default=True),
        click.option("--out", type=click.Path(file_okay=False), default="out",
                     show_default=True),
    ]):
        f = opt(f)
    return f


@click.group()
@click.option("-v", "--verbose", count=True)
def cli(verbose):
    """Chance-constrained AC-OPF pricing."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


@cli.command("solve")
@_common
@click.option("--model", type=_MODELS, default="eqv-cc", show_default=True)
@_risk_options
@click.option("--psi", type=click.FloatRange(min=0.0), default=0.0, show_default=True,
              help="Uniform variance penalty ($ per p.u.^2) for va-cc.")
@click.option("--solver-log", is_flag=True, help="Write the iteration log as JSON lines.")
def cmd_solve(case, lin_point, rel_std, tol, out, model, eps, eps_p, eps_q, eps_v, eps_f, psi,
              solver_log):
    """Solve one model and write the solution and its prices."""
    case = str(Path(case).resolve())
    lin_point = str(Path(lin_point).resolve()) if lin_point else None
    cfg = RunConfig(case=case, model=model, eps=eps, eps_p=eps_p, eps_q=eps_q, eps_v=eps_v,
                    eps_f=eps_f, psi=psi, lin_point=lin_point, rel_std=rel_std, tol=tol)
    out = Path(out)
    if solver_log:
        out.mkdir(parents=True, exist_ok=True)
    try:
        res = run_solve(cfg, log_file=str(out / "solver.jsonl") if solver_log else None)
    except (InfeasibleReserve, InfeasibleBounds) as exc:
        raise Failure(EXIT_INFEASIBLE, f"infeasible: {exc}")
    _write(out / "solution.json", json.dumps(solution_document(res), indent=1) + "\n")
    if res.infeasible:
        raise Failure(EXIT_INFEASIBLE, f"model is {res.result.status.value}")
    if not res.optimal:
        raise Failure(EXIT_ERROR, f"solver stopped with status {res.result.status.value}")
    rep = res.report
    _write(out / "prices.json", rep.to_json() + "\n")
    _write(out / "prices.csv", rep.to_csv())
    _write(out / "prices_tidy.csv", tidy_csv(tidy_rows(rep, model)))
    click.echo(f"{model}: objective {res.result.objective:.6f}"
               + (f", chi {rep.chi:.6f}" if rep.chi is not None else ""))


@cli.command("sweep")
@_common
@click.option("--eps", "eps_values", type=_EPS, multiple=True, default=(0.1, 0.01),
              show_default=True)
@click.option("--psi", "psi_values", type=click.FloatRange(min=0.0), multiple=True,
              default=(0.1, 1.0, 10.0, 100.0, 1000.0), show_default=True)
def cmd_sweep(case, lin_point, rel_std, tol, out, eps_values, psi_values):
    """Det / GEN-CC / EQV-CC / VA-CC table over risk levels and penalties."""
    base = RunConfig(case=case, lin_point=lin_point, rel_std=rel_std, tol=tol)
    rows = run_sweep(base, list(eps_values), list(psi_values))
    out = Path(out)
    _write(out / "table.csv", table_csv(rows))
    tidy = [r for row in rows if row.report is not None for r in tidy_rows(row.report,
                                                                               row_label(row))]
    _write(out / "prices_tidy.csv", tidy_csv(tidy))
    bad = [r for r in rows if r.status != Status.OPTIMAL.value]
    for r in bad:
        click.echo(f"{row_label(r)}: {r.status} {r.error}", err=True)
    click.echo(f"{len(rows)} rows written to {out / 'table.csv'}")


@cli.command("validate")
@click.option("--solution", required=True, type=click.Path(dir_okay=False))
@click.option("--samples", type=click.IntRange(min=1), default=10_000, show_default=True)
@click.option("--seed", type=int, required=True)
@click.option("--mode", type=click.Choice([m.value for m in Mode]), default="linearized",
              show_default=True)
@click.option("--trace", is_flag=True, help="Also write a per-draw CSV (first 10^4 draws).")
@click.option("--out", type=click.Path(file_okay=False), default=None,
              help="Output directory (defaults to the solution's directory).")
def cmd_validate(solution, samples, seed, mode, trace, out):
    """Monte Carlo check of a stored solution against its chance constraints."""
    path = Path(solution)
    if not path.exists():
        raise MissingSolution(f"no solution file at {path}")
    cfg, ctx, policy = load_solution(json.loads(path.read_text()))
    if ctx.unc is None:
        raise CCOPFError("the case has no wind units to sample")
    out = Path(out) if out else path.parent
    out.mkdir(parents=True, exist_ok=True)
    fh = open(out / "trace.csv", "w", newline="") if trace else None
    try:
        rep = validate(policy, ctx.net, ctx.sf, ctx.unc, n=samples, seed=seed, mode=mode,
                       trace=fh)
    finally:
        if fh:
            fh.close()
    _write(out / "validation.json", rep.to_json() + "\n")
    exceeded = rep.exceedances(cfg.risk)
    for name, i, r, lim in exceeded:
        click.echo(f"{name}[{i}]: rate {r:.4f} > {lim:.4f}", err=True)
    if exceeded:
        raise Failure(EXIT_EXCEEDED, f"{len(exceeded)} rows exceed their risk level")
    click.echo(f"{samples} draws, no row above eps + 3 sigma")


@cli.command("linpoint")
@click.option("--case", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def cmd_linpoint(case, out):
    """Compute and store an operating point (dispatch / power-flow fixed point)."""
    point = compute_point(load_network(case))
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    save_point(point, out)
    click.echo(f"power-flow residual {point.residual_norm:.2e}")


def main(argv=None):
    """Entry point with the documented exit codes."""
    try:
        cli.main(args=argv, prog_name="ccopf", standalone_mode=False)
    except Failure as exc:
        click.echo(f"error: {exc}", err=True)
        return exc.code
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return EXIT_ERROR
    except click.ClickException as exc:
        exc.show()
        return EXIT_ERROR
    except CCOPFError as exc:
        click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
        return EXIT_ERROR
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_ERROR
    return EXIT_OK


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
