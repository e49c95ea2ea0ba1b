# src/main.py

from dotenv import load_dotenv
load_dotenv()  # PRR_* settings may live in .env

import logging
import math
import os
import sys
import time
from typing import List, Optional

import click
import numpy as np
import typer

from .data.loader import load_config
from .model.model import build_model, perturb, validate_assumptions
from .periodic.reaction import build_nonlinear_model, validate_reaction
from .periodic.solver import limit_check_infty, limit_check_zero, solve_periodic
from .r0.r0 import r0_bisect, r0_direct, r0_pointwise_max
from .r0.sweep import default_kappa_grid, sweep
from .spectral.blocks import verify_block_consistency
from .spectral.eigen import principal_eigenvalue
from .types.errors import ComputationError, ConfigError
from .types.index import LimitReport, RunRequest, Setting, SweepReport
from .utils.helpers import format_value, kappa_columns, setup_logging, write_summary, write_table
from .utils.settings import get_settings
from .zika.zika import build_zika_params, zika_limits, zika_r0, zika_sweep

logger = logging.getLogger(__name__)

app = typer.Typer(add_completion=False, no_args_is_help=True,
                  help="R0 and principal eigenvalues of time-periodic cooperative reaction-diffusion systems.")

CONFIG = typer.Option(..., "--config", "-c", help="Model config (TOML).")
OUT = typer.Option("out", "--out", "-o", help="Output directory, created if absent.")
SET = typer.Option(None, "--set", help="Override a config key: --set diffusion.kappa=[0.01]")
JOBS = typer.Option(None, "--jobs", "-j", help="Worker processes for independent sweep points.")
SEED = typer.Option(0, "--seed", help="Seed for randomized perturbations.")
LOG_LEVEL = typer.Option(None, "--log-level", help="DEBUG, INFO, WARNING or ERROR.")
TIMINGS = typer.Option(False, "--timings", help="Add wall_ms columns (outputs are then not reproducible).")
SETTING = typer.Option("pde", "--setting", help="pde, frozen_x or averaged.")
KAPPA_GRID = typer.Option(None, "--kappa-grid", help="Comma-separated ascending kappa values.")

VIOLATION_COLUMNS = ["assumption", "entry_i", "entry_j", "node", "time_index", "x", "t", "value", "detail"]


class _Run:
    """Per-invocation state: request, loaded config, output paths and summary lines."""

    def __init__(self, subcommand: str, config: str, out: str, overrides: Optional[List[str]],
                 jobs: Optional[int], seed: int, log_level: Optional[str], timings: bool = False):
        self.settings = get_settings()
        setup_logging(log_level or self.settings.log_level)
        self.request = RunRequest(subcommand=subcommand, config_path=config, output_dir=out,
                                  overrides=list(overrides or []), seed=seed,
                                  jobs=jobs if jobs is not None else self.settings.jobs, timings=timings)
        self.started = time.perf_counter()
        self.config, self.config_hash = load_config(config, self.request.overrides)
        os.makedirs(out, exist_ok=True)
        self.summary = [f"command: {subcommand}", f"config: {config}", f"config_hash: {self.config_hash}",
                        f"resolution: n_x={self.config.domain.n_x}, n_t={self.config.time.n_t}"]
        if self.request.overrides:
            self.summary.append("overrides: " + " ".join(self.request.overrides))

    @property
    def meta(self) -> dict:
        return {"config_hash": self.config_hash, "n_x": self.config.domain.n_x, "n_t": self.config.time.n_t}

    def path(self, name: str) -> str:
        return os.path.join(self.request.output_dir, name)

    def table(self, rows, name: str, columns=None) -> None:
        drop = () if self.request.timings else ("wall_ms",)
        write_table(rows, self.path(name), self.meta, drop=drop, columns=columns)
        self.summary.append(f"wrote {name}")

    def line(self, label: str, value) -> None:
        self.summary.append(f"{label}: {format_value(value)}")

    def finish(self) -> None:
        if self.request.timings:
            self.summary.append(f"wall time: {time.perf_counter() - self.started:.3f} s")
        write_summary(self.summary, self.path("summary.txt"))
        typer.echo(f"✅ {self.request.subcommand} done, results in {self.request.output_dir}")


def _parse_grid(text: Optional[str]) -> List[float]:
    if not text:
        return default_kappa_grid()
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise ConfigError(f"cannot read kappa grid '{text}'", key="kappa_grid") from e


def _setting(text: str) -> Setting:
    try:
        return Setting(text)
    except ValueError as e:
        raise click.BadParameter(f"unknown setting '{text}'", param_hint="--setting") from e


def _x_index(x_index: Optional[int], chosen: Setting, n_nodes: int, required: bool) -> Optional[int]:
    if x_index is None:
        if required and chosen is Setting.FROZEN_X:
            raise click.BadParameter("frozen_x needs a grid node", param_hint="--x-index")
        return None
    if not 0 <= x_index < n_nodes:
        raise click.BadParameter(f"node {x_index} outside 0..{n_nodes - 1}", param_hint="--x-index")
    return x_index


def _sweep_rows(report: SweepReport) -> List[dict]:
    rows = []
    for kappa, value, status, omega, ms in zip(report.kappa_values, report.values, report.statuses,
                                               report.omega_at_values, report.wall_ms or [0.0] * len(report.values)):
        rows.append({**kappa_columns(kappa), "what": report.what, "bc": report.bc.value, "value": value,
                     "status": status, "omega_at_value": omega, "wall_ms": ms})
    n = len(report.kappa_values[0])
    for kappa, value in ((0.0, report.limit_small), (math.inf, report.limit_large)):
        rows.append({**kappa_columns(np.full(n, kappa)), "what": report.what, "bc": report.bc.value,
                     "value": value, "status": "limit", "omega_at_value": 0.0, "wall_ms": 0.0})
    return rows


def _limit_rows(report: LimitReport) -> List[dict]:
    return [{**kappa_columns(r.kappa), "gap_avg": r.gap_avg, "gap_hat": r.gap_hat,
             "periodicity_residual": r.residual, "periods_to_converge": r.periods} for r in report.rows]


@app.command()
def validate(config: str = CONFIG, out: str = OUT, set_: Optional[List[str]] = SET, jobs: Optional[int] = JOBS,
             seed: int = SEED, log_level: Optional[str] = LOG_LEVEL):
    """Check the standing assumptions of the linear model and, if present, the nonlinear certificates."""
    run = _Run("validate", config, out, set_, jobs, seed, log_level)
    ok = True
    rows = []
    if run.config.reaction is not None:
        model = build_model(run.config)
        report = validate_assumptions(model, run.settings)
        ok = report.ok
        for flag in ("cooperative_ok", "F_nonneg_ok", "omega_Gamma_negative", "omega_Gamma_tilde_negative"):
            run.line(flag, getattr(report, flag))
        run.line("omega(Gamma_x) max", report.omega_Gamma_max)
        run.line("omega(Gamma~)", report.omega_Gamma_tilde)
        rows += [{"assumption": v.assumption, "entry_i": v.entry[0], "entry_j": v.entry[1], "node": v.node,
                  "time_index": v.time_index, "x": v.x, "t": v.t, "value": v.value, "detail": str(v)}
                 for v in report.violations]
        if report.cooperative_ok:
            blocks = verify_block_consistency(model, run.settings)
            run.line("block decomposition consistent", blocks.ok)
            ok = ok and blocks.ok
    if run.config.nonlinear is not None:
        check = validate_reaction(build_nonlinear_model(run.config))
        ok = ok and check.ok
        run.line("reaction certificates", check.ok)
        run.line("tau1, tau2", f"{check.tau1:g}, {check.tau2:g}")
        rows += [{"assumption": "reaction", "entry_i": -1, "entry_j": -1, "node": -1, "time_index": -1,
                  "x": 0.0, "t": 0.0, "value": 0.0, "detail": v} for v in check.violations]
    if run.config.zika is not None:
        build_zika_params(run.config)
        run.line("zika parameters", True)
    run.table(rows, "violations.csv", columns=VIOLATION_COLUMNS)
    run.line("all assumptions hold", ok)
    run.finish()
    if not ok:
        typer.echo("❌ assumption check failed, see summary.txt", err=True)
        raise typer.Exit(code=1)


@app.command()
def eig(config: str = CONFIG, out: str = OUT, set_: Optional[List[str]] = SET, jobs: Optional[int] = JOBS,
        seed: int = SEED, log_level: Optional[str] = LOG_LEVEL, setting: str = SETTING,
        x_index: Optional[int] = typer.Option(None, "--x-index", help="Grid node for the frozen_x setting.")):
    """Principal eigenvalue lambda* of the periodic parabolic problem."""
    run = _Run("eig", config, out, set_, jobs, seed, log_level)
    model = build_model(run.config)
    chosen = _setting(setting)
    x_index = _x_index(x_index, chosen, model.domain.n_nodes, required=True)
    result = principal_eigenvalue(model, setting=chosen, x_index=x_index, settings=run.settings)
    run.line("lambda*", result.lambda_star)
    run.line("method", result.diagnostics.method.value)
    run.table([{**kappa_columns(result.kappa), "setting": result.setting.value,
                "bc": result.bc.value if result.bc else "-", "lambda_star": result.lambda_star,
                "method": result.diagnostics.method.value, "iterations": result.diagnostics.iterations,
                "residual": result.diagnostics.residual}], "eig.csv")
    run.finish()


@app.command()
def r0(config: str = CONFIG, out: str = OUT, set_: Optional[List[str]] = SET, jobs: Optional[int] = JOBS,
       seed: int = SEED, log_level: Optional[str] = LOG_LEVEL, setting: str = SETTING,
       x_index: Optional[int] = typer.Option(None, "--x-index", help="Grid node for the frozen_x setting."),
       direct: bool = typer.Option(False, "--direct", help="Cross-check ODE settings with the next-generation operator."),
       perturbation: float = typer.Option(0.0, "--perturb", help="Relative random perturbation of every field.")):
    """Basic reproduction ratio by bisection on omega(Psi_mu)."""
    run = _Run("r0", config, out, set_, jobs, seed, log_level)
    model = build_model(run.config)
    if perturbation > 0:
        model = perturb(model, perturbation, seed)
        run.line("perturbation", f"{perturbation:g} (seed {seed})")
    chosen = _setting(setting)
    x_index = _x_index(x_index, chosen, model.domain.n_nodes, required=False)
    if chosen is Setting.FROZEN_X and x_index is None:
        table = r0_pointwise_max(model, settings=run.settings)
        run.line("max_x R0(x)", table.max_value)
        run.line("argmax x", table.x_argmax)
        run.table([{"node": j, "x": float(x), "value": v, "status": s.value}
                   for j, (x, v, s) in enumerate(zip(model.domain.nodes, table.values, table.statuses))],
                  "r0_pointwise.csv")
        run.finish()
        return
    result = r0_bisect(model, setting=chosen, x_index=x_index, settings=run.settings)
    run.line("R0", result.value)
    run.line("status", result.status.value)
    run.line("bracket", f"[{result.bracket[0]:.12g}, {result.bracket[1]:.12g}]")
    row = {**kappa_columns(model.diffusion.kappa), "setting": chosen.value,
           "bc": result.bc.value if result.bc else "-", "value": result.value, "status": result.status.value,
           "bracket_lo": result.bracket[0], "bracket_hi": result.bracket[1],
           "omega_at_value": result.omega_at_value}
    if direct and chosen is not Setting.PDE:
        row["direct"] = r0_direct(model, setting=chosen, x_index=x_index, settings=run.settings)
        run.line("R0 (next-generation operator)", row["direct"])
    run.table([row], "r0.csv")
    run.table([{"probe": k, "mu": mu, "omega": omega} for k, (mu, omega) in enumerate(result.omega_trace)],
              "omega_trace.csv")
    run.finish()


@app.command("sweep")
def sweep_command(config: str = CONFIG, out: str = OUT, set_: Optional[List[str]] = SET,
                  jobs: Optional[int] = JOBS, seed: int = SEED, log_level: Optional[str] = LOG_LEVEL,
                  timings: bool = TIMINGS, what: str = typer.Option("r0", "--what", help="r0 or eigenvalue."),
                  kappa_grid: Optional[str] = KAPPA_GRID,
                  bc: Optional[str] = typer.Option(None, "--bc", help="Override the boundary kind.")):
    """R0 or lambda* along an ascending kappa grid, with both limit endpoints."""
    run = _Run("sweep", config, out, set_, jobs, seed, log_level, timings)
    grid = _parse_grid(kappa_grid)
    if run.config.zika is not None:
        if what != "r0":
            raise ConfigError("zika sweeps compute r0 only", key="what")
        report = zika_sweep(build_zika_params(run.config), grid, jobs=run.request.jobs, progress=True,
                            settings=run.settings)
    else:
        report = sweep(build_model(run.config), grid, bc=bc, what=what, jobs=run.request.jobs, progress=True,
                       settings=run.settings)
    run.line("small kappa limit", report.limit_small)
    run.line("large kappa limit", report.limit_large)
    if report.eta_values is not None:
        run.line("eta, eta~", f"{report.eta_values[0]:.12g}, {report.eta_values[1]:.12g}")
    run.summary += report.monotonicity_notes
    run.table(_sweep_rows(report), "sweep.csv")
    run.finish()


@app.command()
def periodic(config: str = CONFIG, out: str = OUT, set_: Optional[List[str]] = SET, jobs: Optional[int] = JOBS,
             seed: int = SEED, log_level: Optional[str] = LOG_LEVEL, setting: str = SETTING,
             limits: bool = typer.Option(False, "--limits", help="Also run both diffusion limit checks."),
             kappa_grid: Optional[str] = KAPPA_GRID):
    """Positive periodic solution of the [nonlinear] system and, optionally, its diffusion limits."""
    run = _Run("periodic", config, out, set_, jobs, seed, log_level)
    model = build_nonlinear_model(run.config)
    solution = solve_periodic(model, setting=_setting(setting), settings=run.settings)
    run.line("periodicity residual", solution.residual)
    run.line("periods", solution.periods)
    run.line("sup |w^|", solution.w_hat_norm)
    run.line("two-sided gap", solution.two_sided_gap)
    nodes = model.domain.nodes if solution.w.shape[1] == model.domain.n_nodes else model.domain.nodes[:1]
    times = model.tgrid.times
    run.table([{"component": i + 1, "x": float(nodes[j]), "t": float(times[k]), "w": float(solution.w[i, j, k])}
               for i in range(solution.w.shape[0]) for j in range(solution.w.shape[1])
               for k in range(solution.w.shape[2])], "periodic_solution.csv")
    if limits:
        grid = _parse_grid(kappa_grid)
        zero = limit_check_zero(model, sorted(grid, reverse=True), jobs=run.request.jobs, settings=run.settings)
        infty = limit_check_infty(model, sorted(grid), jobs=run.request.jobs, settings=run.settings)
        run.line("sup |w_0|", zero.reference_norm)
        run.line("sup |w~_inf|", infty.reference_norm)
        run.summary += zero.notes + infty.notes
        run.table(_limit_rows(zero), "limit_zero.csv")
        run.table(_limit_rows(infty), "limit_infty.csv")
    run.finish()


@app.command()
def zika(config: str = CONFIG, out: str = OUT, set_: Optional[List[str]] = SET, jobs: Optional[int] = JOBS,
         seed: int = SEED, log_level: Optional[str] = LOG_LEVEL):
    """Zika case study: R0(kappa1, kappa2) at the configured diffusion rates and both limit endpoints."""
    run = _Run("zika", config, out, set_, jobs, seed, log_level)
    params = build_zika_params(run.config)
    result = zika_r0(params, settings=run.settings)
    limits = zika_limits(params, settings=run.settings)
    run.line("R0", result.value)
    run.line("status", result.status.value)
    run.line("small kappa limit", limits.small)
    run.line("large kappa limit", limits.large)
    run.table([
        {"kappa_1": params.kappa1, "kappa_2": params.kappa2, "value": result.value, "status": result.status.value},
        {"kappa_1": 0.0, "kappa_2": 0.0, "value": limits.small, "status": "limit"},
        {"kappa_1": math.inf, "kappa_2": math.inf, "value": limits.large, "status": "limit"},
    ], "zika.csv")
    run.finish()


def run(argv: Optional[List[str]] = None) -> int:
    """Entry point with exit codes: 0 success, 1 computation error, 2 config or usage error."""
    command = typer.main.get_command(app)
    try:
        code = command.main(args=list(sys.argv[1:] if argv is None else argv), prog_name="periodic-r0",
                            standalone_mode=False)
    except ConfigError as e:
        typer.echo(f"❌ config error: {e}", err=True)
        return 2
    except click.UsageError as e:
        typer.echo(f"❌ {e.format_message()}", err=True)
        return 2
    except ComputationError as e:
        typer.echo(f"❌ {type(e).__name__}: {e}", err=True)
        return 1
    except click.ClickException as e:
        typer.echo(f"❌ {e.format_message()}", err=True)
        return e.exit_code
    return code if isinstance(code, int) else 0


if __name__ == "__main__":
    sys.exit(run())
