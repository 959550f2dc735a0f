"""
Command-line interface for fcreg

Every command resolves a flat configuration (defaults < --config file < --set
pairs < dedicated flags), writes it to resolved_config.yaml in the output
directory and then produces its artifacts there.

Exit codes: 0 ok, 2 configuration error, 3 data error, 4 numerical failure.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional

import pandas as pd
from pydantic import ValidationError
from tabulate import tabulate

from .acovfpca import eigen_table
from .config import dump_resolved_config, get_config, resolve_run_config
from .densities import (
    DensitySeries,
    clr_series,
    common_support,
    density_series,
    endpoints_shock,
    halves_shock,
    reference_clr,
)
from .errors import ConfigError, FcregError, NumericalError
from .fgrid import FnSeries, Grid
from .fileio import (
    export_fit,
    load_operator,
    read_fn,
    read_panel,
    read_series,
    write_frame,
    write_series,
    write_yaml,
)
from .regress import fit, local_band, pointwise_band, shock_curves
from .schemas import RunConfig, ShockRow
from .simlab import run_table
from .vrtest import sequential_dn

logger = logging.getLogger(__name__)


def cmd_ingest_density(cfg: RunConfig, out: Path) -> None:
    panel = read_panel(Path(cfg.panel_path))
    a1, a2 = common_support(panel, cfg.support_mass)
    grid = Grid(a1, a2, cfg.grid_n)
    densities, bandwidths = density_series(panel, grid)
    clrs = clr_series(densities, cfg.floor_eps)
    write_series(densities, out / "densities.csv")
    write_series(clrs, out / "clr.csv")
    write_yaml({
        "periods": panel.periods,
        "support": [a1, a2],
        "support_mass": cfg.support_mass,
        "grid_n": cfg.grid_n,
        "floor_eps": cfg.floor_eps,
        "bandwidths": [float(h) for h in bandwidths],
    }, out / "provenance.yaml")
    print(f"Ingested {panel.periods} periods on support [{a1:.6g}, {a2:.6g}]")


def cmd_estimate(cfg: RunConfig, out: Path) -> None:
    x = read_series(Path(cfg.x_path))
    y = read_series(Path(cfg.y_path))
    d_N, d_N_source = cfg.d_N, "config"
    if d_N is None:
        report = sequential_dn(x, cfg.vr_config(), n_jobs=cfg.n_jobs)
        if report.d_hat == 0:
            raise NumericalError("The variance-ratio test finds no stochastic trend in x (d_N = 0); set d_N explicitly")
        d_N, d_N_source = report.d_hat, "vr-test"

    result = fit(x, y, cfg.fit_config(d_N))
    export_fit(result, out, eigen_table(result.split.acov, d_N, cfg.k_scaling), {"d_N_source": d_N_source})

    if cfg.band:
        zeta = read_fn(Path(cfg.zeta_path))
        if cfg.breakpoints:
            reports = local_band(result, zeta, cfg.breakpoints, cfg.level)
        else:
            reports = pointwise_band(result, zeta, cfg.level)
        write_frame(pd.DataFrame([r.row() for r in reports]), out / "band.csv")
    print(f"kappa={cfg.kappa}  d_N={d_N} ({d_N_source})  K={result.K}  K_S={result.K_S}  T={result.T}")


def cmd_vr_test(cfg: RunConfig, out: Path) -> None:
    x = read_series(Path(cfg.x_path))
    report = sequential_dn(x, cfg.vr_config(), n_jobs=cfg.n_jobs)
    rows = []
    for d0, stat, p in zip(report.d0, report.stats, report.p_values):
        quantiles = report.quantile_table[d0]
        rows.append({
            "d0": d0, "statistic": stat, "p_value": p,
            "q90": quantiles[0.90], "q95": quantiles[0.95], "q99": quantiles[0.99],
            "d_hat": report.d_hat,
        })
    write_frame(pd.DataFrame(rows), out / "vr_report.csv")
    print(report.render())


def cmd_simulate(cfg: RunConfig, out: Path) -> None:
    table = run_table(cfg.table_spec(), n_jobs=cfg.n_jobs)
    write_frame(table, out / "table.csv")
    print(tabulate(table, headers="keys", showindex=False, floatfmt=".3f"))


def cmd_shock(cfg: RunConfig, out: Path) -> None:
    f_total = load_operator(Path(cfg.fit_dir) / "f_total.csv")
    y_densities = read_series(Path(cfg.densities_path))
    y_densities = DensitySeries(y_densities.grid, y_densities.values)
    x_densities = y_densities
    if cfg.zeta_densities_path is not None:
        raw = read_series(Path(cfg.zeta_densities_path))
        x_densities = DensitySeries(raw.grid, raw.values)

    y_ref = reference_clr(y_densities, cfg.reference_start, cfg.reference_stop, cfg.floor_eps)
    if cfg.shock == "file":
        zeta = read_fn(Path(cfg.zeta_path))
    elif cfg.shock == "halves":
        break_index = cfg.break_index if cfg.break_index is not None else x_densities.T // 2
        zeta = halves_shock(x_densities, break_index, cfg.floor_eps)
    else:
        zeta = endpoints_shock(x_densities, cfg.shock_width, cfg.floor_eps)

    curves = shock_curves(f_total, y_ref, zeta, cfg.q_list)
    write_series(FnSeries.from_fns([c.density for c in curves]), out / "shock_densities.csv")
    rows = [ShockRow(q=c.q, mean=c.mean, variance=c.variance).model_dump() for c in curves]
    write_frame(pd.DataFrame(rows), out / "shock_moments.csv")
    print(tabulate(rows, headers="keys", floatfmt=".4f"))


COMMANDS: Dict[str, Callable[[RunConfig, Path], None]] = {
    "ingest-density": cmd_ingest_density,
    "estimate": cmd_estimate,
    "vr-test": cmd_vr_test,
    "simulate": cmd_simulate,
    "shock": cmd_shock,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fcreg",
        description="Functional regression with cointegrated, error-contaminated regressors",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    helps = {
        "ingest-density": "Estimate per-period densities from a raw sample panel and CLR-transform them",
        "estimate": "Fit the slope operator and export its artifacts",
        "vr-test": "Estimate the dimension of the stochastic trend with the variance-ratio test",
        "simulate": "Run the Monte Carlo tables",
        "shock": "Density responses to scaled shocks from a stored fit",
    }
    for name, help_text in helps.items():
        sub = subparsers.add_parser(name, help=help_text)
        sub.add_argument("--config", help="Flat YAML file of settings")
        sub.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                         help="Override one setting (repeatable)")
        sub.add_argument("--output-dir", help="Directory for the artifacts (default: outputs)")
        sub.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    logging.getLogger("joblib").setLevel(logging.WARNING)

    try:
        cfg = resolve_run_config(
            args.command, args.config, args.set, output_dir=args.output_dir, log_level=args.log_level,
        )
        logging.getLogger().setLevel(cfg.log_level)
        logger.debug(f"Environment settings: {get_config()}")
        out = Path(cfg.output_dir)
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise ConfigError(f"Cannot create output directory {out}: {e}")
        dump_resolved_config(cfg, out)
        COMMANDS[cfg.command](cfg, out)
    except ValidationError as e:
        logger.error(f"Invalid configuration: {e}")
        return ConfigError.exit_code
    except FcregError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
