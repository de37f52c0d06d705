"""
Command-line front end.

    gaussglass phase-scan --quantity rs --beta-range 0.1 3 30 --lambda-range -1 0.9 20 --out scan.csv
    gaussglass quenched --beta 0.5 --n 3 --samples 200 --seed 7
    gaussglass sum-rule --beta 1.5 --n 2 --t-grid 11
    gaussglass verify --level fast

Every flag has a configuration key of the same name (``--t-grid`` is ``T_GRID``);
flags override the ``--config`` file, which overrides the environment and defaults.

Exit codes: 0 success, 1 a check failed, 2 usage or domain error, 3 numerical failure.
"""

import argparse
import json
import logging
import sys
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator

from .closed_forms import (
    annealed_pressure,
    is_annealed_region,
    phase_regime,
    rs_optimal_qbar,
    rs_pressure,
    shell_lower_bound,
)
from .config import OutputFormat, Settings, load_settings
from .errors import DivergenceError, DomainError, NumericError
from .fluctuations import annealed_susceptibility, mc_xi_second_moment, triple_trajectory
from .montecarlo import quenched_pressure
from .params import McConfig, ModelParams, Scheme
from .parisi_rsb import (
    PiecewiseOrderParameter,
    parisi_closed_form,
    parisi_ode_solve,
    rs_order_parameter,
    rsb_infimum_search,
    rsb_pressure_functional,
    stationarity_residual,
)
from .results import ResultStore, RunRecord, csv_text, git_describe
from .sumrules import rs_interpolation_curve, rs_sum_rule_residual, thermo_interpolation_derivative
from .verify import Level, all_passed, format_table, run_suite

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_NUMERIC = 3

OUT_OF_DOMAIN = "out-of-domain"
SCAN_HEADER = ["beta", "lambda", "value", "regime"]


class ScanQuantity(str, Enum):
    annealed = "annealed"
    rs = "rs"
    shell = "shell"
    susceptibility = "susceptibility"
    rsb_check = "rsb_check"


class ScanSpec(BaseModel):
    """A β × λ grid, each axis (min, max, steps), and the quantity evaluated on it."""

    model_config = ConfigDict(frozen=True)

    beta_range: Tuple[float, float, int]
    lambda_range: Tuple[float, float, int]
    quantity: ScanQuantity

    @field_validator("beta_range", "lambda_range")
    @classmethod
    def _check_range(cls, value: Tuple[float, float, int]) -> Tuple[float, float, int]:
        lo, hi, steps = value
        if steps < 1:
            raise DomainError(f"a scan axis needs at least one step, got {steps}")
        if hi < lo:
            raise DomainError(f"scan axis runs backwards: {lo} > {hi}")
        return value

    @field_validator("beta_range")
    @classmethod
    def _nonnegative_beta(cls, value: Tuple[float, float, int]) -> Tuple[float, float, int]:
        if value[0] < 0.0:
            raise DomainError(f"beta must be nonnegative, got {value[0]}")
        return value

    @staticmethod
    def _axis(axis: Tuple[float, float, int]) -> np.ndarray:
        lo, hi, steps = axis
        return np.linspace(lo, hi, steps) if steps > 1 else np.array([lo])

    def cells(self) -> List[Tuple[float, float]]:
        return [(float(b), float(lam)) for b in self._axis(self.beta_range) for lam in self._axis(self.lambda_range)]


def scan_value(quantity: ScanQuantity, beta: float, lam: float, settings: Settings) -> Optional[float]:
    """The quantity at one cell; None where the formula has no value there."""
    try:
        if quantity == ScanQuantity.annealed:
            return annealed_pressure(beta, lam)
        if quantity == ScanQuantity.rs:
            return rs_pressure(beta, lam).pressure
        if quantity == ScanQuantity.shell:
            return shell_lower_bound(beta, lam).value
        if quantity == ScanQuantity.susceptibility:
            return annealed_susceptibility(beta, lam)
        result = rsb_infimum_search(beta, lam, k_levels=settings.RSB_LEVELS, restarts=settings.RSB_RESTARTS,
                                    seed=settings.SEED, q_max=settings.RSB_Q_MAX, workers=settings.THREADS)
        return result.value - rs_pressure(beta, lam).pressure
    except (DomainError, DivergenceError) as e:
        logger.debug(f"{quantity.value} out of domain at beta={beta}, lambda={lam}: {e}")
        return None


def scan_rows(spec: ScanSpec, settings: Settings) -> List[List[Any]]:
    rows = []
    for beta, lam in spec.cells():
        value = scan_value(spec.quantity, beta, lam, settings)
        regime = OUT_OF_DOMAIN if value is None else phase_regime(beta, lam).value
        rows.append([beta, lam, "" if value is None else value, regime])
    return rows


def _emit(text: str, out: Optional[str]):
    if out:
        Path(out).write_text(text, encoding="utf-8")
        logger.info(f"Wrote {out}")
    else:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")


def _cfg_dump(cfg: McConfig) -> Dict[str, Any]:
    # the worker count never changes results, so it is not part of a run's identity
    return cfg.model_dump(mode="json", exclude={"workers"})


def _estimate_rows(estimates: Dict[str, Any]) -> List[List[Any]]:
    rows = []
    for name, value in estimates.items():
        if isinstance(value, dict) and "mean" in value:
            rows.append([name, value["mean"], value["std_error"], value["n_samples"], value["n_skipped"]])
        elif isinstance(value, (int, float)):
            rows.append([name, float(value), 0.0, "", ""])
    return rows


def _finish(record: RunRecord, settings: Settings, csv_header: Optional[Sequence[str]] = None,
            csv_rows: Optional[List[List[Any]]] = None) -> int:
    """Store, compare and write the record; the exit code reflects its checks."""
    if settings.RESULTS_DIR:
        store = ResultStore(settings.RESULTS_DIR, settings.RESULTS_MAX_SIZE_MB)
        previous = store.get(record.key())
        if previous and previous.deterministic_view() != record.deterministic_view():
            logger.warning(f"{record.command}: result differs from the stored run {record.key()[:12]}")
        store.put(record)

    if settings.FORMAT == OutputFormat.csv:
        if csv_rows is None:
            csv_header = ["quantity", "mean", "std_error", "n_samples", "n_skipped"]
            csv_rows = _estimate_rows(record.estimates)
        _emit(csv_text(csv_header, csv_rows), settings.OUT)
    else:
        _emit(record.to_json(), settings.OUT)

    for name, ok in record.checks.items():
        if not ok:
            logger.error(f"{record.command}: check '{name}' failed")
    return EXIT_OK if record.passed else EXIT_CHECK_FAILED


def _record(command: str, p: Optional[ModelParams] = None, cfg: Optional[McConfig] = None,
            **fields: Any) -> RunRecord:
    return RunRecord(
        command=command,
        params=p.model_dump(mode="json", by_alias=True) if p else {},
        cfg=_cfg_dump(cfg) if cfg else {},
        git_describe=git_describe(),
        **fields,
    )


def cmd_phase_scan(settings: Settings) -> int:
    spec = ScanSpec(beta_range=settings.BETA_RANGE, lambda_range=settings.LAMBDA_RANGE,
                    quantity=ScanQuantity(settings.SCAN_QUANTITY))
    logger.info(f"Scanning {spec.quantity.value} on {len(spec.cells())} cells")
    rows = scan_rows(spec, settings)
    if settings.FORMAT == OutputFormat.csv:
        _emit(csv_text(SCAN_HEADER, rows), settings.OUT)
    else:
        records = [dict(zip(SCAN_HEADER, row)) for row in rows]
        for r in records:
            r["value"] = None if r["value"] == "" else r["value"]
        _emit(json.dumps({"quantity": spec.quantity.value, "seed": settings.SEED, "rows": records}, indent=2),
              settings.OUT)
    return EXIT_OK


def cmd_rs_eval(settings: Settings) -> int:
    beta, lam = settings.BETA, settings.LAMBDA
    rs = rs_pressure(beta, lam)
    shell = shell_lower_bound(beta, lam)
    estimates: Dict[str, Any] = {
        "rs_pressure": rs.pressure,
        "q_bar": rs.q_bar,
        "sigma": rs.sigma,
        "shell_lower_bound": shell.value,
        "shell_r_squared": shell.r_squared,
        "regime": rs.regime.value,
    }
    if lam < 1.0:
        estimates["annealed_pressure"] = annealed_pressure(beta, lam)
    checks = {"shell_equals_rs": abs(shell.value - rs.pressure) <= 1e-10}
    if "annealed_pressure" in estimates and is_annealed_region(beta, lam):
        checks["annealed_equals_rs"] = abs(estimates["annealed_pressure"] - rs.pressure) <= 1e-12
    return _finish(_record("rs-eval", settings.model_params(), estimates=estimates, checks=checks), settings)


def cmd_rsb_eval(settings: Settings) -> int:
    beta, lam = settings.BETA, settings.LAMBDA
    rs = rs_pressure(beta, lam)
    if settings.ORDER_PARAMETER:
        x = PiecewiseOrderParameter.from_json(settings.ORDER_PARAMETER)
        closed = parisi_closed_form(beta, lam, x)
        ode = parisi_ode_solve(beta, lam, x, settings.ODE_STEPS)
        estimates = {
            "functional": rsb_pressure_functional(beta, lam, x),
            "parisi_closed_form": closed,
            "parisi_ode": ode,
            "stationarity_residual": stationarity_residual(beta, lam, x),
            "rs_pressure": rs.pressure,
            "x": x.model_dump(),
        }
        checks = {"closed_form_equals_ode": abs(closed - ode) <= 1e-8}
    else:
        result = rsb_infimum_search(beta, lam, k_levels=settings.RSB_LEVELS, restarts=settings.RSB_RESTARTS,
                                    seed=settings.SEED, q_max=settings.RSB_Q_MAX, workers=settings.THREADS)
        at_rs = rsb_pressure_functional(beta, lam, rs_order_parameter(rs.q_bar))
        estimates = {
            "infimum": result.value,
            "x": result.x.model_dump(),
            "feasible_restarts": result.feasible_restarts,
            "rs_pressure": rs.pressure,
            "functional_at_rs": at_rs,
            "seed": settings.SEED,
        }
        checks = {
            "infimum_equals_rs": abs(result.value - rs.pressure) <= 1e-6,
            "functional_at_rs_equals_rs": abs(at_rs - rs.pressure) <= 1e-12,
        }
    return _finish(_record("rsb-eval", settings.model_params(), estimates=estimates, checks=checks), settings)


def cmd_quenched(settings: Settings) -> int:
    p, cfg = settings.model_params(), settings.mc_config()
    estimate = quenched_pressure(p, cfg)
    estimates: Dict[str, Any] = {"quenched_pressure": estimate.model_dump()}
    checks: Dict[str, bool] = {}
    if p.h == 0.0 and not p.diagonal_removed and p.lam < 1.0:
        rs = rs_pressure(p.beta, p.lam).pressure
        annealed = annealed_pressure(p.beta, p.lam)
        estimates.update({"rs_pressure": rs, "annealed_pressure": annealed})
        checks["rs_upper_bound"] = estimate.at_most(rs)
        checks["annealed_upper_bound"] = estimate.at_most(annealed)
        if p.beta == 0.0:
            checks["beta_zero_exact"] = abs(estimate.mean - annealed) <= 1e-9
    logger.info(f"A_N = {estimate}")
    return _finish(_record("quenched", p, cfg, estimates=estimates, checks=checks), settings)


def cmd_fluctuations(settings: Settings) -> int:
    beta, lam = settings.BETA, settings.LAMBDA
    q_bar = settings.Q_BAR if settings.Q_BAR is not None else rs_optimal_qbar(beta, lam)
    trajectory = triple_trajectory(beta, lam, q_bar, settings.T_POINTS, settings.ODE_STEPS)
    estimates: Dict[str, Any] = {
        "q_bar": q_bar,
        "trajectory": [t.model_dump(mode="json") for t in trajectory],
    }
    checks: Dict[str, bool] = {}
    if q_bar == 0.0 and is_annealed_region(beta, lam) and beta < 1.0 - lam:
        chi = annealed_susceptibility(beta, lam)
        estimates["susceptibility"] = chi
        checks["a_at_one_equals_susceptibility"] = abs(trajectory[-1].a - chi) <= 1e-8 * chi

    cfg = None
    p = settings.model_params()
    if settings.MC:
        cfg = settings.mc_config()
        xi2 = mc_xi_second_moment(p, cfg)
        estimates["mc_xi_second_moment"] = xi2.model_dump()
        if "susceptibility" in estimates:
            checks["mc_xi_near_susceptibility"] = abs(xi2.mean - estimates["susceptibility"]) <= max(
                0.1, 3.0 * xi2.std_error)

    rows = [[t.t, t.a, t.b, t.c, t.prediction.value] for t in trajectory]
    record = _record("fluctuations", p, cfg, estimates=estimates, checks=checks)
    return _finish(record, settings, ["t", "a", "b", "c", "prediction"], rows)


def cmd_sum_rule(settings: Settings) -> int:
    p, cfg = settings.model_params(), settings.mc_config()
    q_bar = settings.Q_BAR if settings.Q_BAR is not None else rs_optimal_qbar(p.beta, p.lam)
    residual = rs_sum_rule_residual(p, q_bar, cfg, settings.T_GRID)
    estimates: Dict[str, Any] = {"q_bar": q_bar, "sum_rule_residual": residual.model_dump()}
    checks = {"sum_rule_closes": residual.within(0.0)}

    if settings.SPLIT is not None:
        n1 = settings.SPLIT
        derivative = thermo_interpolation_derivative(n1, p.n_sites - n1, p, settings.T, cfg)
        estimates["size_interpolation_derivative"] = derivative.model_dump()
        checks["size_interpolation_increasing"] = derivative.at_least(0.0)

    header, rows = None, None
    if settings.CURVE:
        curve = rs_interpolation_curve(p, q_bar, cfg, settings.T_GRID)
        estimates["curve"] = [{"t": c.t, "pressure": c.pressure.model_dump(),
                               "derivative": c.derivative.model_dump()} for c in curve]
        header = ["t", "pressure", "pressure_se", "derivative", "derivative_se"]
        rows = [[c.t, c.pressure.mean, c.pressure.std_error, c.derivative.mean, c.derivative.std_error]
                for c in curve]
    return _finish(_record("sum-rule", p, cfg, estimates=estimates, checks=checks), settings, header, rows)


def cmd_verify(settings: Settings) -> int:
    checks = run_suite(Level(settings.VERIFY_LEVEL), settings)
    _emit(format_table(checks), settings.OUT)
    return EXIT_OK if all_passed(checks) else EXIT_CHECK_FAILED


def cmd_serve(settings: Settings) -> int:
    import uvicorn

    uvicorn.run("gaussglass.main:app", host=settings.HOST, port=settings.PORT)
    return EXIT_OK


COMMANDS: Dict[str, Callable[[Settings], int]] = {
    "phase-scan": cmd_phase_scan,
    "rs-eval": cmd_rs_eval,
    "rsb-eval": cmd_rsb_eval,
    "quenched": cmd_quenched,
    "fluctuations": cmd_fluctuations,
    "sum-rule": cmd_sum_rule,
    "verify": cmd_verify,
    "serve": cmd_serve,
}


def _common_parser() -> argparse.ArgumentParser:
    """Flags shared by every subcommand; None means "not given" so lower layers apply."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="Flat TOML file with keys named like the flags")
    common.add_argument("--beta", type=float, default=None, help="Inverse temperature (default: 0.5)")
    common.add_argument("--lambda", dest="lambda", type=float, default=None, help="Variance shift (default: 0)")
    common.add_argument("--h", type=float, default=None, help="External field (default: 0)")
    common.add_argument("--n", type=int, default=None, help="Number of sites (default: 2)")
    common.add_argument("--diagonal-removed", action="store_true", default=None,
                        help="Use the Hamiltonian without diagonal couplings")
    common.add_argument("--seed", type=int, default=None, help="Master 64-bit seed")
    common.add_argument("--samples", type=int, default=None, help="Disorder samples (default: 200)")
    common.add_argument("--directions", type=int, default=None, help="Random directions per sample")
    common.add_argument("--scheme", choices=[s.value for s in Scheme], default=None,
                        help="Per-sample evaluation scheme")
    common.add_argument("--threads", "--workers", dest="threads", type=int, default=None,
                        help="Worker processes (default: CPU count - 1); never changes results")
    common.add_argument("--out", default=None, help="Output file (default: stdout)")
    common.add_argument("--format", choices=[f.value for f in OutputFormat], default=None,
                        help="Output format (default: json)")
    common.add_argument("--results-dir", default=None, help="Directory of the run-record store")
    common.add_argument("--verbose", "-v", action="store_true", default=None, help="Enable verbose logging")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(prog="gaussglass", description="Numerical laboratory for the fully "
                                     "Gaussian spin glass")
    sub = parser.add_subparsers(dest="command", required=True)

    scan = sub.add_parser("phase-scan", parents=[common], help="Closed-form quantity on a beta x lambda grid")
    scan.add_argument("--quantity", dest="scan_quantity", choices=[q.value for q in ScanQuantity], default=None)
    scan.add_argument("--beta-range", nargs=3, type=float, metavar=("MIN", "MAX", "STEPS"), default=None)
    scan.add_argument("--lambda-range", nargs=3, type=float, metavar=("MIN", "MAX", "STEPS"), default=None)
    scan.add_argument("--levels", dest="rsb_levels", type=int, default=None, help="RSB levels for rsb_check")
    scan.add_argument("--restarts", dest="rsb_restarts", type=int, default=None)

    sub.add_parser("rs-eval", parents=[common], help="RS, shell and annealed pressures at one point")

    rsb = sub.add_parser("rsb-eval", parents=[common], help="Broken-replica infimum search or functional")
    rsb.add_argument("--levels", dest="rsb_levels", type=int, default=None)
    rsb.add_argument("--restarts", dest="rsb_restarts", type=int, default=None)
    rsb.add_argument("--q-max", dest="rsb_q_max", type=float, default=None)
    rsb.add_argument("--x", dest="order_parameter", default=None,
                     help='Evaluate a given order parameter, JSON {"q": [...], "m": [...]}')
    rsb.add_argument("--ode-steps", type=int, default=None)

    sub.add_parser("quenched", parents=[common], help="Quenched pressure with its upper-bound checks")

    fluct = sub.add_parser("fluctuations", parents=[common], help="Overlap-fluctuation correlations")
    fluct.add_argument("--q-bar", type=float, default=None, help="Overlap (default: the RS optimum)")
    fluct.add_argument("--t-points", type=int, default=None)
    fluct.add_argument("--ode-steps", type=int, default=None)
    fluct.add_argument("--mc", action="store_true", default=None, help="Also estimate N<(q-q*)^2> by sampling")

    rule = sub.add_parser("sum-rule", parents=[common], help="RS sum rule and size-interpolation derivative")
    rule.add_argument("--q-bar", type=float, default=None, help="Overlap (default: the RS optimum)")
    rule.add_argument("--t-grid", type=int, default=None)
    rule.add_argument("--split", type=int, default=None, help="N1 of the size interpolation N = N1 + N2")
    rule.add_argument("--t", type=float, default=None, help="Time of the size-interpolation derivative")
    rule.add_argument("--curve", action="store_true", default=None, help="Also output phi(t) on the grid")

    verify = sub.add_parser("verify", parents=[common], help="Run the acceptance suite")
    verify.add_argument("--level", dest="verify_level", choices=[lv.value for lv in Level], default=None)

    serve = sub.add_parser("serve", parents=[common], help="Start the closed-form HTTP service")
    serve.add_argument("--host", default=None)
    serve.add_argument("--port", type=int, default=None)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    try:
        settings = load_settings(args.config, **flags)
        if settings.VERBOSE:
            logging.getLogger().setLevel(logging.DEBUG)
        return COMMANDS[args.command](settings)
    except NumericError as e:
        logger.error(f"{args.command}: numerical failure: {e}")
        return EXIT_NUMERIC
    except (ValueError, FileNotFoundError) as e:
        logger.error(f"{args.command}: {e}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
