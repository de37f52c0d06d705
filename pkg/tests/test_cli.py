import json

import pytest

from gaussglass.cli import (
    EXIT_CHECK_FAILED,
    EXIT_NUMERIC,
    EXIT_OK,
    EXIT_USAGE,
    OUT_OF_DOMAIN,
    ScanQuantity,
    ScanSpec,
    main,
)
from gaussglass.results import RunRecord

pytestmark = pytest.mark.usefixtures("clean_env")

SINGLE_CELL = ["--lambda-range", "0", "0", "1", "--format", "csv"]


def scan_lines(capsys, *args: str) -> list:
    assert main(["phase-scan", *args]) == EXIT_OK
    return capsys.readouterr().out.splitlines()


def test_scan_in_the_annealed_region(capsys):
    lines = scan_lines(capsys, "--beta-range", "0.5", "0.5", "1", *SINGLE_CELL)
    assert lines == ["beta,lambda,value,regime", "0.5,0,0,annealed"]


def test_scan_in_the_condensed_region(capsys):
    lines = scan_lines(capsys, "--beta-range", "2", "2", "1", *SINGLE_CELL)
    beta, lam, value, regime = lines[1].split(",")
    assert (beta, lam, regime) == ("2", "0", "condensed")
    assert float(value) == pytest.approx(-0.034074, abs=1e-6)


def test_scan_marks_cells_outside_the_domain(capsys):
    lines = scan_lines(capsys, "--quantity", "annealed", "--beta-range", "0.5", "0.5", "1",
                       "--lambda-range", "0.5", "1.5", "3", "--format", "csv")
    assert len(lines) == 4
    assert lines[2] == f"0.5,1,,{OUT_OF_DOMAIN}"
    assert lines[3] == f"0.5,1.5,,{OUT_OF_DOMAIN}"


def test_scan_output_is_byte_stable(clean_env):
    args = ["phase-scan", "--beta-range", "0.1", "3", "7", "--lambda-range", "-1", "0.9", "5",
            "--format", "csv", "--out"]
    assert main([*args, "first.csv"]) == EXIT_OK
    assert main([*args, "second.csv"]) == EXIT_OK
    first = (clean_env / "first.csv").read_bytes()
    assert first == (clean_env / "second.csv").read_bytes()
    assert len(first.splitlines()) == 1 + 7 * 5


def test_scan_json(capsys):
    assert main(["phase-scan", "--beta-range", "0.5", "2", "2", "--lambda-range", "0", "0", "1"]) == EXIT_OK
    payload = json.loads(capsys.readouterr().out)
    assert payload["quantity"] == "rs"
    assert [row["regime"] for row in payload["rows"]] == ["annealed", "condensed"]


def test_scan_spec_validation():
    with pytest.raises(ValueError):
        ScanSpec(beta_range=(1.0, 0.5, 3), lambda_range=(0.0, 0.0, 1), quantity=ScanQuantity.rs)
    with pytest.raises(ValueError):
        ScanSpec(beta_range=(-1.0, 0.5, 3), lambda_range=(0.0, 0.0, 1), quantity=ScanQuantity.rs)
    spec = ScanSpec(beta_range=(0.0, 1.0, 3), lambda_range=(0.0, 0.0, 1), quantity=ScanQuantity.rs)
    assert spec.cells() == [(0.0, 0.0), (0.5, 0.0), (1.0, 0.0)]


def test_rs_eval(capsys):
    assert main(["rs-eval", "--beta", "2"]) == EXIT_OK
    record = RunRecord.model_validate_json(capsys.readouterr().out)
    assert record.command == "rs-eval"
    assert record.params["lambda"] == 0.0
    assert record.estimates["q_bar"] == pytest.approx(0.25)
    assert record.checks == {"shell_equals_rs": True}


def test_flags_override_the_config_file(clean_env, capsys):
    (clean_env / "run.toml").write_text("beta = 0.25\nlambda = 0.5\n")
    assert main(["rs-eval", "--config", "run.toml", "--beta", "2"]) == EXIT_OK
    record = RunRecord.model_validate_json(capsys.readouterr().out)
    assert (record.params["beta"], record.params["lambda"]) == (2.0, 0.5)


def test_quenched_at_zero_beta(capsys):
    args = ["quenched", "--beta", "0", "--lambda", "0.5", "--n", "2", "--samples", "4", "--threads", "1"]
    assert main(args) == EXIT_OK
    record = RunRecord.model_validate_json(capsys.readouterr().out)
    assert record.checks["beta_zero_exact"]
    assert record.estimates["quenched_pressure"]["n_samples"] == 4
    assert "workers" not in record.cfg


@pytest.mark.slow
@pytest.mark.parametrize("n", ["2", "3", "4"])
def test_quenched_respects_the_rs_bound(capsys, n):
    args = ["quenched", "--beta", "0.5", "--n", n, "--samples", "40", "--directions", "1024", "--seed", "7"]
    assert main(args) == EXIT_OK
    record = RunRecord.model_validate_json(capsys.readouterr().out)
    assert record.checks["rs_upper_bound"]
    assert record.cfg["seed"] == 7


def test_repeated_runs_agree(clean_env, capsys):
    args = ["quenched", "--beta", "1.2", "--n", "2", "--samples", "4", "--seed", "99",
            "--results-dir", str(clean_env / "store")]
    assert main([*args, "--threads", "1"]) in (EXIT_OK, EXIT_CHECK_FAILED)
    first = RunRecord.model_validate_json(capsys.readouterr().out)
    assert main([*args, "--threads", "2"]) in (EXIT_OK, EXIT_CHECK_FAILED)
    second = RunRecord.model_validate_json(capsys.readouterr().out)
    assert first.deterministic_view() == second.deterministic_view()
    assert len(list((clean_env / "store").glob("*.json"))) == 1


def test_rsb_eval_with_an_order_parameter(capsys):
    x = json.dumps({"q": [0.1, 0.2, 0.3], "m": [0.2, 0.5, 0.8]})
    assert main(["rsb-eval", "--beta", "2", "--x", x, "--ode-steps", "2000"]) == EXIT_OK
    record = RunRecord.model_validate_json(capsys.readouterr().out)
    assert record.checks["closed_form_equals_ode"]


def test_fluctuations_csv(capsys):
    assert main(["fluctuations", "--beta", "0.5", "--t-points", "3", "--format", "csv"]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "t,a,b,c,prediction"
    assert len(lines) == 4
    assert lines[1] == "0,1,0,0,annealed_exact"


def test_domain_errors_exit_with_usage(capsys):
    assert main(["sum-rule", "--h", "0.5", "--samples", "2"]) == EXIT_USAGE
    assert main(["rsb-eval", "--x", '{"q": [0.2, 0.1], "m": [0.0, 1.0]}']) == EXIT_USAGE
    assert main(["rs-eval", "--beta", "-1"]) == EXIT_USAGE
    assert main(["rs-eval", "--config", "missing.toml"]) == EXIT_USAGE
    assert main(["phase-scan", "--quantity", "nope"]) == EXIT_USAGE


def test_divergence_exits_with_numeric_failure():
    assert main(["fluctuations", "--beta", "1", "--lambda", "0"]) == EXIT_NUMERIC


@pytest.mark.slow
def test_verify_fast(capsys):
    assert main(["verify", "--level", "fast", "--threads", "1"]) == EXIT_OK
    assert "shell supremum = RS pressure" in capsys.readouterr().out
