import math

import pytest

from gaussglass.verify import (
    Check,
    Level,
    all_passed,
    check_annealed_susceptibility,
    check_gradient_and_stationarity,
    check_parisi_consistency,
    check_shell_equals_rs,
    format_table,
    run_suite,
)


def test_shell_and_annealed_agreement():
    checks = check_shell_equals_rs(grid=12)
    assert len(checks) == 2
    assert all_passed(checks)


def test_gradient_and_stationarity(settings):
    assert all_passed(check_gradient_and_stationarity(settings))


def test_annealed_susceptibility(settings):
    assert all_passed(check_annealed_susceptibility(settings, count=4))


def test_parisi_consistency(settings):
    assert all_passed(check_parisi_consistency(settings, count=4))


def test_format_table():
    checks = [Check("first", 0.0, 1e-13, 1e-10, True), Check("second", 1.25, 1.3, 0.01, False)]
    table = format_table(checks)
    lines = table.splitlines()
    assert lines[0].split() == ["check", "expected", "got", "tolerance", "result"]
    assert set(lines[1].replace(" ", "")) == {"-"}
    assert lines[2].endswith("PASS")
    assert lines[3].endswith("FAIL")
    assert lines[-1] == "1/2 checks passed"


def test_all_passed_rejects_nonfinite_values():
    assert not all_passed([Check("nan", 0.0, math.nan, 1.0, True)])
    assert not all_passed([Check("failed", 0.0, 2.0, 1.0, False)])
    assert all_passed([])


@pytest.mark.slow
def test_fast_suite(settings):
    checks = run_suite(Level.fast, settings)
    assert all_passed(checks), format_table(checks)
    assert all(c.seconds >= 0.0 for c in checks)
