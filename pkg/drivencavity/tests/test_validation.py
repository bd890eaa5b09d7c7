"""
Tests for the quick oracle suite
"""
from drivencavity.main import main
from drivencavity.validation import CHECKS, run_validation


def test_every_check_passes():
    report = run_validation()
    assert list(report["name"]) == [name for name, _ in CHECKS]
    failed = report.loc[~report["passed"], ["name", "value", "tolerance", "detail"]]
    assert failed.empty, failed.to_string()


def test_cli_validate(capsys):
    assert main(["validate"]) == 0
    assert "momentum_equivalence" in capsys.readouterr().out
