import json

import pytest

from squarefinsler.cli import main
from squarefinsler.errors import ContractViolation, FamilyInadmissibleError
from squarefinsler.harness import (
    ROWS,
    RunConfig,
    emit_report,
    parse_report,
    point_report,
    run_verify,
)

CUSTOM = {
    "phi": [[0.1, [2, 0, 0]], [0.05, [0, 1, 1]]],
    "b": [[[0.1, [0, 0, 0]]], [[0.05, [1, 0, 0]]], [[0.02, [0, 0, 2]]]],
}


@pytest.fixture(scope="module")
def scalar_report():
    return run_verify(RunConfig(family="square-scalar", mu=1.0, k=0.3, a=(0.1, 0.2, 0.05), samples=4))


def test_report_passes_and_has_every_row(scalar_report):
    assert scalar_report.passed
    assert set(scalar_report.summary["rows"]) == set(ROWS)
    assert scalar_report.summary["tau_exponent_verdict"] == "sigma^3"
    rec = scalar_report.samples[0]
    assert set(rec) == {"index", "x", "y", "F", "K_hat", "K_formula", "K_y4", "residuals"}


def test_json_round_trip(scalar_report):
    text = emit_report(scalar_report, "json")
    data = json.loads(text)
    assert data["schema"] == 1
    assert set(data) == {"schema", "config", "samples", "summary"}
    assert parse_report(text) == scalar_report
    assert emit_report(parse_report(text)) == text


def test_unknown_schema_rejected(scalar_report):
    data = scalar_report.to_dict()
    data["schema"] = 2
    with pytest.raises(ContractViolation):
        parse_report(json.dumps(data))


def test_deterministic_for_fixed_seed():
    cfg = RunConfig(family="space-form", mu=-1.0, samples=3, seed=11)
    assert emit_report(run_verify(cfg)) == emit_report(run_verify(cfg))
    other = run_verify(RunConfig(family="space-form", mu=-1.0, samples=3, seed=12))
    assert other.samples[0]["x"] != run_verify(cfg).samples[0]["x"]


def test_text_table_lists_rows(scalar_report):
    text = emit_report(scalar_report, "text")
    for row in ROWS:
        assert row in text
    assert text.rstrip().endswith("PASS")


def test_two_dimensional_run_skips_rows():
    rep = run_verify(RunConfig(family="space-form", n=2, mu=0.5, samples=2))
    assert rep.passed
    assert "y1" not in rep.summary["rows"]
    assert "weyl" not in rep.summary["rows"]
    assert "n/a" in emit_report(rep, "text")


def test_custom_family_fails():
    rep = run_verify(RunConfig(family="custom", samples=3, custom=CUSTOM))
    assert not rep.passed
    assert rep.summary["rows"]["spray-match"]["pass"]
    assert not rep.summary["rows"]["weyl"]["pass"]


def test_inadmissible_family():
    with pytest.raises(FamilyInadmissibleError):
        run_verify(RunConfig(family="euclidean-parallel", a=(1.2, 0.0, 0.0), samples=1))


def test_config_contracts():
    with pytest.raises(ContractViolation):
        RunConfig(family="nope")
    with pytest.raises(ContractViolation):
        RunConfig(a=(0.1, 0.2))
    with pytest.raises(ContractViolation):
        RunConfig(tolerances={"bogus": 1e-3})
    with pytest.raises(ContractViolation):
        RunConfig(family="custom")
    with pytest.raises(ContractViolation):
        RunConfig.from_mapping({"family": "space-form", "colour": "red"})


def test_tolerance_override_changes_verdict():
    rep = run_verify(RunConfig(family="space-form", mu=1.0, samples=2, tolerances={"scalar-flag": 1e-30}))
    assert not rep.passed
    assert rep.summary["rows"]["scalar-flag"]["tolerance"] == 1e-30


def test_point_report():
    out = point_report(RunConfig(family="space-form", mu=-1.0), [0.1, 0.0, 0.0], [0.0, 1.0, 0.0])
    assert out["K_hat"] == pytest.approx(-1.0, abs=1e-12)
    assert out["K_formula"] == -1.0


def test_cli_verify_exit_codes(tmp_path, capsys):
    out = tmp_path / "rep.json"
    code = main(["verify", "--family", "square-scalar", "--mu", "1", "--k", "0.3",
                 "--a", "0.1,0.2,0.05", "--samples", "2", "--out", str(out)])
    assert code == 0
    assert parse_report(out.read_text()).passed

    cfg = tmp_path / "custom.json"
    cfg.write_text(json.dumps({"family": "custom", "custom": CUSTOM, "samples": 2}))
    assert main(["verify", "--config", str(cfg), "--format", "text"]) == 1
    assert "FAIL" in capsys.readouterr().out

    assert main(["verify", "--family", "space-form", "--a", "0.1,0.2"]) == 2


def test_cli_tolerance_flag(capsys):
    code = main(["verify", "--family", "space-form", "--samples", "2", "--tol", "scalar-flag=1e-30",
                 "--format", "text"])
    assert code == 1
    with pytest.raises(SystemExit):
        main(["verify", "--tol", "nonsense=1"])


def test_cli_curvature(capsys):
    code = main(["curvature", "--family", "square-constant", "--a", "0.2,0,0",
                 "--point", "0.1,0.1,0", "--direction", "0,0,1"])
    assert code == 0
    data = json.loads(capsys.readouterr().out)
    assert abs(data["K_hat"]) < 1e-12
    assert "structure" in data
