import json
import logging

import pandas as pd
import pytest

from operator_moduli.cli import SUBCOMMANDS, RunResult, csv_columns, main, report_frame
from operator_moduli.errors import ConsistencyError
from operator_moduli.moduli import ModulusEnvelope, witness_from_json


@pytest.fixture(autouse=True)
def _restore_root_logger():
    root = logging.getLogger()
    handlers, level = list(root.handlers), root.level
    yield
    for handler in list(root.handlers):
        if handler not in handlers:
            handler.close()
    root.handlers[:] = handlers
    root.setLevel(level)


def _run(tmp_path, *argv: str) -> int:
    return main([*argv, "--output-dir", str(tmp_path), "--quiet"])


def test_every_subcommand_has_a_schema():
    assert set(SUBCOMMANDS) == set(csv_columns())


def test_doi_check(tmp_path):
    assert _run(tmp_path, "doi-check", "--f", "power:2", "--dim", "3", "--instances", "4") == 0
    frame = pd.read_csv(tmp_path / "doi-check.csv")
    assert list(frame.columns) == csv_columns()["doi-check"]
    assert frame.loc[0, "function"] == "power:2"
    assert bool(frame.loc[0, "passed"])
    config = json.loads((tmp_path / "config.json").read_text())
    assert config["dim"] == 3
    assert config["subcommand"] == "doi-check"


def test_omega(tmp_path):
    assert _run(tmp_path, "omega", "--modulus", "power:0.5", "--delta-grid", "1,0.25") == 0
    frame = pd.read_csv(tmp_path / "omega.csv")
    assert frame["delta"].tolist() == [0.25, 1.0]
    assert (frame["omega"] <= frame["omega_star"] + 1e-12).all()
    assert (frame["omega_star"] <= frame["omega_star_star"] + 1e-12).all()
    assert frame["omega"].iloc[1] == pytest.approx(1.0)


def test_lattice_bound_sweeps_r(tmp_path):
    argv = ["lattice-bound", "--f", "identity", "--delta", "1", "--r-grid", "2,1"]
    assert _run(tmp_path, *argv, "--budget", "8", "--iterations", "10") == 0
    frame = pd.read_csv(tmp_path / "lattice-bound.csv")
    assert frame["r"].tolist() == [1.0, 2.0]
    assert frame["points"].tolist() == [5, 13]
    assert (frame["lower"] <= frame["upper"] + 1e-9).all()


def test_multnorm_diagonal_pattern(tmp_path):
    argv = ["multnorm", "--pattern", "diagonal", "--dim", "4", "--budget", "8"]
    assert _run(tmp_path, *argv, "--iterations", "10") == 0
    row = pd.read_csv(tmp_path / "multnorm.csv").iloc[0]
    assert row["lower"] == pytest.approx(1.0)
    assert row["upper"] == pytest.approx(1.0, rel=1e-6)
    assert (tmp_path / "upper_certificate.json").exists()


def test_search_extremal_writes_revalidated_witnesses(tmp_path):
    argv = ["search-extremal", "--kind", "SA", "--f", "identity", "--dim", "2", "--budget", "4"]
    assert _run(tmp_path, *argv, "--delta-grid", "0.5,1") == 0
    frame = pd.read_csv(tmp_path / "search-extremal.csv")
    assert frame["witness"].tolist() == ["SA_000.json", "SA_001.json"]
    for name in frame["witness"]:
        witness = witness_from_json(json.loads((tmp_path / "witnesses" / name).read_text()))
        assert witness.constraint <= witness.delta + 1e-10
    envelope = ModulusEnvelope.from_json(json.loads((tmp_path / "envelope.json").read_text()))
    assert envelope.lower_values.tolist() == frame["envelope_value"].tolist()


def test_runs_are_reproducible(tmp_path):
    argv = ["search-extremal", "--f", "abs_power:0.5", "--dim", "2", "--budget", "6", "--seed", "3"]
    first, second = tmp_path / "first", tmp_path / "second"
    assert main([*argv, "--output-dir", str(first), "--quiet"]) == 0
    assert main([*argv, "--output-dir", str(second), "--quiet", "--workers", "2"]) == 0
    for name in ("search-extremal.csv", "envelope.json"):
        assert (first / name).read_bytes() == (second / name).read_bytes()
    # config.json echoes workers, so compare it against a serial rerun
    third = tmp_path / "third"
    assert main([*argv, "--output-dir", str(third), "--quiet"]) == 0
    assert (first / "config.json").read_bytes() == (third / "config.json").read_bytes()


def test_configuration_errors_write_nothing(tmp_path, subtests):
    broken = tmp_path / "phi.json"
    broken.write_text("{oops")
    cases = {
        "unknown function": ["doi-check", "--f", "nosuch"],
        "bad modulus": ["omega", "--modulus", "power:3"],
        "malformed matrix": ["multnorm", "--pattern", "file", "--matrix-path", str(broken)],
        "missing config": ["omega", "--config", str(tmp_path / "absent.yaml")],
    }
    for name, argv in cases.items():
        with subtests.test(case=name):
            out = tmp_path / name.replace(" ", "_")
            assert main([*argv, "--output-dir", str(out), "--quiet"]) == 2
            assert not out.exists()


def test_config_file_and_flags(tmp_path):
    config_path = tmp_path / "run.yaml"
    config_path.write_text("subcommand: omega\nmodulus: linear\ndelta_grid: [0.5, 2]\n")
    out = tmp_path / "out"
    argv = ["omega", "--config", str(config_path), "--delta-grid", "1", "--output-dir", str(out)]
    assert main([*argv, "--quiet"]) == 0
    frame = pd.read_csv(out / "omega.csv")
    assert frame["delta"].tolist() == [1.0]
    assert frame.loc[0, "modulus"] == "linear"

    wrong = tmp_path / "wrong.json"
    wrong.write_text(json.dumps({"subcommand": "holder"}))
    argv = ["omega", "--config", str(wrong), "--output-dir", str(tmp_path / "x"), "--quiet"]
    assert main(argv) == 2


def test_json_log_file(tmp_path):
    log_file = tmp_path / "run.jsonl"
    argv = ["omega", "--delta-grid", "1", "--log-level", "INFO", "--log-file", str(log_file)]
    assert _run(tmp_path / "out", *argv) == 0
    records = [json.loads(line) for line in log_file.read_text().splitlines() if line.strip()]
    assert any(r["name"] == "CliLogger" and r["message"] == "Running omega" for r in records)
    assert all({"asctime", "levelname", "message"} <= set(r) for r in records)


def test_report_frame_rejects_mismatched_rows():
    result = RunResult("omega", rows=[{"delta": 1.0}])
    with pytest.raises(ConsistencyError):
        report_frame(result)
    assert RunResult("omega", violations=["x"]).exit_code == 1
    assert RunResult("omega").exit_code == 0


def test_fourier_check(tmp_path):
    assert _run(tmp_path, "fourier-check", "--formulas", "gaussian") == 0
    frame = pd.read_csv(tmp_path / "fourier-check.csv")
    assert list(frame.columns) == csv_columns()["fourier-check"]
    assert frame["formula_id"].tolist() == ["gaussian", "psi_squared_decay", "psi_squared_decay"]
    assert frame["grid_N"].tolist() == [1024, 1024, 2048]
    assert frame["passed"].all()


def test_holder_experiments(tmp_path, subtests):
    cases = {
        "ratio": ["--experiment", "ratio", "--alpha-grid", "0.5", "--budget", "4"],
        "quasicommutator": ["--experiment", "quasicommutator", "--alpha-grid", "0.5"],
        "hn": ["--experiment", "hn", "--n-grid", "-1,2"],
    }
    for name, flags in cases.items():
        with subtests.test(experiment=name):
            out = tmp_path / name
            argv = ["holder", "--f", "abs_power:0.5", "--dim", "2", "--instances", "3", *flags]
            assert _run(out, *argv) == 0
            frame = pd.read_csv(out / "holder.csv")
            assert list(frame.columns) == csv_columns()["holder"]
            assert (frame["max_ratio"] >= 0).all()
            if name == "hn":
                assert frame["experiment"].tolist() == ["hn:-1", "hn:2"]
                assert not (out / "seminorms.json").exists()
            else:
                seminorms = json.loads((out / "seminorms.json").read_text())
                assert set(seminorms) == {"0.5"}
                assert seminorms["0.5"]["method"] in {"analytic", "sampled"}
                assert seminorms["0.5"]["value"] > 0
            if name == "ratio":
                assert seminorms["0.5"]["value"] == pytest.approx(frame.loc[0, "reference"])
            if name == "quasicommutator":
                assert frame.loc[0, "reference"] == pytest.approx(4.0)


def test_mcc_check(tmp_path):
    argv = ["mcc-check", "--f", "conj", "--instances", "3", "--dim", "3", "--tau", "0.5"]
    assert _run(tmp_path, *argv) == 0
    frame = pd.read_csv(tmp_path / "mcc-check.csv")
    assert list(frame.columns) == csv_columns()["mcc-check"]
    assert frame.loc[0, "instances"] == 3
    assert frame.loc[0, "dilation_violations"] == 0
    assert frame.loc[0, "worst_vl_slack"] >= -1e-8
