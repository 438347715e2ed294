"""Tests for problem files, builtins, settings and the command line."""

import json
import logging
import os

import pytest

from conftest import builtin_dict
from stratified_hjb.core.errors import EXIT_CHECK_FAILED, EXIT_INPUT_ERROR, EXIT_PASS, ConfigError, UnknownBuiltin
from stratified_hjb.core.settings import Settings
from stratified_hjb.data.builtins import BUILTIN_NAMES, builtin_path, builtin_problem
from stratified_hjb.data.config_loader import (ProblemConfig, check_tolerance, ladder_from, load_config,
                                               parse_config_text)
from stratified_hjb.main import main
from stratified_hjb.utils.logging_utils import LOGGER_NAME, set_log_level


def _write_config(tmp_path, data, name="problem.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data), encoding="utf-8")
    return str(path)


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_builtins_round_trip(name):
    config = builtin_problem(name)
    again = ProblemConfig.from_dict(config.to_dict())
    assert again.to_json() == config.to_json()
    assert config.notes["defaults"] == "artifact defaults"


def test_builtin_lookup():
    assert os.path.exists(builtin_path("cross"))
    with pytest.raises(UnknownBuiltin):
        builtin_path("nonexistent")
    with pytest.raises(UnknownBuiltin):
        load_config("builtin:nonexistent")
    assert load_config("builtin:cross").name == "cross"


def test_missing_field_names_its_path():
    data = builtin_dict("two-cost-1d")
    del data["horizon"]
    with pytest.raises(ConfigError) as error:
        ProblemConfig.from_dict(data)
    assert error.value.field_path == "horizon"


def test_nested_field_errors():
    data = builtin_dict("two-cost-1d")
    data["solver"]["dx"] = -0.1
    with pytest.raises(ConfigError) as error:
        ProblemConfig.from_dict(data)
    assert error.value.field_path == "solver.dx"

    data = builtin_dict("two-cost-1d")
    data["box"]["lower"] = [-2.0, 0.0]
    with pytest.raises(ConfigError) as error:
        ProblemConfig.from_dict(data)
    assert error.value.field_path == "box.lower"


def test_region_without_rule_is_rejected():
    data = builtin_dict("two-cost-1d")
    data["dynamics"]["regions"] = data["dynamics"]["regions"][:1]
    with pytest.raises(ConfigError) as error:
        ProblemConfig.from_dict(data).build_problem()
    assert error.value.field_path == "dynamics.regions"


def test_syntax_error_carries_position():
    with pytest.raises(ConfigError) as error:
        parse_config_text('{\n  "dimension": 1,\n  "box": \n}')
    assert error.value.line == 4
    assert error.value.column is not None


def test_load_config_names_problem_after_file(tmp_path):
    data = builtin_dict("two-cost-1d")
    del data["name"]
    config = load_config(_write_config(tmp_path, data, "my-problem.json"))
    assert config.name == "my-problem"
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "missing.json"))


def test_tolerance_and_ladder():
    config = builtin_problem("two-cost-1d")
    assert check_tolerance(config, 0.01, 0.01) == pytest.approx(0.2)
    assert check_tolerance(config, 0.01, 0.01, factor=5.0) == pytest.approx(0.1)
    assert ladder_from(config) == [(0.04, 0.04), (0.02, 0.02), (0.01, 0.01)]
    config.checks.refinement = ()
    assert ladder_from(config) == [(0.01, 0.01), (0.005, 0.005), (0.0025, 0.0025)]


def test_settings_file_and_overrides(tmp_path, monkeypatch):
    monkeypatch.setenv("STRATIFIED_HJB_HOME", str(tmp_path))
    (tmp_path / "settings.json").write_text(json.dumps({"threads": 4, "logger": "x"}), encoding="utf-8")
    settings = Settings()
    assert settings.threads == 4
    assert settings.logger != "x"
    settings.apply_overrides(threads=None, output_directory="out")
    assert settings.as_dict()["threads"] == 4
    assert settings.output_directory == "out"
    with pytest.raises(AttributeError):
        settings.apply_overrides(colour="red")


def test_cli_builtin_lists_and_prints(app, capsys, tmp_path):
    assert app.run(["builtin"]) == EXIT_PASS
    assert capsys.readouterr().out.split() == list(BUILTIN_NAMES)
    assert app.run(["builtin", "cross"]) == EXIT_PASS
    assert json.loads(capsys.readouterr().out)["name"] == "cross"
    target = tmp_path / "cross.json"
    assert app.run(["builtin", "cross", "--output", str(target)]) == EXIT_PASS
    assert json.loads(target.read_text(encoding="utf-8")) == builtin_dict("cross")


def test_cli_input_errors(app, tmp_path):
    assert app.run(["builtin", "nonexistent"]) == EXIT_INPUT_ERROR
    assert app.run(["validate", "--config", "builtin:nonexistent"]) == EXIT_INPUT_ERROR
    assert app.run(["unknown-command"]) == EXIT_INPUT_ERROR
    data = builtin_dict("two-cost-1d")
    del data["horizon"]
    assert app.run(["validate", "--config", _write_config(tmp_path, data)]) == EXIT_INPUT_ERROR


def test_cli_validate(app, tmp_path):
    out = tmp_path / "reports"
    assert app.run(["validate", "--config", "builtin:cross", "--output", str(out)]) == EXIT_PASS
    report = json.loads((out / "cross_validate_afs.json").read_text(encoding="utf-8"))
    assert report["pass"] is True
    for name in ("check_adapted", "check_nc", "check_tc", "check_lp_constant"):
        assert (out / f"cross_{name}.json").exists()


def test_cli_validate_reports_inadmissible_stratification(app, tmp_path):
    out = tmp_path / "reports"
    assert app.run(["validate", "--config", "builtin:forbidden-r3", "--output", str(out)]) == EXIT_CHECK_FAILED
    report = json.loads((out / "forbidden-r3_validate_afs.json").read_text(encoding="utf-8"))
    assert report["pass"] is False
    assert "afs_ii" in report["summary"]["failed_axioms"]


def test_cli_solve_then_check(app, tmp_path, capsys):
    data = builtin_dict("two-cost-1d")
    data["solver"] = {"dx": 0.02, "dt": 0.02}
    config = _write_config(tmp_path, data)
    grid = str(tmp_path / "grid.csv")
    assert app.run(["solve", "--config", config, "--output", grid]) == EXIT_PASS
    assert os.path.exists(grid)
    assert "grid written to" in capsys.readouterr().out

    out = tmp_path / "checks"
    assert app.run(["check", "--config", config, "--grid", grid, "--output", str(out)]) == EXIT_PASS
    names = sorted(os.listdir(out))
    assert names == ["two-cost-1d_dpp_tau1.json", "two-cost-1d_dpp_tau2.json", "two-cost-1d_dpp_tau4.json",
                     "two-cost-1d_viscosity_sub.json", "two-cost-1d_viscosity_super.json"]

    data["solver"] = {"dx": 0.04, "dt": 0.02}
    other = _write_config(tmp_path, data, "coarser.json")
    assert app.run(["check", "--config", other, "--grid", grid, "--output", str(out)]) == EXIT_INPUT_ERROR
    missing = str(tmp_path / "missing.csv")
    assert app.run(["check", "--config", config, "--grid", missing, "--output", str(out)]) == EXIT_INPUT_ERROR


def test_cli_study_needs_radii(app, tmp_path):
    data = builtin_dict("two-cost-1d")
    data["checks"]["eps_list"] = []
    config = _write_config(tmp_path, data)
    assert app.run(["study", "--config", config, "--kind", "filippov", "--output", str(tmp_path)]) == \
        EXIT_INPUT_ERROR


def test_main_entry_point(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("STRATIFIED_HJB_HOME", str(tmp_path))
    assert main(["--no-log-file", "builtin"]) == EXIT_PASS
    assert "cross" in capsys.readouterr().out.split()


@pytest.fixture
def package_logger():
    logger = logging.getLogger(LOGGER_NAME)
    yield logger
    set_log_level("INFO")


def test_log_level_reaches_handlers(tmp_path, monkeypatch, package_logger):
    monkeypatch.setenv("STRATIFIED_HJB_HOME", str(tmp_path))
    assert main(["--no-log-file", "--log-level", "debug", "builtin"]) == EXIT_PASS
    assert package_logger.level == logging.DEBUG
    assert package_logger.handlers
    assert {handler.level for handler in package_logger.handlers} == {logging.DEBUG}


def test_unknown_log_level_is_an_input_error(tmp_path, monkeypatch, package_logger):
    monkeypatch.setenv("STRATIFIED_HJB_HOME", str(tmp_path))
    assert main(["--no-log-file", "--log-level", "bogus", "builtin"]) == EXIT_INPUT_ERROR
    (tmp_path / "settings.json").write_text(json.dumps({"log_level": "loud"}), encoding="utf-8")
    assert main(["--no-log-file", "builtin"]) == EXIT_INPUT_ERROR


def test_settings_file_drives_logging(tmp_path, monkeypatch, package_logger):
    monkeypatch.setenv("STRATIFIED_HJB_HOME", str(tmp_path))
    settings = {"log_level": "WARNING", "log_to_file": False}
    (tmp_path / "settings.json").write_text(json.dumps(settings), encoding="utf-8")
    assert main(["builtin"]) == EXIT_PASS
    assert package_logger.level == logging.WARNING
    assert not (tmp_path / "logs").exists()


def test_cli_scheme_agreement_study(app, tmp_path):
    out = tmp_path / "study"
    code = app.run(["study", "--config", "builtin:two-cost-1d", "--kind", "agreement", "--output", str(out)])
    assert code in (EXIT_PASS, EXIT_CHECK_FAILED)
    report = json.loads((out / "two-cost-1d_agreement_study.json").read_text(encoding="utf-8"))
    assert report["check"] == "scheme_agreement"
    assert (out / "two-cost-1d_agreement_study.csv").exists()


def test_notes_carry_provenance():
    data = builtin_dict("two-cost-1d")
    data["notes"] = {"source": "hand-tuned speeds", "defaults": "artifact defaults"}
    assert ProblemConfig.from_dict(data).to_dict()["notes"] == data["notes"]
    data["notes"] = "a comment"
    with pytest.raises(ConfigError) as error:
        ProblemConfig.from_dict(data)
    assert error.value.field_path == "notes"
