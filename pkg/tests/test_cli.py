import json

import pytest

from castrack.cli import (
    EXIT_CONFIG,
    EXIT_DOMAIN,
    EXIT_FIT,
    EXIT_OK,
    EXIT_SCENARIO,
    EXIT_SIZE,
    main,
)
from castrack.config import config_to_dict, default_config, dump_config
from castrack.export import read_header
from castrack.sensor import DetectionModel, detection_prob


@pytest.fixture()
def small_config(tmp_path):
    path = tmp_path / "cfg.json"
    doc = config_to_dict(default_config(0, n_castaways=2, duration=6))
    doc["planner"].update(horizon=3, iterations=2, population=16)
    path.write_text(json.dumps(doc))
    return path


def test_simulate_writes_outputs(tmp_path, small_config):
    out = tmp_path / "run"
    assert main(["simulate", "--config", str(small_config), "--seed", "4", "--out", str(out), "--plots"]) == EXIT_OK
    for name in ("episode.csv", "truth.csv", "summary.json", "trajectory.svg", "trace.svg"):
        assert (out / name).exists()
    assert read_header(out / "episode.csv")["seed"] == 4
    summary = json.loads((out / "summary.json").read_text())
    assert summary["seed"] == 4 and summary["config"]["schema_version"] == 1


def test_simulate_byte_identical(tmp_path, small_config):
    outs = []
    for tag in ("a", "b"):
        out = tmp_path / tag
        main(["simulate", "--config", str(small_config), "--seed", "42", "--out", str(out)])
        outs.append(out)
    for name in ("episode.csv", "truth.csv"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def test_malformed_config_leaves_no_outputs(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"schema_version": 1, "planner": {"horizon": }}')
    out = tmp_path / "never"
    assert main(["simulate", "--config", str(bad), "--out", str(out)]) == EXIT_CONFIG
    assert not out.exists()
    assert "line 1 column" in capsys.readouterr().err


def test_unknown_field_exit_code(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"schema_version": 1, "extra": 1}')
    assert main(["simulate", "--config", str(bad), "--out", str(tmp_path / "o")]) == EXIT_CONFIG


def test_bad_policy_exit_code(tmp_path, small_config):
    assert main(["simulate", "--config", str(small_config), "--policy", "zigzag",
                 "--out", str(tmp_path / "o")]) == EXIT_DOMAIN


def test_gen_scenario_rejected(tmp_path):
    assert main(["gen-scenario", "--castaways", "0", "--out", str(tmp_path / "o")]) == EXIT_SCENARIO


def test_gen_scenario_round_trip(tmp_path):
    out = tmp_path / "scn"
    assert main(["gen-scenario", "--seed", "5", "--duration", "10", "--out", str(out)]) == EXIT_OK
    assert main(["simulate", "--config", str(out / "config.json"), "--policy", "hover:60",
                 "--out", str(tmp_path / "run")]) == EXIT_OK
    body = [(d / "truth.csv").read_text().splitlines()[1:] for d in (out, tmp_path / "run")]
    assert body[0] == body[1]


def test_fit_writes_model(tmp_path):
    table = tmp_path / "recall.csv"
    rows = ["altitude_m,tp,fn"]
    for z in (5, 10, 20, 40, 60, 80, 100, 120):
        tp = round(detection_prob(float(z)) * 10_000)
        rows.append(f"{z},{tp},{10_000 - tp}")
    table.write_text("\n".join(rows) + "\n")
    out = tmp_path / "fit"
    assert main(["fit", str(table), "--out", str(out)]) == EXIT_OK
    doc = json.loads((out / "detection_model.json").read_text())
    model = DetectionModel(**doc["detection"])
    assert detection_prob(10.0, model) == 1.0


def test_fit_error_exit_code(tmp_path):
    table = tmp_path / "flat.csv"
    table.write_text("altitude_m,tp,fn\n10,1,1\n")
    assert main(["fit", str(table), "--out", str(tmp_path / "o")]) == EXIT_FIT


def test_timing_guard_exit_code(tmp_path):
    assert main(["timing", "--horizons", "500", "--targets", "2", "--out", str(tmp_path / "o")]) == EXIT_SIZE


def test_timing_writes_table(tmp_path, small_config):
    out = tmp_path / "t"
    assert main(["timing", "--config", str(small_config), "--horizons", "2,3", "--targets", "1",
                 "--solves", "2", "--out", str(out)]) == EXIT_OK
    doc = json.loads((out / "timing.json").read_text())
    assert [(c["N"], c["C"]) for c in doc["cells"]] == [(2, 1), (3, 1)]


def test_mc_one_row_per_policy(tmp_path, small_config):
    out = tmp_path / "mc"
    assert main(["mc", "--config", str(small_config), "--runs", "2", "--policies", "mpc,hover,lawnmower",
                 "--out", str(out)]) == EXIT_OK
    doc = json.loads((out / "comparison.json").read_text())
    assert [r["policy"] for r in doc["rows"]] == ["mpc", "hover:100", "lawnmower"]
    assert all(r["n_runs"] == 2 and len(r["runs"]) == 2 for r in doc["rows"])


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--seed", "notanint"])
    assert exc.value.code == 2


def test_default_config_dump_loads(tmp_path):
    path = tmp_path / "d.json"
    dump_config(default_config(0), path)
    assert main(["gen-scenario", "--duration", "3", "--out", str(tmp_path / "g")]) == EXIT_OK
