import json

import numpy as np
import pytest
import yaml

from ncvi.cli import EXIT_CONFIG, EXIT_OK, main
from ncvi.config import RunConfig
from ncvi.errors import ConfigError
from ncvi.stepper import SolverConfig


def read_csv(path):
    lines = [l for l in open(path) if not l.startswith("#")]
    header = lines[0].strip().split(",")
    data = np.array([[float(v) for v in l.split(",")] for l in lines[1:]])
    return header, data


def test_list_systems(capsys):
    assert main(["list-systems"]) == EXIT_OK
    names = capsys.readouterr().out.split()
    assert {"rotor-oscillator", "fieldline"} <= set(names)


def test_integrate_rows_and_header(tmp_path):
    out = tmp_path / "run.csv"
    rc = main(["integrate", "--system", "rotor-oscillator", "--epsilon", "0.1", "--order", "Linf",
               "--steps", "100", "--z0", "1,0.5", "--out", str(out)])
    assert rc == EXIT_OK
    first = open(out).readline()
    assert first.startswith("# ncvi")
    header, data = read_csv(out)
    assert header == ["step", "t", "z0", "z1", "newton_iters", "residual"]
    assert data.shape == (101, 6)
    np.testing.assert_array_equal(data[:, 0], np.arange(101))
    np.testing.assert_allclose(data[0, 2:4], [1.0, 0.5])


def test_integrate_json(tmp_path):
    out = tmp_path / "run.json"
    rc = main(["integrate", "--system", "rotor-oscillator", "--epsilon", "0.1", "--steps", "5",
               "--format", "json", "--out", str(out)])
    assert rc == EXIT_OK
    body = json.load(open(out))
    assert body["meta"]["config"]["n_steps"] == 5
    assert len(body["trajectories"][0]["z"]) == 6


def test_integrate_single_step(tmp_path):
    out = tmp_path / "one.csv"
    assert main(["integrate", "--system", "rotor-oscillator", "--steps", "1", "--out", str(out)]) == EXIT_OK
    assert read_csv(out)[1].shape[0] == 2


def test_missing_system_is_config_error(tmp_path, capsys):
    out = tmp_path / "never.csv"
    assert main(["integrate", "--out", str(out)]) == EXIT_CONFIG
    assert not out.exists()
    assert "system" in capsys.readouterr().err


@pytest.mark.parametrize("flags", [["--system", "nope"], ["--system", "rotor-oscillator", "--order", "L7"],
                                   ["--system", "rotor-oscillator", "--tau", "-1"],
                                   ["--system", "rotor-oscillator", "--epsilon", "-0.1"]])
def test_bad_flags_exit_one(flags):
    assert main(["integrate"] + flags) == EXIT_CONFIG


def test_poincare_unperturbed_radius_constant(tmp_path):
    out = tmp_path / "p.csv"
    rc = main(["poincare", "--system", "fieldline", "--epsilon", "0", "--order", "L1",
               "--steps", "20", "--seed-grid", "0.5,1.0,1.5", "--out", str(out)])
    assert rc == EXIT_OK
    header, data = read_csv(out)
    assert header == ["seed_id", "iterate", "R", "Theta"]
    for sid, r0 in enumerate([0.5, 1.0, 1.5]):
        R = data[data[:, 0] == sid, 2]
        assert len(R) == 21
        np.testing.assert_allclose(R, r0, atol=1e-9)
    side = json.load(open(str(out) + ".flags.json"))
    assert side["flagged"] == []
    assert side["seeds"][1]["rotation_number"] == pytest.approx(1 / 3, abs=1e-9)


def test_poincare_flags_escaping_seed(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text(yaml.safe_dump({"system": "fieldline", "epsilon": 0.0075, "n_steps": 30,
                                   "seed_grid": "0.5,1.2", "escape_radius": 0.9}))
    out = tmp_path / "p.csv"
    assert main(["poincare", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    side = json.load(open(str(out) + ".flags.json"))
    assert [f["seed_id"] for f in side["flagged"]] == [1]
    _, data = read_csv(out)
    assert np.sum(data[:, 0] == 0) == 31


def test_converge_outputs_table(tmp_path):
    out = tmp_path / "c.json"
    rc = main(["converge", "--system", "fieldline", "--order", "L1", "--z0", "1,0",
               "--epsilons", "1e-4,1e-3,1e-2", "--out", str(out)])
    assert rc == EXIT_OK
    table = json.load(open(out))["convergence_table"]
    assert table["slope"] == pytest.approx(2.0, abs=0.15)
    assert len(table["rows"]) == 3


def test_converge_single_epsilon_flagged(tmp_path):
    out = tmp_path / "c.json"
    assert main(["converge", "--system", "fieldline", "--epsilons", "1e-3", "--out", str(out)]) == EXIT_OK
    body = json.load(open(out))
    assert body["convergence_table"]["slope"] is None
    assert body["notes"]


def test_converge_bad_epsilon():
    assert main(["converge", "--system", "fieldline", "--epsilons", "1e-3,-1"]) == EXIT_CONFIG


def test_check_rotor_passes(tmp_path):
    out = tmp_path / "chk.json"
    rc = main(["check", "--system", "rotor-oscillator", "--epsilon", "0.1", "--order", "Linf", "--z0", "0.5,0.5",
               "--steps", "50", "--out", str(out)])
    assert rc == EXIT_OK
    body = json.load(open(out))
    assert body["failures"] == []
    assert body["symplectic_defects"]["max"] < 1e-5


def test_config_round_trip(tmp_path):
    cfg = RunConfig(system="fieldline", epsilon=0.0075, order="L2", n_steps=7,
                    solver=SolverConfig(residual_tol=1e-11))
    path = tmp_path / "cfg.yaml"
    cfg.dump(path)
    back = RunConfig.load(path)
    assert back == cfg


def test_config_rejects_unknown_keys():
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"system": "rotor-oscillator", "bogus": 1})
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"solver": {"nope": 1}})


def test_seed_grid_forms():
    pts = RunConfig(seed_grid="0.3:2.0:30").seed_points()
    assert pts.shape == (30, 2)
    np.testing.assert_allclose(pts[[0, -1], 0], [0.3, 2.0])
    pts = RunConfig(seed_grid="1:2:2:1.5707963267948966").seed_points()
    np.testing.assert_allclose(pts, [[0, 1], [0, 2]], atol=1e-15)
    with pytest.raises(ConfigError):
        RunConfig(seed_grid="1:2").seed_points()
