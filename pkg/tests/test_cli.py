import json

import pytest

from hypstab.cli import main
from hypstab.config import ScenarioConfig
from hypstab.errors import ConfigError
from hypstab.io import read_csv

UNIT = {"C0": 4, "kappa1": 1, "kappa2": 1, "delta": 0.1}


def write(tmp_path, data, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data), encoding="utf-8")
    return str(p)


def rows(path):
    header, body = read_csv(path)
    return [dict(zip(header, r)) for r in body]


def test_functionals_step_example(tmp_path):
    cfg = write(tmp_path, {"name": "step", "task": "functionals", "model": {"id": "burgers"}, "constants": UNIT,
                           "initial": {"jumps": {"positions": [0.0], "strengths": [[-0.2]]}}})
    assert main(["run", cfg, "--out", str(tmp_path / "o")]) == 0
    (r,) = rows(tmp_path / "o" / "step.csv")
    assert float(r["V"]) == pytest.approx(0.2) and float(r["Q"]) == 0 and float(r["Upsilon"]) == pytest.approx(0.2)


def test_phi_pair_hand_example(tmp_path):
    cfg = write(tmp_path, {"name": "pair", "task": "phi-pair", "model": {"id": "burgers"}, "constants": UNIT,
                           "initial_tilde": {"pcf": {"breakpoints": [0, 1], "values": [[-0.1]]}}})
    assert main(["run", cfg, "--out", str(tmp_path)]) == 0
    (r,) = rows(tmp_path / "pair.csv")
    assert float(r["Phi"]) == pytest.approx(0.111) and float(r["Xi_hat"]) == pytest.approx(0.111)
    manifest = json.loads((tmp_path / "pair.manifest.json").read_text())
    assert manifest["constants"]["C0"] == 4 and "p_system" in manifest["fitted_constants"]
    assert manifest["versions"]["numpy"]


def test_empty_data_gives_zeros(tmp_path):
    cfg = write(tmp_path, {"name": "e", "task": "functionals", "model": {"id": "p_system"}})
    assert main(["run", cfg, "--out", str(tmp_path)]) == 0
    (r,) = rows(tmp_path / "e.csv")
    assert r["V"] == r["Q"] == r["Upsilon"] == "0"


@pytest.mark.parametrize("data", [{"task": "bogus"}, {"task": "functionals", "extra": 1},
                                  {"task": "evolve", "initial": {"generator": {"kind": "pcf"}}},
                                  {"task": "functionals", "model": {"id": "p_system", "params": {"beta": 1}}}])
def test_config_errors_exit_2(tmp_path, data):
    assert main(["run", write(tmp_path, data), "--out", str(tmp_path)]) == 2


def test_unreadable_config_exit_2(tmp_path):
    (tmp_path / "bad.json").write_text("{not json")
    assert main(["run", str(tmp_path / "bad.json"), "--out", str(tmp_path)]) == 2
    assert main(["run", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == 2


def test_numerical_failure_exit_3(tmp_path):
    cfg = write(tmp_path, {"task": "functionals", "model": {"id": "p_system"},
                           "initial": {"pcf": {"breakpoints": [0, 1], "values": [[0.2, 0.0]]}}})
    assert main(["run", cfg, "--out", str(tmp_path)]) == 3


def test_evolve_is_deterministic_and_seed_override(tmp_path):
    data = {"name": "ev", "task": "evolve", "model": {"id": "p_system"}, "eps": [0.02], "T": 0.5,
            "initial": {"generator": {"kind": "admissible_pcf", "seed": 3}},
            "initial_tilde": {"generator": {"kind": "admissible_pcf", "seed": 4}}}
    cfg = write(tmp_path, data)
    for d in ("a", "b"):
        assert main(["run", cfg, "--out", str(tmp_path / d)]) == 0
    a, b = (tmp_path / "a" / "ev.csv").read_bytes(), (tmp_path / "b" / "ev.csv").read_bytes()
    assert a == b
    assert (tmp_path / "a" / "ev.events.json").exists()
    assert main(["run", cfg, "--out", str(tmp_path / "c"), "--seed", "99"]) == 0
    assert (tmp_path / "c" / "ev.csv").read_bytes() != a
    header, body = read_csv(tmp_path / "a" / "ev.csv")
    assert header[:6] == ["eps", "t", "V", "Q", "Upsilon_eps", "nonphysical"] and len(body) == 11
    # 17 significant digits round-trip
    assert all(float(repr(float(x))) == float(x) for x in body[3][2:])


def test_env_out_dir_and_calibrate(tmp_path, monkeypatch):
    monkeypatch.setenv("HYPSTAB_OUT", str(tmp_path / "env"))
    cfg = write(tmp_path, {"name": "cal", "task": "functionals", "model": {"id": "burgers"}, "seed": 1,
                           "samples": 100})
    assert main(["calibrate", cfg]) == 0
    consts = json.loads((tmp_path / "env" / "cal.constants.json").read_text())
    assert consts["C0"] == 4 and consts["kappa2"] == 1


def test_calibrate_linear_model_trivial(tmp_path):
    cfg = write(tmp_path, {"name": "lin", "task": "calibrate", "seed": 0, "samples": 50,
                           "model": {"id": "linear", "params": {"A": [[-1, 0], [0, 1]]}}})
    assert main(["run", cfg, "--out", str(tmp_path)]) == 0
    (r,) = rows(tmp_path / "lin.csv")
    assert float(r["max_dv_ratio"]) <= 1e-9 and float(r["C0"]) == 4


def test_batch_with_workers(tmp_path):
    scen = [{"name": f"s{k}", "task": "approx-study", "model": {"id": "burgers"}, "nu": [10, 20],
             "initial": {"bv": {"pieces": [{"a": 0, "b": 1, "p": [0.05], "slope": [-0.1]}]}}} for k in range(2)]
    cfg = write(tmp_path, {"scenarios": scen})
    assert main(["run", cfg, "--out", str(tmp_path), "--jobs", "2"]) == 0
    assert rows(tmp_path / "s0.csv") == rows(tmp_path / "s1.csv")


def test_acceptance_task_report(tmp_path):
    cfg = write(tmp_path, {"name": "acc", "task": "acceptance", "criteria": [1, 9]})
    assert main(["run", cfg, "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "acc.report.json").read_text())
    assert [c["criterion"] for c in rep["criteria"]] == [1, 9]
    assert all({"measured", "bound", "pass"} <= set(c) for c in rep["criteria"])


def test_config_dataclass_validation():
    with pytest.raises(ConfigError):
        ScenarioConfig.from_dict({"task": "approx-study"})
    cfg = ScenarioConfig.from_dict({"task": "evolve", "initial": {"generator": {"kind": "pcf", "seed": 1}},
                                    "initial_tilde": {"generator": {"kind": "pcf", "seed": 1}}})
    s = cfg.with_seed(5)
    assert s.initial["generator"]["seed"] == 5 and s.initial_tilde["generator"]["seed"] == 6
