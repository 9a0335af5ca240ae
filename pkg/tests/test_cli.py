import json

import pytest

from fracdelta.cli import ConfigError, DEFAULTS, apply_override, load_config, main

FAST = ["--set", "time.T_final=0.25", "--set", "time.h=0.015625", "--set", "snapshots.times=[0.0, 0.25]",
        "--set", "snapshots.nx=11", "--set", "snapshots.observable_every=2"]


def test_override_parsing():
    cfg = apply_override(DEFAULTS, "model.beta=-2.5")
    assert cfg["model"]["beta"] == -2.5
    assert DEFAULTS["model"]["beta"] == -1.0
    with pytest.raises(ConfigError):
        apply_override(DEFAULTS, "model.gamma=1")
    with pytest.raises(ConfigError):
        apply_override(DEFAULTS, "model.beta")


@pytest.mark.parametrize("bad", ["model.s=0.4", "time.h=0.3", "model.beta=abc", "datum.family=sech",
                                 "standing.omegas=[-1]", "convergence.h_list=[0.1, 0.05]"])
def test_validation_rejects(bad):
    with pytest.raises(ConfigError):
        load_config(None, [bad])


def test_config_file_yaml_and_json(tmp_path):
    y = tmp_path / "c.yaml"
    y.write_text("model:\n  beta: 0.5\ntime:\n  h: 0.125\n  T_final: 2.0\n")
    j = tmp_path / "c.json"
    j.write_text(json.dumps({"model": {"beta": 0.5}, "time": {"h": 0.125, "T_final": 2.0}}))
    assert load_config(str(y)) == load_config(str(j))
    assert load_config(str(y), ["model.beta=0.25"])["model"]["beta"] == 0.25


def test_unknown_key_exits_with_usage_error(tmp_path):
    with pytest.raises(SystemExit) as err:
        main(["evolve", "--out", str(tmp_path), "--set", "model.nope=1"])
    assert err.value.code == 2
    assert not (tmp_path / "manifest.json").exists()


def test_evolve_outputs_and_determinism(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["evolve", "--out", str(a), *FAST]) == 0
    assert main(["evolve", "--out", str(b), *FAST]) == 0
    man = json.loads((a / "manifest.json").read_text())
    assert man["kind"] == "evolve"
    assert man["config"]["time"]["h"] == 0.015625
    assert {"fracdelta", "numpy", "scipy", "python"} <= set(man["versions"])
    assert man["result"]["mass_drift"] < 1e-4
    for name in man["result"]["files"]:
        if name.endswith(".csv"):
            assert (a / name).read_bytes() == (b / name).read_bytes(), name
    assert "splot 'heatmap.csv'" in (a / "plot.gp").read_text()


def test_green_check(tmp_path):
    rc = main(["green-check", "--out", str(tmp_path), "--set", "green.s_list=[0.75, 1.0]", "--set", "green.lam_list=[1.0]"])
    assert rc == 0
    rows = (tmp_path / "green_check.csv").read_text().splitlines()
    assert rows[0] == "check,s,lam,value,target,tol,result"
    assert all(r.endswith("PASS") for r in rows[1:])


def test_standing_wave_command(tmp_path):
    rc = main(["standing-wave", "--out", str(tmp_path), "--set", "model.sigma=0.5", "--set", "standing.omegas=[1.0]",
               "--set", "standing.periods=0.25", "--set", "time.h=0.0078125"])
    assert rc == 0
    rows = (tmp_path / "standing_waves.csv").read_text().splitlines()
    assert "critical_zero" in rows[1]


def test_convergence_command(tmp_path):
    rc = main(["convergence", "--out", str(tmp_path), "--set", "time.T_final=0.5",
               "--set", "convergence.h_list=[0.03125, 0.015625, 0.0078125]"])
    assert rc == 0
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["result"]["expected_order"] == pytest.approx(4 / 3)


def test_blowup_scan_command(tmp_path):
    rc = main(["blowup-scan", "--out", str(tmp_path), "--set", "model.beta=1.0", "--set", "blowup.nus=[1.0]",
               "--set", "blowup.C_s=1.2", *FAST[:4]])
    assert rc == 0
    rows = (tmp_path / "blowup.csv").read_text().splitlines()
    assert "global_bounded" in rows[1]


def test_failure_returns_nonzero(tmp_path):
    # amplitude above the consistency hump: no admissible datum
    rc = main(["evolve", "--out", str(tmp_path), "--set", "datum.amplitude_re=5.0", *FAST])
    assert rc == 1
