"""Configuration schema, object construction, and the CLI end to end."""

import json

import pytest

from coupledbd.cli import main
from coupledbd.config import (
    config_hash,
    load_config,
    model_from_config,
    potential_from_config,
    torus_from_config,
    validate_config,
)
from coupledbd.errors import ConfigError
from coupledbd.models import BdlpInGlauber, BranchingInGlauber, GlauberGlauber, TwoBdlp


def _step(height, cutoff):
    return {"kind": "step", "height": height, "cutoff": cutoff}


def _gg_config(**check):
    cfg = {
        "model": {
            "variant": "glauber_glauber",
            "params": {
                "z_minus": 0.3, "z_plus": 0.3,
                "psi": _step(0.5, 1.0),
                "phi_minus": _step(0.5, 1.0),
                "phi_plus": _step(0.5, 1.0),
            },
        },
        "torus": {"side": 10.0, "dim": 1},
    }
    if check:
        cfg["check"] = check
    return cfg


def _write(tmp_path, cfg, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def test_validate_accepts_a_complete_config():
    cfg = _gg_config(c_minus=0.5, c_plus=1.0)
    assert validate_config(cfg) is cfg


def test_validate_rejects_unknown_keys_and_variants():
    cfg = _gg_config()
    cfg["extra"] = 1
    with pytest.raises(ConfigError):
        validate_config(cfg)
    cfg = _gg_config()
    cfg["model"]["params"]["z_wrong"] = 1.0
    with pytest.raises(ConfigError):
        validate_config(cfg)
    cfg = _gg_config()
    cfg["model"]["variant"] = "unknown"
    with pytest.raises(ConfigError):
        validate_config(cfg)


def test_validate_rejects_out_of_range_values():
    cfg = _gg_config()
    cfg["model"]["params"]["z_minus"] = -0.1
    with pytest.raises(ConfigError):
        validate_config(cfg)
    cfg = _gg_config()
    cfg["torus"]["dim"] = 4
    with pytest.raises(ConfigError):
        validate_config(cfg)
    cfg = _gg_config()
    del cfg["torus"]
    with pytest.raises(ConfigError):
        validate_config(cfg)


def test_potential_from_config_covers_all_kinds():
    assert potential_from_config(None).is_zero
    assert potential_from_config({"kind": "zero"}).is_zero
    p = potential_from_config(_step(0.5, 1.0))
    assert p.kind == "step" and p.cutoff == 1.0
    e = potential_from_config({"kind": "exponential", "amplitude": 1.0,
                               "decay": 2.0, "cutoff": 1.5})
    assert e.kind == "exponential"
    t = potential_from_config({"kind": "table", "radii": [0.0, 1.0, 2.0],
                               "values": [1.0, 0.5, 0.0]})
    assert t.kind == "table"
    with pytest.raises(ConfigError):
        potential_from_config({"kind": "step", "cutoff": 1.0})
    with pytest.raises(ConfigError):
        potential_from_config({"kind": "step", "height": -1.0, "cutoff": 1.0})


def test_model_from_config_builds_every_variant():
    m = model_from_config(_gg_config())
    assert isinstance(m, GlauberGlauber) and m.z_minus == 0.3
    b = model_from_config({
        "model": {"variant": "bdlp_in_glauber", "params": {
            "z_minus": 0.3, "m_plus": 1.0, "psi": _step(0.5, 1.0),
            "a_minus": _step(0.6, 0.5), "a_plus": _step(0.5, 0.5),
            "b_minus": _step(0.4, 0.5), "b_plus": _step(0.3, 0.5)}},
        "torus": {"side": 10.0, "dim": 1}})
    assert isinstance(b, BdlpInGlauber) and b.a_minus.kind == "step"
    r = model_from_config({
        "model": {"variant": "branching_in_glauber", "params": {
            "z_minus": 0.3, "m_plus": 2.0, "psi": _step(0.5, 1.0),
            "kappa": _step(0.2, 0.5), "phi": _step(0.1, 0.5),
            "a_plus": _step(0.1, 0.5)}},
        "torus": {"side": 10.0, "dim": 1}})
    assert isinstance(r, BranchingInGlauber)
    t = model_from_config({
        "model": {"variant": "two_bdlp", "params": {
            "z": 0.5, "m_minus": 1.0, "m_plus": 1.0,
            "a_minus": _step(0.3, 0.5), "a_plus": _step(0.2, 0.5),
            "b_minus": _step(0.3, 0.5), "b_plus": _step(0.2, 0.5),
            "vphi_minus": _step(0.3, 0.5), "vphi_plus": _step(0.2, 0.5)}},
        "torus": {"side": 10.0, "dim": 1}})
    assert isinstance(t, TwoBdlp)
    # omitted potentials default to zero
    g = model_from_config({
        "model": {"variant": "glauber_glauber",
                  "params": {"z_minus": 0.5, "z_plus": 0.1}},
        "torus": {"side": 10.0, "dim": 1}})
    assert g.psi.is_zero and g.phi_plus.is_zero


def test_torus_from_config():
    t = torus_from_config(_gg_config())
    assert t.side == 10.0 and t.dim == 1


def test_config_hash_is_canonical():
    a = {"torus": {"side": 10.0, "dim": 1}, "model": {"variant": "x", "params": {}}}
    b = {"model": {"params": {}, "variant": "x"}, "torus": {"dim": 1, "side": 10.0}}
    assert config_hash(a) == config_hash(b)
    assert len(config_hash(a)) == 16
    b["torus"]["side"] = 9.0
    assert config_hash(a) != config_hash(b)


def test_load_config_error_paths(tmp_path):
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "missing.json"))
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(str(bad))


# ---------------------------------------------------------------------------
# CLI end to end

def test_cli_check_feasible(tmp_path):
    cfg = _gg_config(c_minus=0.5, c_plus=1.0)
    out = tmp_path / "out"
    code = main(["check", _write(tmp_path, cfg), "--out", str(out)])
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert report["feasible"] is True
    assert report["environment"]["a"] < 2.0
    man = json.loads((out / "manifest.json").read_text())
    assert man["command"] == "check"
    assert man["config_hash"] == config_hash(cfg)
    assert "report.json" in man["outputs"]


def test_cli_check_infeasible_weights_exit3(tmp_path):
    cfg = _gg_config(c_minus=3.0, c_plus=3.0)
    out = tmp_path / "out"
    code = main(["check", _write(tmp_path, cfg), "--out", str(out)])
    assert code == 3
    report = json.loads((out / "report.json").read_text())
    assert report["feasible"] is False


def test_cli_check_scan_with_no_feasible_regime_exit3(tmp_path):
    cfg = _gg_config(scan=True)
    cfg["model"]["params"]["z_minus"] = 50.0
    cfg["model"]["params"]["z_plus"] = 50.0
    out = tmp_path / "out"
    code = main(["check", _write(tmp_path, cfg), "--out", str(out)])
    assert code == 3
    assert (out / "scan.csv").exists()
    man = json.loads((out / "manifest.json").read_text())
    assert man["summary"]["feasible"] is False


def test_cli_rejects_broken_configs(tmp_path):
    missing = str(tmp_path / "none.json")
    assert main(["check", missing, "--out", str(tmp_path / "o1")]) == 2
    bad_schema = _gg_config()
    bad_schema["torus"]["dim"] = 9
    assert main(["check", _write(tmp_path, bad_schema, "a.json"),
                 "--out", str(tmp_path / "o2")]) == 2
    # interaction range exceeding half the torus side
    too_small = _gg_config(c_minus=0.5, c_plus=1.0)
    too_small["torus"]["side"] = 1.5
    assert main(["check", _write(tmp_path, too_small, "b.json"),
                 "--out", str(tmp_path / "o3")]) == 2


def test_cli_invariant_writes_summary_and_correlations(tmp_path):
    cfg = _gg_config()
    cfg["invariant"] = {"grid_points": 32, "order": 2}
    out = tmp_path / "out"
    code = main(["invariant", _write(tmp_path, cfg), "--out", str(out)])
    assert code == 0
    summ = json.loads((out / "summary.json").read_text())
    assert summ["converged"] is True
    assert summ["positivity_ok"] is True
    assert 0.0 < summ["density"] < 0.3
    assert "min_pairing" in summ and "symmetry_defect" in summ
    lines = (out / "correlations.csv").read_text().strip().splitlines()
    assert lines[0] == "r,pair_correlation"
    assert len(lines) > 2


def test_cli_evolve_writes_a_trajectory(tmp_path):
    cfg = _gg_config()
    cfg["evolve"] = {"t_final": 0.5, "dt": 0.01, "grid_points": 32,
                     "order": 1, "initial_density": 2.0}
    out = tmp_path / "out"
    code = main(["evolve", _write(tmp_path, cfg), "--out", str(out)])
    assert code == 0
    lines = (out / "trajectory.csv").read_text().strip().splitlines()
    assert lines[0] == "t,density"
    first = [float(v) for v in lines[1].split(",")]
    last = [float(v) for v in lines[-1].split(",")]
    assert first[0] == 0.0 and first[1] == pytest.approx(2.0)
    assert last[0] == pytest.approx(0.5)
    # density relaxes downward toward the invariant value
    assert last[1] < 2.0
    summ = json.loads((out / "summary.json").read_text())
    assert summ["final_density"] == pytest.approx(last[1], rel=1e-9)


def test_cli_simulate_artifacts_and_seed_override(tmp_path):
    cfg = _gg_config()
    cfg["simulate"] = {"t_end": 2.0, "n_replicas": 3, "n_times": 5,
                       "sys_density": 0.3, "env_density": 0.3, "seed": 5}
    path = _write(tmp_path, cfg)
    out1, out2, out3 = (tmp_path / n for n in ("o1", "o2", "o3"))
    assert main(["simulate", path, "--out", str(out1), "--seed", "99"]) == 0
    assert main(["simulate", path, "--out", str(out2), "--seed", "99"]) == 0
    assert main(["simulate", path, "--out", str(out3), "--seed", "100"]) == 0
    d1 = (out1 / "densities.csv").read_text()
    assert d1 == (out2 / "densities.csv").read_text()
    assert d1 != (out3 / "densities.csv").read_text()
    assert len(d1.strip().splitlines()) == 6
    ev = json.loads((out1 / "events.json").read_text())
    assert ev["n_replicas"] == 3 and ev["total_events"] > 0


def test_cli_ergodicity_fits_the_free_rate(tmp_path):
    cfg = {
        "model": {"variant": "glauber_glauber",
                  "params": {"z_minus": 0.5, "z_plus": 0.1}},
        "torus": {"side": 10.0, "dim": 1},
        "ergodicity": {"n_replicas": 150, "t_end": 4.0, "n_times": 17,
                       "initial_density": 1.5, "target_density": 0.5,
                       "seed": 1, "c_minus": 10.0},
    }
    out = tmp_path / "out"
    code = main(["ergodicity", _write(tmp_path, cfg), "--out", str(out)])
    assert code == 0
    fit = json.loads((out / "fit.json").read_text())
    assert fit["lambda_0"] == pytest.approx(0.95)
    assert abs(fit["rate"] - 1.0) < 0.2
    assert fit["rate_consistent_with_gap"] is True
    lines = (out / "gaps.csv").read_text().strip().splitlines()
    assert lines[0] == "t,gap,se" and len(lines) == 18


def test_cli_ergodicity_requires_its_section(tmp_path):
    cfg = _gg_config()
    assert main(["ergodicity", _write(tmp_path, cfg),
                 "--out", str(tmp_path / "o")]) == 2


def test_cli_averaging_runs_a_small_sweep(tmp_path):
    cfg = _gg_config()
    cfg["averaging"] = {"epsilons": [1.0, 0.5], "n_replicas": 8,
                        "t_end": 2.0, "sys_density": 0.3, "n_times": 5,
                        "seed": 3, "grid_points": 32}
    out = tmp_path / "out"
    code = main(["averaging", _write(tmp_path, cfg), "--out", str(out)])
    assert code == 0
    res = json.loads((out / "result.json").read_text())
    assert res["epsilons"] == [1.0, 0.5]
    assert len(res["distances"]) == 2
    assert 0.0 < res["lambda_bar"] <= 1.0
    lines = (out / "densities.csv").read_text().strip().splitlines()
    assert lines[0] == "t,averaged_mean,averaged_se,eps1_mean,eps1_se,eps0.5_mean,eps0.5_se"
    assert len(lines) == 6
    assert (out / "distances.csv").exists()
