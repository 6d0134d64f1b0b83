import io
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from adsmc.errors import ConfigError, ContractViolation
from adsmc.harness import COLUMNS, load_config, parse_config, run_scenario
from adsmc.harness.compare import compare, improvement, sweep
from adsmc.harness.config import TrajectoryConfig, tuned_rho, with_updates
from adsmc.harness.trajectories import reference_grid

SHORT = {"horizon": 8.0, "transient_cut": 2.0}


def test_empty_mapping_is_nominal_scenario():
    cfg = parse_config({})
    assert cfg.mode == "second-order-siso" and cfg.T == 0.08 and cfg.bits == 16
    assert cfg.resolved_rho() == tuned_rho(0.08)


def test_rho_rescales_with_period():
    a, b = parse_config({"T": 0.02}), parse_config({"T": 0.08})
    np.testing.assert_allclose(np.array(a.resolved_rho()) * 16, b.resolved_rho())
    assert parse_config({"gains": {"rho": [1, 2, 3, 4]}}).resolved_rho() == (1, 2, 3, 4)


def test_every_violation_listed():
    bad = {"horizon": 1.0, "transient_cut": 2.0, "T": 0.003, "bits": 1,
           "gains": {"beta": [0.5, 1.5, 0.5, 0.5], "rho": [1, -1, 1, 1]},
           "limits": {"lo": [0, 0, 0, 0], "hi": [1, 0, 1, 1]}}
    with pytest.raises(ConfigError) as exc:
        parse_config(bad)
    text = " ".join(exc.value.violations)
    for needle in ("horizon", "integer multiple", "bits", "gains.beta[mdot_f]",
                   "gains.rho[mdot_f]", "limits[1]"):
        assert needle in text
    assert len(exc.value.violations) >= 6


def test_unknown_fields_and_bad_types_rejected():
    with pytest.raises(ConfigError, match="gainz"):
        parse_config({"gainz": {}})
    with pytest.raises(ConfigError):
        parse_config({"mode": "fourth-order"})
    with pytest.raises(ConfigError):
        parse_config({"seed": -1})
    with pytest.raises(ConfigError):
        parse_config({"seed": 2**64})
    parse_config({"seed": 2**64 - 1})


def test_coupling_rules():
    with pytest.raises(ConfigError, match="only valid"):
        parse_config({"gains": {"coupling": [{"row": "AFR", "col": "speed", "value": 0.1}]}})
    with pytest.raises(ConfigError, match="diagonal"):
        parse_config({"mode": "second-order-mimo",
                      "gains": {"coupling": [{"row": "AFR", "col": 1, "value": 0.1}]}})
    with pytest.raises(ConfigError, match="spectral radius"):
        parse_config({"mode": "second-order-mimo", "gains": {
            "beta": [0.9, 0.9, 0.5, 0.5],
            "coupling": [{"row": 0, "col": 1, "value": 0.5}, {"row": 1, "col": 0, "value": 0.5}]}})
    cfg = parse_config({"mode": "second-order-mimo",
                        "gains": {"coupling": [{"row": "AFR", "col": "speed", "value": 0.1}]}})
    assert cfg.beta_matrix()[1, 3] == 0.1


def test_yaml_loading(tmp_path):
    p = tmp_path / "s.yaml"
    p.write_text("name: x\nT: 0.02\ngains:\n  beta: [0.5, 0.5, 0.5, 0.5]\n")
    assert load_config(p).T == 0.02
    p.write_text("")
    assert load_config(p).name == "scenario"
    p.write_text("- 1\n- 2\n")
    with pytest.raises(ConfigError):
        load_config(p)
    p.write_text("a: [1\n")
    with pytest.raises(ConfigError):
        load_config(p)


def test_with_updates_dotted():
    cfg = with_updates(parse_config({}), gains__adapt=False, T=0.02)
    assert not cfg.gains.adapt and cfg.T == 0.02


@pytest.mark.parametrize("kind", ["constant", "steps", "ramps", "cold-start"])
def test_trajectories_deterministic(kind):
    cfg = TrajectoryConfig(kind=kind)
    a = reference_grid(cfg, 3, 0.002, 20000)
    b = reference_grid(cfg, 3, 0.002, 20000)
    assert a.shape == (20000, 3)
    np.testing.assert_array_equal(a, b)
    assert np.all(np.isfinite(a)) and np.all(a[:, 2] > 0)


def test_trajectory_seed_matters_and_spans_respected():
    cfg = TrajectoryConfig(kind="steps")
    a, b = reference_grid(cfg, 1, 0.01, 4000), reference_grid(cfg, 2, 0.01, 4000)
    assert not np.array_equal(a, b)
    assert a[:, 0].min() >= 620 - 1e-9 and a[:, 0].max() <= 700 + 1e-9
    assert a[:, 1].min() >= 14.0 - 1e-9 and a[:, 1].max() <= 15.2 + 1e-9


def test_run_is_bit_identical():
    cfg = parse_config({**SHORT, "alpha_true": [1.2, 0.9, 1.1, 0.8]})
    assert run_scenario(cfg).csv_text() == run_scenario(cfg).csv_text()


def test_csv_schema():
    res = run_scenario(parse_config(SHORT))
    lines = res.csv_text().splitlines()
    assert lines[0].startswith("# scenario: ")
    header = json.loads(lines[0][len("# scenario: "):])
    assert header["gains"]["rho"] == list(tuned_rho(0.08))
    assert lines[1].split(",") == list(COLUMNS)
    assert len(lines) - 2 == res.data.shape[0] == int(SHORT["horizon"] / 0.002)
    data = np.loadtxt(io.StringIO("\n".join(lines[2:])), delimiter=",")
    np.testing.assert_allclose(data, res.data, rtol=1e-11)


def test_nominal_run_tracks():
    rep = run_scenario(parse_config({"horizon": 20.0})).report
    assert not rep.diverged
    assert rep.mean_error["T_exh"] < 1.0
    assert rep.mean_error["AFR"] < 0.2
    assert rep.mean_error["speed"] < 2.0


def test_single_sample_window():
    rep = run_scenario(parse_config({"horizon": 2.002, "transient_cut": 2.0})).report
    assert rep.samples == 1
    assert all(np.isfinite(v) for v in rep.mean_error.values())


def test_transient_cut_beyond_convergence():
    base = {"alpha_true": [1.5] * 4, "trajectory": {"kind": "constant"}}
    a = run_scenario(parse_config({**base, "transient_cut": 10.0})).report
    b = run_scenario(parse_config({**base, "transient_cut": 15.0})).report
    assert a.convergence_time is not None and a.convergence_time < 10.0
    for k in a.mean_error:
        assert abs(b.mean_error[k] - a.mean_error[k]) < 0.01 * a.mean_error[k]


def test_divergence_flagged_not_raised():
    # friction with the wrong sign accelerates the engine beyond any air-mass command
    res = run_scenario(parse_config({**SHORT, "alpha_true": [1.0, 1.0, 1.0, -50.0]}))
    assert res.report.diverged and res.report.diverged_at is not None
    assert res.data.shape[0] < int(SHORT["horizon"] / 0.002)


def test_compare_identical_is_zero():
    cfg = parse_config(SHORT)
    c = compare(cfg, cfg)
    assert all(v == 0.0 for v in c.improvement.values())


@given(a=st.floats(1e-3, 1e3), b=st.floats(1e-3, 1e3))
def test_improvement_antisymmetry(a, b):
    # swapping arguments maps x to -x/(1 - x/100)
    x, y = improvement(a, b), improvement(b, a)
    assert y == pytest.approx(-x / (1 - x / 100), rel=1e-6)


def test_compare_mismatch_rejected():
    a = parse_config(SHORT)
    for change in ({"horizon": 9.0}, {"seed": 5}, {"trajectory": {"kind": "ramps"}}):
        with pytest.raises(ContractViolation):
            compare(a, parse_config({**SHORT, **change}))


def test_comparison_table_layout():
    cfg_a = parse_config({**SHORT, "name": "second"})
    cfg_b = parse_config({**SHORT, "name": "first", "mode": "first-order-siso"})
    c = compare(cfg_a, cfg_b)
    table = c.to_table()
    assert "first (ref)" in table and "speed [RPM]" in table
    assert c.to_csv().splitlines()[2] == "channel,unit,mean_error_b,mean_error_a,improvement_pct"


def test_single_value_sweep_equals_run():
    cfg = parse_config(SHORT)
    s = sweep("T", cfg, [0.08])
    assert s.reports[0].mean_error == run_scenario(cfg).report.mean_error


def test_sweep_t_layout_and_flags():
    s = sweep("T", parse_config(SHORT), [0.02, 0.08])
    assert [r[0] for r in s.matrix()] == [0.02, 0.08]
    assert s.header[:5] == ["T", "mean_T_exh", "mean_AFR", "mean_m_a", "mean_speed"]
    assert len(s.to_csv().splitlines()) == 3 + len(s.flags)


def test_bits_sweep_first_order_non_decreasing():
    s = sweep("bits", parse_config({**SHORT, "horizon": 12.0, "mode": "first-order-siso"}),
              [16, 10])
    for k in ("T_exh", "AFR", "m_a", "speed"):
        assert s.reports[1].mean_error[k] >= s.reports[0].mean_error[k]


def test_sweep_parallel_matches_serial():
    cfg = parse_config(SHORT)
    serial = sweep("uncertainty", cfg, [0.8, 1.2])
    pooled = sweep("uncertainty", cfg, [0.8, 1.2], workers=2)
    assert [r.mean_error for r in serial.reports] == [r.mean_error for r in pooled.reports]


def test_sweep_unknown_axis():
    with pytest.raises(ConfigError):
        sweep("gain", parse_config(SHORT))
