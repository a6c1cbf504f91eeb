import csv
import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from wentzell.cli import main
from wentzell.config import RunConfig
from wentzell.errors import ConfigError
from wentzell.expr import Expression


def write(tmp_path, payload, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(payload))
    return str(p)


def test_reference_roundtrip():
    cfg = RunConfig()
    assert RunConfig.from_json(cfg.to_json()) == cfg


@given(st.integers(2, 64), st.floats(0, 5), st.sampled_from([None, "lumped", "consistent"]),
       st.integers(0, 2**31), st.booleans())
def test_roundtrip_property(n, delta, mode, seed, plots):
    cfg = RunConfig.from_dict({"domain": {"type": "interval", "a": 0.0, "b": 2.0, "n": n},
                               "coefficients": {"delta": delta, "alpha": "1 + x"}, "mode": mode,
                               "seed": seed, "plots": plots, "times": [0.0, 0.5]})
    assert RunConfig.from_json(cfg.to_json()) == cfg


@pytest.mark.parametrize("bad", [{"nope": 1}, {"domain": {"type": "interval", "n": 8, "m": 2}},
                                 {"coefficients": {"kappa": 1}}, {"scheme": {"method": "euler"}},
                                 {"domain": {"type": "disc"}}, {"times": "soon"}, {"mode": "cheap"}])
def test_strict_rejection(bad):
    with pytest.raises(ConfigError):
        RunConfig.from_dict(bad)


def test_time_grid():
    cfg = RunConfig.from_dict({"times": {"start": 1e-3, "stop": 1.0, "num": 4, "spacing": "log"}})
    np.testing.assert_allclose(cfg.time_grid(), [1e-3, 1e-2, 1e-1, 1.0])
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"times": [0.5, 0.1]}).time_grid()


def test_expressions():
    e = Expression("1 + 2*x**2 - cos(pi*x)/exp(y)")
    pts = np.array([[0.0, 0.0], [1.0, 0.0]])
    np.testing.assert_allclose(e(pts), [0.0, 3.0 + 1.0])
    for src in ("x.__class__", "open('f')", "lambda: 1", "[1, 2]", "x if x else y"):
        with pytest.raises(ConfigError):
            Expression(src)


def test_validate_negative_delta(tmp_path, capsys):
    code = main(["validate", "--config", write(tmp_path, {"coefficients": {"delta": -1}}), "--out", str(tmp_path)])
    assert code == 1
    body = json.loads(capsys.readouterr().err)
    assert body["exit_code"] == 1 and "delta >= 0" in body["message"]


def test_eigs_count_too_large(tmp_path, capsys):
    cfg = write(tmp_path, {"domain": {"type": "interval", "n": 8}, "eigen_count": 50})
    assert main(["eigs", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert "[1, 9]" in json.loads(capsys.readouterr().err)["message"]


def test_unknown_key_exit(tmp_path, capsys):
    assert main(["eigs", "--config", write(tmp_path, {"colour": "red"}), "--out", str(tmp_path)]) == 2
    assert json.loads(capsys.readouterr().err)["error"] == "config-error"


def test_commands_and_determinism(tmp_path):
    payload = {"domain": {"type": "interval", "n": 32}, "eigen_count": 5, "plots": True,
               "times": {"start": 1e-5, "stop": 0.5, "num": 8, "spacing": "log"}}
    cfg = write(tmp_path, payload)
    outs = []
    for run in ("a", "b"):
        out = tmp_path / run
        for cmd in ("validate", "assemble", "eigs", "oracle", "evolve"):
            assert main([cmd, "--config", cfg, "--out", str(out), "--quiet"]) == 0
        outs.append(out)
    names = sorted(p.name for p in outs[0].iterdir())
    assert {"A.csv", "eigenvalues.csv", "oracle_comparison.csv", "trajectory.csv", "diagnostics.json",
            "snapshots.svg", "min_value.svg", "hypothesis_report.json", "symmetry_report.json"} <= set(names)
    for name in names:
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes(), name
    rows = list(csv.DictReader((outs[0] / "oracle_comparison.csv").open()))
    assert len(rows) == 5 and float(rows[1]["rel_error"]) < 5e-3
    eig = list(csv.DictReader((outs[0] / "eigenvalues.csv").open()))
    assert [r["k"] for r in eig] == ["1", "2", "3", "4", "5"] and max(float(r["residual"]) for r in eig) < 1e-9
    traj = list(csv.DictReader((outs[0] / "trajectory.csv").open()))
    assert len(traj) == 8 * (33 + 2) and {r["component"] for r in traj} == {"interior", "boundary"}
    diag = json.loads((outs[0] / "diagnostics.json").read_text())
    assert {"lambda1", "lambda2", "t0", "dip", "decay_fit"} <= set(diag)


def test_theta_evolve_and_2d(tmp_path):
    cfg = write(tmp_path, {"domain": {"type": "rectangle", "lx": 1, "ly": 1, "nx": 4, "ny": 4},
                           "initial": {"u1": "1 + x*y", "u2": 0.5},
                           "scheme": {"method": "theta", "theta": 1.0, "dt": 0.01},
                           "times": {"start": 0, "stop": 0.1, "num": 6}})
    assert main(["evolve", "--config", cfg, "--out", str(tmp_path / "o"), "--quiet"]) == 0
    cfg2 = write(tmp_path, {"scheme": {"method": "theta", "dt": 0.03}, "domain": {"type": "interval", "n": 8},
                            "times": [0.0, 0.1]}, "c2.json")
    assert main(["evolve", "--config", cfg2, "--out", str(tmp_path / "p"), "--quiet"]) == 2
    assert main(["oracle", "--config", cfg, "--out", str(tmp_path / "q"), "--quiet"]) == 2


def test_verify_subset(tmp_path, capsys):
    assert main(["verify", "--criteria", "10,11", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "[PASS] 10" in out and "[PASS] 11" in out
    report = json.loads((tmp_path / "acceptance.json").read_text())
    assert [r["criterion"] for r in report] == [10, 11]
