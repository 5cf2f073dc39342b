import json

import numpy as np
import pytest

from nlflock.cli import main


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, out


def test_classify_json(capsys):
    code, out = run_cli(capsys, "classify", "--p", "4", "--alpha", "0.5")
    assert code == 0
    payload = json.loads(out)
    assert payload["label"] == "S1"
    assert payload["predicted_V_exponent"] == pytest.approx(1 / 3)


def test_classify_s0_inf_encoding(capsys):
    code, out = run_cli(capsys, "classify", "--p", "2", "--alpha", "0.5")
    assert code == 0
    assert json.loads(out)["predicted_V_exponent"] == "inf"


def test_regions_d0_star(capsys):
    code, out = run_cli(capsys, "regions", "--p", "2.5", "--alpha", "1.5",
                        "--lambdaC", "1")
    assert code == 0
    payload = json.loads(out)
    assert payload["constants"]["D0_star"] == pytest.approx(0.3849, abs=2e-4)


def test_regions_s1_boxes(capsys):
    code, out = run_cli(capsys, "regions", "--p", "4", "--alpha", "0",
                        "--lambdaC", "1", "--LambdaC", "1",
                        "--d0", "1", "--v0", "1")
    assert code == 0
    payload = json.loads(out)
    assert payload["constants"]["M"] == pytest.approx(1.0)
    assert payload["constants"]["m"] == pytest.approx(0.5)
    upper = payload["regions"][0]
    assert upper["D_interval"] == [0.0, 2.0]
    lower = payload["regions"][1]
    assert lower["D_interval"][1] == "inf"


def test_simulate_then_fit(tmp_path, capsys):
    prefix = str(tmp_path / "pair")
    code, _ = run_cli(capsys, "simulate", "--p", "2.5", "--kernel", "capped_power",
                      "--alpha", "0.5", "--x0", "1", "--v0", "1",
                      "--t-end", "1e5", "--samples", "200", "--out", prefix)
    assert code == 0
    assert (tmp_path / "pair_traj.csv").exists()
    assert (tmp_path / "pair_meta.json").exists()
    code, out = run_cli(capsys, "fit", "--traj", prefix + "_traj.csv",
                        "--field", "V", "--t-lo", "1e3", "--t-hi", "1e5")
    assert code == 0
    fit = json.loads(out)
    assert abs(fit["exponent"] - 2.0) < 0.05


def test_envelope_coords_column(tmp_path, capsys):
    prefix = str(tmp_path / "env")
    code, _ = run_cli(capsys, "envelope", "--p", "4", "--alpha", "0.5",
                      "--C", "1", "--coords", "S1", "--t-end", "20",
                      "--samples", "50", "--out", prefix)
    assert code == 0
    header, first = (tmp_path / "env_traj.csv").read_text().splitlines()[:2]
    assert header == "t,D,V,momentum,coords"
    assert first.endswith(",S1")


def test_envelope_borderline_then_fit(tmp_path, capsys):
    # p = 3 with a globally lower-bounded kernel: V ~ 1/t with no log
    # correction, D ~ log t
    prefix = str(tmp_path / "bl")
    code, _ = run_cli(capsys, "envelope", "--p", "3", "--alpha", "0",
                      "--kernel", "constant_floor", "--floor", "1", "--C", "1",
                      "--t-end", "1e6", "--samples", "300", "--out", prefix)
    assert code == 0
    code, out = run_cli(capsys, "fit", "--traj", prefix + "_traj.csv",
                        "--field", "V", "--t-lo", "1e3", "--t-hi", "1e6")
    assert code == 0
    assert abs(json.loads(out)["exponent"] - 1.0) < 0.05
    code, out = run_cli(capsys, "fit", "--traj", prefix + "_traj.csv",
                        "--field", "V", "--log-corrected", "--alpha", "0",
                        "--t-lo", "1e3", "--t-hi", "1e6")
    assert code == 0
    assert abs(json.loads(out)["log_power"]) < 0.1


def test_check_lyapunov(tmp_path, capsys):
    prefix = str(tmp_path / "ly")
    run_cli(capsys, "envelope", "--p", "2.5", "--alpha", "0.5",
            "--kernel", "capped_power", "--C", "1", "--t-end", "1e4",
            "--samples", "150", "--out", prefix)
    code, out = run_cli(capsys, "check", "--traj", prefix + "_traj.csv",
                        "--check", "lyapunov", "--p", "2.5", "--alpha", "0.5",
                        "--lambdaC", "1")
    assert code == 0
    assert json.loads(out)["monotone"] is True


def test_check_containment_via_region_file(tmp_path, capsys):
    prefix = str(tmp_path / "raw")
    run_cli(capsys, "envelope", "--p", "4", "--alpha", "0.3", "--C", "1",
            "--kernel", "capped_power", "--t-end", "1e4",
            "--samples", "100", "--out", prefix)
    code, out = run_cli(capsys, "regions", "--p", "4", "--alpha", "0.3",
                        "--lambdaC", "1", "--LambdaC", "1",
                        "--d0", "1", "--v0", "1")
    region_path = tmp_path / "regions.json"
    region_path.write_text(out)
    code, out = run_cli(capsys, "check", "--traj", prefix + "_traj.csv",
                        "--check", "containment", "--region-file", str(region_path),
                        "--region-index", "0", "--p", "4", "--alpha", "0.3",
                        "--tol", "1e-7")
    assert code == 0
    assert json.loads(out)["contained"] is True


def test_sweep_flags_and_determinism(tmp_path, capsys):
    out_a, out_b = str(tmp_path / "a"), str(tmp_path / "b")
    for out_dir in (out_a, out_b):
        code, _ = run_cli(capsys, "sweep", "--p-grid", "4", "--alpha-grid", "0.5",
                          "--ic", "1:1", "--t-end", "1e4", "--samples", "100",
                          "--out", out_dir)
        assert code == 0
    a = (tmp_path / "a" / "sweep.csv").read_bytes()
    b = (tmp_path / "b" / "sweep.csv").read_bytes()
    assert a == b
    first_row = a.decode().splitlines()[1]
    assert first_row.startswith("4.0,0.5,1.0,1.0,S1,")


def test_sweep_config_error_exit_code(capsys):
    code = main(["sweep", "--p-grid", "4", "--alpha-grid", "", "--ic", "1:1"])
    assert code == 2


def test_usage_errors_exit_nonzero():
    with pytest.raises(SystemExit) as info:
        main(["classify", "--p", "4", "--unknown-flag", "1"])
    assert info.value.code == 2
    with pytest.raises(SystemExit) as info:
        main(["classify", "--alpha", "0.5"])  # missing required --p
    assert info.value.code == 2


def test_domain_error_exit_code(capsys):
    code = main(["classify", "--p", "0.5", "--alpha", "0"])
    assert code == 1


def test_simulate_nbody_momentum_column(tmp_path, capsys):
    prefix = str(tmp_path / "many")
    code, _ = run_cli(capsys, "simulate", "--p", "2.5", "--kernel", "smooth_tail",
                      "--alpha", "0.5", "--n", "6", "--dim", "2", "--seed", "3",
                      "--t-end", "10", "--samples", "30", "--out", prefix)
    assert code == 0
    rows = (tmp_path / "many_traj.csv").read_text().splitlines()
    assert rows[0] == "t,D,V,momentum"
    momenta = np.array([float(r.split(",")[3]) for r in rows[1:]])
    assert np.max(np.abs(momenta - momenta[0])) < 1e-9
