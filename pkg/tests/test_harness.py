import json

import pytest

from nlflock.harness import (
    CSV_COLUMNS,
    ConfigError,
    SweepConfig,
    run_sweep,
)


def _config(**overrides):
    base = dict(p_grid=(4.0,), alpha_grid=(0.5,), ic_set=((1.0, 1.0),),
                engine="envelope", t_end=1e5, n_samples=200, jobs=1, seed=0)
    base.update(overrides)
    return SweepConfig(**base)


def test_single_point_sweep_s1(tmp_path):
    config = _config(out_dir=str(tmp_path))
    result = run_sweep(config)
    assert len(result.rows) == 1
    row = result.rows[0]
    assert row["scenario"] == "S1"
    assert row["status"] == "ok"
    assert abs(row["V_exp_fit"] - 1 / 3) < 0.05
    assert row["region_check"] == "contained"
    assert (tmp_path / "sweep.csv").exists()
    assert (tmp_path / "sweep.json").exists()


def test_csv_schema(tmp_path):
    config = _config(out_dir=str(tmp_path))
    run_sweep(config)
    header = (tmp_path / "sweep.csv").read_text().splitlines()[0]
    assert header == ",".join(CSV_COLUMNS)


def test_config_validation():
    with pytest.raises(ConfigError, match="alpha_grid"):
        _config(alpha_grid=())
    with pytest.raises(ConfigError, match="p_grid"):
        _config(p_grid=())
    with pytest.raises(ConfigError, match="engine"):
        _config(engine="pde")
    with pytest.raises(ConfigError, match="t_end"):
        _config(t_end=0.0)


def test_config_file_round_trip():
    text = """
    p_grid = 3.5, 4
    alpha_grid = 0, 0.5
    ic = 1:1; 2:0.5
    engine = envelope
    t_end = 1e4
    n_samples = 64
    jobs = 1
    seed = 7
    """
    config = SweepConfig.from_config(text)
    assert config.p_grid == (3.5, 4.0)
    assert config.alpha_grid == (0.0, 0.5)
    assert config.ic_set == ((1.0, 1.0), (2.0, 0.5))
    assert config.seed == 7
    with pytest.raises(ConfigError, match="missing"):
        SweepConfig.from_config("p_grid = 3.5\n")
    with pytest.raises(ConfigError):
        SweepConfig.from_config("p_grid = 3.5\nalpha_grid = 0\nic = oops\n")


def test_rerun_is_byte_identical(tmp_path):
    config_a = _config(p_grid=(4.0, 2.5), out_dir=str(tmp_path / "a"),
                       t_end=1e4, n_samples=100)
    config_b = _config(p_grid=(4.0, 2.5), out_dir=str(tmp_path / "b"),
                       t_end=1e4, n_samples=100)
    run_sweep(config_a)
    run_sweep(config_b)
    assert ((tmp_path / "a" / "sweep.csv").read_bytes()
            == (tmp_path / "b" / "sweep.csv").read_bytes())


def test_parallel_rows_match_serial(tmp_path):
    serial = _config(p_grid=(4.0, 2.5), out_dir=str(tmp_path / "s"),
                     t_end=1e4, n_samples=100, jobs=1)
    parallel = _config(p_grid=(4.0, 2.5), out_dir=str(tmp_path / "p"),
                       t_end=1e4, n_samples=100, jobs=2)
    run_sweep(serial)
    run_sweep(parallel)
    assert ((tmp_path / "s" / "sweep.csv").read_bytes()
            == (tmp_path / "p" / "sweep.csv").read_bytes())


def test_row_failure_does_not_abort(tmp_path):
    config = _config(ic_set=((-1.0, 1.0), (1.0, 1.0)), out_dir=str(tmp_path),
                     t_end=1e4, n_samples=100)
    result = run_sweep(config)
    statuses = [row["status"] for row in result.rows]
    assert statuses[0].startswith("failed:")
    assert statuses[1] == "ok"


def test_row_grid_order_and_scenarios(tmp_path):
    config = _config(p_grid=(2.5, 4.0), alpha_grid=(0.5, 2.0),
                     ic_set=((1.0, 1.0),), out_dir=str(tmp_path),
                     t_end=1e4, n_samples=100)
    result = run_sweep(config, write=False)
    labels = [row["scenario"] for row in result.rows]
    assert labels == ["S2", "S3", "S1", "S4"]


def test_out_of_range_row_is_untouched(tmp_path):
    config = _config(p_grid=(1.5,), out_dir=str(tmp_path), t_end=1e3)
    result = run_sweep(config, write=False)
    row = result.rows[0]
    assert row["scenario"] == "out_of_range"
    assert row["status"] == "ok"
    assert row["V_exp_fit"] is None


def test_plot_emission(tmp_path):
    config = _config(out_dir=str(tmp_path), t_end=1e4, n_samples=100, plot=True)
    run_sweep(config)
    svgs = list(tmp_path.glob("*.svg"))
    assert len(svgs) == 1
    assert svgs[0].read_text().lstrip().startswith("<?xml")


def test_json_payload_structure(tmp_path):
    config = _config(out_dir=str(tmp_path), t_end=1e4, n_samples=100)
    run_sweep(config)
    payload = json.loads((tmp_path / "sweep.json").read_text())
    assert payload["config"]["p_grid"] == [4.0]
    assert len(payload["rows"]) == 1
    assert set(CSV_COLUMNS) <= set(payload["rows"][0])
