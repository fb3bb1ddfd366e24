import pytest

from lagmhd.config import ConfigError, load_config, parse_config, shipped_scenarios

MINIMAL = """
[params]
gamma = 1.4

[grid]
L = 8.0
N = 65

[initial]
kind = "gaussian_vacuum"
"""


def test_minimal_config_gets_documented_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg.stepping.cfl_fraction == 0.5
    assert cfg.stepping.dt_max == 1e-2
    assert cfg.stepping.output_every == 10
    assert cfg.params.lam == 1.0 and cfg.params.gamma == 1.4
    assert cfg.verify.energy_tol == 1e-3


def test_resolved_dict_echoes_every_default():
    resolved = parse_config(MINIMAL, name="demo").as_dict()
    assert resolved["name"] == "demo"
    assert resolved["stepping"]["cfl"] == 0.5
    assert resolved["params"]["lambda"] == 1.0
    assert resolved["initial"]["w_amp"] == [0.0, 0.0]


def test_gamma_below_one_is_rejected():
    with pytest.raises(ConfigError, match="gamma must exceed 1"):
        parse_config(MINIMAL.replace("1.4", "0.9"))


def test_heat_conductivity_key_is_explained():
    with pytest.raises(ConfigError, match="zero heat conductivity"):
        parse_config(MINIMAL.replace("gamma = 1.4", "kappa = 0.1"))


def test_unknown_key_and_section_rejected():
    with pytest.raises(ConfigError, match="unknown key 'dx'"):
        parse_config(MINIMAL + "dx = 1\n")
    with pytest.raises(ConfigError, match=r"unknown section \[solver\]"):
        parse_config(MINIMAL + "[solver]\nx = 1\n")


def test_missing_grid_is_rejected():
    with pytest.raises(ConfigError, match=r"\[grid\]"):
        parse_config('[initial]\nkind = "all_zero"\n')


def test_parse_error_reports_line():
    with pytest.raises(ConfigError, match="line 3"):
        parse_config("[grid]\nL = 8.0\nN = = 3\n")


def test_bad_initial_kind_is_rejected():
    with pytest.raises(ConfigError, match="unknown initial family"):
        parse_config(MINIMAL.replace("gaussian_vacuum", "shock_tube"))


def test_missing_file_is_reported(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "absent.toml")


def test_shipped_scenarios_load():
    shipped = shipped_scenarios()
    assert {"gaussian_vacuum", "compact_support", "point_vacuum", "positive_floor",
            "all_zero", "top_hat"} <= set(shipped)
    for name, path in shipped.items():
        cfg = load_config(path)
        assert cfg.name == name
    ref = load_config(shipped["gaussian_vacuum"])
    assert (ref.grid.half_width, ref.grid.n_nodes, ref.stepping.t_end) == (20.0, 2048, 1.0)
