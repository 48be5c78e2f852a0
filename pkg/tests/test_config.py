import pytest

from bayesfda.config import AnalysisConfig, from_mapping, load_config, parse_config
from bayesfda.errors import InvalidInputError


def test_defaults():
    c = AnalysisConfig()
    assert (c.grid_1d, c.grid_2d, c.grid_3d) == (128, 64, 32)
    assert c.eps_floor == 1e-9 and c.pad_factor == 0.5
    assert (c.spline_k, c.spline_order) == (13, 4)
    assert c.p_cut == 0.99 and c.agg_fraction == 0.30
    assert c.k is None and c.fixed_bandwidth is None


def test_text_round_trip():
    c = AnalysisConfig(grid_3d=16, bandwidth="0.25", cluster_k="3", seed=7)
    back = parse_config(c.to_text())
    assert back == c
    assert back.fixed_bandwidth == 0.25 and back.k == 3


def test_parse_comments_and_blank_lines(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# settings\n\ngrid_1d = 64   # coarser\np_cut=0.975\n")
    c = load_config(path)
    assert c.grid_1d == 64 and c.p_cut == 0.975


@pytest.mark.parametrize("text", [
    "grid_1d = 64\ngrid_1d = 32\n",
    "nonsense\n",
    "colour = red\n",
    "grid_1d = 2.5\n",
    "grid_1d = 2\n",
    "bandwidth = scott\n",
    "bandwidth = -1\n",
    "p_cut = 1.0\n",
    "agg_fraction = 0\n",
    "cluster_k = 0\n",
    "spline_k = 3\n",
])
def test_invalid_configs(text):
    with pytest.raises(InvalidInputError):
        parse_config(text)


def test_missing_file(tmp_path):
    with pytest.raises(InvalidInputError):
        load_config(tmp_path / "none.cfg")


def test_overrides_and_echo():
    c = AnalysisConfig().with_overrides(grid_1d=64, seed=None, output_dir="elsewhere")
    assert c.grid_1d == 64 and c.seed == 0 and c.output_dir == "elsewhere"
    assert "output_dir" not in c.echo()
    assert from_mapping({"n_min": "40"}).n_min == 40
