"""Config file parsing and validation."""

import pytest

from uodkit.config import ConfigError, PipelineConfig, load_config, parse_config_text


def test_defaults_match_documented_values():
    config = PipelineConfig(archive_dir="a", output_dir="o", seed=1)
    assert config.n_eigenvectors == 3
    assert config.thresh == 1.02
    assert config.alpha == 0.7
    assert config.iou_threshold == 0.1
    assert config.top_p == 20
    assert config.t_bg == 0.8
    assert config.temperature == 0.07
    assert config.k_max == 10
    config.validate()


def test_parse_values():
    doc = parse_config_text(
        """
        # a comment
        archive_dir = "in"
        seed = 7
        thresh = 1.05
        binarize_affinity = false
        k_range = [2, 12]
        workers = 2  # trailing comment
        """
    )
    assert doc == {
        "archive_dir": "in",
        "seed": 7,
        "thresh": 1.05,
        "binarize_affinity": False,
        "k_range": [2, 12],
        "workers": 2,
    }


def write_config(tmp_path, text):
    path = tmp_path / "run.toml"
    path.write_text(text)
    return path


def test_seed_is_mandatory(tmp_path):
    path = write_config(tmp_path, 'archive_dir = "a"\noutput_dir = "o"\n')
    with pytest.raises(ConfigError, match="seed"):
        load_config(path)


def test_unknown_key_rejected(tmp_path):
    path = write_config(
        tmp_path, 'archive_dir = "a"\noutput_dir = "o"\nseed = 1\nbogus = 3\n'
    )
    with pytest.raises(ConfigError, match="bogus"):
        load_config(path)


def test_overrides_win(tmp_path):
    path = write_config(tmp_path, 'archive_dir = "a"\noutput_dir = "o"\nseed = 1\n')
    config = load_config(path, {"seed": 9, "output_dir": "new"})
    assert config.seed == 9
    assert config.output_dir == "new"


def test_invalid_values_rejected(tmp_path):
    path = write_config(
        tmp_path, 'archive_dir = "a"\noutput_dir = "o"\nseed = 1\nalpha = 1.5\n'
    )
    with pytest.raises(ConfigError, match="alpha"):
        load_config(path)
