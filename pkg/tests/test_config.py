import json

import pytest

from scatsize.config import ConfigError, RunConfig, config_from_dict, load_config
from scatsize.faran import GLASS_BEADS


def test_defaults():
    cfg = load_config(None)
    assert cfg.materials == GLASS_BEADS
    assert cfg.size_grid().size == 100 and cfg.frequency_grid().size == 61
    assert [p.name for p in cfg.phantom_specs()] == ["unimodal_narrow", "unimodal_broad", "uniform", "bimodal"]
    assert cfg.policy.max_iterations == 50 and cfg.rcond == 1e-12


def test_empty_document_equals_defaults():
    assert config_from_dict({}).to_dict() == RunConfig().to_dict()


def test_partial_materials_fall_back():
    cfg = config_from_dict({"materials": {"sphere_density": 7.8}})
    assert cfg.materials.sphere_density == 7.8
    assert cfg.materials.background_speed == GLASS_BEADS.background_speed


def test_policy_aliases():
    cfg = config_from_dict({"policy": {"mode": "contiguous-run", "theta": 0.1, "max_iterations": 1}})
    assert cfg.policy.mode == "contiguous_run"
    assert cfg.policy.threshold_fraction == 0.1


def test_phantoms():
    cfg = config_from_dict({"phantoms": [
        {"name": "pm", "kind": "point_mass", "parameters": {"size": 50}, "fraction_semantics": "mass_fraction"},
        {"kind": "uniform", "parameters": {"low": 20, "high": 30}, "bead_mass_g": 100},
    ]})
    assert [p.name for p in cfg.phantoms] == ["pm", "uniform"]
    assert cfg.phantoms[1].bead_mass == 100
    assert cfg.phantom("pm").distribution.fraction_semantics == "mass_fraction"
    with pytest.raises(ConfigError):
        cfg.phantom("nope")


@pytest.mark.parametrize("doc", [
    {"colour": "red"},
    {"sizes": {"min": 5, "max": 1, "step": 1}},
    {"sizes": {"min": 1, "max": 5, "step": 0}},
    {"policy": {"mode": "magic"}},
    {"policy": {"theta": 1.5}},
    {"rcond": 2},
    {"noise": {"variance": -1}},
    {"noise": {"trials": 0}},
    {"materials": {"sphere_poisson_ratio": 0.7}},
    {"materials": {"hardness": 3}},
    {"size_convention": "area"},
    {"phantoms": [{"kind": "point_mass", "parameters": {"size": 5}, "name": "a"},
                  {"kind": "point_mass", "parameters": {"size": 6}, "name": "a"}]},
    {"phantoms": [{"kind": "lognormal"}]},
])
def test_rejects(doc):
    with pytest.raises(ConfigError):
        config_from_dict(doc)


def test_load_from_file(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"rcond": 1e-3, "out_dir": "x"}))
    cfg = load_config(path)
    assert cfg.rcond == 1e-3 and cfg.out_dir == "x"
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(path)


def test_shipped_preset():
    from pathlib import Path

    cfg = load_config(Path(__file__).parents[1] / "configs" / "validation.json")
    assert cfg.rcond == 1e-3 and cfg.policy.max_iterations == 1 and cfg.policy.threshold_fraction == 0.05
