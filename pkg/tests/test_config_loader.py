from pathlib import Path

import pytest

from src.nsdp.config_loader import load_config, merge_overrides

SHIPPED_CONFIG = Path(__file__).parent.parent / "config" / "nsdp.yaml"


def write_yaml(tmp_path: Path, text: str) -> Path:
    path = tmp_path / "run.yaml"
    path.write_text(text)
    return path


class TestLoadConfig:
    def test_missing_file(self, tmp_path):
        """A missing path is reported with the path in the message"""
        with pytest.raises(FileNotFoundError, match="Config file not found"):
            load_config(tmp_path / "absent.yaml")

    @pytest.mark.parametrize(
        "text, message",
        [
            ("seed: [1, 2", "Invalid YAML"),
            ("", "is empty"),
            ("- bellman\n- euler", "must contain a dictionary"),
        ],
    )
    def test_rejected_content(self, tmp_path, text, message):
        with pytest.raises(ValueError, match=message):
            load_config(write_yaml(tmp_path, text))

    def test_nested_sections_unvalidated(self, tmp_path):
        """Sections come back as parsed; unknown keys are left for RunConfig"""
        path = write_yaml(
            tmp_path,
            "seed: 7\ntolerances:\n  policy_tol: 1.0e-8\nchecks: [bellman, euler]\nextra: 1\n",
        )
        config = load_config(str(path))
        assert config == {
            "seed": 7,
            "tolerances": {"policy_tol": 1e-8},
            "checks": ["bellman", "euler"],
            "extra": 1,
        }


class TestMergeOverrides:
    def test_none_is_skipped(self):
        """Flags that were not given keep the file value"""
        assert merge_overrides({"seed": 3}, {"seed": None}) == {"seed": 3}

    def test_nested_merge(self):
        """A single nested override keeps sibling file values"""
        base = {"tolerances": {"policy_tol": 1e-8, "audit_tol": 1e-5}}
        merged = merge_overrides(base, {"tolerances": {"audit_tol": 1e-4, "curvature_bound": None}})
        assert merged == {"tolerances": {"policy_tol": 1e-8, "audit_tol": 1e-4}}

    def test_scalar_replaces_mapping(self):
        merged = merge_overrides({"sampling": {"viability_samples": 8}}, {"sampling": 0})
        assert merged == {"sampling": 0}

    def test_base_untouched(self):
        base = {"sampling": {"viability_samples": 8}}
        merge_overrides(base, {"sampling": {"viability_samples": 16}})
        assert base == {"sampling": {"viability_samples": 8}}


class TestShippedConfig:
    def test_sections(self):
        """config/nsdp.yaml parses and carries every settings section"""
        config = load_config(SHIPPED_CONFIG)
        assert {"tolerances", "sampling", "solver"} <= set(config)
        assert config["solver"]["max_horizon"] == 10000
        assert "command" not in config
