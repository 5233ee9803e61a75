import dataclasses
import json

import numpy as np
import pytest

from runvar.distribution import BinningSpec, smooth
from runvar.errors import ConfigError
from runvar.features import group_pmf
from runvar.synth import (
    ShapeParams,
    SynthConfig,
    default_shape_params,
    generate_workload,
    heavy_tailed_config,
    preset_config,
    separable_config,
    whatif_mechanism_config,
)
from runvar.telemetry import instance_to_dict


def _dump(dataset):
    return [json.dumps(instance_to_dict(i), sort_keys=True) for i in dataset.all_instances()]


class TestConfig:
    def test_validation(self):
        with pytest.raises(ConfigError):
            separable_config(k_true=1)  # k_true >= 2
        cfg = separable_config(n_groups=4)
        with pytest.raises(ConfigError):
            dataclasses.replace(cfg, instances_per_group=(5, 2)).validate()
        with pytest.raises(ConfigError):
            dataclasses.replace(cfg, feature_noise=-0.1).validate()
        with pytest.raises(ConfigError):
            ShapeParams((10, 5)).validate()
        with pytest.raises(ConfigError):
            ShapeParams((10, 20), second_mode_weight=1.5).validate()

    def test_json_round_trip(self, tmp_path):
        cfg = whatif_mechanism_config(n_groups=10)
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(cfg.to_dict()))
        loaded = SynthConfig.from_json_file(path)
        assert loaded == cfg

    def test_unknown_preset(self):
        with pytest.raises(ConfigError):
            preset_config("nope")


class TestGeneration:
    def test_determinism(self):
        cfg = separable_config(n_groups=12, seed=9, instances_per_group=(5, 10))
        assert _dump(generate_workload(cfg)) == _dump(generate_workload(cfg))

    def test_true_cluster_round_robin(self):
        cfg = separable_config(n_groups=8, seed=1, instances_per_group=(3, 4))
        ds = generate_workload(cfg)
        trues = sorted(g.instances[0].true_cluster for g in ds.groups)
        assert trues == [0, 0, 1, 1, 2, 2, 3, 3]

    def test_group_key_shared_within_group(self):
        cfg = separable_config(n_groups=6, seed=2, instances_per_group=(4, 6))
        ds = generate_workload(cfg)
        for g in ds.groups:
            for inst in g.instances:
                assert inst.group_key() == g.key

    def test_no_outliers_when_prob_zero(self):
        shapes = tuple(
            ShapeParams((50, 100), spread=0.2, outlier_prob=0.0) for _ in range(2)
        )
        cfg = SynthConfig(
            n_groups=20,
            instances_per_group=(200, 300),
            k_true=2,
            shape_params=shapes,
            feature_noise=0.0,
            seed=4,
        )
        ds = generate_workload(cfg)
        spec = BinningSpec.ratio_default()
        for g in ds.groups:
            _, values, _ = group_pmf(g, spec)
            assert values.max() < spec.hi  # nothing reaches the outlier bin

    def test_outlier_fraction_concentrates(self):
        shapes = tuple(
            ShapeParams((50, 100), spread=0.05, outlier_prob=0.05, outlier_scale=12.0)
            for _ in range(2)
        )
        cfg = SynthConfig(
            n_groups=40,
            instances_per_group=(250, 250),
            k_true=2,
            shape_params=shapes,
            feature_noise=0.0,
            seed=5,
        )
        ds = generate_workload(cfg)  # 10,000 instances
        assert ds.n_instances == 10_000
        spec = BinningSpec.ratio_default()
        outliers = 0
        for g in ds.groups:
            _, values, _ = group_pmf(g, spec)
            outliers += int((values >= spec.hi).sum())
        assert abs(outliers / ds.n_instances - 0.05) <= 0.01

    def test_noise_zero_prototype_recoverability(self):
        # same-shape groups must sit closer in (smoothed) PMF space than
        # cross-shape pairs when shapes are well separated
        shapes = (
            ShapeParams((100, 100), spread=0.05, outlier_prob=0.0),
            ShapeParams((100, 100), second_mode_offset=3.0, second_mode_weight=0.3,
                        spread=0.05, outlier_prob=0.0),
        )
        cfg = SynthConfig(
            n_groups=6,
            instances_per_group=(300, 300),
            k_true=2,
            shape_params=shapes,
            feature_noise=0.0,
            seed=6,
        )
        ds = generate_workload(cfg)
        spec = BinningSpec.ratio_default()
        pmfs, trues = [], []
        for g in ds.groups:
            pmf, _, _ = group_pmf(g, spec, smooth_fn=smooth)
            pmfs.append(pmf.probs)
            trues.append(g.instances[0].true_cluster)
        intra, cross = [], []
        for i in range(len(pmfs)):
            for j in range(i + 1, len(pmfs)):
                d = float(np.linalg.norm(pmfs[i] - pmfs[j]))
                (intra if trues[i] == trues[j] else cross).append(d)
        assert max(intra) < min(cross)

    def test_operator_counts_match_plan(self):
        cfg = separable_config(n_groups=5, seed=7, instances_per_group=(3, 3))
        ds = generate_workload(cfg)
        for g in ds.groups:
            inst = g.instances[0]
            counts = {}
            for node in inst.plan.nodes:
                counts[node.operator_type] = counts.get(node.operator_type, 0.0) + 1.0
            assert counts == inst.operator_counts
            assert inst.operator_counts["Output"] == 1.0

    def test_presets_have_expected_structure(self):
        assert heavy_tailed_config().k_true == 4
        wm = whatif_mechanism_config()
        assert wm.k_true == 2
        protos = wm.feature_prototypes
        assert protos[0]["spare_token_avg"] != protos[1]["spare_token_avg"]
        shared = {k: v for k, v in protos[0].items() if k != "spare_token_avg"}
        assert shared == {k: v for k, v in protos[1].items() if k != "spare_token_avg"}

    def test_default_shape_params_extend(self):
        assert len(default_shape_params(6)) == 6
