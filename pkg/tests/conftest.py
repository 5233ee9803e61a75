import pytest

from runvar.distribution import BinningSpec, smooth
from runvar.synth import generate_workload, separable_config


@pytest.fixture(scope="session")
def small_dataset():
    return generate_workload(separable_config(n_groups=40, seed=3, instances_per_group=(20, 30)))


@pytest.fixture(scope="session")
def ratio_spec():
    return BinningSpec.ratio_default()


@pytest.fixture(scope="session")
def small_pipeline(small_dataset, ratio_spec):
    """Shape model + labeled split + trained models over the small dataset."""
    from runvar.features import build_schema, split_by_time, timeline_windows, window_label_pmf
    from runvar.clustering import kmeans_fit
    from runvar.forest import ForestParams
    from runvar.predictor import train_classifier, train_regression_baseline

    w1, w2, w3 = timeline_windows(small_dataset, (0.4, 0.3, 0.3))
    pmfs, values = [], []
    for g in small_dataset.groups:
        got = window_label_pmf(g, w1, ratio_spec)
        if got is None:
            continue
        raw, vals, _ = got
        pmfs.append(smooth(raw))
        values.append(vals)
    shape_model = kmeans_fit(pmfs, 4, seed=3, group_values=values)
    schema = build_schema(small_dataset.groups)
    train, test = split_by_time(small_dataset, shape_model, w2, w3, schema)
    clf = train_classifier(train, ForestParams(n_trees=20, max_depth=10, seed=3))
    reg = train_regression_baseline(train, ForestParams(n_trees=10, max_depth=10, seed=3))
    return {
        "dataset": small_dataset,
        "windows": (w1, w2, w3),
        "shape_model": shape_model,
        "schema": schema,
        "train": train,
        "test": test,
        "classifier": clf,
        "regression": reg,
    }
