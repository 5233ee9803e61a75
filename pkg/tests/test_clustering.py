import numpy as np
import pytest

from runvar.clustering import (
    MembershipLabel,
    ShapeModel,
    adjusted_rand_index,
    assign_membership,
    cluster_report,
    elbow_k,
    inertia_curve,
    kmeans_fit,
)
from runvar.distribution import BinningSpec, GroupPMF, histogram, smooth
from runvar.errors import SpecMismatch, TooFewGroups
from runvar.features import group_pmf
from runvar.synth import generate_workload, separable_config

SPEC = BinningSpec.ratio_default()


def random_pmf(rng, spec=SPEC, concentration=1.0):
    probs = rng.dirichlet(np.full(spec.n_bins, concentration))
    return GroupPMF(spec, probs, 10)


def random_model(rng, k=8, spec=SPEC):
    centroids = rng.dirichlet(np.full(spec.n_bins, 0.5), size=k)
    return ShapeModel.from_centroids(spec, centroids)


class TestKmeans:
    def test_k_equals_n_zero_inertia(self):
        rng = np.random.default_rng(0)
        pmfs = [random_pmf(rng) for _ in range(6)]
        model = kmeans_fit(pmfs, 6, seed=0)
        assert model.fit_info["inertia"] == pytest.approx(0.0, abs=1e-12)

    def test_two_duplicate_groups(self):
        rng = np.random.default_rng(1)
        a = random_pmf(rng)
        b = random_pmf(rng)
        model = kmeans_fit([a, a, b, b], 2, seed=0)
        got = {tuple(np.round(c, 12)) for c in model.centroids}
        want = {tuple(np.round(a.probs, 12)), tuple(np.round(b.probs, 12))}
        assert got == want

    def test_too_few_groups(self):
        rng = np.random.default_rng(2)
        with pytest.raises(TooFewGroups):
            kmeans_fit([random_pmf(rng)], 2)

    def test_spec_mismatch(self):
        rng = np.random.default_rng(3)
        other = BinningSpec.delta_default()
        with pytest.raises(SpecMismatch):
            kmeans_fit([random_pmf(rng), random_pmf(rng, spec=other)], 2)

    def test_inertia_histories_non_increasing(self):
        rng = np.random.default_rng(4)
        pmfs = [random_pmf(rng, concentration=0.2) for _ in range(60)]
        model = kmeans_fit(pmfs, 5, seed=7)
        for history in model.fit_info["inertia_histories"]:
            diffs = np.diff(history)
            assert (diffs <= 1e-9).all()

    def test_planted_structure_recovery(self):
        ds = generate_workload(separable_config(n_groups=120, seed=5))
        pmfs, values, true = [], [], []
        for g in ds.groups:
            pmf, vals, _ = group_pmf(g, SPEC, smooth_fn=smooth)
            pmfs.append(pmf)
            values.append(vals)
            true.append(g.instances[0].true_cluster)
        model = kmeans_fit(pmfs, 4, seed=5, group_values=values)
        assert adjusted_rand_index(model.fit_info["labels"], true) >= 0.9

    def test_relabeled_by_iqr_ascending(self):
        ds = generate_workload(separable_config(n_groups=60, seed=6))
        pmfs, values = [], []
        for g in ds.groups:
            pmf, vals, _ = group_pmf(g, SPEC, smooth_fn=smooth)
            pmfs.append(pmf)
            values.append(vals)
        model = kmeans_fit(pmfs, 4, seed=6, group_values=values)
        iqrs = [st["iqr_25_75"] for st in model.stats]
        assert iqrs == sorted(iqrs)
        assert model.cluster_order == sorted(model.cluster_order)

    def test_determinism(self):
        rng = np.random.default_rng(7)
        pmfs = [random_pmf(rng) for _ in range(30)]
        a = kmeans_fit(pmfs, 4, seed=11)
        b = kmeans_fit(pmfs, 4, seed=11)
        assert np.array_equal(a.centroids, b.centroids)
        assert np.array_equal(a.fit_info["labels"], b.fit_info["labels"])


class TestInertiaCurve:
    def test_k_equals_n(self):
        rng = np.random.default_rng(8)
        pmfs = [random_pmf(rng) for _ in range(5)]
        curve = inertia_curve(pmfs, [5], seed=0)
        assert curve[0][1] == pytest.approx(0.0, abs=1e-12)

    def test_duplication_scales_inertia(self):
        # well-separated PMFs so every restart finds the same optimum
        rng = np.random.default_rng(9)
        base = []
        for i in range(4):
            probs = np.zeros(SPEC.n_bins)
            probs[i * 40 + 3] = 0.7
            probs[i * 40 + 9] = 0.3
            base.append(GroupPMF(SPEC, probs, 10))
        jittered = []
        for pmf in base * 3:
            p = pmf.probs + rng.dirichlet(np.full(SPEC.n_bins, 5.0)) * 0.01
            jittered.append(GroupPMF(SPEC, p / p.sum(), 10))
        m = 4
        once = kmeans_fit(jittered, 4, seed=1).fit_info["inertia"]
        many = kmeans_fit(jittered * m, 4, seed=1).fit_info["inertia"]
        assert many == pytest.approx(m * once, rel=1e-6)

    def test_elbow_at_planted_k(self):
        ds = generate_workload(separable_config(n_groups=80, seed=10))
        pmfs = []
        for g in ds.groups:
            pmf, _, _ = group_pmf(g, SPEC, smooth_fn=smooth)
            pmfs.append(pmf)
        curve = inertia_curve(pmfs, range(2, 9), seed=10)
        inertias = [v for _, v in curve]
        assert all(b <= a + 1e-9 for a, b in zip(inertias, inertias[1:]))
        assert elbow_k(curve) == 4


class TestMembership:
    def test_eq79_equivalence_oracle(self):
        # dot-product score must match the per-observation brute force
        rng = np.random.default_rng(12)
        for _ in range(20):
            model = random_model(rng)
            n = int(rng.integers(1, 50))
            obs = rng.uniform(0, 12, n)
            pmf = histogram(obs, SPEC)
            label = assign_membership(pmf, model)
            brute = np.zeros(model.k)
            for i in range(model.k):
                for x in obs:
                    brute[i] += model.log_centroids[i, SPEC.bin_index(x)]
            brute /= n
            assert int(brute.argmax()) == label.cluster_id
            shift_a = brute - brute.max()
            shift_b = label.log_likelihoods - label.log_likelihoods.max()
            assert np.abs(shift_a - shift_b).max() <= 1e-9

    def test_self_assignment_gibbs(self):
        rng = np.random.default_rng(13)
        model = random_model(rng, k=5)
        for j in range(5):
            pmf = GroupPMF(SPEC, model.floored_centroids[j], 10)
            assert assign_membership(pmf, model).cluster_id == j

    def test_identical_centroids_tie_break(self):
        probs = np.full(SPEC.n_bins, 1.0 / SPEC.n_bins)
        model = ShapeModel.from_centroids(SPEC, np.stack([probs] * 4))
        rng = np.random.default_rng(14)
        pmf = random_pmf(rng)
        assert assign_membership(pmf, model).cluster_id == 0

    def test_sample_count_invariance(self):
        # probabilities, not counts, enter the score
        rng = np.random.default_rng(15)
        model = random_model(rng)
        values = rng.uniform(0, 10, 40)
        doubled = np.concatenate([values, values])
        a = assign_membership(histogram(values, SPEC), model)
        b = assign_membership(histogram(doubled, SPEC), model)
        assert a.cluster_id == b.cluster_id
        assert np.allclose(a.log_likelihoods, b.log_likelihoods, atol=1e-12)

    def test_spec_mismatch(self):
        rng = np.random.default_rng(16)
        model = random_model(rng)
        other = BinningSpec.delta_default()
        with pytest.raises(SpecMismatch):
            assign_membership(random_pmf(rng, spec=other), model)

    def test_gibbs_dominance_property(self):
        # score of a floored centroid against itself beats every other centroid
        rng = np.random.default_rng(17)
        for _ in range(50):
            model = random_model(rng, k=6)
            j = int(rng.integers(6))
            phi = model.floored_centroids[j]
            scores = model.log_centroids @ phi
            assert scores[j] == scores.max()
            others = np.delete(scores, j)
            assert (others < scores[j]).all()


class TestReportAndSerialization:
    def test_constant_groups_zero_iqr(self):
        pmfs, values = [], []
        for c in (1.0, 2.0, 3.0):
            vals = np.full(30, c)
            pmfs.append(histogram(vals, SPEC))
            values.append(vals)
        model = kmeans_fit(pmfs, 3, seed=0, group_values=values)
        rows = cluster_report(model)
        assert all(row["iqr_25_75"] == 0.0 for row in rows)

    def test_job_share_sums_to_one(self, small_pipeline):
        rows = cluster_report(small_pipeline["shape_model"])
        assert sum(r["job_share"] for r in rows) == pytest.approx(1.0, abs=1e-4)

    def test_stats_match_independent_recompute(self):
        from runvar.distribution import distribution_stats

        ds = generate_workload(separable_config(n_groups=40, seed=18))
        pmfs, values = [], []
        for g in ds.groups:
            pmf, vals, _ = group_pmf(g, SPEC, smooth_fn=smooth)
            pmfs.append(pmf)
            values.append(vals)
        model = kmeans_fit(pmfs, 4, seed=18, group_values=values)
        labels = model.fit_info["labels"]
        for j in range(4):
            pooled = np.concatenate([values[i] for i in range(len(values)) if labels[i] == j])
            expect = distribution_stats(pooled, SPEC)
            for key, val in expect.items():
                assert model.stats[j][key] == pytest.approx(val, abs=1e-9)

    def test_round_trip_preserves_assignments(self):
        rng = np.random.default_rng(19)
        model = random_model(rng, k=4)
        restored = ShapeModel.from_dict(model.to_dict())
        for _ in range(20):
            pmf = random_pmf(rng)
            assert (
                assign_membership(pmf, model).cluster_id
                == assign_membership(pmf, restored).cluster_id
            )

    def test_relabel_is_pure_permutation(self):
        # fitting twice with identical data but permuted centroid seeds must
        # give identical membership partitions after IQR relabeling
        ds = generate_workload(separable_config(n_groups=60, seed=20))
        pmfs, values = [], []
        for g in ds.groups:
            pmf, vals, _ = group_pmf(g, SPEC, smooth_fn=smooth)
            pmfs.append(pmf)
            values.append(vals)
        a = kmeans_fit(pmfs, 4, seed=20, group_values=values)
        b = kmeans_fit(pmfs, 4, seed=77, group_values=values)
        assert adjusted_rand_index(a.fit_info["labels"], b.fit_info["labels"]) == pytest.approx(1.0)
        assert np.array_equal(a.fit_info["labels"], b.fit_info["labels"])


class TestAri:
    def test_perfect(self):
        assert adjusted_rand_index([0, 0, 1, 1], [1, 1, 0, 0]) == 1.0

    def test_independent_is_low(self):
        rng = np.random.default_rng(21)
        a = rng.integers(0, 4, 2000)
        b = rng.integers(0, 4, 2000)
        assert abs(adjusted_rand_index(a, b)) < 0.05
