"""ROC sweep vs brute-force oracle, TAR@FAR semantics, CMC, labeling."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mission_eval.harness import ScoreMatrix
from mission_eval.metrics import cmc, label_pairs, roc, tar_at_far


def brute_force_roc(genuine, impostor):
    """Independent oracle: count comparisons directly at every candidate
    threshold (accept iff score >= t; nulls never accepted)."""
    g = [s for s in genuine if s is not None]
    i = [s for s in impostor if s is not None]
    thresholds = [-np.inf] + sorted(set(g) | set(i)) + [np.inf]
    far, tar = [], []
    for t in thresholds:
        tar.append(sum(1 for s in g if s >= t) / len(genuine))
        far.append(sum(1 for s in i if s >= t) / len(impostor))
    return thresholds, far, tar


def brute_force_tar_at_far(genuine, impostor, alpha):
    thresholds, far, tar = brute_force_roc(genuine, impostor)
    for t, f, ta in zip(thresholds, far, tar):
        if f <= alpha:
            return ta
    raise AssertionError("unreachable: +inf sentinel always qualifies")


class TestRoc:
    def test_separated_example(self):
        curve = roc([0.9, 0.8], [0.1, 0.2])
        # brute-force over the 4 distinct thresholds confirms TAR=1 at FAR=0
        assert tar_at_far(curve, 0.01) == 1.0
        idx = int(np.nonzero(curve.far == 0.0)[0][0])
        assert curve.tar[idx] == 1.0

    def test_identical_distributions_area_half(self):
        scores = [0.1, 0.35, 0.5, 0.62, 0.9]
        curve = roc(list(scores), list(scores))
        assert curve.area() == pytest.approx(0.5, abs=1e-12)

    def test_single_pair_curve(self):
        curve = roc([1.0], [0.0])
        points = set(zip(curve.far.tolist(), curve.tar.tolist()))
        assert (1.0, 1.0) in points      # -inf sentinel
        assert (0.0, 1.0) in points      # threshold at the genuine score
        assert (0.0, 0.0) in points      # above-max sentinel

    def test_monotone_invariants(self):
        rng = np.random.default_rng(0)
        curve = roc(list(rng.normal(1, 1, 300)), list(rng.normal(0, 1, 500)))
        assert np.all(np.diff(curve.far) <= 0 + 1e-15)
        assert np.all(np.diff(curve.tar) <= 0 + 1e-15)
        assert curve.far[0] == 1.0 and curve.tar[0] == 1.0
        assert curve.far[-1] == 0.0 and curve.tar[-1] == 0.0

    def test_empty_side_raises(self):
        with pytest.raises(ValueError):
            roc([], [0.1])
        with pytest.raises(ValueError):
            roc([0.9], [])

    def test_null_genuine_below_every_threshold(self):
        curve = roc([0.9, None], [0.1])
        assert curve.n_genuine == 2
        # the null genuine is a miss even at the accept-everything sentinel
        assert curve.tar[0] == 0.5
        assert tar_at_far(curve, 1.0) == 0.5

    @given(st.integers(0, 10_000))
    @settings(max_examples=40, deadline=None)
    def test_matches_brute_force_oracle(self, case):
        rng = np.random.default_rng(case)
        n_g = int(rng.integers(1, 60))
        n_i = int(rng.integers(1, 120))
        # coarse grid forces ties across and within the two sets
        genuine = list(np.round(rng.normal(0.6, 0.3, n_g), 1))
        impostor = list(np.round(rng.normal(0.0, 0.3, n_i), 1))
        curve = roc(genuine, impostor)
        thresholds, far, tar = brute_force_roc(genuine, impostor)
        assert np.array_equal(curve.thresholds, np.array(thresholds))
        assert np.array_equal(curve.far, np.array(far))
        assert np.array_equal(curve.tar, np.array(tar))


class TestTarAtFar:
    def test_hundred_impostors_alpha_one_percent(self):
        rng = np.random.default_rng(1)
        impostor = list(np.linspace(0.0, 0.99, 100))
        genuine = [0.985, 0.6, 0.4]
        curve = roc(genuine, impostor)
        value = tar_at_far(curve, 0.01)
        # the qualifying threshold admits exactly one impostor (FAR = 1/100)
        chosen = curve.thresholds[np.nonzero(curve.far <= 0.01)[0][0]]
        assert np.sum(np.array(impostor) >= chosen) == 1
        assert value == pytest.approx(1 / 3)

    def test_alpha_one_gives_full_tar(self):
        curve = roc([0.9, 0.1], [0.5, 0.6])
        assert tar_at_far(curve, 1.0) == 1.0

    def test_perfect_separation_any_alpha(self):
        curve = roc([0.9, 0.8], [0.2, 0.1])
        for alpha in (0.001, 0.01, 0.5, 1.0):
            assert tar_at_far(curve, alpha) == 1.0

    def test_alpha_domain(self):
        curve = roc([0.9], [0.1])
        with pytest.raises(ValueError):
            tar_at_far(curve, 0.0)
        with pytest.raises(ValueError):
            tar_at_far(curve, 1.5)

    @given(st.integers(0, 1000))
    @settings(max_examples=25, deadline=None)
    def test_monotone_in_alpha(self, case):
        rng = np.random.default_rng(case)
        curve = roc(list(rng.normal(0.5, 0.4, 50)), list(rng.normal(0, 0.4, 80)))
        alphas = [0.01, 0.05, 0.1, 0.3, 1.0]
        values = [tar_at_far(curve, a) for a in alphas]
        assert all(a <= b + 1e-15 for a, b in zip(values, values[1:]))

    @given(st.integers(0, 1000))
    @settings(max_examples=25, deadline=None)
    def test_extra_low_impostor_moves_tar_by_one_step_at_most(self, case):
        # adding an impostor below the operating threshold can only loosen
        # the threshold by at most one impostor-count step
        rng = np.random.default_rng(case + 31)
        genuine = list(rng.normal(0.7, 0.3, 40))
        impostor = list(rng.normal(0.0, 0.3, 60))
        curve = roc(genuine, impostor)
        old = tar_at_far(curve, 0.05)
        chosen = curve.thresholds[np.nonzero(curve.far <= 0.05)[0][0]]
        new_curve = roc(genuine, impostor + [float(chosen) - 1.0])
        new = tar_at_far(new_curve, 0.05)
        assert new >= old - 1e-15
        new_chosen = new_curve.thresholds[np.nonzero(new_curve.far <= 0.05)[0][0]]
        admitted_old = sum(1 for s in impostor if s >= chosen)
        admitted_new = sum(1 for s in impostor + [float(chosen) - 1.0] if s >= new_chosen)
        assert admitted_new - admitted_old <= 1 + int(0.05 * 1)


class TestLabelPairs:
    def _matrix(self):
        scores = {}
        for probe, gallery, value in (
            ("p1", "g1", 0.9), ("p1", "g2", 0.2), ("p1", "g3", 0.1),
            ("p2", "g1", 0.3), ("p2", "g2", 0.8), ("p2", "g3", 0.0),
        ):
            scores[(probe, gallery, "face")] = value
        return ScoreMatrix(
            probe_entries=("p1", "p2"), gallery_entries=("g1", "g2", "g3"),
            modes=("face",), scores=scores)

    def test_counts(self):
        genuine, impostor = label_pairs(
            self._matrix(),
            {"p1": "alice", "p2": "bob"},
            {"g1": "alice", "g2": "bob", "g3": "dis-1"},
            "face")
        assert len(genuine) == 2 and len(impostor) == 4
        assert set(genuine) == {0.9, 0.8}

    def test_all_distractor_gallery_no_genuine(self):
        genuine, impostor = label_pairs(
            self._matrix(),
            {"p1": "alice", "p2": "bob"},
            {"g1": "d1", "g2": "d2", "g3": "d3"},
            "face")
        assert genuine == []
        with pytest.raises(ValueError):
            roc(genuine, impostor)

    def test_unresolvable_entry_is_hard_error(self):
        with pytest.raises(KeyError):
            label_pairs(self._matrix(), {"p1": "alice"},
                        {"g1": "alice", "g2": "b", "g3": "c"}, "face")

    def test_fte_probe_contributes_nulls(self):
        matrix = self._matrix()
        matrix.fte_probe = ("p3",)
        genuine, impostor = label_pairs(
            matrix,
            {"p1": "alice", "p2": "bob", "p3": "carol"},
            {"g1": "alice", "g2": "bob", "g3": "carol"},
            "face")
        assert genuine.count(None) == 1
        assert impostor.count(None) == 2
        # a failed probe is a miss at every threshold
        curve = roc(genuine, impostor)
        assert tar_at_far(curve, 1.0) == pytest.approx(2 / 3)


class TestCmc:
    def test_noiseless_rank_one(self):
        results = {
            "p1": [("g1", 1.0), ("g2", 0.1)],
            "p2": [("g2", 1.0), ("g1", 0.2)],
        }
        curve = cmc(results, {"p1": "a", "p2": "b"}, {"g1": "a", "g2": "b"})
        assert curve.rank_hit_rate[0] == 1.0

    def test_full_rank_hits_all_mated(self):
        results = {
            "p1": [("g2", 0.9), ("g3", 0.5), ("g1", 0.1)],
        }
        curve = cmc(results, {"p1": "a"}, {"g1": "a", "g2": "b", "g3": "c"})
        assert curve.rank_hit_rate[-1] == 1.0
        assert curve.rank_hit_rate[0] == 0.0

    def test_unmated_probe_excluded_and_counted(self):
        results = {
            "p1": [("g1", 1.0)],
            "p2": [("g1", 0.9)],
        }
        curve = cmc(results, {"p1": "a", "p2": "zed"}, {"g1": "a"})
        assert curve.n_evaluated == 1
        assert curve.n_excluded == 1
        assert curve.rank_hit_rate[0] == 1.0

    def test_random_scores_rank_one_near_uniform(self):
        rng = np.random.default_rng(5)
        n_gallery, n_probes = 20, 400
        gallery_truth = {f"g{i}": f"s{i}" for i in range(n_gallery)}
        probe_truth = {}
        results = {}
        for p in range(n_probes):
            probe = f"p{p}"
            probe_truth[probe] = f"s{p % n_gallery}"
            scores = rng.random(n_gallery)
            ranked = sorted(zip(gallery_truth, scores), key=lambda x: -x[1])
            results[probe] = [(g, float(s)) for g, s in ranked]
        curve = cmc(results, probe_truth, gallery_truth)
        assert curve.rank_hit_rate[0] == pytest.approx(1 / n_gallery, abs=0.035)

    def test_non_decreasing_in_k(self):
        rng = np.random.default_rng(6)
        gallery_truth = {f"g{i}": f"s{i}" for i in range(10)}
        results = {}
        probe_truth = {}
        for p in range(50):
            probe_truth[f"p{p}"] = f"s{p % 10}"
            scores = rng.random(10)
            ranked = sorted(zip(gallery_truth, scores), key=lambda x: -x[1])
            results[f"p{p}"] = [(g, float(s)) for g, s in ranked]
        curve = cmc(results, probe_truth, gallery_truth)
        assert np.all(np.diff(curve.rank_hit_rate) >= 0)
