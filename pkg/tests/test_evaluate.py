import numpy as np
import pytest

from uniod.data import Dataset
from uniod.evaluate import MetricError, auprc, auroc, chunk_rows, score, write_scores
from uniod.model import init_params


def pair_count_auroc(scores, labels):
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    wins = sum(1.0 if p > q else 0.5 if p == q else 0.0 for p in pos for q in neg)
    return wins / (len(pos) * len(neg))


def tie_grouped_ap(scores, labels):
    """Walk distinct thresholds from high to low; each step adds recall gain times precision."""
    n_pos = sum(labels)
    ap, prev_tp = 0.0, 0
    for t in sorted(set(scores), reverse=True):
        picked = [y for s, y in zip(scores, labels) if s >= t]
        tp = sum(picked)
        ap += (tp - prev_tp) / n_pos * (tp / len(picked))
        prev_tp = tp
    return ap


def random_instance(rng):
    n = int(rng.integers(2, 51))
    labels = rng.integers(0, 2, n)
    labels[rng.choice(n, 2, replace=False)] = [0, 1]
    # coarse grid so that ties are common
    scores = rng.integers(0, 8, n) / 7.0 if rng.random() < 0.5 else rng.random(n)
    return scores, labels


class TestAuroc:
    def test_examples(self):
        assert auroc([0.9, 0.1], [1, 0]) == 1.0
        assert auroc([0.1, 0.9], [1, 0]) == 0.0
        assert auroc([0.3] * 5, [0, 1, 0, 1, 1]) == 0.5

    def test_pair_counting_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            s, y = random_instance(rng)
            assert auroc(s, y) == pair_count_auroc(s, y)

    def test_monotone_invariance(self, rng):
        s, y = rng.random(40), np.r_[np.zeros(30, int), np.ones(10, int)]
        assert auroc(np.exp(3 * s) - 2, y) == auroc(s, y)

    def test_single_class_rejected(self):
        with pytest.raises(MetricError):
            auroc([0.1, 0.2], [0, 0])

    def test_length_mismatch(self):
        with pytest.raises(MetricError):
            auroc([0.1, 0.2], [0, 1, 1])


class TestAuprc:
    def test_examples(self):
        assert auprc([0.9, 0.1], [1, 0]) == 1.0
        assert auprc([0.1, 0.9], [1, 0]) == 0.5
        assert auprc([0.4] * 4, [0, 0, 1, 0]) == 0.25

    def test_tie_grouped_oracle(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            s, y = random_instance(rng)
            assert abs(auprc(s, y) - tie_grouped_ap(list(s), list(y))) <= 1e-12

    def test_no_outliers_rejected(self):
        with pytest.raises(MetricError):
            auprc([0.1, 0.2], [0, 0])


def test_chunks_cover_every_row():
    parts = chunk_rows(25, 10, seed=3)
    assert [len(p) for p in parts] == [9, 8, 8]
    np.testing.assert_array_equal(np.sort(np.concatenate(parts)), np.arange(25))
    assert len(chunk_rows(5, 10, 0)) == 1


class TestScore:
    def test_scores_in_unit_interval(self, tiny_config, labeled_blob):
        r = score(labeled_blob, init_params(tiny_config))
        assert r.scores.shape == (labeled_blob.n,)
        assert np.all((r.scores > 0) & (r.scores < 1))
        assert 0.0 <= r.auroc <= 1.0 and 0.0 < r.auprc <= 1.0

    def test_unlabeled_has_no_metrics(self, tiny_config, labeled_blob):
        r = score(Dataset("u", labeled_blob.features), init_params(tiny_config))
        assert r.auroc is None and r.auprc is None

    def test_permutation(self, tiny_config, labeled_blob, rng):
        params = init_params(tiny_config)
        perm = rng.permutation(labeled_blob.n)
        a = score(labeled_blob, params).scores
        b = score(labeled_blob.take(perm), params).scores
        np.testing.assert_allclose(b, a[perm], atol=1e-8)

    def test_scale_and_translation(self, tiny_config, labeled_blob):
        params = init_params(tiny_config)
        moved = Dataset("m", labeled_blob.features * 10 + np.array([3.0, -7.0, 0.5]), labeled_blob.labels)
        np.testing.assert_allclose(score(moved, params).scores, score(labeled_blob, params).scores, atol=1e-8)

    def test_chunked_scoring(self, tiny_config, labeled_blob):
        r = score(labeled_blob, init_params(tiny_config.updated(max_samples=12)))
        assert r.scores.shape == (labeled_blob.n,) and np.all(np.isfinite(r.scores))

    def test_write_scores(self, tmp_path, tiny_config, labeled_blob):
        r = score(labeled_blob, init_params(tiny_config))
        path = tmp_path / "s.csv"
        write_scores(path, r, labeled_blob.labels)
        lines = path.read_text().splitlines()
        assert lines[0] == "index,score,label" and len(lines) == labeled_blob.n + 1
        assert float(lines[1].split(",")[1]) == r.scores[0]
