import random

import pytest

from conftest import random_strings
from ensemblelink.bench import (CSV_HEADER, rows_to_csv, run_scaling,
                                subsample_corpus)
from ensemblelink.corpus import record_set_from_strings
from ensemblelink.errors import ConfigError
from ensemblelink.evaluation import GroundTruth, TaskConfig


def synthetic_task(n_corpus=300, n_queries=60):
    rng = random.Random(21)
    strings = [f"{s} {i:04d}" for i, s in
               enumerate(random_strings(rng, n_corpus, min_len=6, distinct=True))]
    corpus = record_set_from_strings(strings)
    queries = record_set_from_strings(strings[:n_queries], role="query")
    truth = GroundTruth.identity(queries, corpus)
    return TaskConfig(name="bench", queries=queries, corpus=corpus, truth=truth)


class TestSubsample:
    def test_retains_gold_and_size(self):
        task = synthetic_task()
        keep = {0, 5, 250}
        sub, id_map = subsample_corpus(task.corpus, 100, keep, seed=3)
        assert len(sub) == 100
        assert keep <= set(id_map)
        assert [r.id for r in sub] == list(range(100))

    def test_deterministic(self):
        task = synthetic_task()
        a, _ = subsample_corpus(task.corpus, 80, {1, 2}, seed=9)
        b, _ = subsample_corpus(task.corpus, 80, {1, 2}, seed=9)
        assert [r.norm for r in a] == [r.norm for r in b]

    def test_size_exceeds_corpus(self):
        task = synthetic_task()
        with pytest.raises(ConfigError):
            subsample_corpus(task.corpus, 10_000, set(), seed=0)


class TestRunScaling:
    def test_size_too_large_config_error(self):
        task = synthetic_task(n_corpus=50, n_queries=10)
        with pytest.raises(ConfigError):
            run_scaling(task, [100], seed=1)

    def test_rows_and_accuracy_stability(self):
        task = synthetic_task()
        rows = run_scaling(task, [100, 300], seed=1)
        assert [r.corpus_size for r in rows] == [100, 300]
        n_test = int(len(task.queries) * 0.4)
        for row in rows:
            assert row.total_s > 0
            assert row.queries_per_s == pytest.approx(n_test / row.total_s, rel=1e-6)
            assert 0.0 <= row.accuracy <= 1.0
        # self-match accuracy should not drift with corpus size
        assert abs(rows[0].accuracy - rows[1].accuracy) < 0.02

    def test_csv_format(self):
        task = synthetic_task(n_corpus=80, n_queries=20)
        rows = run_scaling(task, [40, 80], seed=1)
        text = rows_to_csv(rows)
        lines = text.strip().split("\n")
        assert lines[0] == ",".join(CSV_HEADER)
        assert len(lines) == 3
        assert lines[1].startswith("40,")
