import math

import pytest

from reattn import (
    ParseError,
    Qrels,
    compare_runs,
    load_qrels,
    make_run,
    ndcg_at_k,
    recall_at_k,
)


def qrels_of(qid, **docs):
    return Qrels(judgments={qid: dict(docs)})


class TestLoadQrels:
    def test_two_lines(self, tmp_path):
        path = tmp_path / "q.qrels"
        path.write_text("q1 0 d1 1\nq1 0 d2 0\n")
        qrels = load_qrels(path)
        assert len(qrels) == 2
        assert qrels.relevance("q1", "d1") == 1
        assert qrels.relevance("q1", "d2") == 0

    def test_negative_relevance_rejected(self, tmp_path):
        path = tmp_path / "q.qrels"
        path.write_text("q1 0 d1 -2\n")
        with pytest.raises(ParseError):
            load_qrels(path)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "q.qrels"
        path.write_text("")
        assert len(load_qrels(path)) == 0

    def test_duplicate_last_wins(self, tmp_path, caplog):
        path = tmp_path / "q.qrels"
        path.write_text("q1 0 d1 1\nq1 0 d1 3\n")
        with caplog.at_level("WARNING"):
            qrels = load_qrels(path)
        assert qrels.relevance("q1", "d1") == 3
        assert any("duplicate" in r.message for r in caplog.records)

    def test_unjudged_is_zero(self):
        assert qrels_of("q1", d1=1).relevance("q1", "unseen") == 0


class TestNdcg:
    def test_perfect_ranking(self):
        run = make_run("q1", {"d1": 0.9, "d2": 0.1})
        assert ndcg_at_k(run, qrels_of("q1", d1=1, d2=0), 2) == 1.0

    def test_swapped_pair(self):
        run = make_run("q1", {"d2": 0.9, "d1": 0.1})
        expected = 1.0 / math.log2(3)
        assert ndcg_at_k(run, qrels_of("q1", d1=1, d2=0), 2) == pytest.approx(
            expected, abs=1e-12
        )

    def test_no_relevant_docs(self):
        run = make_run("q1", {"d1": 0.9})
        assert ndcg_at_k(run, qrels_of("q1", d1=0), 10) == 0.0

    def test_irrelevant_tail_changes_nothing(self):
        qrels = qrels_of("q1", a=2, b=1)
        short = make_run("q1", {"a": 0.9, "b": 0.8})
        long = make_run("q1", {"a": 0.9, "b": 0.8, "x": 0.1, "y": 0.05})
        assert ndcg_at_k(short, qrels, 2) == ndcg_at_k(long, qrels, 2)

    def test_bad_k(self):
        with pytest.raises(ValueError):
            ndcg_at_k(make_run("q1", {"a": 1.0}), qrels_of("q1", a=1), 0)


class TestRecall:
    def test_single_relevant_at_rank_one(self):
        run = make_run("q1", {"a": 0.9, "b": 0.5})
        assert recall_at_k(run, qrels_of("q1", a=1, b=0), 5) == 1.0

    def test_half_found(self):
        run = make_run("q1", {"a": 0.9, "x": 0.8, "y": 0.7, "b": 0.1})
        assert recall_at_k(run, qrels_of("q1", a=1, b=1), 3) == 0.5

    def test_k_beyond_run_length(self):
        run = make_run("q1", {"a": 0.9, "b": 0.8})
        assert recall_at_k(run, qrels_of("q1", a=1, b=1), 100) == 1.0

    def test_no_relevant(self):
        run = make_run("q1", {"a": 0.9})
        assert recall_at_k(run, qrels_of("q1", a=0), 5) == 0.0


class TestCompareRuns:
    def test_identical_runs_zero_delta(self):
        runs = [make_run("q1", {"a": 0.9, "b": 0.1})]
        qrels = qrels_of("q1", a=1)
        cmp = compare_runs(runs, runs, qrels, ["ndcg@10", "recall@10"])
        assert cmp.delta("ndcg@10") == 0.0
        assert cmp.delta("recall@10") == 0.0

    def test_strictly_better_positive_delta(self):
        qrels = Qrels(judgments={"q1": {"a": 1}, "q2": {"b": 1}})
        worse = [make_run("q1", {"a": 0.1, "x": 0.9}), make_run("q2", {"b": 0.1, "x": 0.9})]
        better = [make_run("q1", {"a": 0.9, "x": 0.1}), make_run("q2", {"b": 0.9, "x": 0.1})]
        cmp = compare_runs(worse, better, qrels, ["ndcg@10"])
        assert cmp.delta("ndcg@10") > 0

    def test_disjoint_query_sets_raise(self):
        qrels = qrels_of("q1", a=1)
        with pytest.raises(KeyError):
            compare_runs(
                [make_run("q1", {"a": 1.0})], [make_run("q2", {"a": 1.0})], qrels
            )

    def test_table_has_mean_row(self):
        runs = [make_run("q1", {"a": 0.9})]
        cmp = compare_runs(runs, runs, qrels_of("q1", a=1), ["ndcg@10"])
        table = cmp.format_table()
        assert table.splitlines()[-1].startswith("mean")

    def test_bad_metric_spec(self):
        runs = [make_run("q1", {"a": 0.9})]
        with pytest.raises(ValueError):
            compare_runs(runs, runs, qrels_of("q1", a=1), ["map@10"])
