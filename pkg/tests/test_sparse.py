import math
import random
from collections import Counter

import numpy as np
import pytest

from conftest import oracle_ngrams, oracle_sparse_rank, random_strings
from ensemblelink.corpus import make_record, record_set_from_strings
from ensemblelink.errors import IndexFormatError, InputError
from ensemblelink.sparse import (build_sparse_index, extract_ngrams,
                                 load_sparse_index, save_sparse_index,
                                 sparse_topk)


class TestExtractNgrams:
    def test_two_char_string(self):
        assert extract_ngrams("ab", 2, 4) == Counter({"ab": 1})

    def test_abc(self):
        assert extract_ngrams("abc", 2, 4) == Counter({"ab": 1, "bc": 1, "abc": 1})

    def test_short_string_fallback(self):
        assert extract_ngrams("a", 2, 4) == Counter({"a": 1})

    def test_empty(self):
        assert extract_ngrams("", 2, 4) == Counter()

    def test_typo_keeps_most_ngrams(self):
        # value frozen from brute-force set enumeration over 2-4-grams
        a = set(oracle_ngrams("montgomery"))
        b = set(oracle_ngrams("montegomery"))
        jaccard = len(a & b) / len(a | b)
        assert jaccard == pytest.approx(18 / 33)
        assert jaccard > 0.5  # typo retains most n-grams

    def test_matches_oracle_enumeration(self):
        rng = random.Random(7)
        for s in random_strings(rng, 50):
            assert dict(extract_ngrams(s)) == oracle_ngrams(s)


class TestBuildIndex:
    def test_single_record_unit_vector(self):
        idx = build_sparse_index(record_set_from_strings(["ab"]))
        assert set(idx.vocab) == {"ab"}
        assert idx.doc_vectors[0] == {0: 1.0}

    def test_identical_records_identical_vectors(self):
        idx = build_sparse_index(record_set_from_strings(["abc", "abc"]))
        assert idx.doc_vectors[0] == idx.doc_vectors[1]

    def test_idf_hand_oracle(self):
        # corpus {"abc","abd"}: df(ab)=2, df(bc)=1 -> idf(ab) < idf(bc)
        idx = build_sparse_index(record_set_from_strings(["abc", "abd"]))
        idf_ab = idx.idf[idx.vocab["ab"]]
        idf_bc = idx.idf[idx.vocab["bc"]]
        assert idf_ab == pytest.approx(math.log(3 / 3) + 1)
        assert idf_bc == pytest.approx(math.log(3 / 2) + 1)
        assert idf_ab < idf_bc
        assert all(idx.idf > 0)

    def test_empty_corpus_rejected(self):
        with pytest.raises(InputError):
            build_sparse_index(record_set_from_strings([]))

    def test_doc_vectors_unit_norm(self):
        rng = random.Random(3)
        idx = build_sparse_index(record_set_from_strings(random_strings(rng, 40)))
        for vec in idx.doc_vectors:
            if vec:
                assert math.sqrt(sum(w * w for w in vec.values())) == pytest.approx(1.0, abs=1e-6)

    def test_inverted_lists_match_doc_vectors(self):
        rng = random.Random(4)
        idx = build_sparse_index(record_set_from_strings(random_strings(rng, 30)))
        rebuilt = [dict() for _ in range(idx.corpus_size)]
        for tid in range(len(idx.vocab)):
            for rid, w in zip(idx.postings_ids[tid], idx.postings_wts[tid]):
                rebuilt[int(rid)][tid] = float(w)
        assert rebuilt == idx.doc_vectors


class TestSparseTopk:
    def test_exact_self_match_rank1(self):
        corpus = record_set_from_strings(["alpha", "beta", "gamma"])
        idx = build_sparse_index(corpus)
        hits = sparse_topk(idx, make_record(0, "beta"), 3)
        assert hits[0].record_id == 1
        assert hits[0].score == pytest.approx(1.0, abs=1e-6)

    def test_empty_query_empty_hits(self):
        idx = build_sparse_index(record_set_from_strings(["alpha"]))
        assert sparse_topk(idx, make_record(0, "   "), 5) == []

    def test_scores_sorted_and_bounded(self):
        rng = random.Random(5)
        corpus = record_set_from_strings(random_strings(rng, 60))
        idx = build_sparse_index(corpus)
        for q in random_strings(rng, 20):
            hits = sparse_topk(idx, make_record(0, q), 30)
            scores = [h.score for h in hits]
            assert scores == sorted(scores, reverse=True)
            assert all(0.0 <= s <= 1.0 + 1e-9 for s in scores)

    def test_matches_full_scan_oracle(self):
        rng = random.Random(6)
        for trial in range(50):
            norms = random_strings(rng, rng.randint(2, 50))
            corpus = record_set_from_strings(norms)
            idx = build_sparse_index(corpus)
            query = rng.choice([rng.choice(norms), random_strings(rng, 1)[0]])
            k = rng.choice([1, 5, 30])
            hits = sparse_topk(idx, make_record(0, query), k)
            expected = oracle_sparse_rank(corpus.norms, make_record(0, query).norm, k)
            assert [h.record_id for h in hits] == [rid for rid, _ in expected]
            for h, (_, s) in zip(hits, expected):
                assert h.score == pytest.approx(s, abs=1e-9)

    def test_row_permutation_invariance(self):
        rng = random.Random(8)
        norms = random_strings(rng, 25, distinct=True)
        query = make_record(0, norms[3][:-1] + "x")
        # k covers the whole corpus so tied tails cannot differ across orders
        base = build_sparse_index(record_set_from_strings(norms))
        base_hits = sparse_topk(base, query, len(norms))
        shuffled = norms[:]
        rng.shuffle(shuffled)
        perm = build_sparse_index(record_set_from_strings(shuffled))
        perm_hits = sparse_topk(perm, query, len(norms))
        assert Counter((shuffled[h.record_id], round(h.score, 9)) for h in perm_hits) \
            == Counter((norms[h.record_id], round(h.score, 9)) for h in base_hits)

    def test_empty_norm_records_not_retrievable(self):
        corpus = record_set_from_strings(["alpha", "   ", "beta"])
        idx = build_sparse_index(corpus)
        hits = sparse_topk(idx, make_record(0, "alpha"), 10)
        assert 1 not in {h.record_id for h in hits}


class TestPersistence:
    def test_round_trip(self, tmp_path):
        rng = random.Random(9)
        norms = random_strings(rng, 30)
        corpus = record_set_from_strings(norms)
        idx = build_sparse_index(corpus)
        path = tmp_path / "index.enls"
        save_sparse_index(idx, path)
        loaded = load_sparse_index(path)
        assert loaded.vocab == idx.vocab
        assert np.array_equal(loaded.idf, idx.idf)
        assert loaded.doc_vectors == idx.doc_vectors
        q = make_record(0, norms[0])
        assert sparse_topk(loaded, q, 5) == sparse_topk(idx, q, 5)

    def test_version_mismatch_rejected(self, tmp_path):
        idx = build_sparse_index(record_set_from_strings(["ab"]))
        path = tmp_path / "index.enls"
        save_sparse_index(idx, path)
        data = bytearray(path.read_bytes())
        data[4] = 99  # bump version field
        path.write_bytes(bytes(data))
        with pytest.raises(IndexFormatError, match="version"):
            load_sparse_index(path)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "index.enls"
        path.write_bytes(b"XXXX" + b"\0" * 30)
        with pytest.raises(IndexFormatError):
            load_sparse_index(path)

    def test_truncated_rejected(self, tmp_path):
        idx = build_sparse_index(record_set_from_strings(["abcd", "bcde"]))
        path = tmp_path / "index.enls"
        save_sparse_index(idx, path)
        path.write_bytes(path.read_bytes()[:-7])
        with pytest.raises(IndexFormatError):
            load_sparse_index(path)
