import json

import pytest
from hypothesis import given, strategies as st

from ensemblelink.corpus import load_records, make_record, normalize_text
from ensemblelink.errors import InputError, SchemaError


class TestNormalizeText:
    def test_whitespace_collapse(self):
        assert normalize_text("  New   York\tCity ") == "new york city"

    def test_diacritics_preserved(self):
        assert normalize_text("Lutte ouvrière") == "lutte ouvrière"

    def test_non_latin_preserved(self):
        assert normalize_text("Sieť") == "sieť"

    def test_empty(self):
        assert normalize_text("") == ""

    @given(st.text(max_size=60))
    def test_idempotent(self, s):
        once = normalize_text(s)
        assert normalize_text(once) == once

    @given(st.text(max_size=60))
    def test_nonempty_when_raw_has_content(self, s):
        if any(not c.isspace() for c in s):
            assert normalize_text(s) != ""


class TestLoadRecords:
    def test_csv_basic(self, tmp_path):
        p = tmp_path / "cities.csv"
        p.write_text('city\n"OKC, OK"\n"Queens, NY"\n', encoding="utf-8")
        rs = load_records(p, "csv", "city")
        assert len(rs) == 2
        assert [r.id for r in rs] == [0, 1]
        assert rs[0].raw == "OKC, OK"
        assert rs[0].norm == "okc, ok"

    def test_csv_header_only(self, tmp_path):
        p = tmp_path / "empty.csv"
        p.write_text("city\n", encoding="utf-8")
        assert len(load_records(p, "csv", "city")) == 0

    def test_jsonl(self, tmp_path):
        p = tmp_path / "rows.jsonl"
        rows = [{"name": "a"}, {"name": "b"}, {"name": "c"}]
        p.write_text("\n".join(json.dumps(r) for r in rows), encoding="utf-8")
        rs = load_records(p, "jsonl", "name")
        assert [r.id for r in rs] == [0, 1, 2]
        assert [r.raw for r in rs] == ["a", "b", "c"]

    def test_missing_file(self, tmp_path):
        with pytest.raises(InputError):
            load_records(tmp_path / "nope.csv", "csv", "city")

    def test_missing_column_named(self, tmp_path):
        p = tmp_path / "x.csv"
        p.write_text("other\nfoo\n", encoding="utf-8")
        with pytest.raises(SchemaError, match="city"):
            load_records(p, "csv", "city")

    def test_malformed_jsonl_row_number(self, tmp_path):
        p = tmp_path / "bad.jsonl"
        p.write_text('{"name": "a"}\n{broken\n', encoding="utf-8")
        with pytest.raises(InputError, match="row 2"):
            load_records(p, "jsonl", "name")

    def test_block_column(self, tmp_path):
        p = tmp_path / "x.csv"
        p.write_text("city,state\nAustin,TX\nReno,NV\n", encoding="utf-8")
        rs = load_records(p, "csv", "city", "state")
        assert rs[0].block_key == "TX"
        assert rs[1].extras["state"] == "NV"

    def test_deterministic(self, tmp_path):
        p = tmp_path / "x.csv"
        p.write_text("city\nAustin\nReno\nAustin\n", encoding="utf-8")
        a = load_records(p, "csv", "city")
        b = load_records(p, "csv", "city")
        assert a.records == b.records
        # duplicate strings stay distinct records
        assert a[0].norm == a[2].norm and a[0].id != a[2].id

    def test_empty_after_normalization_flagged(self):
        rec = make_record(0, "   ")
        assert rec.is_empty
