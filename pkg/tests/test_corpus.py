import io
import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from claimstage.corpus import (
    Corpus,
    language_view,
    parse_fact_checks,
    parse_pairs,
    parse_posts,
    parse_tasks,
    read_jsonl,
    validate_split,
    write_jsonl,
)
from claimstage.errors import (
    CorpusError,
    CorpusLookupError,
    RecordError,
    ValidationError,
)
from claimstage.records import (
    FactCheck,
    LangTuple,
    Post,
    record_from_json,
    record_to_json,
)

FC_HEADER = "fact_check_id,claim,instances,title\n"
POST_HEADER = "post_id,instances,ocr,verdicts,text\n"


def _fc_csv(*rows: str) -> io.StringIO:
    return io.StringIO(FC_HEADER + "".join(r + "\n" for r in rows))


def _post_csv(*rows: str) -> io.StringIO:
    return io.StringIO(POST_HEADER + "".join(r + "\n" for r in rows))


class TestParseFactChecks:
    def test_tuple_grammar_applied(self):
        rows = parse_fact_checks(
            _fc_csv('1,"(""Der Text"", ""The text"", [(""deu"", 0.99)])",inst,')
        )
        assert rows == [
            FactCheck(1, LangTuple("Der Text", "The text", (("deu", 0.99),)), None, "inst")
        ]

    def test_empty_title_is_absent(self):
        rows = parse_fact_checks(_fc_csv('5,"(""x"", ""y"")",,'))
        assert rows[0].title is None

    def test_duplicate_id_is_fatal(self):
        with pytest.raises(CorpusError, match="duplicate fact_check_id 3"):
            parse_fact_checks(_fc_csv('3,"(""a"", ""b"")",,', '3,"(""c"", ""d"")",,'))

    def test_malformed_claim_raises_record_error_with_row(self):
        with pytest.raises(RecordError) as excinfo:
            parse_fact_checks(_fc_csv('1,"(""a"", ""b"")",,', "2,broken,inst,"))
        assert excinfo.value.row == 3
        assert excinfo.value.raw == "broken"

    def test_rejects_sink_collects_and_keeps_good_rows(self):
        rejects = []
        rows = parse_fact_checks(
            _fc_csv('1,"(""a"", ""b"")",,', "2,broken,,", '4,"(""c"", ""d"")",,'),
            rejects=rejects,
        )
        assert [fc.fact_check_id for fc in rows] == [1, 4]
        assert len(rejects) == 1 and rejects[0].field == "claim"

    def test_count_conservation(self):
        rejects = []
        stream = _fc_csv(
            '1,"(""a"", ""b"")",,',
            "2,broken,,",
            '3,"(""c"", ""d"")",,',
            "bad-id,ignored,,",
        )
        rows = parse_fact_checks(stream, rejects=rejects)
        assert len(rows) + len(rejects) == 4

    def test_missing_claim_rejected(self):
        rejects = []
        rows = parse_fact_checks(_fc_csv("9,,inst,"), rejects=rejects)
        assert rows == [] and rejects[0].reason == "fact-check without a claim"

    def test_missing_column_is_fatal(self):
        with pytest.raises(CorpusError, match="missing columns"):
            parse_fact_checks(io.StringIO("fact_check_id,claim\n"))


class TestParsePosts:
    def test_ocr_and_absent_text(self):
        rows = parse_posts(
            _post_csv('1,inst,"[(""hola"", ""hello"", [(""spa"", 1.0)])]",[],')
        )
        post = rows[0]
        assert post.ocr == (LangTuple("hola", "hello", (("spa", 1.0),)),)
        assert post.text is None

    def test_verdicts_decoded(self):
        rows = parse_posts(_post_csv("2,inst,[],\"['False.']\",\"('a', 'b')\""))
        assert rows[0].verdicts == ("False.",)

    def test_duplicate_post_id_fatal(self):
        with pytest.raises(CorpusError, match="duplicate post_id"):
            parse_posts(_post_csv("1,i,[],[],\"('a','b')\"", "1,i,[],[],\"('c','d')\""))

    def test_contentless_post_kept_but_flagged(self):
        rows = parse_posts(_post_csv("7,i,[],[],"))
        assert rows[0].has_content is False

    def test_bad_ocr_collected(self):
        rejects = []
        rows = parse_posts(_post_csv("1,i,broken,[],\"('a','b')\""), rejects=rejects)
        assert rows == [] and rejects[0].field == "ocr"


class TestParsePairs:
    def test_multi_gold(self):
        pairs = parse_pairs(io.StringIO("post_id,fact_check_id\n1,10\n1,11\n2,10\n"))
        assert len(pairs) == 3
        assert pairs.golds_for(1) == {10, 11}

    def test_duplicates_deduplicated(self):
        pairs = parse_pairs(io.StringIO("post_id,fact_check_id\n1,10\n1,10\n"))
        assert len(pairs) == 1

    def test_empty_file_with_header(self):
        pairs = parse_pairs(io.StringIO("post_id,fact_check_id\n"))
        assert len(pairs) == 0

    def test_non_integer_id_is_record_error(self):
        with pytest.raises(RecordError):
            parse_pairs(io.StringIO("post_id,fact_check_id\nx,10\n"))


class TestParseTasks:
    def test_list_lengths_preserved(self):
        payload = {
            "tha": {
                "posts_train": list(range(465)),
                "posts_dev": list(range(1000, 1042)),
                "fact_checks": list(range(2000, 2382)),
            }
        }
        split = parse_tasks(json.dumps(payload))
        entry = split.entry("tha")
        assert len(entry.posts_train) == 465
        assert len(entry.posts_dev) == 42
        assert len(entry.fact_checks) == 382

    def test_train_dev_overlap_rejected(self):
        payload = {"deu": {"posts_train": [1, 2], "posts_dev": [2], "fact_checks": []}}
        with pytest.raises(ValidationError, match="overlap"):
            parse_tasks(json.dumps(payload))

    def test_crosslingual_only_file(self):
        payload = {"crosslingual": {"posts_train": [], "posts_dev": [1], "fact_checks": [2]}}
        split = parse_tasks(json.dumps(payload))
        assert split.languages() == []
        assert split.crosslingual is not None

    def test_unknown_field_shape_is_fatal(self):
        payload = {"eng": {"posts_dev": [], "bogus": []}}
        with pytest.raises(CorpusError, match="unknown fields"):
            parse_tasks(json.dumps(payload))

    def test_duplicate_ids_dropped(self):
        payload = {"eng": {"posts_train": [], "posts_dev": [5, 5, 6], "fact_checks": []}}
        split = parse_tasks(json.dumps(payload))
        assert split.entry("eng").posts_dev == (5, 6)

    def test_non_object_entry_fatal(self):
        with pytest.raises(CorpusError):
            parse_tasks(json.dumps({"eng": [1, 2]}))


def _tiny_corpus() -> Corpus:
    posts = [Post(post_id=i, text=LangTuple(f"post {i}", None)) for i in range(4)]
    fcs = [FactCheck(fact_check_id=i, claim=LangTuple(f"claim {i}", None)) for i in range(10, 16)]
    return Corpus(posts, fcs)


class TestViews:
    def _split(self):
        return parse_tasks(
            json.dumps(
                {
                    "deu": {"posts_train": [0], "posts_dev": [1, 2], "fact_checks": [10, 11, 12]},
                    "crosslingual": {
                        "posts_train": [],
                        "posts_dev": [1, 2, 3],
                        "fact_checks": [10, 11, 12, 13, 14, 15],
                    },
                }
            )
        )

    def test_language_view_resolves_records(self):
        view = language_view(_tiny_corpus(), self._split(), "deu")
        assert [p.post_id for p in view.posts_dev] == [1, 2]
        assert [f.fact_check_id for f in view.fact_check_pool] == [10, 11, 12]

    def test_crosslingual_view_returns_full_pool(self):
        view = language_view(_tiny_corpus(), self._split(), "crosslingual")
        assert len(view.fact_check_pool) == 6
        assert len(view.posts_dev) == 3

    def test_unknown_language_is_lookup_error(self):
        with pytest.raises(CorpusLookupError):
            language_view(_tiny_corpus(), self._split(), "tha")

    def test_validate_split_catches_dangling_ids(self):
        split = parse_tasks(
            json.dumps({"deu": {"posts_train": [], "posts_dev": [99], "fact_checks": []}})
        )
        with pytest.raises(ValidationError, match="unknown post_id 99"):
            validate_split(split, _tiny_corpus())

    def test_corpus_rejects_duplicates(self):
        post = Post(post_id=1, text=LangTuple("x", None))
        with pytest.raises(CorpusError):
            Corpus([post, post], [])


_lang_tuples = st.builds(
    LangTuple,
    original=st.text(max_size=20),
    translation=st.one_of(st.none(), st.text(min_size=1, max_size=20)),
    languages=st.lists(
        st.tuples(
            st.text(alphabet="abcdefghijklmnopqrstuvwxyz", min_size=2, max_size=3),
            st.floats(min_value=0.0, max_value=1.0, allow_nan=False),
        ),
        max_size=2,
    ).map(tuple),
)

_posts = st.builds(
    Post,
    post_id=st.integers(min_value=0, max_value=10**9),
    ocr=st.lists(_lang_tuples, max_size=3).map(tuple),
    text=st.one_of(st.none(), _lang_tuples),
    verdicts=st.lists(st.text(max_size=10), max_size=3).map(tuple),
    instances=st.text(max_size=20),
)

_fact_checks = st.builds(
    FactCheck,
    fact_check_id=st.integers(min_value=0, max_value=10**9),
    claim=_lang_tuples,
    title=st.one_of(st.none(), _lang_tuples),
    instances=st.text(max_size=20),
)


class TestJsonRoundTrip:
    @settings(max_examples=50)
    @given(record=st.one_of(_posts, _fact_checks))
    def test_record_json_round_trip(self, record):
        assert record_from_json(record_to_json(record)) == record

    def test_jsonl_file_round_trip(self, tmp_path):
        records = [
            Post(post_id=1, text=LangTuple("a", "b", (("eng", 1.0),)), verdicts=("False.",)),
            Post(post_id=2, ocr=(LangTuple("c", None),)),
            FactCheck(fact_check_id=3, claim=LangTuple("x", None), title=LangTuple("t", "u")),
        ]
        path = tmp_path / "corpus.jsonl"
        assert write_jsonl(records, path) == 3
        assert list(read_jsonl(path)) == records
