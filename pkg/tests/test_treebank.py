import math

import pytest

from cdsgen.errors import MeasureUndefinedError
from cdsgen.treebank import (
    ParseReport,
    UDSentence,
    UDToken,
    lemma_stream,
    parse_conllu,
    pos_rates,
    root_dependency_count,
)


def _conllu(*blocks):
    return "\n\n".join("\n".join(b) for b in blocks) + "\n"


GO_AHEAD = [
    "1\tgo\tgo\tVERB\t_\t_\t0\troot\t_\t_",
    "2\tahead\tahead\tADV\t_\t_\t1\tadvmod\t_\t_",
]


class TestParseConllu:
    def test_basic_block(self, tmp_path):
        f = tmp_path / "a.conllu"
        f.write_text(_conllu(GO_AHEAD), encoding="utf-8")
        sents = parse_conllu(f)
        assert len(sents) == 1
        assert sents[0].root_index() == 1
        assert [t.form for t in sents[0].tokens] == ["go", "ahead"]

    def test_blank_file(self, tmp_path):
        f = tmp_path / "a.conllu"
        f.write_text("", encoding="utf-8")
        assert parse_conllu(f) == []

    def test_comments_and_ranges_skipped(self, tmp_path):
        f = tmp_path / "a.conllu"
        block = ["# sent_id = 1", "1-2\tgonna\t_\t_\t_\t_\t_\t_\t_\t_"] + GO_AHEAD
        f.write_text(_conllu(block), encoding="utf-8")
        report = ParseReport()
        sents = parse_conllu(f, report=report)
        assert len(sents) == 1
        assert report.comment_lines == 1
        assert report.range_lines == 1

    def test_two_roots_rejected_in_strict_mode(self, tmp_path):
        f = tmp_path / "a.conllu"
        block = [
            "1\ta\ta\tNOUN\t_\t_\t0\troot\t_\t_",
            "2\tb\tb\tNOUN\t_\t_\t0\troot\t_\t_",
        ]
        f.write_text(_conllu(block), encoding="utf-8")
        report = ParseReport()
        assert parse_conllu(f, strict=True, report=report) == []
        assert len(report.rejected_blocks) == 1

    def test_two_roots_repaired_in_lenient_mode(self, tmp_path):
        f = tmp_path / "a.conllu"
        block = [
            "1\ta\ta\tNOUN\t_\t_\t0\troot\t_\t_",
            "2\tb\tb\tNOUN\t_\t_\t0\troot\t_\t_",
        ]
        f.write_text(_conllu(block), encoding="utf-8")
        (sent,) = parse_conllu(f, strict=False)
        assert sent.root_index() == 1
        assert sent.tokens[1].head == 1
        assert sent.tokens[1].deprel == "parataxis"

    def test_non_consecutive_ids_rejected(self, tmp_path):
        f = tmp_path / "a.conllu"
        block = ["1\ta\ta\tNOUN\t_\t_\t0\troot\t_\t_", "3\tb\tb\tNOUN\t_\t_\t1\tdep\t_\t_"]
        f.write_text(_conllu(block), encoding="utf-8")
        report = ParseReport()
        assert parse_conllu(f, report=report) == []
        assert "non-consecutive" in report.rejected_blocks[0][1]

    def test_head_out_of_range_rejected(self, tmp_path):
        f = tmp_path / "a.conllu"
        block = ["1\ta\ta\tNOUN\t_\t_\t5\tdep\t_\t_"]
        f.write_text(_conllu(block), encoding="utf-8")
        report = ParseReport()
        assert parse_conllu(f, report=report) == []

    def test_line_accounting_reconciles(self, tmp_path):
        f = tmp_path / "a.conllu"
        text = "# c\n" + "\n".join(GO_AHEAD) + "\n\n1\tbad\n\n"
        f.write_text(text, encoding="utf-8")
        report = ParseReport()
        sents = parse_conllu(f, report=report)
        consumed = report.comment_lines + report.range_lines + report.token_lines
        # the rejected block's lines are accounted by its rejection record
        assert len(sents) == 1
        assert consumed == 3
        assert len(report.rejected_blocks) == 1


def _sent(*tokens):
    return UDSentence(tokens=[UDToken(*t) for t in tokens])


# Mini-treebank with 24 content tokens, hand-tallied:
# 8 NOUN, 5 VERB, 4 PRON, 3 ADJ, 2 INTJ, 2 ADV (+2 PUNCT excluded)
MINI_TREEBANK = [
    _sent(
        (1, "oh", "oh", "INTJ", 2, "discourse"),
        (2, "look", "look", "VERB", 0, "root"),
        (3, "you", "you", "PRON", 2, "nsubj"),
        (4, "see", "see", "VERB", 2, "ccomp"),
        (5, "the", "the", "NOUN", 6, "det"),
        (6, "doggy", "doggy", "NOUN", 4, "obj"),
        (7, ".", ".", "PUNCT", 2, "punct"),
    ),
    _sent(
        (1, "big", "big", "ADJ", 2, "amod"),
        (2, "truck", "truck", "NOUN", 0, "root"),
        (3, "there", "there", "ADV", 2, "advmod"),
        (4, "it", "it", "PRON", 5, "nsubj"),
        (5, "goes", "go", "VERB", 2, "parataxis"),
        (6, "now", "now", "ADV", 5, "advmod"),
        (7, ".", ".", "PUNCT", 2, "punct"),
    ),
    _sent(
        (1, "you", "you", "PRON", 2, "nsubj"),
        (2, "want", "want", "VERB", 0, "root"),
        (3, "a", "a", "NOUN", 5, "det"),
        (4, "little", "little", "ADJ", 5, "amod"),
        (5, "bear", "bear", "NOUN", 2, "obj"),
        (6, "he", "he", "PRON", 7, "nsubj"),
        (7, "eats", "eat", "VERB", 2, "conj"),
        (8, "nice", "nice", "ADJ", 9, "amod"),
        (9, "banana", "banana", "NOUN", 7, "obj"),
    ),
    _sent(
        (1, "wow", "wow", "INTJ", 0, "root"),
        (2, "ball", "ball", "NOUN", 1, "dep"),
        (3, "ball", "ball", "NOUN", 1, "dep"),
    ),
]


class TestPosRates:
    def test_hand_tallied_rates(self):
        rates = pos_rates(MINI_TREEBANK)
        assert rates["NOUN"] == pytest.approx(8 / 24)
        assert rates["VERB"] == pytest.approx(5 / 24)
        assert rates["PRON"] == pytest.approx(4 / 24)
        assert rates["ADJ"] == pytest.approx(3 / 24)
        assert rates["INTJ"] == pytest.approx(2 / 24)

    def test_simple_proportion(self):
        sent = _sent(*[(i + 1, "w", "w", "NOUN" if i < 3 else "VERB", 0 if i == 0 else 1, "dep") for i in range(10)])
        assert pos_rates([sent])["NOUN"] == pytest.approx(0.3)

    def test_absent_category_rate_zero(self):
        sent = _sent((1, "a", "a", "NOUN", 0, "root"))
        assert pos_rates([sent])["INTJ"] == 0.0

    def test_all_tags_sum_to_one(self):
        rates = pos_rates(MINI_TREEBANK, categories=None)
        assert math.isclose(sum(rates.values()), 1.0, abs_tol=1e-12)

    def test_empty_is_undefined(self):
        with pytest.raises(MeasureUndefinedError):
            pos_rates([])


class TestRootDependencies:
    def test_single_word_sentence(self):
        assert root_dependency_count(_sent((1, "hi", "hi", "INTJ", 0, "root"))) == 0

    def test_two_dependents(self):
        sent = _sent(
            (1, "a", "a", "NOUN", 2, "dep"),
            (2, "v", "v", "VERB", 0, "root"),
            (3, "b", "b", "NOUN", 4, "dep"),
            (4, "c", "c", "NOUN", 2, "dep"),
        )
        assert root_dependency_count(sent) == 2

    def test_hand_built_six_token_tree(self):
        # root at 2; direct non-PUNCT dependents: 1, 3, 5 -> 3
        sent = _sent(
            (1, "oh", "oh", "INTJ", 2, "discourse"),
            (2, "go", "go", "VERB", 0, "root"),
            (3, "you", "you", "PRON", 2, "nsubj"),
            (4, "the", "the", "DET", 5, "det"),
            (5, "car", "car", "NOUN", 2, "obj"),
            (6, ".", ".", "PUNCT", 2, "punct"),
        )
        assert root_dependency_count(sent) == 3

    def test_punct_dependent_excluded(self):
        sent = _sent(
            (1, "go", "go", "VERB", 0, "root"),
            (2, ".", ".", "PUNCT", 1, "punct"),
        )
        assert root_dependency_count(sent) == 0

    def test_arcs_mode(self):
        sent = MINI_TREEBANK[2]
        assert root_dependency_count(sent, mode="arcs") == 8  # all non-root content tokens

    def test_bounded_by_sentence_size(self):
        for sent in MINI_TREEBANK:
            count = root_dependency_count(sent)
            assert count is not None
            assert count <= len(sent.tokens) - 1


class TestLemmaStream:
    def test_lemmas_in_order(self):
        sent = _sent(
            (1, "dogs", "dog", "NOUN", 0, "root"),
            (2, "dogs", "dog", "NOUN", 1, "dep"),
            (3, "dog", "dog", "NOUN", 1, "dep"),
        )
        assert lemma_stream([sent]) == ["dog", "dog", "dog"]

    def test_empty(self):
        assert lemma_stream([]) == []

    def test_lowercasing_and_punct_exclusion(self):
        sent = _sent(
            (1, "Dog", "Dog", "NOUN", 0, "root"),
            (2, ".", ".", "PUNCT", 1, "punct"),
        )
        assert lemma_stream([sent]) == ["dog"]
