import io

import pytest
from hypothesis import given, settings

from crfner.corpus import (
    BioError,
    ConllFormatError,
    Corpus,
    EntitySpan,
    Layout,
    Sentence,
    Token,
    bio_from_spans,
    read_conll,
    repair_bio,
    repair_labels,
    spans_from_bio,
    validate_bio,
    words_to_syllables,
    write_conll,
)
from strategies import labeled_corpus, labeled_sentence

SL = Layout(("surface", "label"))


def sent(*pairs):
    return Sentence(tuple(Token(w, label=l) for w, l in pairs))


# -- reading / writing -----------------------------------------------------

def test_read_single_token():
    c = read_conll(io.StringIO("Hà_Nội B-LOC\n\n"), SL)
    assert len(c) == 1 and len(c[0]) == 1
    assert c[0][0].surface == "Hà_Nội" and c[0][0].label == "B-LOC"


def test_read_two_sentences_mixed_separators():
    c = read_conll(io.StringIO("a\tO\nb  B-PER\n\nc O\n\n\n"), SL)
    assert [s.surfaces for s in c] == [["a", "b"], ["c"]]


def test_read_without_trailing_blank():
    c = read_conll(io.StringIO("a O\nb O"), SL)
    assert len(c) == 1 and len(c[0]) == 2


def test_arity_error_has_line_number():
    with pytest.raises(ConllFormatError) as exc:
        read_conll(io.StringIO("a b c\n"), SL)
    assert exc.value.lineno == 1
    with pytest.raises(ConllFormatError) as exc:
        read_conll(io.StringIO("a O\n\nb O\nc\n"), SL)
    assert exc.value.lineno == 4


def test_bad_label_is_format_error():
    with pytest.raises(ConllFormatError):
        read_conll(io.StringIO("a X-PER\n"), SL)


def test_empty_stream():
    c = read_conll(io.StringIO(""), SL)
    assert len(c) == 0
    assert write_conll(c) == ""


def test_write_one_sentence():
    c = Corpus((sent(("a", "O"), ("b", "B-PER")),), SL)
    assert write_conll(c) == "a\tO\nb\tB-PER\n\n"


def test_skip_column_round_trip():
    layout = Layout.parse("surface,_,label")
    c = read_conll(io.StringIO("a x O\n"), layout)
    assert write_conll(c) == "a\t_\tO\n\n"


def test_docstart_is_ordinary_token():
    c = read_conll(io.StringIO("-DOCSTART- O\n\na O\n"), SL)
    assert c[0][0].surface == "-DOCSTART-"


def test_layout_validation():
    with pytest.raises(ValueError):
        Layout(("label",))
    with pytest.raises(ValueError):
        Layout(("surface", "surface"))
    with pytest.raises(ValueError):
        Layout(("surface", "ner"))


def test_token_invariants():
    with pytest.raises(ValueError):
        Token("")
    with pytest.raises(ValueError):
        Token("Hà Nội")
    with pytest.raises(ValueError):
        Token("x", label="B-")
    with pytest.raises(ValueError):
        Sentence(())


@settings(max_examples=200, deadline=None)
@given(labeled_corpus())
def test_round_trip(corpus):
    assert read_conll(io.StringIO(write_conll(corpus)), corpus.layout) == corpus


# -- BIO -------------------------------------------------------------------

def test_validate_examples():
    assert validate_bio(["O", "B-PER", "I-PER"]) == []
    assert [p for p, _ in validate_bio(["I-PER", "O"])] == [0]
    assert [p for p, _ in validate_bio(["B-PER", "I-LOC"])] == [1]


def test_validate_needs_labels():
    with pytest.raises(BioError):
        validate_bio(Sentence((Token("a"),)))


def test_repair_examples():
    assert repair_labels(["I-PER", "I-PER"]) == ["B-PER", "I-PER"]
    assert repair_labels(["B-LOC", "I-PER"]) == ["B-LOC", "B-PER"]
    assert repair_labels(["O", "B-ORG", "I-ORG", "O"]) == ["O", "B-ORG", "I-ORG", "O"]
    s = sent(("a", "B-LOC"), ("b", "I-LOC"))
    assert repair_bio(s) is s


@settings(max_examples=300, deadline=None)
@given(labeled_sentence())
def test_repair_idempotent_and_valid(s):
    once = repair_bio(s)
    assert validate_bio(once) == []
    assert repair_bio(once) == once
    # only illegal I-X are touched, and only their prefix changes
    for a, b in zip(s.labels, once.labels):
        assert a == b or (a.startswith("I-") and b == "B-" + a[2:])


def test_spans_examples():
    assert spans_from_bio(["B-LOC", "I-LOC", "O"]) == [EntitySpan("LOC", 0, 1)]
    assert spans_from_bio(["O", "O"]) == []
    assert spans_from_bio(["B-PER", "B-PER"]) == [EntitySpan("PER", 0, 0), EntitySpan("PER", 1, 1)]
    assert spans_from_bio(["B-PER", "B-LOC", "I-LOC"]) == [EntitySpan("PER", 0, 0), EntitySpan("LOC", 1, 2)]


def test_spans_reject_invalid():
    with pytest.raises(BioError, match="repair_bio"):
        spans_from_bio(["I-PER"])


@settings(max_examples=300, deadline=None)
@given(labeled_sentence())
def test_spans_reconstruct(s):
    labels = repair_bio(s).labels
    spans = spans_from_bio(labels)
    assert bio_from_spans(spans, len(labels)) == labels
    for a, b in zip(spans, spans[1:]):
        assert a.end < b.start


def test_span_invariants():
    with pytest.raises(ValueError):
        EntitySpan("PER", 2, 1)


# -- syllables -------------------------------------------------------------

def test_syllables_documented_example():
    out = words_to_syllables(sent(("Hà_Nội", "B-LOC")))
    assert [(t.surface, t.label) for t in out] == [("Hà", "B-LOC"), ("Nội", "I-LOC")]


def test_syllables_identity_and_three_way():
    assert words_to_syllables(sent(("học", "O"))) == sent(("học", "O"))
    out = words_to_syllables(sent(("Buôn_Mê_Thuột", "B-LOC")))
    assert out.labels == ["B-LOC", "I-LOC", "I-LOC"]
    out = words_to_syllables(sent(("Công_ty", "B-ORG"), ("Vina_milk", "I-ORG"), ("học_sinh", "O")))
    assert out.labels == ["B-ORG", "I-ORG", "I-ORG", "I-ORG", "O", "O"]


def test_syllables_copy_pos_and_unlabeled():
    out = words_to_syllables(Sentence((Token("Hà_Nội", "Np", "B-NP"),)))
    assert [(t.pos, t.chunk, t.label) for t in out] == [("Np", "B-NP", None)] * 2


@pytest.mark.parametrize("bad", ["_Hà", "Hà_", "Hà__Nội", "_"])
def test_syllables_reject_empty(bad):
    with pytest.raises(ValueError, match="empty syllable"):
        words_to_syllables(sent((bad, "O")))


def _span_texts(s):
    labels = repair_bio(s).labels
    return [
        (sp.entity_type, "".join(t.surface.replace("_", "") for t in s.tokens[sp.start:sp.end + 1]))
        for sp in spans_from_bio(labels)
    ]


@settings(max_examples=300, deadline=None)
@given(labeled_sentence())
def test_syllables_preserve_spans(s):
    s = repair_bio(s)
    out = words_to_syllables(s)
    assert validate_bio(out) == []
    assert _span_texts(out) == _span_texts(s)
