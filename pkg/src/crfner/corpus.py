"""Column-formatted corpora, BIO labels and word/syllable conversion.

A corpus file holds one token per line with whitespace-separated columns
and a blank line between sentences.  Which columns are present, and in what
order, is declared by the caller through a :class:`Layout`::

    Hà_Nội    Np    B-NP    B-LOC
    là        V     B-VP    O

Columns named ``_`` are skipped on read (e.g. a nested-entity column) and
written back as ``_``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import Iterable, List, Optional, Sequence, TextIO, Tuple, Union

COLUMN_NAMES = ("surface", "pos", "chunk", "label")
SKIP = "_"

_LABEL_RE = re.compile(r"^(?:O|[BI]-[A-Za-z0-9]+)$")


class ConllFormatError(ValueError):
    """Malformed corpus input; ``lineno`` is 1-based."""

    def __init__(self, message: str, lineno: Optional[int] = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class BioError(ValueError):
    pass


def is_valid_label(label: str) -> bool:
    return bool(_LABEL_RE.match(label))


def split_label(label: str) -> Tuple[str, Optional[str]]:
    """``"B-PER"`` -> ``("B", "PER")``; ``"O"`` -> ``("O", None)``."""
    if label == "O":
        return "O", None
    return label[0], label[2:]


@dataclass(frozen=True)
class Token:
    surface: str
    pos: Optional[str] = None
    chunk: Optional[str] = None
    label: Optional[str] = None

    def __post_init__(self):
        if not self.surface or any(c.isspace() for c in self.surface):
            raise ValueError(f"invalid token surface {self.surface!r}")
        if self.label is not None and not is_valid_label(self.label):
            raise ValueError(f"invalid BIO label {self.label!r}")


@dataclass(frozen=True)
class EntitySpan:
    entity_type: str
    start: int
    end: int  # inclusive

    def __post_init__(self):
        if not 0 <= self.start <= self.end:
            raise ValueError(f"bad span bounds ({self.start}, {self.end})")


@dataclass(frozen=True)
class Sentence:
    tokens: Tuple[Token, ...]

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        if not self.tokens:
            raise ValueError("a sentence needs at least one token")

    def __len__(self):
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)

    def __getitem__(self, i):
        return self.tokens[i]

    @property
    def surfaces(self) -> List[str]:
        return [t.surface for t in self.tokens]

    @property
    def labels(self) -> List[Optional[str]]:
        return [t.label for t in self.tokens]

    def is_labeled(self) -> bool:
        return all(t.label is not None for t in self.tokens)

    def with_labels(self, labels: Sequence[str]) -> "Sentence":
        if len(labels) != len(self.tokens):
            raise ValueError("label count does not match token count")
        return Sentence(tuple(replace(t, label=l) for t, l in zip(self.tokens, labels)))


@dataclass(frozen=True)
class Layout:
    """Ordered column names; each is one of COLUMN_NAMES or ``_`` (skipped)."""

    columns: Tuple[str, ...] = ("surface", "label")

    def __post_init__(self):
        object.__setattr__(self, "columns", tuple(self.columns))
        named = [c for c in self.columns if c != SKIP]
        unknown = [c for c in named if c not in COLUMN_NAMES]
        if unknown:
            raise ValueError(f"unknown column name(s): {', '.join(unknown)}")
        if len(set(named)) != len(named):
            raise ValueError("duplicate column names in layout")
        if "surface" not in named:
            raise ValueError("layout must contain a surface column")

    @classmethod
    def parse(cls, text: str) -> "Layout":
        return cls(tuple(c.strip() for c in re.split(r"[,\s]+", text.strip()) if c.strip()))

    @classmethod
    def surface_and_label(cls, n_columns: int) -> "Layout":
        """First column surface, last column label, everything between skipped."""
        if n_columns < 2:
            raise ValueError("need at least two columns")
        return cls(("surface",) + (SKIP,) * (n_columns - 2) + ("label",))

    def __len__(self):
        return len(self.columns)

    def __contains__(self, name):
        return name in self.columns

    def __str__(self):
        return ",".join(self.columns)

    def without(self, name: str) -> "Layout":
        return Layout(tuple(c for c in self.columns if c != name))

    def with_column(self, name: str) -> "Layout":
        return Layout(self.columns + (name,))


@dataclass(frozen=True)
class Corpus:
    sentences: Tuple[Sentence, ...] = ()
    layout: Layout = field(default_factory=Layout)

    def __post_init__(self):
        object.__setattr__(self, "sentences", tuple(self.sentences))
        for i, sent in enumerate(self.sentences):
            for tok in sent:
                for name in ("pos", "chunk", "label"):
                    present = getattr(tok, name) is not None
                    if present != (name in self.layout):
                        raise ValueError(
                            f"sentence {i}: token {tok.surface!r} does not match layout {self.layout}"
                        )

    def __len__(self):
        return len(self.sentences)

    def __iter__(self):
        return iter(self.sentences)

    def __getitem__(self, i):
        return self.sentences[i]


def _token_from_fields(fields: Sequence[str], layout: Layout, lineno: int) -> Token:
    values = {name: value for name, value in zip(layout.columns, fields) if name != SKIP}
    label = values.get("label")
    if label is not None and not is_valid_label(label):
        raise ConllFormatError(f"invalid BIO label {label!r}", lineno)
    return Token(values["surface"], values.get("pos"), values.get("chunk"), label)


def read_conll(stream: Union[TextIO, Iterable[str]], layout: Layout) -> Corpus:
    """Parse a column-formatted corpus.

    Columns are split on any run of spaces/tabs.  A line whose column count
    differs from the layout raises :class:`ConllFormatError` with its line
    number.  An empty stream yields an empty corpus.
    """
    sentences: List[Sentence] = []
    buf: List[Token] = []
    arity = len(layout)
    for lineno, line in enumerate(stream, start=1):
        line = line.rstrip("\r\n")
        fields = line.split()
        if not fields:
            if buf:
                sentences.append(Sentence(tuple(buf)))
                buf = []
            continue
        if len(fields) != arity:
            raise ConllFormatError(
                f"expected {arity} columns ({layout}), found {len(fields)}", lineno
            )
        buf.append(_token_from_fields(fields, layout, lineno))
    if buf:
        sentences.append(Sentence(tuple(buf)))
    return Corpus(tuple(sentences), layout)


def token_fields(token: Token, layout: Layout) -> List[str]:
    out = []
    for name in layout.columns:
        if name == SKIP:
            out.append(SKIP)
        else:
            out.append(getattr(token, name))
    return out


def write_conll(corpus: Corpus, stream: Optional[TextIO] = None) -> str:
    """Serialize with single tabs; every sentence is followed by one blank line."""
    lines = []
    for sent in corpus:
        for tok in sent:
            lines.append("\t".join(token_fields(tok, corpus.layout)) + "\n")
        lines.append("\n")
    text = "".join(lines)
    if stream is not None:
        stream.write(text)
    return text


def _require_labels(labels: Sequence[Optional[str]]) -> None:
    for i, label in enumerate(labels):
        if label is None:
            raise BioError(f"token {i} is unlabeled")


def _labels_of(seq) -> List[Optional[str]]:
    if isinstance(seq, Sentence):
        return seq.labels
    return list(seq)


def validate_bio(sentence) -> List[Tuple[int, str]]:
    """Return ``(position, description)`` for every illegal ``I-X``.

    Accepts a :class:`Sentence` or a plain label sequence.
    """
    labels = _labels_of(sentence)
    _require_labels(labels)
    violations = []
    prev = "O"
    for i, label in enumerate(labels):
        prefix, etype = split_label(label)
        if prefix == "I":
            p_prefix, p_type = split_label(prev)
            if p_prefix == "O":
                violations.append((i, f"{label} does not continue an entity"))
            elif p_type != etype:
                violations.append((i, f"{label} follows {prev} (type mismatch)"))
        prev = label
    return violations


def repair_labels(labels: Sequence[str]) -> List[str]:
    _require_labels(labels)
    out = []
    prev = "O"
    for label in labels:
        prefix, etype = split_label(label)
        if prefix == "I":
            p_prefix, p_type = split_label(prev)
            if p_prefix == "O" or p_type != etype:
                label = "B-" + etype
        out.append(label)
        prev = label
    return out


def repair_bio(sentence: Sentence) -> Sentence:
    """Rewrite each ``I-X`` that does not continue an ``X`` span to ``B-X``."""
    labels = repair_labels(sentence.labels)
    if labels == sentence.labels:
        return sentence
    return sentence.with_labels(labels)


def spans_from_bio(labels) -> List[EntitySpan]:
    labels = _labels_of(labels)
    bad = validate_bio(labels)
    if bad:
        pos, desc = bad[0]
        raise BioError(f"invalid BIO at position {pos}: {desc}; run repair_bio first")
    spans = []
    start = etype = None
    for i, label in enumerate(labels):
        prefix, t = split_label(label)
        if prefix == "I":
            continue
        if etype is not None:
            spans.append(EntitySpan(etype, start, i - 1))
            etype = None
        if prefix == "B":
            start, etype = i, t
    if etype is not None:
        spans.append(EntitySpan(etype, start, len(labels) - 1))
    return spans


def bio_from_spans(spans: Iterable[EntitySpan], length: int) -> List[str]:
    labels = ["O"] * length
    for span in spans:
        if span.end >= length:
            raise ValueError(f"span {span} exceeds sentence length {length}")
        labels[span.start] = "B-" + span.entity_type
        for i in range(span.start + 1, span.end + 1):
            labels[i] = "I-" + span.entity_type
    return labels


def words_to_syllables(sentence: Sentence) -> Sentence:
    """Split underscore-joined words into syllable tokens.

    ``Hà_Nội/B-LOC`` becomes ``Hà/B-LOC Nội/I-LOC``; PoS and chunk values
    are copied onto every syllable.
    """
    out = []
    for tok in sentence:
        parts = tok.surface.split("_")
        if any(not p for p in parts):
            raise ValueError(f"empty syllable in token {tok.surface!r}")
        for k, part in enumerate(parts):
            label = tok.label
            if label is not None and k > 0 and label != "O":
                label = "I-" + split_label(label)[1]
            out.append(Token(part, tok.pos, tok.chunk, label))
    return Sentence(tuple(out))


def corpus_to_syllables(corpus: Corpus) -> Corpus:
    return Corpus(tuple(words_to_syllables(s) for s in corpus), corpus.layout)
