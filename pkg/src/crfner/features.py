"""Feature extraction for the NER tagger.

Every attribute key carries a family prefix and the window offsets it was
read from, e.g. ``w[-1]|w[0]=của|Hà_Nội`` or ``sh[0]=ULLL``, so equal values
in different roles never collide.  Out-of-sentence offsets read the
sentinels ``<BOS>``/``<EOS>``.
"""
from __future__ import annotations

import math
import re
import unicodedata
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

from .corpus import Sentence

BOS = "<BOS>"
EOS = "<EOS>"

FAMILIES = ("word", "word_shapes", "pos", "chunk", "cluster", "embeddings")

TOKEN_TYPES = ("AllUpper", "AllLower", "AllDigit", "InitUpper", "Mixed", "Punct", "Other")

# order is the order of the word-shape table
FLAG_NAMES = (
    "mix", "acr", "ed", "hyp", "da", "na", "co", "wei", "2d", "4d",
    "d&a", "d&-", "d&/", "d&,", "d&.", "up", "iu", "au", "al", "ad",
    "ao", "cu", "cl", "ca", "cd", "cs",
)


@dataclass(frozen=True)
class FeatureConfig:
    word: bool = True
    word_shapes: bool = True
    pos: bool = False
    chunk: bool = False
    cluster: bool = False
    embeddings: bool = False
    affix_max_len: int = 4
    window_radius: int = 2
    cluster_prefix_lengths: Tuple[int, ...] = (4, 6, 8, 10)

    def __post_init__(self):
        object.__setattr__(self, "cluster_prefix_lengths", tuple(self.cluster_prefix_lengths))
        if self.window_radius < 0:
            raise ValueError("window_radius must be >= 0")
        if self.affix_max_len < 1:
            raise ValueError("affix_max_len must be >= 1")
        lengths = self.cluster_prefix_lengths
        if any(n <= 0 for n in lengths) or list(lengths) != sorted(set(lengths)):
            raise ValueError("cluster prefix lengths must be positive and ascending")

    @classmethod
    def none(cls, **overrides) -> "FeatureConfig":
        flags = {name: False for name in FAMILIES}
        flags.update(overrides)
        return cls(**flags)

    def to_dict(self) -> dict:
        return {
            "word": self.word,
            "word_shapes": self.word_shapes,
            "pos": self.pos,
            "chunk": self.chunk,
            "cluster": self.cluster,
            "embeddings": self.embeddings,
            "affix_max_len": self.affix_max_len,
            "window_radius": self.window_radius,
            "cluster_prefix_lengths": list(self.cluster_prefix_lengths),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureConfig":
        return cls(**d)


@dataclass
class ClusterLexicon:
    """word -> Brown bit-string path; exact, case-sensitive lookup."""

    paths: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        for word, bits in self.paths.items():
            if not bits or set(bits) - {"0", "1"}:
                raise ValueError(f"bad bit-string {bits!r} for {word!r}")

    def __len__(self):
        return len(self.paths)

    def __contains__(self, word):
        return word in self.paths

    def get(self, word: str) -> Optional[str]:
        return self.paths.get(word)


@dataclass
class EmbeddingLexicon:
    vectors: Dict[str, Tuple[float, ...]] = field(default_factory=dict)
    dim: int = 0

    def __post_init__(self):
        for word, vec in self.vectors.items():
            if not self.dim:
                self.dim = len(vec)
            if len(vec) != self.dim:
                raise ValueError(f"vector for {word!r} has length {len(vec)}, expected {self.dim}")
            if not all(math.isfinite(v) for v in vec):
                raise ValueError(f"non-finite component in vector for {word!r}")

    def __len__(self):
        return len(self.vectors)

    def get(self, word: str):
        return self.vectors.get(word)


@dataclass
class ExtractedFeatures:
    """Per-position binary attribute keys and ``(key, value)`` numeric attributes."""

    binary: List[List[str]]
    numeric: List[List[Tuple[str, float]]]

    def __len__(self):
        return len(self.binary)


def load_clusters(stream: Iterable[str]) -> ClusterLexicon:
    """Read ``bitstring<TAB>word<TAB>count`` lines (count is ignored)."""
    paths = {}
    for lineno, line in enumerate(stream, start=1):
        line = line.rstrip("\r\n")
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) < 2:
            raise ValueError(f"line {lineno}: expected bitstring<TAB>word[<TAB>count]")
        bits, word = parts[0], parts[1]
        if not bits or set(bits) - {"0", "1"}:
            raise ValueError(f"line {lineno}: bad bit-string {bits!r}")
        paths[word] = bits
    return ClusterLexicon(paths)


def load_embeddings(stream: Iterable[str]) -> EmbeddingLexicon:
    """Read ``word v1 ... vd`` lines; ``d`` is fixed by the first line."""
    vectors = {}
    dim = 0
    for lineno, line in enumerate(stream, start=1):
        parts = line.split()
        if not parts:
            continue
        word, values = parts[0], parts[1:]
        if not dim:
            dim = len(values)
            if not dim:
                raise ValueError(f"line {lineno}: no vector components")
        if len(values) != dim:
            raise ValueError(f"line {lineno}: expected {dim} components, found {len(values)}")
        try:
            vec = tuple(float(v) for v in values)
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
        if not all(math.isfinite(v) for v in vec):
            raise ValueError(f"line {lineno}: non-finite component")
        vectors[word] = vec
    return EmbeddingLexicon(vectors, dim)


# -- word shapes -----------------------------------------------------------

def _nfc(s: str) -> str:
    return unicodedata.normalize("NFC", s)


def _char_class(c: str) -> str:
    if c.isupper() or unicodedata.category(c) == "Lt":
        return "U"
    if c.islower():
        return "L"
    if c.isdecimal():
        return "D"
    return c


def shape(surface: str) -> str:
    return "".join(_char_class(c) for c in _nfc(surface))


def shaped(surface: str) -> str:
    out = []
    for c in shape(surface):
        if not out or out[-1] != c:
            out.append(c)
    return "".join(out)


def _is_punct(c: str) -> bool:
    return unicodedata.category(c).startswith(("P", "S"))


def _init_upper(s: str) -> bool:
    return bool(s) and s[0].isupper() and all(c.isalpha() and c.islower() for c in s[1:])


def _core(surface: str) -> str:
    # underscores join syllables of one word; letter-class tests ignore them
    core = surface.replace("_", "")
    return core or surface


def token_type(surface: str) -> str:
    """First matching category of TOKEN_TYPES, tested in that order."""
    s = _core(_nfc(surface))
    if all(c.isalpha() and c.isupper() for c in s):
        return "AllUpper"
    if all(c.isalpha() and c.islower() for c in s):
        return "AllLower"
    if s.isdecimal():
        return "AllDigit"
    syllables = _nfc(surface).split("_")
    if all(_init_upper(p) for p in syllables):
        return "InitUpper"
    if all(c.isalnum() for c in s):
        return "Mixed"
    if all(_is_punct(c) for c in s):
        return "Punct"
    return "Other"


_ACR = re.compile(r"^(?:UL*\.)+$")
_ED = re.compile(r"^[UL]+D+$")
_CODE = re.compile(r"^D+U+D*$")
_DATE = re.compile(
    r"^(?:\d{1,2}[-/.]\d{1,2}(?:[-/.]\d{2}|[-/.]\d{4})?|\d{4}[-/.]\d{1,2}[-/.]\d{1,2})$"
)
_WEIGHT = re.compile(r"^\d+(?:[.,]\d+)?(?:mg|g|kg|t|tấn|lb|lbs|oz)$", re.IGNORECASE)


def _is_date(s: str) -> bool:
    if not _DATE.match(s):
        return False
    parts = re.split(r"[-/.]", s)
    if len(parts[0]) == 4:
        month, day = int(parts[1]), int(parts[2])
    else:
        day, month = int(parts[0]), int(parts[1])
    return 1 <= day <= 31 and 1 <= month <= 12


def regex_flags(surface: str) -> Set[str]:
    """Names of the boolean word-shape predicates that hold for ``surface``.

    ==========  ============================================================
    mix         some syllable has an upper-case letter after its first
                character, and the token has a lower-case letter
    acr         shape matches ``(UL*\\.)+``  (H.  Th.  U.S.)
    ed          shape matches ``[UL]+D+``    (A9  B52)
    hyp         contains ``-``
    da          d{1,2}[-/.]d{1,2}([-/.](dd|dddd))? or yyyy-mm-dd, with
                day <= 31 and month <= 12  (03-11-1984  03/10)
    na          every ``_``-separated syllable is InitUpper  (Buôn_Mê_Thuột)
    co          shape matches ``D+U+D*``     (21B)
    wei         number followed by a weight unit  (2kg)
    2d / 4d     exactly two / four digits
    d&a         contains a digit and a letter
    d&- d&/     contains a digit and ``-`` / ``/`` (or ``\\``)
    d&, d&.     contains a digit and ``,`` / ``.``
    up          shape contains ``U.``
    iu          first character upper-case
    au al       every letter-class character upper / lower case
    ad          all digits
    ao          no letters and no digits
    cu cl ca    contains an upper-case / lower-case / any letter
    cd          contains a digit
    cs          contains a character that is neither letter nor digit
    ==========  ============================================================

    Underscore joiners are ignored by the letter-class tests (al, au, ad,
    cs), so ``học_sinh`` is all lower case.
    """
    s = _nfc(surface)
    core = _core(s)
    sh = shape(s)
    has_digit = any(c.isdecimal() for c in s)
    has_alpha = any(c.isalpha() for c in s)
    has_upper = any(c.isupper() for c in s)
    has_lower = any(c.islower() for c in s)
    flags = set()

    syllables = [p for p in s.split("_") if p]
    if has_lower and any(any(c.isupper() for c in p[1:]) for p in syllables):
        flags.add("mix")
    if _ACR.match(sh):
        flags.add("acr")
    if _ED.match(sh):
        flags.add("ed")
    if "-" in s:
        flags.add("hyp")
    if _is_date(s):
        flags.add("da")
    if syllables and len(syllables) == len(s.split("_")) and all(_init_upper(p) for p in syllables):
        flags.add("na")
    if _CODE.match(sh):
        flags.add("co")
    if _WEIGHT.match(s):
        flags.add("wei")
    if s.isdecimal() and len(s) == 2:
        flags.add("2d")
    if s.isdecimal() and len(s) == 4:
        flags.add("4d")
    if has_digit and has_alpha:
        flags.add("d&a")
    if has_digit and "-" in s:
        flags.add("d&-")
    if has_digit and ("/" in s or "\\" in s):
        flags.add("d&/")
    if has_digit and "," in s:
        flags.add("d&,")
    if has_digit and "." in s:
        flags.add("d&.")
    if "U." in sh:
        flags.add("up")
    if s[0].isupper():
        flags.add("iu")
    if all(c.isupper() for c in core):
        flags.add("au")
    if all(c.islower() for c in core):
        flags.add("al")
    if core.isdecimal():
        flags.add("ad")
    if not any(c.isalnum() for c in s):
        flags.add("ao")
    if has_upper:
        flags.add("cu")
    if has_lower:
        flags.add("cl")
    if has_alpha:
        flags.add("ca")
    if has_digit:
        flags.add("cd")
    if any(not c.isalnum() for c in core):
        flags.add("cs")
    return flags


def fregex(surface: str) -> str:
    """Token type plus the sorted predicate names, e.g. ``AllDigit:4d,ad,cd``."""
    return token_type(surface) + ":" + ",".join(sorted(regex_flags(surface)))


def affixes(surface: str, max_len: int) -> List[Tuple[str, int, str]]:
    """``("p", n, prefix)`` and ``("s", n, suffix)`` for n = 1..min(max_len, len)."""
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    s = _nfc(surface)
    n = min(max_len, len(s))
    out = [("p", k, s[:k]) for k in range(1, n + 1)]
    out += [("s", k, s[-k:]) for k in range(1, n + 1)]
    return out


# -- templates -------------------------------------------------------------

def _at(values: Sequence[str], j: int) -> str:
    if j < 0:
        return BOS
    if j >= len(values):
        return EOS
    return values[j]


def windowed(base_key: str, values: Sequence[str], i: int, radius: int, bigrams: bool = True) -> List[str]:
    """Unigrams at offsets -radius..radius and bigrams of adjacent offsets."""
    if not 0 <= i < len(values):
        raise IndexError(f"position {i} outside sentence of length {len(values)}")
    offsets = range(-radius, radius + 1)
    keys = [f"{base_key}[{o}]={_at(values, i + o)}" for o in offsets]
    if bigrams:
        for o in range(-radius, radius):
            keys.append(
                f"{base_key}[{o}]|{base_key}[{o + 1}]={_at(values, i + o)}|{_at(values, i + o + 1)}"
            )
    return keys


def cluster_attrs(surface: str, lex: ClusterLexicon, prefix_lengths: Sequence[int]) -> List[str]:
    bits = lex.get(surface)
    if bits is None:
        return []
    keys = [f"bc={bits}"]
    for n in prefix_lengths:
        if n <= 0:
            raise ValueError("prefix lengths must be positive")
        if len(bits) >= n:
            keys.append(f"bc{n}={bits[:n]}")
    return keys


def embedding_attrs(surface: str, lex: EmbeddingLexicon) -> List[Tuple[str, float]]:
    vec = lex.get(surface)
    if vec is None:
        return []
    return [(f"e{k}", float(v)) for k, v in enumerate(vec)]


def _dedupe(keys: Iterable[str]) -> List[str]:
    return list(dict.fromkeys(keys))


class MissingColumnError(ValueError):
    pass


def extract(
    sentence: Sentence,
    cfg: FeatureConfig,
    cluster_lex: Optional[ClusterLexicon] = None,
    emb_lex: Optional[EmbeddingLexicon] = None,
) -> ExtractedFeatures:
    tokens = sentence.tokens
    n = len(tokens)
    r = cfg.window_radius
    for toggle in ("pos", "chunk"):
        if getattr(cfg, toggle) and any(getattr(t, toggle) is None for t in tokens):
            raise MissingColumnError(f"feature toggle '{toggle}' needs a {toggle} column")

    words = [t.surface for t in tokens]
    columns = []
    if cfg.word:
        columns.append(("w", words, True))
        columns.append(("lw", [w.casefold() for w in words], True))
    if cfg.word_shapes:
        columns.append(("sh", [shape(w) for w in words], False))
        columns.append(("shd", [shaped(w) for w in words], True))
        columns.append(("ty", [token_type(w) for w in words], True))
        columns.append(("fr", [fregex(w) for w in words], True))
    if cfg.pos:
        columns.append(("pos", [t.pos for t in tokens], True))
    if cfg.chunk:
        columns.append(("ch", [t.chunk for t in tokens], True))

    word_affixes = [affixes(w, cfg.affix_max_len) for w in words] if cfg.word else None
    word_flags = [sorted(regex_flags(w), key=FLAG_NAMES.index) for w in words] if cfg.word_shapes else None

    binary: List[List[str]] = []
    numeric: List[List[Tuple[str, float]]] = []
    for i in range(n):
        keys: List[str] = []
        for base, values, bigrams in columns:
            keys.extend(windowed(base, values, i, r, bigrams))
        for o in range(-r, r + 1):
            j = i + o
            if not 0 <= j < n:
                continue
            if word_affixes is not None:
                keys.extend(f"{kind}{k}[{o}]={text}" for kind, k, text in word_affixes[j])
            if word_flags is not None:
                keys.extend(f"fl[{o}]={flag}" for flag in word_flags[j])
        if cfg.cluster and cluster_lex is not None:
            keys.extend(cluster_attrs(words[i], cluster_lex, cfg.cluster_prefix_lengths))
        binary.append(_dedupe(keys))
        if cfg.embeddings and emb_lex is not None:
            numeric.append(embedding_attrs(words[i], emb_lex))
        else:
            numeric.append([])
    return ExtractedFeatures(binary, numeric)
