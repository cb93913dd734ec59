"""Generated Vietnamese-looking NER data for smoke tests and demos.

Every surface form has exactly one label, so the task is separable: words
that open an entity are always ``B-X``, continuation words always ``I-X``.

    python -m crfner.synthetic OUTDIR [--train 500] [--test 200] [--seed 7]

writes ``train.conll``, ``test.conll``, ``raw.txt``, ``clusters.txt`` and
``embeddings.txt`` into OUTDIR.
"""
from __future__ import annotations

import argparse
import os
import random
from typing import Dict, List, Tuple

from .corpus import Corpus, Layout, Sentence, Token, write_conll
from .features import ClusterLexicon, EmbeddingLexicon

LAYOUT = Layout(("surface", "pos", "chunk", "label"))

ENTITY_WORDS: Dict[str, Tuple[List[str], List[str]]] = {
    "PER": (
        ["Nguyễn", "Trần", "Lê", "Phạm", "Hoàng", "Võ", "Đặng", "Bùi", "Đỗ", "Ngô"],
        ["Văn", "Thị", "Minh", "Hùng", "Lan", "Quang", "Thu", "Tuấn", "Hải", "Dũng"],
    ),
    "LOC": (
        ["Hà_Nội", "Đà_Nẵng", "Huế", "Buôn_Mê_Thuột", "Sài_Gòn", "Cần_Thơ", "Hải_Phòng", "Nha_Trang"],
        ["Mới", "Thượng", "Hạ", "Trung"],
    ),
    "ORG": (
        ["Công_ty", "Bộ", "Trường", "Ngân_hàng", "Viện", "Đại_học"],
        ["Vinamilk", "FPT", "Y_tế", "Ngoại_thương", "Bách_Khoa", "Giáo_dục", "VNPT"],
    ),
    "MISC": (
        ["Tết", "Phật_giáo", "iPhone", "Covid-19", "World_Cup"],
        ["Nguyên_Đán", "X", "2018", "Pro"],
    ),
}

OTHER_WORDS: List[Tuple[str, str]] = [
    ("học_sinh", "N"), ("người", "N"), ("ngày", "N"), ("năm", "N"), ("phóng_viên", "N"),
    ("là", "V"), ("đến", "V"), ("đã", "R"), ("có", "V"), ("thực_hiện", "V"), ("làm_việc", "V"),
    ("của", "E"), ("ở", "E"), ("tại", "E"), ("với", "E"), ("và", "C"),
    ("1984", "M"), ("12", "M"), ("03-11-1984", "M"), ("10.000", "M"), ("2kg", "M"),
    (",", "CH"), (".", "CH"), (";", "CH"),
]

_TYPE_CODE = {"O": "00", "PER": "01", "LOC": "10", "ORG": "110", "MISC": "111"}


def _sentence(rng: random.Random) -> Sentence:
    tokens = []
    length = rng.randint(5, 14)
    while len(tokens) < length:
        if rng.random() < 0.3:
            etype = rng.choice(sorted(ENTITY_WORDS))
            first, rest = ENTITY_WORDS[etype]
            n = rng.choice([1, 1, 2, 3])
            tokens.append(Token(rng.choice(first), "Np", "B-NP", "B-" + etype))
            for _ in range(n - 1):
                tokens.append(Token(rng.choice(rest), "Np", "I-NP", "I-" + etype))
        else:
            word, pos = rng.choice(OTHER_WORDS)
            chunk = {"N": "B-NP", "V": "B-VP", "M": "B-NP"}.get(pos, "O")
            tokens.append(Token(word, pos, chunk, "O"))
    return Sentence(tuple(tokens))


def make_corpus(n_sentences: int, seed: int = 7) -> Corpus:
    rng = random.Random(seed)
    return Corpus(tuple(_sentence(rng) for _ in range(n_sentences)), LAYOUT)


def make_split(n_train: int = 500, n_test: int = 200, seed: int = 7) -> Tuple[Corpus, Corpus]:
    both = make_corpus(n_train + n_test, seed)
    return (
        Corpus(both.sentences[:n_train], LAYOUT),
        Corpus(both.sentences[n_train:], LAYOUT),
    )


def _word_types() -> Dict[str, str]:
    out = {w: "O" for w, _ in OTHER_WORDS}
    for etype, (first, rest) in ENTITY_WORDS.items():
        for w in first + rest:
            out[w] = etype
    return out


def make_lexicons(seed: int = 7, dim: int = 25) -> Tuple[ClusterLexicon, EmbeddingLexicon]:
    """Cluster paths whose leading bits encode the word's entity type, and
    embeddings centred on a per-type direction."""
    rng = random.Random(seed)
    paths, vectors = {}, {}
    types = sorted(set(_TYPE_CODE))
    for word, etype in sorted(_word_types().items()):
        code = _TYPE_CODE[etype]
        paths[word] = code + "".join(rng.choice("01") for _ in range(10 - len(code)))
        centre = types.index(etype)
        vectors[word] = tuple(
            round((1.0 if k % len(types) == centre else 0.0) + rng.gauss(0.0, 0.1), 6)
            for k in range(dim)
        )
    return ClusterLexicon(paths), EmbeddingLexicon(vectors, dim)


def main(argv=None):
    parser = argparse.ArgumentParser(description="Write a generated NER corpus and lexicons.")
    parser.add_argument("outdir")
    parser.add_argument("--train", type=int, default=500)
    parser.add_argument("--test", type=int, default=200)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args(argv)
    os.makedirs(args.outdir, exist_ok=True)
    train, test = make_split(args.train, args.test, args.seed)
    clusters, embeddings = make_lexicons(args.seed)

    def path(name):
        return os.path.join(args.outdir, name)

    with open(path("train.conll"), "w", encoding="utf-8") as f:
        write_conll(train, f)
    with open(path("test.conll"), "w", encoding="utf-8") as f:
        write_conll(test, f)
    with open(path("raw.txt"), "w", encoding="utf-8") as f:
        for sent in train:
            f.write(" ".join(sent.surfaces) + "\n")
    with open(path("clusters.txt"), "w", encoding="utf-8") as f:
        for word, bits in clusters.paths.items():
            f.write(f"{bits}\t{word}\t1\n")
    with open(path("embeddings.txt"), "w", encoding="utf-8") as f:
        for word, vec in embeddings.vectors.items():
            f.write(word + " " + " ".join(repr(v) for v in vec) + "\n")


if __name__ == "__main__":
    main()
