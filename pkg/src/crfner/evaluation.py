"""Entity-level scoring (CoNLL 2003 convention) and feature ablations.

An entity counts as correct only when type, start and end all match.
Precision, recall and F1 are percentages; when nothing is predicted (or
nothing is gold) precision (recall) is 0, and F1 is 0 when P + R = 0.
Both label sequences are BIO-repaired before spans are read off.
"""
from __future__ import annotations

import csv
import io
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .corpus import Corpus, repair_labels, spans_from_bio
from .crf import Lexicons, TrainConfig, tag_corpus, train
from .features import FeatureConfig

OVERALL = "overall"
CSV_FIELDS = ("name", "type", "precision", "recall", "f1", "gold", "pred", "correct")


class AlignmentError(ValueError):
    def __init__(self, message: str, sentence: int, token: Optional[int] = None):
        self.sentence = sentence
        self.token = token
        where = f"sentence {sentence + 1}" + (f", token {token + 1}" if token is not None else "")
        super().__init__(f"{where}: {message}")


@dataclass(frozen=True)
class TypeScore:
    gold: int = 0
    predicted: int = 0
    correct: int = 0

    @property
    def precision(self) -> float:
        return 100.0 * self.correct / self.predicted if self.predicted else 0.0

    @property
    def recall(self) -> float:
        return 100.0 * self.correct / self.gold if self.gold else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r > 0 else 0.0


@dataclass
class ScoreReport:
    per_type: Dict[str, TypeScore] = field(default_factory=dict)

    @property
    def overall(self) -> TypeScore:
        return TypeScore(
            sum(s.gold for s in self.per_type.values()),
            sum(s.predicted for s in self.per_type.values()),
            sum(s.correct for s in self.per_type.values()),
        )

    def rows(self) -> List[Tuple[str, TypeScore]]:
        return sorted(self.per_type.items()) + [(OVERALL, self.overall)]

    def format_table(self) -> str:
        head = f"{'type':<10}{'precision':>10}{'recall':>9}{'f1':>9}{'gold':>8}{'pred':>8}{'correct':>9}"
        lines = [head]
        for name, s in self.rows():
            lines.append(
                f"{name:<10}{s.precision:>10.2f}{s.recall:>9.2f}{s.f1:>9.2f}"
                f"{s.gold:>8d}{s.predicted:>8d}{s.correct:>9d}"
            )
        return "\n".join(lines) + "\n"


def _check_aligned(gold: Corpus, pred: Corpus) -> None:
    if len(gold) != len(pred):
        k = min(len(gold), len(pred))
        raise AlignmentError(f"gold has {len(gold)} sentences, prediction has {len(pred)}", k)
    for i, (g, p) in enumerate(zip(gold, pred)):
        for j, (gt, pt) in enumerate(zip(g, p)):
            if gt.surface != pt.surface:
                raise AlignmentError(f"surface {gt.surface!r} != {pt.surface!r}", i, j)
        if len(g) != len(p):
            raise AlignmentError(f"gold has {len(g)} tokens, prediction has {len(p)}", i, min(len(g), len(p)))
        if not (g.is_labeled() and p.is_labeled()):
            raise AlignmentError("unlabeled tokens", i)


def score(gold: Corpus, pred: Corpus) -> ScoreReport:
    _check_aligned(gold, pred)
    n_gold: Counter = Counter()
    n_pred: Counter = Counter()
    n_correct: Counter = Counter()
    for g, p in zip(gold, pred):
        gs = set(spans_from_bio(repair_labels(g.labels)))
        ps = set(spans_from_bio(repair_labels(p.labels)))
        n_gold.update(s.entity_type for s in gs)
        n_pred.update(s.entity_type for s in ps)
        n_correct.update(s.entity_type for s in gs & ps)
    types = set(n_gold) | set(n_pred)
    return ScoreReport({t: TypeScore(n_gold[t], n_pred[t], n_correct[t]) for t in sorted(types)})


# -- ablations -------------------------------------------------------------

@dataclass
class AblationSpec:
    variants: List[Tuple[str, FeatureConfig]]

    def __post_init__(self):
        names = [n for n, _ in self.variants]
        dupes = sorted({n for n in names if names.count(n) > 1})
        if dupes:
            raise ValueError(f"duplicate ablation names: {', '.join(dupes)}")

    def __len__(self):
        return len(self.variants)

    def __iter__(self):
        return iter(self.variants)


@dataclass
class AblationRow:
    name: str
    report: ScoreReport


def run_ablation(
    train_corpus: Corpus,
    test_corpus: Corpus,
    spec: AblationSpec,
    tcfg: TrainConfig,
    lexicons: Optional[Lexicons] = None,
) -> List[AblationRow]:
    """One model per variant, all trained with the same TrainConfig (and seed)."""
    rows = []
    for name, fcfg in spec:
        model = train(train_corpus, fcfg, tcfg, lexicons)
        pred = tag_corpus(model, test_corpus, lexicons)
        rows.append(AblationRow(name, score(test_corpus, pred)))
    return rows


def format_ablation(rows: Sequence[AblationRow]) -> str:
    width = max([len(r.name) for r in rows] + [7])
    lines = [f"{'setting':<{width}}  {'precision':>9}  {'recall':>7}  {'f1':>7}"]
    for r in rows:
        s = r.report.overall
        lines.append(f"{r.name:<{width}}  {s.precision:>9.2f}  {s.recall:>7.2f}  {s.f1:>7.2f}")
    return "\n".join(lines) + "\n"


def ablation_csv(rows: Sequence[AblationRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_FIELDS)
    for r in rows:
        for type_name, s in r.report.rows():
            writer.writerow(
                [r.name, type_name, f"{s.precision:.2f}", f"{s.recall:.2f}", f"{s.f1:.2f}",
                 s.gold, s.predicted, s.correct]
            )
    return buf.getvalue()


def read_ablation_csv(text: str) -> List[dict]:
    out = []
    for row in csv.DictReader(io.StringIO(text)):
        for key in ("precision", "recall", "f1"):
            row[key] = float(row[key])
        for key in ("gold", "pred", "correct"):
            row[key] = int(row[key])
        out.append(row)
    return out
