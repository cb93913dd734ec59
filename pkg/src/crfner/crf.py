"""First-order linear-chain CRF.

Weights come in two blocks: ``state_weights[attribute, label]`` for
attribute/label pairs and ``transition_weights[prev, cur]`` for label
bigrams.  A sentence's score under a label path ``y`` is

    sum_i state[i, y_i] + sum_{i>0} transition[y_{i-1}, y_i]

where ``state[i, y]`` sums the weights of the attributes active at
position ``i`` (numeric attributes scaled by their value).  All inference
runs in the log domain.

Training maximises ``sum_n log P(y_n | x_n) - c2 * ||w||^2`` by SGD, the
convention CRFsuite uses for its ``c2`` parameter.
"""
from __future__ import annotations

import json
import logging
import struct
from collections import Counter
from dataclasses import dataclass, field
from typing import BinaryIO, Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse

from .corpus import Corpus, Layout, Sentence, repair_labels
from .features import (
    ClusterLexicon,
    EmbeddingLexicon,
    ExtractedFeatures,
    FeatureConfig,
    extract,
)

log = logging.getLogger(__name__)


class LabelSet:
    def __init__(self, labels: Iterable[str]):
        self.labels: Tuple[str, ...] = tuple(labels)
        if not self.labels:
            raise ValueError("label set is empty")
        self._index = {label: k for k, label in enumerate(self.labels)}
        if len(self._index) != len(self.labels):
            raise ValueError("duplicate labels")

    def __len__(self):
        return len(self.labels)

    def __iter__(self):
        return iter(self.labels)

    def __eq__(self, other):
        return isinstance(other, LabelSet) and self.labels == other.labels

    def index(self, label: str) -> int:
        return self._index[label]

    def label(self, k: int) -> str:
        return self.labels[k]

    def encode(self, labels: Sequence[str]) -> np.ndarray:
        return np.array([self._index[l] for l in labels], dtype=np.int64)

    def decode(self, indices: Iterable[int]) -> List[str]:
        return [self.labels[k] for k in indices]


class AttributeIndex:
    """Attribute key -> dense id.  Ids follow registration order."""

    def __init__(self, keys: Iterable[str] = ()):
        self._ids: Dict[str, int] = {}
        self.frozen = False
        for key in keys:
            self.add(key)

    def add(self, key: str) -> int:
        if key in self._ids:
            return self._ids[key]
        if self.frozen:
            raise RuntimeError("attribute index is frozen")
        self._ids[key] = len(self._ids)
        return self._ids[key]

    def freeze(self) -> "AttributeIndex":
        self.frozen = True
        return self

    def get(self, key: str) -> Optional[int]:
        return self._ids.get(key)

    def keys(self) -> List[str]:
        return list(self._ids)

    def __len__(self):
        return len(self._ids)

    def __contains__(self, key):
        return key in self._ids

    def __eq__(self, other):
        return isinstance(other, AttributeIndex) and self.keys() == other.keys()


@dataclass
class Lexicons:
    clusters: Optional[ClusterLexicon] = None
    embeddings: Optional[EmbeddingLexicon] = None


@dataclass
class CrfModel:
    label_set: LabelSet
    attr_index: AttributeIndex
    state_weights: np.ndarray
    transition_weights: np.ndarray
    feature_config: FeatureConfig = field(default_factory=FeatureConfig)
    layout: Optional[Layout] = None
    lexicons: Lexicons = field(default_factory=Lexicons)

    def __post_init__(self):
        n_labels = len(self.label_set)
        if self.state_weights.shape != (len(self.attr_index), n_labels):
            raise ValueError(
                f"state weights have shape {self.state_weights.shape}, "
                f"expected ({len(self.attr_index)}, {n_labels})"
            )
        if self.transition_weights.shape != (n_labels, n_labels):
            raise ValueError("transition weights do not match the label set")
        if not (np.isfinite(self.state_weights).all() and np.isfinite(self.transition_weights).all()):
            raise ValueError("model weights must be finite")

    @classmethod
    def zeros(cls, labels: Iterable[str], keys: Iterable[str] = (), **kwargs) -> "CrfModel":
        label_set = LabelSet(labels)
        index = AttributeIndex(keys).freeze()
        n = len(label_set)
        return cls(label_set, index, np.zeros((len(index), n)), np.zeros((n, n)), **kwargs)


@dataclass
class TrainConfig:
    c2: float = 3.2
    epochs: int = 10
    seed: int = 42
    eta0: Optional[float] = None  # None: calibrate on the first instances
    decay: Optional[float] = None  # eta_t = eta0 / (1 + t / decay); None: 1 / (lambda * eta0)
    min_count: int = 1
    shuffle: bool = True
    calibration_samples: int = 16

    def __post_init__(self):
        if self.c2 < 0:
            raise ValueError("c2 must be >= 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.eta0 is not None and self.eta0 <= 0:
            raise ValueError("eta0 must be > 0")
        if self.decay is not None and self.decay <= 0:
            raise ValueError("decay must be > 0")
        if self.min_count < 1:
            raise ValueError("min_count must be >= 1")


@dataclass
class Lattice:
    state: np.ndarray  # [position, label]
    transition: np.ndarray  # [prev label, label]

    def __len__(self):
        return self.state.shape[0]

    @property
    def n_labels(self) -> int:
        return self.state.shape[1]

    def path_score(self, path: Sequence[int]) -> float:
        total = self.state[0, path[0]]
        for i in range(1, len(path)):
            total += self.transition[path[i - 1], path[i]]
            total += self.state[i, path[i]]
        return float(total)


@dataclass
class Marginals:
    state: np.ndarray  # [position, label]
    edge: np.ndarray  # [position - 1, prev label, label]
    log_partition: float


@dataclass
class InstanceGradient:
    """d log P(gold | x) / dw, restricted to the attributes seen in the instance."""

    attr_ids: np.ndarray
    state: np.ndarray  # [len(attr_ids), label]
    transition: np.ndarray
    log_likelihood: float

    def dense_state(self, n_attrs: int) -> np.ndarray:
        out = np.zeros((n_attrs, self.state.shape[1]))
        out[self.attr_ids] = self.state
        return out


# -- inference -------------------------------------------------------------

def _logsumexp(a: np.ndarray, axis: int) -> np.ndarray:
    mx = a.max(axis=axis, keepdims=True)
    out = np.log(np.exp(a - mx).sum(axis=axis, keepdims=True)) + mx
    return np.squeeze(out, axis=axis)


def _forward(lat: Lattice) -> np.ndarray:
    m = len(lat)
    alpha = np.empty_like(lat.state)
    alpha[0] = lat.state[0]
    for i in range(1, m):
        alpha[i] = _logsumexp(alpha[i - 1][:, None] + lat.transition, axis=0) + lat.state[i]
    return alpha


def _backward(lat: Lattice) -> np.ndarray:
    m = len(lat)
    beta = np.empty_like(lat.state)
    beta[m - 1] = 0.0
    for i in range(m - 2, -1, -1):
        beta[i] = _logsumexp(lat.transition + (lat.state[i + 1] + beta[i + 1])[None, :], axis=1)
    return beta


def log_partition(lat: Lattice) -> float:
    return float(_logsumexp(_forward(lat)[-1], axis=0))


def marginals(lat: Lattice) -> Marginals:
    alpha = _forward(lat)
    beta = _backward(lat)
    log_z = float(_logsumexp(alpha[-1], axis=0))
    state = np.exp(alpha + beta - log_z)
    after = lat.state[1:] + beta[1:]
    edge = np.exp(alpha[:-1, :, None] + lat.transition[None, :, :] + after[:, None, :] - log_z)
    return Marginals(state, edge, log_z)


def viterbi(lat: Lattice) -> Tuple[List[int], float]:
    """Best path and its score; ties go to the lower label index."""
    m, n = lat.state.shape
    cols = np.arange(n)
    delta = lat.state[0].copy()
    back = np.zeros((m, n), dtype=np.int64)
    for i in range(1, m):
        cand = delta[:, None] + lat.transition
        back[i] = np.argmax(cand, axis=0)
        delta = cand[back[i], cols] + lat.state[i]
    best = int(np.argmax(delta))
    score = float(delta[best])
    path = [best]
    for i in range(m - 1, 0, -1):
        path.append(int(back[i, path[-1]]))
    path.reverse()
    return path, score


# -- compiled instances ----------------------------------------------------

@dataclass
class _Instance:
    ids: np.ndarray  # model attribute ids used by this sentence
    x: sparse.csr_matrix  # [position, local attribute] values
    gold: Optional[np.ndarray] = None


def _compile(feats: ExtractedFeatures, index: AttributeIndex, gold=None) -> _Instance:
    local: Dict[int, int] = {}
    rows, cols, vals = [], [], []
    for i in range(len(feats)):
        for key in feats.binary[i]:
            a = index.get(key)
            if a is not None:
                rows.append(i)
                cols.append(local.setdefault(a, len(local)))
                vals.append(1.0)
        for key, value in feats.numeric[i]:
            a = index.get(key)
            if a is not None:
                rows.append(i)
                cols.append(local.setdefault(a, len(local)))
                vals.append(value)
    ids = np.fromiter(local, dtype=np.int64, count=len(local))
    x = sparse.csr_matrix((vals, (rows, cols)), shape=(len(feats), len(local)))
    return _Instance(ids, x, gold)


def _lattice(inst: _Instance, state_weights: np.ndarray, transition: np.ndarray) -> Lattice:
    if len(inst.ids):
        state = inst.x @ state_weights[inst.ids]
    else:
        state = np.zeros((inst.x.shape[0], state_weights.shape[1]))
    return Lattice(np.asarray(state, dtype=float), transition)


def build_lattice(model: CrfModel, feats: ExtractedFeatures) -> Lattice:
    inst = _compile(feats, model.attr_index)
    return _lattice(inst, model.state_weights, model.transition_weights.copy())


def _gradient(lat: Lattice, inst: _Instance, gold: np.ndarray) -> InstanceGradient:
    marg = marginals(lat)
    m, n = lat.state.shape
    resid = -marg.state
    resid[np.arange(m), gold] += 1.0
    g_state = np.asarray(inst.x.T @ resid)
    g_trans = -marg.edge.sum(axis=0)
    np.add.at(g_trans, (gold[:-1], gold[1:]), 1.0)
    ll = lat.path_score(gold) - marg.log_partition
    return InstanceGradient(inst.ids, g_state, g_trans, ll)


def instance_gradient(model: CrfModel, feats: ExtractedFeatures, gold: Sequence[int]) -> InstanceGradient:
    gold = np.asarray(gold, dtype=np.int64)
    if len(gold) != len(feats):
        raise ValueError("gold length does not match the sentence")
    inst = _compile(feats, model.attr_index)
    return _gradient(_lattice(inst, model.state_weights, model.transition_weights), inst, gold)


def log_likelihood(model: CrfModel, feats: ExtractedFeatures, gold: Sequence[int]) -> float:
    lat = build_lattice(model, feats)
    return lat.path_score(list(gold)) - log_partition(lat)


# -- training --------------------------------------------------------------

class _Weights:
    """Weights stored as ``scale * (state, transition)`` so L2 decay is O(1)."""

    def __init__(self, n_attrs: int, n_labels: int):
        self.state = np.zeros((n_attrs, n_labels))
        self.trans = np.zeros((n_labels, n_labels))
        self.scale = 1.0

    def lattice(self, inst: _Instance) -> Lattice:
        lat = _lattice(inst, self.state, self.trans * self.scale)
        lat.state *= self.scale
        return lat

    def decay(self, factor: float) -> None:
        self.scale *= factor
        if self.scale < 1e-9:
            self.state *= self.scale
            self.trans *= self.scale
            self.scale = 1.0

    def add(self, grad: InstanceGradient, eta: float) -> None:
        step = eta / self.scale
        self.state[grad.attr_ids] += step * grad.state
        self.trans += step * grad.transition

    def sqnorm(self) -> float:
        return self.scale ** 2 * (float(np.sum(self.state ** 2)) + float(np.sum(self.trans ** 2)))

    def export(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.state * self.scale, self.trans * self.scale


def _sgd_pass(w: _Weights, instances, order, eta0: float, lam: float, horizon: float, t: int) -> int:
    for k in order:
        inst = instances[k]
        eta = eta0 / (1.0 + t / horizon)
        grad = _gradient(w.lattice(inst), inst, inst.gold)
        w.decay(1.0 - eta * lam)
        w.add(grad, eta)
        t += 1
    return t


def _objective(w: _Weights, instances, c2: float, share: float = 1.0) -> float:
    ll = 0.0
    for inst in instances:
        lat = w.lattice(inst)
        ll += lat.path_score(inst.gold) - log_partition(lat)
    return ll - c2 * share * w.sqnorm()


def _horizon(eta0: float, lam: float, decay: Optional[float]) -> float:
    if decay is not None:
        return decay
    return 1.0 / (lam * eta0) if lam > 0 else float("inf")


def _calibrate(instances, n_attrs, n_labels, tcfg: TrainConfig, lam: float) -> float:
    sample = instances[: tcfg.calibration_samples]
    share = len(sample) / len(instances)
    candidates = [0.1 * 2.0 ** k for k in range(-6, 5)]
    candidates = [eta for eta in candidates if eta * lam < 1.0] or [0.5 / lam]
    best_eta, best_obj = candidates[0], -np.inf
    for eta in candidates:
        w = _Weights(n_attrs, n_labels)
        _sgd_pass(w, sample, range(len(sample)), eta, lam, _horizon(eta, lam, tcfg.decay), 0)
        obj = _objective(w, sample, tcfg.c2, share)
        log.debug("calibration eta=%g objective=%.6f", eta, obj)
        if np.isfinite(obj) and obj > best_obj:
            best_eta, best_obj = eta, obj
    return best_eta


EpochCallback = Callable[[int, float, CrfModel], None]


def train(
    corpus: Corpus,
    fcfg: FeatureConfig,
    tcfg: TrainConfig,
    lexicons: Optional[Lexicons] = None,
    on_epoch: Optional[EpochCallback] = None,
) -> CrfModel:
    """Fit a model; ``on_epoch(epoch, objective, model)`` is called after every epoch.

    ``objective`` is the regularised log-likelihood divided by the number
    of sentences.
    """
    if len(corpus) == 0:
        raise ValueError("cannot train on an empty corpus")
    for i, sent in enumerate(corpus):
        if not sent.is_labeled():
            raise ValueError(f"sentence {i} has unlabeled tokens")
    lexicons = lexicons or Lexicons()

    labels = LabelSet(dict.fromkeys(l for sent in corpus for l in sent.labels))
    feats = [extract(s, fcfg, lexicons.clusters, lexicons.embeddings) for s in corpus]
    counts: Counter = Counter()
    for f in feats:
        for keys in f.binary:
            counts.update(keys)
        for nums in f.numeric:
            counts.update(k for k, _ in nums)
    index = AttributeIndex(k for k, c in counts.items() if c >= tcfg.min_count).freeze()
    instances = [
        _compile(f, index, labels.encode(s.labels)) for f, s in zip(feats, corpus)
    ]
    n, n_labels = len(instances), len(labels)
    lam = 2.0 * tcfg.c2 / n
    eta0 = tcfg.eta0 if tcfg.eta0 is not None else _calibrate(instances, len(index), n_labels, tcfg, lam)
    if eta0 * lam >= 1.0:
        raise ValueError(f"eta0={eta0} too large for c2={tcfg.c2}: need eta0 < {1 / lam:g}")
    horizon = _horizon(eta0, lam, tcfg.decay)
    log.info("%d sentences, %d labels, %d attributes, eta0=%g", n, n_labels, len(index), eta0)

    rng = np.random.default_rng(tcfg.seed)
    w = _Weights(len(index), n_labels)
    t = 0

    def snapshot() -> CrfModel:
        state, trans = w.export()
        return CrfModel(labels, index, state, trans, fcfg, corpus.layout, lexicons)

    for epoch in range(1, tcfg.epochs + 1):
        order = rng.permutation(n) if tcfg.shuffle else np.arange(n)
        t = _sgd_pass(w, instances, order, eta0, lam, horizon, t)
        objective = _objective(w, instances, tcfg.c2) / n
        log.info("epoch %d objective %.6f", epoch, objective)
        if on_epoch is not None:
            on_epoch(epoch, objective, snapshot())
    return snapshot()


# -- tagging ---------------------------------------------------------------

def predict(model: CrfModel, sentence: Sentence, lexicons: Optional[Lexicons] = None) -> List[str]:
    lex = lexicons or model.lexicons
    feats = extract(sentence, model.feature_config, lex.clusters, lex.embeddings)
    path, _ = viterbi(build_lattice(model, feats))
    return repair_labels(model.label_set.decode(path))


def tag(model: CrfModel, sentence: Sentence, lexicons: Optional[Lexicons] = None) -> Sentence:
    """Label ``sentence`` with the Viterbi path (BIO-repaired); input labels are ignored."""
    return sentence.with_labels(predict(model, sentence, lexicons))


def tag_corpus(model: CrfModel, corpus: Corpus, lexicons: Optional[Lexicons] = None) -> Corpus:
    layout = corpus.layout if "label" in corpus.layout else corpus.layout.with_column("label")
    return Corpus(tuple(tag(model, s, lexicons) for s in corpus), layout)


# -- persistence -----------------------------------------------------------
#
# MAGIC (8 bytes) | version u32 | header length u64 | header (UTF-8 JSON)
# | state weights float64 LE [attributes x labels] | transitions float64 LE [labels x labels]

MAGIC = b"CRFNERM\x00"
FORMAT_VERSION = 1
_PREFIX = struct.Struct("<8sIQ")


class ModelFormatError(ValueError):
    pass


def _header(model: CrfModel) -> dict:
    lex = model.lexicons
    return {
        "labels": list(model.label_set),
        "attributes": model.attr_index.keys(),
        "feature_config": model.feature_config.to_dict(),
        "layout": list(model.layout.columns) if model.layout else None,
        "clusters": dict(lex.clusters.paths) if lex.clusters is not None else None,
        "embeddings": (
            {"dim": lex.embeddings.dim, "vectors": {k: list(v) for k, v in lex.embeddings.vectors.items()}}
            if lex.embeddings is not None
            else None
        ),
    }


def save_model(model: CrfModel, stream: Optional[BinaryIO] = None) -> bytes:
    header = json.dumps(_header(model), ensure_ascii=False, separators=(",", ":")).encode("utf-8")
    data = b"".join(
        [
            _PREFIX.pack(MAGIC, FORMAT_VERSION, len(header)),
            header,
            np.ascontiguousarray(model.state_weights, dtype="<f8").tobytes(),
            np.ascontiguousarray(model.transition_weights, dtype="<f8").tobytes(),
        ]
    )
    if stream is not None:
        stream.write(data)
    return data


def load_model(source) -> CrfModel:
    """Load from bytes or a binary stream."""
    data = source if isinstance(source, (bytes, bytearray)) else source.read()
    if len(data) < _PREFIX.size:
        raise ModelFormatError("model data is truncated or empty")
    magic, version, header_len = _PREFIX.unpack_from(data)
    if magic != MAGIC:
        raise ModelFormatError("not a model file (bad magic header)")
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model format version {version}")
    start = _PREFIX.size
    if len(data) < start + header_len:
        raise ModelFormatError("model data is truncated")
    try:
        header = json.loads(data[start : start + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"corrupt model header: {exc}") from None
    try:
        return _from_header(header, data[start + header_len :])
    except ModelFormatError:
        raise
    except (AttributeError, KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"corrupt model header: {exc!r}") from None


def _from_header(header: dict, body: bytes) -> CrfModel:
    n_labels, n_attrs = len(header["labels"]), len(header["attributes"])
    expected = 8 * (n_attrs * n_labels + n_labels * n_labels)
    if len(body) != expected:
        raise ModelFormatError(f"model weights truncated: {len(body)} bytes, expected {expected}")
    weights = np.frombuffer(body, dtype="<f8").astype(float)
    state = weights[: n_attrs * n_labels].reshape(n_attrs, n_labels)
    trans = weights[n_attrs * n_labels :].reshape(n_labels, n_labels)
    emb = header.get("embeddings")
    lexicons = Lexicons(
        ClusterLexicon(header["clusters"]) if header.get("clusters") is not None else None,
        EmbeddingLexicon({k: tuple(v) for k, v in emb["vectors"].items()}, emb["dim"]) if emb else None,
    )
    return CrfModel(
        LabelSet(header["labels"]),
        AttributeIndex(header["attributes"]).freeze(),
        state,
        trans,
        FeatureConfig.from_dict(header["feature_config"]),
        Layout(tuple(header["layout"])) if header.get("layout") else None,
        lexicons,
    )
