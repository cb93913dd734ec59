"""Brown word clustering with a fixed-size merge window.

The quality of a partition is the average mutual information (AMI) of the
class bigram distribution::

    AMI = sum_{c1,c2} p(c1,c2) log p(c1,c2) / (p(c1,.) p(.,c2))

with ``p`` the relative bigram frequency and ``p(c1,.)``/``p(.,c2)`` its
left/right marginals.

Words are taken in frequency order.  The ``C`` most frequent start as
singleton clusters; each further word joins as cluster ``C+1`` and the pair
of active clusters whose merge loses the least AMI is merged.  Words that
are not yet active count as singleton clusters, so the tracked AMI is
always that of a partition of the whole vocabulary.  Once every word is
placed, the ``C`` clusters are merged down to one with the same rule; that
second phase defines the binary tree whose root-to-leaf paths are the
output bit-strings.

Let ``h(t) = t log t`` and ``g(a, b) = h(a+b) - h(a) - h(b)``.  Writing
``n`` for bigram counts and ``L``/``R`` for marginal counts, merging
clusters x and y changes ``B * AMI`` (B = number of bigrams) by::

      sum_{k not in {x,y}} g(n(x,k), n(y,k)) + g(n(k,x), n(k,y))
    + h(n(x,x) + n(x,y) + n(y,x) + n(y,y)) - h(n(x,x)) - h(n(x,y)) - h(n(y,x)) - h(n(y,y))
    - g(L(x), L(y)) - g(R(x), R(y))

After merging a and b, the loss of any other pair (i, j) only changes
through the columns a and b, which is what makes the update O(C^2).
"""
from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Dict, Hashable, Iterable, List, Mapping, Optional, Tuple

import numpy as np
from scipy.special import xlogy

from .features import ClusterLexicon

log = logging.getLogger(__name__)


@dataclass
class NgramCounts:
    unigrams: Dict[str, int]
    bigrams: Dict[Tuple[str, str], int]
    total: int

    def filtered(self, min_freq: int) -> "NgramCounts":
        """Drop words seen fewer than ``min_freq`` times, and their bigrams."""
        if min_freq <= 1:
            return self
        keep = {w: c for w, c in self.unigrams.items() if c >= min_freq}
        bigrams = {(u, v): n for (u, v), n in self.bigrams.items() if u in keep and v in keep}
        return NgramCounts(keep, bigrams, sum(keep.values()))


def count_ngrams(lines: Iterable[str]) -> NgramCounts:
    """Unigram and within-line bigram counts of whitespace-tokenized text."""
    unigrams: Counter = Counter()
    bigrams: Counter = Counter()
    for line in lines:
        toks = line.split()
        unigrams.update(toks)
        bigrams.update(zip(toks, toks[1:]))
    total = sum(unigrams.values())
    if total == 0:
        raise ValueError("no tokens to count")
    return NgramCounts(dict(unigrams), dict(bigrams), total)


def ami(assignment: Mapping[str, Hashable], counts: NgramCounts) -> float:
    pair: Counter = Counter()
    left: Counter = Counter()
    right: Counter = Counter()
    for (u, v), n in counts.bigrams.items():
        cu, cv = assignment[u], assignment[v]
        pair[cu, cv] += n
        left[cu] += n
        right[cv] += n
    b = sum(pair.values())
    total = 0.0
    for (cu, cv), n in pair.items():
        if n:
            total += n / b * math.log(n * b / (left[cu] * right[cv]))
    return total


@dataclass
class ClusterRun:
    clusters: int = 1000
    min_freq: int = 1
    seed: int = 0  # recorded for provenance; the procedure itself is deterministic

    def __post_init__(self):
        if self.clusters < 2:
            raise ValueError("need at least 2 clusters")
        if self.min_freq < 1:
            raise ValueError("min_freq must be >= 1")


@dataclass
class MergeTree:
    """Binary merge tree; leaves are the final clusters.

    ``children[node] = (left, right)``; the left child is bit 0.
    """

    leaves: Dict[int, List[str]]
    children: Dict[int, Tuple[int, int]]
    root: int
    counts: Dict[str, int] = field(default_factory=dict)

    def leaf_paths(self) -> List[Tuple[str, int]]:
        """``(bit-string, leaf id)`` in depth-first order, 0 before 1."""
        if self.root in self.leaves and not self.children:
            return [("0", self.root)]  # a lone leaf has the empty path
        out = []
        stack = [(self.root, "")]
        while stack:
            node, bits = stack.pop()
            if node in self.children:
                left, right = self.children[node]
                stack.append((right, bits + "1"))
                stack.append((left, bits + "0"))
            else:
                out.append((bits, node))
        return out

    def paths(self) -> Dict[str, str]:
        return {w: bits for bits, leaf in self.leaf_paths() for w in self.leaves[leaf]}

    def lexicon(self) -> ClusterLexicon:
        return ClusterLexicon(self.paths())


@dataclass
class MergeStep:
    phase: int  # 1 while words are still being added, 2 while building the tree
    merged: Tuple[int, int]
    new_id: int
    loss: float
    ami: float  # tracked AMI after the merge
    active: List[int]  # active cluster ids before the merge
    assignment: Dict[str, int]  # word -> cluster id before the merge


def _g(a, b):
    return xlogy(a + b, a + b) - xlogy(a, a) - xlogy(b, b)


class _Clusterer:
    def __init__(self, counts: NgramCounts, n_clusters: int):
        self.words = sorted(counts.unigrams, key=lambda w: (-counts.unigrams[w], w))
        self.counts = counts
        v = len(self.words)
        self.word_id = {w: i for i, w in enumerate(self.words)}
        self.out_nbrs: List[List[Tuple[int, int]]] = [[] for _ in range(v)]
        self.in_nbrs: List[List[Tuple[int, int]]] = [[] for _ in range(v)]
        for (a, b), n in sorted(counts.bigrams.items()):
            i, j = self.word_id[a], self.word_id[b]
            self.out_nbrs[i].append((j, n))
            self.in_nbrs[j].append((i, n))
        self.n_bigrams = float(sum(counts.bigrams.values()))

        k = n_clusters + 1
        self.col_of_word = np.arange(v)
        self.members: Dict[int, List[int]] = {i: [i] for i in range(v)}
        self.pos_cluster = np.full(k, -1)
        self.pos_col = np.full(k, -1)
        self.n_out = np.zeros((k, v))
        self.n_in = np.zeros((k, v))
        self.left = np.zeros(k)
        self.right = np.zeros(k)
        self.loss = np.full((k, k), np.inf)
        self.next_id = v

    @property
    def active(self) -> np.ndarray:
        return np.flatnonzero(self.pos_cluster >= 0)

    def assignment(self) -> Dict[str, int]:
        out = {}
        for cid, members in self.members.items():
            for i in members:
                out[self.words[i]] = cid
        return out

    def activate(self, word: int, p: int) -> None:
        self.pos_cluster[p] = word
        self.pos_col[p] = word
        self.n_out[p] = 0.0
        self.n_in[p] = 0.0
        for j, n in self.out_nbrs[word]:
            self.n_out[p, self.col_of_word[j]] += n
        for j, n in self.in_nbrs[word]:
            self.n_in[p, self.col_of_word[j]] += n
        self.left[p] = self.n_out[p].sum()
        self.right[p] = self.n_in[p].sum()

    def pair_losses(self, p: int) -> np.ndarray:
        """Loss of merging position ``p`` with every position (inf where undefined)."""
        act = self.active
        act = act[act != p]
        out = np.full(len(self.pos_cluster), np.inf)
        if not len(act):
            return out
        cx = self.pos_col[p]
        cy = self.pos_col[act]
        rows = np.arange(len(act))
        xo, yo = self.n_out[p], self.n_out[act]
        xi, yi = self.n_in[p], self.n_in[act]
        s_out = _g(yo, xo[None, :]).sum(axis=1)
        s_in = _g(yi, xi[None, :]).sum(axis=1)
        # drop the columns of x and y themselves from the sums
        s_out -= _g(yo[:, cx], xo[cx]) + _g(yo[rows, cy], xo[cy])
        s_in -= _g(yi[:, cx], xi[cx]) + _g(yi[rows, cy], xi[cy])
        nxx, nxy = xo[cx], xo[cy]
        nyx, nyy = yo[:, cx], yo[rows, cy]
        block = (
            xlogy(nxx + nxy + nyx + nyy, nxx + nxy + nyx + nyy)
            - xlogy(nxx, nxx) - xlogy(nxy, nxy) - xlogy(nyx, nyx) - xlogy(nyy, nyy)
        )
        gain = (
            s_out + s_in + block
            - _g(self.left[p], self.left[act])
            - _g(self.right[p], self.right[act])
        )
        out[act] = -gain / self.n_bigrams
        return out

    def refresh(self, p: int) -> None:
        row = self.pair_losses(p)
        self.loss[p, :] = row
        self.loss[:, p] = row

    def best_pair(self) -> Tuple[int, int, float]:
        act = self.active
        sub = self.loss[np.ix_(act, act)]
        iu = np.triu_indices(len(act), k=1)
        vals = sub[iu]
        best = vals.min()
        tol = 1e-12 * max(1.0, abs(best))
        ties = np.flatnonzero(vals <= best + tol)
        cands = []
        for t in ties:
            p, q = act[iu[0][t]], act[iu[1][t]]
            a, b = sorted((int(self.pos_cluster[p]), int(self.pos_cluster[q])))
            cands.append(((a, b), p, q, vals[t]))
        (_, p, q, val) = min(cands, key=lambda c: c[0])
        return int(p), int(q), float(val)

    def merge(self, p: int, q: int) -> Tuple[int, int, int]:
        pa, pb = min(p, q), max(p, q)
        ca, cb = self.pos_col[pa], self.pos_col[pb]
        a, b = int(self.pos_cluster[pa]), int(self.pos_cluster[pb])

        # losses of untouched pairs only change through columns a and b
        others = self.active
        others = others[(others != pa) & (others != pb)]
        if len(others) > 1:
            delta = 0.0
            for n in (self.n_out, self.n_in):
                va, vb = n[others, ca], n[others, cb]
                vm = va + vb
                delta = delta + (
                    _g(vm[:, None], vm[None, :])
                    - _g(va[:, None], va[None, :])
                    - _g(vb[:, None], vb[None, :])
                )
            idx = np.ix_(others, others)
            self.loss[idx] -= delta / self.n_bigrams
            np.fill_diagonal(self.loss, np.inf)

        self.n_out[pa] += self.n_out[pb]
        self.n_in[pa] += self.n_in[pb]
        self.n_out[:, ca] += self.n_out[:, cb]
        self.n_in[:, ca] += self.n_in[:, cb]
        self.n_out[:, cb] = 0.0
        self.n_in[:, cb] = 0.0
        self.n_out[pb] = 0.0
        self.n_in[pb] = 0.0
        self.left[pa] += self.left[pb]
        self.right[pa] += self.right[pb]
        self.left[pb] = self.right[pb] = 0.0

        new = self.next_id
        self.next_id += 1
        self.members[new] = self.members.pop(a) + self.members.pop(b)
        self.col_of_word[self.members[new]] = ca
        self.pos_cluster[pa] = new
        self.pos_cluster[pb] = -1
        self.pos_col[pb] = -1
        self.loss[pb, :] = np.inf
        self.loss[:, pb] = np.inf
        self.refresh(pa)
        return a, b, new


def cluster(
    counts: NgramCounts,
    run: ClusterRun,
    debug: bool = False,
    on_merge: Optional[Callable[[MergeStep], None]] = None,
) -> Tuple[MergeTree, ClusterLexicon]:
    """Cluster the vocabulary into ``run.clusters`` leaves.

    With ``debug=True`` the tracked AMI is checked against a from-scratch
    recomputation after every merge (RuntimeError on a difference above
    1e-9).
    """
    counts = counts.filtered(run.min_freq)
    vocab = len(counts.unigrams)
    if vocab < run.clusters:
        raise ValueError(
            f"vocabulary has {vocab} words (min_freq={run.min_freq}), fewer than {run.clusters} clusters"
        )
    if not counts.bigrams:
        raise ValueError("no bigrams to cluster on")
    cl = _Clusterer(counts, run.clusters)
    c = run.clusters
    for w in range(c):
        cl.activate(w, w)
    for p in range(c):
        cl.refresh(p)
    current = ami(cl.assignment(), counts)
    free = c

    def step(phase: int) -> int:
        nonlocal current
        p, q, loss = cl.best_pair()
        before = None
        if on_merge is not None or debug:
            before = (sorted(int(x) for x in cl.pos_cluster[cl.active]), cl.assignment())
        a, b, new = cl.merge(p, q)
        current -= loss
        if debug:
            fresh = ami(cl.assignment(), counts)
            if abs(fresh - current) > 1e-9:
                raise RuntimeError(f"tracked AMI {current!r} != recomputed {fresh!r} after merging {a},{b}")
        if on_merge is not None:
            on_merge(MergeStep(phase, (a, b), new, loss, current, before[0], before[1]))
        log.debug("phase %d: merged %d and %d into %d (loss %.6g)", phase, a, b, new, loss)
        return max(p, q)  # the merged cluster keeps the lower position

    for w in range(c, vocab):
        cl.activate(w, free)
        cl.refresh(free)
        free = step(1)

    leaves = {cid: [cl.words[i] for i in sorted(members)] for cid, members in cl.members.items()}
    children: Dict[int, Tuple[int, int]] = {}
    while len(cl.active) > 1:
        p, q, _ = cl.best_pair()
        ids = sorted((int(cl.pos_cluster[p]), int(cl.pos_cluster[q])))
        new = cl.next_id
        step(2)
        children[new] = (ids[0], ids[1])
    root = int(cl.pos_cluster[cl.active[0]])
    tree = MergeTree(leaves, children, root, dict(counts.unigrams))
    return tree, tree.lexicon()


def write_paths(tree: MergeTree) -> str:
    """``bitstring<TAB>word<TAB>count`` lines, leaves in tree order, words by frequency."""
    lines = []
    for bits, leaf in tree.leaf_paths():
        for w in tree.leaves[leaf]:
            lines.append(f"{bits}\t{w}\t{tree.counts.get(w, 0)}\n")
    return "".join(lines)
