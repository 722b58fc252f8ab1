"""Token-passing decoding over a compiled graph.

One best token is kept per (unit instance, HMM state) per frame; tokens
are stored as parallel arrays of partial scores and link indices.  When
a token crosses a unit boundary a record (previous link, finished node,
end frame) is appended to an arena; tracing the winning token's chain
back yields the unit boundaries at O(1) per boundary.

Decoding is exact by default: with the beam disabled the result is the
maximum-probability pair of unit path and state path.  The optional beam
keeps the best scoring states per frame (ties at the cutoff survive),
trading exactness for speed.

Tie-breaking is deterministic everywhere.  A boundary-crossing entry
beats a same-scored self-loop, earlier graph nodes beat later ones, and
within a unit an advance beats a same-scored stay; together with the
sorted graph build this makes results independent of model insertion
order.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .data import (
    FeatureSequence,
    Segmentation,
    Transcript,
    UnitLexicon,
    segmentation_to_transcript,
)
from .errors import BeamPrunedError, DataError, DecodeError, NoPathError
from .grammar import DecodingGraph, GraphNode
from .hmm import UnitHmm


def _frames(seq) -> np.ndarray:
    if isinstance(seq, FeatureSequence):
        return seq.frames
    arr = np.asarray(seq, dtype=np.float64)
    if arr.ndim != 2:
        raise DataError(f"expected a (T, m) frame array, got shape {arr.shape}")
    return arr


@dataclass(eq=False)
class DecodeResult:
    """Best activity, unit boundaries, and transcript for one sequence."""

    activity: str | None
    segmentation: Segmentation
    transcript: Transcript
    log_prob: float

    def to_dict(self, lexicon: UnitLexicon | None = None) -> dict:
        def name(u: int):
            return lexicon.name_of(u) if lexicon is not None else u

        return {
            "activity": self.activity,
            "log_prob": float(self.log_prob),
            "segments": [[s, e, name(u)] for u, s, e in self.segmentation.segments],
            "transcript": [name(u) for u in self.transcript.units],
        }


class _Layout:
    """Flattened state indexing for a graph: node i's states occupy
    offsets[i] .. offsets[i] + n_i - 1."""

    def __init__(self, graph: DecodingGraph):
        self.graph = graph
        self.offsets = np.empty(len(graph.nodes), dtype=np.int64)
        total = 0
        for i, node in enumerate(graph.nodes):
            self.offsets[i] = total
            total += graph.hmms[node.unit_id].n
        self.total = total
        self.log_self = np.empty(total)
        self.log_next = np.empty(total)
        self.first = np.zeros(total, dtype=bool)
        self.exit_state = np.empty(len(graph.nodes), dtype=np.int64)
        self.exit_log = np.empty(len(graph.nodes))
        for i, node in enumerate(graph.nodes):
            hmm = graph.hmms[node.unit_id]
            o = self.offsets[i]
            self.log_self[o : o + hmm.n] = hmm.log_self
            self.log_next[o : o + hmm.n] = hmm.log_next
            self.first[o] = True
            self.exit_state[i] = o + hmm.n - 1
            self.exit_log[i] = hmm.log_next[-1]
        # incoming unit-level edges per node, sorted by source for the
        # deterministic first-wins argmax
        incoming: list[list[tuple[int, float]]] = [[] for _ in graph.nodes]
        for node in graph.nodes:
            for j, w in node.edges:
                incoming[j].append((node.index, w))
        self.in_src = []
        self.in_w = []
        for lst in incoming:
            lst.sort()
            self.in_src.append(np.array([i for i, _ in lst], dtype=np.int64))
            self.in_w.append(np.array([w for _, w in lst]))

    def obs_table(self, frames: np.ndarray) -> np.ndarray:
        """(T, total) observation log-likelihoods; per-unit tables are
        computed once and shared by all instances of the unit."""
        by_unit = {}
        for node in self.graph.nodes:
            if node.unit_id not in by_unit:
                by_unit[node.unit_id] = self.graph.hmms[node.unit_id].obs_log_prob(frames)
        out = np.empty((frames.shape[0], self.total))
        for i, node in enumerate(self.graph.nodes):
            o = self.offsets[i]
            tab = by_unit[node.unit_id]
            out[:, o : o + tab.shape[1]] = tab
        return out


def _apply_beam(scores: np.ndarray, beam: int) -> None:
    """Keep the beam best finite scores (ties at the cutoff survive);
    everything else drops to -inf.  In place."""
    finite = scores > -np.inf
    count = int(finite.sum())
    if count <= beam:
        return
    cutoff = np.partition(scores[finite], -beam)[-beam]
    scores[scores < cutoff] = -np.inf


def decode(
    graph: DecodingGraph,
    seq,
    beam: int | None = None,
    priors: Mapping[int, float] | None = None,
) -> DecodeResult:
    """Best (unit path, state path) pair for one sequence.

    priors, when given, add a per-unit log weight at every unit entry
    (including the first).  Raises when no complete path exists; with an
    active beam the failure suggests widening it, since the exact path
    may have been pruned.
    """
    if beam is not None and beam < 1:
        raise ValueError("beam must keep at least one state")
    frames = _frames(seq)
    T = frames.shape[0]
    lay = _Layout(graph)
    obs = lay.obs_table(frames)
    links: list[tuple[int, int, int]] = []

    def fail(t: int):
        if beam is not None:
            raise BeamPrunedError(
                f"no surviving token at frame {t}; the beam ({beam}) may be "
                "too tight, retry with a wider one"
            )
        raise NoPathError(f"no legal path covers all {T} frames")

    def prior_of(node: GraphNode) -> float:
        if priors is None:
            return 0.0
        return float(priors.get(node.unit_id, 0.0))

    score = np.full(lay.total, -np.inf)
    link = np.full(lay.total, -1, dtype=np.int64)
    for j, w in graph.start_edges:
        cand = w + prior_of(graph.nodes[j])
        if cand > score[lay.offsets[j]]:
            score[lay.offsets[j]] = cand
    score += obs[0]
    if beam is not None:
        _apply_beam(score, beam)
    if not np.any(score > -np.inf):
        fail(0)

    for t in range(1, T):
        stay = score + lay.log_self
        adv = np.full(lay.total, -np.inf)
        adv[1:] = score[:-1] + lay.log_next[:-1]
        adv[lay.first] = -np.inf
        take_adv = adv >= stay
        trans = np.where(take_adv, adv, stay)
        new_link = np.where(take_adv, np.roll(link, 1), link)

        exits = score[lay.exit_state] + lay.exit_log
        exit_links = link[lay.exit_state]
        for j in range(len(graph.nodes)):
            src = lay.in_src[j]
            if src.size == 0:
                continue
            cand = exits[src] + lay.in_w[j] + prior_of(graph.nodes[j])
            k = int(np.argmax(cand))
            best = cand[k]
            o = lay.offsets[j]
            if best > -np.inf and best >= trans[o]:
                trans[o] = best
                links.append((int(exit_links[src[k]]), int(src[k]), t - 1))
                new_link[o] = len(links) - 1

        score = trans + obs[t]
        link = new_link
        if beam is not None:
            _apply_beam(score, beam)
        if not np.any(score > -np.inf):
            fail(t)

    best_i = -1
    best_score = -np.inf
    for i, node in enumerate(graph.nodes):
        if not node.terminal:
            continue
        s = score[lay.exit_state[i]] + lay.exit_log[i]
        if s > best_score:
            best_score = s
            best_i = i
    if best_i < 0 or best_score == -np.inf:
        fail(T - 1)

    chain = [(best_i, T - 1)]
    cur = int(link[lay.exit_state[best_i]])
    while cur != -1:
        prev, node_idx, end = links[cur]
        chain.append((node_idx, end))
        cur = prev
    chain.reverse()

    segs = []
    start = 0
    for node_idx, end in chain:
        segs.append((graph.nodes[node_idx].unit_id, start, end))
        start = end + 1
    segmentation = Segmentation(tuple(segs))
    return DecodeResult(
        activity=graph.nodes[best_i].activity,
        segmentation=segmentation,
        transcript=segmentation_to_transcript(segmentation),
        log_prob=float(best_score),
    )


def classify_activity(
    graphs: DecodingGraph | Mapping[str, DecodingGraph],
    seq,
    beam: int | None = None,
    priors: Mapping[int, float] | None = None,
) -> tuple[str, DecodeResult]:
    """Best activity label for a whole sequence.

    A single union graph (all activities composed together) is decoded
    in one pass, the winning path's activity tag decides; with a mapping
    of per-activity graphs each is decoded and the best log_prob wins.
    Ties go to the lexicographically first activity either way.
    """
    if isinstance(graphs, DecodingGraph):
        result = decode(graphs, seq, beam=beam, priors=priors)
        if result.activity is None:
            raise DecodeError("graph carries no activity tags; compose it from a grammar")
        return result.activity, result
    best: tuple[str, DecodeResult] | None = None
    for act in sorted(graphs):
        try:
            result = decode(graphs[act], seq, beam=beam, priors=priors)
        except DecodeError:
            continue
        if best is None or result.log_prob > best[1].log_prob:
            best = (act, result)
    if best is None:
        raise DecodeError("no activity admits a legal path for this sequence")
    return best


def force_align(
    hmms: Mapping[int, UnitHmm],
    transcript: Transcript,
    seq,
    beam: int | None = None,
) -> Segmentation:
    """Optimal boundaries for a fixed unit order.

    Equivalent to decoding a single-sentence graph of exactly this
    transcript (no silence bracketing is required here).
    """
    units = transcript.units if isinstance(transcript, Transcript) else tuple(transcript)
    if not units:
        raise DataError("cannot align an empty transcript")
    for u in units:
        if u not in hmms:
            raise DataError(f"no trained model for unit id {u}")
    frames = _frames(seq)
    need = sum(hmms[u].n for u in units)
    if need > frames.shape[0]:
        raise NoPathError(
            f"transcript needs at least {need} frames, sequence has {frames.shape[0]}"
        )
    last = len(units) - 1
    nodes = tuple(
        GraphNode(
            index=i,
            unit_id=u,
            activity=None,
            terminal=(i == last),
            edges=((i + 1, 0.0),) if i < last else (),
        )
        for i, u in enumerate(units)
    )
    graph = DecodingGraph(
        nodes=nodes,
        start_edges=((0, 0.0),),
        hmms=dict(hmms),
        kind="grammar",
    )
    return decode(graph, frames, beam=beam).segmentation


def majority_vote(hypotheses: Sequence[Sequence]) -> list:
    """Per-frame majority label over equal-length hypotheses; ties go to
    the smallest label."""
    if not hypotheses:
        raise DataError("majority vote needs at least one hypothesis")
    T = len(hypotheses[0])
    for i, h in enumerate(hypotheses):
        if len(h) != T:
            raise DataError(
                f"hypothesis {i} has {len(h)} frames, expected {T}"
            )
    out = []
    for t in range(T):
        counts = Counter(h[t] for h in hypotheses)
        top = max(counts.values())
        out.append(min(lbl for lbl, c in counts.items() if c == top))
    return out
