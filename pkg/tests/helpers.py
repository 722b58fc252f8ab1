"""Shared builders and brute-force oracles for the test suite.

The oracles trade speed for obviousness: they enumerate every legal path
explicitly, so any agreement with the dynamic-programming code is
evidence the recursions are right.
"""

from __future__ import annotations

import numpy as np

from actionseg.gmm import Gmm
from actionseg.grammar import DecodingGraph, Grammar, build_grammar, compose
from actionseg.hmm import UnitHmm, left_right_log_trans
from actionseg.data import Transcript, UnitLexicon


def random_gmm(rng: np.random.Generator, K: int, m: int) -> Gmm:
    w = rng.uniform(0.2, 1.0, K)
    return Gmm(
        weights=w / w.sum(),
        means=rng.normal(0.0, 2.0, (K, m)),
        variances=rng.uniform(0.2, 1.5, (K, m)),
    )


def random_unit_hmm(rng: np.random.Generator, unit_id: int, n: int, K: int, m: int) -> UnitHmm:
    p_self = rng.uniform(0.2, 0.9, n)
    return UnitHmm(
        unit_id=unit_id,
        log_trans=left_right_log_trans(np.log(p_self), np.log(1.0 - p_self)),
        obs=[random_gmm(rng, K, m) for _ in range(n)],
    )


# ---------------------------------------------------------------------------
# single-unit path enumeration


def enumerate_state_paths(n: int, T: int) -> list[tuple[int, ...]]:
    """Every legal path: starts at 0, steps 0 or +1, ends at n - 1."""
    out: list[tuple[int, ...]] = []

    def grow(path: list[int]) -> None:
        if len(path) == T:
            if path[-1] == n - 1:
                out.append(tuple(path))
            return
        s = path[-1]
        grow(path + [s])
        if s + 1 < n:
            grow(path + [s + 1])

    grow([0])
    return out


def unit_path_log_prob(hmm: UnitHmm, obs: np.ndarray, path: tuple[int, ...]) -> float:
    lp = obs[0, path[0]]
    for t in range(1, len(path)):
        lp += hmm.log_trans[path[t - 1], path[t]] + obs[t, path[t]]
    return lp + hmm.log_trans[path[-1], hmm.n]


def oracle_viterbi(hmm: UnitHmm, frames: np.ndarray) -> tuple[tuple[int, ...], float]:
    """Best path by exhaustive search; ties go to the lexicographically
    smallest path."""
    obs = hmm.obs_log_prob(frames)
    best_path = None
    best = -np.inf
    for path in sorted(enumerate_state_paths(hmm.n, frames.shape[0])):
        lp = unit_path_log_prob(hmm, obs, path)
        if lp > best:
            best = lp
            best_path = path
    return best_path, best


def oracle_forward(hmm: UnitHmm, frames: np.ndarray) -> float:
    obs = hmm.obs_log_prob(frames)
    terms = [
        unit_path_log_prob(hmm, obs, path)
        for path in enumerate_state_paths(hmm.n, frames.shape[0])
    ]
    if not terms:
        return float("-inf")
    terms = np.array(terms)
    peak = terms.max()
    return float(peak + np.log(np.exp(terms - peak).sum()))


# ---------------------------------------------------------------------------
# graph decoding enumeration


def oracle_decode_best(graph: DecodingGraph, frames: np.ndarray, priors=None) -> tuple[float, list[int]]:
    """Best complete labeling by exhaustive token simulation.

    Returns (best log-prob, per-frame node indices); (-inf, []) when no
    complete path exists.
    """
    T = frames.shape[0]
    obs = {i: graph.hmms[node.unit_id].obs_log_prob(frames) for i, node in enumerate(graph.nodes)}

    def prior_of(i: int) -> float:
        if priors is None:
            return 0.0
        return float(priors.get(graph.nodes[i].unit_id, 0.0))

    best = [-np.inf, []]

    def step(i: int, s: int, t: int, acc: float, labels: list[int]) -> None:
        hmm = graph.hmms[graph.nodes[i].unit_id]
        if t == T - 1:
            if s == hmm.n - 1 and graph.nodes[i].terminal:
                total = acc + hmm.log_trans[s, hmm.n]
                if total > best[0]:
                    best[0] = total
                    best[1] = list(labels)
            return
        stay = acc + hmm.log_trans[s, s] + obs[i][t + 1, s]
        step(i, s, t + 1, stay, labels + [i])
        if s + 1 < hmm.n:
            adv = acc + hmm.log_trans[s, s + 1] + obs[i][t + 1, s + 1]
            step(i, s + 1, t + 1, adv, labels + [i])
        if s == hmm.n - 1:
            for j, w in graph.nodes[i].edges:
                enter = acc + hmm.log_trans[s, hmm.n] + w + prior_of(j) + obs[j][t + 1, 0]
                step(j, 0, t + 1, enter, labels + [j])

    for j, w in graph.start_edges:
        step(j, 0, 0, w + prior_of(j) + obs[j][0, 0], [j])
    return best[0], best[1]


def random_sentence_grammar(
    rng: np.random.Generator,
    unit_names: list[str],
    n_sentences: int,
    max_inner: int,
) -> tuple[Grammar, UnitLexicon]:
    """A grammar of random silence-bracketed sentences over the given units."""
    lexicon = UnitLexicon.from_names(["SIL", *unit_names], silence="SIL")
    transcripts = []
    for k in range(n_sentences):
        inner = [
            lexicon.id_of(unit_names[int(rng.integers(len(unit_names)))])
            for _ in range(int(rng.integers(1, max_inner + 1)))
        ]
        units = (lexicon.silence_id, *inner, lexicon.silence_id)
        transcripts.append((f"act{k % 2}", Transcript(units)))
    return build_grammar(transcripts, lexicon), lexicon


def compose_random_graph(rng, unit_names, hmms, n_sentences=2, max_inner=1):
    grammar, lexicon = random_sentence_grammar(rng, unit_names, n_sentences, max_inner)
    return compose(grammar, hmms), lexicon
