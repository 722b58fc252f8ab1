"""Left-to-right HMMs over feature sequences, one model per action unit.

Each model has n emitting states with diagonal-covariance GMM observation
densities.  The topology is strictly feed-forward: a state may loop on
itself or advance to its immediate successor, every path enters at the
first state and leaves through a virtual exit reachable only from the
last state.  A sequence of T frames therefore admits a legal path only
when T >= n.

The transition structure is kept as an (n+1) x (n+1) log-probability
matrix whose column n is the exit.  State indices are 0-based in code.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .data import FeatureSequence, UnitLexicon
from .errors import DataError, NoPathError
from .gmm import Gmm, em_step, fit_em, variance_floor
from .util import derive_seed, read_json, write_json

SELF_LOOP_INIT = 0.9
ADVANCE_INIT = 0.1
TRANS_FLOOR = 1e-6
STATES_PER_UNIT_DIVISOR = 10.0

HMMSET_FORMAT = "hmm-set"
HMMSET_VERSION = 1


def _frames(seq) -> np.ndarray:
    if isinstance(seq, FeatureSequence):
        return seq.frames
    arr = np.asarray(seq, dtype=np.float64)
    if arr.ndim != 2:
        raise DataError(f"expected a (T, m) frame array, got shape {arr.shape}")
    return arr


def left_right_log_trans(log_self: Sequence[float], log_next: Sequence[float]) -> np.ndarray:
    """Build the (n+1)^2 log-transition matrix from per-state self-loop and
    advance terms.  The advance out of the last state is the exit."""
    ls = np.asarray(log_self, dtype=np.float64)
    ln = np.asarray(log_next, dtype=np.float64)
    if ls.shape != ln.shape or ls.ndim != 1 or ls.size < 1:
        raise DataError("log_self and log_next must be equal-length 1-D arrays")
    n = ls.size
    lt = np.full((n + 1, n + 1), -np.inf)
    for j in range(n):
        lt[j, j] = ls[j]
        lt[j, j + 1] = ln[j]
    return lt


@dataclass(eq=False)
class UnitHmm:
    """A single action unit's left-to-right model.

    log_trans holds log a_{j,j} on the diagonal and log a_{j,j+1} on the
    superdiagonal; everything else is -inf.  obs holds one GMM per state.
    """

    unit_id: int
    log_trans: np.ndarray
    obs: list[Gmm]

    def __post_init__(self):
        if not self.obs:
            raise DataError("unit HMM needs at least one state")
        n = len(self.obs)
        lt = np.asarray(self.log_trans, dtype=np.float64)
        if lt.shape != (n + 1, n + 1):
            raise DataError(
                f"log_trans shape {lt.shape} does not match {n} states (+ exit)"
            )
        m = self.obs[0].dim
        for j, g in enumerate(self.obs):
            if g.dim != m:
                raise DataError(f"state {j} GMM has dim {g.dim}, expected {m}")
        for j in range(n):
            row = lt[j]
            for i in range(n + 1):
                if i in (j, j + 1):
                    if np.isnan(row[i]) or row[i] > 0:
                        raise DataError(f"bad log-probability at transition ({j}, {i})")
                elif row[i] != -np.inf:
                    raise DataError(
                        f"forbidden transition ({j}, {i}) must stay at -inf"
                    )
            if abs(np.exp(row[j]) + np.exp(row[j + 1]) - 1.0) > 1e-9:
                raise DataError(f"transition row {j} does not sum to 1")
        if np.any(lt[n] != -np.inf):
            raise DataError("the exit has no outgoing transitions")
        self.log_trans = lt
        self.obs = list(self.obs)

    @property
    def n(self) -> int:
        return len(self.obs)

    @property
    def dim(self) -> int:
        return self.obs[0].dim

    @property
    def log_self(self) -> np.ndarray:
        idx = np.arange(self.n)
        return self.log_trans[idx, idx]

    @property
    def log_next(self) -> np.ndarray:
        """Advance terms; the last entry is the exit log-probability."""
        idx = np.arange(self.n)
        return self.log_trans[idx, idx + 1]

    def obs_log_prob(self, frames: np.ndarray) -> np.ndarray:
        """Per-frame, per-state observation log-likelihoods, shape (T, n)."""
        return np.column_stack([g.log_prob(frames) for g in self.obs])

    def copy(self) -> "UnitHmm":
        return UnitHmm(
            unit_id=self.unit_id,
            log_trans=self.log_trans.copy(),
            obs=[
                Gmm(weights=g.weights.copy(), means=g.means.copy(), variances=g.variances.copy())
                for g in self.obs
            ],
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, UnitHmm):
            return NotImplemented
        return (
            self.unit_id == other.unit_id
            and np.array_equal(self.log_trans, other.log_trans)
            and self.obs == other.obs
        )

    def to_dict(self) -> dict:
        def enc(v: float):
            return None if v == -np.inf else float(v)

        return {
            "unit_id": int(self.unit_id),
            "log_self": [enc(v) for v in self.log_self],
            "log_next": [enc(v) for v in self.log_next],
            "states": [g.to_dict() for g in self.obs],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "UnitHmm":
        def dec(v) -> float:
            return -np.inf if v is None else float(v)

        ls = [dec(v) for v in d["log_self"]]
        ln = [dec(v) for v in d["log_next"]]
        return cls(
            unit_id=int(d["unit_id"]),
            log_trans=left_right_log_trans(ls, ln),
            obs=[Gmm.from_dict(s) for s in d["states"]],
        )


@dataclass(eq=False)
class StatePath:
    """A per-frame state assignment and its joint log-probability."""

    states: np.ndarray
    log_prob: float

    def __post_init__(self):
        s = np.asarray(self.states, dtype=np.int64)
        if s.ndim != 1 or s.size < 1:
            raise DataError("state path must be a non-empty 1-D index array")
        if s[0] != 0:
            raise DataError("state path must start in the first state")
        steps = np.diff(s)
        if s.size > 1 and (steps.min() < 0 or steps.max() > 1):
            raise DataError("state path must advance by 0 or 1 per frame")
        self.states = s
        self.log_prob = float(self.log_prob)

    def __len__(self) -> int:
        return self.states.size


# ---------------------------------------------------------------------------
# construction


def init_hmm(
    unit_id: int,
    training_seqs: list[FeatureSequence],
    K: int,
    seed: int = 0,
) -> UnitHmm:
    """Flat-start a unit model from its training sequences.

    The state count is the mean sequence length over 10 (rounded, at least
    1) and is clamped to the shortest sequence so every training sample
    still admits a legal path.  Each state's GMM is fit on the frames of
    its uniform time slice; all rows start at self-loop 0.9 / advance 0.1.
    States whose slice has fewer than K distinct frames get a smaller
    mixture rather than failing.
    """
    arrs = [_frames(s) for s in training_seqs]
    if not arrs:
        raise DataError("cannot initialize a unit HMM without training sequences")
    lengths = [a.shape[0] for a in arrs]
    mean_len = float(np.mean(lengths))
    n = max(1, int(math.floor(mean_len / STATES_PER_UNIT_DIVISOR + 0.5)))
    n = min(n, min(lengths))

    floor = variance_floor(np.concatenate(arrs))
    states = []
    for j in range(n):
        chunks = []
        for a in arrs:
            T = a.shape[0]
            slice_of = (np.arange(T) * n) // T
            chunks.append(a[slice_of == j])
        X = np.concatenate(chunks)
        k_eff = min(K, np.unique(X, axis=0).shape[0])
        states.append(fit_em(X, max(1, k_eff), seed=derive_seed(seed, unit_id, j), floor=floor))

    log_self = np.full(n, np.log(SELF_LOOP_INIT))
    log_next = np.full(n, np.log(ADVANCE_INIT))
    return UnitHmm(
        unit_id=unit_id,
        log_trans=left_right_log_trans(log_self, log_next),
        obs=states,
    )


# ---------------------------------------------------------------------------
# inference


def viterbi_align(hmm: UnitHmm, seq) -> StatePath:
    """Best legal state path for one sequence.

    On equal scores the advancing predecessor wins, which makes the
    returned path the lexicographically smallest optimum (frames sit in
    the lowest state index compatible with the best score).
    """
    frames = _frames(seq)
    T, n = frames.shape[0], hmm.n
    if T < n:
        raise NoPathError(f"{T} frames cannot visit all {n} states")
    obs = hmm.obs_log_prob(frames)
    ls, ln = hmm.log_self, hmm.log_next

    delta = np.full((T, n), -np.inf)
    psi = np.zeros((T, n), dtype=np.int64)
    delta[0, 0] = obs[0, 0]
    state_idx = np.arange(n)
    for t in range(1, T):
        stay = delta[t - 1] + ls
        adv = np.full(n, -np.inf)
        adv[1:] = delta[t - 1, :-1] + ln[:-1]
        take_adv = adv >= stay
        delta[t] = np.where(take_adv, adv, stay) + obs[t]
        psi[t] = np.where(take_adv, state_idx - 1, state_idx)

    total = delta[T - 1, n - 1] + ln[n - 1]
    if not np.isfinite(total):
        raise NoPathError("no path of finite probability reaches the final state")
    states = np.empty(T, dtype=np.int64)
    states[T - 1] = n - 1
    for t in range(T - 1, 0, -1):
        states[t - 1] = psi[t, states[t]]
    return StatePath(states=states, log_prob=float(total))


def forward_loglik(hmm: UnitHmm, seq) -> float:
    """Total log-probability summed over all legal paths (-inf when T < n)."""
    frames = _frames(seq)
    T, n = frames.shape[0], hmm.n
    if T < n:
        return float("-inf")
    obs = hmm.obs_log_prob(frames)
    ls, ln = hmm.log_self, hmm.log_next
    alpha = np.full(n, -np.inf)
    alpha[0] = obs[0, 0]
    for t in range(1, T):
        adv = np.full(n, -np.inf)
        adv[1:] = alpha[:-1] + ln[:-1]
        alpha = np.logaddexp(alpha + ls, adv) + obs[t]
    return float(alpha[n - 1] + ln[n - 1])


# ---------------------------------------------------------------------------
# training


def _usable_frames(model_n: int, seqs) -> list[np.ndarray]:
    usable = []
    for s in seqs:
        a = _frames(s)
        if a.shape[0] < model_n:
            warnings.warn(
                f"skipping a {a.shape[0]}-frame sequence shorter than the "
                f"{model_n}-state model"
            )
            continue
        usable.append(a)
    if not usable:
        raise DataError("no training sequence is long enough for this model")
    return usable


def _reestimate_transitions(self_counts: np.ndarray, adv_counts: np.ndarray) -> np.ndarray:
    """Floored, renormalized transition matrix from (expected) counts."""
    num_self = self_counts + TRANS_FLOOR
    num_adv = adv_counts + TRANS_FLOOR
    tot = num_self + num_adv
    return left_right_log_trans(np.log(num_self / tot), np.log(num_adv / tot))


def viterbi_train(
    hmm: UnitHmm,
    seqs,
    max_iter: int = 10,
    tol: float = 1e-4,
    history: list[float] | None = None,
) -> UnitHmm:
    """Alternate hard alignment with re-estimation from the alignments.

    Each iteration aligns every sequence, re-fits transitions from the
    transition counts, and applies one EM update to each state's GMM on
    its assigned frames (warm-started from the current parameters, so the
    total path log-likelihood never decreases).  Sequences shorter than n
    are skipped with a warning.  The per-iteration total path
    log-likelihood is appended to history when given.
    """
    model = hmm.copy()
    usable = _usable_frames(model.n, seqs)
    floor = variance_floor(np.concatenate(usable))
    n = model.n

    prev_total = -np.inf
    for it in range(max_iter):
        paths = [viterbi_align(model, a) for a in usable]
        total = float(sum(p.log_prob for p in paths))
        if history is not None:
            history.append(total)
        if it > 0 and total - prev_total < tol:
            break
        prev_total = total

        self_counts = np.zeros(n)
        adv_counts = np.zeros(n)
        per_state = [[] for _ in range(n)]
        for a, p in zip(usable, paths):
            s = p.states
            for j in range(n):
                sel = a[s == j]
                if sel.shape[0]:
                    per_state[j].append(sel)
            if s.size > 1:
                stayed = s[1:] == s[:-1]
                np.add.at(self_counts, s[:-1][stayed], 1.0)
                np.add.at(adv_counts, s[:-1][~stayed], 1.0)
            adv_counts[n - 1] += 1.0
        new_obs = []
        for j in range(n):
            X = np.concatenate(per_state[j])
            g, _ = em_step(model.obs[j], X, floor)
            new_obs.append(g)
        model = UnitHmm(
            unit_id=model.unit_id,
            log_trans=_reestimate_transitions(self_counts, adv_counts),
            obs=new_obs,
        )
    return model


def baum_welch(
    hmm: UnitHmm,
    seqs,
    max_iter: int = 10,
    tol: float = 1e-4,
    history: list[float] | None = None,
) -> UnitHmm:
    """Forward-backward re-estimation over state posteriors.

    Paths are pinned to enter at the first state and leave through the
    exit, so the posteriors respect the topology and forbidden
    transitions stay at -inf.  The per-iteration total forward
    log-likelihood is appended to history when given; it never decreases.
    With max_iter = 0 an unchanged copy is returned.
    """
    model = hmm.copy()
    usable = _usable_frames(model.n, seqs)
    if max_iter <= 0:
        return model
    floor = variance_floor(np.concatenate(usable))
    n, m = model.n, model.dim

    prev_total = -np.inf
    for it in range(max_iter):
        ls, ln = model.log_self, model.log_next
        total = 0.0
        self_exp = np.zeros(n)
        adv_exp = np.zeros(n)
        Rk = [np.zeros(g.n_components) for g in model.obs]
        Sx = [np.zeros((g.n_components, m)) for g in model.obs]
        Sxx = [np.zeros((g.n_components, m)) for g in model.obs]

        for a in usable:
            T = a.shape[0]
            obs = model.obs_log_prob(a)
            alpha = np.full((T, n), -np.inf)
            alpha[0, 0] = obs[0, 0]
            for t in range(1, T):
                adv = np.full(n, -np.inf)
                adv[1:] = alpha[t - 1, :-1] + ln[:-1]
                alpha[t] = np.logaddexp(alpha[t - 1] + ls, adv) + obs[t]
            ll = alpha[T - 1, n - 1] + ln[n - 1]
            total += ll

            beta = np.full((T, n), -np.inf)
            beta[T - 1, n - 1] = ln[n - 1]
            for t in range(T - 2, -1, -1):
                stay = ls + obs[t + 1] + beta[t + 1]
                adv = np.full(n, -np.inf)
                adv[:-1] = ln[:-1] + obs[t + 1, 1:] + beta[t + 1, 1:]
                beta[t] = np.logaddexp(stay, adv)

            gamma_log = alpha + beta - ll
            if T > 1:
                self_exp += np.exp(alpha[:-1] + ls + obs[1:] + beta[1:] - ll).sum(axis=0)
                adv_exp[:-1] += np.exp(
                    alpha[:-1, :-1] + ln[:-1] + obs[1:, 1:] + beta[1:, 1:] - ll
                ).sum(axis=0)
            adv_exp[n - 1] += 1.0

            for j in range(n):
                comp = model.obs[j]._component_log_prob(a)
                r = np.exp(gamma_log[:, j : j + 1] + comp - obs[:, j : j + 1])
                Rk[j] += r.sum(axis=0)
                Sx[j] += r.T @ a
                Sxx[j] += r.T @ (a * a)

        if history is not None:
            history.append(float(total))
        if it > 0 and total - prev_total < tol:
            break
        prev_total = total

        new_obs = []
        for j in range(n):
            g = model.obs[j]
            new_w = g.weights.copy()
            new_mu = g.means.copy()
            new_var = g.variances.copy()
            alive = Rk[j] > 1e-12
            new_w[alive] = Rk[j][alive] / Rk[j].sum()
            new_w[~alive] = 1e-12
            new_w /= new_w.sum()
            for k in np.flatnonzero(alive):
                mu = Sx[j][k] / Rk[j][k]
                new_mu[k] = mu
                new_var[k] = np.maximum(Sxx[j][k] / Rk[j][k] - mu * mu, floor)
            new_obs.append(Gmm(weights=new_w, means=new_mu, variances=new_var))
        model = UnitHmm(
            unit_id=model.unit_id,
            log_trans=_reestimate_transitions(self_exp, adv_exp),
            obs=new_obs,
        )
    return model


# ---------------------------------------------------------------------------
# isolated-unit scoring


def score_unit(hmm: UnitHmm, seq, prior_log: float = 0.0) -> float:
    """Best-path log-probability plus a unit log-prior; -inf when no legal
    path exists (sequence shorter than the model)."""
    try:
        path = viterbi_align(hmm, seq)
    except NoPathError:
        return float("-inf")
    return path.log_prob + prior_log


def unit_log_priors(lexicon: UnitLexicon) -> dict[int, float]:
    """Normalized log-priors proportional to 1/N(u) from lexicon sample
    counts.  Units with zero recorded samples get -inf; if no unit has a
    count the priors degenerate to uniform zeros."""
    w = [1.0 / c if c > 0 else 0.0 for c in lexicon.sample_count]
    tot = sum(w)
    if tot <= 0:
        return {i: 0.0 for i in range(len(lexicon))}
    return {
        i: (math.log(wi / tot) if wi > 0 else float("-inf")) for i, wi in enumerate(w)
    }


def classify_unit(
    hmms: Mapping[int, UnitHmm],
    seq,
    prior_logs: Mapping[int, float] | None = None,
) -> int | None:
    """Return the best-scoring unit id, or None when every unit scores -inf
    (no decision).  Exact ties go to the smallest unit id."""
    best_id = None
    best = -np.inf
    for uid in sorted(hmms):
        p = 0.0 if prior_logs is None else prior_logs.get(uid, 0.0)
        s = score_unit(hmms[uid], seq, p)
        if s > best:
            best = s
            best_id = uid
    return best_id if best > -np.inf else None


# ---------------------------------------------------------------------------
# persistence


def save_hmm_set(path, hmms: Mapping[int, UnitHmm], lexicon: UnitLexicon) -> None:
    doc = {
        "format": HMMSET_FORMAT,
        "version": HMMSET_VERSION,
        "lexicon": {
            "names": list(lexicon.names),
            "sample_count": list(lexicon.sample_count),
            "silence": lexicon.name_of(lexicon.silence_id),
        },
        "units": [hmms[uid].to_dict() for uid in sorted(hmms)],
    }
    write_json(path, doc)


def load_hmm_set(path) -> tuple[dict[int, UnitHmm], UnitLexicon]:
    doc = read_json(path)
    if not isinstance(doc, dict) or doc.get("format") != HMMSET_FORMAT:
        raise DataError(f"{path} is not a saved HMM set")
    lex_doc = doc["lexicon"]
    names = [str(s) for s in lex_doc["names"]]
    lexicon = UnitLexicon.from_names(
        names,
        silence=str(lex_doc["silence"]),
        counts=dict(zip(names, lex_doc["sample_count"])),
    )
    hmms = {}
    for d in doc["units"]:
        model = UnitHmm.from_dict(d)
        if not 0 <= model.unit_id < len(lexicon):
            raise DataError(f"unit id {model.unit_id} outside the lexicon")
        hmms[model.unit_id] = model
    return hmms, lexicon
