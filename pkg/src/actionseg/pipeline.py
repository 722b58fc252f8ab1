"""End-to-end training orchestration.

Supervised training extracts the annotated unit segments of a split,
balances the per-unit sample counts, trains one left-to-right HMM per
unit (flat start, hard-alignment passes, then forward-backward), and
builds the activity grammar from the split's transcripts.  The result is
a self-contained model bundle directory.

Semi-supervised bootstrapping first trains on a fully annotated subset,
then force-aligns transcript-only clips with those models and
re-estimates everything on the union.

Also here: unit granularity splitting (each annotated segment divided
into equal sub-unit spans) and the mirrored-feature augmentation hook.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import (
    ClipRecord,
    DatasetManifest,
    FeatureSequence,
    Transcript,
    UnitLexicon,
    load_features,
    load_segmentation,
    load_transcript,
    read_segment_names,
    read_transcript_names,
    save_manifest,
    segmentation_to_transcript,
)
from .decoder import force_align
from .errors import DataError
from .grammar import Grammar, build_grammar, export_ebnf, parse_ebnf
from .hmm import (
    UnitHmm,
    baum_welch,
    init_hmm,
    load_hmm_set,
    save_hmm_set,
    unit_log_priors,
    viterbi_train,
)
from .util import child_rng, parallel_map, read_json, write_json

DEFAULT_SILENCE = "SIL"
BUNDLE_CONFIG_FORMAT = "pipeline-config"
BUNDLE_CONFIG_VERSION = 1


@dataclass
class BalanceConfig:
    """Per-unit sample count bounds and the oversampling jitter scale.

    jitter_sigma scales the per-dimension standard deviation of the
    unit's own frames; oversampled copies are originals plus Gaussian
    noise of that width.
    """

    lower: int = 50
    upper: int = 80
    jitter_sigma: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.lower <= self.upper:
            raise DataError(f"need 1 <= lower <= upper, got [{self.lower}, {self.upper}]")
        if self.jitter_sigma < 0:
            raise DataError("jitter_sigma cannot be negative")

    def to_dict(self) -> dict:
        return {
            "lower": self.lower,
            "upper": self.upper,
            "jitter_sigma": self.jitter_sigma,
            "seed": self.seed,
        }


@dataclass
class TrainConfig:
    """Knobs of the supervised training loop."""

    balance: BalanceConfig = field(default_factory=BalanceConfig)
    seed: int = 0
    viterbi_iters: int = 10
    baum_welch_iters: int = 10
    tol: float = 1e-4
    silence: str = DEFAULT_SILENCE

    def to_dict(self) -> dict:
        return {
            "balance": self.balance.to_dict(),
            "seed": self.seed,
            "viterbi_iters": self.viterbi_iters,
            "baum_welch_iters": self.baum_welch_iters,
            "tol": self.tol,
            "silence": self.silence,
        }


@dataclass
class BootstrapConfig:
    """Which clips carry frame annotations and which only transcripts."""

    annotated_clip_ids: tuple[str, ...]
    transcript_clip_ids: tuple[str, ...]
    rounds: int = 1

    def __post_init__(self):
        self.annotated_clip_ids = tuple(self.annotated_clip_ids)
        self.transcript_clip_ids = tuple(self.transcript_clip_ids)
        overlap = set(self.annotated_clip_ids) & set(self.transcript_clip_ids)
        if overlap:
            raise DataError(
                f"clips cannot be both annotated and transcript-only: {sorted(overlap)}"
            )
        if self.rounds < 0:
            raise DataError("rounds cannot be negative")


@dataclass(eq=False)
class ModelBundle:
    """Everything needed to decode: unit models, lexicon, grammar, priors,
    and the configuration that produced them."""

    hmms: dict[int, UnitHmm]
    lexicon: UnitLexicon
    grammar: Grammar
    priors: dict[int, float]
    config: dict


# ---------------------------------------------------------------------------
# data collection


def _resolve_clip_ids(manifest: DatasetManifest, split) -> tuple[str, ...]:
    """A split name, an explicit id collection, or None for all clips."""
    if split is None:
        return tuple(c.clip_id for c in manifest.clips)
    if isinstance(split, str):
        return manifest.split_ids(split)
    return tuple(str(c) for c in split)


def collect_lexicon(manifest: DatasetManifest, silence: str = DEFAULT_SILENCE) -> UnitLexicon:
    """Unit names from every annotation file in the manifest, sorted, with
    the silence unit always present."""
    names = {silence}
    for clip in manifest.clips:
        if clip.segmentation is not None:
            names.update(nm for _, _, nm in read_segment_names(clip.segmentation))
        if clip.transcript is not None:
            names.update(read_transcript_names(clip.transcript))
    return UnitLexicon.from_names(sorted(names), silence=silence)


def extract_segments(
    manifest: DatasetManifest,
    clip_ids,
    lexicon: UnitLexicon,
) -> tuple[dict[int, list[FeatureSequence]], list[tuple[str, Transcript]], dict[int, int]]:
    """Cut every annotated clip into its unit segments.

    Returns per-unit segment lists, per-clip (activity, transcript)
    pairs, and raw per-unit segment counts.  The transcript file is used
    when present, otherwise the transcript is read off the segmentation.
    """
    per_unit: dict[int, list[FeatureSequence]] = {}
    transcripts: list[tuple[str, Transcript]] = []
    counts: dict[int, int] = {}
    for cid in sorted(clip_ids):
        clip = manifest.clip(cid)
        if clip.segmentation is None:
            raise DataError(f"clip {cid!r} has no frame annotation")
        seq = load_features(clip.features)
        seg = load_segmentation(clip.segmentation, lexicon)
        if seg.num_frames != seq.num_frames:
            raise DataError(
                f"clip {cid!r}: segmentation covers {seg.num_frames} frames, "
                f"features have {seq.num_frames}"
            )
        for i, (unit_id, start, end) in enumerate(seg.segments):
            piece = seq.slice(start, end, clip_id=f"{cid}:{i}")
            per_unit.setdefault(unit_id, []).append(piece)
            counts[unit_id] = counts.get(unit_id, 0) + 1
        if clip.transcript is not None:
            tr = load_transcript(clip.transcript, lexicon)
        else:
            tr = segmentation_to_transcript(seg)
        transcripts.append((clip.activity, tr))
    return per_unit, transcripts, counts


# ---------------------------------------------------------------------------
# balancing


def balance_units(
    samples: dict[int, list[FeatureSequence]],
    cfg: BalanceConfig,
    lexicon: UnitLexicon | None = None,
) -> dict[int, list[FeatureSequence]]:
    """Clamp every unit's sample count into [lower, upper].

    Oversampling appends jittered copies of randomly chosen originals;
    down-selection keeps a seeded uniform subset in original order.  Both
    draws depend only on (cfg.seed, unit id), not on dict order.
    """

    def name(uid: int) -> str:
        return lexicon.name_of(uid) if lexicon is not None else str(uid)

    out: dict[int, list[FeatureSequence]] = {}
    for uid in sorted(samples):
        seqs = list(samples[uid])
        if not seqs:
            raise DataError(f"unit {name(uid)} has no training samples")
        rng = child_rng(cfg.seed, "balance", uid)
        if len(seqs) > cfg.upper:
            keep = rng.choice(len(seqs), size=cfg.upper, replace=False)
            keep.sort()
            seqs = [seqs[i] for i in keep]
        elif len(seqs) < cfg.lower:
            sigma = cfg.jitter_sigma * np.concatenate(
                [s.frames for s in seqs]
            ).std(axis=0)
            need = cfg.lower - len(seqs)
            src = rng.integers(len(seqs), size=need)
            for i, j in enumerate(src):
                base = seqs[j]
                noise = rng.normal(0.0, 1.0, size=base.frames.shape) * sigma
                seqs.append(
                    FeatureSequence(
                        base.frames + noise,
                        frame_rate=base.frame_rate,
                        clip_id=f"{base.clip_id}+jitter{i}",
                    )
                )
        out[uid] = seqs
    return out


# ---------------------------------------------------------------------------
# training


def _train_unit(
    uid: int,
    segs: list[FeatureSequence],
    K: int,
    cfg: TrainConfig,
    warm: UnitHmm | None = None,
) -> UnitHmm:
    model = warm if warm is not None else init_hmm(uid, segs, K, seed=cfg.seed)
    model = viterbi_train(model, segs, max_iter=cfg.viterbi_iters, tol=cfg.tol)
    return baum_welch(model, segs, max_iter=cfg.baum_welch_iters, tol=cfg.tol)


def train_supervised(
    manifest: DatasetManifest,
    split,
    K: int,
    cfg: TrainConfig | None = None,
    jobs: int = 1,
) -> ModelBundle:
    """Train unit models and the grammar from an annotated split.

    The lexicon spans the whole manifest so unit ids stay stable across
    splits; a unit that never occurs in the training split is an error
    (there would be no model for it at decode time).
    """
    cfg = cfg if cfg is not None else TrainConfig()
    ids = _resolve_clip_ids(manifest, split)
    if not ids:
        raise DataError("training split selects no clips")
    lexicon = collect_lexicon(manifest, cfg.silence)
    per_unit, transcripts, counts = extract_segments(manifest, ids, lexicon)
    untrained = sorted(
        lexicon.name_of(u) for u in range(len(lexicon)) if counts.get(u, 0) == 0
    )
    if untrained:
        raise DataError(
            "units with no training segments in this split: " + ", ".join(untrained)
        )
    balanced = balance_units(per_unit, cfg.balance, lexicon)
    uids = sorted(balanced)
    models = parallel_map(lambda u: _train_unit(u, balanced[u], K, cfg), uids, jobs)
    lexicon = lexicon.with_counts(counts)
    grammar = build_grammar(transcripts, lexicon)
    config = {
        "K": K,
        "split": list(split) if not isinstance(split, (str, type(None))) else split,
        **cfg.to_dict(),
    }
    return ModelBundle(
        hmms=dict(zip(uids, models)),
        lexicon=lexicon,
        grammar=grammar,
        priors=unit_log_priors(lexicon),
        config=config,
    )


def bootstrap(
    manifest: DatasetManifest,
    bcfg: BootstrapConfig,
    K: int,
    cfg: TrainConfig | None = None,
    jobs: int = 1,
) -> ModelBundle:
    """Semi-supervised training: supervised on the annotated subset, then
    per round force-align the transcript-only clips with the current
    models and re-estimate models, grammar, and priors on the union.

    With no transcript-only clips (or zero rounds) the supervised bundle
    is returned as is.
    """
    cfg = cfg if cfg is not None else TrainConfig()
    bundle = train_supervised(manifest, bcfg.annotated_clip_ids, K, cfg, jobs)
    if not bcfg.transcript_clip_ids or bcfg.rounds == 0:
        return bundle
    lexicon = bundle.lexicon
    base_units, base_transcripts, base_counts = extract_segments(
        manifest, bcfg.annotated_clip_ids, lexicon
    )
    for rnd in range(bcfg.rounds):
        per_unit = {u: list(v) for u, v in base_units.items()}
        transcripts = list(base_transcripts)
        counts = dict(base_counts)
        for cid in sorted(bcfg.transcript_clip_ids):
            clip = manifest.clip(cid)
            if clip.transcript is None:
                raise DataError(f"clip {cid!r} has no transcript")
            tr = load_transcript(clip.transcript, lexicon)
            missing = sorted(
                {lexicon.name_of(u) for u in tr.units if u not in bundle.hmms}
            )
            if missing:
                raise DataError(
                    f"clip {cid!r} uses units absent from the annotated subset "
                    f"(no model to seed them): " + ", ".join(missing)
                )
            seq = load_features(clip.features)
            seg = force_align(bundle.hmms, tr, seq)
            for i, (unit_id, start, end) in enumerate(seg.segments):
                per_unit[unit_id].append(seq.slice(start, end, clip_id=f"{cid}:{i}"))
                counts[unit_id] = counts.get(unit_id, 0) + 1
            transcripts.append((clip.activity, tr))
        balanced = balance_units(per_unit, cfg.balance, lexicon)
        uids = sorted(balanced)
        models = parallel_map(
            lambda u: _train_unit(u, balanced[u], K, cfg, warm=bundle.hmms[u]),
            uids,
            jobs,
        )
        lexicon = lexicon.with_counts(counts)
        bundle = ModelBundle(
            hmms=dict(zip(uids, models)),
            lexicon=lexicon,
            grammar=build_grammar(transcripts, lexicon),
            priors=unit_log_priors(lexicon),
            config={**bundle.config, "bootstrap_rounds": rnd + 1},
        )
    return bundle


# ---------------------------------------------------------------------------
# unit granularity splitting


def _split_rows(
    rows: list[tuple[int, int, str]],
    k: int,
    silence: str,
    context: str,
) -> list[tuple[int, int, str]]:
    out = []
    for start, end, name in rows:
        if k == 1 or name == silence:
            out.append((start, end, name))
            continue
        L = end - start + 1
        if L < k:
            warnings.warn(
                f"{context}: {L}-frame segment of {name!r} is shorter than "
                f"{k} parts; splitting into {L} single-frame parts"
            )
            sizes = [1] * L
        else:
            base = L // k
            sizes = [base] * (k - 1) + [L - base * (k - 1)]
        s = start
        for i, size in enumerate(sizes, start=1):
            out.append((s, s + size - 1, f"{name}#{i}"))
            s += size
    return out


def split_units(
    manifest: DatasetManifest,
    k: int,
    out_dir,
    silence: str = DEFAULT_SILENCE,
) -> DatasetManifest:
    """Divide every annotated non-silence segment into k equal spans named
    unit#1..unit#k (remainder frames go to the last span) and write the
    derived annotations plus a new manifest under out_dir.

    Silence stays whole so sequences remain silence-delimited.  Frame
    coverage per clip is unchanged.  Feature files are referenced, not
    copied.
    """
    if k < 1:
        raise DataError("cannot split units into zero parts")
    out_dir = Path(out_dir)
    (out_dir / "annotations").mkdir(parents=True, exist_ok=True)

    def expand_name(name: str) -> list[str]:
        if k == 1 or name == silence:
            return [name]
        return [f"{name}#{i}" for i in range(1, k + 1)]

    clips = []
    for clip in manifest.clips:
        seg_path = None
        tr_path = None
        if clip.segmentation is not None:
            rows = _split_rows(
                read_segment_names(clip.segmentation), k, silence, clip.clip_id
            )
            seg_path = out_dir / "annotations" / f"{clip.clip_id}.seg"
            with open(seg_path, "w", encoding="utf-8") as fh:
                for start, end, name in rows:
                    fh.write(f"{start} {end} {name}\n")
            tr_path = out_dir / "annotations" / f"{clip.clip_id}.tr"
            with open(tr_path, "w", encoding="utf-8") as fh:
                for _, _, name in rows:
                    fh.write(name + "\n")
        elif clip.transcript is not None:
            names = [
                part
                for nm in read_transcript_names(clip.transcript)
                for part in expand_name(nm)
            ]
            tr_path = out_dir / "annotations" / f"{clip.clip_id}.tr"
            with open(tr_path, "w", encoding="utf-8") as fh:
                for name in names:
                    fh.write(name + "\n")
        clips.append(
            ClipRecord(
                clip_id=clip.clip_id,
                features=Path(clip.features).resolve(),
                activity=clip.activity,
                segmentation=seg_path,
                transcript=tr_path,
            )
        )
    out = DatasetManifest(clips=tuple(clips), splits=dict(manifest.splits))
    save_manifest(out_dir / "manifest.json", out)
    return out


# ---------------------------------------------------------------------------
# mirrored-feature augmentation


@dataclass(eq=False)
class MirrorMap:
    """Per-dimension permutation and sign flips standing in for the
    descriptor-specific effect of mirroring the underlying video."""

    perm: np.ndarray
    signs: np.ndarray

    def __post_init__(self):
        perm = np.asarray(self.perm, dtype=np.int64)
        signs = np.asarray(self.signs, dtype=np.float64)
        if perm.shape != signs.shape or perm.ndim != 1:
            raise DataError("perm and signs must be equal-length 1-D arrays")
        if sorted(perm.tolist()) != list(range(perm.size)):
            raise DataError("perm must be a permutation of the dimensions")
        if not np.all(np.abs(signs) == 1.0):
            raise DataError("signs must be +1 or -1")
        self.perm = perm
        self.signs = signs

    @property
    def dim(self) -> int:
        return self.perm.size

    @classmethod
    def identity(cls, dim: int) -> "MirrorMap":
        return cls(perm=np.arange(dim), signs=np.ones(dim))

    @classmethod
    def sign_flip(cls, dim: int) -> "MirrorMap":
        return cls(perm=np.arange(dim), signs=-np.ones(dim))


def mirror_features(seq: FeatureSequence, mirror: MirrorMap | None = None) -> FeatureSequence:
    """Apply a mirror map to a clip's features (identity when None)."""
    if mirror is None:
        return seq
    if mirror.dim != seq.dim:
        raise DataError(
            f"mirror map has {mirror.dim} dimensions, features have {seq.dim}"
        )
    return FeatureSequence(
        seq.frames[:, mirror.perm] * mirror.signs,
        frame_rate=seq.frame_rate,
        clip_id=seq.clip_id,
    )


# ---------------------------------------------------------------------------
# bundle persistence


def save_bundle(path, bundle: ModelBundle) -> None:
    """Write hmms.json, grammar.ebnf, priors.json, pipeline-config.json."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    save_hmm_set(path / "hmms.json", bundle.hmms, bundle.lexicon)
    with open(path / "grammar.ebnf", "w", encoding="utf-8") as fh:
        fh.write(export_ebnf(bundle.grammar))
    write_json(
        path / "priors.json",
        {
            "log_priors": {
                bundle.lexicon.name_of(u): (None if v == -np.inf else float(v))
                for u, v in sorted(bundle.priors.items())
            }
        },
    )
    write_json(
        path / "pipeline-config.json",
        {
            "format": BUNDLE_CONFIG_FORMAT,
            "version": BUNDLE_CONFIG_VERSION,
            **bundle.config,
        },
    )


def load_bundle(path) -> ModelBundle:
    path = Path(path)
    hmms, lexicon = load_hmm_set(path / "hmms.json")
    with open(path / "grammar.ebnf", "r", encoding="utf-8") as fh:
        grammar = parse_ebnf(fh.read(), lexicon)
    priors_doc = read_json(path / "priors.json")["log_priors"]
    priors = {
        lexicon.id_of(name): (-np.inf if v is None else float(v))
        for name, v in priors_doc.items()
    }
    config = read_json(path / "pipeline-config.json")
    return ModelBundle(
        hmms=hmms, lexicon=lexicon, grammar=grammar, priors=priors, config=config
    )
