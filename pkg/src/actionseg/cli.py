"""Command line front end.

Subcommands cover the whole workflow: generate synthetic data, train
models, decode or align clips, classify whole sequences, bootstrap from
transcript-only clips, encode features, evaluate predictions, and sweep a
model grid with frame-level voting.

Exit codes: 0 success, 1 usage error, 2 data error, 3 decode failure.
All JSON output is printed with sorted keys so repeated runs are
byte-identical.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .data import (
    ClipRecord,
    DatasetManifest,
    FeatureSequence,
    Segmentation,
    UnitLexicon,
    frame_labels,
    load_features,
    load_manifest,
    load_transcript,
    read_segment_names,
    save_features,
    save_manifest,
    write_segment_names,
)
from .decoder import classify_activity, decode, force_align, majority_vote
from .errors import DataError, DecodeError
from .features import (
    DEFAULT_FV_WINDOW,
    FrameEncoder,
    FvEncoderConfig,
    apply_pca,
    fit_fv_codebook,
    fit_pca,
    save_encoder,
    window_fv_matrix,
)
from .grammar import compose
from .metrics import accuracy, jaccard, mof, moc, report_row, write_report_csv, write_report_json
from .pipeline import (
    DEFAULT_SILENCE,
    BalanceConfig,
    BootstrapConfig,
    MirrorMap,
    TrainConfig,
    bootstrap,
    load_bundle,
    mirror_features,
    save_bundle,
    train_supervised,
)
from .synth import SynthSpec, generate_dataset
from .util import derive_seed, dump_json, parallel_map, write_json

USAGE_EXIT = 1
DATA_EXIT = 2
DECODE_EXIT = 3


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; this front end reserves 2 for
    data errors, so usage problems exit 1 instead."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(USAGE_EXIT)


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def _nonneg_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {value}")
    return value


def _nonneg_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not value >= 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative number, got {value}")
    return value


def _int_list(text: str) -> list[int]:
    parts = [p for p in text.split(",") if p.strip()]
    if not parts:
        raise argparse.ArgumentTypeError("expected a comma-separated list of integers")
    return [_positive_int(p.strip()) for p in parts]


def _print_json(obj) -> None:
    sys.stdout.write(dump_json(obj))


def _select_records(manifest: DatasetManifest, split=None, clip=None) -> list[ClipRecord]:
    if clip:
        records = [manifest.clip(c) for c in clip]
    elif split is not None:
        records = [manifest.clip(c) for c in manifest.split_ids(split)]
    else:
        records = list(manifest.clips)
    if not records:
        raise DataError("no clips selected")
    return sorted(records, key=lambda r: r.clip_id)


def _train_config(args) -> TrainConfig:
    return TrainConfig(
        balance=BalanceConfig(
            lower=args.balance_lower,
            upper=args.balance_upper,
            jitter_sigma=args.jitter,
            seed=args.seed,
        ),
        seed=args.seed,
        viterbi_iters=args.viterbi_iters,
        baum_welch_iters=args.baum_welch_iters,
        silence=args.silence,
    )


def _segment_rows(seg: Segmentation, lexicon: UnitLexicon) -> list[tuple[int, int, str]]:
    return [(s, e, lexicon.name_of(u)) for u, s, e in seg.segments]


def _runs_to_rows(labels) -> list[tuple[int, int, str]]:
    rows = []
    start = 0
    for t in range(1, len(labels)):
        if labels[t] != labels[t - 1]:
            rows.append((start, t - 1, labels[start]))
            start = t
    rows.append((start, len(labels) - 1, labels[start]))
    return rows


def _reference_frame_names(rec: ClipRecord, expect_frames: int | None = None) -> list[str]:
    if rec.segmentation is None:
        raise DataError(f"clip {rec.clip_id!r} has no reference segmentation")
    rows = read_segment_names(rec.segmentation)
    names: list[str] = []
    cursor = 0
    for start, end, name in rows:
        if start != cursor or end < start:
            raise DataError(
                f"clip {rec.clip_id!r}: segments must tile the clip from frame 0"
            )
        names.extend([name] * (end - start + 1))
        cursor = end + 1
    if expect_frames is not None and len(names) != expect_frames:
        raise DataError(
            f"clip {rec.clip_id!r}: reference covers {len(names)} frames, "
            f"features have {expect_frames}"
        )
    return names


# ---------------------------------------------------------------------------
# commands


def cmd_train(args) -> None:
    manifest = load_manifest(args.manifest)
    bundle = train_supervised(
        manifest, args.split, args.gmm_k, _train_config(args), jobs=args.jobs
    )
    save_bundle(args.out, bundle)
    _print_json(
        {
            "activities": list(bundle.grammar.activities),
            "out": str(args.out),
            "sentences": bundle.grammar.num_sentences(),
            "units": len(bundle.hmms),
        }
    )


def cmd_decode(args) -> None:
    bundle = load_bundle(args.model)
    manifest = load_manifest(args.manifest)
    records = _select_records(manifest, args.split, args.clip)
    graph = compose(bundle.grammar, bundle.hmms)
    priors = bundle.priors if args.prior == "on" else None

    def run(rec: ClipRecord):
        return decode(graph, load_features(rec.features), beam=args.beam, priors=priors)

    results = parallel_map(run, records, args.jobs)
    doc = {
        "clips": {
            rec.clip_id: res.to_dict(bundle.lexicon)
            for rec, res in zip(records, results)
        }
    }
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for rec, res in zip(records, results):
            write_segment_names(
                out / f"{rec.clip_id}.seg", _segment_rows(res.segmentation, bundle.lexicon)
            )
        write_json(out / "results.json", doc)
    _print_json(doc)


def cmd_classify(args) -> None:
    bundle = load_bundle(args.model)
    manifest = load_manifest(args.manifest)
    records = _select_records(manifest, args.split, args.clip)
    graph = compose(bundle.grammar, bundle.hmms)
    priors = bundle.priors if args.prior == "on" else None

    def run(rec: ClipRecord):
        act, res = classify_activity(
            graph, load_features(rec.features), beam=args.beam, priors=priors
        )
        return act, res.log_prob

    results = parallel_map(run, records, args.jobs)
    doc = {
        "clips": {
            rec.clip_id: {"activity": act, "log_prob": float(lp)}
            for rec, (act, lp) in zip(records, results)
        }
    }
    truth = [rec.activity for rec in records]
    if all(truth):
        acc, confusion = accuracy(truth, [act for act, _ in results])
        doc["accuracy"] = acc
        doc["confusion"] = confusion.to_dict()
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_json(out / "classification.json", doc)
    _print_json(doc)


def cmd_align(args) -> None:
    bundle = load_bundle(args.model)
    manifest = load_manifest(args.manifest)
    records = _select_records(manifest, args.split, args.clip)
    for rec in records:
        if rec.transcript is None:
            raise DataError(f"clip {rec.clip_id!r} has no transcript to align")

    def run(rec: ClipRecord):
        transcript = load_transcript(rec.transcript, bundle.lexicon)
        return force_align(
            bundle.hmms, transcript, load_features(rec.features), beam=args.beam
        )

    segs = parallel_map(run, records, args.jobs)
    doc = {
        "clips": {
            rec.clip_id: {"segments": [[s, e, bundle.lexicon.name_of(u)] for u, s, e in seg.segments]}
            for rec, seg in zip(records, segs)
        }
    }
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for rec, seg in zip(records, segs):
            write_segment_names(out / f"{rec.clip_id}.seg", _segment_rows(seg, bundle.lexicon))
        write_json(out / "alignments.json", doc)
    _print_json(doc)


def cmd_bootstrap(args) -> None:
    manifest = load_manifest(args.manifest)
    bcfg = BootstrapConfig(
        annotated_clip_ids=manifest.split_ids(args.annotated_split),
        transcript_clip_ids=manifest.split_ids(args.transcript_split),
        rounds=args.rounds,
    )
    bundle = bootstrap(manifest, bcfg, args.gmm_k, _train_config(args), jobs=args.jobs)
    save_bundle(args.out, bundle)
    _print_json(
        {
            "annotated_clips": len(bcfg.annotated_clip_ids),
            "out": str(args.out),
            "rounds": args.rounds,
            "transcript_clips": len(bcfg.transcript_clip_ids),
            "units": len(bundle.hmms),
        }
    )


def cmd_eval(args) -> None:
    manifest = load_manifest(args.manifest)
    records = _select_records(manifest, args.split)
    pred_dir = Path(args.pred)
    pairs = []
    names: set[str] = {args.silence}
    for rec in records:
        gt_names = _reference_frame_names(rec)
        pred_rows = read_segment_names(pred_dir / f"{rec.clip_id}.seg")
        pred_names: list[str] = []
        cursor = 0
        for start, end, name in pred_rows:
            if start != cursor or end < start:
                raise DataError(
                    f"prediction for clip {rec.clip_id!r} must tile the clip from frame 0"
                )
            pred_names.extend([name] * (end - start + 1))
            cursor = end + 1
        if len(pred_names) != len(gt_names):
            raise DataError(
                f"clip {rec.clip_id!r}: prediction covers {len(pred_names)} frames, "
                f"reference covers {len(gt_names)}"
            )
        names.update(gt_names)
        names.update(pred_names)
        pairs.append((rec.clip_id, gt_names, pred_names))
    lexicon = UnitLexicon.from_names(sorted(names), silence=args.silence)
    per_clip = {}
    gt_all, pred_all = [], []
    for cid, gt_names, pred_names in pairs:
        gt = np.array([lexicon.id_of(n) for n in gt_names], dtype=np.int64)
        pred = np.array([lexicon.id_of(n) for n in pred_names], dtype=np.int64)
        per_clip[cid] = {"mof": mof(gt, pred)}
        gt_all.append(gt)
        pred_all.append(pred)
    gt = np.concatenate(gt_all)
    pred = np.concatenate(pred_all)
    overall = {
        "jaccard": jaccard(gt, pred, background=lexicon.silence_id),
        "mof": mof(gt, pred),
        "moc": moc(gt, pred),
    }
    rows = [
        report_row(metric, value, split=args.split or "", K=args.gmm_k)
        for metric, value in sorted(overall.items())
    ]
    if args.out:
        out = Path(args.out)
        if out.suffix == ".json":
            write_report_json(out, rows)
        else:
            write_report_csv(out, rows)
    _print_json({"clips": per_clip, "overall": overall})


def cmd_synth(args) -> None:
    spec = SynthSpec(
        n_activities=args.activities,
        units_per_activity=args.units,
        clips_per_activity=args.clips,
        states_per_unit=args.states,
        feature_dim=args.dim,
        noise_sigma=args.noise,
        sentences_per_activity=args.sentences,
        min_sentence_units=min(3, args.units),
        silence=args.silence,
    )
    manifest = generate_dataset(spec, args.out, seed=args.seed)
    _print_json(
        {
            "activities": args.activities,
            "clips": len(manifest.clips),
            "manifest": str(Path(args.out) / "manifest.json"),
            "splits": {name: len(ids) for name, ids in sorted(manifest.splits.items())},
        }
    )


def cmd_encode(args) -> None:
    manifest = load_manifest(args.manifest)
    fit_records = _select_records(manifest, args.split)
    all_records = _select_records(manifest)
    raw = {rec.clip_id: load_features(rec.features) for rec in all_records}
    fit_frames = [raw[rec.clip_id].frames for rec in fit_records]
    pooled = np.concatenate(fit_frames)

    pca1 = None
    if args.pca_dim is not None and args.pca_dim < pooled.shape[1]:
        pca1 = fit_pca(pooled, args.pca_dim)
    projected = [apply_pca(pca1, f) if pca1 is not None else f for f in fit_frames]
    codebook_seed = derive_seed(args.seed, "encode-codebook")
    codebook = fit_fv_codebook(projected, args.gmm_k, seed=codebook_seed)
    fv = FvEncoderConfig(gmm=codebook, window=args.window, signed_sqrt=args.signed_sqrt)
    fv_pool = np.concatenate([window_fv_matrix(f, pca1, fv) for f in fit_frames])
    pca2 = None
    if args.pca_dim is not None and args.pca_dim < fv_pool.shape[1]:
        pca2 = fit_pca(fv_pool, args.pca_dim)
    encoder = FrameEncoder(pca1=pca1, fv=fv, pca2=pca2, codebook_seed=codebook_seed)

    out = Path(args.out)
    clip_dir = out / "clips"
    clip_dir.mkdir(parents=True, exist_ok=True)
    encoded = parallel_map(lambda rec: encoder.encode(raw[rec.clip_id]), all_records, args.jobs)
    new_clips = []
    for rec, seq in zip(all_records, encoded):
        path = clip_dir / f"{rec.clip_id}.feat"
        save_features(path, seq)
        new_clips.append(
            ClipRecord(
                clip_id=rec.clip_id,
                features=str(path),
                activity=rec.activity,
                segmentation=rec.segmentation,
                transcript=rec.transcript,
            )
        )
    save_manifest(out / "manifest.json", DatasetManifest(tuple(new_clips), manifest.splits))
    save_encoder(out / "encoder.json", encoder)
    _print_json(
        {
            "clips": len(new_clips),
            "dim": int(encoded[0].dim),
            "out": str(out),
            "window": args.window,
        }
    )


def cmd_grid(args) -> None:
    manifest = load_manifest(args.manifest)
    train_ids = sorted(manifest.split_ids(args.train_split))
    test_ids = sorted(manifest.split_ids(args.test_split))
    if not train_ids or not test_ids:
        raise DataError("grid needs non-empty train and test splits")
    records = {rec.clip_id: rec for rec in manifest.clips}
    raw = {cid: load_features(records[cid].features) for cid in sorted(records)}
    base_dim = raw[train_ids[0]].dim
    gt_names = {
        cid: _reference_frame_names(records[cid], raw[cid].num_frames) for cid in test_ids
    }

    ks = sorted(set(args.gmm_k))
    dims = sorted(set(args.pca_dim)) if args.pca_dim else [None]
    mirrors = [False, True] if args.mirror else [False]
    settings = [(K, D, mir) for K in ks for D in dims for mir in mirrors]

    out = Path(args.out)
    hypotheses: dict[str, list[list[str]]] = {cid: [] for cid in test_ids}
    rows = []
    summaries = []
    for K, D, mir in settings:
        tag = f"k{K}_" + (f"d{D}" if D is not None else "dfull") + ("_m" if mir else "")
        sdir = out / "settings" / tag
        clip_dir = sdir / "clips"
        clip_dir.mkdir(parents=True, exist_ok=True)

        mirror_map = MirrorMap.sign_flip(base_dim) if mir else None
        train_frames = [raw[cid].frames for cid in train_ids]
        if mir:
            train_frames += [
                mirror_features(raw[cid], mirror_map).frames for cid in train_ids
            ]
        pca = None
        if D is not None and D < base_dim:
            pca = fit_pca(np.concatenate(train_frames), D)

        def transform(seq: FeatureSequence) -> FeatureSequence:
            if pca is None:
                return seq
            return FeatureSequence(apply_pca(pca, seq.frames), seq.frame_rate, seq.clip_id)

        new_clips = []
        split_train = list(train_ids)
        for cid in sorted(records):
            rec = records[cid]
            path = clip_dir / f"{cid}.feat"
            save_features(path, transform(raw[cid]))
            new_clips.append(
                ClipRecord(cid, str(path), rec.activity, rec.segmentation, rec.transcript)
            )
        if mir:
            for cid in train_ids:
                rec = records[cid]
                mcid = f"{cid}~m"
                path = clip_dir / f"{mcid}.feat"
                save_features(path, transform(mirror_features(raw[cid], mirror_map)))
                new_clips.append(
                    ClipRecord(mcid, str(path), rec.activity, rec.segmentation, rec.transcript)
                )
                split_train.append(mcid)
        setting_manifest = DatasetManifest(
            tuple(new_clips),
            {"train": tuple(split_train), "test": tuple(test_ids)},
        )
        save_manifest(sdir / "manifest.json", setting_manifest)

        bundle = train_supervised(
            setting_manifest, "train", K, _train_config(args), jobs=args.jobs
        )
        save_bundle(sdir / "model", bundle)
        graph = compose(bundle.grammar, bundle.hmms)
        priors = bundle.priors if args.prior == "on" else None
        test_records = [setting_manifest.clip(cid) for cid in test_ids]
        results = parallel_map(
            lambda rec: decode(graph, load_features(rec.features), beam=args.beam, priors=priors),
            test_records,
            args.jobs,
        )
        gt_pool, pred_pool = [], []
        for rec, res in zip(test_records, results):
            ids = frame_labels(res.segmentation, res.segmentation.num_frames)
            pred = [bundle.lexicon.name_of(u) for u in ids]
            hypotheses[rec.clip_id].append(pred)
            gt_pool.extend(gt_names[rec.clip_id])
            pred_pool.extend(pred)
        setting_mof = mof(np.array(gt_pool), np.array(pred_pool))
        rows.append(report_row(f"mof/{tag}", setting_mof, split=args.test_split, K=K))
        summaries.append(
            {"K": K, "dim": D, "mirrored": mir, "mof": setting_mof, "setting": tag}
        )

    voted_dir = out / "voted"
    voted_dir.mkdir(parents=True, exist_ok=True)
    gt_pool, voted_pool = [], []
    for cid in test_ids:
        voted = majority_vote(hypotheses[cid])
        write_segment_names(voted_dir / f"{cid}.seg", _runs_to_rows(voted))
        gt_pool.extend(gt_names[cid])
        voted_pool.extend(voted)
    voted_mof = mof(np.array(gt_pool), np.array(voted_pool))
    rows.append(report_row("mof/voted", voted_mof, split=args.test_split))
    write_report_csv(out / "metrics.csv", rows)
    _print_json({"out": str(out), "settings": summaries, "voted_mof": voted_mof})


# ---------------------------------------------------------------------------
# parser


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--gmm-k", type=_positive_int, default=2, metavar="K",
                   help="mixture components per state (default 2)")
    p.add_argument("--seed", type=int, default=0, help="root random seed")
    p.add_argument("--silence", default=DEFAULT_SILENCE,
                   help="background unit name (default %(default)s)")
    p.add_argument("--balance-lower", type=_positive_int, default=50, metavar="N",
                   help="oversample units below this many segments")
    p.add_argument("--balance-upper", type=_positive_int, default=80, metavar="N",
                   help="subsample units above this many segments")
    p.add_argument("--jitter", type=_nonneg_float, default=0.01, metavar="SIGMA",
                   help="relative noise scale for oversampled copies")
    p.add_argument("--viterbi-iters", type=_nonneg_int, default=10, metavar="N")
    p.add_argument("--baum-welch-iters", type=_nonneg_int, default=10, metavar="N")


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = _Parser(
        prog="actionseg",
        description="Grammar-constrained temporal segmentation of activity clips.",
    )
    parser.add_argument("--config", metavar="JSON",
                        help="JSON file of default flag values (keys are flag dests)")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True
    children: dict[str, argparse.ArgumentParser] = {}

    def command(name: str, help_text: str, func) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", metavar="JSON",
                       help="JSON file of default flag values (keys are flag dests)")
        p.set_defaults(func=func)
        children[name] = p
        return p

    p = command("synth", "generate a synthetic dataset with known structure", cmd_synth)
    p.add_argument("--out", required=True, metavar="DIR")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--activities", type=_positive_int, default=3)
    p.add_argument("--units", type=_positive_int, default=5,
                   help="units per activity (default %(default)s)")
    p.add_argument("--clips", type=_positive_int, default=50,
                   help="clips per activity (default %(default)s)")
    p.add_argument("--states", type=_positive_int, default=3,
                   help="generating states per unit (default %(default)s)")
    p.add_argument("--dim", type=_positive_int, default=2,
                   help="feature dimensions (default %(default)s)")
    p.add_argument("--noise", type=_nonneg_float, default=0.1,
                   help="frame noise sigma (default %(default)s)")
    p.add_argument("--sentences", type=_positive_int, default=3,
                   help="sentences per activity (default %(default)s)")
    p.add_argument("--silence", default=DEFAULT_SILENCE)

    p = command("train", "train unit models and a grammar from annotated clips", cmd_train)
    p.add_argument("--manifest", required=True, metavar="JSON")
    p.add_argument("--split", default=None,
                   help="training split name (default: every clip)")
    p.add_argument("--jobs", type=_positive_int, default=1)
    p.add_argument("--out", required=True, metavar="DIR")
    _add_train_flags(p)

    p = command("decode", "segment clips with the grammar-constrained decoder", cmd_decode)
    p.add_argument("--model", required=True, metavar="DIR")
    p.add_argument("--manifest", required=True, metavar="JSON")
    p.add_argument("--split", default=None)
    p.add_argument("--clip", action="append", metavar="ID",
                   help="decode just this clip (repeatable)")
    p.add_argument("--beam", type=_positive_int, default=None,
                   help="keep this many active states per frame (default: exact)")
    p.add_argument("--prior", choices=("on", "off"), default="off",
                   help="apply inverse-frequency unit priors at unit entry")
    p.add_argument("--jobs", type=_positive_int, default=1)
    p.add_argument("--out", metavar="DIR",
                   help="also write per-clip .seg files and results.json here")

    p = command("classify", "pick each clip's activity by best decode score", cmd_classify)
    p.add_argument("--model", required=True, metavar="DIR")
    p.add_argument("--manifest", required=True, metavar="JSON")
    p.add_argument("--split", default=None)
    p.add_argument("--clip", action="append", metavar="ID")
    p.add_argument("--beam", type=_positive_int, default=None)
    p.add_argument("--prior", choices=("on", "off"), default="off")
    p.add_argument("--jobs", type=_positive_int, default=1)
    p.add_argument("--out", metavar="DIR")

    p = command("align", "fit each clip's known transcript to its frames", cmd_align)
    p.add_argument("--model", required=True, metavar="DIR")
    p.add_argument("--manifest", required=True, metavar="JSON")
    p.add_argument("--split", default=None)
    p.add_argument("--clip", action="append", metavar="ID")
    p.add_argument("--beam", type=_positive_int, default=None)
    p.add_argument("--jobs", type=_positive_int, default=1)
    p.add_argument("--out", metavar="DIR")

    p = command("bootstrap", "extend training to transcript-only clips by re-alignment", cmd_bootstrap)
    p.add_argument("--manifest", required=True, metavar="JSON")
    p.add_argument("--annotated-split", required=True, metavar="NAME",
                   help="split with frame-level annotations")
    p.add_argument("--transcript-split", required=True, metavar="NAME",
                   help="split with ordering transcripts only")
    p.add_argument("--rounds", type=_nonneg_int, default=1)
    p.add_argument("--jobs", type=_positive_int, default=1)
    p.add_argument("--out", required=True, metavar="DIR")
    _add_train_flags(p)

    p = command("encode", "fit the PCA/Fisher-Vector chain and re-encode all clips", cmd_encode)
    p.add_argument("--manifest", required=True, metavar="JSON")
    p.add_argument("--split", default=None,
                   help="split the encoder is fit on (default: every clip)")
    p.add_argument("--gmm-k", type=_positive_int, default=2, metavar="K",
                   help="codebook components (default %(default)s)")
    p.add_argument("--pca-dim", type=_positive_int, default=None, metavar="D",
                   help="dimensions kept by both PCA stages (default: keep all)")
    p.add_argument("--window", type=_positive_int, default=DEFAULT_FV_WINDOW,
                   help="Fisher Vector window in frames (default %(default)s)")
    p.add_argument("--signed-sqrt", action="store_true",
                   help="apply |v|**0.5 * sign(v) to window descriptors")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=_positive_int, default=1)
    p.add_argument("--out", required=True, metavar="DIR")

    p = command("eval", "score predicted segmentations against references", cmd_eval)
    p.add_argument("--manifest", required=True, metavar="JSON")
    p.add_argument("--split", default=None)
    p.add_argument("--pred", required=True, metavar="DIR",
                   help="directory of <clip_id>.seg prediction files")
    p.add_argument("--silence", default=DEFAULT_SILENCE,
                   help="background unit excluded from the Jaccard score")
    p.add_argument("--gmm-k", type=_positive_int, default=None, metavar="K",
                   help="K value recorded in report rows")
    p.add_argument("--out", metavar="FILE",
                   help="write report rows here (.json or .csv)")

    p = command("grid", "train a model grid and vote the decodings frame-wise", cmd_grid)
    p.add_argument("--manifest", required=True, metavar="JSON")
    p.add_argument("--train-split", required=True, metavar="NAME")
    p.add_argument("--test-split", required=True, metavar="NAME")
    p.add_argument("--gmm-k", type=_int_list, default=[1, 2], metavar="K,K,...",
                   help="mixture sizes to sweep (default 1,2)")
    p.add_argument("--pca-dim", type=_int_list, default=None, metavar="D,D,...",
                   help="PCA dimensions to sweep (default: raw features only)")
    p.add_argument("--mirror", action="store_true",
                   help="add settings retrained with sign-mirrored training features")
    p.add_argument("--beam", type=_positive_int, default=None)
    p.add_argument("--prior", choices=("on", "off"), default="off")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--silence", default=DEFAULT_SILENCE)
    p.add_argument("--balance-lower", type=_positive_int, default=50)
    p.add_argument("--balance-upper", type=_positive_int, default=80)
    p.add_argument("--jitter", type=_nonneg_float, default=0.01)
    p.add_argument("--viterbi-iters", type=_nonneg_int, default=10)
    p.add_argument("--baum-welch-iters", type=_nonneg_int, default=10)
    p.add_argument("--jobs", type=_positive_int, default=1)
    p.add_argument("--out", required=True, metavar="DIR")

    return parser, children


def _apply_config(argv: list[str], parser, children) -> None:
    scan = _Parser(add_help=False)
    scan.add_argument("--config", default=None)
    found, _ = scan.parse_known_args(argv)
    if found.config is None:
        return
    try:
        with open(found.config, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        parser.error(f"cannot read config file: {exc}")
    except json.JSONDecodeError as exc:
        parser.error(f"malformed config file {found.config}: {exc}")
    if not isinstance(doc, dict):
        parser.error(f"config file {found.config} must hold a JSON object")
    known = set()
    for p in [parser, *children.values()]:
        known.update(a.dest for a in p._actions)
    known -= {"func", "command", "config", "help"}
    unknown = sorted(set(doc) - known)
    if unknown:
        parser.error("unknown config keys: " + ", ".join(unknown))
    for p in [parser, *children.values()]:
        dests = {a.dest for a in p._actions}
        p.set_defaults(**{k: v for k, v in doc.items() if k in dests})


def main(argv=None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser, children = build_parser()
    try:
        _apply_config(argv, parser, children)
        args = parser.parse_args(argv)
        args.func(args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else USAGE_EXIT
    except DataError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return DATA_EXIT
    except DecodeError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return DECODE_EXIT
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return DATA_EXIT
    except json.JSONDecodeError as exc:
        sys.stderr.write(f"error: malformed JSON: {exc}\n")
        return DATA_EXIT
    return 0


if __name__ == "__main__":
    sys.exit(main())
