"""From a handful of annotated clips to a full model via transcripts.

Starts from frame-level annotation on just a few clips per activity,
then folds in the remaining train clips using only their ordered unit
transcripts: each round aligns the transcripts with the current models,
treats the alignments as annotation, and retrains. Prints how the
grammar and held-out frame accuracy grow.

Run:
    python3 demos/weak_supervision_walkthrough.py --seed 9 --annotated 2
"""

import argparse
import tempfile
from pathlib import Path

import numpy as np

from actionseg.data import frame_labels, load_features, read_segment_names
from actionseg.decoder import decode
from actionseg.grammar import compose
from actionseg.metrics import mof
from actionseg.pipeline import BootstrapConfig, bootstrap, train_supervised
from actionseg.synth import SynthSpec, generate_dataset


def heldout_mof(manifest, bundle):
    graph = compose(bundle.grammar, bundle.hmms)
    gt_pool, pred_pool = [], []
    for cid in manifest.split_ids("test"):
        clip = manifest.clip(cid)
        seq = load_features(clip.features)
        res = decode(graph, seq)
        pred_pool.extend(bundle.lexicon.name_of(u)
                         for u in frame_labels(res.segmentation, seq.num_frames))
        gt_pool.extend(nm for s, e, nm in read_segment_names(clip.segmentation)
                       for _ in range(e - s + 1))
    return mof(np.array(gt_pool), np.array(pred_pool))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=9)
    ap.add_argument("--annotated", type=int, default=2,
                    help="annotated clips kept per activity")
    ap.add_argument("--rounds", type=int, default=2)
    args = ap.parse_args()

    out = Path(tempfile.mkdtemp(prefix="asweak-"))
    spec = SynthSpec(
        n_activities=2,
        units_per_activity=4,
        clips_per_activity=24,
        states_per_unit=2,
        feature_dim=3,
        noise_sigma=0.15,
        sentences_per_activity=4,
    )
    manifest = generate_dataset(spec, out, seed=args.seed)

    by_act = {}
    for cid in manifest.split_ids("train"):
        by_act.setdefault(manifest.clip(cid).activity, []).append(cid)
    annotated = [cid for cids in by_act.values() for cid in cids[: args.annotated]]
    transcript_only = [cid for cid in manifest.split_ids("train")
                       if cid not in set(annotated)]
    print(f"annotated clips: {len(annotated)}, "
          f"transcript-only clips: {len(transcript_only)}")

    base = train_supervised(manifest, annotated, K=2)
    print(f"annotated-only grammar: {base.grammar.num_sentences()} sentences, "
          f"held-out mof {heldout_mof(manifest, base):.4f}")

    for rounds in range(1, args.rounds + 1):
        cfg = BootstrapConfig(tuple(annotated), tuple(transcript_only), rounds=rounds)
        boot = bootstrap(manifest, cfg, K=2)
        print(f"after {rounds} bootstrap round(s): "
              f"{boot.grammar.num_sentences()} sentences, "
              f"held-out mof {heldout_mof(manifest, boot):.4f}")


if __name__ == "__main__":
    main()
