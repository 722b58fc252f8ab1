"""Grammar-constrained temporal segmentation of activity sequences.

Per-frame features are scored by small left-to-right unit HMMs with GMM
observation models; a finite grammar of unit orderings drives a
token-passing decoder that labels every frame and reads off the unit
sequence.  The package also covers feature encoding, semi-supervised
bootstrapping from transcripts, synthetic benchmark data, and the usual
segmentation metrics.
"""

from .errors import BeamPrunedError, DataError, DecodeError, NoPathError
from .data import (
    ClipRecord,
    DatasetManifest,
    FeatureSequence,
    Segmentation,
    Transcript,
    UnitLexicon,
    frame_labels,
    load_features,
    load_manifest,
    save_features,
    save_manifest,
    segmentation_from_labels,
    segmentation_to_transcript,
)
from .gmm import Gmm, em_step, fit_em
from .hmm import (
    StatePath,
    UnitHmm,
    baum_welch,
    classify_unit,
    forward_loglik,
    init_hmm,
    load_hmm_set,
    save_hmm_set,
    score_unit,
    unit_log_priors,
    viterbi_align,
    viterbi_train,
)
from .features import (
    FrameEncoder,
    FvEncoderConfig,
    PcaModel,
    apply_pca,
    encode_clip,
    fisher_vector,
    fit_fv_codebook,
    fit_pca,
    load_encoder,
    save_encoder,
)
from .grammar import (
    DecodingGraph,
    Grammar,
    build_grammar,
    compose,
    export_ebnf,
    graph_sentences,
    parse_ebnf,
    unconstrained_graph,
)
from .decoder import (
    DecodeResult,
    classify_activity,
    decode,
    force_align,
    majority_vote,
)
from .metrics import (
    ConfusionMatrix,
    accuracy,
    conditional_mof,
    jaccard,
    mof,
    moc,
)
from .pipeline import (
    BalanceConfig,
    BootstrapConfig,
    MirrorMap,
    ModelBundle,
    TrainConfig,
    bootstrap,
    load_bundle,
    mirror_features,
    save_bundle,
    split_units,
    train_supervised,
)
from .synth import SynthSpec, generate_dataset

__version__ = "0.1.0"

__all__ = [
    "BalanceConfig",
    "BeamPrunedError",
    "BootstrapConfig",
    "ClipRecord",
    "ConfusionMatrix",
    "DataError",
    "DatasetManifest",
    "DecodeError",
    "DecodeResult",
    "DecodingGraph",
    "FeatureSequence",
    "FrameEncoder",
    "FvEncoderConfig",
    "Gmm",
    "Grammar",
    "MirrorMap",
    "ModelBundle",
    "NoPathError",
    "PcaModel",
    "Segmentation",
    "StatePath",
    "SynthSpec",
    "TrainConfig",
    "Transcript",
    "UnitHmm",
    "UnitLexicon",
    "accuracy",
    "apply_pca",
    "baum_welch",
    "bootstrap",
    "build_grammar",
    "classify_activity",
    "classify_unit",
    "compose",
    "conditional_mof",
    "decode",
    "em_step",
    "encode_clip",
    "export_ebnf",
    "fisher_vector",
    "fit_em",
    "fit_fv_codebook",
    "fit_pca",
    "force_align",
    "forward_loglik",
    "frame_labels",
    "generate_dataset",
    "graph_sentences",
    "init_hmm",
    "jaccard",
    "load_bundle",
    "load_encoder",
    "load_features",
    "load_hmm_set",
    "load_manifest",
    "majority_vote",
    "mirror_features",
    "mof",
    "moc",
    "parse_ebnf",
    "save_bundle",
    "save_encoder",
    "save_features",
    "save_hmm_set",
    "save_manifest",
    "score_unit",
    "segmentation_from_labels",
    "segmentation_to_transcript",
    "split_units",
    "train_supervised",
    "unconstrained_graph",
    "unit_log_priors",
    "viterbi_align",
    "viterbi_train",
]
