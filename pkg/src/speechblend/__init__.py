"""Corpus blending, dynamic duration bucketing and ASR/AST scoring utilities."""
from .bucketing import (
    BucketingConfig,
    BucketSpec,
    MiniBatch,
    assemble_batches,
    assign_bucket,
    effective_duration,
    estimate_bins,
    padding_ratio,
)
from .evaluation import (
    ConfidenceInterval,
    WerBreakdown,
    bootstrap_wer_ci,
    corpus_bleu,
    corpus_wer,
    hallucination_rate,
    normalize_eval_text,
    segment_plan,
    stitch_long_form,
    tokenize_bleu,
    word_error_rate,
)
from .manifest import CorpusStats, ManifestError, UtteranceRecord, corpus_stats, parse_manifest, process_pnc_text
from .mux import Multiplexer, MuxConfig, mux_streams, shuffle_buffer
from .prompts import (
    ByteFallbackTokenizer,
    ConcatenatedTokenizer,
    PromptSequence,
    PromptSpec,
    TokenLayout,
    build_prompt,
    global_token_id,
    resolve_token,
)
from .simulate import SimulationConfig, run_simulation, synthetic_corpus
from .weights import WeightMap, hierarchical_weights, marginalize, natural_weights, temperature_weights

__version__ = "0.1.0"
