"""Desk-scale laboratory for context utilization in machine translation.

Generates synthetic parallel corpora with controllable densities of
contextual phenomena, trains a micro encoder-decoder under several
context-oriented training strategies, and evaluates contextual accuracy,
contrastive accuracy, and BLEU.
"""

from .corpus import (
    Annotation,
    ContextualExample,
    CorpusSpec,
    Lexicon,
    LexiconConfig,
    PhenomenonKind,
    build_lexicon,
    generate_corpus,
    generate_example,
    load_corpus,
    save_corpus,
)
from .composition import (
    CompositionSpec,
    EncodedExample,
    Vocabulary,
    build_vocabulary,
    compose,
    density,
    encode,
    expand_context_sizes,
)
from .model import (
    ModelConfig,
    ModelState,
    decode,
    forward_logprobs,
    init,
    load_checkpoint,
    save_checkpoint,
    sequence_logprob,
    split_on_separator,
    token_weight,
    train,
    weighted_nll,
)
from .metrics import (
    ContrastivePair,
    ExampleScore,
    MetricKind,
    MetricReport,
    build_contrastive_pairs,
    contrastive_accuracy,
    corpus_bleu,
    max_pcxmi,
    pcxmi,
    phenomenon_accuracy,
    score_corpus,
)
from .strategies import (
    StrategyConfig,
    StrategyKind,
    apply_strategy,
    coword_dropout,
    divide_and_rule,
    finetune_on_annotated,
    run_metric_selection,
    select_top_k,
)
from .experiments import (
    EvalSizes,
    ExperimentReport,
    MethodsConfig,
    SweepConfig,
    emit_report,
    run_density_sweep,
    run_method_comparison,
)

__version__ = "0.1.0"
