"""Training strategies composed over the corpus, composition, and model layers.

All strategies share one training loop; they differ in how the dataset is
encoded (loss weighting), transformed per epoch (masking, sentence
splitting), or extended with a fine-tuning stage (annotation-based or
score-based example selection).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .composition import (
    MASK_ID,
    MASK_TOKEN,
    SEP_ID,
    Vocabulary,
    EncodedExample,
    encode,
    encode_corpus,
    expand_context_sizes,
)
from .corpus import Annotation, ContextualExample
from .errors import ConfigurationError, DomainError, InputError
from .metrics import ExampleScore, MetricKind, score_corpus
from .model import ModelConfig, ModelState, init, train

__all__ = [
    "StrategyKind",
    "StrategyConfig",
    "coword_dropout",
    "divide_and_rule",
    "mask_current_source_encoded",
    "divide_and_rule_encoded",
    "select_top_k",
    "MetricSelectionResult",
    "run_metric_selection",
    "finetune_on_annotated",
    "apply_strategy",
]

DEFAULT_MAX_CONTEXT = 3


class StrategyKind(Enum):
    BASELINE = "baseline"
    WEIGHTING = "weighting"
    ANNOTATION_FINETUNE = "annotation_finetune"
    COWORD_DROPOUT = "coword_dropout"
    DIVIDE_AND_RULE = "divide_and_rule"
    METRIC_SELECTION = "metric_selection"


@dataclass(frozen=True)
class StrategyConfig:
    kind: StrategyKind
    lam: float | None = None  # weighting strength
    p: float | None = None  # masking probability
    k: int | None = None  # selection size
    finetune_epochs: int | None = None
    metric_kind: MetricKind = MetricKind.MAX_PCXMI
    max_ctx: int = DEFAULT_MAX_CONTEXT

    def validate(self) -> None:
        if self.kind is StrategyKind.WEIGHTING:
            if self.lam is None or self.lam < 0:
                raise ConfigurationError("weighting requires lam >= 0")
        elif self.kind is StrategyKind.COWORD_DROPOUT:
            if self.p is None or not 0.0 <= self.p <= 1.0:
                raise ConfigurationError("coword dropout requires p in [0, 1]")
        elif self.kind is StrategyKind.ANNOTATION_FINETUNE:
            if self.finetune_epochs is None or self.finetune_epochs < 0:
                raise ConfigurationError("annotation fine-tune requires epochs >= 0")
        elif self.kind is StrategyKind.METRIC_SELECTION:
            if self.k is None or self.k < 1:
                raise ConfigurationError("metric selection requires k >= 1")
            if self.finetune_epochs is None or self.finetune_epochs < 0:
                raise ConfigurationError("metric selection requires epochs >= 0")

    def label(self) -> str:
        if self.kind is StrategyKind.WEIGHTING:
            return f"weighting[lam={self.lam:g}]"
        if self.kind is StrategyKind.COWORD_DROPOUT:
            return f"coword[p={self.p:g}]"
        if self.kind is StrategyKind.ANNOTATION_FINETUNE:
            return f"finetune[e={self.finetune_epochs}]"
        if self.kind is StrategyKind.METRIC_SELECTION:
            return f"{self.metric_kind.value}[e={self.finetune_epochs}]"
        return self.kind.value


# --- per-example transforms -------------------------------------------------


def coword_dropout(example: ContextualExample, p: float, rng) -> ContextualExample:
    """Independently replace current-source tokens by [MASK] with probability p.

    Context sentences and the target side are never touched.
    """
    if not 0.0 <= p <= 1.0:
        raise DomainError("p must be in [0, 1]")
    new_src = [MASK_TOKEN if rng.random() < p else token for token in example.src]
    return replace(example, src=new_src)


def divide_and_rule(example: ContextualExample) -> ContextualExample:
    """Move the first halves of the current sentences into the context.

    The first floor(n/2) source tokens become a new final context sentence
    (likewise for the target with its own midpoint); annotation indices
    that fall into the moved half are dropped.  Sentences of fewer than two
    tokens on either side pass through unchanged.
    """
    n, m = len(example.src), len(example.tgt)
    if n < 2 or m < 2:
        return example
    src_head, src_tail = example.src[: n // 2], example.src[n // 2 :]
    tgt_head, tgt_tail = example.tgt[: m // 2], example.tgt[m // 2 :]
    annotation = example.annotation
    if annotation is not None:
        kept = tuple(i - m // 2 for i in annotation.target_indices if i >= m // 2)
        annotation = replace(annotation, target_indices=kept) if kept else None
    return replace(
        example,
        src=src_tail,
        tgt=tgt_tail,
        src_ctx=example.src_ctx + [src_head],
        tgt_ctx=example.tgt_ctx + [tgt_head],
        annotation=annotation,
    )


def _current_source_start(src_ids: np.ndarray) -> int:
    sep_positions = np.flatnonzero(src_ids == SEP_ID)
    return int(sep_positions[-1]) + 1 if len(sep_positions) else 0


def mask_current_source_encoded(enc: EncodedExample, p: float, rng) -> EncodedExample:
    """Encoded-level counterpart of coword_dropout; draws one uniform per
    current-source token in order, so it matches the surface transform."""
    start = _current_source_start(enc.src_ids)
    src = enc.src_ids.copy()
    for i in range(start, len(src)):
        if rng.random() < p:
            src[i] = MASK_ID
    return replace(enc, src_ids=src)


def divide_and_rule_encoded(enc: EncodedExample) -> EncodedExample:
    """Encoded-level counterpart of divide_and_rule."""
    src_start = _current_source_start(enc.src_ids)
    n = len(enc.src_ids) - src_start
    m = len(enc.tgt_ids) - 1 - enc.current_start  # exclude [EOS]
    if n < 2 or m < 2:
        return enc
    src_split = src_start + n // 2
    tgt_split = enc.current_start + m // 2
    new_src = np.insert(enc.src_ids, src_split, SEP_ID)
    new_tgt = np.insert(enc.tgt_ids, tgt_split, SEP_ID)
    # Rows predict tgt[1:]; tokens moved into the context lose any extra
    # weight, the inserted separator row weighs 1, later rows shift by one.
    new_weights = np.insert(enc.weights, tgt_split - 1, 1.0)
    new_weights[enc.current_start - 1 : tgt_split] = 1.0
    return replace(
        enc,
        src_ids=new_src,
        tgt_ids=new_tgt,
        weights=new_weights,
        current_start=tgt_split + 1,
        context_size=enc.context_size + 1,
    )


# --- selection ---------------------------------------------------------------


def select_top_k(
    scores: list[ExampleScore], k: int, corpus: list[ContextualExample]
) -> list[ContextualExample]:
    """The min(k, |corpus|) examples with the highest metric value.

    Ties break toward the smaller example id; output keeps corpus order
    stability through the (value, id) sort, so the result is deterministic.
    """
    by_id = {score.example_id: score.value for score in scores}
    missing = [e.id for e in corpus if e.id not in by_id]
    if missing:
        raise InputError(f"scores missing for example ids {missing[:5]}")
    ranked = sorted(corpus, key=lambda e: (-by_id[e.id], e.id))
    return ranked[: min(k, len(corpus))]


@dataclass
class MetricSelectionResult:
    state: ModelState
    base_state: ModelState
    selected_ids: tuple[int, ...]
    scores: list[ExampleScore]


def run_metric_selection(
    base_corpus: list[ContextualExample],
    vocabulary: Vocabulary,
    model_config: ModelConfig,
    strategy_config: StrategyConfig,
) -> MetricSelectionResult:
    """Train, score, select top k, fine-tune on the selected subset.

    The whole pipeline runs on annotation-stripped copies, so no step can
    read generator annotations.  Fine-tuning uses only the maximum-context
    variant of each selected example.
    """
    strategy_config.validate()
    if strategy_config.kind is not StrategyKind.METRIC_SELECTION:
        raise ConfigurationError("expected a metric_selection strategy config")
    stripped = [replace(e, annotation=None) for e in base_corpus]

    dataset = encode_corpus(
        expand_context_sizes(stripped, strategy_config.max_ctx), vocabulary
    )
    base_state = train(init(model_config), dataset, model_config)

    scores = score_corpus(base_state, stripped, vocabulary, strategy_config.metric_kind)
    selected = select_top_k(scores, strategy_config.k, stripped)

    epochs = strategy_config.finetune_epochs
    if epochs:
        finetune_set = [
            encode(_max_context_variant(e, strategy_config.max_ctx), vocabulary)
            for e in selected
        ]
        finetune_config = replace(model_config, epochs=epochs)
        state = train(base_state, finetune_set, finetune_config)
    else:
        state = base_state.copy()
    return MetricSelectionResult(
        state=state,
        base_state=base_state,
        selected_ids=tuple(e.id for e in selected),
        scores=scores,
    )


def _max_context_variant(example: ContextualExample, max_ctx: int) -> ContextualExample:
    keep = min(len(example.src_ctx), max_ctx)
    return replace(
        example,
        src_ctx=example.src_ctx[len(example.src_ctx) - keep :],
        tgt_ctx=example.tgt_ctx[len(example.tgt_ctx) - keep :],
    )


def finetune_on_annotated(
    base_state: ModelState,
    corpus: list[ContextualExample],
    vocabulary: Vocabulary,
    epochs: int,
    max_ctx: int = DEFAULT_MAX_CONTEXT,
) -> ModelState:
    """Fine-tune on the annotated examples only, maximum context size only.

    Keeps the base hyper-parameters; epoch seeds continue from the base
    state's counter, so e=2 equals e=1 plus one more epoch of updates.
    """
    annotated = [e for e in corpus if e.annotation is not None]
    if not annotated:
        raise InputError("corpus holds no annotated examples")
    if epochs == 0:
        return base_state.copy()
    dataset = [encode(_max_context_variant(e, max_ctx), vocabulary) for e in annotated]
    config = replace(base_state.config, epochs=epochs)
    return train(base_state, dataset, config)


# --- dispatch ----------------------------------------------------------------


def apply_strategy(
    base_corpus: list[ContextualExample],
    vocabulary: Vocabulary,
    model_config: ModelConfig,
    strategy_config: StrategyConfig,
) -> ModelState:
    """Uniform entry point: train a model on the corpus under one strategy."""
    strategy_config.validate()
    kind = strategy_config.kind
    max_ctx = strategy_config.max_ctx
    variants = expand_context_sizes(base_corpus, max_ctx)

    if kind is StrategyKind.BASELINE:
        dataset = encode_corpus(variants, vocabulary, enable_weights=True, lam=0.0)
        return train(init(model_config), dataset, model_config)

    if kind is StrategyKind.WEIGHTING:
        dataset = encode_corpus(
            variants, vocabulary, enable_weights=True, lam=strategy_config.lam
        )
        return train(init(model_config), dataset, model_config)

    if kind is StrategyKind.COWORD_DROPOUT:
        dataset = encode_corpus(variants, vocabulary, enable_weights=True, lam=0.0)
        p = strategy_config.p

        def transform(enc: EncodedExample, rng) -> EncodedExample:
            return mask_current_source_encoded(enc, p, rng)

        return train(init(model_config), dataset, model_config, per_example_transform=transform)

    if kind is StrategyKind.DIVIDE_AND_RULE:
        dataset = encode_corpus(variants, vocabulary, enable_weights=True, lam=0.0)

        def transform(enc: EncodedExample, rng) -> EncodedExample:
            return divide_and_rule_encoded(enc)

        return train(init(model_config), dataset, model_config, per_example_transform=transform)

    if kind is StrategyKind.ANNOTATION_FINETUNE:
        dataset = encode_corpus(variants, vocabulary, enable_weights=True, lam=0.0)
        base_state = train(init(model_config), dataset, model_config)
        return finetune_on_annotated(
            base_state, base_corpus, vocabulary, strategy_config.finetune_epochs, max_ctx
        )

    if kind is StrategyKind.METRIC_SELECTION:
        return run_metric_selection(
            base_corpus, vocabulary, model_config, strategy_config
        ).state

    raise ConfigurationError(f"unhandled strategy kind {kind}")
