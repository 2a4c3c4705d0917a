"""Evaluation metrics: context-reliance scores, BLEU, and accuracies.

The context-reliance score of an example is the sum (or max) over its
current-sentence target tokens of the log-ratio between the model
probability with full context and the probability of the same token under
the context-free encoding of the same example, both teacher-forced on the
reference.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np

from .composition import SEP_ID, Vocabulary, encode
from .corpus import ContextualExample, Lexicon, PhenomenonKind, target_word
from .errors import DomainError, InputError, ShapeError
from .model import (
    ModelState,
    forward_logprobs_batch,
    greedy_decode_batch,
    decode,
    sequence_logprob,
    split_on_separator,
)

__all__ = [
    "MetricKind",
    "ExampleScore",
    "MetricReport",
    "pcxmi",
    "max_pcxmi",
    "score_corpus",
    "corpus_bleu",
    "phenomenon_accuracy",
    "translate_corpus",
    "accuracy_from_translations",
    "ContrastivePair",
    "build_contrastive_pairs",
    "contrastive_accuracy",
]


class MetricKind(Enum):
    PCXMI = "pcxmi"
    MAX_PCXMI = "max_pcxmi"


@dataclass
class ExampleScore:
    example_id: int
    pcxmi: float
    max_pcxmi: float
    token_ratios: np.ndarray
    value: float  # the metric chosen when the corpus was scored


def _current_row_logprobs(
    state: ModelState, example: ContextualExample, vocabulary: Vocabulary, context_size: int
) -> np.ndarray:
    variant = replace(
        example,
        src_ctx=example.src_ctx[len(example.src_ctx) - context_size:],
        tgt_ctx=example.tgt_ctx[len(example.tgt_ctx) - context_size:],
    )
    enc = encode(variant, vocabulary)
    (rows,) = forward_logprobs_batch(state, [enc.src_ids], [enc.tgt_ids])
    idx = np.arange(enc.current_start - 1, enc.current_start - 1 + len(example.tgt))
    return rows[idx, enc.tgt_ids[enc.current_start : enc.current_start + len(example.tgt)]]


def _token_ratios(
    state: ModelState, example: ContextualExample, vocabulary: Vocabulary
) -> np.ndarray:
    if len(example.tgt) == 0:
        raise DomainError(f"example {example.id} has an empty current sentence")
    if not example.src_ctx:
        # Context-free and contextual conditionals coincide; the ratio is
        # identically zero rather than a difference of two float paths.
        return np.zeros(len(example.tgt))
    contextual = _current_row_logprobs(state, example, vocabulary, len(example.src_ctx))
    context_free = _current_row_logprobs(state, example, vocabulary, 0)
    return contextual - context_free


def pcxmi(state: ModelState, example: ContextualExample, vocabulary: Vocabulary) -> float:
    """Summed token log-ratios of contextual vs context-free probability."""
    return float(_token_ratios(state, example, vocabulary).sum())


def max_pcxmi(state: ModelState, example: ContextualExample, vocabulary: Vocabulary) -> float:
    """Largest single-token log-ratio within the example."""
    return float(_token_ratios(state, example, vocabulary).max())


def score_corpus(
    state: ModelState,
    corpus: list[ContextualExample],
    vocabulary: Vocabulary,
    metric_kind: MetricKind = MetricKind.MAX_PCXMI,
    chunk_size: int = 128,
) -> list[ExampleScore]:
    """One score per example, in corpus order; deterministic per state."""
    scores: list[ExampleScore] = []
    for start in range(0, len(corpus), chunk_size):
        chunk = corpus[start : start + chunk_size]
        with_ctx = [e for e in chunk if e.src_ctx]
        ratio_map: dict[int, np.ndarray] = {}
        if with_ctx:
            enc_full = [encode(e, vocabulary) for e in with_ctx]
            enc_bare = [
                encode(replace(e, src_ctx=[], tgt_ctx=[]), vocabulary) for e in with_ctx
            ]
            rows_full = forward_logprobs_batch(
                state, [c.src_ids for c in enc_full], [c.tgt_ids for c in enc_full]
            )
            rows_bare = forward_logprobs_batch(
                state, [c.src_ids for c in enc_bare], [c.tgt_ids for c in enc_bare]
            )
            for e, ef, eb, rf, rb in zip(with_ctx, enc_full, enc_bare, rows_full, rows_bare):
                n = len(e.tgt)
                idx_f = np.arange(ef.current_start - 1, ef.current_start - 1 + n)
                idx_b = np.arange(eb.current_start - 1, eb.current_start - 1 + n)
                gold = ef.tgt_ids[ef.current_start : ef.current_start + n]
                ratio_map[id(e)] = rf[idx_f, gold] - rb[idx_b, gold]
        for e in chunk:
            if len(e.tgt) == 0:
                raise DomainError(f"example {e.id} has an empty current sentence")
            ratios = ratio_map.get(id(e), np.zeros(len(e.tgt)))
            total = float(ratios.sum())
            peak = float(ratios.max())
            scores.append(
                ExampleScore(
                    example_id=e.id,
                    pcxmi=total,
                    max_pcxmi=peak,
                    token_ratios=ratios,
                    value=total if metric_kind is MetricKind.PCXMI else peak,
                )
            )
    return scores


# --- BLEU -----------------------------------------------------------------


def _ngram_counts(tokens: list, n: int) -> dict:
    counts: dict[tuple, int] = {}
    for i in range(len(tokens) - n + 1):
        gram = tuple(tokens[i : i + n])
        counts[gram] = counts.get(gram, 0) + 1
    return counts


def corpus_bleu(hypotheses: list[list], references: list[list]) -> float:
    """Corpus BLEU in [0, 100]: pooled modified n-gram precisions (n=1..4),
    geometric mean, brevity penalty, exponential smoothing of zero counts
    (the k-th consecutive zero numerator is replaced by 1 / 2^k).
    """
    if len(hypotheses) != len(references):
        raise ShapeError(
            f"{len(hypotheses)} hypotheses vs {len(references)} references"
        )
    if not hypotheses:
        raise InputError("corpus BLEU needs at least one pair")

    correct = [0] * 4
    total = [0] * 4
    hyp_len = 0
    ref_len = 0
    for hyp, ref in zip(hypotheses, references):
        hyp = list(hyp)
        ref = list(ref)
        hyp_len += len(hyp)
        ref_len += len(ref)
        for n in range(1, 5):
            ref_counts = _ngram_counts(ref, n)
            for gram, count in _ngram_counts(hyp, n).items():
                correct[n - 1] += min(count, ref_counts.get(gram, 0))
            total[n - 1] += max(len(hyp) - n + 1, 0)

    if hyp_len == 0:
        return 0.0
    smooth = 1.0
    log_precisions = []
    for n in range(4):
        if total[n] == 0:
            return 0.0
        if correct[n] == 0:
            smooth *= 2.0
            precision = 1.0 / (smooth * total[n])
        else:
            precision = correct[n] / total[n]
        log_precisions.append(np.log(precision))
    brevity = 1.0 if hyp_len >= ref_len else float(np.exp(1.0 - ref_len / hyp_len))
    return float(100.0 * brevity * np.exp(np.mean(log_precisions)))


# --- generative accuracy ---------------------------------------------------


def translate_corpus(
    state: ModelState,
    corpus: list[ContextualExample],
    vocabulary: Vocabulary,
    beam_width: int = 1,
) -> list[list[str]]:
    """Decode every example at its full available context and return the
    current-sentence tokens (after the last separator)."""
    encodings = [encode(e, vocabulary) for e in corpus]
    if beam_width == 1:
        decoded = greedy_decode_batch(state, [c.src_ids for c in encodings])
    else:
        decoded = [decode(state, c.src_ids, beam_width) for c in encodings]
    return [vocabulary.decode(split_on_separator(ids, SEP_ID)) for ids in decoded]


def accuracy_from_translations(
    corpus: list[ContextualExample], translations: list[list[str]]
) -> dict[PhenomenonKind, tuple[int, int]]:
    """(correct, total) per phenomenon; a hit is a whole-token match of the
    expected word in the current-sentence translation."""
    results: dict[PhenomenonKind, list[int]] = {}
    for example, tokens in zip(corpus, translations):
        if example.annotation is None:
            raise InputError(f"example {example.id} is not annotated")
        kind = example.annotation.kind
        bucket = results.setdefault(kind, [0, 0])
        bucket[1] += 1
        if example.annotation.expected_word in tokens:
            bucket[0] += 1
    return {k: (c, t) for k, (c, t) in results.items()}


def phenomenon_accuracy(
    state: ModelState,
    eval_corpus: list[ContextualExample],
    vocabulary: Vocabulary,
    beam_width: int = 1,
) -> dict[PhenomenonKind, float]:
    """Per-kind fraction of decoded translations containing the expected word."""
    translations = translate_corpus(state, eval_corpus, vocabulary, beam_width)
    counts = accuracy_from_translations(eval_corpus, translations)
    return {kind: correct / total for kind, (correct, total) in counts.items()}


# --- contrastive accuracy ---------------------------------------------------


@dataclass(frozen=True)
class ContrastivePair:
    """Shared source and context; targets differ only at annotated tokens."""

    example_id: int
    kind: PhenomenonKind
    src: tuple[str, ...]
    src_ctx: tuple[tuple[str, ...], ...]
    tgt_ctx: tuple[tuple[str, ...], ...]
    correct_tgt: tuple[str, ...]
    wrong_tgt: tuple[str, ...]


def _substitute(tgt: list[str], indices: tuple[int, ...], word: str) -> tuple[str, ...]:
    out = list(tgt)
    for i in indices:
        out[i] = word
    return tuple(out)


def build_contrastive_pairs(
    corpus: list[ContextualExample], lexicon: Lexicon
) -> list[ContrastivePair]:
    """Pairs with the annotated word swapped for a competing form.

    Gender yields one pair per competing pronoun; formality swaps the other
    second-person form; auxiliary swaps the next ellipsis verb in lexicon
    order.
    """
    pairs: list[ContrastivePair] = []
    pronoun_forms = [form for _, form in lexicon.pronouns]
    for example in corpus:
        ann = example.annotation
        if ann is None:
            continue
        if ann.kind is PhenomenonKind.GENDER:
            wrong_words = [f for f in pronoun_forms if f != ann.expected_word]
        elif ann.kind is PhenomenonKind.FORMALITY:
            other = (
                lexicon.informal_second_person
                if ann.expected_word == lexicon.formal_second_person
                else lexicon.formal_second_person
            )
            wrong_words = [other]
        elif ann.kind is PhenomenonKind.AUXILIARY:
            verbs = [target_word(v) for v in lexicon.ellipsis_verbs]
            if len(verbs) < 2:
                continue
            position = verbs.index(ann.expected_word)
            wrong_words = [verbs[(position + 1) % len(verbs)]]
        else:
            continue
        for wrong in wrong_words:
            pairs.append(
                ContrastivePair(
                    example_id=example.id,
                    kind=ann.kind,
                    src=tuple(example.src),
                    src_ctx=tuple(tuple(s) for s in example.src_ctx),
                    tgt_ctx=tuple(tuple(t) for t in example.tgt_ctx),
                    correct_tgt=_substitute(example.tgt, ann.target_indices, ann.expected_word),
                    wrong_tgt=_substitute(example.tgt, ann.target_indices, wrong),
                )
            )
    return pairs


def contrastive_accuracy(
    state: ModelState,
    pairs: list[ContrastivePair],
    vocabulary: Vocabulary,
    chunk_size: int = 256,
) -> float:
    """Fraction of pairs where the correct target outscores the wrong one.

    Ties count as incorrect.
    """
    if not pairs:
        raise InputError("no contrastive pairs given")
    correct = 0
    for start in range(0, len(pairs), chunk_size):
        chunk = pairs[start : start + chunk_size]
        batch_src = []
        batch_tgt = []
        for pair in chunk:
            if len(pair.correct_tgt) != len(pair.wrong_tgt) or pair.correct_tgt == pair.wrong_tgt:
                raise InputError(f"malformed pair for example {pair.example_id}")
            base = ContextualExample(
                id=pair.example_id,
                src=list(pair.src),
                tgt=list(pair.correct_tgt),
                src_ctx=[list(s) for s in pair.src_ctx],
                tgt_ctx=[list(t) for t in pair.tgt_ctx],
            )
            enc_good = encode(base, vocabulary)
            enc_bad = encode(replace(base, tgt=list(pair.wrong_tgt)), vocabulary)
            batch_src += [enc_good.src_ids, enc_bad.src_ids]
            batch_tgt += [enc_good.tgt_ids, enc_bad.tgt_ids]
        rows = forward_logprobs_batch(state, batch_src, batch_tgt)
        for i in range(0, len(rows), 2):
            good = rows[i][np.arange(len(batch_tgt[i]) - 1), batch_tgt[i][1:]].sum()
            bad = rows[i + 1][np.arange(len(batch_tgt[i + 1]) - 1), batch_tgt[i + 1][1:]].sum()
            if good > bad:
                correct += 1
    return correct / len(pairs)


# --- reports ----------------------------------------------------------------


@dataclass
class MetricReport:
    """Per-phenomenon accuracies with counts, BLEU, and contrastive accuracy."""

    accuracies: dict[PhenomenonKind, tuple[int, int]]
    bleu: float
    contrastive: float
    metadata: dict = field(default_factory=dict)

    def accuracy(self, kind: PhenomenonKind) -> float:
        correct, total = self.accuracies[kind]
        return correct / total

    def to_json(self) -> dict:
        return {
            "accuracies": {
                kind.value: {"correct": c, "total": t, "accuracy": c / t}
                for kind, (c, t) in sorted(self.accuracies.items(), key=lambda kv: kv[0].value)
            },
            "bleu": self.bleu,
            "contrastive": self.contrastive,
            "metadata": self.metadata,
        }

    def to_csv_rows(self) -> list[dict]:
        rows = []
        for kind, (c, t) in sorted(self.accuracies.items(), key=lambda kv: kv[0].value):
            rows.append(
                {
                    "strategy": self.metadata.get("strategy", ""),
                    "seed": self.metadata.get("seed", ""),
                    "density": self.metadata.get("density", ""),
                    "kind": kind.value,
                    "accuracy": c / t,
                    "n": t,
                    "bleu": self.bleu,
                    "contrastive": self.contrastive,
                }
            )
        return rows

    def save_json(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(self.to_json(), fh, indent=2, sort_keys=True)
            fh.write("\n")
