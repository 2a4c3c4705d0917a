"""Dataset composition, context expansion, and integer encoding.

Training corpora are mixed from named pools (dense = annotated, sparse =
plain) at controlled proportions.  Each example is then expanded into one
variant per context size from zero up to its available context, and every
variant is encoded as id sequences with separator tokens and per-token
loss weights.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
import random

import numpy as np

from .corpus import ContextualExample, Lexicon, PhenomenonKind
from .errors import CapacityError, ConfigurationError, DomainError, EncodingError
from .model import token_weight

__all__ = [
    "PAD_ID",
    "BOS_ID",
    "EOS_ID",
    "SEP_ID",
    "MASK_ID",
    "RESERVED_TOKENS",
    "MASK_TOKEN",
    "SEP_TOKEN",
    "Vocabulary",
    "build_vocabulary",
    "CompositionSpec",
    "compose",
    "density",
    "expand_context_sizes",
    "encode",
    "encode_corpus",
]

RESERVED_TOKENS = ("[PAD]", "[BOS]", "[EOS]", "[SEP]", "[MASK]")
PAD_ID, BOS_ID, EOS_ID, SEP_ID, MASK_ID = range(5)
SEP_TOKEN = RESERVED_TOKENS[SEP_ID]
MASK_TOKEN = RESERVED_TOKENS[MASK_ID]


@dataclass(frozen=True)
class Vocabulary:
    """Immutable token <-> id bijection with fixed reserved ids."""

    id_to_token: tuple[str, ...]
    token_to_id: dict[str, int] = field(compare=False, hash=False, default_factory=dict)

    def __post_init__(self):
        if not self.token_to_id:
            object.__setattr__(
                self, "token_to_id", {t: i for i, t in enumerate(self.id_to_token)}
            )

    def __len__(self) -> int:
        return len(self.id_to_token)

    def id_of(self, token: str) -> int:
        try:
            return self.token_to_id[token]
        except KeyError:
            raise EncodingError(f"token {token!r} not in vocabulary") from None

    def token_of(self, token_id: int) -> str:
        return self.id_to_token[token_id]

    def decode(self, ids) -> list[str]:
        return [self.id_to_token[i] for i in ids]


def build_vocabulary(lexicon: Lexicon) -> Vocabulary:
    """Reserved tokens followed by all surface forms in sorted order."""
    forms = sorted(set(lexicon.all_surface_forms()))
    return Vocabulary(id_to_token=RESERVED_TOKENS + tuple(forms))


@dataclass
class EncodedExample:
    """Integer encoding of one context-size variant.

    ``src_ids``: ctx_1 [SEP] ... [SEP] current.
    ``tgt_ids``: [BOS] ctx_1 [SEP] ... [SEP] current [EOS].
    ``weights``: one loss weight per predicted position (len(tgt_ids) - 1).
    ``current_start``: index in tgt_ids of the first current-sentence token.
    """

    src_ids: np.ndarray
    tgt_ids: np.ndarray
    weights: np.ndarray
    current_start: int
    origin_id: int
    context_size: int


def encode(
    example: ContextualExample,
    vocabulary: Vocabulary,
    enable_weights: bool = False,
    lam: float = 0.0,
) -> EncodedExample:
    """Encode one example; weights above 1 only at annotated current tokens."""
    src_tokens: list[str] = []
    tgt_tokens: list[str] = []
    for ctx_s, ctx_t in zip(example.src_ctx, example.tgt_ctx):
        src_tokens += ctx_s + [SEP_TOKEN]
        tgt_tokens += ctx_t + [SEP_TOKEN]
    current_start = 1 + len(tgt_tokens)  # skip [BOS]
    src_tokens += example.src
    tgt_tokens = ["[BOS]"] + tgt_tokens + example.tgt + ["[EOS]"]

    src_ids = np.array([vocabulary.id_of(t) for t in src_tokens], dtype=np.int64)
    tgt_ids = np.array([vocabulary.id_of(t) for t in tgt_tokens], dtype=np.int64)

    weights = np.ones(len(tgt_ids) - 1, dtype=np.float64)
    if enable_weights and example.annotation is not None:
        w = token_weight(True, lam)
        for i in example.annotation.target_indices:
            weights[current_start + i - 1] = w

    return EncodedExample(
        src_ids=src_ids,
        tgt_ids=tgt_ids,
        weights=weights,
        current_start=current_start,
        origin_id=example.id,
        context_size=len(example.src_ctx),
    )


def expand_context_sizes(
    corpus: list[ContextualExample], max_ctx: int
) -> list[ContextualExample]:
    """One variant per context size c in 0..min(available, max_ctx).

    Each variant keeps the ``c`` most recent context sentences and the
    origin example's id.
    """
    if max_ctx < 0:
        raise ConfigurationError("max_ctx must be >= 0")
    variants = []
    for example in corpus:
        available = min(len(example.src_ctx), max_ctx)
        for c in range(available + 1):
            src_ctx = example.src_ctx[len(example.src_ctx) - c:]
            tgt_ctx = example.tgt_ctx[len(example.tgt_ctx) - c:]
            variants.append(
                replace(example, src_ctx=list(src_ctx), tgt_ctx=list(tgt_ctx))
            )
    return variants


def encode_corpus(
    corpus: list[ContextualExample],
    vocabulary: Vocabulary,
    enable_weights: bool = False,
    lam: float = 0.0,
) -> list[EncodedExample]:
    return [encode(e, vocabulary, enable_weights, lam) for e in corpus]


@dataclass(frozen=True)
class CompositionSpec:
    """Ordered (pool, count) parts plus a sampling seed."""

    seed: int
    parts: tuple[tuple[str, int], ...]

    def validate(self) -> None:
        for pool, count in self.parts:
            if count < 0:
                raise ConfigurationError(f"negative count for pool {pool!r}")

    @staticmethod
    def from_json(data: dict) -> "CompositionSpec":
        return CompositionSpec(
            seed=data["seed"],
            parts=tuple((p["pool"], p["count"]) for p in data["parts"]),
        )

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "parts": [{"pool": pool, "count": count} for pool, count in self.parts],
        }


def compose(
    pools: dict[str, list[ContextualExample]], spec: CompositionSpec
) -> list[ContextualExample]:
    """Sample without replacement from each part, shuffle, re-id densely.

    Parts are consumed in spec order, so the result does not depend on the
    iteration order of ``pools``.  The output ids are fresh and dense from
    0 in shuffled order.
    """
    spec.validate()
    rng = random.Random(spec.seed)
    chosen: list[ContextualExample] = []
    for pool_name, count in spec.parts:
        if pool_name not in pools:
            raise CapacityError(f"unknown pool {pool_name!r}")
        pool = pools[pool_name]
        if count > len(pool):
            raise CapacityError(
                f"pool {pool_name!r} holds {len(pool)} examples, requested {count}"
            )
        indices = rng.sample(range(len(pool)), count)
        chosen.extend(pool[i] for i in indices)
    rng.shuffle(chosen)
    return [replace(e, id=i) for i, e in enumerate(chosen)]


def density(corpus: list[ContextualExample], kind: PhenomenonKind) -> float:
    """Fraction of examples annotated with ``kind`` (unannotated for NONE)."""
    if not corpus:
        raise DomainError("density of an empty corpus is undefined")
    if kind is PhenomenonKind.NONE:
        matching = sum(1 for e in corpus if e.annotation is None)
    else:
        matching = sum(
            1 for e in corpus if e.annotation is not None and e.annotation.kind is kind
        )
    return matching / len(corpus)


def save_composition_spec(spec: CompositionSpec, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(spec.to_json(), fh, indent=2)
        fh.write("\n")


def load_composition_spec(path: str | Path) -> CompositionSpec:
    with open(path, encoding="utf-8") as fh:
        return CompositionSpec.from_json(json.load(fh))
