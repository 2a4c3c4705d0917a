"""Pool mixing, density accounting, context expansion, and integer encoding."""

import numpy as np
import pytest

from ctxmt.composition import (
    BOS_ID,
    EOS_ID,
    SEP_ID,
    CompositionSpec,
    build_vocabulary,
    compose,
    density,
    encode,
    expand_context_sizes,
)
from ctxmt.corpus import CorpusSpec, PhenomenonKind, generate_corpus
from ctxmt.errors import CapacityError, DomainError, EncodingError


class TestVocabulary:
    def test_size_is_reserved_plus_distinct_forms(self, lexicon, vocabulary):
        assert len(vocabulary) == 5 + len(set(lexicon.all_surface_forms()))

    def test_reserved_ids(self, vocabulary):
        assert vocabulary.id_of("[PAD]") == 0
        assert vocabulary.id_of("[BOS]") == 1
        assert vocabulary.id_of("[EOS]") == 2
        assert vocabulary.id_of("[SEP]") == 3
        assert vocabulary.id_of("[MASK]") == 4

    def test_round_trip_bijection(self, vocabulary):
        for token_id, token in enumerate(vocabulary.id_to_token):
            assert vocabulary.id_of(token) == token_id
            assert vocabulary.token_of(token_id) == token

    def test_deterministic(self, lexicon):
        assert build_vocabulary(lexicon).id_to_token == build_vocabulary(lexicon).id_to_token


@pytest.fixture(scope="module")
def pools(lexicon):
    return {
        "sparse": generate_corpus(CorpusSpec(counts={PhenomenonKind.NONE: 300}, seed=21), lexicon),
        "dense": generate_corpus(CorpusSpec(counts={PhenomenonKind.GENDER: 60}, seed=22), lexicon),
    }


class TestCompose:
    def test_large_scale_totals(self, lexicon):
        """The headline mixing arithmetic at full pool scale."""
        big_pools = {
            "sparse": generate_corpus(
                CorpusSpec(counts={PhenomenonKind.NONE: 120_000}, seed=31), lexicon
            ),
            "dense": generate_corpus(
                CorpusSpec(counts={PhenomenonKind.GENDER: 3_000}, seed=32), lexicon
            ),
        }
        spec = CompositionSpec(seed=1, parts=(("sparse", 120_000), ("dense", 3_000)))
        mixed = compose(big_pools, spec)
        assert len(mixed) == 123_000

    def test_density_arithmetic(self, pools):
        spec = CompositionSpec(seed=2, parts=(("sparse", 285), ("dense", 15)))
        mixed = compose(pools, spec)
        assert len(mixed) == 300
        assert density(mixed, PhenomenonKind.GENDER) == pytest.approx(0.05)

    def test_capacity_error_names_pool(self, pools):
        spec = CompositionSpec(seed=3, parts=(("dense", 300),))
        with pytest.raises(CapacityError, match="dense"):
            compose(pools, spec)

    def test_pool_iteration_order_irrelevant(self, pools):
        spec = CompositionSpec(seed=4, parts=(("sparse", 50), ("dense", 10)))
        reordered = dict(reversed(pools.items()))
        assert compose(pools, spec) == compose(reordered, spec)

    def test_deterministic_per_seed(self, pools):
        spec = CompositionSpec(seed=5, parts=(("sparse", 40), ("dense", 20)))
        assert compose(pools, spec) == compose(pools, spec)
        other = CompositionSpec(seed=6, parts=(("sparse", 40), ("dense", 20)))
        assert compose(pools, spec) != compose(pools, other)

    def test_output_ids_dense(self, pools):
        spec = CompositionSpec(seed=7, parts=(("sparse", 25), ("dense", 5)))
        assert sorted(e.id for e in compose(pools, spec)) == list(range(30))


class TestDensity:
    def test_fraction(self, pools):
        corpus = pools["sparse"][:100] + pools["dense"][:10]
        assert density(corpus, PhenomenonKind.GENDER) == pytest.approx(10 / 110)

    def test_no_annotations(self, pools):
        assert density(pools["sparse"], PhenomenonKind.GENDER) == 0.0

    def test_fully_annotated(self, pools):
        assert density(pools["dense"], PhenomenonKind.GENDER) == 1.0

    def test_none_counts_unannotated(self, pools):
        corpus = pools["sparse"][:30] + pools["dense"][:10]
        assert density(corpus, PhenomenonKind.NONE) == pytest.approx(0.75)

    def test_empty_corpus_rejected(self):
        with pytest.raises(DomainError):
            density([], PhenomenonKind.GENDER)


class TestExpandContextSizes:
    def test_full_context_quadruples(self, lexicon):
        spec = CorpusSpec(counts={PhenomenonKind.GENDER: 1}, antecedent_distance=3, seed=41)
        (example,) = generate_corpus(spec, lexicon)
        variants = expand_context_sizes([example], 3)
        assert [len(v.src_ctx) for v in variants] == [0, 1, 2, 3]

    def test_short_context_clamps(self, lexicon):
        spec = CorpusSpec(counts={PhenomenonKind.GENDER: 1}, antecedent_distance=1, seed=42)
        (example,) = generate_corpus(spec, lexicon)
        assert len(expand_context_sizes([example], 3)) == 2

    def test_zero_max_keeps_context_free_only(self, mixed_corpus):
        variants = expand_context_sizes(mixed_corpus, 0)
        assert len(variants) == len(mixed_corpus)
        assert all(v.src_ctx == [] for v in variants)

    def test_variant_count_closed_form(self, mixed_corpus):
        variants = expand_context_sizes(mixed_corpus, 3)
        expected = sum(min(len(e.src_ctx), 3) + 1 for e in mixed_corpus)
        assert len(variants) == expected

    def test_keeps_most_recent_context(self, lexicon):
        spec = CorpusSpec(counts={PhenomenonKind.GENDER: 1}, antecedent_distance=3, seed=43)
        (example,) = generate_corpus(spec, lexicon)
        variants = expand_context_sizes([example], 3)
        assert variants[1].src_ctx == example.src_ctx[-1:]
        assert variants[2].src_ctx == example.src_ctx[-2:]


class TestEncode:
    def _gender_example(self, lexicon, distance=1):
        spec = CorpusSpec(
            counts={PhenomenonKind.GENDER: 1}, antecedent_distance=distance, seed=51
        )
        return generate_corpus(spec, lexicon)[0]

    def test_weight_six_at_pronoun(self, lexicon, vocabulary):
        example = self._gender_example(lexicon)
        enc = encode(example, vocabulary, enable_weights=True, lam=5.0)
        pronoun_row = enc.current_start - 1
        assert enc.weights[pronoun_row] == 6.0
        others = np.delete(enc.weights, pronoun_row)
        assert np.all(others == 1.0)

    def test_lambda_zero_all_ones(self, lexicon, vocabulary):
        example = self._gender_example(lexicon)
        enc = encode(example, vocabulary, enable_weights=True, lam=0.0)
        assert np.all(enc.weights == 1.0)

    def test_unannotated_all_ones(self, mixed_corpus, vocabulary):
        example = next(e for e in mixed_corpus if e.annotation is None)
        enc = encode(example, vocabulary, enable_weights=True, lam=10.0)
        assert np.all(enc.weights == 1.0)

    def test_weights_length_contract(self, mixed_corpus, vocabulary):
        for example in mixed_corpus[:20]:
            enc = encode(example, vocabulary)
            assert len(enc.weights) == len(enc.tgt_ids) - 1

    def test_separator_count_equals_context_size(self, mixed_corpus, vocabulary):
        for example in expand_context_sizes(mixed_corpus[:10], 3):
            enc = encode(example, vocabulary)
            assert int((enc.src_ids == SEP_ID).sum()) == enc.context_size
            assert int((enc.tgt_ids == SEP_ID).sum()) == enc.context_size

    def test_layout_markers(self, lexicon, vocabulary):
        example = self._gender_example(lexicon, distance=2)
        enc = encode(example, vocabulary)
        assert enc.tgt_ids[0] == BOS_ID
        assert enc.tgt_ids[-1] == EOS_ID
        assert enc.tgt_ids[enc.current_start] == vocabulary.id_of(example.tgt[0])

    def test_context_free_has_no_separator(self, mixed_corpus, vocabulary):
        for variant in expand_context_sizes(mixed_corpus[:10], 0):
            enc = encode(variant, vocabulary)
            assert SEP_ID not in enc.src_ids

    def test_out_of_vocabulary_named(self, mixed_corpus, vocabulary):
        import dataclasses

        example = dataclasses.replace(mixed_corpus[0], src=["zzznotaword"])
        with pytest.raises(EncodingError, match="zzznotaword"):
            encode(example, vocabulary)

    def test_source_decode_reconstructs_sentences(self, mixed_corpus, vocabulary):
        """Splitting decoded source ids on [SEP] recovers context + current."""
        for example in expand_context_sizes(mixed_corpus[:15], 3):
            enc = encode(example, vocabulary)
            tokens = vocabulary.decode(enc.src_ids)
            sentences = []
            current: list[str] = []
            for token in tokens:
                if token == "[SEP]":
                    sentences.append(current)
                    current = []
                else:
                    current.append(token)
            sentences.append(current)
            assert sentences == example.src_ctx + [example.src]
