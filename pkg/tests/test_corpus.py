"""Generator contracts: determinism, counts, phenomenon rules, serialization."""

import json
import random
from pathlib import Path

import pytest

from ctxmt.corpus import (
    Annotation,
    CorpusSpec,
    LexiconConfig,
    PhenomenonKind,
    build_lexicon,
    generate_corpus,
    generate_example,
    lexicon_to_dict,
    load_corpus,
    load_lexicon,
    save_corpus,
    target_word,
    validate_example,
    with_id_offset,
)
from ctxmt.errors import ConfigurationError, DomainError

DATA = Path(__file__).parent / "data"


class TestBuildLexicon:
    def test_same_seed_identical(self):
        assert build_lexicon(LexiconConfig(), 7) == build_lexicon(LexiconConfig(), 7)

    def test_different_seed_differs(self):
        assert build_lexicon(LexiconConfig(), 7) != build_lexicon(LexiconConfig(), 8)

    def test_golden_default_seed(self):
        """Pinned output for the shipped default seed."""
        lexicon = build_lexicon(LexiconConfig(), 7)
        golden = json.loads((DATA / "lexicon_default_seed7.json").read_text())
        assert lexicon_to_dict(lexicon) == golden

    def test_thirty_nouns_cover_all_genders(self):
        lexicon = build_lexicon(LexiconConfig(nouns=30), 7)
        assert len(lexicon.nouns) == 30
        genders = {g for _, g in lexicon.nouns}
        assert genders == {"M", "F", "N"}

    def test_zero_nouns_rejected(self):
        with pytest.raises(ConfigurationError):
            build_lexicon(LexiconConfig(nouns=0), 7)

    def test_zero_adjectives_rejected(self):
        with pytest.raises(ConfigurationError):
            build_lexicon(LexiconConfig(adjectives=0), 7)

    def test_surface_forms_unique(self, lexicon):
        forms = lexicon.all_surface_forms()
        assert len(forms) == len(set(forms))

    def test_target_counterpart_rule(self):
        assert target_word("house") == "t_house"
        assert target_word(".") == "."


class TestGenerateExample:
    def test_gender_pronoun_follows_noun_gender(self, lexicon):
        rng = random.Random(5)
        for _ in range(25):
            ex = generate_example(lexicon, PhenomenonKind.GENDER, None, rng)
            cue_noun = ex.src_ctx[0][1]
            expected = lexicon.pronoun_for(lexicon.gender_of(cue_noun))
            assert ex.annotation.expected_word == expected
            assert ex.tgt[0] == expected

    def test_formality_marker_selects_form(self, lexicon):
        rng = random.Random(6)
        seen = set()
        for _ in range(25):
            ex = generate_example(lexicon, PhenomenonKind.FORMALITY, None, rng)
            marker = ex.src_ctx[0][1]
            if marker == lexicon.formal_marker:
                assert ex.annotation.expected_word == "vu"
            else:
                assert marker == lexicon.informal_marker
                assert ex.annotation.expected_word == "tu"
            seen.add(ex.annotation.expected_word)
        assert seen == {"vu", "tu"}

    def test_auxiliary_recovers_cue_verb_at_distance_two(self, lexicon):
        rng = random.Random(7)
        ex = generate_example(lexicon, PhenomenonKind.AUXILIARY, 2, rng)
        cue_verb = ex.src_ctx[0][2]
        assert ex.annotation.expected_word == target_word(cue_verb)
        assert ex.tgt[2] == target_word(cue_verb)
        assert len(ex.src_ctx) == 2  # cue plus one filler

    def test_cue_sits_at_antecedent_distance(self, lexicon):
        rng = random.Random(8)
        for distance in (1, 2, 3):
            ex = generate_example(lexicon, PhenomenonKind.GENDER, distance, rng)
            assert len(ex.src_ctx) == distance
            assert ex.annotation.antecedent_distance == distance
            assert ex.src_ctx[0][3] == "here"  # the cue sentence pattern

    def test_gender_current_sentence_has_no_cue(self, lexicon):
        """Dropping the context leaves no token that reveals the gender."""
        rng = random.Random(9)
        nouns = {w for w, _ in lexicon.nouns}
        for _ in range(25):
            ex = generate_example(lexicon, PhenomenonKind.GENDER, None, rng)
            assert ex.src == ["it", "is", ex.src[2], "."]
            assert not nouns & set(ex.src)

    def test_distance_beyond_max_context_rejected(self, lexicon):
        with pytest.raises(DomainError):
            generate_example(lexicon, PhenomenonKind.GENDER, 4, random.Random(0), max_context_size=3)

    def test_plain_context_within_bounds(self, lexicon):
        rng = random.Random(10)
        lengths = {
            len(generate_example(lexicon, PhenomenonKind.NONE, None, rng).src_ctx)
            for _ in range(60)
        }
        assert lengths <= {0, 1, 2, 3}
        assert len(lengths) > 1


class TestGenerateCorpus:
    def test_exact_counts(self, lexicon):
        spec = CorpusSpec(counts={PhenomenonKind.NONE: 100, PhenomenonKind.GENDER: 10}, seed=1)
        corpus = generate_corpus(spec, lexicon)
        assert len(corpus) == 110
        gender = [e for e in corpus if e.annotation and e.annotation.kind is PhenomenonKind.GENDER]
        assert len(gender) == 10

    def test_zero_count_produces_none(self, lexicon):
        spec = CorpusSpec(counts={PhenomenonKind.NONE: 30, PhenomenonKind.GENDER: 0}, seed=1)
        corpus = generate_corpus(spec, lexicon)
        assert all(e.annotation is None for e in corpus)

    def test_ids_dense_from_zero(self, lexicon):
        spec = CorpusSpec(counts={PhenomenonKind.NONE: 20, PhenomenonKind.FORMALITY: 5}, seed=2)
        corpus = generate_corpus(spec, lexicon)
        assert [e.id for e in corpus] == list(range(25))

    def test_byte_identical_serialization(self, lexicon, tmp_path):
        spec = CorpusSpec(counts={PhenomenonKind.NONE: 40, PhenomenonKind.AUXILIARY: 10}, seed=3)
        paths = []
        for name in ("a.jsonl", "b.jsonl"):
            path = tmp_path / name
            save_corpus(generate_corpus(spec, lexicon), path)
            paths.append(path.read_bytes())
        assert paths[0] == paths[1]

    def test_generated_examples_satisfy_invariants(self, mixed_corpus):
        for example in mixed_corpus:
            validate_example(example)

    def test_fixed_antecedent_distance_policy(self, lexicon):
        spec = CorpusSpec(
            counts={PhenomenonKind.GENDER: 15}, antecedent_distance=2, seed=4
        )
        for example in generate_corpus(spec, lexicon):
            assert example.annotation.antecedent_distance == 2

    def test_spec_validation(self):
        with pytest.raises(ConfigurationError):
            CorpusSpec(counts={PhenomenonKind.NONE: -1}).validate()
        with pytest.raises(ConfigurationError):
            CorpusSpec(counts={PhenomenonKind.GENDER: 1}, antecedent_distance=5).validate()


class TestSerialization:
    def test_corpus_round_trip(self, mixed_corpus, tmp_path):
        path = tmp_path / "corpus.jsonl"
        save_corpus(mixed_corpus, path)
        assert load_corpus(path) == mixed_corpus

    def test_lexicon_round_trip(self, lexicon, tmp_path):
        from ctxmt.corpus import save_lexicon

        path = tmp_path / "lexicon.json"
        save_lexicon(lexicon, path)
        assert load_lexicon(path) == lexicon

    def test_id_offset(self, mixed_corpus):
        shifted = with_id_offset(mixed_corpus, 1000)
        assert [e.id for e in shifted] == [e.id + 1000 for e in mixed_corpus]
        assert mixed_corpus[0].id < 1000  # originals untouched
