"""Synthetic parallel corpus with controllable contextual phenomena.

A deterministic toy language pair: every source word ``w`` (other than the
sentence-final period) has the fixed target counterpart ``t_<w>``, so the
base translation task is a learnable word-by-word mapping.  Three phenomena
additionally require information from earlier sentences:

* gender -- the current source contains the ambiguous pronoun "it"; the
  correct target pronoun (pron_m / pron_f / pron_n) is fixed by the gender
  of a noun introduced in an earlier sentence.
* formality -- the target second-person form ("vu" formal, "tu" informal)
  is fixed by a marker word in an earlier greeting sentence.
* auxiliary -- an elided verb ("<name> can too .") whose target must repeat
  the verb introduced in an earlier sentence.

The cue sentence always sits exactly ``antecedent_distance`` sentences back;
the sentences in between are unrelated filler, so the cue cannot be
recovered from the current sentence alone.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

from .errors import ConfigurationError, DomainError, InputError

__all__ = [
    "PhenomenonKind",
    "Lexicon",
    "LexiconConfig",
    "Annotation",
    "ContextualExample",
    "CorpusSpec",
    "build_lexicon",
    "generate_example",
    "generate_corpus",
    "target_word",
    "save_corpus",
    "load_corpus",
    "save_lexicon",
    "load_lexicon",
    "validate_example",
    "with_id_offset",
    "FUNCTION_WORDS",
    "PERIOD",
]

PERIOD = "."

# Source-side function words used by the sentence templates.
FUNCTION_WORDS = ("the", "it", "is", "here", "hello", "you", "are", "can", "too")

GENDERS = ("M", "F", "N")

_CONSONANTS = "bdfgklmnprsvz"
_VOWELS = "aeiou"


class PhenomenonKind(Enum):
    NONE = "none"
    GENDER = "gender"
    FORMALITY = "formality"
    AUXILIARY = "auxiliary"


PHENOMENA = (PhenomenonKind.GENDER, PhenomenonKind.FORMALITY, PhenomenonKind.AUXILIARY)


def target_word(word: str) -> str:
    """Deterministic target counterpart of a source word."""
    return word if word == PERIOD else "t_" + word


@dataclass(frozen=True)
class LexiconConfig:
    nouns: int = 16
    intransitive_verbs: int = 10
    ellipsis_verbs: int = 10
    adjectives: int = 12
    names: int = 12

    def validate(self) -> None:
        if self.nouns < 3:
            raise ConfigurationError(f"need at least 3 nouns, got {self.nouns}")
        for attr in ("intransitive_verbs", "ellipsis_verbs", "adjectives", "names"):
            if getattr(self, attr) < 1:
                raise ConfigurationError(f"need at least 1 {attr.replace('_', ' ')}, got {getattr(self, attr)}")


@dataclass(frozen=True)
class Lexicon:
    """Word inventory of the toy language pair.

    Noun genders are drawn uniformly at build time and fixed thereafter.
    """

    nouns: tuple[tuple[str, str], ...]  # (surface, gender in {M, F, N})
    intransitive_verbs: tuple[str, ...]
    ellipsis_verbs: tuple[str, ...]
    adjectives: tuple[str, ...]
    names: tuple[str, ...]
    formal_marker: str = "sir"
    informal_marker: str = "pal"
    pronouns: tuple[tuple[str, str], ...] = (("M", "pron_m"), ("F", "pron_f"), ("N", "pron_n"))
    formal_second_person: str = "vu"
    informal_second_person: str = "tu"

    def gender_of(self, noun: str) -> str:
        for surface, gender in self.nouns:
            if surface == noun:
                return gender
        raise KeyError(noun)

    def pronoun_for(self, gender: str) -> str:
        for g, form in self.pronouns:
            if g == gender:
                return form
        raise KeyError(gender)

    def source_words(self) -> tuple[str, ...]:
        words = [w for w, _ in self.nouns]
        words += list(self.intransitive_verbs)
        words += list(self.ellipsis_verbs)
        words += list(self.adjectives)
        words += list(self.names)
        words += [self.formal_marker, self.informal_marker]
        words += list(FUNCTION_WORDS)
        return tuple(words)

    def all_surface_forms(self) -> tuple[str, ...]:
        """Every distinct token that can appear on either side."""
        forms: list[str] = list(self.source_words())
        forms += [target_word(w) for w in self.source_words()]
        forms += [form for _, form in self.pronouns]
        forms += [self.formal_second_person, self.informal_second_person]
        forms.append(PERIOD)
        seen: dict[str, None] = {}
        for f in forms:
            seen.setdefault(f)
        return tuple(seen)


@dataclass(frozen=True)
class Annotation:
    kind: PhenomenonKind
    expected_word: str
    target_indices: tuple[int, ...]
    antecedent_distance: int


@dataclass
class ContextualExample:
    """One parallel unit: current sentence pair plus aligned context."""

    id: int
    src: list[str]
    tgt: list[str]
    src_ctx: list[list[str]]  # oldest first
    tgt_ctx: list[list[str]]
    annotation: Annotation | None = None


@dataclass(frozen=True)
class CorpusSpec:
    """Requested example counts per phenomenon plus generation policy."""

    counts: dict[PhenomenonKind, int] = field(default_factory=dict)
    max_context_size: int = 3
    antecedent_distance: int | None = None  # None: uniform in 1..max_context_size
    seed: int = 0

    def validate(self) -> None:
        for kind, count in self.counts.items():
            if count < 0:
                raise ConfigurationError(f"negative count for {kind.value}: {count}")
        if self.max_context_size < 0:
            raise ConfigurationError("max_context_size must be >= 0")
        if self.antecedent_distance is not None and not (
            1 <= self.antecedent_distance <= self.max_context_size
        ):
            raise ConfigurationError(
                f"antecedent_distance {self.antecedent_distance} outside 1..{self.max_context_size}"
            )
        if any(k is not PhenomenonKind.NONE for k, c in self.counts.items() if c > 0):
            if self.max_context_size < 1:
                raise ConfigurationError("phenomenon examples need max_context_size >= 1")


def _make_word(rng: random.Random) -> str:
    syllables = rng.randint(2, 3)
    return "".join(rng.choice(_CONSONANTS) + rng.choice(_VOWELS) for _ in range(syllables))


def _draw_words(rng: random.Random, count: int, taken: set[str]) -> list[str]:
    words: list[str] = []
    while len(words) < count:
        w = _make_word(rng)
        if w in taken:
            continue
        taken.add(w)
        words.append(w)
    return words


def build_lexicon(config: LexiconConfig, seed: int) -> Lexicon:
    """Build a word inventory; deterministic for a fixed (config, seed)."""
    config.validate()
    rng = random.Random(seed)
    taken = set(FUNCTION_WORDS) | {"sir", "pal", "vu", "tu", PERIOD}
    noun_surfaces = _draw_words(rng, config.nouns, taken)
    nouns = tuple((w, rng.choice(GENDERS)) for w in noun_surfaces)
    return Lexicon(
        nouns=nouns,
        intransitive_verbs=tuple(_draw_words(rng, config.intransitive_verbs, taken)),
        ellipsis_verbs=tuple(_draw_words(rng, config.ellipsis_verbs, taken)),
        adjectives=tuple(_draw_words(rng, config.adjectives, taken)),
        names=tuple(_draw_words(rng, config.names, taken)),
    )


def _translate(sentence: list[str]) -> list[str]:
    return [target_word(w) for w in sentence]


def _plain_sentence(lexicon: Lexicon, rng: random.Random) -> tuple[list[str], list[str]]:
    noun = rng.choice(lexicon.nouns)[0]
    verb = rng.choice(lexicon.intransitive_verbs)
    src = ["the", noun, verb, PERIOD]
    return src, _translate(src)


def generate_example(
    lexicon: Lexicon,
    kind: PhenomenonKind,
    antecedent_distance: int | None,
    rng: random.Random,
    max_context_size: int = 3,
    example_id: int = 0,
) -> ContextualExample:
    """Generate one example of the requested kind.

    For phenomenon kinds the context holds the cue sentence followed by
    ``antecedent_distance - 1`` filler sentences; plain examples get a
    uniformly drawn number of filler context sentences.
    """
    if kind is PhenomenonKind.NONE:
        n_ctx = rng.randint(0, max_context_size)
        ctx = [_plain_sentence(lexicon, rng) for _ in range(n_ctx)]
        src, tgt = _plain_sentence(lexicon, rng)
        return ContextualExample(
            id=example_id,
            src=src,
            tgt=tgt,
            src_ctx=[s for s, _ in ctx],
            tgt_ctx=[t for _, t in ctx],
        )

    if antecedent_distance is None:
        antecedent_distance = rng.randint(1, max_context_size)
    if not 1 <= antecedent_distance <= max_context_size:
        raise DomainError(
            f"antecedent_distance {antecedent_distance} outside 1..{max_context_size}"
        )

    if kind is PhenomenonKind.GENDER:
        noun, gender = rng.choice(lexicon.nouns)
        adjective = rng.choice(lexicon.adjectives)
        cue = ["the", noun, "is", "here", PERIOD]
        src = ["it", "is", adjective, PERIOD]
        pronoun = lexicon.pronoun_for(gender)
        tgt = [pronoun, target_word("is"), target_word(adjective), PERIOD]
        annotation = Annotation(kind, pronoun, (0,), antecedent_distance)
    elif kind is PhenomenonKind.FORMALITY:
        formal = rng.random() < 0.5
        marker = lexicon.formal_marker if formal else lexicon.informal_marker
        adjective = rng.choice(lexicon.adjectives)
        cue = ["hello", marker, PERIOD]
        src = ["you", "are", adjective, PERIOD]
        form = lexicon.formal_second_person if formal else lexicon.informal_second_person
        tgt = [form, target_word("are"), target_word(adjective), PERIOD]
        annotation = Annotation(kind, form, (0,), antecedent_distance)
    elif kind is PhenomenonKind.AUXILIARY:
        name = rng.choice(lexicon.names)
        verb = rng.choice(lexicon.ellipsis_verbs)
        others = [n for n in lexicon.names if n != name]
        name2 = rng.choice(others) if others else name
        cue = [name, "can", verb, PERIOD]
        src = [name2, "can", "too", PERIOD]
        tgt = [target_word(name2), target_word("can"), target_word(verb), target_word("too"), PERIOD]
        annotation = Annotation(kind, target_word(verb), (2,), antecedent_distance)
    else:
        raise DomainError(f"cannot generate kind {kind}")

    fillers = [_plain_sentence(lexicon, rng) for _ in range(antecedent_distance - 1)]
    src_ctx = [cue] + [s for s, _ in fillers]
    tgt_ctx = [_translate(cue)] + [t for _, t in fillers]
    return ContextualExample(
        id=example_id,
        src=src,
        tgt=tgt,
        src_ctx=src_ctx,
        tgt_ctx=tgt_ctx,
        annotation=annotation,
    )


_KIND_ORDER = (
    PhenomenonKind.NONE,
    PhenomenonKind.GENDER,
    PhenomenonKind.FORMALITY,
    PhenomenonKind.AUXILIARY,
)


def generate_corpus(spec: CorpusSpec, lexicon: Lexicon) -> list[ContextualExample]:
    """Generate exactly the requested counts; ids dense from 0.

    Deterministic per (spec, lexicon): the same spec and lexicon always
    produce byte-identical serializations.
    """
    spec.validate()
    rng = random.Random(spec.seed)
    corpus: list[ContextualExample] = []
    for kind in _KIND_ORDER:
        for _ in range(spec.counts.get(kind, 0)):
            corpus.append(
                generate_example(
                    lexicon,
                    kind,
                    spec.antecedent_distance,
                    rng,
                    max_context_size=spec.max_context_size,
                    example_id=len(corpus),
                )
            )
    return corpus


def validate_example(example: ContextualExample) -> None:
    """Check the structural invariants of a generated example."""
    if len(example.src_ctx) != len(example.tgt_ctx):
        raise InputError(f"example {example.id}: context sides differ in length")
    ann = example.annotation
    if ann is None:
        return
    for i in ann.target_indices:
        if not 0 <= i < len(example.tgt) or example.tgt[i] != ann.expected_word:
            raise InputError(
                f"example {example.id}: expected {ann.expected_word!r} at index {i}"
            )
    if ann.antecedent_distance > len(example.src_ctx):
        raise InputError(
            f"example {example.id}: antecedent distance {ann.antecedent_distance} "
            f"exceeds available context {len(example.src_ctx)}"
        )


def with_id_offset(corpus: list[ContextualExample], offset: int) -> list[ContextualExample]:
    """Copy of the corpus with every id shifted by ``offset``."""
    return [replace(e, id=e.id + offset) for e in corpus]


# --- serialization -------------------------------------------------------


def example_to_dict(example: ContextualExample) -> dict:
    ann = example.annotation
    return {
        "id": example.id,
        "src": example.src,
        "tgt": example.tgt,
        "src_ctx": example.src_ctx,
        "tgt_ctx": example.tgt_ctx,
        "annotation": None
        if ann is None
        else {
            "kind": ann.kind.value,
            "expected_word": ann.expected_word,
            "target_indices": list(ann.target_indices),
            "antecedent_distance": ann.antecedent_distance,
        },
    }


def example_from_dict(data: dict) -> ContextualExample:
    ann = data.get("annotation")
    annotation = None
    if ann is not None:
        annotation = Annotation(
            kind=PhenomenonKind(ann["kind"]),
            expected_word=ann["expected_word"],
            target_indices=tuple(ann["target_indices"]),
            antecedent_distance=ann["antecedent_distance"],
        )
    return ContextualExample(
        id=data["id"],
        src=list(data["src"]),
        tgt=list(data["tgt"]),
        src_ctx=[list(s) for s in data["src_ctx"]],
        tgt_ctx=[list(t) for t in data["tgt_ctx"]],
        annotation=annotation,
    )


def save_corpus(corpus: list[ContextualExample], path: str | Path) -> None:
    """Write one example per line as compact JSON, UTF-8, LF endings."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for example in corpus:
            fh.write(json.dumps(example_to_dict(example), separators=(",", ":")))
            fh.write("\n")


def load_corpus(path: str | Path) -> list[ContextualExample]:
    corpus = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                corpus.append(example_from_dict(json.loads(line)))
    return corpus


def lexicon_to_dict(lexicon: Lexicon) -> dict:
    return {
        "nouns": [list(pair) for pair in lexicon.nouns],
        "intransitive_verbs": list(lexicon.intransitive_verbs),
        "ellipsis_verbs": list(lexicon.ellipsis_verbs),
        "adjectives": list(lexicon.adjectives),
        "names": list(lexicon.names),
        "formal_marker": lexicon.formal_marker,
        "informal_marker": lexicon.informal_marker,
        "pronouns": [list(pair) for pair in lexicon.pronouns],
        "formal_second_person": lexicon.formal_second_person,
        "informal_second_person": lexicon.informal_second_person,
    }


def lexicon_from_dict(data: dict) -> Lexicon:
    return Lexicon(
        nouns=tuple((w, g) for w, g in data["nouns"]),
        intransitive_verbs=tuple(data["intransitive_verbs"]),
        ellipsis_verbs=tuple(data["ellipsis_verbs"]),
        adjectives=tuple(data["adjectives"]),
        names=tuple(data["names"]),
        formal_marker=data["formal_marker"],
        informal_marker=data["informal_marker"],
        pronouns=tuple((g, f) for g, f in data["pronouns"]),
        formal_second_person=data["formal_second_person"],
        informal_second_person=data["informal_second_person"],
    )


def save_lexicon(lexicon: Lexicon, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(lexicon_to_dict(lexicon), fh, indent=2)
        fh.write("\n")


def load_lexicon(path: str | Path) -> Lexicon:
    with open(path, encoding="utf-8") as fh:
        return lexicon_from_dict(json.load(fh))
