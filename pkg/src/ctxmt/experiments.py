"""Experiment runner: density sweeps, method comparisons, report emission.

Each cell of an experiment (one dataset composition trained with one seed)
is fully determined by its own configuration, so cells can run in any
order; rows are normalized by (strategy, density, seed) before emission.
"""

from __future__ import annotations

import csv
import dataclasses
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from .composition import CompositionSpec, Vocabulary, build_vocabulary, compose
from .corpus import (
    ContextualExample,
    CorpusSpec,
    Lexicon,
    LexiconConfig,
    PHENOMENA,
    PhenomenonKind,
    build_lexicon,
    generate_corpus,
    with_id_offset,
)
from .errors import CapacityError, ConfigurationError, CtxmtError
from .metrics import (
    ContrastivePair,
    MetricKind,
    accuracy_from_translations,
    build_contrastive_pairs,
    contrastive_accuracy,
    corpus_bleu,
    translate_corpus,
)
from .model import ModelConfig, ModelState
from .strategies import StrategyConfig, StrategyKind, apply_strategy
from . import svg

__all__ = [
    "EVAL_ID_OFFSET",
    "EvalSizes",
    "EvalSuite",
    "build_eval_suite",
    "evaluate_model",
    "SweepConfig",
    "MethodsConfig",
    "ReportRow",
    "ExperimentReport",
    "run_density_sweep",
    "run_method_comparison",
    "emit_report",
    "load_report",
]

EVAL_ID_OFFSET = 1_000_000

_KIND_COLUMNS = ("gender", "formality", "auxiliary")


@dataclass(frozen=True)
class EvalSizes:
    per_phenomenon: int = 500
    plain: int = 500


@dataclass
class EvalSuite:
    """Held-out evaluation corpora, disjoint id range from any training set."""

    per_kind: dict[PhenomenonKind, list[ContextualExample]]
    plain: list[ContextualExample]
    pairs: list[ContrastivePair]

    def min_id(self) -> int:
        ids = [e.id for examples in self.per_kind.values() for e in examples]
        ids += [e.id for e in self.plain]
        return min(ids)


def build_eval_suite(
    lexicon: Lexicon,
    sizes: EvalSizes,
    seed: int,
    max_ctx: int = 3,
    id_offset: int = EVAL_ID_OFFSET,
) -> EvalSuite:
    per_kind: dict[PhenomenonKind, list[ContextualExample]] = {}
    offset = id_offset
    for kind in PHENOMENA:
        spec = CorpusSpec(
            counts={kind: sizes.per_phenomenon}, max_context_size=max_ctx, seed=seed
        )
        per_kind[kind] = with_id_offset(generate_corpus(spec, lexicon), offset)
        offset += sizes.per_phenomenon
        seed += 1
    plain_spec = CorpusSpec(
        counts={PhenomenonKind.NONE: sizes.plain}, max_context_size=max_ctx, seed=seed
    )
    plain = with_id_offset(generate_corpus(plain_spec, lexicon), offset)
    pairs = build_contrastive_pairs(
        [e for examples in per_kind.values() for e in examples], lexicon
    )
    return EvalSuite(per_kind=per_kind, plain=plain, pairs=pairs)


def evaluate_model(
    state: ModelState,
    suite: EvalSuite,
    vocabulary: Vocabulary,
    beam_width: int = 1,
) -> dict:
    """Phenomenon accuracies, BLEU over the mixed eval set, contrastive accuracy."""
    accuracies: dict[PhenomenonKind, float] = {}
    hypotheses: list[list[str]] = []
    references: list[list[str]] = []
    for kind, examples in suite.per_kind.items():
        translations = translate_corpus(state, examples, vocabulary, beam_width)
        counts = accuracy_from_translations(examples, translations)
        correct, total = counts[kind]
        accuracies[kind] = correct / total
        hypotheses += translations
        references += [e.tgt for e in examples]
    plain_translations = translate_corpus(state, suite.plain, vocabulary, beam_width)
    hypotheses += plain_translations
    references += [e.tgt for e in suite.plain]
    return {
        "accuracies": accuracies,
        "bleu": corpus_bleu(hypotheses, references),
        "contrastive": contrastive_accuracy(state, suite.pairs, vocabulary),
    }


@dataclass(frozen=True)
class SweepConfig:
    """Density sweep over one phenomenon with multi-seed averaging."""

    kind: PhenomenonKind = PhenomenonKind.GENDER
    densities: tuple[float, ...] = (0.0, 0.02, 0.05, 0.10)
    total_size: int = 5000
    seeds: tuple[int, ...] = (1, 2, 3, 4, 5)
    model: ModelConfig = field(
        default_factory=lambda: ModelConfig(vocab_size=0, epochs=14, dtype="float32")
    )
    eval_sizes: EvalSizes = field(default_factory=EvalSizes)
    lexicon_config: LexiconConfig = field(default_factory=LexiconConfig)
    lexicon_seed: int = 7
    data_seed: int = 100
    max_ctx: int = 3
    eval_beam_width: int = 1

    def validate(self) -> None:
        if not self.seeds:
            raise ConfigurationError("at least one seed required")
        if list(self.densities) != sorted(self.densities):
            raise ConfigurationError("densities must be ascending")
        for d in self.densities:
            if not 0.0 <= d <= 1.0:
                raise ConfigurationError(f"density {d} outside [0, 1]")
        if self.kind is PhenomenonKind.NONE:
            raise ConfigurationError("sweep kind must be a phenomenon")


@dataclass(frozen=True)
class MethodsConfig:
    """Method comparison on one fixed annotated corpus."""

    plain_count: int = 4700
    dense_count_per_kind: int = 100
    seeds: tuple[int, ...] = (1, 2, 3, 4, 5)
    model: ModelConfig = field(
        default_factory=lambda: ModelConfig(vocab_size=0, epochs=10, dtype="float32")
    )
    eval_sizes: EvalSizes = field(default_factory=EvalSizes)
    lexicon_config: LexiconConfig = field(default_factory=LexiconConfig)
    lexicon_seed: int = 7
    data_seed: int = 100
    max_ctx: int = 3
    eval_beam_width: int = 1
    methods: tuple[str, ...] = (
        "baseline",
        "weighting",
        "coword_dropout",
        "divide_and_rule",
        "annotation_finetune",
        "metric_selection",
    )
    lams: tuple[float, ...] = (2.0, 5.0, 10.0)
    ps: tuple[float, ...] = (0.1, 0.2, 0.3)
    finetune_epochs: tuple[int, ...] = (1, 2, 5)
    selection_k: int | None = None  # None: number of annotated examples
    metric_kind: MetricKind = MetricKind.MAX_PCXMI


@dataclass
class ReportRow:
    strategy: str
    kind_enriched: str
    density: float
    seed: int
    accuracies: dict[str, float]
    bleu: float
    contrastive: float
    updates: int


@dataclass
class ExperimentReport:
    rows: list[ReportRow] = field(default_factory=list)
    errors: list[dict] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def normalized_rows(self) -> list[ReportRow]:
        return sorted(
            self.rows, key=lambda r: (r.strategy, r.kind_enriched, r.density, r.seed)
        )

    def validate(self) -> None:
        seen = set()
        for row in self.rows:
            key = (row.strategy, row.kind_enriched, row.density, row.seed)
            if key in seen:
                raise ConfigurationError(f"duplicate report cell {key}")
            seen.add(key)

    def aggregate(self) -> list[dict]:
        """Seed mean and standard deviation per (strategy, kind, density)."""
        groups: dict[tuple, list[ReportRow]] = {}
        for row in self.normalized_rows():
            groups.setdefault((row.strategy, row.kind_enriched, row.density), []).append(row)
        out = []
        for (strategy, kind, dens), rows in sorted(groups.items()):
            agg = {
                "strategy": strategy,
                "kind_enriched": kind,
                "density": dens,
                "n_seeds": len(rows),
            }
            for col in _KIND_COLUMNS:
                vals = [r.accuracies[col] for r in rows if col in r.accuracies]
                if vals:
                    agg[f"acc_{col}_mean"] = _mean(vals)
                    agg[f"acc_{col}_std"] = _std(vals)
            agg["bleu_mean"] = _mean([r.bleu for r in rows])
            agg["bleu_std"] = _std([r.bleu for r in rows])
            agg["contrastive_mean"] = _mean([r.contrastive for r in rows])
            agg["contrastive_std"] = _std([r.contrastive for r in rows])
            agg["updates_mean"] = _mean([r.updates for r in rows])
            out.append(agg)
        return out

    def deltas_vs_baseline(self) -> list[dict]:
        """Per-method seed-mean differences from the baseline strategy."""
        aggregates = self.aggregate()
        baselines = {
            (a["kind_enriched"], a["density"]): a
            for a in aggregates
            if a["strategy"] == StrategyKind.BASELINE.value
        }
        deltas = []
        for agg in aggregates:
            base = baselines.get((agg["kind_enriched"], agg["density"]))
            if base is None:
                continue
            delta = {
                "strategy": agg["strategy"],
                "kind_enriched": agg["kind_enriched"],
                "density": agg["density"],
                "updates_mean": agg["updates_mean"],
            }
            for col in _KIND_COLUMNS:
                key = f"acc_{col}_mean"
                if key in agg and key in base:
                    delta[f"delta_acc_{col}"] = agg[key] - base[key]
            delta["delta_bleu"] = agg["bleu_mean"] - base["bleu_mean"]
            delta["delta_contrastive"] = agg["contrastive_mean"] - base["contrastive_mean"]
            deltas.append(delta)
        return deltas


def _mean(values) -> float:
    return float(sum(values) / len(values))


def _std(values) -> float:
    m = _mean(values)
    return float((sum((v - m) ** 2 for v in values) / len(values)) ** 0.5)


# --- sweep -------------------------------------------------------------------


def _sweep_pools(config: SweepConfig, lexicon: Lexicon):
    max_dense = max(round(d * config.total_size) for d in config.densities)
    sparse_spec = CorpusSpec(
        counts={PhenomenonKind.NONE: config.total_size},
        max_context_size=config.max_ctx,
        seed=config.data_seed * 1000 + 1,
    )
    dense_spec = CorpusSpec(
        counts={config.kind: max(max_dense, 1)},
        max_context_size=config.max_ctx,
        seed=config.data_seed * 1000 + 2,
    )
    return {
        "sparse": generate_corpus(sparse_spec, lexicon),
        "dense": generate_corpus(dense_spec, lexicon),
    }


def _assert_disjoint(train_corpus: list[ContextualExample], suite: EvalSuite) -> None:
    max_train = max(e.id for e in train_corpus)
    if max_train >= suite.min_id():
        raise ConfigurationError("training and evaluation id ranges overlap")


def run_density_sweep(config: SweepConfig) -> ExperimentReport:
    """Compose, train, and evaluate one baseline model per (density, seed)."""
    config.validate()
    lexicon = build_lexicon(config.lexicon_config, config.lexicon_seed)
    vocabulary = build_vocabulary(lexicon)
    pools = _sweep_pools(config, lexicon)
    suite = build_eval_suite(
        lexicon, config.eval_sizes, config.data_seed * 1000 + 50, config.max_ctx
    )
    report = ExperimentReport(
        metadata={
            "experiment": "density_sweep",
            "kind": config.kind.value,
            "densities": list(config.densities),
            "total_size": config.total_size,
            "seeds": list(config.seeds),
        }
    )
    for dens in config.densities:
        dense_count = round(dens * config.total_size)
        # Seed tied to the density value itself: a cell's dataset does not
        # depend on which other densities the sweep happens to include.
        spec = CompositionSpec(
            seed=config.data_seed * 1000 + 100 + round(dens * 10000),
            parts=(("sparse", config.total_size - dense_count), ("dense", dense_count)),
        )
        try:
            train_corpus = compose(pools, spec)
            _assert_disjoint(train_corpus, suite)
        except CtxmtError as exc:
            for seed in config.seeds:
                report.errors.append(
                    {"density": dens, "seed": seed, "error": type(exc).__name__, "message": str(exc)}
                )
            continue
        for seed in config.seeds:
            try:
                model_config = replace(
                    config.model, vocab_size=len(vocabulary), seed=seed
                )
                strategy = StrategyConfig(kind=StrategyKind.BASELINE, max_ctx=config.max_ctx)
                state = apply_strategy(train_corpus, vocabulary, model_config, strategy)
                result = evaluate_model(state, suite, vocabulary, config.eval_beam_width)
                report.rows.append(
                    ReportRow(
                        strategy=StrategyKind.BASELINE.value,
                        kind_enriched=config.kind.value,
                        density=dens,
                        seed=seed,
                        accuracies={k.value: v for k, v in result["accuracies"].items()},
                        bleu=result["bleu"],
                        contrastive=result["contrastive"],
                        updates=state.step,
                    )
                )
            except CtxmtError as exc:
                report.errors.append(
                    {"density": dens, "seed": seed, "error": type(exc).__name__, "message": str(exc)}
                )
    report.validate()
    return report


# --- method comparison -------------------------------------------------------


def _comparison_strategies(config: MethodsConfig, annotated_count: int) -> list[StrategyConfig]:
    strategies: list[StrategyConfig] = []
    for method in config.methods:
        if method == "baseline":
            strategies.append(StrategyConfig(kind=StrategyKind.BASELINE, max_ctx=config.max_ctx))
        elif method == "weighting":
            strategies += [
                StrategyConfig(kind=StrategyKind.WEIGHTING, lam=lam, max_ctx=config.max_ctx)
                for lam in config.lams
            ]
        elif method == "coword_dropout":
            strategies += [
                StrategyConfig(kind=StrategyKind.COWORD_DROPOUT, p=p, max_ctx=config.max_ctx)
                for p in config.ps
            ]
        elif method == "divide_and_rule":
            strategies.append(
                StrategyConfig(kind=StrategyKind.DIVIDE_AND_RULE, max_ctx=config.max_ctx)
            )
        elif method == "annotation_finetune":
            strategies += [
                StrategyConfig(
                    kind=StrategyKind.ANNOTATION_FINETUNE, finetune_epochs=e, max_ctx=config.max_ctx
                )
                for e in config.finetune_epochs
            ]
        elif method == "metric_selection":
            k = config.selection_k if config.selection_k is not None else annotated_count
            strategies += [
                StrategyConfig(
                    kind=StrategyKind.METRIC_SELECTION,
                    k=k,
                    finetune_epochs=e,
                    metric_kind=config.metric_kind,
                    max_ctx=config.max_ctx,
                )
                for e in config.finetune_epochs
            ]
        else:
            raise ConfigurationError(f"unknown method {method!r}")
    return strategies


def build_comparison_corpus(config: MethodsConfig, lexicon: Lexicon) -> list[ContextualExample]:
    pools = {
        "plain": generate_corpus(
            CorpusSpec(
                counts={PhenomenonKind.NONE: config.plain_count},
                max_context_size=config.max_ctx,
                seed=config.data_seed * 1000 + 1,
            ),
            lexicon,
        )
    }
    parts = [("plain", config.plain_count)]
    for i, kind in enumerate(PHENOMENA):
        pools[kind.value] = generate_corpus(
            CorpusSpec(
                counts={kind: config.dense_count_per_kind},
                max_context_size=config.max_ctx,
                seed=config.data_seed * 1000 + 2 + i,
            ),
            lexicon,
        )
        parts.append((kind.value, config.dense_count_per_kind))
    spec = CompositionSpec(seed=config.data_seed * 1000 + 99, parts=tuple(parts))
    return compose(pools, spec)


def run_method_comparison(config: MethodsConfig) -> ExperimentReport:
    """Run every configured strategy on one fixed annotated corpus."""
    lexicon = build_lexicon(config.lexicon_config, config.lexicon_seed)
    vocabulary = build_vocabulary(lexicon)
    corpus = build_comparison_corpus(config, lexicon)
    suite = build_eval_suite(
        lexicon, config.eval_sizes, config.data_seed * 1000 + 50, config.max_ctx
    )
    _assert_disjoint(corpus, suite)
    annotated_count = sum(1 for e in corpus if e.annotation is not None)
    annotated_density = annotated_count / len(corpus)
    report = ExperimentReport(
        metadata={
            "experiment": "method_comparison",
            "corpus_size": len(corpus),
            "annotated_count": annotated_count,
            "seeds": list(config.seeds),
        }
    )
    for strategy in _comparison_strategies(config, annotated_count):
        for seed in config.seeds:
            try:
                model_config = replace(config.model, vocab_size=len(vocabulary), seed=seed)
                state = apply_strategy(corpus, vocabulary, model_config, strategy)
                result = evaluate_model(state, suite, vocabulary, config.eval_beam_width)
                report.rows.append(
                    ReportRow(
                        strategy=strategy.label(),
                        kind_enriched="mixed",
                        density=annotated_density,
                        seed=seed,
                        accuracies={k.value: v for k, v in result["accuracies"].items()},
                        bleu=result["bleu"],
                        contrastive=result["contrastive"],
                        updates=state.step,
                    )
                )
            except CtxmtError as exc:
                report.errors.append(
                    {
                        "strategy": strategy.label(),
                        "seed": seed,
                        "error": type(exc).__name__,
                        "message": str(exc),
                    }
                )
    report.validate()
    return report


# --- emission ----------------------------------------------------------------

_CSV_COLUMNS = (
    "strategy",
    "kind_enriched",
    "density",
    "seed",
    "acc_gender",
    "acc_formality",
    "acc_auxiliary",
    "bleu",
    "contrastive",
    "updates",
)


def emit_report(report: ExperimentReport, fmt: str, path: str | Path) -> None:
    """Write the report as csv, json, or svg; bytes are deterministic."""
    if fmt == "csv":
        _emit_csv(report, path)
    elif fmt == "json":
        _emit_json(report, path)
    elif fmt == "svg":
        _emit_svg(report, path)
    else:
        raise ConfigurationError(f"unknown report format {fmt!r}")


def _emit_csv(report: ExperimentReport, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_CSV_COLUMNS)
        for row in report.normalized_rows():
            writer.writerow(
                [
                    row.strategy,
                    row.kind_enriched,
                    repr(row.density),
                    row.seed,
                    *[
                        repr(row.accuracies[c]) if c in row.accuracies else ""
                        for c in _KIND_COLUMNS
                    ],
                    repr(row.bleu),
                    repr(row.contrastive),
                    row.updates,
                ]
            )


def report_rows_from_csv(path: str | Path) -> list[ReportRow]:
    rows = []
    with open(path, encoding="utf-8", newline="") as fh:
        for record in csv.DictReader(fh):
            accuracies = {
                c: float(record[f"acc_{c}"]) for c in _KIND_COLUMNS if record[f"acc_{c}"]
            }
            rows.append(
                ReportRow(
                    strategy=record["strategy"],
                    kind_enriched=record["kind_enriched"],
                    density=float(record["density"]),
                    seed=int(record["seed"]),
                    accuracies=accuracies,
                    bleu=float(record["bleu"]),
                    contrastive=float(record["contrastive"]),
                    updates=int(record["updates"]),
                )
            )
    return rows


def _emit_json(report: ExperimentReport, path: str | Path) -> None:
    payload = {
        "metadata": report.metadata,
        "rows": [dataclasses.asdict(r) for r in report.normalized_rows()],
        "aggregates": report.aggregate(),
        "deltas": report.deltas_vs_baseline(),
        "errors": report.errors,
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_report(path: str | Path) -> ExperimentReport:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    rows = [
        ReportRow(
            strategy=r["strategy"],
            kind_enriched=r["kind_enriched"],
            density=r["density"],
            seed=r["seed"],
            accuracies=dict(r["accuracies"]),
            bleu=r["bleu"],
            contrastive=r["contrastive"],
            updates=r["updates"],
        )
        for r in payload["rows"]
    ]
    return ExperimentReport(rows=rows, errors=payload.get("errors", []), metadata=payload.get("metadata", {}))


def _emit_svg(report: ExperimentReport, path: str | Path) -> None:
    aggregates = report.aggregate()
    densities = sorted({a["density"] for a in aggregates})
    if len(densities) > 1:
        series: dict[str, list[tuple[float, float]]] = {}
        for agg in aggregates:
            for col in _KIND_COLUMNS:
                key = f"acc_{col}_mean"
                if key in agg:
                    series.setdefault(f"{agg['strategy']}:{col}", []).append(
                        (agg["density"], agg[key])
                    )
        content = svg.line_chart(
            series, "density", "accuracy", title="accuracy vs density"
        )
    else:
        points: dict[str, tuple[float, float]] = {}
        for agg in aggregates:
            acc_keys = [f"acc_{c}_mean" for c in _KIND_COLUMNS if f"acc_{c}_mean" in agg]
            if acc_keys:
                mean_acc = _mean([agg[k] for k in acc_keys])
                points[agg["strategy"]] = (agg["bleu_mean"], mean_acc)
        content = svg.scatter_chart(
            points, "BLEU", "mean accuracy", title="accuracy vs BLEU"
        )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(content)
        fh.write("\n")
