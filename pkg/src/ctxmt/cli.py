"""Command-line interface.

Every subcommand reads JSON config files, honors ``--seed`` overrides, and
writes its outputs under ``--out``.  Reruns with identical configs and
seeds produce byte-identical corpora and report files.  Failures print a
machine-readable JSON error to stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import composition, corpus, experiments, metrics, model, strategies
from .errors import ConfigurationError, CtxmtError

__all__ = ["main"]


def _load_json(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _lexicon_config(data: dict) -> corpus.LexiconConfig:
    return corpus.LexiconConfig(**data)


def _corpus_spec(data: dict, seed: int | None) -> corpus.CorpusSpec:
    counts = {corpus.PhenomenonKind(k): v for k, v in data.get("counts", {}).items()}
    return corpus.CorpusSpec(
        counts=counts,
        max_context_size=data.get("max_context_size", 3),
        antecedent_distance=data.get("antecedent_distance"),
        seed=seed if seed is not None else data.get("seed", 0),
    )


def _model_config(data: dict, vocab_size: int, seed: int | None) -> model.ModelConfig:
    merged = dict(data)
    merged["vocab_size"] = vocab_size
    if seed is not None:
        merged["seed"] = seed
    return model.ModelConfig(**merged)


def _strategy_config(data: dict) -> strategies.StrategyConfig:
    merged = dict(data)
    merged["kind"] = strategies.StrategyKind(merged.get("kind", "baseline"))
    if "metric_kind" in merged:
        merged["metric_kind"] = metrics.MetricKind(merged["metric_kind"])
    return strategies.StrategyConfig(**merged)


def _cmd_gen(args) -> None:
    config = _load_json(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lexicon_seed = config.get("lexicon", {}).get("seed", 7)
    lexicon = corpus.build_lexicon(
        _lexicon_config(
            {k: v for k, v in config.get("lexicon", {}).items() if k != "seed"}
        ),
        lexicon_seed,
    )
    spec = _corpus_spec(config.get("corpus", {}), args.seed)
    generated = corpus.generate_corpus(spec, lexicon)
    corpus.save_lexicon(lexicon, out / "lexicon.json")
    corpus.save_corpus(generated, out / "corpus.jsonl")
    print(json.dumps({"examples": len(generated), "out": str(out)}))


def _cmd_compose(args) -> None:
    spec_data = _load_json(args.spec)
    if args.seed is not None:
        spec_data["seed"] = args.seed
    spec = composition.CompositionSpec.from_json(spec_data)
    pools = {}
    for item in args.pool:
        name, _, path = item.partition("=")
        if not path:
            raise ConfigurationError(f"pool argument {item!r} must be name=path")
        pools[name] = corpus.load_corpus(path)
    composed = composition.compose(pools, spec)
    corpus.save_corpus(composed, args.out)
    print(json.dumps({"examples": len(composed), "out": args.out}))


def _cmd_train(args) -> None:
    config = _load_json(args.config)
    lexicon = corpus.load_lexicon(args.lexicon)
    vocabulary = composition.build_vocabulary(lexicon)
    train_corpus = corpus.load_corpus(args.corpus)
    model_config = _model_config(config.get("model", {}), len(vocabulary), args.seed)
    strategy_config = _strategy_config(config.get("strategy", {"kind": "baseline"}))
    if strategy_config.kind is strategies.StrategyKind.METRIC_SELECTION:
        result = strategies.run_metric_selection(
            train_corpus, vocabulary, model_config, strategy_config
        )
        state = result.state
        provenance = Path(args.out).with_suffix(".selection.jsonl")
        with open(provenance, "w", encoding="utf-8", newline="\n") as fh:
            for score in result.scores:
                fh.write(
                    json.dumps(
                        {
                            "id": score.example_id,
                            "pcxmi": score.pcxmi,
                            "max_pcxmi": score.max_pcxmi,
                            "selected": score.example_id in set(result.selected_ids),
                        }
                    )
                )
                fh.write("\n")
    else:
        state = strategies.apply_strategy(
            train_corpus, vocabulary, model_config, strategy_config
        )
    model.save_checkpoint(state, args.out)
    print(json.dumps({"updates": state.step, "out": args.out}))


def _cmd_eval(args) -> None:
    lexicon = corpus.load_lexicon(args.lexicon)
    vocabulary = composition.build_vocabulary(lexicon)
    state = model.load_checkpoint(args.checkpoint)
    eval_corpus = corpus.load_corpus(args.corpus)
    annotated = [e for e in eval_corpus if e.annotation is not None]
    translations = metrics.translate_corpus(state, eval_corpus, vocabulary, args.beam)
    accuracies = (
        metrics.accuracy_from_translations(
            annotated,
            [t for e, t in zip(eval_corpus, translations) if e.annotation is not None],
        )
        if annotated
        else {}
    )
    bleu = metrics.corpus_bleu(translations, [e.tgt for e in eval_corpus])
    pairs = metrics.build_contrastive_pairs(annotated, lexicon)
    contrastive = (
        metrics.contrastive_accuracy(state, pairs, vocabulary) if pairs else float("nan")
    )
    report = metrics.MetricReport(
        accuracies=accuracies,
        bleu=bleu,
        contrastive=contrastive,
        metadata={"checkpoint": Path(args.checkpoint).name, "beam": args.beam},
    )
    report.save_json(args.out)
    print(json.dumps({"bleu": bleu, "out": args.out}))


def _cmd_score(args) -> None:
    lexicon = corpus.load_lexicon(args.lexicon)
    vocabulary = composition.build_vocabulary(lexicon)
    state = model.load_checkpoint(args.checkpoint)
    examples = corpus.load_corpus(args.corpus)
    kind = metrics.MetricKind(args.metric)
    scores = metrics.score_corpus(state, examples, vocabulary, kind)
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        for score in scores:
            fh.write(
                json.dumps(
                    {
                        "id": score.example_id,
                        "pcxmi": score.pcxmi,
                        "max_pcxmi": score.max_pcxmi,
                        "value": score.value,
                    }
                )
            )
            fh.write("\n")
    print(json.dumps({"scored": len(scores), "out": args.out}))


def _cmd_select(args) -> None:
    examples = corpus.load_corpus(args.corpus)
    scores = []
    with open(args.scores, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                data = json.loads(line)
                scores.append(
                    metrics.ExampleScore(
                        example_id=data["id"],
                        pcxmi=data["pcxmi"],
                        max_pcxmi=data["max_pcxmi"],
                        token_ratios=None,
                        value=data["value"],
                    )
                )
    selected = strategies.select_top_k(scores, args.k, examples)
    corpus.save_corpus(selected, args.out)
    print(json.dumps({"selected": len(selected), "out": args.out}))


def _cmd_finetune(args) -> None:
    lexicon = corpus.load_lexicon(args.lexicon)
    vocabulary = composition.build_vocabulary(lexicon)
    state = model.load_checkpoint(args.checkpoint)
    data = corpus.load_corpus(args.corpus)
    if args.annotated_only:
        tuned = strategies.finetune_on_annotated(
            state, data, vocabulary, args.epochs
        )
    else:
        encoded = [
            composition.encode(
                strategies._max_context_variant(e, strategies.DEFAULT_MAX_CONTEXT),
                vocabulary,
            )
            for e in data
        ]
        config = dataclasses.replace(state.config, epochs=args.epochs)
        tuned = model.train(state, encoded, config)
    model.save_checkpoint(tuned, args.out)
    print(json.dumps({"updates": tuned.step, "out": args.out}))


def _sweep_config(data: dict, seed: int | None) -> experiments.SweepConfig:
    merged = dict(data)
    if "kind" in merged:
        merged["kind"] = corpus.PhenomenonKind(merged["kind"])
    if "densities" in merged:
        merged["densities"] = tuple(merged["densities"])
    if "seeds" in merged:
        merged["seeds"] = tuple(merged["seeds"])
    if seed is not None:
        merged["seeds"] = (seed,)
    if "model" in merged:
        merged["model"] = model.ModelConfig(**{"vocab_size": 0, **merged["model"]})
    if "eval_sizes" in merged:
        merged["eval_sizes"] = experiments.EvalSizes(**merged["eval_sizes"])
    if "lexicon_config" in merged:
        merged["lexicon_config"] = corpus.LexiconConfig(**merged["lexicon_config"])
    return experiments.SweepConfig(**merged)


def _methods_config(data: dict, seed: int | None) -> experiments.MethodsConfig:
    merged = dict(data)
    for key in ("seeds", "methods", "lams", "ps", "finetune_epochs"):
        if key in merged:
            merged[key] = tuple(merged[key])
    if seed is not None:
        merged["seeds"] = (seed,)
    if "model" in merged:
        merged["model"] = model.ModelConfig(**{"vocab_size": 0, **merged["model"]})
    if "eval_sizes" in merged:
        merged["eval_sizes"] = experiments.EvalSizes(**merged["eval_sizes"])
    if "lexicon_config" in merged:
        merged["lexicon_config"] = corpus.LexiconConfig(**merged["lexicon_config"])
    if "metric_kind" in merged:
        merged["metric_kind"] = metrics.MetricKind(merged["metric_kind"])
    return experiments.MethodsConfig(**merged)


def _emit_all(report: experiments.ExperimentReport, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    experiments.emit_report(report, "csv", out_dir / "report.csv")
    experiments.emit_report(report, "json", out_dir / "report.json")
    experiments.emit_report(report, "svg", out_dir / "report.svg")


def _cmd_sweep(args) -> None:
    config = _sweep_config(_load_json(args.config), args.seed)
    report = experiments.run_density_sweep(config)
    _emit_all(report, Path(args.out))
    print(json.dumps({"rows": len(report.rows), "errors": len(report.errors), "out": args.out}))


def _cmd_compare(args) -> None:
    config = _methods_config(_load_json(args.config), args.seed)
    report = experiments.run_method_comparison(config)
    _emit_all(report, Path(args.out))
    print(json.dumps({"rows": len(report.rows), "errors": len(report.errors), "out": args.out}))


def _cmd_report(args) -> None:
    report = experiments.load_report(args.report)
    experiments.emit_report(report, args.format, args.out)
    print(json.dumps({"out": args.out}))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ctxmt", description="context-utilization translation laboratory"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a lexicon and corpus")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("compose", help="mix pools into a training corpus")
    p.add_argument("--spec", required=True)
    p.add_argument("--pool", action="append", default=[], metavar="NAME=PATH")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_compose)

    p = sub.add_parser("train", help="train a model under a strategy")
    p.add_argument("--config", required=True)
    p.add_argument("--lexicon", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a corpus")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--lexicon", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--beam", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("score", help="score context reliance per example")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--lexicon", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--metric", choices=["pcxmi", "max_pcxmi"], default="max_pcxmi")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_score)

    p = sub.add_parser("select", help="select top-k examples by score")
    p.add_argument("--scores", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_select)

    p = sub.add_parser("finetune", help="fine-tune a checkpoint on a corpus")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--lexicon", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--epochs", type=int, required=True)
    p.add_argument("--annotated-only", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_finetune)

    p = sub.add_parser("sweep", help="run a density sweep")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("compare", help="run the method comparison")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("report", help="re-emit a saved report")
    p.add_argument("--report", required=True)
    p.add_argument("--format", choices=["csv", "json", "svg"], required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except CtxmtError as exc:
        print(
            json.dumps({"error": type(exc).__name__, "message": str(exc)}),
            file=sys.stderr,
        )
        return 2
    except OSError as exc:
        print(json.dumps({"error": "OSError", "message": str(exc)}), file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
