"""Command-line entry points for the full pipeline.

Subcommands: ``ingest`` (extractor JSONL -> store), ``train`` (store +
norms -> model file), ``tune`` (hyperparameter study -> best model +
journal), ``predict`` (word in context -> ranked features), ``study``
(dative sentence pairs -> delta CSV), and ``serve`` (HTTP service). Every
subcommand is a thin shell over the library modules; exit status is 0 on
success, 1 on a domain error (diagnostic on stderr), 2 on bad usage.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import dative, hpo, mlp, norms, service, store


def _load_space(norms_path: str, config_path: str | None) -> norms.NormSpace:
    config = norms.SpaceConfig.from_json(config_path) if config_path else None
    space = norms.load_norms(norms_path, config)
    if config is not None:
        space = norms.normalize_features(space, config.normalize)
    return space


def _mlp_config(
    path: str | None, input_dim: int, output_dim: int, seed: int | None = None
) -> mlp.MlpConfig:
    raw = {}
    if path:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    raw.setdefault("hidden_size", min(input_dim, output_dim))
    if seed is not None:
        raw["seed"] = seed
    return mlp.MlpConfig(input_dim=input_dim, output_dim=output_dim, **raw)


def _training_set(store_dir: str, layer: int, space: norms.NormSpace) -> store.TrainingSet:
    emb = store.EmbeddingStore.open(store_dir)
    aggregates = emb.aggregate(layer)
    return store.build_training_pairs(aggregates, space)


def _metadata(emb_store: store.EmbeddingStore, layer: int,
              space: norms.NormSpace) -> mlp.ModelMetadata:
    return mlp.ModelMetadata(
        source_model=emb_store.manifest.model_name,
        layer=layer,
        norm_space=space.name,
        feature_names=space.feature_names,
    )


def cmd_ingest(args: argparse.Namespace) -> int:
    records = list(store.read_ingestion_jsonl(args.input))
    if not records:
        raise ValueError(f"{args.input} holds no records")
    store_dir = Path(args.store)
    if (store_dir / "manifest.json").exists():
        emb = store.EmbeddingStore.open(store_dir)
    else:
        emb = store.EmbeddingStore.create(
            store_dir, model_name=args.model, dimensionality=len(records[0].vector)
        )
    manifest = emb.append_records(records)
    for layer in manifest.layers:
        print(f"layer {layer}: {manifest.record_count[layer]} records")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    space = _load_space(args.norms, args.space_config)
    emb = store.EmbeddingStore.open(args.store)
    dataset = store.build_training_pairs(emb.aggregate(args.layer), space)
    config = _mlp_config(
        args.config, input_dim=dataset.inputs.shape[1], output_dim=dataset.targets.shape[1]
    )
    model, report = mlp.train(dataset, config, metadata=_metadata(emb, args.layer, space))
    mlp.save_model(model, args.out)
    print(
        f"trained on {len(dataset)} words: best epoch {report.best_epoch}, "
        f"val loss {report.best_val_loss:.6f}, "
        f"{report.epochs_run} epochs"
        + (" (early stop)" if report.stopped_early else "")
    )
    return 0


def cmd_tune(args: argparse.Namespace) -> int:
    space = _load_space(args.norms, args.space_config)
    emb = store.EmbeddingStore.open(args.store)
    dataset = store.build_training_pairs(emb.aggregate(args.layer), space)
    base = _mlp_config(
        args.config,
        input_dim=dataset.inputs.shape[1],
        output_dim=dataset.targets.shape[1],
        seed=args.seed,
    )
    sampler: hpo.TpeConfig | hpo.RandomConfig
    if args.sampler == "tpe":
        sampler = hpo.TpeConfig(seed=args.seed)
    else:
        sampler = hpo.RandomConfig(seed=args.seed)
    study_config = hpo.StudyConfig(
        n_trials=args.trials,
        sampler=sampler,
        pruner=hpo.MedianPrunerConfig() if args.prune else None,
    )
    model, best, records = hpo.run_study(
        study_config,
        dataset,
        base,
        metadata=_metadata(emb, args.layer, space),
        journal_path=args.journal,
    )
    mlp.save_model(model, args.out)
    completed = sum(1 for r in records if r.status == "complete")
    pruned = sum(1 for r in records if r.status == "pruned")
    print(
        f"{len(records)} trials ({completed} complete, {pruned} pruned); "
        f"best trial {best.trial_id}: val loss {best.final_value:.6f}, "
        f"params {json.dumps(best.params, sort_keys=True)}"
    )
    return 0


def cmd_predict(args: argparse.Namespace) -> int:
    model = mlp.load_model(args.model)
    client = service.ExtractorClient(service.extractor_url_from(args.extractor_url))
    try:
        vector = client.embed(
            sentence=args.sentence,
            word=args.word,
            occurrence=args.occurrence,
            model_name=model.metadata.source_model,
            layer=model.metadata.layer,
        )
    finally:
        client.close()
    ranked = mlp.ranked_features(model, vector)
    if args.json:
        print(
            json.dumps(
                {
                    "features": [{"name": n, "value": v} for n, v in ranked],
                    "layer": model.metadata.layer,
                    "norm_space": model.metadata.norm_space,
                },
            )
        )
    else:
        width = max(len(n) for n, _ in ranked)
        for name, value in ranked:
            print(f"{name:<{width}}  {value: .4f}")
    return 0


def cmd_study(args: argparse.Namespace) -> int:
    lexicon = dative.load_lexicon(args.lexicon) if args.lexicon else dative.default_lexicon()
    items = dative.generate_pairs(lexicon)
    client = service.ExtractorClient(service.extractor_url_from(args.extractor_url))
    person_names = args.person_features.split(",")
    place_names = args.place_features.split(",")

    by_source: dict[str, list[dative.LayerDelta]] = {}
    try:
        for model_path in args.model:
            model = mlp.load_model(model_path)
            meta = model.metadata
            space_features = list(meta.feature_names)
            person_idx = [space_features.index(n) for n in person_names]
            place_idx = [space_features.index(n) for n in place_names]
            projections: dict[tuple[dative.DativeItem, str, int], object] = {}
            for item in items:
                for variant, sentence in (("do", item.do_sentence), ("po", item.po_sentence)):
                    vector = client.embed(
                        sentence=sentence,
                        word=item.recipient,
                        occurrence=item.recipient_occurrence,
                        model_name=meta.source_model,
                        layer=meta.layer,
                    )
                    projections[(item, variant, meta.layer)] = mlp.project(model, vector)
            report = dative.compute_deltas(
                items, projections, person_idx, place_idx, [meta.layer], model=meta.source_model
            )
            by_source.setdefault(meta.source_model, []).extend(report.deltas)
    finally:
        client.close()

    reports = [
        dative.DeltaReport(model=source, deltas=tuple(sorted(ds, key=lambda d: d.layer)))
        for source, ds in sorted(by_source.items())
    ]
    dative.emit_figure_data(reports, args.out)
    print(f"{len(items)} sentence pairs, {sum(len(r.deltas) for r in reports)} "
          f"(model, layer) rows -> {args.out}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    app = service.build_app(
        args.registry, service.extractor_url_from(args.extractor_url)
    )
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="featurescope",
        description="Project contextual word embeddings into semantic feature-norm spaces.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="load extractor JSONL into an embedding store")
    p.add_argument("--store", required=True, help="store directory (created if missing)")
    p.add_argument("--input", required=True, help="newline-delimited JSON records")
    p.add_argument("--model", default="unknown", help="source model name for a new store")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", help="train a projector from a store and a norm file")
    p.add_argument("--store", required=True)
    p.add_argument("--layer", type=int, required=True)
    p.add_argument("--norms", required=True, help="delimited norm file")
    p.add_argument("--space-config", help="JSON space config (name, bounds, normalize)")
    p.add_argument("--config", help="JSON MLP config (hidden_size, batch_size, ...)")
    p.add_argument("--out", required=True, help="output model file")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("tune", help="hyperparameter search, saving the best model")
    p.add_argument("--store", required=True)
    p.add_argument("--layer", type=int, required=True)
    p.add_argument("--norms", required=True)
    p.add_argument("--space-config")
    p.add_argument("--config", help="base JSON MLP config")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sampler", choices=("tpe", "random"), default="tpe")
    p.add_argument("--prune", action="store_true", help="enable median pruning")
    p.add_argument("--journal", help="trial journal (JSONL, enables resume)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("predict", help="ranked feature prediction for a word in context")
    p.add_argument("--model", required=True)
    p.add_argument("--sentence", required=True)
    p.add_argument("--word", required=True)
    p.add_argument("--occurrence", type=int, default=0)
    p.add_argument("--extractor-url", help=f"default ${service.EXTRACTOR_URL_ENV}")
    p.add_argument("--json", action="store_true", help="JSON instead of a table")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("study", help="dative-alternation delta CSV over sentence pairs")
    p.add_argument("--lexicon", help="lexicon JSON (default: packaged lexicon)")
    p.add_argument("--model", action="append", required=True,
                   help="model file; repeat for several layers/models")
    p.add_argument("--extractor-url", help=f"default ${service.EXTRACTOR_URL_ENV}")
    p.add_argument("--person-features", default=",".join(dative.PERSON_FEATURES))
    p.add_argument("--place-features", default=",".join(dative.PLACE_FEATURES))
    p.add_argument("--out", required=True, help="output CSV")
    p.set_defaults(func=cmd_study)

    p = sub.add_parser("serve", help="run the prediction HTTP service")
    p.add_argument("--registry", required=True, help="JSON model registry")
    p.add_argument("--extractor-url", help=f"default ${service.EXTRACTOR_URL_ENV}")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, OSError, RuntimeError) as exc:
        print(f"featurescope: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
