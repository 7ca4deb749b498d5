"""Batch command-line entry points.

Subcommands: npex, expand, train, tag, simulate, serve. All randomness
sits behind a single --seed flag; outputs are byte-identical across runs
given identical inputs and seeds.
"""

from __future__ import annotations

import json
import sys
from typing import Optional

import click

from . import corpus, crf, esegraph, featurize, harness, npex
from .featurize import FeaturizeConfig, SenseLexicon


@click.group()
def main():
    """Sparse-entity annotation toolkit."""


def _load(path: str, fmt: str) -> corpus.Pool:
    try:
        return corpus.load_corpus(path, fmt)
    except (OSError, corpus.CorpusFormatError) as exc:
        raise click.ClickException(str(exc))


@main.command("npex")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--format", "fmt", default="conll2003",
              type=click.Choice(["conll2003", "conllu"]))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--relax-jj-case", is_flag=True, default=False)
def npex_cmd(in_path, fmt, out_path, relax_jj_case):
    """Extract candidate noun phrases to a surface<TAB>count TSV."""
    pool = _load(in_path, fmt)
    nps = npex.collect_nps(pool, relax_jj_case=relax_jj_case)
    with open(out_path, "w", encoding="utf-8") as fh:
        for np_ in nps:
            fh.write(f"{np_.surface}\t{np_.count}\n")
    click.echo(f"wrote {len(nps)} noun phrases to {out_path}")


@main.command("expand")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--format", "fmt", default="conll2003",
              type=click.Choice(["conll2003", "conllu"]))
@click.option("--seed", "seeds", required=True, multiple=True,
              help="Seed entity surface (repeatable).")
@click.option("--scheme", default="tfidf", type=click.Choice(esegraph.SCHEMES))
@click.option("--sim", default="context", type=click.Choice(sorted(esegraph.SIMS)))
@click.option("--ensemble/--no-ensemble", default=True)
@click.option("--k", default=esegraph.DEFAULT_K, type=int)
@click.option("--lexicon", "lexicon_path", type=click.Path(exists=True))
@click.option("--out", "out_path", default="-", type=click.Path(allow_dash=True))
def expand_cmd(in_path, fmt, seeds, scheme, sim, ensemble, k, lexicon_path, out_path):
    """Rank candidate entities similar to the seed(s); TSV rank/surface/score."""
    pool = _load(in_path, fmt)
    nps = npex.collect_nps(pool)
    lexicon = SenseLexicon.load(lexicon_path) if lexicon_path else None
    coocs = featurize.featurize_all(pool, nps, lexicon, FeaturizeConfig())
    counts = {np_.surface: np_.count for np_ in nps}
    try:
        ranked = esegraph.expand(list(seeds), coocs, scheme, esegraph.SIMS[sim],
                                 k=k, ensemble=ensemble, counts=counts)
    except (esegraph.SeedNotFoundError, ValueError) as exc:
        raise click.ClickException(str(exc))
    out = sys.stdout if out_path == "-" else open(out_path, "w", encoding="utf-8")
    try:
        for rank, (surface, score) in enumerate(ranked.entries, start=1):
            out.write(f"{rank}\t{surface}\t{score:.10f}\n")
    finally:
        if out is not sys.stdout:
            out.close()


@main.command("train")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--format", "fmt", default="conll2003",
              type=click.Choice(["conll2003", "conllu"]))
@click.option("--entity-class", required=True)
@click.option("--out", "model_path", required=True, type=click.Path())
@click.option("--l2-sigma", default=1.0, type=float)
@click.option("--max-iter", default=200, type=int)
@click.option("--tol", default=1e-5, type=float)
def train_cmd(in_path, fmt, entity_class, model_path, l2_sigma, max_iter, tol):
    """Train a sequence model on a fully gold-labeled corpus."""
    pool = corpus.restrict_to_class(_load(in_path, fmt), entity_class)
    labeled = []
    for s in pool:
        if s.gold is None:
            raise click.ClickException(f"sentence {s.id} has no gold labels")
        s.working = list(s.gold)
        s.state = corpus.HUMAN
        labeled.append(s)
    model = crf.train(labeled, crf.TrainConfig(l2_sigma, max_iter, tol))
    model.save(model_path)
    click.echo(f"trained on {len(labeled)} sentences; "
               f"{len(model.feature_index)} features -> {model_path}")


@main.command("tag")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--format", "fmt", default="conll2003",
              type=click.Choice(["conll2003", "conllu"]))
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--entity-class", default="")
@click.option("--scheme", default="bio", type=click.Choice(["bio", "io"]))
@click.option("--out", "out_path", required=True, type=click.Path())
def tag_cmd(in_path, fmt, model_path, entity_class, scheme, out_path):
    """Apply an exported model to a corpus; emit CoNLL-2003 output."""
    pool = _load(in_path, fmt)
    try:
        model = crf.SequenceModel.load(model_path)
    except crf.ModelFileError as exc:
        raise click.ClickException(str(exc))
    for s in pool:
        s.working = corpus.repair_bio(crf.decode(model, s))
        s.state = corpus.AUTO
    pool.entity_class = entity_class
    corpus.write_conll2003(pool, out_path, scheme=scheme)
    click.echo(f"tagged {len(pool)} sentences -> {out_path}")


@main.command("simulate")
@click.option("--config", "config_path", type=click.Path(exists=True),
              help="JSON experiment config; flags below override nothing if given.")
@click.option("--mode", default="EAL", type=click.Choice(list(harness.active.MODES)))
@click.option("--in", "in_path", type=click.Path(exists=True),
              help="Gold corpus (default: built-in synthetic fixture).")
@click.option("--format", "fmt", default="conll2003",
              type=click.Choice(["conll2003", "conllu"]))
@click.option("--entity-class", default="")
@click.option("--batch-size", default=100, type=int)
@click.option("--seed", "rng_seed", default=0, type=int)
@click.option("--seed-entity", default=None)
@click.option("--fixture-sentences", default=1000, type=int)
@click.option("--out", "out_path", required=True, type=click.Path(),
              help="Curves CSV; a matching .png figure is written alongside.")
@click.option("--plot/--no-plot", default=True)
@click.option("--verbose", is_flag=True, default=False)
def simulate_cmd(config_path, mode, in_path, fmt, entity_class, batch_size,
                 rng_seed, seed_entity, fixture_sentences, out_path, plot, verbose):
    """Run an emulated annotation experiment; write curves CSV (+ figure)."""
    if config_path:
        with open(config_path, encoding="utf-8") as fh:
            doc = json.load(fh)
        config = harness.ExperimentConfig(**doc)
    else:
        config = harness.ExperimentConfig(
            mode=mode, batch_size=batch_size, rng_seed=rng_seed,
            seed_entity=seed_entity)

    if in_path:
        pool = _load(in_path, fmt)
        if entity_class:
            pool = corpus.restrict_to_class(pool, entity_class)
    else:
        pool = harness.synthetic_pool(harness.FixtureConfig(
            n_sentences=fixture_sentences, rng_seed=config.rng_seed))

    try:
        history = harness.run_experiment(config, pool, verbose=verbose)
    except (harness.MissingGoldError, esegraph.SeedNotFoundError, ValueError) as exc:
        raise click.ClickException(str(exc))
    harness.write_curves_csv(history, out_path)
    click.echo(f"wrote {len(history)} iterations to {out_path}")
    if plot:
        fig_path = out_path.rsplit(".", 1)[0] + ".png"
        harness.plot_curves(history, fig_path,
                            title=f"{config.mode} run (seed {config.rng_seed})")
        click.echo(f"wrote figure to {fig_path}")
    cut = harness.percentage_cut(history, len(pool))
    click.echo(f"pool cut: {cut:.4f}")


@main.command("serve")
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8000, type=int)
def serve_cmd(host, port):
    """Start the annotation HTTP service."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=host, port=port)


if __name__ == "__main__":
    main()
