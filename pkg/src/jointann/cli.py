"""Command-line interface: workload generation, ground truth, index build,
search, evaluation sweeps, ablation grids, and baselines.

Default worker count comes from JOINTANN_THREADS; every command's --threads
flag overrides. Typed errors exit nonzero with a one-line diagnostic.
"""

from __future__ import annotations

import functools
import sys

import click
import numpy as np

from . import baselines, bench, datasets
from .attrs import Family
from .errors import JointAnnError
from .graph import BuildParams, JointGraph, dataclass_replace
from .search import SearchParams, query

FAMILIES = {
    "label": Family.LABEL,
    "range": Family.SCALAR,
    "subset": Family.BITSET,
    "boolean": Family.BOOL_ASSIGN,
}

threads_option = click.option(
    "--threads", type=int, envvar="JOINTANN_THREADS", default=1,
    show_default=True, help="Worker count (env JOINTANN_THREADS).",
)


def _typed_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except JointAnnError as exc:
            click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
            sys.exit(1)

    return wrapper


def _parse_floats(text):
    return tuple(float(v) for v in text.split(",") if v.strip())


def _parse_ints(text):
    return tuple(int(v) for v in text.split(",") if v.strip())


@click.group()
def main():
    """Filtered ANN indexing and benchmark harness."""


@main.command()
@click.option("--family", type=click.Choice(sorted(FAMILIES)), required=True)
@click.option("--n", type=int, required=True, help="Dataset size.")
@click.option("--d", type=int, required=True, help="Vector dimension.")
@click.option("--queries", "n_queries", type=int, default=1000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out-prefix", required=True, help="Writes PREFIX.fbin/.abin/.qbin/.qvec.fbin")
@_typed_errors
def gen(family, n, d, n_queries, seed, out_prefix):
    """Generate a synthetic filtered-search workload."""
    spec = datasets.WorkloadSpec(n=n, d=d, n_queries=n_queries, family=FAMILIES[family], seed=seed)
    vecs, attrs, qvecs, filters = datasets.gen_workload(spec)
    datasets.write_fbin(f"{out_prefix}.fbin", vecs)
    datasets.write_attrs(f"{out_prefix}.abin", attrs)
    datasets.write_fbin(f"{out_prefix}.qvec.fbin", qvecs)
    datasets.write_filters(f"{out_prefix}.qbin", filters)
    sel = np.mean([baselines.selectivity(attrs, f) for f in filters])
    click.echo(f"wrote {n} points (d={d}), {n_queries} queries, mean selectivity {sel:.4f}")


@main.command()
@click.option("--vectors", required=True)
@click.option("--attrs", "attrs_path", required=True)
@click.option("--query-vectors", required=True)
@click.option("--filters", "filters_path", required=True)
@click.option("--k", type=int, default=10, show_default=True)
@click.option("--out", required=True)
@_typed_errors
def gt(vectors, attrs_path, query_vectors, filters_path, k, out):
    """Compute exact filtered ground truth."""
    vecs = datasets.read_fbin(vectors)
    attrs = datasets.read_attrs(attrs_path)
    qvecs = datasets.read_fbin(query_vectors)
    filters = datasets.read_filters(filters_path)
    truth = baselines.brute_force_ground_truth(vecs, attrs, qvecs, filters, k)
    datasets.write_gt(out, truth)
    click.echo(f"wrote ground truth for {len(filters)} queries at k={k}")


@main.command()
@click.option("--vectors", required=True)
@click.option("--attrs", "attrs_path", required=True)
@click.option("--mode", type=click.Choice(["threshold", "weight"]), default="threshold", show_default=True)
@click.option("--levels", default="1.0,0.01,0.0", show_default=True,
              help="Quantile levels for threshold mode (comma-separated).")
@click.option("--multipliers", default="0,1,10", show_default=True,
              help="Weight multipliers of h for weight mode.")
@click.option("--deg", type=int, default=32, show_default=True, help="Max out-degree R.")
@click.option("--alpha", type=float, default=1.2, show_default=True)
@click.option("--lbuild", type=int, default=64, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--deterministic", is_flag=True, help="Force single-threaded insertion order.")
@click.option("--out", required=True)
@threads_option
@_typed_errors
def build(vectors, attrs_path, mode, levels, multipliers, deg, alpha, lbuild, seed,
          deterministic, out, threads):
    """Build a joint attribute-vector index."""
    vecs = datasets.read_fbin(vectors)
    attrs = datasets.read_attrs(attrs_path)
    params = BuildParams(
        degree=deg, alpha=alpha, l_build=lbuild, mode=mode,
        levels=_parse_floats(levels), multipliers=_parse_floats(multipliers), seed=seed,
    )
    g = JointGraph.build(vecs, attrs, params, threads=1 if deterministic else threads)
    g.save(out)
    click.echo(f"built index over {g.n} points (mode={mode}), saved to {out}")


@main.command()
@click.option("--index", "index_path", required=True)
@click.option("--query-vectors", required=True)
@click.option("--filters", "filters_path", required=True)
@click.option("--k", type=int, default=10, show_default=True)
@click.option("--beam", type=int, default=100, show_default=True)
@click.option("--out", default=None, help="Write results in gt format; prints a summary otherwise.")
@_typed_errors
def search(index_path, query_vectors, filters_path, k, beam, out):
    """Run filtered queries at a single beam size."""
    g = JointGraph.load(index_path)
    qvecs = datasets.read_fbin(query_vectors)
    filters = datasets.read_filters(filters_path)
    params = SearchParams(k=k, l_search=max(beam, k))
    results = np.full((len(filters), k), datasets.GT_PAD, dtype=np.uint32)
    total_dc = 0
    for i, f in enumerate(filters):
        res = query(g, qvecs[i], f, params)
        ids = res.ids[res.matches]
        results[i, : len(ids)] = ids
        total_dc += res.dc_count
    if out:
        datasets.write_gt(out, results)
        click.echo(f"wrote results for {len(filters)} queries to {out}")
    else:
        click.echo(f"ran {len(filters)} queries, mean DC {total_dc / len(filters):.1f}")


@main.command(name="eval")
@click.option("--index", "index_path", required=True)
@click.option("--vectors", required=True)
@click.option("--attrs", "attrs_path", required=True)
@click.option("--query-vectors", required=True)
@click.option("--filters", "filters_path", required=True)
@click.option("--gt", "gt_path", default=None, help="Computed and cached if missing.")
@click.option("--k", type=int, default=10, show_default=True)
@click.option("--beams", default="20,50,100,200", show_default=True)
@click.option("--out", default=None, help="CSV output path (stdout otherwise).")
@threads_option
@_typed_errors
def eval_cmd(index_path, vectors, attrs_path, query_vectors, filters_path, gt_path,
             k, beams, out, threads):
    """Full recall/QPS/DC sweep, CSV output."""
    g = JointGraph.load(index_path)
    vecs = datasets.read_fbin(vectors)
    attrs = datasets.read_attrs(attrs_path)
    qvecs = datasets.read_fbin(query_vectors)
    filters = datasets.read_filters(filters_path)
    if gt_path:
        try:
            truth = datasets.read_gt(gt_path)
        except FileNotFoundError:
            truth = baselines.brute_force_ground_truth(vecs, attrs, qvecs, filters, k)
            datasets.write_gt(gt_path, truth)
    else:
        truth = baselines.brute_force_ground_truth(vecs, attrs, qvecs, filters, k)
    report = bench.run_experiment(
        g, qvecs, filters, truth, k, _parse_ints(beams), threads=threads, config=index_path
    )
    text = report.to_csv()
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        click.echo(text, nl=False)


@main.command()
@click.option("--vectors", required=True)
@click.option("--attrs", "attrs_path", required=True)
@click.option("--query-vectors", required=True)
@click.option("--filters", "filters_path", required=True)
@click.option("--mode", type=click.Choice(["threshold", "weight"]), default="threshold", show_default=True)
@click.option("--levels", default="1.0,0.01,0.0", show_default=True)
@click.option("--multipliers", default="0,1,10", show_default=True)
@click.option("--deg", type=int, default=32, show_default=True)
@click.option("--alpha", type=float, default=1.2, show_default=True)
@click.option("--lbuild", type=int, default=64, show_default=True)
@click.option("--k", type=int, default=10, show_default=True)
@click.option("--beams", default="20,50,100,200,400", show_default=True)
@click.option("--dc-budget", type=float, default=5000.0, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@threads_option
@_typed_errors
def ablate(vectors, attrs_path, query_vectors, filters_path, mode, levels, multipliers,
           deg, alpha, lbuild, k, beams, dc_budget, seed, threads):
    """Single-threshold / single-weight ablation grid, banded by selectivity."""
    vecs = datasets.read_fbin(vectors)
    attrs = datasets.read_attrs(attrs_path)
    qvecs = datasets.read_fbin(query_vectors)
    filters = datasets.read_filters(filters_path)
    bands = [f"{baselines.selectivity(attrs, f):.0e}" for f in filters]
    params = BuildParams(degree=deg, alpha=alpha, l_build=lbuild, seed=seed)
    kwargs = {}
    if mode == "threshold":
        kwargs["single_levels"] = _parse_floats(levels)
    else:
        from .graph import derive_weights

        ws = derive_weights(np.ascontiguousarray(vecs, np.float32), attrs, _parse_floats(multipliers))
        kwargs["single_weights"] = tuple(dict.fromkeys(ws))
    matrix = bench.run_ablation_grid(
        vecs, attrs, qvecs, filters, bands, params, k, _parse_ints(beams), dc_budget,
        threads=threads, **kwargs,
    )
    all_bands = sorted({b for row in matrix.values() for b in row})
    click.echo("config," + ",".join(all_bands))
    for name, row in matrix.items():
        click.echo(name + "," + ",".join(f"{row.get(b, float('nan')):.4f}" for b in all_bands))


@main.command()
@click.argument("kind", type=click.Choice(["pre", "post"]))
@click.option("--vectors", required=True)
@click.option("--attrs", "attrs_path", required=True)
@click.option("--query-vectors", required=True)
@click.option("--filters", "filters_path", required=True)
@click.option("--index", "index_path", default=None, help="Attribute-blind index for post-filtering.")
@click.option("--k", type=int, default=10, show_default=True)
@click.option("--beam", type=int, default=100, show_default=True)
@_typed_errors
def baseline(kind, vectors, attrs_path, query_vectors, filters_path, index_path, k, beam):
    """Run the pre- or post-filtering baseline and report recall and DC."""
    vecs = datasets.read_fbin(vectors)
    attrs = datasets.read_attrs(attrs_path)
    qvecs = datasets.read_fbin(query_vectors)
    filters = datasets.read_filters(filters_path)
    truth = baselines.brute_force_ground_truth(vecs, attrs, qvecs, filters, k)
    recalls, dcs = [], []
    if kind == "pre":
        for i, f in enumerate(filters):
            ids, dc = baselines.pre_filter_search(vecs, attrs, qvecs[i], f, k)
            recalls.append(bench.recall_at_k(ids, truth[i], k))
            dcs.append(dc)
    else:
        if index_path:
            g = JointGraph.load(index_path)
        else:
            params = baselines.attribute_blind_params(BuildParams())
            g = JointGraph.build(vecs, attrs, params)
        for i, f in enumerate(filters):
            ids, dc = baselines.post_filter_search(g, qvecs[i], f, k, max(beam, k), attrs)
            recalls.append(bench.recall_at_k(ids, truth[i], k))
            dcs.append(dc)
    click.echo(
        f"{kind}-filter: recall@{k} {np.mean(recalls):.4f}, mean DC {np.mean(dcs):.1f}"
    )


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--index", "index_path", default=None, help="Index to preload as 'default'.")
def serve(host, port, index_path):
    """Start the HTTP query service."""
    import uvicorn

    from .service import app, load_index

    if index_path:
        load_index("default", index_path)
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
