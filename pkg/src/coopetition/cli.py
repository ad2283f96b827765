"""Command-line interface: one subcommand per stage plus ``run`` for the whole chain.

Exit codes: 0 success, 2 bad configuration or arguments, 3 bad input data,
4 numerical divergence, 1 anything else.
"""

from __future__ import annotations

import argparse
import io
import json
import sys
import warnings
from pathlib import Path

from . import __version__, _kernels
from .affiliation import (align_metadata, load_affiliation, load_metadata, matrix_stats,
                          write_metadata)
from .community import LouvainConfig, louvain, read_partition_csv
from .errors import ConfigError, CoopetitionError, DataError
from .graph import EXPORT_FORMATS, build_graph, export_graph, read_graph_jsonl
from .layout import FA2Params, fa2_run, write_positions_csv
from .metrics import MetricsConfig, coopetition_report
from .pipeline import PipelineConfig, StageError, derive_seed, run_pipeline
from .similarity import (EmptySparsificationWarning, DistanceMatrix, empirical_cdf,
                         pairwise_distances, quantile_cutoff, reciprocal_similarity, sparsify)
from .synthgen import SynthConfig, generate, preset


class _UsageError(ConfigError):
    pass


class _Parser(argparse.ArgumentParser):
    def __init__(self, *args, **kwargs):
        kwargs.setdefault("allow_abbrev", False)
        super().__init__(*args, **kwargs)

    def error(self, message):  # argparse would exit(2) itself; route through our handler
        raise _UsageError(f"{self.prog}: {message}")


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(f"{path} does not exist") from None


def _write(path: str | Path, data: str | bytes) -> None:
    """Write via a temporary sibling so a failure never leaves a half file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".part")
    tmp.write_bytes(data.encode("utf-8") if isinstance(data, str) else data)
    tmp.replace(path)


def _render(writer, *args) -> str:
    buf = io.StringIO()
    writer(*args, buf)
    return buf.getvalue()


def _load_matrix(path: str):
    return load_affiliation(_read(path))


def _load_meta(args, matrix):
    if not args.metadata:
        return align_metadata(matrix, [])
    labels = args.labels.split(",") if getattr(args, "labels", None) else None
    return align_metadata(matrix, load_metadata(_read(args.metadata), args.grade_min, args.grade_max, labels))


def _thresholded(dist: DistanceMatrix, cut: dict):
    sim = reciprocal_similarity(dist, cut["zero_policy"])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EmptySparsificationWarning)
        return sparsify(sim, cut["cutoff"])


# -- subcommands ------------------------------------------------------------

def cmd_ingest(args) -> int:
    matrix = _load_matrix(args.affiliation)
    out = Path(args.out)
    meta = _load_meta(args, matrix)
    _write(out / "affiliation.csv", _render(matrix.to_csv))
    if args.metadata:
        _write(out / "metadata.csv", _render(write_metadata, meta))
    doc = {"n_entities": matrix.n_entities, "n_features": matrix.n_features,
           "n_cells": matrix.n_cells, **matrix.diagnostics.to_dict()}
    _write(out / "ingest.json", json.dumps(doc, indent=2) + "\n")
    print(json.dumps(doc))
    return 0


def cmd_stats(args) -> int:
    matrix = _load_matrix(args.affiliation)
    stats = matrix_stats(matrix)
    doc = {**stats.to_dict(), "ingest": matrix.diagnostics.to_dict()}
    text = json.dumps(doc, indent=2) + "\n"
    if args.threshold is not None:
        print(f"features attended by more than {args.threshold} entities: "
              f"{stats.features_above_threshold(args.threshold)}", file=sys.stderr)
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_similarity(args) -> int:
    matrix = _load_matrix(args.affiliation)
    weights = None
    if args.weights:
        weights = json.loads(_read(args.weights))
    dist = pairwise_distances(matrix, args.mode, weights, args.workers)
    _write(args.out, json.dumps(dist.to_dict()) + "\n")
    return 0


def cmd_cutoff(args) -> int:
    dist = DistanceMatrix.from_dict(json.loads(_read(args.distances)))
    sim = reciprocal_similarity(dist, args.zero_policy)
    cutoff = quantile_cutoff(empirical_cdf(sim), args.quantile)
    cut = {"quantile": args.quantile, "zero_policy": args.zero_policy, "cutoff": cutoff,
           "sample_size": sim.n_pairs}
    kept = _thresholded(dist, cut)
    cut["retained_pairs"] = kept.n_pairs
    if kept.n_pairs == 0:
        print("warning: no pair survived the cutoff", file=sys.stderr)
    if args.dump:
        _write(args.dump, _render(kept.to_csv))
    _write(args.out, json.dumps(cut, indent=2) + "\n")
    return 0


def cmd_graph(args) -> int:
    dist = DistanceMatrix.from_dict(json.loads(_read(args.distances)))
    cut = json.loads(_read(args.cutoff))
    g = build_graph(_thresholded(dist, cut), args.weighting)
    _write(args.out, export_graph(g, args.format))
    return 0


def _graph_from(path: str):
    return read_graph_jsonl(_read(path))


def cmd_detect(args) -> int:
    loaded = _graph_from(args.graph)
    g = loaded.graph
    if g.n_edges == 0:
        raise DataError("graph has no edges; nothing to detect")
    cfg = LouvainConfig(args.max_passes, args.min_gain, args.node_order, derive_seed(args.seed, "louvain"))
    p = louvain(g, cfg)
    _write(args.out, _render(lambda fh: p.to_csv(fh, g.ids())))
    return 0


def _partition_for(g, path: str):
    ids, p = read_partition_csv(_read(path))
    if tuple(ids) != tuple(g.ids()):
        raise DataError("partition entities do not match graph nodes")
    return p


def cmd_metrics(args) -> int:
    g = _graph_from(args.graph).graph
    p = _partition_for(g, args.partition)

    class _M:  # minimal matrix stand-in for metadata alignment
        entity_ids = g.ids()

    meta = _load_meta(args, _M)
    scope = None
    if args.cohorts:
        rows = _read(args.cohorts).splitlines()[1:]
        cohort = dict(r.split(",", 1) for r in rows if r)
        scope = [i for i, e in enumerate(g.ids()) if cohort.get(e) == "group"]
    report = coopetition_report(g, p, meta, MetricsConfig(args.counting, args.purity_threshold), scope)
    _write(args.out, report.to_json())
    if args.text:
        _write(args.text, report.to_text())
    else:
        sys.stdout.write(report.to_text())
    return 0


def cmd_layout(args) -> int:
    g = _graph_from(args.graph).graph
    params = FA2Params(args.k_repulsion, args.gravity, args.edge_weight_influence, args.iterations,
                       tolerance=args.tolerance, seed=derive_seed(args.seed, "layout"))
    st = fa2_run(g, params)
    _write(args.out, _render(write_positions_csv, st, g.ids()))
    if args.export:
        partition = _partition_for(g, args.partition) if args.partition else None
        fmt = Path(args.export).suffix.lstrip(".")
        _write(args.export, export_graph(g, fmt, st.positions, partition))
    print(f"layout stopped by {st.stopped_by} after {st.iteration} iterations", file=sys.stderr)
    return 0


def cmd_synth(args) -> int:
    cfg = preset(args.preset) if args.preset else SynthConfig()
    if args.config:
        cfg = SynthConfig.from_dict({**cfg.to_dict(), **json.loads(_read(args.config))})
    if args.seed is not None:
        cfg = cfg.with_(seed=derive_seed(args.seed, "synth"))
    data = generate(cfg)
    out = Path(args.out)
    ids = data.matrix.entity_ids
    _write(out / "affiliation.csv", _render(data.matrix.to_csv))
    _write(out / "metadata.csv", _render(write_metadata, data.metadata))
    _write(out / "truth.csv", _render(lambda fh: data.truth.to_csv(fh, ids)))
    _write(out / "cohorts.csv", "entity_id,cohort\n" + "".join(f"{e},{c}\n" for e, c in zip(ids, data.cohorts)))
    _write(out / "synth_config.json", json.dumps(cfg.to_dict(), indent=2) + "\n")
    return 0


def cmd_run(args, overrides: list[str]) -> int:
    if args.seed is not None:
        overrides = [f"seed={args.seed}"] + overrides
    if args.quantile is not None:
        overrides = [f"similarity.quantile={args.quantile}"] + overrides
    if args.out_dir is not None:
        overrides = overrides + [f"output.out_dir={json.dumps(args.out_dir)}"]
    cfg = PipelineConfig.load(args.config, overrides)
    result = run_pipeline(cfg)
    sys.stdout.write(result.report.to_text())
    print(f"outputs written to {result.out_dir}", file=sys.stderr)
    return 0


# -- argument parsing -------------------------------------------------------

def _meta_args(p) -> None:
    p.add_argument("--metadata", help="entity_id,grade,label CSV")
    p.add_argument("--grade-min", type=float, default=0.0)
    p.add_argument("--grade-max", type=float, default=5.0)
    p.add_argument("--labels", help="comma-separated allowed label set")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="coopetition", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version",
                    version=f"coopetition {__version__} ({_kernels.BACKEND} kernels)")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="validate and normalize an affiliation list")
    p.add_argument("--affiliation", required=True)
    _meta_args(p)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("stats", help="matrix statistics as JSON")
    p.add_argument("--affiliation", required=True)
    p.add_argument("--threshold", type=int, help="also count features attended by more than this")
    p.add_argument("--out")

    p = sub.add_parser("similarity", help="pairwise Hamming distances")
    p.add_argument("--affiliation", required=True)
    p.add_argument("--mode", choices=("plain", "weighted"), default="plain")
    p.add_argument("--weights", help="JSON list of per-feature weights (weighted mode)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True, help="distances JSON")

    p = sub.add_parser("cutoff", help="quantile cutoff on reciprocal similarity")
    p.add_argument("--distances", required=True)
    p.add_argument("--quantile", type=float, default=0.95)
    p.add_argument("--zero-policy", choices=("cap_to_one", "exclude_pair"), default="cap_to_one")
    p.add_argument("--dump", help="write the thresholded similarity CSV here")
    p.add_argument("--out", required=True, help="cutoff JSON")

    p = sub.add_parser("graph", help="build the thresholded graph")
    p.add_argument("--distances", required=True)
    p.add_argument("--cutoff", required=True)
    p.add_argument("--weighting", choices=("similarity", "binary"), default="similarity")
    p.add_argument("--format", choices=EXPORT_FORMATS, default="jsonl")
    p.add_argument("--out", required=True)

    p = sub.add_parser("detect", help="Louvain communities")
    p.add_argument("--graph", required=True, help="graph JSONL")
    p.add_argument("--max-passes", type=int, default=100)
    p.add_argument("--min-gain", type=float, default=0.0)
    p.add_argument("--node-order", choices=("input", "shuffle"), default="input")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="partition CSV")

    p = sub.add_parser("metrics", help="conductance, grades and label agreement")
    p.add_argument("--graph", required=True)
    p.add_argument("--partition", required=True)
    _meta_args(p)
    p.add_argument("--cohorts", help="entity_id,cohort CSV; scores accuracy over 'group' members too")
    p.add_argument("--counting", choices=("binary", "weighted"), default="binary")
    p.add_argument("--purity-threshold", type=float, default=0.5)
    p.add_argument("--out", required=True, help="report JSON")
    p.add_argument("--text", help="report table (default: stdout)")

    p = sub.add_parser("layout", help="ForceAtlas2-style positions")
    p.add_argument("--graph", required=True)
    p.add_argument("--partition")
    p.add_argument("--iterations", type=int, default=500)
    p.add_argument("--k-repulsion", type=float, default=1.0)
    p.add_argument("--gravity", type=float, default=0.0)
    p.add_argument("--edge-weight-influence", type=float, default=1.0)
    p.add_argument("--tolerance", type=float, default=1e-7)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--export", help="also write the graph with positions (.gexf/.graphml/.dot/.jsonl)")
    p.add_argument("--out", required=True, help="positions CSV")

    p = sub.add_parser("synth", help="planted-partition dataset with ground truth")
    p.add_argument("--preset")
    p.add_argument("--config", help="JSON with generator fields overriding the preset")
    p.add_argument("--seed", type=int, help="top-level seed (the generator seed is derived from it)")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("run", help="whole pipeline from a config; extra --section.key=value overrides",
                       epilog="A manifest.json from an earlier run is accepted as --config.")
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--quantile", type=float)
    p.add_argument("--out-dir")
    return ap


COMMANDS = {
    "ingest": cmd_ingest, "stats": cmd_stats, "similarity": cmd_similarity, "cutoff": cmd_cutoff,
    "graph": cmd_graph, "detect": cmd_detect, "metrics": cmd_metrics, "layout": cmd_layout,
    "synth": cmd_synth,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    command = "coopetition"
    try:
        args, extra = build_parser().parse_known_args(argv)
        command = args.command
        if command == "run":
            return cmd_run(args, extra)
        if extra:
            raise _UsageError(f"unrecognized arguments: {' '.join(extra)}")
        return COMMANDS[command](args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except StageError as exc:
        print(f"coopetition run: error in stage '{exc.stage}': {exc.cause}", file=sys.stderr)
        return exc.exit_code
    except CoopetitionError as exc:
        print(f"coopetition {command}: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (json.JSONDecodeError, KeyError) as exc:
        print(f"coopetition {command}: error: malformed input ({exc})", file=sys.stderr)
        return ConfigError.exit_code


if __name__ == "__main__":
    sys.exit(main())
