"""Declarative end-to-end run: matrix -> similarity -> cutoff -> graph ->
communities -> metrics -> layout -> report files + manifest."""

from __future__ import annotations

import copy
import hashlib
import json
import os
import platform
import time
import warnings
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__, _kernels
from .affiliation import align_metadata, load_affiliation, load_metadata, matrix_stats
from .community import LouvainConfig, louvain
from .errors import CoopetitionError, ConfigError, DataError
from .graph import EXPORT_FORMATS, build_graph, export_graph
from .layout import FA2Params, fa2_run, write_positions_csv
from .metrics import MetricsConfig, coopetition_report
from .similarity import (EmptySparsificationWarning, empirical_cdf, pairwise_distances,
                         quantile_cutoff, reciprocal_similarity, sparsify)
from .synthgen import SynthConfig, generate, preset

MANIFEST_VERSION = 1

DEFAULT_CONFIG: dict[str, Any] = {
    "seed": 0,
    "input": {
        "affiliation": None,
        "metadata": None,
        "synth_preset": None,
        "synth": {},
        "grade_min": 0.0,
        "grade_max": 5.0,
        "labels": None,
    },
    "similarity": {
        "mode": "plain",
        "zero_policy": "cap_to_one",
        "quantile": 0.95,
        "weights": None,
        "workers": 1,
    },
    "graph": {"weighting": "similarity"},
    "louvain": {"max_passes": 100, "min_gain": 0.0, "node_order": "input"},
    "metrics": {"counting": "binary", "purity_threshold": 0.5},
    "layout": {
        "enabled": True,
        "k_repulsion": 1.0,
        "gravity": 0.0,
        "edge_weight_influence": 1.0,
        "iterations": 500,
        "speed": 1.0,
        "tolerance": 1e-7,
        "jitter_tolerance": 1.0,
        "max_move_fraction": 0.1,
    },
    "output": {"out_dir": "out", "formats": ["gexf"], "dump_similarity": True},
}

# short flags accepted by the CLI in addition to dotted paths
ALIASES = {"quantile": "similarity.quantile", "out_dir": "output.out_dir", "out-dir": "output.out_dir"}


def derive_seed(seed: int, stage: str) -> int:
    """Stage seed from the top-level seed; stable across platforms and versions."""
    digest = hashlib.sha256(f"{int(seed)}:{stage}".encode()).digest()
    return int.from_bytes(digest[:8], "little") >> 1


def _merge(base: dict, over: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in over.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(base[key], dict) and key != "synth":
            if not isinstance(value, dict):
                raise ConfigError(f"config key {where!r} must be an object")
            out[key] = _merge(base[key], value, where + ".")
        else:
            out[key] = copy.deepcopy(value)
    return out


def parse_override(item: str) -> tuple[str, Any]:
    """``key=value`` (leading dashes allowed); value parsed as JSON when possible."""
    text = item.lstrip("-")
    if "=" not in text:
        raise ConfigError(f"override {item!r} must look like --key=value")
    key, raw = text.split("=", 1)
    key = ALIASES.get(key, key.replace("-", "_"))
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


def apply_override(cfg: dict, key: str, value: Any) -> dict:
    parts = key.split(".")
    nested: Any = value
    for p in reversed(parts):
        nested = {p: nested}
    if parts[:2] == ["input", "synth"] and len(parts) > 2:
        # synth is free-form; merge instead of replacing it wholesale
        merged = dict(cfg["input"]["synth"])
        cur = merged
        for p in parts[2:-1]:
            cur = cur.setdefault(p, {})
        cur[parts[-1]] = value
        nested = {"input": {"synth": merged}}
    return _merge(cfg, nested)


@dataclass
class PipelineConfig:
    """Resolved configuration (defaults + file + overrides), validated."""

    data: dict = field(default_factory=lambda: copy.deepcopy(DEFAULT_CONFIG))

    @classmethod
    def from_sources(cls, file_cfg: dict | None = None, overrides: list[str] | None = None) -> "PipelineConfig":
        cfg = copy.deepcopy(DEFAULT_CONFIG)
        if file_cfg:
            if "manifest_version" in file_cfg:
                file_cfg = file_cfg["config"]
            cfg = _merge(cfg, file_cfg)
        for item in overrides or []:
            cfg = apply_override(cfg, *parse_override(item))
        pc = cls(cfg)
        pc.validate()
        return pc

    @classmethod
    def load(cls, path: str | os.PathLike | None, overrides: list[str] | None = None) -> "PipelineConfig":
        file_cfg = None
        if path is not None:
            try:
                file_cfg = json.loads(Path(path).read_text())
            except FileNotFoundError:
                raise ConfigError(f"config file {path} not found") from None
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
        return cls.from_sources(file_cfg, overrides)

    def __getitem__(self, key):
        return self.data[key]

    def validate(self) -> None:
        d = self.data
        q = d["similarity"]["quantile"]
        if not isinstance(q, (int, float)) or not 0 <= q < 1:
            raise ConfigError(f"similarity.quantile must lie in [0, 1), got {q!r}")
        inp = d["input"]
        if (inp["affiliation"] is None) == (inp["synth_preset"] is None and not inp["synth"]):
            raise ConfigError("give exactly one of input.affiliation or input.synth_preset/input.synth")
        for fmt in d["output"]["formats"]:
            if fmt not in EXPORT_FORMATS:
                raise ConfigError(f"unknown output format {fmt!r}; choose from {EXPORT_FORMATS}")
        # construct typed configs once to surface their validation errors early
        self.louvain_config()
        self.metrics_config()
        self.layout_params()
        if inp["affiliation"] is None:
            self.synth_config()

    def louvain_config(self) -> LouvainConfig:
        return LouvainConfig(seed=derive_seed(self.data["seed"], "louvain"), **self.data["louvain"])

    def metrics_config(self) -> MetricsConfig:
        return MetricsConfig(**self.data["metrics"])

    def layout_params(self) -> FA2Params:
        kw = {k: v for k, v in self.data["layout"].items() if k != "enabled"}
        return FA2Params(seed=derive_seed(self.data["seed"], "layout"), **kw)

    def synth_config(self) -> SynthConfig:
        inp = self.data["input"]
        base = preset(inp["synth_preset"]).to_dict() if inp["synth_preset"] else {}
        merged = {**base, **inp["synth"], "seed": derive_seed(self.data["seed"], "synth")}
        return SynthConfig.from_dict(merged)

    def derived_seeds(self) -> dict[str, int]:
        return {s: derive_seed(self.data["seed"], s) for s in ("synth", "louvain", "layout")}


class StageError(CoopetitionError):
    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 1)
        super().__init__(f"stage '{stage}' failed: {cause}")


@dataclass
class RunResult:
    out_dir: Path
    outputs: dict[str, Path]
    manifest: dict
    report: Any


class _Run:
    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.written: dict[str, Path] = {}
        self.timings: dict[str, float] = {}
        self.created_dir = not out_dir.exists()

    @contextmanager
    def stage(self, name: str):
        t0 = time.perf_counter()
        try:
            yield
        except StageError:
            raise
        except (CoopetitionError, OSError) as exc:
            raise StageError(name, exc) from exc
        finally:
            self.timings[name] = round(time.perf_counter() - t0, 6)

    def write(self, name: str, filename: str, data: str | bytes) -> Path:
        path = self.out_dir / filename
        if isinstance(data, str):
            data = data.encode("utf-8")
        path.write_bytes(data)
        self.written[name] = path
        return path

    def cleanup(self) -> None:
        for path in self.written.values():
            path.unlink(missing_ok=True)
        self.written.clear()
        if self.created_dir:
            try:
                self.out_dir.rmdir()
            except OSError:
                pass


def _text(writer, *args) -> str:
    import io

    buf = io.StringIO()
    writer(*args, buf)
    return buf.getvalue()


def run_pipeline(config: PipelineConfig | dict, backend: str | None = None) -> RunResult:
    """Run every stage and write the artifacts into ``output.out_dir``.

    On failure every file this run created is removed and a
    :class:`StageError` naming the stage is raised.
    """
    cfg = config if isinstance(config, PipelineConfig) else PipelineConfig.from_sources(config)
    d = cfg.data
    out_dir = Path(d["output"]["out_dir"])
    for key in ("affiliation", "metadata"):
        path = d["input"][key]
        if path is not None and not Path(path).is_file():
            raise StageError("config", ConfigError(f"input.{key}: {path} does not exist"))
    run = _Run(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        result = _run_stages(cfg, run, backend)
    except BaseException:
        run.cleanup()
        raise
    return result


def _run_stages(cfg: PipelineConfig, run: _Run, backend: str | None) -> RunResult:
    d = cfg.data
    inp = d["input"]
    scope = None
    with run.stage("load"):
        if inp["affiliation"] is not None:
            with open(inp["affiliation"], encoding="utf-8", newline="") as fh:
                matrix = load_affiliation(fh)
            meta_raw = []
            if inp["metadata"] is not None:
                with open(inp["metadata"], encoding="utf-8", newline="") as fh:
                    meta_raw = load_metadata(fh, inp["grade_min"], inp["grade_max"], inp["labels"])
            meta = align_metadata(matrix, meta_raw)
        else:
            data = generate(cfg.synth_config())
            matrix, meta = data.matrix, data.metadata
            scope = data.planted_members()
            from .affiliation import write_metadata

            run.write("synth_affiliation", "synth_affiliation.csv", _text(matrix.to_csv))
            run.write("synth_metadata", "synth_metadata.csv", _text(write_metadata, meta))
            run.write("synth_truth", "synth_truth.csv", _text(lambda fh: data.truth.to_csv(fh, matrix.entity_ids)))
            run.write("synth_cohorts", "synth_cohorts.csv",
                      "entity_id,cohort\n" + "".join(f"{e},{c}\n" for e, c in zip(matrix.entity_ids, data.cohorts)))

    with run.stage("stats"):
        stats = matrix_stats(matrix)
        stats_doc = {**stats.to_dict(), "ingest": matrix.diagnostics.to_dict()}
        run.write("stats", "stats.json", json.dumps(stats_doc, indent=2) + "\n")

    sim_cfg = d["similarity"]
    with run.stage("similarity"):
        dist = pairwise_distances(matrix, sim_cfg["mode"], sim_cfg["weights"], int(sim_cfg["workers"]), backend)
        dense = reciprocal_similarity(dist, sim_cfg["zero_policy"])

    with run.stage("cutoff"):
        cutoff = quantile_cutoff(empirical_cdf(dense), sim_cfg["quantile"])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", EmptySparsificationWarning)
            thresholded = sparsify(dense, cutoff)
        if d["output"]["dump_similarity"]:
            run.write("similarity", "similarity_thresholded.csv", _text(thresholded.to_csv))

    with run.stage("graph"):
        g = build_graph(thresholded, d["graph"]["weighting"])
        if g.n_edges == 0:
            raise DataError("no pair survived the cutoff; nothing to detect")

    with run.stage("detect"):
        partition = louvain(g, cfg.louvain_config(), backend=backend)
        run.write("partition", "partition.csv", _text(lambda fh: partition.to_csv(fh, matrix.entity_ids)))

    with run.stage("metrics"):
        report = coopetition_report(g, partition, meta, cfg.metrics_config(), scope)
        run.write("report_json", "report.json", report.to_json())
        run.write("report_text", "report.txt", report.to_text())

    positions = None
    layout_info = None
    if d["layout"]["enabled"]:
        with run.stage("layout"):
            st = fa2_run(g, cfg.layout_params(), backend=backend)
            positions = st.positions
            layout_info = {"iterations": st.iteration, "stopped_by": st.stopped_by}
            run.write("positions", "positions.csv", _text(write_positions_csv, st, matrix.entity_ids))

    with run.stage("export"):
        for fmt in d["output"]["formats"]:
            run.write(f"graph_{fmt}", f"graph.{fmt}", export_graph(g, fmt, positions, partition))

    manifest = {
        "manifest_version": MANIFEST_VERSION,
        "library_version": __version__,
        "kernel_backend": backend or _kernels.BACKEND,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "config": d,
        "derived_seeds": cfg.derived_seeds(),
        "summary": {
            "n_entities": matrix.n_entities,
            "n_features": matrix.n_features,
            "density": stats.density,
            "cutoff": cutoff,
            "retained_pairs": thresholded.n_pairs,
            "retained_fraction": thresholded.retained_fraction,
            "n_edges": g.n_edges,
            "n_communities": len(partition.assigned_communities()),
            "unassigned": report.unassigned_count,
            "modularity": report.modularity,
            "layout": layout_info,
        },
        "stage_timings": run.timings,
        "outputs": {name: {"file": p.name, "sha256": hashlib.sha256(p.read_bytes()).hexdigest()}
                    for name, p in sorted(run.written.items())},
    }
    run.write("manifest", "manifest.json", json.dumps(manifest, indent=2) + "\n")
    return RunResult(run.out_dir, dict(run.written), manifest, report)
