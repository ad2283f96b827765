"""Time the compiled and pure Python kernels on the same inputs.

    python3 benchmarks/bench_kernels.py [--repeat 3] [--scale 1.0]

Each workload runs through the public API with ``backend=`` pinned, and the
agree column compares the two backends' outputs (FA2 on a single step).
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from coopetition import _kernels
from coopetition.community import louvain, modularity
from coopetition.graph import build_graph
from coopetition.layout import FA2Params, fa2_step, init_positions
from coopetition.similarity import empirical_cdf, pairwise_distances, quantile_cutoff, \
    reciprocal_similarity, sparsify
from coopetition.synthgen import generate, preset


def best_of(repeat, fn):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--scale", type=float, default=1.0, help="multiply every cohort size")
    ap.add_argument("--fa2-steps", type=int, default=50)
    args = ap.parse_args(argv)

    if _kernels.compiled_kernels is None:
        print("compiled kernels not built; nothing to compare")
        return 1

    cfg = preset("tseba-like")
    cfg = cfg.with_(group_sizes=[round(x * args.scale) for x in cfg.group_sizes],
                    mixed_group_size=round(cfg.mixed_group_size * args.scale),
                    loner_count=round(cfg.loner_count * args.scale))
    data = generate(cfg)
    m = data.matrix
    d = pairwise_distances(m)
    s = reciprocal_similarity(d)
    g = build_graph(sparsify(s, quantile_cutoff(empirical_cdf(s), 0.95)))
    start = init_positions(g, 1)
    params = FA2Params()

    def fa2(backend):
        st = start
        for _ in range(args.fa2_steps):
            st = fa2_step(g, st, params, backend)
        return st.positions

    workloads = {
        f"hamming {m.n_entities}x{m.n_features}": (
            lambda b: pairwise_distances(m, backend=b).values, np.array_equal),
        f"weighted hamming {m.n_entities}x{m.n_features}": (
            lambda b: pairwise_distances(m, mode="weighted", backend=b).values, np.array_equal),
        f"louvain n={g.n} edges={g.n_edges}": (
            lambda b: louvain(g, backend=b), lambda x, y: x == y),
        f"fa2 {args.fa2_steps} steps n={g.n}": (fa2, None),
    }
    # Force sums round differently in the two backends, and the layout
    # dynamics amplify that over many steps, so FA2 agreement is judged on
    # a single step.
    one = [fa2_step(g, start, params, b).positions for b in ("cython", "python")]
    fa2_agree = bool(np.allclose(*one, rtol=1e-12, atol=1e-12))

    print(f"{'workload':<36} {'cython s':>10} {'python s':>10} {'speedup':>9}  agree")
    for name, (fn, same) in workloads.items():
        tc, oc = best_of(args.repeat, lambda: fn("cython"))
        tp, op = best_of(args.repeat, lambda: fn("python"))
        agree = fa2_agree if same is None else same(oc, op)
        print(f"{name:<36} {tc:>10.4f} {tp:>10.4f} {tp / tc:>8.1f}x  {agree}")
    p = louvain(g)
    print(f"\nlouvain: {p.n_communities} communities, Q = {modularity(g, p):.4f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
