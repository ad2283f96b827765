"""Pure Python / numpy implementations of the hot loops.

Used when the compiled ``_ckernels`` extension is unavailable (or disabled with
``COOPETITION_PURE=1``). Hamming and Louvain kernels perform the same floating
point operations in the same order as the compiled versions, so both backends
produce bit-identical results. The layout force kernel is vectorised and agrees
with the compiled one to rounding only.
"""

from __future__ import annotations

import numpy as np

COINCIDENT_EPS = 1e-6

_M64 = (1 << 64) - 1


def condensed_offset(n: int, i: int) -> int:
    """Index of pair (i, i+1) in the row-major upper-triangle ordering."""
    return i * n - i * (i + 1) // 2


def hamming_block(X: np.ndarray, i0: int, i1: int, out: np.ndarray) -> None:
    """Plain Hamming distances for rows ``i0 <= i < i1`` against all ``j > i``."""
    n = X.shape[0]
    Xi = X.astype(np.int64)
    counts = Xi.sum(axis=1)
    for i in range(i0, min(i1, n - 1)):
        common = Xi[i + 1:] @ Xi[i]
        off = condensed_offset(n, i)
        out[off:off + n - i - 1] = counts[i] + counts[i + 1:] - 2 * common


def weighted_hamming_block(X: np.ndarray, w: np.ndarray, i0: int, i1: int,
                           out: np.ndarray) -> None:
    n = X.shape[0]
    for i in range(i0, min(i1, n - 1)):
        vals = np.where(X[i + 1:] != X[i], w, 0.0)
        off = condensed_offset(n, i)
        if vals.shape[1] == 0:
            out[off:off + n - i - 1] = 0.0
        else:
            # cumsum is a strict left-to-right sum, matching the compiled loop
            out[off:off + n - i - 1] = np.cumsum(vals, axis=1)[:, -1]


def _mix64(z: int) -> int:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & _M64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & _M64
    return z ^ (z >> 31)


def coincident_angle(seed: int, i: int, j: int) -> float:
    """Deterministic direction (radians) for separating coincident nodes i < j."""
    h = _mix64((seed * 0x9E3779B97F4A7C15 + i * 0xD1B54A32D192ED03 + j) & _M64)
    return (h >> 11) * (1.0 / 9007199254740992.0) * 6.283185307179586


def fa2_forces(pos: np.ndarray, mass: np.ndarray, src: np.ndarray, dst: np.ndarray,
               attraction: np.ndarray, k_repulsion: float, gravity: float,
               seed: int) -> tuple[np.ndarray, int, int]:
    """Net force per node. Returns ``(forces, bad_i, bad_j)``; bad_i < 0 when all finite.

    Repulsion k*m_i*m_j/d, linear attraction ``attraction[e] * d`` per edge and
    gravity ``gravity * m_i`` toward the origin.
    """
    n = pos.shape[0]
    forces = np.zeros((n, 2))
    if n == 0:
        return forces, -1, -1
    with np.errstate(all="ignore"):
        dx = pos[:, 0][:, None] - pos[:, 0][None, :]
        dy = pos[:, 1][:, None] - pos[:, 1][None, :]
        d2 = dx * dx + dy * dy
        d = np.sqrt(d2)
        np.fill_diagonal(d, np.inf)
        close = d < COINCIDENT_EPS
        mm = k_repulsion * np.outer(mass, mass)
        # repulsion along unit vector (dx, dy)/d with magnitude mm/d -> mm*(dx,dy)/d^2
        factor = mm / np.where(close, 1.0, d2)
        np.fill_diagonal(factor, 0.0)
        fx = factor * dx
        fy = factor * dy
        if close.any():
            ii, jj = np.nonzero(np.triu(close, 1))
            for a, b in zip(ii.tolist(), jj.tolist()):
                theta = coincident_angle(seed, a, b)
                ux, uy = np.cos(theta), np.sin(theta)
                fx[a, b] = mm[a, b] * ux
                fy[a, b] = mm[a, b] * uy
                fx[b, a] = -fx[a, b]
                fy[b, a] = -fy[a, b]
        forces[:, 0] = fx.sum(axis=1)
        forces[:, 1] = fy.sum(axis=1)
        bad = ~(np.isfinite(fx) & np.isfinite(fy))
        if bad.any():
            a, b = np.argwhere(bad)[0]
            return forces, int(min(a, b)), int(max(a, b))

        if src.size:
            ex = pos[dst, 0] - pos[src, 0]
            ey = pos[dst, 1] - pos[src, 1]
            ax = attraction * ex
            ay = attraction * ey
            bad_e = ~(np.isfinite(ax) & np.isfinite(ay))
            if bad_e.any():
                e = int(np.argmax(bad_e))
                return forces, int(src[e]), int(dst[e])
            np.add.at(forces[:, 0], src, ax)
            np.add.at(forces[:, 1], src, ay)
            np.add.at(forces[:, 0], dst, -ax)
            np.add.at(forces[:, 1], dst, -ay)

        if gravity > 0.0:
            r = np.sqrt(pos[:, 0] ** 2 + pos[:, 1] ** 2)
            g = np.where(r > 0.0, gravity * mass / np.where(r > 0.0, r, 1.0), 0.0)
            forces[:, 0] -= g * pos[:, 0]
            forces[:, 1] -= g * pos[:, 1]

    if not np.isfinite(forces).all():
        i = int(np.argwhere(~np.isfinite(forces))[0, 0])
        return forces, i, i
    return forces, -1, -1


def louvain_sweeps(indptr: np.ndarray, indices: np.ndarray, weights: np.ndarray,
                   k: np.ndarray, comm: np.ndarray, tot: np.ndarray, order: np.ndarray,
                   m2: float, min_gain: float, eps: float, record: bool):
    """Local-move phase. Mutates ``comm`` and ``tot`` in place.

    Returns ``(moved, log)`` where ``log`` is a list of
    ``(node, from, to, delta_q)`` tuples when ``record`` is set, else None.
    """
    indptr_l = indptr.tolist()
    indices_l = indices.tolist()
    weights_l = weights.tolist()
    k_l = k.tolist()
    comm_l = comm.tolist()
    tot_l = tot.tolist()
    order_l = order.tolist()
    neigh_w = [0.0] * len(tot_l)
    log = [] if record else None
    threshold = max(min_gain, eps)
    moved_total = 0
    while True:
        moved = 0
        for i in order_l:
            ki = k_l[i]
            if ki == 0.0:
                continue
            ci = comm_l[i]
            touched = []
            for p in range(indptr_l[i], indptr_l[i + 1]):
                j = indices_l[p]
                if j == i:
                    continue
                c = comm_l[j]
                if neigh_w[c] == 0.0:  # weights are > 0, so zero means unseen
                    touched.append(c)
                neigh_w[c] += weights_l[p]
            tot_l[ci] -= ki
            gain_ci = neigh_w[ci] - tot_l[ci] * ki / m2
            best = ci
            best_gain = gain_ci
            for c in touched:
                g = neigh_w[c] - tot_l[c] * ki / m2
                if g > best_gain or (g == best_gain and c < best):
                    best = c
                    best_gain = g
            for c in touched:
                neigh_w[c] = 0.0
            dq = (best_gain - gain_ci) * 2.0 / m2
            if best != ci and dq > threshold:
                tot_l[best] += ki
                comm_l[i] = best
                moved += 1
                if record:
                    log.append((i, ci, best, dq))
            else:
                tot_l[ci] += ki
        moved_total += moved
        if moved == 0:
            break
    comm[:] = comm_l
    tot[:] = tot_l
    return moved_total, log
