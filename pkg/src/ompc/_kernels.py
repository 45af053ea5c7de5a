"""Hot inner loops, each with a numba-compiled and a pure-numpy implementation.

The numba versions are used when numba imports and ``OMPC_DISABLE_NUMBA`` is
unset (or ``0``).  Both implementations accumulate floating sums in the same
order, so they return identical answers on identical inputs; the test-suite
checks this directly.
"""

import math
import os

import numpy as np

_flag = os.environ.get("OMPC_DISABLE_NUMBA", "").strip().lower()
DISABLED_BY_ENV = _flag not in ("", "0", "false", "no")

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not DISABLED_BY_ENV

# numpy fallback processes masks in blocks of this many rows
CHUNK = 1 << 15


def _lex_less(a, b):
    # True iff the ascending index tuple of mask a sorts before that of mask b
    if a == b:
        return False
    d = a ^ b
    low = d & -d
    if a & low:
        # a holds the first differing index; b wins only if it has nothing beyond
        return (b & ~(low - 1)) != 0
    return (a & ~(low - 1)) == 0


# ---------------------------------------------------------------------------
# exhaustive subset argmin of the exponential cost


def _subset_costs_py(D, cover, F, log_rho, eps):
    s, m = D.shape
    n_masks = 1 << s
    base = np.exp(F * log_rho)
    costs = np.full(n_masks, np.inf)
    acc = np.zeros(m)
    for mask in range(1, n_masks):
        c = 0.0
        for i in range(m):
            acc[i] = 0.0
        for t in range(s):
            if (mask >> t) & 1:
                c += cover[t]
                for i in range(m):
                    acc[i] += D[t, i]
        if c < 1.0 - eps:
            continue
        ok = True
        for i in range(m):
            if acc[i] > 1.0 + eps:
                ok = False
                break
        if not ok:
            continue
        tau = 0.0
        for i in range(m):
            tau += base[i] * math.expm1(acc[i] * log_rho)
        costs[mask] = tau
    return costs


def subset_costs_numpy(D, cover, F, log_rho, eps):
    s, m = D.shape
    n_masks = 1 << s
    base = np.exp(F * log_rho)
    costs = np.full(n_masks, np.inf)
    shifts = np.arange(s, dtype=np.int64)
    for start in range(0, n_masks, CHUNK):
        masks = np.arange(start, min(start + CHUNK, n_masks), dtype=np.int64)
        bits = ((masks[:, None] >> shifts) & 1).astype(bool)
        c = np.zeros(masks.shape[0])
        acc = np.zeros((masks.shape[0], m))
        for t in range(s):
            sel = bits[:, t]
            c[sel] += cover[t]
            acc[sel] += D[t]
        tau = np.zeros(masks.shape[0])
        for i in range(m):
            tau += base[i] * np.expm1(acc[:, i] * log_rho)
        ok = (c >= 1.0 - eps) & np.all(acc <= 1.0 + eps, axis=1) & (masks > 0)
        costs[masks[ok]] = tau[ok]
    return costs


def pick_mask_numpy(costs, tie_rel):
    finite = np.isfinite(costs)
    if not finite.any():
        return -1, np.inf
    best = costs[finite].min()
    limit = best + tie_rel * max(1.0, abs(best))
    chosen = -1
    for mask in np.flatnonzero(costs <= limit):
        mask = int(mask)
        if chosen < 0 or _lex_less(mask, chosen):
            chosen = mask
    return chosen, float(costs[chosen])


# ---------------------------------------------------------------------------
# degree-bounded Steiner forest: exhaustive edge-subset search


def _find(parent, a):
    while parent[a] != a:
        parent[a] = parent[parent[a]]
        a = parent[a]
    return a


def steiner_weights_numpy(eu, ev, w, bounds, ds, dt, n):
    E = eu.shape[0]
    n_masks = 1 << E
    out = np.full(n_masks, np.inf)
    shifts = np.arange(E, dtype=np.int64)
    for start in range(0, n_masks, CHUNK):
        masks = np.arange(start, min(start + CHUNK, n_masks), dtype=np.int64)
        bits = ((masks[:, None] >> shifts) & 1).astype(bool)
        total = np.zeros(masks.shape[0])
        deg = np.zeros((masks.shape[0], n), dtype=np.int64)
        for e in range(E):
            sel = bits[:, e]
            total[sel] += w[e]
            deg[sel, eu[e]] += 1
            deg[sel, ev[e]] += 1
        ok = np.all(deg <= bounds[None, :], axis=1)
        lab = np.tile(np.arange(n, dtype=np.int64), (masks.shape[0], 1))
        for _ in range(n):
            changed = False
            for e in range(E):
                sel = bits[:, e]
                lo = np.minimum(lab[:, eu[e]], lab[:, ev[e]])
                upd = sel & ((lab[:, eu[e]] != lo) | (lab[:, ev[e]] != lo))
                if upd.any():
                    changed = True
                    lab[upd, eu[e]] = lo[upd]
                    lab[upd, ev[e]] = lo[upd]
            if not changed:
                break
        for j in range(ds.shape[0]):
            ok &= lab[:, ds[j]] == lab[:, dt[j]]
        out[masks[ok]] = total[ok]
    return out


def pick_min_weight(weights, tie_rel=1e-12):
    """Lowest weight, ties (relative ``tie_rel``) to the smallest mask integer."""
    finite = np.isfinite(weights)
    if not finite.any():
        return -1, np.inf
    best = weights[finite].min()
    limit = best + tie_rel * max(1.0, abs(best))
    mask = int(np.flatnonzero(weights <= limit)[0])
    return mask, float(weights[mask])


# ---------------------------------------------------------------------------
# mixed packing/covering brute force: min over x of max_i P_i x s.t. Cx >= 1


def _ompc_alpha_py(P, C, eps):
    N, m = P.shape
    q = C.shape[1]
    n_masks = 1 << N
    out = np.full(n_masks, np.inf)
    load = np.zeros(m)
    cov = np.zeros(q)
    for mask in range(n_masks):
        for i in range(m):
            load[i] = 0.0
        for j in range(q):
            cov[j] = 0.0
        for r in range(N):
            if (mask >> r) & 1:
                for i in range(m):
                    load[i] += P[r, i]
                for j in range(q):
                    cov[j] += C[r, j]
        ok = True
        for j in range(q):
            if cov[j] < 1.0 - eps:
                ok = False
                break
        if not ok:
            continue
        alpha = 0.0
        for i in range(m):
            if load[i] > alpha:
                alpha = load[i]
        out[mask] = alpha
    return out


def ompc_alpha_numpy(P, C, eps):
    N, m = P.shape
    q = C.shape[1]
    n_masks = 1 << N
    out = np.full(n_masks, np.inf)
    shifts = np.arange(N, dtype=np.int64)
    for start in range(0, n_masks, CHUNK):
        masks = np.arange(start, min(start + CHUNK, n_masks), dtype=np.int64)
        bits = ((masks[:, None] >> shifts) & 1).astype(bool)
        load = np.zeros((masks.shape[0], m))
        cov = np.zeros((masks.shape[0], q))
        for r in range(N):
            sel = bits[:, r]
            load[sel] += P[r]
            cov[sel] += C[r]
        ok = np.all(cov >= 1.0 - eps, axis=1)
        alpha = load.max(axis=1, initial=0.0)
        out[masks[ok]] = alpha[ok]
    return out


# ---------------------------------------------------------------------------
# inverse-CDF row sampling and per-edge load accumulation


def _sample_rows_py(row_ptr, cdf, draws):
    n_rows = row_ptr.shape[0] - 1
    out = np.empty(n_rows, dtype=np.int64)
    for r in range(n_rows):
        lo = row_ptr[r]
        hi = row_ptr[r + 1]
        pick = hi - 1
        for idx in range(lo, hi):
            if cdf[idx] >= draws[r]:
                pick = idx
                break
        out[r] = pick
    return out


def sample_rows_numpy(row_ptr, cdf, draws):
    n_rows = row_ptr.shape[0] - 1
    out = np.empty(n_rows, dtype=np.int64)
    for r in range(n_rows):
        lo, hi = row_ptr[r], row_ptr[r + 1]
        pos = int(np.searchsorted(cdf[lo:hi], draws[r], side="left"))
        out[r] = lo + min(pos, hi - lo - 1)
    return out


def _edge_loads_py(chosen, pair_ptr, pair_edges, n_edges):
    loads = np.zeros(n_edges, dtype=np.int64)
    for c in chosen:
        for k in range(pair_ptr[c], pair_ptr[c + 1]):
            loads[pair_edges[k]] += 1
    return loads


def edge_loads_numpy(chosen, pair_ptr, pair_edges, n_edges):
    if chosen.shape[0] == 0:
        return np.zeros(n_edges, dtype=np.int64)
    parts = [pair_edges[pair_ptr[c]:pair_ptr[c + 1]] for c in chosen]
    return np.bincount(np.concatenate(parts), minlength=n_edges).astype(np.int64)


if HAVE_NUMBA:
    _jit = numba.njit(cache=True)
    _lex_less_nb = _jit(_lex_less)

    @_jit
    def _pick_mask_nb(costs, tie_rel):
        best = np.inf
        for mask in range(costs.shape[0]):
            if costs[mask] < best:
                best = costs[mask]
        if best == np.inf:
            return -1, best
        limit = best + tie_rel * max(1.0, abs(best))
        chosen = -1
        for mask in range(costs.shape[0]):
            if costs[mask] <= limit:
                if chosen < 0 or _lex_less_nb(mask, chosen):
                    chosen = mask
        return chosen, costs[chosen]

    subset_costs_numba = _jit(_subset_costs_py)
    _find_nb = _jit(_find)

    @_jit
    def steiner_weights_numba(eu, ev, w, bounds, ds, dt, n):
        E = eu.shape[0]
        n_masks = 1 << E
        out = np.full(n_masks, np.inf)
        deg = np.zeros(n, dtype=np.int64)
        parent = np.zeros(n, dtype=np.int64)
        for mask in range(n_masks):
            for v in range(n):
                deg[v] = 0
                parent[v] = v
            total = 0.0
            ok = True
            for e in range(E):
                if (mask >> e) & 1:
                    total += w[e]
                    deg[eu[e]] += 1
                    deg[ev[e]] += 1
                    if deg[eu[e]] > bounds[eu[e]] or deg[ev[e]] > bounds[ev[e]]:
                        ok = False
                        break
                    ra = _find_nb(parent, eu[e])
                    rb = _find_nb(parent, ev[e])
                    if ra != rb:
                        parent[rb] = ra
            if not ok:
                continue
            for j in range(ds.shape[0]):
                if _find_nb(parent, ds[j]) != _find_nb(parent, dt[j]):
                    ok = False
                    break
            if ok:
                out[mask] = total
        return out

    ompc_alpha_numba = _jit(_ompc_alpha_py)
    sample_rows_numba = _jit(_sample_rows_py)
    edge_loads_numba = _jit(_edge_loads_py)

    def pick_mask_numba(costs, tie_rel):
        mask, cost = _pick_mask_nb(costs, tie_rel)
        return int(mask), float(cost)


def _backend(name):
    if USE_NUMBA:
        return globals()[name + "_numba"]
    return globals()[name + "_numpy"]


def subset_argmin(D, cover, F, log_rho, eps=1e-12, tie_rel=1e-12):
    """Exhaustive argmin of the exponential cost over all subsets of a support.

    ``D[t, i]`` is the (1/k-scaled) load support element ``t`` adds to packing
    row ``i`` and ``cover[t]`` its covering coefficient.  Returns ``(mask, tau)``
    with bit ``t`` of ``mask`` selecting element ``t``; ``mask == -1`` when no
    subset covers while keeping every row increment at most one.  Ties within
    ``tie_rel`` go to the lexicographically smallest index tuple.
    """
    D = np.ascontiguousarray(D, dtype=np.float64)
    cover = np.ascontiguousarray(cover, dtype=np.float64)
    F = np.ascontiguousarray(F, dtype=np.float64)
    costs = _backend("subset_costs")(D, cover, F, float(log_rho), float(eps))
    return _backend("pick_mask")(costs, float(tie_rel))


def steiner_weights(eu, ev, w, bounds, ds, dt, n):
    """Weight of every edge subset that respects degree bounds and connects all demands (inf otherwise)."""
    args = (
        np.ascontiguousarray(eu, dtype=np.int64),
        np.ascontiguousarray(ev, dtype=np.int64),
        np.ascontiguousarray(w, dtype=np.float64),
        np.ascontiguousarray(bounds, dtype=np.int64),
        np.ascontiguousarray(ds, dtype=np.int64),
        np.ascontiguousarray(dt, dtype=np.int64),
        int(n),
    )
    return _backend("steiner_weights")(*args)


def ompc_alpha(P, C, eps=1e-12):
    """Max packing load of every binary assignment satisfying all covering rows (inf otherwise)."""
    P = np.ascontiguousarray(P, dtype=np.float64)
    C = np.ascontiguousarray(C, dtype=np.float64)
    return _backend("ompc_alpha")(P, C, float(eps))


def sample_rows(row_ptr, cdf, draws):
    return _backend("sample_rows")(
        np.ascontiguousarray(row_ptr, dtype=np.int64),
        np.ascontiguousarray(cdf, dtype=np.float64),
        np.ascontiguousarray(draws, dtype=np.float64),
    )


def edge_loads(chosen, pair_ptr, pair_edges, n_edges):
    return _backend("edge_loads")(
        np.ascontiguousarray(chosen, dtype=np.int64),
        np.ascontiguousarray(pair_ptr, dtype=np.int64),
        np.ascontiguousarray(pair_edges, dtype=np.int64),
        int(n_edges),
    )


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
