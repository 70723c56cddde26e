"""Compiled inner loops for the per-layer neighbor graph and EdgeConv.

These are plain loops over contiguous arrays; NumPy's vectorized versions
need ``(B, n, k, M)`` temporaries and an argmax over a non-trailing axis,
which dominated training time.
"""

import numba
import numpy as np


NBINS = 64


@numba.njit(cache=True)
def _scratch(n, k):
    return (
        np.empty(NBINS + 1, dtype=np.int64),  # counts
        np.empty(n, dtype=np.int64),  # bins
        np.empty(n + 1, dtype=np.int64),  # low
        np.empty(n + 1, dtype=np.int64),  # mid
        np.empty(k + 1, dtype=np.float64),  # bd
        np.empty(k + 1, dtype=np.int64),  # bi
    )


@numba.njit(cache=True, inline="always")
def _row_range(row):
    """Smallest value and largest finite value of ``row``."""
    lo = np.inf
    hi = -np.inf
    for j in range(row.shape[0]):
        v = row[j]
        lo = min(lo, v)
        if v < np.inf:
            hi = max(hi, v)
    return lo, hi


@numba.njit(cache=True, inline="always")
def _select_row(row, k, lo, hi, out, counts, bins, low, mid, bd, bi):
    """Write the k smallest columns of ``row`` into ``out``; return the gap.

    Finite values are histogrammed over ``[lo, hi]`` (values outside are
    clamped into the end bins, so any range is correct and a tight one is
    fast); the bin holding the (k+1)-th value is located, everything below
    it is taken as-is and only that bin is ordered. Non-finite values share
    an overflow bin and rank last.
    """
    n = row.shape[0]
    keep = k + 1
    inf = np.inf
    top = NBINS - 1
    scale = NBINS / (hi - lo) if hi > lo else 0.0
    # bin index is monotone in the value, so equal values share a bin
    counts[:] = 0
    for j in range(n):
        v = row[j]
        if v < inf:
            f = (v - lo) * scale
            b = int(min(f, top)) if f >= 0 else 0
        else:
            b = NBINS
        bins[j] = b
        counts[b] += 1
    below = 0
    cut = NBINS
    for b in range(NBINS + 1):
        if below + counts[b] >= keep:
            cut = b
            break
        below += counts[b]
    need = keep - below
    # branch-free partition into "strictly below the cut bin" and "in it"
    m = 0
    c = 0
    for j in range(n):
        b = bins[j]
        low[m] = j
        m += b < cut
        mid[c] = j
        c += b == cut
    max_below = -inf
    for t in range(below):
        out[t] = low[t]
        max_below = max(max_below, row[low[t]])
    # bounded insertion; columns arrive ascending so strict < keeps ties stable
    size = 0
    for t in range(c):
        j = mid[t]
        v = row[j]
        if not v < inf:
            v = inf
        if size == need and not v < bd[need - 1]:
            continue
        pos = size if size < need else need - 1
        while pos > 0 and v < bd[pos - 1]:
            bd[pos] = bd[pos - 1]
            bi[pos] = bi[pos - 1]
            pos -= 1
        bd[pos] = v
        bi[pos] = j
        if size < need:
            size += 1
    for t in range(k - below):
        out[below + t] = bi[t]
    kth = bd[k - 1 - below] if k - 1 >= below else max_below
    kplus = bd[need - 1]
    return kplus - kth if kplus < inf else inf


@numba.njit(cache=True)
def select_k_smallest(dist, k):
    """Per row of ``dist`` (``(R, n)``), the columns of the ``k`` smallest entries.

    Membership is decided by (distance, column), so ties at the boundary go
    to the smaller column; non-finite entries rank last. The order of the
    ``k`` columns within a row is unspecified. Also returns the per-row gap
    between the (k+1)-th and k-th smallest distance (``inf`` if the (k+1)-th
    is not finite). Requires ``k < n``.
    """
    rows, n = dist.shape
    out = np.empty((rows, k), dtype=np.int64)
    gap = np.empty(rows, dtype=np.float64)
    counts, bins, low, mid, bd, bi = _scratch(n, k)
    for r in range(rows):
        lo, hi = _row_range(dist[r])
        gap[r] = _select_row(dist[r], k, lo, hi, out[r], counts, bins, low, mid, bd, bi)
    return out, gap


@numba.njit(cache=True)
def knn_batch(x, k):
    """Self-excluding kNN sets of every point of a ``(B, n, c)`` batch.

    Squared distances are formed row by row as ``|x_j|^2 - 2 x_i . x_j``
    (the row-constant ``|x_i|^2`` changes neither ranking nor gaps) and fed
    straight to the selection. Returns ``(idx (B, n, k), gap (B * n,))``.
    """
    nb, n, c = x.shape
    out = np.empty((nb, n, k), dtype=np.int64)
    gap = np.empty(nb * n, dtype=np.float64)
    counts, bins, low, mid, bd, bi = _scratch(n, k)
    xt = np.empty((c, n), dtype=x.dtype)
    sq = np.empty(n, dtype=x.dtype)
    row = np.empty(n, dtype=x.dtype)
    minus_two = x.dtype.type(-2)
    for b in range(nb):
        max_sq = 0.0
        for j in range(n):
            s = x.dtype.type(0)
            for m in range(c):
                xt[m, j] = x[b, j, m]
                s += x[b, j, m] * x[b, j, m]
            sq[j] = s
            max_sq = max(max_sq, s)
        for i in range(n):
            # |x_j|^2 - 2 x_i.x_j lies in [-|x_i|^2, max|x_j|^2 + 2 |x_i| max|x_j|]
            lo = -float(sq[i])
            hi = max_sq + 2.0 * np.sqrt(sq[i] * max_sq)
            for j in range(n):
                row[j] = sq[j]
            for m in range(c):
                w = minus_two * x[b, i, m]
                for j in range(n):
                    row[j] += w * xt[m, j]
            row[i] = np.inf
            gap[b * n + i] = _select_row(row, k, lo, hi, out[b, i], counts, bins, low, mid, bd, bi)
    return out, gap


@numba.njit(cache=True)
def edge_max(values, rows, center, slope):
    """Max over neighbors, center term and LeakyReLU in one pass.

    ``pre[b, i, m] = center[b, i, m] + max_j values[rows[b, i, j], m]``;
    returns ``(LeakyReLU(pre), arg, deriv)`` where ``arg`` is the first
    winning ``j`` and ``deriv`` the activation slope at ``pre`` (1 or
    ``slope``). Adding ``center`` after the max is exact since rounding is
    monotone.
    """
    nb, n, k = rows.shape
    m_dim = values.shape[1]
    out = np.empty((nb, n, m_dim), dtype=values.dtype)
    deriv = np.empty((nb, n, m_dim), dtype=values.dtype)
    arg = np.empty((nb, n, m_dim), dtype=np.int32)
    best = np.empty(m_dim, dtype=values.dtype)
    who = np.empty(m_dim, dtype=np.int32)
    one = values.dtype.type(1)
    alpha = values.dtype.type(slope)
    for b in range(nb):
        for i in range(n):
            r = rows[b, i, 0]
            for m in range(m_dim):
                best[m] = values[r, m]
                who[m] = 0
            for j in range(1, k):
                r = rows[b, i, j]
                for m in range(m_dim):
                    v = values[r, m]
                    win = v > best[m]
                    best[m] = v if win else best[m]
                    who[m] = j if win else who[m]
            for m in range(m_dim):
                p = best[m] + center[b, i, m]
                d = one if p > 0 else alpha
                out[b, i, m] = p * d
                deriv[b, i, m] = d
                arg[b, i, m] = who[m]
    return out, arg, deriv


@numba.njit(cache=True)
def edge_scatter(grad, deriv, rows, arg, n_rows):
    """Adjoint of :func:`edge_max`.

    Returns ``(g_pre, g_values)``: the gradient at the pre-activation and its
    routing to each winning row of ``values``.
    """
    nb, n, m_dim = grad.shape
    g_pre = np.empty_like(grad)
    g_values = np.zeros((n_rows, m_dim), dtype=grad.dtype)
    for b in range(nb):
        for i in range(n):
            for m in range(m_dim):
                g = grad[b, i, m] * deriv[b, i, m]
                g_pre[b, i, m] = g
                g_values[rows[b, i, arg[b, i, m]], m] += g
    return g_pre, g_values


@numba.njit(cache=True)
def bn_forward(x, mean, var, scale, shift, eps, batch_stats):
    """Batch normalization of ``x`` (``(R, C)``); returns ``(out, xhat, mean, var, inv_std)``.

    With ``batch_stats`` the given ``mean``/``var`` are ignored and the
    (biased) batch statistics are computed with float64 accumulators.
    """
    rows, ch = x.shape
    if batch_stats:
        acc = np.zeros(ch)
        for r in range(rows):
            for c in range(ch):
                acc[c] += x[r, c]
        mean = acc / rows
        acc[:] = 0.0
        for r in range(rows):
            for c in range(ch):
                d = x[r, c] - mean[c]
                acc[c] += d * d
        var = acc / rows
    inv_std = (1.0 / np.sqrt(var + eps)).astype(x.dtype)
    m = mean.astype(x.dtype)
    out = np.empty_like(x)
    xhat = np.empty_like(x)
    for r in range(rows):
        for c in range(ch):
            h = (x[r, c] - m[c]) * inv_std[c]
            xhat[r, c] = h
            out[r, c] = h * scale[c] + shift[c]
    return out, xhat, mean, var, inv_std


@numba.njit(cache=True)
def bn_backward(grad, xhat, scale, inv_std, batch_stats):
    """Adjoint of :func:`bn_forward`; returns ``(grad_x, grad_scale, grad_shift)``."""
    rows, ch = grad.shape
    sum_g = np.zeros(ch)
    sum_gh = np.zeros(ch)
    for r in range(rows):
        for c in range(ch):
            g = grad[r, c]
            sum_g[c] += g
            sum_gh[c] += g * xhat[r, c]
    gx = np.empty_like(grad)
    k = (scale * inv_std).astype(grad.dtype)
    if batch_stats:
        mean_g = (sum_g / rows).astype(grad.dtype)
        mean_gh = (sum_gh / rows).astype(grad.dtype)
        for r in range(rows):
            for c in range(ch):
                gx[r, c] = k[c] * (grad[r, c] - mean_g[c] - xhat[r, c] * mean_gh[c])
    else:
        for r in range(rows):
            for c in range(ch):
                gx[r, c] = k[c] * grad[r, c]
    return gx, sum_gh, sum_g
