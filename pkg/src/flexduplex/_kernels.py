"""Compiled inner loops for the fixed-point solvers.

Array conventions shared by every kernel:

``a``       S x S, ``a[l, s] = c[l, s] * v~[l, s] * p[l]`` for the frozen reuse matrix
``sigma``   normalized noise per service
``p``       per-unit transmit power per service
``dscale``  ``d_s / (delta_t * delta_f * W)``
``G``       M x S nonnegative; the load constraint is ``max_m (G @ w)_m``
"""
import numpy as np
from numba import njit

_NAN = np.nan


@njit(cache=True)
def reuse_into(w, cell, is_dl, n_cells, out):
    S = w.size
    ul = np.zeros(n_cells)
    dl = np.zeros(n_cells)
    for s in range(S):
        if is_dl[s]:
            dl[cell[s]] += w[s]
        else:
            ul[cell[s]] += w[s]
    load = np.empty(S)
    for s in range(S):
        load[s] = dl[cell[s]] if is_dl[s] else ul[cell[s]]
    for s in range(S):
        ls = load[s]
        for l in range(S):
            if ls == 0.0:
                out[l, s] = 0.0
            elif is_dl[l] != is_dl[s]:
                out[l, s] = max(load[l] + ls - 1.0, 0.0) / ls
            else:
                out[l, s] = min(1.0, load[l] / ls)


@njit(cache=True)
def weighted_gains(c, vt, p, out):
    S = p.size
    for l in range(S):
        for s in range(S):
            out[l, s] = c[l, s] * vt[l, s] * p[l]


@njit(cache=True)
def f_into(w, a, sigma, p, dscale, out):
    S = w.size
    for s in range(S):
        interf = 0.0
        for l in range(S):
            interf += a[l, s] * w[l]
        out[s] = dscale[s] / np.log2(1.0 + p[s] / (interf + sigma[s]))


@njit(cache=True)
def g_of(x, G):
    best = 0.0
    for m in range(G.shape[0]):
        tot = 0.0
        for s in range(x.size):
            tot += G[m, s] * x[s]
        if tot > best:
            best = tot
    return best


@njit(cache=True)
def min_ratio(w, f):
    rho = np.inf
    for s in range(w.size):
        r = w[s] / f[s]
        if r < rho:
            rho = r
    return rho


@njit(cache=True)
def fixed_point(a, sigma, p, dscale, G, w, eps, cap, theta, record, tag0, tag1, trace):
    """Averaged normalized iteration towards ``w = T(w)``, ``T(w) = f(w) / g(f(w))``.

    Each update moves ``w`` to ``(1 - theta) w + theta T(w)`` rescaled onto
    ``g = 1``; ``theta = 1`` is the plain iteration. Stops as soon as
    ``|T(w) - w|_inf < eps`` and leaves that certified ``w`` in place.
    Returns ``(updates, converged)``. When ``record`` is set, rows
    ``(tag0, tag1, rho, step)`` are appended to ``trace``, starting with the
    entry point (step NaN).
    """
    S = w.size
    f = np.empty(S)
    t = np.empty(S)
    f_into(w, a, sigma, p, dscale, f)
    if record:
        trace.append((tag0, tag1, min_ratio(w, f), _NAN))
    it = 0
    while True:
        norm = g_of(f, G)
        resid = 0.0
        for s in range(S):
            t[s] = f[s] / norm
            d = abs(t[s] - w[s])
            if d > resid:
                resid = d
        if resid < eps:
            return it, True
        if it >= cap:
            return it, False
        for s in range(S):
            t[s] = (1.0 - theta) * w[s] + theta * t[s]
        norm = g_of(t, G)
        step = 0.0
        for s in range(S):
            new = t[s] / norm
            d = abs(new - w[s])
            if d > step:
                step = d
            w[s] = new
        it += 1
        f_into(w, a, sigma, p, dscale, f)
        if record:
            trace.append((tag0, tag1, min_ratio(w, f), step))


@njit(cache=True)
def safp(vt, sigma, p, dscale, G, cell, is_dl, n_cells, starts, eps, n_iter, cap, theta, record, trace):
    """Best fixed point over the rows of ``starts`` (one random start each).

    The outer map ``w -> solve(f_{C(w)})`` is deterministic, so once an outer
    iterate repeats an earlier one bit for bit the remaining iterations are
    a known cycle and are skipped. Skipping is disabled while recording.

    Returns ``(w_best, rho_best, best_index, converged_best)``.
    """
    S = p.size
    c = np.empty((S, S))
    a = np.empty((S, S))
    f = np.empty(S)
    hist = np.empty((_CYCLE_DEPTH, S))
    w_best = np.zeros(S)
    rho_best = 0.0
    best_index = -1
    conv_best = False
    for i in range(starts.shape[0]):
        w = starts[i].copy()
        reuse_into(w, cell, is_dl, n_cells, c)
        weighted_gains(c, vt, p, a)
        w_prev = w.copy()
        delta = np.inf
        inner_ok = True
        j = 0
        while j <= n_iter and delta >= eps:
            hist[j % _CYCLE_DEPTH] = w_prev
            _, ok = fixed_point(a, sigma, p, dscale, G, w, eps, cap, theta, record, i, j, trace)
            inner_ok = inner_ok and ok
            delta = 0.0
            for s in range(S):
                d = abs(w[s] - w_prev[s])
                if d > delta:
                    delta = d
                w_prev[s] = w[s]
            j += 1
            if not record and delta >= eps:
                period = _find_period(hist, w, j)
                if period > 0:
                    # iterates j - period .. j - 1 repeat until j passes n_iter
                    remaining = n_iter + 1 - j
                    if remaining > 0:
                        w[:] = hist[(j - period + remaining % period) % _CYCLE_DEPTH]
                        j += remaining
            reuse_into(w, cell, is_dl, n_cells, c)
            weighted_gains(c, vt, p, a)
        f_into(w, a, sigma, p, dscale, f)
        rho = min_ratio(w, f)
        if rho > rho_best:
            rho_best = rho
            w_best[:] = w
            best_index = i
            conv_best = inner_ok and delta < eps
    return w_best, rho_best, best_index, conv_best


_CYCLE_DEPTH = 8


@njit(cache=True)
def _find_period(hist, w, j):
    """Smallest ``P`` with ``w == hist[j - P]`` exactly, 0 if none is stored."""
    for period in range(1, min(j, _CYCLE_DEPTH) + 1):
        row = hist[(j - period) % _CYCLE_DEPTH]
        same = True
        for s in range(w.size):
            if row[s] != w[s]:
                same = False
                break
        if same:
            return period
    return 0
