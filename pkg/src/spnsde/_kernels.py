"""JIT-compiled inner loops shared by the Python-level API and the ensemble drivers.

Every function here takes plain arrays: ``inputs`` is the input matrix I
(n_p x n_t), ``inc`` the incidence matrix L, ``rates`` the per-transition
rates. The numba RNG (``np.random`` inside jitted code) is thread-local,
so each run reseeds it from its own derived seed.
"""
import math

import numpy as np
from numba import njit, prange

# relative slack for floors and bound tests on fluid coordinates
FLOOR_SLACK = 1e-9

STATUS_OK = 0
STATUS_FALLBACK = 1
STATUS_INFEASIBLE = -1

# layout of the per-run diagnostics vector, after the n_t jump counters
DIAG_SIGMA_CLAMPS = 0
DIAG_BOX_CLAMPS = 1
DIAG_FALLBACKS = 2
DIAG_STEPS = 3
N_EXTRA_DIAG = 4


@njit(cache=True)
def seed(s):
    np.random.seed(s)


@njit(cache=True)
def fluid_speeds(inputs, rates, x, out):
    n_p, n_t = inputs.shape
    for t in range(n_t):
        best = np.inf
        for p in range(n_p):
            if inputs[p, t] > 0:
                v = x[p] / inputs[p, t]
                if v < best:
                    best = v
        out[t] = rates[t] * best


@njit(cache=True)
def floor_intensities(inputs, rates, x, out):
    """Rates times floored enabling degree; valid for integer and fluid states."""
    n_p, n_t = inputs.shape
    for t in range(n_t):
        best = np.inf
        for p in range(n_p):
            if inputs[p, t] > 0:
                q = x[p] / inputs[p, t]
                v = math.floor(q + FLOOR_SLACK * max(1.0, abs(q)))
                if v < best:
                    best = v
        if best < 0.0:
            best = 0.0
        out[t] = rates[t] * best


@njit(cache=True)
def boundary_mask(x, lo, hi, eps, out):
    for p in range(x.shape[0]):
        out[p] = abs(x[p] - lo[p]) <= eps[p] or abs(x[p] - hi[p]) <= eps[p]


@njit(cache=True)
def theta(inc, at, out):
    n_p, n_t = inc.shape
    for t in range(n_t):
        s = 0
        for p in range(n_p):
            if at[p]:
                s += abs(inc[p, t])
        out[t] = s


@njit(cache=True)
def pick(weights, total, u):
    """Index i with probability weights[i] / total, driven by uniform ``u``."""
    target = u * total
    acc = 0.0
    last = -1
    for i in range(weights.shape[0]):
        if weights[i] > 0.0:
            acc += weights[i]
            last = i
            if target < acc:
                return i
    return last


@njit(cache=True)
def em_increment(x0, inc, sig, interior, h, xi, x, diag):
    """Add the Euler-Maruyama increment of the interior transitions to ``x``.

    Coefficients come from ``sig`` evaluated at the step start ``x0``.
    """
    n_p, n_t = inc.shape
    sqh = math.sqrt(h)
    for t in range(n_t):
        if not interior[t]:
            continue
        s = sig[t]
        if s < 0.0:
            s = 0.0
            diag[DIAG_SIGMA_CLAMPS] += 1
        d = s * h + math.sqrt(s) * sqh * xi[t]
        for p in range(n_p):
            if inc[p, t] != 0:
                x[p] += inc[p, t] * d


@njit(cache=True)
def _restore(x, nu, consts, dep, dep_inv):
    """Recompute dependent coordinates so that nu @ x == consts."""
    k = nu.shape[0]
    if k == 0:
        return
    for i in range(k):
        x[dep[i]] = 0.0
    r = np.empty(k)
    for i in range(k):
        s = 0.0
        for p in range(x.shape[0]):
            if nu[i, p] != 0.0:
                s += nu[i, p] * x[p]
        r[i] = consts[i] - s
    for i in range(k):
        v = 0.0
        for j in range(k):
            v += dep_inv[i, j] * r[j]
        x[dep[i]] = v


@njit(cache=True)
def _project_hyperplane_box(x, w, c, lo, hi):
    """Euclidean projection onto {lo <= x <= hi, w @ x == c}, support of w only."""
    lam_lo = np.inf
    lam_hi = -np.inf
    for p in range(x.shape[0]):
        if w[p] != 0.0:
            a = (x[p] - hi[p]) / w[p]
            b = (x[p] - lo[p]) / w[p]
            if a < lam_lo:
                lam_lo = a
            if b > lam_hi:
                lam_hi = b
    y = x.copy()
    for _ in range(200):
        lam = 0.5 * (lam_lo + lam_hi)
        g = 0.0
        for p in range(x.shape[0]):
            if w[p] != 0.0:
                g += w[p] * min(max(y[p] - lam * w[p], lo[p]), hi[p])
        if g > c:
            lam_lo = lam
        else:
            lam_hi = lam
        if lam_hi - lam_lo <= 1e-15 * max(1.0, abs(lam)):
            break
    lam = 0.5 * (lam_lo + lam_hi)
    for p in range(x.shape[0]):
        if w[p] != 0.0:
            x[p] = min(max(y[p] - lam * w[p], lo[p]), hi[p])


@njit(cache=True)
def normalize(x, lo, hi, eps, nu, consts, dep, dep_inv, diag):
    """Clamp into the box, then restore the semiflow invariants exactly.

    Returns STATUS_OK, STATUS_FALLBACK (projection was needed) or
    STATUS_INFEASIBLE.
    """
    n_p = x.shape[0]
    for p in range(n_p):
        if x[p] < lo[p]:
            x[p] = lo[p]
            diag[DIAG_BOX_CLAMPS] += 1
        elif x[p] > hi[p]:
            x[p] = hi[p]
            diag[DIAG_BOX_CLAMPS] += 1
    _restore(x, nu, consts, dep, dep_inv)
    ok = True
    for i in range(dep.shape[0]):
        d = dep[i]
        if x[d] < lo[d] - eps[d] or x[d] > hi[d] + eps[d]:
            ok = False
    if ok:
        for i in range(dep.shape[0]):
            d = dep[i]
            x[d] = min(max(x[d], lo[d]), hi[d])
        return STATUS_OK

    diag[DIAG_FALLBACKS] += 1
    k = nu.shape[0]
    for _ in range(100):
        for i in range(k):
            _project_hyperplane_box(x, nu[i], consts[i], lo, hi)
        worst = 0.0
        for i in range(k):
            s = 0.0
            for p in range(n_p):
                s += nu[i, p] * x[p]
            worst = max(worst, abs(s - consts[i]) / max(1.0, abs(consts[i])))
        if worst < 1e-13:
            break
    _restore(x, nu, consts, dep, dep_inv)
    for i in range(dep.shape[0]):
        d = dep[i]
        if x[d] < lo[d] - eps[d] or x[d] > hi[d] + eps[d]:
            return STATUS_INFEASIBLE
        x[d] = min(max(x[d], lo[d]), hi[d])
    return STATUS_FALLBACK


@njit(cache=True)
def sde_step(x, h_max, inputs, inc, rates, lo, hi, eps, nu, consts, dep, dep_inv,
             jumps_on, noise_on, diag):
    """One iteration of the boundary-aware Euler-Maruyama loop, in place.

    Returns (h, fired transition or -1, normalize status).
    """
    n_p, n_t = inc.shape
    at = np.empty(n_p, dtype=np.bool_)
    th = np.empty(n_t, dtype=np.int64)
    mu = np.zeros(n_t)
    sig = np.empty(n_t)
    interior = np.empty(n_t, dtype=np.bool_)
    xi = np.zeros(n_t)

    boundary_mask(x, lo, hi, eps, at)
    theta(inc, at, th)
    total = 0.0
    if jumps_on:
        floor_intensities(inputs, rates, x, mu)
    for t in range(n_t):
        interior[t] = th[t] == 0
        if interior[t]:
            mu[t] = 0.0
        total += mu[t]

    h = h_max
    fired = -1
    if total > 0.0:
        tau = np.random.exponential(1.0 / total)
        if tau < h_max:
            h = tau
            fired = pick(mu, total, np.random.random())

    fluid_speeds(inputs, rates, x, sig)
    if noise_on:
        for t in range(n_t):
            if interior[t]:
                xi[t] = np.random.standard_normal()
    x0 = x.copy()
    if fired >= 0:
        for p in range(n_p):
            x[p] += inc[p, fired]
        diag[fired] += 1
    em_increment(x0, inc, sig, interior, h, xi, x, diag[n_t:])
    status = normalize(x, lo, hi, eps, nu, consts, dep, dep_inv, diag[n_t:])
    diag[n_t + DIAG_STEPS] += 1
    return h, fired, status


@njit(cache=True)
def sde_run(x0, sample_times, step, inputs, inc, rates, lo, hi, eps, nu, consts, dep,
            dep_inv, jumps_on, noise_on, out, diag):
    """Integrate one run; out[k] receives the state at sample_times[k]."""
    x = x0.copy()
    u = 0.0
    k = 0
    n_s = sample_times.shape[0]
    while k < n_s and sample_times[k] <= 0.0:
        out[k] = x
        k += 1
    status = STATUS_OK
    while k < n_s:
        target = sample_times[k]
        remaining = target - u
        if remaining <= step * (1.0 + 1e-9):
            h_max = remaining
        else:
            h_max = step
        h, fired, st = sde_step(x, h_max, inputs, inc, rates, lo, hi, eps, nu, consts,
                                dep, dep_inv, jumps_on, noise_on, diag)
        if st == STATUS_INFEASIBLE:
            return st
        if st == STATUS_FALLBACK:
            status = st
        if fired < 0 and h == h_max and h_max == remaining:
            u = target
        else:
            u += h
        while k < n_s and sample_times[k] <= u:
            out[k] = x
            k += 1
    return status


@njit(parallel=True, cache=True)
def sde_ensemble(seeds, x0, sample_times, step, inputs, inc, rates, lo, hi, eps, nu,
                 consts, dep, dep_inv, jumps_on, noise_on, out, diag, status):
    for r in prange(seeds.shape[0]):
        np.random.seed(seeds[r])
        status[r] = sde_run(x0, sample_times, step, inputs, inc, rates, lo, hi, eps, nu,
                            consts, dep, dep_inv, jumps_on, noise_on, out[r], diag[r])


@njit(cache=True)
def ssa_step(m, inputs, rates, a):
    """Direct-method draw at marking ``m`` (integral floats): (holding time, transition).

    Returns (inf, -1) when every intensity is zero.
    """
    floor_intensities(inputs, rates, m, a)
    total = 0.0
    for t in range(a.shape[0]):
        total += a[t]
    if total <= 0.0:
        return np.inf, -1
    dt = np.random.exponential(1.0 / total)
    return dt, pick(a, total, np.random.random())


@njit(cache=True)
def ssa_run(m0, sample_times, inputs, inc, rates, out, counts):
    n_p, n_t = inc.shape
    m = m0.astype(np.float64)
    a = np.empty(n_t)
    u = 0.0
    k = 0
    n_s = sample_times.shape[0]
    t_final = sample_times[n_s - 1]
    while k < n_s:
        dt, j = ssa_step(m, inputs, rates, a)
        nxt = u + dt
        while k < n_s and sample_times[k] < nxt:
            for p in range(n_p):
                out[k, p] = int(m[p])
            k += 1
        if j < 0 or nxt > t_final:
            break
        for p in range(n_p):
            m[p] += inc[p, j]
        counts[j] += 1
        u = nxt


@njit(parallel=True, cache=True)
def ssa_ensemble(seeds, m0, sample_times, inputs, inc, rates, out, counts):
    for r in prange(seeds.shape[0]):
        np.random.seed(seeds[r])
        ssa_run(m0, sample_times, inputs, inc, rates, out[r], counts[r])
