# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twin of ``_pykernels``; same functions, arguments and results."""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs, log, log2, sqrt, INFINITY

cnp.import_array()

cdef double LN2 = log(2.0)

cdef double NEWTON_CLIP = 3.0
cdef double NEWTON_SETTLE = 1e-6
cdef double MERIT_FLOOR = 1e-14
cdef int STALL_SWEEPS = 10
cdef int SEARCH_ITERS = 60
cdef int STAGNANT_ITERS = 50
# (K + 1)-sized scratch blocks ahead of the Newton matrix
cdef Py_ssize_t SCRATCH_BLOCKS = 11
cdef int NBACK = 6
cdef double BACKTRACK[6]
BACKTRACK[:] = [1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125]

CONVERGED = 0
ITERATION_CAP = 1
UNATTAINABLE = 2


cdef void _chi(const double[:] lam, const double[:] omega, const Py_ssize_t[:] order,
               int variant, double[:] out) noexcept nogil:
    cdef Py_ssize_t K = order.shape[0], pos, k
    cdef double acc = 0.0
    if variant == 0:
        for pos in range(K - 1, -1, -1):
            k = order[pos]
            out[k] = lam[k] - acc
            acc += (omega[k] - 1.0) * lam[k]
    else:
        for pos in range(K):
            k = order[pos]
            out[k] = lam[k] - acc
            acc += (omega[k] - 1.0) * lam[k]


def chi_values(lam, omega, order, int variant):
    cdef double[:] lam_v = np.ascontiguousarray(lam, dtype=np.float64)
    cdef double[:] om_v = np.ascontiguousarray(omega, dtype=np.float64)
    cdef Py_ssize_t[:] ord_v = np.ascontiguousarray(order, dtype=np.intp)
    out = np.empty(ord_v.shape[0])
    _chi(lam_v, om_v, ord_v, variant, out)
    return out


cdef double _water_level(const double* d, Py_ssize_t K, double bandwidth,
                         double target) noexcept nogil:
    cdef Py_ssize_t k
    cdef double t = bandwidth / (LN2 * target), f, df, den, step
    cdef int i
    for i in range(200):
        f = -target
        df = 0.0
        for k in range(K):
            den = d[k] + LN2 * t
            f += bandwidth / den
            df -= bandwidth * LN2 / (den * den)
        step = f / df
        t -= step
        if f <= 1e-15 * target or fabs(step) <= 1e-16 * t:
            break
    return t


# As in the Python twin, the fixed point works with mu = q + theta.

cdef bint _jacobi(const double* p, Py_ssize_t K, double mu, double* mu_out,
                  const double[:] chi, const double[:] n_beta, double bandwidth,
                  double target, double floor, double* w, double* den,
                  double* out) noexcept nogil:
    cdef Py_ssize_t k
    cdef double total = 0.0, W = 0.0, amin, t
    for k in range(K):
        total += p[k]
    for k in range(K):
        w[k] = bandwidth / (total - p[k] + n_beta[k])
        W += w[k]
    if target > 0:
        amin = INFINITY
        for k in range(K):
            den[k] = (W - w[k]) - LN2 * chi[k]
            if den[k] < amin:
                amin = den[k]
        for k in range(K):
            den[k] -= amin
        t = _water_level(den, K, bandwidth, target)
        mu = t - amin / LN2
        for k in range(K):
            den[k] += LN2 * t
    else:
        for k in range(K):
            den[k] = LN2 * (mu - chi[k]) + (W - w[k])
            if den[k] <= 0.0:
                return 0
    for k in range(K):
        out[k] = bandwidth / den[k]
        if out[k] < floor:
            out[k] = floor
    mu_out[0] = mu
    return 1


cdef bint _residual(const double* p, Py_ssize_t K, double mu, const double[:] chi,
                    const double[:] n_beta, double bandwidth, double* I, double* den,
                    double* r) noexcept nogil:
    cdef Py_ssize_t k
    cdef double total = 0.0, W = 0.0
    for k in range(K):
        total += p[k]
    for k in range(K):
        I[k] = total - p[k] + n_beta[k]
        W += bandwidth / I[k]
    for k in range(K):
        den[k] = LN2 * (mu - chi[k]) + (W - bandwidth / I[k])
        if den[k] <= 0.0:
            return 0
        r[k] = log(p[k] * den[k] / bandwidth)
    return 1


cdef double _merit(const double* p, Py_ssize_t K, double mu, const double[:] chi,
                   const double[:] n_beta, double bandwidth, double* I, double* den,
                   double* r) noexcept nogil:
    cdef Py_ssize_t k
    cdef double m = 0.0
    if not _residual(p, K, mu, chi, n_beta, bandwidth, I, den, r):
        return INFINITY
    for k in range(K):
        if fabs(r[k]) > m:
            m = fabs(r[k])
    return m


cdef bint _solve(double* A, double* x, Py_ssize_t n) noexcept nogil:
    """Gaussian elimination with partial pivoting; A (row major) is destroyed."""
    cdef Py_ssize_t i, j, c, piv
    cdef double big, f, tmp
    for c in range(n):
        piv = c
        big = fabs(A[c * n + c])
        for i in range(c + 1, n):
            if fabs(A[i * n + c]) > big:
                big = fabs(A[i * n + c])
                piv = i
        if big == 0.0:
            return 0
        if piv != c:
            for j in range(n):
                tmp = A[c * n + j]
                A[c * n + j] = A[piv * n + j]
                A[piv * n + j] = tmp
            tmp = x[c]
            x[c] = x[piv]
            x[piv] = tmp
        for i in range(c + 1, n):
            f = A[i * n + c] / A[c * n + c]
            if f != 0.0:
                for j in range(c, n):
                    A[i * n + j] -= f * A[c * n + j]
                x[i] -= f * x[c]
    for i in range(n - 1, -1, -1):
        f = x[i]
        for j in range(i + 1, n):
            f -= A[i * n + j] * x[j]
        x[i] = f / A[i * n + i]
    return 1


cdef bint _newton(const double* p, Py_ssize_t K, double mu, const double[:] chi,
                  const double[:] n_beta, double bandwidth, double target, double* I,
                  double* den, double* r, double* u, double* A, double* step) noexcept nogil:
    """Newton step on ``log(p_k den_k / B) = 0`` in log-power coordinates,
    with mu as an extra unknown in equality mode. Result in ``step``."""
    cdef Py_ssize_t k, m, n = K + 1 if target > 0 else K
    cdef double T = 0.0, total = 0.0, d, big
    if not _residual(p, K, mu, chi, n_beta, bandwidth, I, den, r):
        return 0
    for k in range(K):
        u[k] = bandwidth / (I[k] * I[k])
        T += u[k]
        total += p[k]
    for k in range(K):
        for m in range(K):
            if m == k:
                d = -(T - u[k])
            else:
                d = -(T - u[k] - u[m])
            A[k * n + m] = d * p[m] / den[k]
        A[k * n + k] += 1.0
        step[k] = -r[k]
    if target > 0:
        for k in range(K):
            A[k * n + K] = LN2 / den[k]
            A[K * n + k] = p[k] / total
        A[K * n + K] = 0.0
        step[K] = -log(total / target)
    if not _solve(A, step, n):
        return 0
    for k in range(n):
        if not (fabs(step[k]) < INFINITY):
            return 0
    big = 0.0
    for k in range(K):
        if fabs(step[k]) > big:
            big = fabs(step[k])
    if big > NEWTON_CLIP:
        for k in range(n):
            step[k] *= NEWTON_CLIP / big
    if target <= 0:
        step[K] = 0.0
    return 1


cdef int _sweeps(double* p, double* mu, const double[:] chi, const double[:] n_beta,
                 double bandwidth, Py_ssize_t K, double target, double tol, int max_iters,
                 double floor, double* buf, int* sweeps_out) noexcept nogil:
    """In place on ``p`` and ``mu``; see ``_sweeps`` in the Python twin."""
    cdef double* w = buf
    cdef double* den = buf + (K + 1)
    cdef double* nxt = buf + 2 * (K + 1)
    cdef double* cand = buf + 3 * (K + 1)
    cdef double* I = buf + 4 * (K + 1)
    cdef double* r = buf + 5 * (K + 1)
    cdef double* u = buf + 6 * (K + 1)
    cdef double* step = buf + 7 * (K + 1)
    cdef double* A = buf + SCRATCH_BLOCKS * (K + 1)
    cdef Py_ssize_t k, j
    cdef double nmu, cmu, gap, best, alpha, ctot, m, big, settle
    cdef double ref = INFINITY
    cdef bint ok, have_step
    cdef int sweep, since = 0
    settle = tol if tol > NEWTON_SETTLE else NEWTON_SETTLE
    sweeps_out[0] = 0
    for sweep in range(1, max_iters + 1):
        sweeps_out[0] = sweep
        if not _jacobi(p, K, mu[0], &nmu, chi, n_beta, bandwidth, target, floor, w, den, nxt):
            return 2
        have_step = _newton(p, K, mu[0], chi, n_beta, bandwidth, target, I, den, r, u, A, step)
        gap = 0.0
        for k in range(K):
            if fabs(nxt[k] - p[k]) / nxt[k] > gap:
                gap = fabs(nxt[k] - p[k]) / nxt[k]
        if gap <= tol:
            big = 0.0
            if have_step:
                for k in range(K):
                    if fabs(step[k]) > big:
                        big = fabs(step[k])
            if big <= settle:
                for k in range(K):
                    p[k] = nxt[k]
                mu[0] = nmu
                return 0
        best = _merit(nxt, K, nmu, chi, n_beta, bandwidth, I, den, r)
        if have_step:
            for j in range(NBACK):
                alpha = BACKTRACK[j]
                ctot = 0.0
                for k in range(K):
                    cand[k] = p[k] * exp(alpha * step[k])
                    ctot += cand[k]
                if target > 0:
                    for k in range(K):
                        cand[k] *= target / ctot
                cmu = mu[0] + alpha * step[K]
                m = _merit(cand, K, cmu, chi, n_beta, bandwidth, I, den, r)
                ok = 1
                for k in range(K):
                    if not cand[k] > floor:
                        ok = 0
                if ok and (m < best or m <= MERIT_FLOOR):
                    for k in range(K):
                        nxt[k] = cand[k]
                    nmu = cmu
                    best = m
                    break
        for k in range(K):
            p[k] = nxt[k]
        mu[0] = nmu
        if best <= 0.5 * ref or best <= tol:
            ref = best
            since = 0
        else:
            since += 1
            if since >= STALL_SWEEPS:
                return 3
    return 1


cdef int _search_solve(double x, const double* start, double cmax, double* mu_out,
                       double* f_out, double* out, const double[:] chi,
                       const double[:] n_beta, double bandwidth, Py_ssize_t K,
                       double target, double tol, int max_iters, double floor,
                       double* buf, int* used) noexcept nogil:
    cdef Py_ssize_t k
    cdef int n = 0, st
    cdef double total = 0.0
    mu_out[0] = cmax + exp(x)
    for k in range(K):
        out[k] = start[k]
    st = _sweeps(out, mu_out, chi, n_beta, bandwidth, K, -1.0, tol, max_iters, floor,
                 buf, &n)
    used[0] += n
    if st != 0:
        return 0
    for k in range(K):
        total += out[k]
    f_out[0] = log(total / target)
    return 1


cdef int _price_search(double* p, double* mu, const double[:] chi, const double[:] n_beta,
                       double bandwidth, Py_ssize_t K, double target, double tol,
                       int max_iters, double floor, double* buf, int* used) noexcept nogil:
    """Equality mode by a search on mu; see ``_price_search`` in the Python twin.
    On success ``p`` and ``mu`` are overwritten and 0 is returned."""
    cdef double* pa = buf + 8 * (K + 1)
    cdef double* pb = buf + 9 * (K + 1)
    cdef double* out = buf + 10 * (K + 1)
    cdef Py_ssize_t k
    cdef double cmax = -INFINITY, x, c0, step, a, fa, b, fb, f, m, total, lim
    cdef int i, side = 0
    cdef bint have_b = 0
    for k in range(K):
        if chi[k] > cmax:
            cmax = chi[k]
    c0 = mu[0] - cmax
    if c0 > 0:
        x = log(c0)
    else:
        x = log(bandwidth * K / (LN2 * target))
    if not _search_solve(x, p, cmax, &m, &f, pa, chi, n_beta, bandwidth, K, target, tol,
                         max_iters, floor, buf, used):
        return 1
    step = log(4.0) if f > 0 else -log(4.0)
    a = x
    fa = f
    b = 0.0
    fb = 0.0
    for i in range(SEARCH_ITERS):
        x = a + step
        if not _search_solve(x, pa, cmax, &m, &f, out, chi, n_beta, bandwidth, K, target,
                             tol, max_iters, floor, buf, used):
            return 1
        if (f > 0) == (fa > 0):
            a = x
            fa = f
            for k in range(K):
                pa[k] = out[k]
            step *= 2.0
        else:
            b = x
            fb = f
            for k in range(K):
                pb[k] = out[k]
            have_b = 1
            break
    if not have_b:
        return 1
    lim = tol if tol > NEWTON_SETTLE else NEWTON_SETTLE
    for i in range(SEARCH_ITERS):
        x = (a * fb - b * fa) / (fb - fa)
        if not _search_solve(x, pa if fabs(x - a) < fabs(x - b) else pb, cmax, &m, &f, out,
                             chi, n_beta, bandwidth, K, target, tol, max_iters, floor, buf,
                             used):
            return 1
        if fabs(f) <= lim or x == a or x == b:
            total = 0.0
            for k in range(K):
                total += out[k]
            for k in range(K):
                p[k] = out[k] * (target / total)
            mu[0] = m
            return 0
        if (f > 0) == (fa > 0):
            a = x
            fa = f
            for k in range(K):
                pa[k] = out[k]
            if side == -1:
                fb *= 0.5
            side = -1
        else:
            b = x
            fb = f
            for k in range(K):
                pb[k] = out[k]
            if side == 1:
                fa *= 0.5
            side = 1
    return 1


cdef int _fixed_point(double q, double* theta, const double[:] chi, const double[:] n_beta,
                      double bandwidth, double* p, Py_ssize_t K, double target, double tol,
                      int max_iters, double floor, double* buf,
                      int* sweeps_out) noexcept nogil:
    """In place on ``p`` and ``theta``; ``buf`` holds ``_buf_size(K)`` doubles of
    scratch. Returns a status code."""
    cdef Py_ssize_t k
    cdef double mu = q + theta[0]
    cdef int st, used = 0
    sweeps_out[0] = 0
    if target <= 0:
        # see _unbounded in the Python twin
        for k in range(K):
            if mu - chi[k] <= 0.0:
                return 2
        st = _sweeps(p, &mu, chi, n_beta, bandwidth, K, target, tol, max_iters, floor, buf,
                     sweeps_out)
    else:
        st = _sweeps(p, &mu, chi, n_beta, bandwidth, K, target, tol, max_iters, floor, buf,
                     sweeps_out)
        if st == 3:
            st = _price_search(p, &mu, chi, n_beta, bandwidth, K, target, tol, max_iters,
                               floor, buf, &used)
            sweeps_out[0] += used
        theta[0] = mu - q
    if st == 3:
        st = 1
    return st


cdef Py_ssize_t _buf_size(Py_ssize_t K) noexcept nogil:
    return (K + 1) * (K + 1) + SCRATCH_BLOCKS * (K + 1)


def fixed_point(double q, double theta, chi, n_beta, double bandwidth, p0,
                double target_total, double tol, int max_iters, double floor):
    cdef double[:] chi_v = np.ascontiguousarray(chi, dtype=np.float64)
    cdef double[:] nb_v = np.ascontiguousarray(n_beta, dtype=np.float64)
    p = np.array(p0, dtype=np.float64)
    cdef double[:] p_v = p
    cdef Py_ssize_t K = p_v.shape[0]
    cdef double[:] buf = np.empty(_buf_size(K))
    cdef int sweeps = 0, status
    if max_iters < 1:
        return p, theta, 0, 1
    status = _fixed_point(q, &theta, chi_v, nb_v, bandwidth, &p_v[0], K, target_total, tol,
                          max_iters, floor, &buf[0], &sweeps)
    return p, theta, sweeps, status


cdef void _thresholds(const double[:] p, const Py_ssize_t[:] order, const double[:] omega,
                      const double[:] n_gain, double[:] out) noexcept nogil:
    cdef Py_ssize_t K = order.shape[0], pos, k
    cdef double acc = 0.0
    for pos in range(K):
        k = order[pos]
        out[k] = (omega[k] - 1.0) * (acc + n_gain[k])
        acc += p[k]


cdef double _build(const double[:] s, double t, const Py_ssize_t[:] order,
                   const double[:] omega, const double[:] n_gain, double floor,
                   double[:] out) noexcept nogil:
    cdef Py_ssize_t K = order.shape[0], pos, k
    cdef double acc = 0.0, x
    for pos in range(K):
        k = order[pos]
        x = (omega[k] - 1.0) * (acc + n_gain[k]) + t * s[k]
        if x < floor:
            x = floor
        out[k] = x
        acc += x
    return acc


cdef void _project(const double[:] p, const Py_ssize_t[:] order, const double[:] omega,
                   const double[:] n_gain, double budget, bint equality, double floor,
                   double[:] s, double[:] out) noexcept nogil:
    cdef Py_ssize_t K = order.shape[0], k
    cdef double total0, total1, t, lo, hi, mid, tot
    cdef int i
    _thresholds(p, order, omega, n_gain, s)
    for k in range(K):
        s[k] = p[k] - s[k]
        if s[k] < 0.0:
            s[k] = 0.0
    total0 = _build(s, 1.0, order, omega, n_gain, floor, out)
    total1 = total0
    total0 = _build(s, 0.0, order, omega, n_gain, floor, out)
    if total0 >= budget:
        return
    if not equality and total1 <= budget:
        _build(s, 1.0, order, omega, n_gain, floor, out)
        return
    if total1 - total0 <= 0.0:
        if equality:
            out[order[K - 1]] += budget - total0
        return
    t = (budget - total0) / (total1 - total0)
    tot = _build(s, t, order, omega, n_gain, floor, out)
    if fabs(tot - budget) <= 1e-12 * budget:
        return
    lo = 0.0
    hi = t if t > 1.0 else 1.0
    while _build(s, hi, order, omega, n_gain, floor, out) < budget:
        hi *= 2.0
    for i in range(200):
        mid = 0.5 * (lo + hi)
        if _build(s, mid, order, omega, n_gain, floor, out) > budget:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-15 * hi:
            break
    _build(s, lo, order, omega, n_gain, floor, out)


def project(p, order, omega, n_gain, double budget, bint equality, double floor):
    cdef double[:] p_v = np.ascontiguousarray(p, dtype=np.float64)
    cdef Py_ssize_t[:] ord_v = np.ascontiguousarray(order, dtype=np.intp)
    cdef double[:] om_v = np.ascontiguousarray(omega, dtype=np.float64)
    cdef double[:] ng_v = np.ascontiguousarray(n_gain, dtype=np.float64)
    cdef Py_ssize_t K = ord_v.shape[0]
    out = np.empty(K)
    cdef double[:] s = np.empty(K)
    _project(p_v, ord_v, om_v, ng_v, budget, equality, floor, s, out)
    return out


cdef double _lb_sum_rate(const double[:] p, const double[:] n_beta, double num_antennas,
                         double bandwidth) noexcept nogil:
    cdef Py_ssize_t K = p.shape[0], k
    cdef double total = 0.0, acc = 0.0
    for k in range(K):
        if p[k] <= 0.0:
            return -INFINITY
        total += p[k]
    for k in range(K):
        acc += log2(num_antennas * p[k] / (total - p[k] + n_beta[k]))
    return bandwidth * acc


def lb_sum_rate(p, n_beta, double num_antennas, double bandwidth):
    cdef double[:] p_v = np.ascontiguousarray(p, dtype=np.float64)
    cdef double[:] nb_v = np.ascontiguousarray(n_beta, dtype=np.float64)
    return _lb_sum_rate(p_v, nb_v, num_antennas, bandwidth)


def multiplier_loop(double q, double theta, lam, p0, order, omega, n_gain, n_beta,
                    double num_antennas, double circuit_w, double bandwidth, double budget,
                    bint equality, double step_theta, double step_lambda, int max_mult,
                    double mult_tol, double fp_tol, int max_inner, double floor, int variant):
    cdef Py_ssize_t[:] ord_v = np.ascontiguousarray(order, dtype=np.intp)
    cdef double[:] om_v = np.ascontiguousarray(omega, dtype=np.float64)
    cdef double[:] ng_v = np.ascontiguousarray(n_gain, dtype=np.float64)
    cdef double[:] nb_v = np.ascontiguousarray(n_beta, dtype=np.float64)
    cdef Py_ssize_t K = ord_v.shape[0], k
    p_arr = np.array(p0, dtype=np.float64)
    lam_arr = np.array(lam, dtype=np.float64)
    best_arr = np.empty(K)
    cdef double[:] p = p_arr
    cdef double[:] lam_v = lam_arr
    cdef double[:] best = best_arr
    cdef double[:] lam_prev = lam_arr.copy()
    cdef double[:] work = np.empty(K)
    cdef double[:] cand = np.empty(K)
    cdef double[:] chi = np.empty(K)
    cdef double[:] buf = np.empty(_buf_size(K))
    cdef double[:] s = np.empty(K)
    cdef double[:] viol = np.empty(K)
    cdef double target = budget if equality else -1.0
    cdef double theta_prev = theta, th, damp = 1.0, best_val, val, total, kappa, scale
    cdef double change, x, tot_c
    cdef int status = 1, st, sweeps = 0, it = 0, n = 1, since = 0

    with nogil:
        _project(p, ord_v, om_v, ng_v, budget, equality, floor, s, best)
        tot_c = 0.0
        for k in range(K):
            tot_c += best[k]
        best_val = _lb_sum_rate(best, nb_v, num_antennas, bandwidth) - q * (tot_c + circuit_w)
        for it in range(1, max_mult + 1):
            _chi(lam_v, om_v, ord_v, variant, chi)
            for k in range(K):
                work[k] = p[k]
            th = theta
            st = _fixed_point(q, &th, chi, nb_v, bandwidth, &work[0], K, target, fp_tol,
                              max_inner, floor, &buf[0], &sweeps)
            if st == 2:
                damp *= 0.5
                if damp < 1e-12:
                    status = 2
                    for k in range(K):
                        lam_v[k] = lam_prev[k]
                    theta = theta_prev
                    break
                for k in range(K):
                    lam_v[k] = 0.5 * (lam_v[k] + lam_prev[k])
                theta = 0.5 * (theta + theta_prev)
                continue
            for k in range(K):
                p[k] = work[k]
            if equality:
                theta = th
            _project(p, ord_v, om_v, ng_v, budget, equality, floor, s, cand)
            tot_c = 0.0
            for k in range(K):
                tot_c += cand[k]
            val = _lb_sum_rate(cand, nb_v, num_antennas, bandwidth) - q * (tot_c + circuit_w)
            if val > best_val + mult_tol * bandwidth:
                since = 0
            else:
                since += 1
            if val > best_val:
                best_val = val
                for k in range(K):
                    best[k] = cand[k]
            total = 0.0
            for k in range(K):
                total += p[k]
            kappa = bandwidth / (LN2 * total * total)
            scale = damp * kappa / sqrt(<double>n)
            _thresholds(p, ord_v, om_v, ng_v, viol)
            change = 0.0
            for k in range(K):
                lam_prev[k] = lam_v[k]
                x = lam_v[k] + step_lambda * scale * (viol[k] - p[k])
                if x < 0.0:
                    x = 0.0
                if fabs(x - lam_v[k]) > change:
                    change = fabs(x - lam_v[k])
                lam_v[k] = x
            theta_prev = theta
            if not equality:
                x = theta - step_theta * scale * (budget - total)
                if x < 0.0:
                    x = 0.0
                if fabs(x - theta) > change:
                    change = fabs(x - theta)
                theta = x
            n += 1
            if change <= mult_tol * kappa * total:
                status = 0
                break
            if since >= STAGNANT_ITERS:
                break
    return best_arr, best_val, p_arr, theta, lam_arr, it, status
