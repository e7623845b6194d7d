"""Pure-Python kernels; the reference twin of ``_ckernels.pyx``.

Both modules expose the same functions with the same argument order and
return values. Arrays are float64 (``order`` is an integer permutation).

Status codes returned by the iterative kernels:
    0  converged
    1  iteration cap reached
    2  nonpositive stationarity denominator (prices unattainable)
"""

import math

import numpy as np

LN2 = math.log(2.0)
NEWTON_CLIP = 3.0
NEWTON_BACKTRACK = (1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125)

CONVERGED = 0
ITERATION_CAP = 1
UNATTAINABLE = 2
_STALLED = 3  # internal only

STALL_SWEEPS = 10
NEWTON_SETTLE = 1e-6
MERIT_FLOOR = 1e-14
SEARCH_ITERS = 60
STAGNANT_ITERS = 50


def chi_values(lam, omega, order, variant):
    """QoS price felt by every user.

    ``variant`` 0 charges user k for the constraints of users decoded after it
    (its power enters their interference sums); variant 1 charges it for the
    users decoded before it.
    """
    K = len(order)
    out = np.empty(K)
    acc = 0.0
    seq = range(K - 1, -1, -1) if variant == 0 else range(K)
    for pos in seq:
        k = order[pos]
        out[k] = lam[k] - acc
        acc += (omega[k] - 1.0) * lam[k]
    return out


def _solve_water_level(d, bandwidth, target):
    """Return t > 0 with sum(bandwidth / (d + ln2 t)) = target, for d >= 0 and min(d) = 0.

    The left side is convex and decreasing in t; Newton started where it
    exceeds the target climbs monotonically to the root.
    """
    t = bandwidth / (LN2 * target)
    for _ in range(200):
        f = -target
        df = 0.0
        for dk in d:
            den = dk + LN2 * t
            f += bandwidth / den
            df -= bandwidth * LN2 / (den * den)
        step = f / df
        t -= step
        if f <= 1e-15 * target or abs(step) <= 1e-16 * t:
            break
    return t


# Inside the fixed point only the combined price mu = q + theta matters. In
# equality mode mu can sit many orders of magnitude below q, so carrying mu
# instead of theta avoids cancellation in q + theta - chi_k.

def _jacobi(p, mu, chi, n_beta, bandwidth, target_total, floor):
    """One Jacobi sweep; returns ``(new_p, mu)`` or None when unattainable."""
    total = p.sum()
    w = bandwidth / (total - p + n_beta)
    S = w.sum() - w
    if target_total > 0:
        a = S - LN2 * chi
        amin = a.min()
        t = _solve_water_level(a - amin, bandwidth, target_total)
        mu = t - amin / LN2
        den = (a - amin) + LN2 * t
    else:
        den = LN2 * (mu - chi) + S
        if np.any(den <= 0.0):
            return None
    return np.maximum(bandwidth / den, floor), mu


def _residual(p, mu, chi, n_beta, bandwidth):
    """``r_k = log(p_k den_k / B)``, zero exactly at a fixed point; None if a
    denominator is nonpositive. Also returns the pieces the Newton step needs."""
    I = p.sum() - p + n_beta
    w = bandwidth / I
    den = LN2 * (mu - chi) + (w.sum() - w)
    if np.any(den <= 0.0):
        return None
    return np.log(p * den / bandwidth), den, I


def _merit(p, mu, chi, n_beta, bandwidth):
    res = _residual(p, mu, chi, n_beta, bandwidth)
    return math.inf if res is None else np.max(np.abs(res[0]))


def _newton(p, mu, chi, n_beta, bandwidth, target_total):
    """Newton step on ``r(log p) = 0`` (see ``_residual``).

    In equality mode mu is an extra unknown and ``log(sum p / target)`` an
    extra equation. Returns ``(log_power_step, mu_step)`` or None.
    """
    res = _residual(p, mu, chi, n_beta, bandwidth)
    if res is None:
        return None
    r, den, I = res
    K = p.shape[0]
    u = bandwidth / (I * I)
    T = u.sum()
    # d den_k / d p_m = -(T - u_k - u_m) off the diagonal, -(T - u_k) on it
    D = -(T - u[:, None] - u[None, :])
    D[np.diag_indices(K)] = -(T - u)
    J = np.eye(K) + D * p[None, :] / den[:, None]
    if target_total > 0:
        total = p.sum()
        A = np.zeros((K + 1, K + 1))
        A[:K, :K] = J
        A[:K, K] = LN2 / den
        A[K, :K] = p / total
        rhs = -np.append(r, math.log(total / target_total))
    else:
        A, rhs = J, -r
    try:
        step = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(step)):
        return None
    # shrink the whole step so no power moves by more than a factor e^NEWTON_CLIP
    big = np.max(np.abs(step[:K]))
    if big > NEWTON_CLIP:
        step *= NEWTON_CLIP / big
    return step[:K], (step[K] if target_total > 0 else 0.0)


def _unbounded(c):
    """True when some net price ``c_k = mu - chi_k`` is nonpositive.

    With mu held fixed the Lagrangian then grows without bound along p_k
    (the price term is linear, the rate terms only logarithmic), so no
    maximizer exists.
    """
    return bool(np.any(c <= 0.0))


def _gap(new, p):
    return np.max(np.abs(new - p) / new)


def _sweeps(p, mu, chi, n_beta, bandwidth, target_total, tol, max_iters, floor):
    """Jacobi sweeps with safeguarded Newton steps; see ``fixed_point``.

    Returns ``(p, mu, sweeps, status)`` where status may also be ``_STALLED``:
    the residual has not halved for ``STALL_SWEEPS`` sweeps.
    """
    ref, since = math.inf, 0
    sweeps = 0
    for sweeps in range(1, max_iters + 1):
        res = _jacobi(p, mu, chi, n_beta, bandwidth, target_total, floor)
        if res is None:
            return p, mu, sweeps, UNATTAINABLE
        nxt, nmu = res
        step = _newton(p, mu, chi, n_beta, bandwidth, target_total)
        # On a flat fixed point a tiny sweep can still leave a large error; the
        # Newton step estimates that error directly.
        if _gap(nxt, p) <= tol and (step is None
                                    or np.max(np.abs(step[0])) <= max(tol, NEWTON_SETTLE)):
            return nxt, nmu, sweeps, CONVERGED
        best = _merit(nxt, nmu, chi, n_beta, bandwidth)
        if step is not None:
            for alpha in NEWTON_BACKTRACK:
                cand = p * np.exp(alpha * step[0])
                if target_total > 0:
                    cand *= target_total / cand.sum()
                cmu = mu + alpha * step[1]
                m = _merit(cand, cmu, chi, n_beta, bandwidth)
                # at roundoff level the residual no longer ranks points
                if np.all(cand > floor) and (m < best or m <= MERIT_FLOOR):
                    nxt, nmu, best = cand, cmu, m
                    break
        p, mu = nxt, nmu
        if best <= 0.5 * ref or best <= tol:
            ref, since = best, 0
        else:
            since += 1
            if since >= STALL_SWEEPS:
                return p, mu, sweeps, _STALLED
    return p, mu, sweeps, ITERATION_CAP


def _price_search(p, mu, chi, n_beta, bandwidth, target_total, tol, max_iters, floor):
    """Equality mode by a search on mu.

    Every net price ``mu - chi_k`` is kept positive, so each fixed-mu problem
    has a maximizer; the sum of its powers falls as mu rises. Regula falsi
    (Illinois) on ``log(sum p / target)`` against ``x = log(mu - max chi)``.
    Returns ``(p, mu, sweeps, status)``.
    """
    cmax = float(np.max(chi))
    used = 0

    def solve(x, start):
        nonlocal used
        m = cmax + math.exp(x)
        out, _, n, st = _sweeps(start.copy(), m, chi, n_beta, bandwidth, -1.0, tol,
                                max_iters, floor)
        used += n
        if st != CONVERGED:
            return None
        return out, m, math.log(out.sum() / target_total)

    c0 = mu - cmax
    x = math.log(c0) if c0 > 0 else math.log(bandwidth * len(p) / (LN2 * target_total))
    cur = solve(x, p)
    if cur is None:
        return p, mu, used, ITERATION_CAP
    # bracket the root, doubling the step each time
    step = math.log(4.0) if cur[2] > 0 else -math.log(4.0)
    a, fa, pa = x, cur[2], cur[0]
    b = fb = pb = None
    for _ in range(SEARCH_ITERS):
        x = a + step
        nxt = solve(x, pa)
        if nxt is None:
            return p, mu, used, ITERATION_CAP
        if (nxt[2] > 0) == (fa > 0):
            a, fa, pa = x, nxt[2], nxt[0]
            step *= 2.0
        else:
            b, fb, pb = x, nxt[2], nxt[0]
            break
    if b is None:
        return p, mu, used, ITERATION_CAP
    side = 0
    for _ in range(SEARCH_ITERS):
        x = (a * fb - b * fa) / (fb - fa)
        cur = solve(x, pa if abs(x - a) < abs(x - b) else pb)
        if cur is None:
            return p, mu, used, ITERATION_CAP
        out, m, f = cur
        # inner solves are trusted to max(tol, NEWTON_SETTLE), and so is the sum
        if abs(f) <= max(tol, NEWTON_SETTLE) or x in (a, b):
            return out * (target_total / out.sum()), m, used, CONVERGED
        if (f > 0) == (fa > 0):
            a, fa, pa = x, f, out
            if side == -1:
                fb *= 0.5
            side = -1
        else:
            b, fb, pb = x, f, out
            if side == 1:
                fa *= 0.5
            side = 1
    return p, mu, used, ITERATION_CAP


def fixed_point(q, theta, chi, n_beta, bandwidth, p0, target_total, tol, max_iters, floor):
    """Powers satisfying the stationarity condition at fixed prices.

    Jacobi iteration ``p_k <- B / (ln2 (q + theta - chi_k) + sum_{j != k} B / (I_j + n_j))``
    with ``I_j`` the interference power of user j and ``n_j = sigma^2 / beta_j``.
    Near a flat fixed point the sweep contracts very slowly, so each sweep also
    tries a backtracked Newton step and takes it when it lowers the scaled
    stationarity residual more than the plain sweep does. Converged when a
    sweep moves every power by at most ``tol`` relative and the Newton step
    (an estimate of the remaining error) is below ``max(tol, NEWTON_SETTLE)``
    in log power.

    With ``target_total > 0`` theta is re-solved every sweep so the powers sum
    to the target. If that stalls, theta is found instead by a one-dimensional
    search over fixed-theta problems. Otherwise theta stays fixed, and the
    prices are ``UNATTAINABLE`` when a net price ``q + theta - chi_k`` is
    nonpositive or a denominator turns nonpositive. ``ITERATION_CAP`` covers
    both the sweep cap and a stall.

    Returns ``(p, theta, sweeps, status)``.
    """
    p = np.array(p0, dtype=float)
    mu = q + theta
    if target_total <= 0:
        if _unbounded(mu - chi):
            return p, theta, 0, UNATTAINABLE
        out = _sweeps(p, mu, chi, n_beta, bandwidth, target_total, tol, max_iters, floor)
    else:
        out = _sweeps(p, mu, chi, n_beta, bandwidth, target_total, tol, max_iters, floor)
        if out[3] == _STALLED:
            alt = _price_search(out[0], out[1], chi, n_beta, bandwidth, target_total, tol,
                                max_iters, floor)
            out = (*alt[:2], out[2] + alt[2], alt[3])
    p, mu, sweeps, status = out
    if status == _STALLED:
        status = ITERATION_CAP
    # theta is held fixed in inequality mode; return it untouched there
    return p, (mu - q if target_total > 0 else theta), sweeps, status


def _thresholds(p, order, omega, n_gain):
    out = np.empty(len(order))
    acc = 0.0
    for k in order:
        out[k] = (omega[k] - 1.0) * (acc + n_gain[k])
        acc += p[k]
    return out


def _build(s, t, order, omega, n_gain, floor):
    out = np.empty(len(order))
    acc = 0.0
    for k in order:
        out[k] = max((omega[k] - 1.0) * (acc + n_gain[k]) + t * s[k], floor)
        acc += out[k]
    return out


def project(p, order, omega, n_gain, budget, equality, floor):
    """Map ``p`` onto the QoS-feasible set with the power budget.

    Each user's slack above its QoS threshold is kept in proportion and scaled
    so the budget is met exactly (equality) or not exceeded (inequality).
    Returns the minimum-power vector when even that exceeds the budget.
    """
    p = np.asarray(p, dtype=float)
    s = np.maximum(p - _thresholds(p, order, omega, n_gain), 0.0)
    base = _build(s, 0.0, order, omega, n_gain, floor)
    total0 = base.sum()
    if total0 >= budget:
        return base
    full = _build(s, 1.0, order, omega, n_gain, floor)
    total1 = full.sum()
    if not equality and total1 <= budget:
        return full
    if total1 - total0 <= 0.0:
        if equality:
            base[order[-1]] += budget - total0
        return base
    t = (budget - total0) / (total1 - total0)
    out = _build(s, t, order, omega, n_gain, floor)
    if abs(out.sum() - budget) <= 1e-12 * budget:
        return out
    lo, hi = 0.0, max(t, 1.0)
    while _build(s, hi, order, omega, n_gain, floor).sum() < budget:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _build(s, mid, order, omega, n_gain, floor).sum() > budget:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-15 * hi:
            break
    return _build(s, lo, order, omega, n_gain, floor)


def multiplier_loop(q, theta, lam, p0, order, omega, n_gain, n_beta, num_antennas,
                    circuit_w, bandwidth, budget, equality, step_theta, step_lambda,
                    max_mult, mult_tol, fp_tol, max_inner, floor, variant):
    """Projected subgradient on the QoS (and budget) prices around ``fixed_point``.

    Steps shrink as ``1 / sqrt(n)`` and are scaled by ``B / (ln2 P^2)`` with P
    the current total power, which makes ``step_theta`` and ``step_lambda``
    dimensionless. A step that drives a stationarity denominator nonpositive
    is retracted halfway and the step length halved; ``UNATTAINABLE`` is
    returned only once the step has shrunk below ``1e-12``.

    Every primal iterate is projected onto the feasible set and the one with
    the largest parametric objective ``R(p) - q (sum p + circuit_w)`` is kept.
    The loop also stops, with ``ITERATION_CAP``, once that value has not
    improved by ``mult_tol * bandwidth`` for ``STAGNANT_ITERS`` iterations.
    Near a corner solution the prices can oscillate for good while the kept
    iterate no longer moves.

    Returns ``(p_best, value_best, p_last, theta, lam, iterations, status)``.
    """
    p = np.array(p0, dtype=float)
    lam = np.array(lam, dtype=float)
    lam_prev = lam.copy()
    theta_prev = theta
    target = budget if equality else -1.0
    damp = 1.0
    status = ITERATION_CAP
    best = project(p, order, omega, n_gain, budget, equality, floor)
    best_val = lb_sum_rate(best, n_beta, num_antennas, bandwidth) - q * (best.sum() + circuit_w)
    n = 1
    it = 0
    since = 0
    for it in range(1, max_mult + 1):
        chi = chi_values(lam, omega, order, variant)
        new, th, _, st = fixed_point(q, theta, chi, n_beta, bandwidth, p, target,
                                     fp_tol, max_inner, floor)
        if st == UNATTAINABLE:
            damp *= 0.5
            if damp < 1e-12:
                status = UNATTAINABLE
                lam, theta = lam_prev, theta_prev
                break
            lam = 0.5 * (lam + lam_prev)
            theta = 0.5 * (theta + theta_prev)
            continue
        p = new
        if equality:
            theta = th
        cand = project(p, order, omega, n_gain, budget, equality, floor)
        val = lb_sum_rate(cand, n_beta, num_antennas, bandwidth) - q * (cand.sum() + circuit_w)
        since = 0 if val > best_val + mult_tol * bandwidth else since + 1
        if val > best_val:
            best, best_val = cand, val
        total = p.sum()
        kappa = bandwidth / (LN2 * total * total)
        scale = damp * kappa / math.sqrt(n)
        viol = _thresholds(p, order, omega, n_gain) - p
        lam_prev, theta_prev = lam, theta
        lam = np.maximum(lam + step_lambda * scale * viol, 0.0)
        change = np.max(np.abs(lam - lam_prev))
        if not equality:
            theta = max(theta - step_theta * scale * (budget - total), 0.0)
            change = max(change, abs(theta - theta_prev))
        n += 1
        if change <= mult_tol * kappa * total:
            status = CONVERGED
            break
        if since >= STAGNANT_ITERS:
            break
    return best, best_val, p, theta, lam, it, status


def lb_sum_rate(p, n_beta, num_antennas, bandwidth):
    """Sum of ``B log2(M p_k / (I_k + sigma^2 / beta_k))``; ``-inf`` if any power is zero."""
    total = p.sum()
    if np.any(p <= 0.0):
        return -math.inf
    return float(bandwidth * np.sum(np.log2(num_antennas * p / (total - p + n_beta))))
