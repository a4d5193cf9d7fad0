"""Global minimization of a quadratic over a Euclidean ball."""

import numpy as np
from scipy.optimize import brentq


def _sample_ball(g, H, radius, n_samples, rng):
    n = g.size
    d = rng.standard_normal((n_samples, n))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    d *= radius * rng.uniform(0.0, 1.0, (n_samples, 1)) ** (1.0 / n)
    d = np.vstack([np.zeros(n), d])
    vals = d @ g + 0.5 * np.einsum("ij,jk,ik->i", d, H, d)
    i = int(np.argmin(vals))
    return d[i], float(vals[i])


def solve_trs(g, H, radius):
    """Return ``(s, value)`` minimizing ``g.s + s.H.s/2`` over ``||s|| <= radius``.

    Eigen-decomposition with a secular-equation root find, including the
    hard case. Falls back to dense sampling if the eigen-solve fails.
    """
    g = np.asarray(g, dtype=float)
    H = 0.5 * (np.asarray(H, dtype=float) + np.asarray(H, dtype=float).T)
    n = g.size
    if radius <= 0.0:
        return np.zeros(n), 0.0
    try:
        lam, Q = np.linalg.eigh(H)
    except np.linalg.LinAlgError:
        rng = np.random.default_rng(0)
        return _sample_ball(g, H, radius, 10 * n * n, rng)

    gq = Q.T @ g
    scale = max(np.max(np.abs(lam)), 1e-300)
    lam_min = lam[0]
    gnorm = np.linalg.norm(g)

    def step(sigma):
        return -gq / (lam + sigma)

    def value(s):
        return float(g @ s + 0.5 * s @ H @ s)

    # interior Newton step
    if lam_min > 1e-12 * scale:
        sq = step(0.0)
        if np.linalg.norm(sq) <= radius:
            s = Q @ sq
            return s, value(s)

    sigma_lo = max(0.0, -lam_min)
    # hard case: gradient has (numerically) no component on the bottom eigenspace
    bottom = lam <= lam_min + 1e-10 * scale
    g_bottom = np.linalg.norm(gq[bottom])
    if g_bottom <= 1e-12 * max(gnorm, 1e-300) or gnorm == 0.0:
        sq = np.zeros(n)
        top = ~bottom
        denom = lam[top] + sigma_lo
        sq[top] = -gq[top] / denom
        norm2 = sq @ sq
        if norm2 <= radius * radius and lam_min >= 0.0:
            s = Q @ sq
            return s, value(s)
        if norm2 <= radius * radius:
            tau = np.sqrt(radius * radius - norm2)
            k = int(np.flatnonzero(bottom)[0])
            cand = []
            for sign in (1.0, -1.0):
                sc = sq.copy()
                sc[k] += sign * tau
                s = Q @ sc
                cand.append((value(s), s))
            v, s = min(cand, key=lambda t: t[0])
            return s, v

    # boundary solution: ||s(sigma)|| = radius for sigma > sigma_lo
    def phi(sigma):
        return np.linalg.norm(step(sigma)) - radius

    lo = sigma_lo
    width = max(gnorm / radius, 1e-300)
    hi = sigma_lo + width
    while phi(hi) > 0.0:
        hi = sigma_lo + 2.0 * (hi - sigma_lo)
    # phi(lo) is +inf or positive near the pole; nudge off it
    eps = max(1e-15 * max(scale, width), 1e-300)
    lo_try = lo + eps
    while not np.isfinite(phi(lo_try)) or phi(lo_try) < 0.0:
        eps *= 1e-3
        lo_try = lo + eps
        if eps < 1e-300:
            break
    if phi(lo_try) <= 0.0:
        sigma = lo_try
    else:
        sigma = brentq(phi, lo_try, hi, xtol=1e-15 * max(1.0, hi), rtol=1e-14, maxiter=200)
    s = Q @ step(sigma)
    nrm = np.linalg.norm(s)
    if nrm > radius:
        s *= radius / nrm
    return s, value(s)


def max_abs_quadratic(c0, g, H, radius):
    """Return ``(x, |q(x)|)`` maximizing ``|c0 + g.x + x.H.x/2|`` over the ball."""
    s_min, v_min = solve_trs(g, H, radius)
    s_max, v_max = solve_trs(-g, -H, radius)
    lo = c0 + v_min
    hi = c0 - v_max
    if abs(lo) >= abs(hi):
        return s_min, abs(lo)
    return s_max, abs(hi)
