"""Self-contained reference implementation of the certified-rate formula.

Written independently of the package (plain math, own table copy, own
envelope/tangent code) and used by the tests as a cross-check oracle for
the finite-size engine.  Keep this file free of dirng imports.
"""

import math

LN2 = math.log(2.0)
E2 = math.e ** 2

CHSH_VNE8 = [(2.65022, 0.8964), (2.67602, 0.9574), (2.70257, 1.0239),
             (2.71497, 1.0566), (2.73685, 1.1177), (2.74428, 1.1397),
             (2.76091, 1.1917)]
CHSH_ABS_COEFF_SUM = 4.0
CHSH_CLASSICAL = 2.0


def lower_hull(pts):
    hull = []
    for p in pts:
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            if (x2 - x1) * (p[1] - y1) <= (p[0] - x1) * (y2 - y1):
                hull.pop()
            else:
                break
        hull.append(p)
    return hull


def tangent(points, anchor):
    """(slope, intercept) of the supporting line at the anchor; left-segment
    slope at vertices, right segment at the first vertex."""
    hull = lower_hull(points)
    for k, (s, h) in enumerate(hull):
        if abs(anchor - s) <= 1e-12:
            lo, hi = (0, 1) if k == 0 else (k - 1, k)
            lam = (hull[hi][1] - hull[lo][1]) / (hull[hi][0] - hull[lo][0])
            return lam, h - lam * s
    for k in range(len(hull) - 1):
        if hull[k][0] < anchor < hull[k + 1][0]:
            lam = (hull[k + 1][1] - hull[k][1]) / (hull[k + 1][0] - hull[k][0])
            h = hull[k][1] + lam * (anchor - hull[k][0])
            return lam, h - lam * anchor
    raise ValueError(f"anchor {anchor} outside hull range")


def h2(g):
    if g <= 0.0 or g >= 1.0:
        return 0.0
    return -g * math.log2(g) - (1.0 - g) * math.log2(1.0 - g)


def g_eps(eps):
    return -(2.0 * math.log2(eps) - math.log2(1.0 + math.sqrt(max(0.0, 1.0 - eps * eps))))


def delta_tol(gamma, n, p_pass, max_abs_coeff=1.0):
    m = gamma * n
    return 8.0 * max_abs_coeff * math.sqrt(math.log(1.0 / (1.0 - p_pass)) / (2.0 * m))


def certified(n, s_tol, gamma, beta, eps_s, p_pass, lam, mu,
              abs_coeff_sum=CHSH_ABS_COEFF_SUM, classical=CHSH_CLASSICAL):
    if s_tol < classical:
        return 0.0
    g_val = mu + lam * s_tol
    max_g = mu + lam * abs_coeff_sum
    min_g = mu - lam * abs_coeff_sum
    var_f = (max_g - min_g) ** 2 / gamma
    V = math.log2(33.0) + math.sqrt(2.0 + var_f)
    spread = 4.0 + (max_g - min_g)
    K = (2.0 ** (beta * spread) * math.log(2.0 ** spread + E2) ** 3
         / (6.0 * (1.0 - beta) ** 3 * LN2))
    raw = (n * g_val
           - n * beta * (LN2 / 2.0) * V * V
           - n * beta * beta * K
           - (g_eps(eps_s) + (1.0 + beta) * math.log2(1.0 / p_pass)) / beta)
    return max(0.0, raw)


def best_beta(n, gamma, eps_s, p_pass, lam, mu, lo=1e-6, hi=1.0 - 1e-6,
              abs_coeff_sum=CHSH_ABS_COEFF_SUM):
    max_g = mu + lam * abs_coeff_sum
    min_g = mu - lam * abs_coeff_sum
    var_f = (max_g - min_g) ** 2 / gamma
    V = math.log2(33.0) + math.sqrt(2.0 + var_f)
    spread = 4.0 + (max_g - min_g)

    def pen(beta):
        K = (2.0 ** (beta * spread) * math.log(2.0 ** spread + E2) ** 3
             / (6.0 * (1.0 - beta) ** 3 * LN2))
        return (n * beta * (LN2 / 2.0) * V * V + n * beta * beta * K
                + (g_eps(eps_s) + (1.0 + beta) * math.log2(1.0 / p_pass)) / beta)

    llo, lhi = math.log(lo), math.log(hi)
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = lhi - invphi * (lhi - llo)
    d = llo + invphi * (lhi - llo)
    fc, fd = pen(math.exp(c)), pen(math.exp(d))
    while math.exp(lhi) - math.exp(llo) > 1e-6:
        if fc < fd:
            lhi, d, fd = d, c, fc
            c = lhi - invphi * (lhi - llo)
            fc = pen(math.exp(c))
        else:
            llo, c, fc = c, d, fd
            d = llo + invphi * (lhi - llo)
            fd = pen(math.exp(d))
    return math.exp(0.5 * (llo + lhi))


def switch_prob(gamma):
    return 1.0 - (((1.0 - gamma) + gamma / 4.0) ** 2 + 3.0 * (gamma / 4.0) ** 2)


def net_rate(T, event_rate, gamma, anchor, eps_s=1e-15, p_pass=0.9999, tau=0.0,
             s_exp=2.65022, points=CHSH_VNE8):
    per_round = 1.0 / event_rate + tau * switch_prob(gamma)
    n = math.floor(T / per_round)
    if n < 1 or gamma * n < 1.0:
        return None
    lam, mu = tangent(points, anchor)
    s_tol = s_exp - delta_tol(gamma, n, p_pass)
    beta = best_beta(n, gamma, eps_s, p_pass, lam, mu)
    cert = certified(n, s_tol, gamma, beta, eps_s, p_pass, lam, mu)
    consumed = n * (2.0 * gamma + h2(gamma))
    return (cert - consumed) / T


def optimize_rate(T, event_rate, anchor, eps_s=1e-15, p_pass=0.9999, tau=0.0,
                  n_points=80):
    lo, hi = math.log10(1e-5), math.log10(0.3)
    best = None
    for i in range(n_points):
        gamma = 10.0 ** (lo + (hi - lo) * i / (n_points - 1))
        r = net_rate(T, event_rate, gamma, anchor, eps_s, p_pass, tau)
        if r is not None and (best is None or r > best):
            best = r
    return best
