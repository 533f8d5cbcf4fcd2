"""High-precision reference log posterior, written from the model definition.

Shares no code with the package: rotations, local angles, spatial
frequencies, delays, gains, priors and the Gaussian likelihood are spelled out
in mpmath so central differences carry no double-precision round-off.
"""

import mpmath as mp

mp.mp.dps = 40
C = mp.mpf(299792458)
IG_A = IG_B = mp.mpf("0.001")


def rot(a, b, g):
    ca, sa, cb, sb, cg, sg = mp.cos(a), mp.sin(a), mp.cos(b), mp.sin(b), mp.cos(g), mp.sin(g)
    rz = mp.matrix([[ca, -sa, 0], [sa, ca, 0], [0, 0, 1]])
    ry = mp.matrix([[cb, 0, sb], [0, 1, 0], [-sb, 0, cb]])
    rx = mp.matrix([[1, 0, 0], [0, cg, -sg], [0, sg, cg]])
    return rz * ry * rx


def _freqs(frm, to, R):
    d = mp.matrix([to[i] - frm[i] for i in range(3)])
    n = mp.sqrt(sum(x**2 for x in d))
    k = R.T * (d / n)
    theta = mp.acos(k[2])
    phi = mp.atan2(k[1], k[0])
    return [mp.pi * mp.sin(theta) * mp.cos(phi), mp.pi * mp.cos(theta)], n


def eta(zeta, sc):
    """Channel parameters in the package's canonical order."""
    ms = [mp.mpf(z) for z in zeta[:3]]
    Rm = rot(*[mp.mpf(z) for z in zeta[3:6]])
    bs = [mp.mpf(float(x)) for x in sc.bs_pose.position]
    ris = [mp.mpf(float(x)) for x in sc.ris_pose.position]
    Rb = rot(*[mp.mpf(float(x)) for x in sc.bs_pose.rotation])
    Rr = rot(*[mp.mpf(float(x)) for x in sc.ris_pose.rotation])
    fc, fsc, tau0 = mp.mpf(sc.f_c), mp.mpf(sc.f_sc), mp.mpf(sc.tau0)
    psi_bm, d_bm = _freqs(ms, bs, Rm)
    vs_bm, _ = _freqs(bs, ms, Rb)
    omega = lambda d: -2 * mp.pi * (d / C + tau0) * fsc
    gain = lambda d: mp.sqrt(C / (4 * mp.pi * fc * d))
    if not sc.ris_enabled:
        return [*psi_bm, *vs_bm, omega(d_bm), gain(d_bm)]
    psi_rm, d_rm = _freqs(ms, ris, Rm)
    vs_rm, _ = _freqs(ris, ms, Rr)
    d_br = mp.sqrt(sum((ris[i] - bs[i]) ** 2 for i in range(3)))
    return [*psi_bm, *psi_rm, *vs_bm, *vs_rm, omega(d_bm), omega(d_br + d_rm), gain(d_bm),
            mp.mpf(sc.b_BR) * gain(d_rm)]


def column_stats(samples):
    """Per-column (n, sum y, sum y^2) in high precision."""
    cols = list(zip(*[[mp.mpf(float(y)) for y in row] for row in samples]))
    return [(len(c), sum(c), sum(y * y for y in c)) for c in cols]


def log_posterior(u, samples, sc, eps=mp.pi / 4, stats=None):
    stats = stats or column_stats(samples)
    u = [mp.mpf(x) for x in u]
    hi = [mp.mpf(sc.room_L), mp.mpf(sc.room_L), mp.mpf(sc.room_H), eps, eps, eps]
    s = [1 / (1 + mp.exp(-x)) for x in u[:6]]
    zeta = [hi[i] * s[i] for i in range(6)]
    # uniform prior times the logit Jacobian: (1/hi) * hi * s * (1 - s)
    lp = sum(mp.log(si) + mp.log(1 - si) for si in s)
    for v in u[6:]:
        # InverseGamma(a, b) on sigma2 = exp(v), times the log Jacobian v
        lp += IG_A * mp.log(IG_B) - mp.loggamma(IG_A) - (IG_A + 1) * v - IG_B * mp.exp(-v) + v
    mu = eta(zeta, sc)
    for j, (n, s1, s2) in enumerate(stats):
        var = mp.exp(u[6 + j])
        # sum_i (y_i - mu)^2 expanded, exact at this precision
        sq = s2 - 2 * mu[j] * s1 + n * mu[j] ** 2
        lp += -n * mp.log(2 * mp.pi * var) / 2 - sq / (2 * var)
    return lp


def gradient(u, samples, sc, h=mp.mpf("1e-12")):
    stats = column_stats(samples)
    g = []
    for i in range(len(u)):
        up = [mp.mpf(x) for x in u]
        dn = [mp.mpf(x) for x in u]
        up[i] += h
        dn[i] -= h
        g.append((log_posterior(up, samples, sc, stats=stats) - log_posterior(dn, samples, sc, stats=stats)) / (2 * h))
    return g
