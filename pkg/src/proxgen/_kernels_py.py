"""Pure numpy kernels. Same interface as the compiled ``_kernels`` extension.

All array arguments are 1-D float64 arrays of equal length. Exponent codes:
0 -> |x|^0, 1 -> |x|^(1/2), 2 -> |x|^(2/3), 3 -> |x|. Penalty codes 4..7 are
the same exponents applied to ``x - sign(x)`` (sign(0) = 0).
"""

import math

import numpy as np

from .core import ProxDomainError

BACKEND = "python"

CBRT54_OVER_4 = 54.0 ** (1.0 / 3.0) / 4.0
TWO_OVER_SQRT3 = 2.0 / math.sqrt(3.0)
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _prox_l0(a, le):
    return np.where(a > np.sqrt(le), a, 0.0)


def _prox_l1(a, le):
    return np.where(a > 0.5 * le, a - 0.5 * le, 0.0)


def _prox_half(a, le):
    out = np.zeros_like(a)
    live = a > CBRT54_OVER_4 * le ** (2.0 / 3.0)
    if not live.any():
        return out
    al, ll = a[live], le[live]
    arg = (ll / 8.0) * (al / 3.0) ** -1.5
    if np.any(arg > 1.0):
        raise ProxDomainError("l1/2 prox: arccos argument above 1 outside the dead zone")
    phi = np.arccos(arg)
    out[live] = (2.0 / 3.0) * al * (1.0 + np.cos(2.0 * np.pi / 3.0 - (2.0 / 3.0) * phi))
    return out


def _prox_two_thirds(a, le):
    out = np.zeros_like(a)
    live = a > (2.0 / 3.0) * (3.0 * le**3) ** 0.25
    if not live.any():
        return out
    al, ll = a[live], le[live]
    u = (27.0 * al * al / 16.0) * ll**-1.5
    if np.any(u < 1.0):
        raise ProxDomainError("l2/3 prox: arccosh argument below 1 outside the dead zone")
    big_a = TWO_OVER_SQRT3 * ll**0.25 * np.sqrt(np.cosh(np.arccosh(u) / 3.0))
    r = 2.0 * al / big_a - big_a * big_a
    if np.any(r < 0.0):
        raise ProxDomainError("l2/3 prox: negative radicand outside the dead zone")
    out[live] = ((big_a + np.sqrt(r)) / 2.0) ** 3
    return out


_MAGNITUDE = (_prox_l0, _prox_half, _prox_two_thirds, _prox_l1)


def prox_sparse(z, kappa, alpha, lam, qcode):
    """Per-coordinate argmin of (kappa/2)(x - z)^2 + alpha*lam*|x|^q."""
    z = np.asarray(z, dtype=np.float64)
    le = 2.0 * alpha * lam / kappa
    zero = le == 0.0
    mag = _MAGNITUDE[qcode](np.abs(z), np.where(zero, 1.0, le))
    # copysign keeps odd symmetry exact; the dead zone stays +0.0
    out = np.where(mag > 0.0, np.copysign(mag, z), 0.0)
    return np.where(zero, z, out)


def penalty(x, pcode):
    x = np.asarray(x, dtype=np.float64)
    if pcode >= 4:
        x = x - np.sign(x)
        pcode -= 4
    a = np.abs(x)
    if pcode == 0:
        return (a != 0.0).astype(np.float64)
    if pcode == 1:
        return np.sqrt(a)
    if pcode == 2:
        return np.cbrt(a * a)
    return a


def prox_quant(z, kappa, alpha, lam, qcode):
    """Per-coordinate argmin of (kappa/2)(x - z)^2 + alpha*lam*|x - sign(x)|^q.

    Candidates: z itself, the +1-shifted prox kept if positive, the
    -1-shifted prox kept if negative, and the kinks 0, +1, -1. Ties go to
    the candidate nearest z, then to the larger one.
    """
    z = np.asarray(z, dtype=np.float64)
    n = z.shape[0]
    up = 1.0 + prox_sparse(z - 1.0, kappa, alpha, lam, qcode)
    down = -1.0 + prox_sparse(z + 1.0, kappa, alpha, lam, qcode)
    cands = [
        z,
        np.where(up > 0.0, up, np.nan),
        np.where(down < 0.0, down, np.nan),
        np.zeros(n),
        np.ones(n),
        -np.ones(n),
    ]
    w = alpha * lam

    def objective(x):
        f = 0.5 * kappa * (x - z) ** 2 + w * penalty(x, qcode + 4)
        return np.where(np.isnan(x), np.inf, f)

    best = cands[0].copy()
    fbest = objective(best)
    for c in cands[1:]:
        fc = objective(c)
        better = (fc < fbest) | (
            (fc == fbest)
            & ((np.abs(c - z) < np.abs(best - z)) | ((np.abs(c - z) == np.abs(best - z)) & (c > best)))
        )
        best = np.where(better, c, best)
        fbest = np.where(better, fc, fbest)
    return best


def _golden(f, lo, hi, tol):
    c = hi - GOLDEN * (hi - lo)
    d = lo + GOLDEN * (hi - lo)
    fc, fd = f(c), f(d)
    while hi - lo > tol:
        if fc <= fd:
            hi, d, fd = d, c, fc
            c = hi - GOLDEN * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + GOLDEN * (hi - lo)
            fd = f(d)
    x = 0.5 * (lo + hi)
    return x, f(x)


def oracle_min_one(z, lam_eff, pen, npts=200_001, tol=1e-12):
    """Grid-plus-golden-section minimizer of (x - z)^2 + lam_eff*pen(x).

    `pen` is any vectorized callable. Used as ground truth for the closed forms.
    """
    z = float(z)
    if lam_eff == 0.0:
        return z

    def f(x):
        return (x - z) ** 2 + lam_eff * float(pen(np.array([x]))[0])

    r = abs(z) + 2.0
    grid = np.linspace(-r, r, npts)
    vals = (grid - z) ** 2 + lam_eff * pen(grid)
    i = int(np.argmin(vals))
    xb, fb = float(grid[i]), float(vals[i])
    lo, hi = float(grid[max(i - 1, 0)]), float(grid[min(i + 1, npts - 1)])
    xg, fg = _golden(f, lo, hi, tol)
    if fg < fb:
        xb, fb = xg, fg
    for s in (0.0, z):
        fs = f(s)
        if fs < fb:
            xb, fb = s, fs
    return xb


def oracle_min(z, lam_eff, pcode, npts=200_001):
    z = np.asarray(z, dtype=np.float64)
    lam_eff = np.broadcast_to(np.asarray(lam_eff, dtype=np.float64), z.shape)
    out = np.empty_like(z)
    for k in range(z.shape[0]):
        out[k] = oracle_min_one(z[k], float(lam_eff[k]), lambda x: penalty(x, pcode), npts)
    return out
