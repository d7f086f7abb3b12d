# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-coordinate prox kernels and the brute-force oracle scan.

Interface mirrors ``proxgen._kernels_py``.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, cbrt, fabs, copysign, acos, cos, acosh, cosh, pow, isnan, INFINITY, M_PI

from .core import ProxDomainError

cnp.import_array()

BACKEND = "compiled"

cdef double CBRT54_OVER_4 = cbrt(54.0) / 4.0
cdef double TWO_OVER_SQRT3 = 2.0 / sqrt(3.0)
cdef double GOLDEN = (sqrt(5.0) - 1.0) / 2.0
cdef double NAN = float("nan")


cdef inline double _mag(double a, double le, int q) noexcept nogil:
    # magnitude of the scalar prox for |z| = a and effective strength le > 0;
    # NaN flags a domain violation
    cdef double arg, u, big_a, r
    if q == 3:
        return a - 0.5 * le if a > 0.5 * le else 0.0
    if q == 0:
        return a if a > sqrt(le) else 0.0
    if q == 1:
        if a <= CBRT54_OVER_4 * pow(le, 2.0 / 3.0):
            return 0.0
        arg = (le / 8.0) * pow(a / 3.0, -1.5)
        if arg > 1.0:
            return NAN
        return (2.0 / 3.0) * a * (1.0 + cos(2.0 * M_PI / 3.0 - (2.0 / 3.0) * acos(arg)))
    # q == 2
    if a <= (2.0 / 3.0) * pow(3.0 * le * le * le, 0.25):
        return 0.0
    u = (27.0 * a * a / 16.0) * pow(le, -1.5)
    if u < 1.0:
        return NAN
    big_a = TWO_OVER_SQRT3 * pow(le, 0.25) * sqrt(cosh(acosh(u) / 3.0))
    r = 2.0 * a / big_a - big_a * big_a
    if r < 0.0:
        return NAN
    r = (big_a + sqrt(r)) / 2.0
    return r * r * r


cdef inline double _prox1(double z, double le, int q) noexcept nogil:
    cdef double m
    if le == 0.0:
        return z
    m = _mag(fabs(z), le, q)
    if m > 0.0:
        return copysign(m, z)
    if isnan(m):
        return NAN
    return 0.0


cdef inline double _pen(double x, int code) noexcept nogil:
    cdef double a
    if code >= 4:
        if x > 0.0:
            x = x - 1.0
        elif x < 0.0:
            x = x + 1.0
        code -= 4
    a = fabs(x)
    if code == 3:
        return a
    if code == 0:
        return 1.0 if a != 0.0 else 0.0
    if code == 1:
        return sqrt(a)
    return cbrt(a * a)


def prox_sparse(z, kappa, alpha, lam, int qcode):
    cdef const double[::1] zv = np.ascontiguousarray(z, dtype=np.float64)
    cdef const double[::1] kv = np.ascontiguousarray(np.broadcast_to(kappa, (zv.shape[0],)), dtype=np.float64)
    cdef const double[::1] av = np.ascontiguousarray(np.broadcast_to(alpha, (zv.shape[0],)), dtype=np.float64)
    cdef const double[::1] lv = np.ascontiguousarray(np.broadcast_to(lam, (zv.shape[0],)), dtype=np.float64)
    cdef Py_ssize_t n = zv.shape[0], i
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] ov = out
    cdef bint bad = False
    with nogil:
        for i in range(n):
            ov[i] = _prox1(zv[i], 2.0 * av[i] * lv[i] / kv[i], qcode)
            if isnan(ov[i]):
                bad = True
    if bad:
        raise ProxDomainError(f"closed-form prox (code {qcode}) left its domain outside the dead zone")
    return out


cdef inline double _qobj(double x, double z, double k, double w, int qcode) noexcept nogil:
    return 0.5 * k * (x - z) * (x - z) + w * _pen(x, qcode + 4)


cdef inline bint _better(double c, double fc, double b, double fb, double z) noexcept nogil:
    if fc < fb:
        return True
    if fc == fb:
        if fabs(c - z) < fabs(b - z):
            return True
        if fabs(c - z) == fabs(b - z) and c > b:
            return True
    return False


def prox_quant(z, kappa, alpha, lam, int qcode):
    cdef const double[::1] zv = np.ascontiguousarray(z, dtype=np.float64)
    cdef const double[::1] kv = np.ascontiguousarray(np.broadcast_to(kappa, (zv.shape[0],)), dtype=np.float64)
    cdef const double[::1] av = np.ascontiguousarray(np.broadcast_to(alpha, (zv.shape[0],)), dtype=np.float64)
    cdef const double[::1] lv = np.ascontiguousarray(np.broadcast_to(lam, (zv.shape[0],)), dtype=np.float64)
    cdef Py_ssize_t n = zv.shape[0], i, j
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] ov = out
    cdef double zi, ki, w, le, best, fbest, c, fc
    cdef double cands[6]
    cdef bint bad = False
    with nogil:
        for i in range(n):
            zi = zv[i]
            ki = kv[i]
            w = av[i] * lv[i]
            le = 2.0 * w / ki
            cands[0] = zi
            c = 1.0 + _prox1(zi - 1.0, le, qcode)
            cands[1] = c if c > 0.0 else NAN
            c = -1.0 + _prox1(zi + 1.0, le, qcode)
            cands[2] = c if c < 0.0 else NAN
            cands[3] = 0.0
            cands[4] = 1.0
            cands[5] = -1.0
            if isnan(_prox1(zi - 1.0, le, qcode)) or isnan(_prox1(zi + 1.0, le, qcode)):
                bad = True
            best = cands[0]
            fbest = _qobj(best, zi, ki, w, qcode)
            for j in range(1, 6):
                c = cands[j]
                if isnan(c):
                    continue
                fc = _qobj(c, zi, ki, w, qcode)
                if _better(c, fc, best, fbest, zi):
                    best = c
                    fbest = fc
            ov[i] = best
    if bad:
        raise ProxDomainError(f"shifted prox (code {qcode}) left its domain outside the dead zone")
    return out


def penalty(x, int pcode):
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0], i
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] ov = out
    with nogil:
        for i in range(n):
            ov[i] = _pen(xv[i], pcode)
    return out


cdef inline double _obj(double x, double z, double le, int code) noexcept nogil:
    return (x - z) * (x - z) + le * _pen(x, code)


cdef double _oracle1(double z, double le, int code, Py_ssize_t npts, double tol) noexcept nogil:
    cdef double r, h, x, d, f, fb, xb, lo, hi, c, dd, fc, fd, s
    cdef Py_ssize_t i, ib, i0
    if le == 0.0:
        return z
    r = fabs(z) + 2.0
    h = 2.0 * r / (npts - 1)
    # seed the bound with the grid points nearest z and 0, then skip any point
    # whose quadratic term alone cannot beat it (penalties are non-negative)
    ib = <Py_ssize_t>((z + r) / h + 0.5)
    if ib > npts - 1:
        ib = npts - 1
    fb = _obj(-r + ib * h, z, le, code)
    i0 = <Py_ssize_t>(r / h + 0.5)
    f = _obj(-r + i0 * h, z, le, code)
    if f < fb or (f == fb and i0 < ib):
        fb = f
        ib = i0
    for i in range(npts):
        x = -r + i * h
        d = (x - z) * (x - z)
        if d > fb:
            continue
        f = d + le * _pen(x, code)
        if f < fb or (f == fb and i < ib):
            fb = f
            ib = i
    xb = -r + ib * h
    lo = -r + (ib - 1) * h if ib > 0 else -r
    hi = -r + (ib + 1) * h if ib < npts - 1 else r
    c = hi - GOLDEN * (hi - lo)
    dd = lo + GOLDEN * (hi - lo)
    fc = _obj(c, z, le, code)
    fd = _obj(dd, z, le, code)
    while hi - lo > tol:
        if fc <= fd:
            hi = dd
            dd = c
            fd = fc
            c = hi - GOLDEN * (hi - lo)
            fc = _obj(c, z, le, code)
        else:
            lo = c
            c = dd
            fc = fd
            dd = lo + GOLDEN * (hi - lo)
            fd = _obj(dd, z, le, code)
    x = 0.5 * (lo + hi)
    f = _obj(x, z, le, code)
    if f < fb:
        xb = x
        fb = f
    f = _obj(0.0, z, le, code)
    if f < fb:
        xb = 0.0
        fb = f
    f = _obj(z, z, le, code)
    if f < fb:
        xb = z
        fb = f
    return xb


def oracle_min(z, lam_eff, int pcode, Py_ssize_t npts=200_001, double tol=1e-12):
    cdef const double[::1] zv = np.ascontiguousarray(z, dtype=np.float64)
    cdef const double[::1] lv = np.ascontiguousarray(np.broadcast_to(lam_eff, (zv.shape[0],)), dtype=np.float64)
    cdef Py_ssize_t n = zv.shape[0], i
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] ov = out
    with nogil:
        for i in range(n):
            ov[i] = _oracle1(zv[i], lv[i], pcode, npts, tol)
    return out
