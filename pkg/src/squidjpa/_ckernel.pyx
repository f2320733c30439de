# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled time stepper. Mirrors ``_pykernel.run_span`` operation for operation."""

from libc.math cimport sin, cos, isfinite, M_PI

DEF MAX_FREQS = 32


cdef inline void _phasor(long long k, long long m, long long two_m,
                         double* re, double* im) noexcept nogil:
    cdef double ang = 2.0 * M_PI * <double>((k * m) % two_m) / <double>two_m
    re[0] = cos(ang)
    im[0] = sin(ang)


cdef inline double _accel(double p, double vel, double d, double gamma, double w0sq,
                          double wj2, double inv_n, double sy0, double cy0,
                          bint nonlinear, double two_gamma) noexcept nogil:
    cdef double u, br
    if nonlinear:
        u = p * inv_n
        br = (sin(u) - u) * cy0 + (cos(u) - 1.0) * sy0
    else:
        br = 0.0
    return -gamma * vel - w0sq * p - wj2 * br + two_gamma * d


def run_span(double[::1] state, long long n_start, long long n_steps, long long two_m,
             double h, double[::1] coef, long long[::1] tone_k, double[::1] tone_b_re,
             double[::1] tone_b_im, long long[::1] harm_k, double[::1] acc,
             long long resync):
    cdef Py_ssize_t nt = tone_k.shape[0]
    cdef Py_ssize_t nh = harm_k.shape[0]
    if nt > MAX_FREQS or nh > MAX_FREQS:
        raise ValueError("too many tones or tracked harmonics")

    cdef double gamma = coef[0], w0sq = coef[1], wj2 = coef[2], inv_n = coef[3]
    cdef double sy0 = coef[4], cy0 = coef[5]
    cdef bint nonlinear = coef[6] != 0.0
    cdef double two_gamma = 2.0 * gamma

    cdef long long tk[MAX_FREQS]
    cdef long long hk[MAX_FREQS]
    cdef double bre[MAX_FREQS]
    cdef double bim[MAX_FREQS]
    cdef double rtr[MAX_FREQS]
    cdef double rti[MAX_FREQS]
    cdef double rhr[MAX_FREQS]
    cdef double rhi[MAX_FREQS]
    cdef double ztr[MAX_FREQS]
    cdef double zti[MAX_FREQS]
    cdef double zhr[MAX_FREQS]
    cdef double zhi[MAX_FREQS]
    cdef double hre[MAX_FREQS]
    cdef double him[MAX_FREQS]
    cdef Py_ssize_t j
    for j in range(nt):
        tk[j] = tone_k[j]
        bre[j] = tone_b_re[j]
        bim[j] = tone_b_im[j]
        _phasor(tk[j], 1, two_m, &rtr[j], &rti[j])
    for j in range(nh):
        hk[j] = harm_k[j]
        hre[j] = acc[2 * j]
        him[j] = acc[2 * j + 1]
        _phasor(hk[j], 2, two_m, &rhr[j], &rhi[j])

    cdef double phi = state[0], v = state[1]
    cdef double pin = acc[2 * nh], pout = acc[2 * nh + 1]
    cdef double half = 0.5 * h, sixth = h / 6.0
    cdef double d0, dm, d1, zr, zi, dv
    cdef double k1p, k1v, k2p, k2v, k3p, k3v, k4p, k4v
    cdef long long n, m
    cdef int status = 0

    with nogil:
        for n in range(n_start, n_start + n_steps):
            if n == n_start or n % resync == 0:
                if not (isfinite(phi) and isfinite(v)):
                    status = 1
                    break
                m = (2 * n) % two_m
                for j in range(nt):
                    _phasor(tk[j], m, two_m, &ztr[j], &zti[j])
                for j in range(nh):
                    _phasor(hk[j], m, two_m, &zhr[j], &zhi[j])

            d0 = 0.0
            for j in range(nt):
                d0 -= bre[j] * zti[j] + bim[j] * ztr[j]
            for j in range(nh):
                zr = zhr[j]
                zi = zhi[j]
                hre[j] += phi * zr
                him[j] -= phi * zi
                zhr[j] = zr * rhr[j] - zi * rhi[j]
                zhi[j] = zr * rhi[j] + zi * rhr[j]
            pin += d0 * d0
            dv = v - d0
            pout += dv * dv

            dm = 0.0
            for j in range(nt):
                zr = ztr[j]
                zi = zti[j]
                ztr[j] = zr * rtr[j] - zi * rti[j]
                zti[j] = zr * rti[j] + zi * rtr[j]
                dm -= bre[j] * zti[j] + bim[j] * ztr[j]
            d1 = 0.0
            for j in range(nt):
                zr = ztr[j]
                zi = zti[j]
                ztr[j] = zr * rtr[j] - zi * rti[j]
                zti[j] = zr * rti[j] + zi * rtr[j]
                d1 -= bre[j] * zti[j] + bim[j] * ztr[j]

            k1p = v
            k1v = _accel(phi, v, d0, gamma, w0sq, wj2, inv_n, sy0, cy0, nonlinear, two_gamma)
            k2p = v + half * k1v
            k2v = _accel(phi + half * k1p, k2p, dm, gamma, w0sq, wj2, inv_n, sy0, cy0,
                         nonlinear, two_gamma)
            k3p = v + half * k2v
            k3v = _accel(phi + half * k2p, k3p, dm, gamma, w0sq, wj2, inv_n, sy0, cy0,
                         nonlinear, two_gamma)
            k4p = v + h * k3v
            k4v = _accel(phi + h * k3p, k4p, d1, gamma, w0sq, wj2, inv_n, sy0, cy0,
                         nonlinear, two_gamma)
            phi = phi + sixth * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
            v = v + sixth * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)

    if not (isfinite(phi) and isfinite(v)):
        status = 1
    state[0] = phi
    state[1] = v
    for j in range(nh):
        acc[2 * j] = hre[j]
        acc[2 * j + 1] = him[j]
    acc[2 * nh] = pin
    acc[2 * nh + 1] = pout
    return status
