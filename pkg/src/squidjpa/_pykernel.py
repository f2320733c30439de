"""Pure-Python time stepper; reference for the compiled ``_ckernel``.

Both modules implement one function, :func:`run_span`, with identical
arithmetic. Time is measured in half-steps so that every RK4 stage time is an
integer index, and all tone/harmonic phases are integer multiples of the base
frequency. Phasors advance by rotation and are re-synced exactly from the
integer index every ``resync`` steps.

Layout of ``coef``: ``[gamma, omega0_sq, omega_j_sq, 1/N, sin(y0), cos(y0),
nonlinear_flag]``. ``acc`` holds ``2*len(harm_k)`` harmonic sums (re, im
interleaved) followed by the running sums of ``dphi_in**2`` and
``dphi_out**2``.
"""

import math

MAX_FREQS = 32


def _phasor(k, m, two_m):
    ang = 2.0 * math.pi * ((k * m) % two_m) / two_m
    return math.cos(ang), math.sin(ang)


def run_span(state, n_start, n_steps, two_m, h, coef, tone_k, tone_b_re, tone_b_im,
             harm_k, acc, resync):
    """Advance ``state = [phi, dphi]`` by ``n_steps`` RK4 steps in place.

    Returns 0 on success and 1 if the trajectory became non-finite.
    """
    gamma, w0sq, wj2, inv_n, sy0, cy0, nl = (float(c) for c in coef)
    nonlinear = nl != 0.0
    two_gamma = 2.0 * gamma
    nt = len(tone_k)
    nh = len(harm_k)
    if nt > MAX_FREQS or nh > MAX_FREQS:
        raise ValueError("too many tones or tracked harmonics")
    tk = [int(k) for k in tone_k]
    hk = [int(k) for k in harm_k]
    bre = [float(b) for b in tone_b_re]
    bim = [float(b) for b in tone_b_im]

    # half-step rotators
    rot_t = [_phasor(k, 1, two_m) for k in tk]
    rot_h = [_phasor(k, 2, two_m) for k in hk]
    zt = [(1.0, 0.0)] * nt
    zh = [(1.0, 0.0)] * nh

    phi = float(state[0])
    v = float(state[1])
    hre = [float(acc[2 * j]) for j in range(nh)]
    him = [float(acc[2 * j + 1]) for j in range(nh)]
    pin = float(acc[2 * nh])
    pout = float(acc[2 * nh + 1])
    half = 0.5 * h
    sixth = h / 6.0
    status = 0

    def accel(p, vel, d):
        if nonlinear:
            u = p * inv_n
            br = (math.sin(u) - u) * cy0 + (math.cos(u) - 1.0) * sy0
        else:
            br = 0.0
        return -gamma * vel - w0sq * p - wj2 * br + two_gamma * d

    def drive():
        s = 0.0
        for j in range(nt):
            zr, zi = zt[j]
            s -= bre[j] * zi + bim[j] * zr
        return s

    def advance_tones():
        for j in range(nt):
            zr, zi = zt[j]
            rr, ri = rot_t[j]
            zt[j] = (zr * rr - zi * ri, zr * ri + zi * rr)

    for n in range(n_start, n_start + n_steps):
        if n == n_start or n % resync == 0:
            if not (math.isfinite(phi) and math.isfinite(v)):
                status = 1
                break
            m = (2 * n) % two_m
            for j in range(nt):
                zt[j] = _phasor(tk[j], m, two_m)
            for j in range(nh):
                zh[j] = _phasor(hk[j], m, two_m)

        d0 = drive()
        for j in range(nh):
            zr, zi = zh[j]
            hre[j] += phi * zr
            him[j] -= phi * zi
            rr, ri = rot_h[j]
            zh[j] = (zr * rr - zi * ri, zr * ri + zi * rr)
        pin += d0 * d0
        dv = v - d0
        pout += dv * dv

        advance_tones()
        dm = drive()
        advance_tones()
        d1 = drive()

        k1p = v
        k1v = accel(phi, v, d0)
        k2p = v + half * k1v
        k2v = accel(phi + half * k1p, k2p, dm)
        k3p = v + half * k2v
        k3v = accel(phi + half * k2p, k3p, dm)
        k4p = v + h * k3v
        k4v = accel(phi + h * k3p, k4p, d1)
        phi = phi + sixth * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
        v = v + sixth * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)

    if not (math.isfinite(phi) and math.isfinite(v)):
        status = 1
    state[0] = phi
    state[1] = v
    for j in range(nh):
        acc[2 * j] = hre[j]
        acc[2 * j + 1] = him[j]
    acc[2 * nh] = pin
    acc[2 * nh + 1] = pout
    return status
