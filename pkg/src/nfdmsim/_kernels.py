"""Compiled inner loops for scattering, eigenvalue work and synthesis.

All routines treat the envelope as piecewise constant per sample cell
(sample j covers [t_left + j*dt, t_left + (j+1)*dt)), for which the
2x2 scattering step has the closed form

    T = cos(k dt) I + sin(k dt)/k * [[-i lam, q], [-conj(q), i lam]],
    k = sqrt(lam^2 + |q|^2),

with an exact lambda-derivative used by the eigenvalue search.  Passes are
carried in a scaled frame (left solution starts at (1, 0), right solution at
(0, 1)); the pure exponential Jost phases are reattached analytically at the
end, which keeps deep upper-half-plane evaluations inside float range.
"""

import cmath

import numpy as np
from numba import njit

_SMALL_ARG = 1e-6


@njit(cache=True)
def _coeffs(lam, q, dt):
    """cos/sinc coefficients of the per-cell transfer matrix."""
    k2 = lam * lam + (q.real * q.real + q.imag * q.imag)
    k = cmath.sqrt(k2)
    u = k * dt
    if abs(u) < _SMALL_ARG:
        c = 1.0 - 0.5 * u * u
        s = dt * (1.0 - u * u / 6.0)
    else:
        c = cmath.cos(u)
        s = cmath.sin(u) / k
    return k2, c, s


@njit(cache=True)
def _coeffs_deriv(lam, q, dt):
    """Coefficients plus their derivatives in lambda."""
    k2, c, s = _coeffs(lam, q, dt)
    dc = -lam * dt * s
    u2 = k2 * dt * dt
    if abs(u2) < _SMALL_ARG * _SMALL_ARG:
        ds = -lam * dt * dt * dt / 3.0
    else:
        ds = lam * (dt * c - s) / k2
    return c, s, dc, ds


@njit(cache=True)
def scatter_many(q, dt, t_left, lams):
    """One-sided scattering coefficients (a, b) for an array of lambdas.

    Stable for real lambdas; for Im(lam) > 0 the b output degrades with
    exp growth and the caller is expected to guard.
    """
    n = q.size
    m = lams.size
    a = np.empty(m, np.complex128)
    b = np.empty(m, np.complex128)
    span = n * dt
    for i in range(m):
        lam = lams[i]
        v1 = 1.0 + 0.0j
        v2 = 0.0j
        for j in range(n):
            qj = q[j]
            _, c, s = _coeffs(lam, qj, dt)
            ils = 1j * lam * s
            w1 = (c - ils) * v1 + qj * s * v2
            w2 = -qj.conjugate() * s * v1 + (c + ils) * v2
            v1 = w1
            v2 = w2
        a[i] = v1 * cmath.exp(1j * lam * span)
        b[i] = v2 * cmath.exp(-1j * lam * (2.0 * t_left + span))
    return a, b


@njit(cache=True)
def fb_quantities(q, dt, t_left, lam, m_idx):
    """Forward/backward pass meeting at sample boundary m_idx.

    Returns (det, det_lam, num, den, nphi) where det / det_lam give the
    Wronskian a(lam) and its lambda-derivative (up to the analytic phase
    factors reattached by the caller), num/den is the scaled-frame
    projection of the left solution on the right one (b up to phases), and
    nphi is the squared norm of the left solution at the matching point.
    """
    n = q.size
    # left pass with derivative
    p1 = 1.0 + 0.0j
    p2 = 0.0j
    d1 = 0.0j
    d2 = 0.0j
    for j in range(m_idx):
        qj = q[j]
        c, s, dc, ds = _coeffs_deriv(lam, qj, dt)
        ils = 1j * lam * s
        t11 = c - ils
        t12 = qj * s
        t21 = -qj.conjugate() * s
        t22 = c + ils
        dt11 = dc - 1j * (s + lam * ds)
        dt12 = qj * ds
        dt21 = -qj.conjugate() * ds
        dt22 = dc + 1j * (s + lam * ds)
        nd1 = t11 * d1 + t12 * d2 + dt11 * p1 + dt12 * p2
        nd2 = t21 * d1 + t22 * d2 + dt21 * p1 + dt22 * p2
        np1 = t11 * p1 + t12 * p2
        np2 = t21 * p1 + t22 * p2
        p1 = np1
        p2 = np2
        d1 = nd1
        d2 = nd2
    # right pass with derivative (backward: same cell matrices with dt -> -dt)
    r1 = 0.0j
    r2 = 1.0 + 0.0j
    e1 = 0.0j
    e2 = 0.0j
    for j in range(n - 1, m_idx - 1, -1):
        qj = q[j]
        c, s, dc, ds = _coeffs_deriv(lam, qj, dt)
        ils = 1j * lam * s
        t11 = c + ils
        t12 = -qj * s
        t21 = qj.conjugate() * s
        t22 = c - ils
        dt11 = dc + 1j * (s + lam * ds)
        dt12 = -qj * ds
        dt21 = qj.conjugate() * ds
        dt22 = dc - 1j * (s + lam * ds)
        ne1 = t11 * e1 + t12 * e2 + dt11 * r1 + dt12 * r2
        ne2 = t21 * e1 + t22 * e2 + dt21 * r1 + dt22 * r2
        nr1 = t11 * r1 + t12 * r2
        nr2 = t21 * r1 + t22 * r2
        r1 = nr1
        r2 = nr2
        e1 = ne1
        e2 = ne2
    det = p1 * r2 - p2 * r1
    det_lam = d1 * r2 - d2 * r1 + p1 * e2 - p2 * e1
    num = p1 * r1.conjugate() + p2 * r2.conjugate()
    den = r1.real * r1.real + r1.imag * r1.imag + r2.real * r2.real + r2.imag * r2.imag
    nphi = p1.real * p1.real + p1.imag * p1.imag + p2.real * p2.real + p2.imag * p2.imag
    return det, det_lam, num, den, nphi


@njit(cache=True)
def dressing_centers(q, dt, t_left, lam, beta):
    """Cell-center values of phi_left + beta * psi_right at spectral point lam.

    phi_left / psi_right are the true (unscaled) Jost solutions of the
    potential q; the combination is the auxiliary solution consumed by the
    eigenvalue-addition transform.
    """
    n = q.size
    u1 = np.empty(n, np.complex128)
    u2 = np.empty(n, np.complex128)
    t_right = t_left + n * dt
    # left sweep: start value of the true left Jost solution at t_left
    f = cmath.exp(-1j * lam * t_left)
    v1 = f
    v2 = 0.0j
    for j in range(n):
        qj = q[j]
        _, c, s = _coeffs(lam, qj, 0.5 * dt)
        ils = 1j * lam * s
        u1[j] = (c - ils) * v1 + qj * s * v2
        u2[j] = -qj.conjugate() * s * v1 + (c + ils) * v2
        _, c, s = _coeffs(lam, qj, dt)
        ils = 1j * lam * s
        w1 = (c - ils) * v1 + qj * s * v2
        w2 = -qj.conjugate() * s * v1 + (c + ils) * v2
        v1 = w1
        v2 = w2
    # right sweep: true right Jost solution, scaled by beta
    g = beta * cmath.exp(1j * lam * t_right)
    v1 = 0.0j
    v2 = g
    for j in range(n - 1, -1, -1):
        qj = q[j]
        _, c, s = _coeffs(lam, qj, 0.5 * dt)
        ils = 1j * lam * s
        # half step backward from the right cell boundary to the center
        u1[j] += (c + ils) * v1 - qj * s * v2
        u2[j] += qj.conjugate() * s * v1 + (c - ils) * v2
        _, c, s = _coeffs(lam, qj, dt)
        ils = 1j * lam * s
        w1 = (c + ils) * v1 - qj * s * v2
        w2 = qj.conjugate() * s * v1 + (c - ils) * v2
        v1 = w1
        v2 = w2
    return u1, u2


@njit(cache=True)
def darboux_step(q, lam, u1, u2):
    """Add eigenvalue lam to the potential using auxiliary solution (u1, u2)."""
    n = q.size
    out = np.empty(n, np.complex128)
    shift = 2j * (lam.conjugate() - lam)
    for j in range(n):
        a1 = u1[j]
        a2 = u2[j]
        d = a1.real * a1.real + a1.imag * a1.imag + a2.real * a2.real + a2.imag * a2.imag
        out[j] = q[j] + shift * a1 * a2.conjugate() / d
    return out


@njit(cache=True)
def dress_aux(mu, lam, u1, u2, w1, w2):
    """Map an auxiliary solution at mu through the lam-addition transform.

    w <- (mu I - Sigma) w with Sigma built from the dressing solution u.
    Updates w1, w2 in place.
    """
    n = w1.size
    dl = lam - lam.conjugate()
    for j in range(n):
        a1 = u1[j]
        a2 = u2[j]
        d = a1.real * a1.real + a1.imag * a1.imag + a2.real * a2.real + a2.imag * a2.imag
        n1 = a1.real * a1.real + a1.imag * a1.imag
        s11 = (lam * n1 + lam.conjugate() * (d - n1)) / d
        s12 = dl * a1 * a2.conjugate() / d
        s21 = dl * a2 * a1.conjugate() / d
        s22 = (lam * (d - n1) + lam.conjugate() * n1) / d
        b1 = (mu - s11) * w1[j] - s12 * w2[j]
        b2 = -s21 * w1[j] + (mu - s22) * w2[j]
        w1[j] = b1
        w2[j] = b2


@njit(cache=True)
def tib_invert(omega, dtau):
    """Inner-bordering solve of the discretized layer integral equations.

    omega holds the kernel sampled at tau_m = 2*t_left + m*dtau (dtau twice
    the envelope step); returns the reconstructed envelope samples.
    """
    n = omega.size
    q = np.empty(n, np.complex128)
    r = omega * dtau
    r[0] *= 0.5
    q[0] = -2.0 * omega[0]
    y = np.zeros(n, np.complex128)
    y_prev = np.zeros(n, np.complex128)
    z = np.zeros(n, np.complex128)
    z_prev = np.zeros(n, np.complex128)
    y[0] = 1.0 / (1.0 + (r[0].real * r[0].real + r[0].imag * r[0].imag))
    z[0] = -r[0] * y[0]
    for m in range(1, n):
        beta = 0.0j
        for j in range(m + 1):
            beta += r[m - j] * y[j]
        q[m] = -2.0 * beta / dtau
        c = 1.0 / (1.0 + (beta.real * beta.real + beta.imag * beta.imag))
        d = -beta * c
        tmp = y
        y = y_prev
        y_prev = tmp
        tmp = z
        z = z_prev
        z_prev = tmp
        # y_prev/z_prev now hold step-m-1 vectors; entries >= m are zero pads
        for j in range(m + 1):
            y[j] = c * y_prev[j] - d * z_prev[m - j].conjugate()
            z[j] = c * z_prev[j] + d * y_prev[m - j].conjugate()
    return q
