"""Compiled sum-of-sinusoids evaluation for the shadow field."""

import numba
import numpy as np

# Consecutive queries whose step matches the previous step to within this
# tolerance (meters / seconds) reuse the cached phase rotor.
STEP_TOL = 1e-9
# Re-anchor with exact cos/sin at least this often.
ANCHOR_EVERY = 64


@numba.njit(cache=True)
def field_exact(x, y, t, kx, ky, nu, phase, amp):
    n = x.shape[0]
    J = kx.shape[0]
    out = np.empty(n)
    for i in range(n):
        s = 0.0
        for j in range(J):
            s += np.cos(kx[j] * x[i] + ky[j] * y[i] + nu[j] * t[i] + phase[j])
        out[i] = amp * s
    return out


@numba.njit(cache=True, fastmath=True)
def _rotate(c, s, cr, sr):
    acc = 0.0
    for j in range(c.shape[0]):
        cj = c[j] * cr[j] - s[j] * sr[j]
        s[j] = s[j] * cr[j] + c[j] * sr[j]
        c[j] = cj
        acc += cj
    return acc


@numba.njit(cache=True)
def field_along(x, y, t, kx, ky, nu, phase, amp):
    """Evaluate at a sequence of points, rotating phases along uniform steps.

    Agrees with ``field_exact`` to rounding error; much faster for traces
    sampled at a fixed rate along straight segments.
    """
    n = x.shape[0]
    J = kx.shape[0]
    out = np.empty(n)
    c = np.empty(J)
    s = np.empty(J)
    cr = np.empty(J)
    sr = np.empty(J)
    have_rotor = False
    since_anchor = ANCHOR_EVERY
    pdx = 0.0
    pdy = 0.0
    pdt = 0.0
    for i in range(n):
        if i > 0:
            dx = x[i] - x[i - 1]
            dy = y[i] - y[i - 1]
            dt = t[i] - t[i - 1]
        else:
            dx = 0.0
            dy = 0.0
            dt = 0.0
        same_step = (
            have_rotor
            and abs(dx - pdx) <= STEP_TOL
            and abs(dy - pdy) <= STEP_TOL
            and abs(dt - pdt) <= STEP_TOL
        )
        if i > 0 and since_anchor < ANCHOR_EVERY and not same_step and since_anchor == 0:
            # second point after an anchor: build a rotor for this step
            for j in range(J):
                d = kx[j] * dx + ky[j] * dy + nu[j] * dt
                cr[j] = np.cos(d)
                sr[j] = np.sin(d)
            have_rotor = True
            same_step = True
            pdx = dx
            pdy = dy
            pdt = dt
        if same_step and since_anchor < ANCHOR_EVERY:
            out[i] = amp * _rotate(c, s, cr, sr)
            since_anchor += 1
        else:
            acc = 0.0
            for j in range(J):
                p = kx[j] * x[i] + ky[j] * y[i] + nu[j] * t[i] + phase[j]
                c[j] = np.cos(p)
                s[j] = np.sin(p)
                acc += c[j]
            out[i] = amp * acc
            have_rotor = False
            since_anchor = 0
    return out
