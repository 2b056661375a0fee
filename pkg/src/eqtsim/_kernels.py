"""Compiled inner loops.  Callers own validation and random draws."""

import math

import numpy as np
from numba import njit

DONE = 0
JUMP = 1
GROWTH = 2

BISECT_TOL = 1e-10
GROWTH_TOL = 1e-12


@njit(cache=True)
def _matvec(K, v):
    n = v.shape[0]
    out = np.zeros(n, dtype=np.complex128)
    for i in range(n):
        acc = 0j
        for j in range(n):
            acc += K[i, j] * v[j]
        out[i] = acc
    return out


@njit(cache=True)
def _norm2(v):
    acc = 0.0
    for i in range(v.shape[0]):
        acc += v[i].real * v[i].real + v[i].imag * v[i].imag
    return acc


@njit(cache=True)
def _taylor4(K, h, T, term, tmp):
    """Write the degree-4 Taylor polynomial of ``hK`` into ``T`` (scratch: term, tmp)."""
    n = K.shape[0]
    for i in range(n):
        for j in range(n):
            T[i, j] = 1.0 if i == j else 0.0
            term[i, j] = T[i, j]
    for p in range(1, 5):
        c = h / p
        for i in range(n):
            for j in range(n):
                acc = 0j
                for m in range(n):
                    acc += term[i, m] * K[m, j]
                tmp[i, j] = c * acc
        for i in range(n):
            for j in range(n):
                term[i, j] = tmp[i, j]
                T[i, j] += tmp[i, j]


@njit(cache=True)
def rk4_matrix(K, h):
    """One RK4 step of ``psi' = K psi`` as a matrix: the degree-4 Taylor polynomial of ``hK``."""
    n = K.shape[0]
    T = np.empty((n, n), dtype=np.complex128)
    _taylor4(K, h, T, np.empty_like(T), np.empty_like(T))
    return T


@njit(cache=True)
def rk4_linear(K, psi, h):
    return _matvec(rk4_matrix(K, h), psi)


@njit(cache=True)
def _apply(T, v, out):
    m2 = 0.0
    n = v.shape[0]
    for i in range(n):
        acc = 0j
        for j in range(n):
            acc += T[i, j] * v[j]
        out[i] = acc
        m2 += acc.real * acc.real + acc.imag * acc.imag
    return m2


@njit(cache=True)
def advance(K, psi, h, n_steps, r, hist):
    """Step ``psi' = K psi`` until ``|psi|^2 <= r`` or ``n_steps`` are done.

    Returns ``(psi, k, s, status)``: on a jump the crossing lies ``s`` into
    step ``k`` (0-based) and was located by bisection on a re-integrated
    partial step; otherwise ``k == n_steps``.  ``hist[j]`` receives the
    squared norm after ``j`` steps; pass an empty array to skip recording.
    """
    n = psi.shape[0]
    T = np.empty((n, n), dtype=np.complex128)
    term = np.empty_like(T)
    tmp = np.empty_like(T)
    _taylor4(K, h, T, term, tmp)
    cur = psi.copy()
    new = np.empty(n, dtype=np.complex128)
    n2 = _norm2(cur)
    record = hist.shape[0] > 0
    if record:
        hist[0] = n2
    if n2 <= r:
        return cur, 0, 0.0, JUMP
    for k in range(n_steps):
        m2 = _apply(T, cur, new)
        if m2 > n2 + GROWTH_TOL:
            return cur, k, 0.0, GROWTH
        if record:
            hist[k + 1] = m2
        if m2 <= r:
            if r - m2 <= BISECT_TOL:
                return new, k, h, JUMP
            lo = 0.0
            hi = h
            s = h
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                _taylor4(K, mid, T, term, tmp)
                f = _apply(T, cur, new) - r
                s = mid
                if abs(f) <= BISECT_TOL:
                    break
                if f > 0.0:
                    lo = mid
                else:
                    hi = mid
                if hi - lo <= 1e-300:
                    break
            return new, k, s, JUMP
        cur, new = new, cur
        n2 = m2
    return cur, n_steps, 0.0, DONE


@njit(cache=True)
def chaos_game(dirs, eps, omega, r0, dts, us, points, detectors):
    """Bloch-sphere chaos game for a zero-sum detector set.

    Before jump ``k`` the state is rotated about z by ``omega * dts[k]``;
    the detector is the first whose cumulative probability reaches
    ``us[k]`` (zero-probability detectors are never chosen).
    """
    x = r0[0]
    y = r0[1]
    z = r0[2]
    n_det = dirs.shape[0]
    e2 = eps * eps
    norm = n_det * (1.0 + e2)
    for k in range(dts.shape[0]):
        if omega != 0.0:
            a = omega * dts[k]
            c = math.cos(a)
            s = math.sin(a)
            x, y = c * x - s * y, s * x + c * y
        u = us[k]
        cum = 0.0
        pick = -1
        last = -1
        for i in range(n_det):
            nr = dirs[i, 0] * x + dirs[i, 1] * y + dirs[i, 2] * z
            p = (1.0 + e2 + 2.0 * eps * nr) / norm
            if p > 0.0:
                last = i
                cum += p
                if cum >= u:
                    pick = i
                    break
        if pick < 0:
            pick = last
        nx = dirs[pick, 0]
        ny = dirs[pick, 1]
        nz = dirs[pick, 2]
        nr = nx * x + ny * y + nz * z
        w = 1.0 + e2 + 2.0 * eps * nr
        b = 2.0 * eps * (1.0 + eps * nr)
        x = ((1.0 - e2) * x + b * nx) / w
        y = ((1.0 - e2) * y + b * ny) / w
        z = ((1.0 - e2) * z + b * nz) / w
        points[k, 0] = x
        points[k, 1] = y
        points[k, 2] = z
        detectors[k] = pick


@njit(cache=True)
def affine_orbit(maps, choices, v0, out):
    x = v0[0]
    y = v0[1]
    w = v0[2]
    for k in range(choices.shape[0]):
        A = maps[choices[k]]
        nx = A[0, 0] * x + A[0, 1] * y + A[0, 2] * w
        ny = A[1, 0] * x + A[1, 1] * y + A[1, 2] * w
        nw = A[2, 0] * x + A[2, 1] * y + A[2, 2] * w
        x = nx
        y = ny
        w = nw
        out[k, 0] = x
        out[k, 1] = y
