"""Positive solution of the cyclic cubic system

    f_j (f_j + f_{j-1}) (f_j + f_{j+1}) = r_j r_{j+1} sin(theta_j)

and the quantities derived from it: tangency fractions, corner triangles
and the maximal affine perimeter of a polygon whose limit shape touches
every side.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import NoConvergence
from .geom import Polygon

log = logging.getLogger(__name__)

TWO_23 = 2.0 ** (2.0 / 3.0)


@dataclass(frozen=True, eq=False)
class PSSolution:
    f: np.ndarray
    rhs: np.ndarray
    iterations: int

    @property
    def kappa(self) -> int:
        return len(self.f)

    @property
    def w(self) -> np.ndarray:
        """``w_j = f_j / (f_j + f_{j-1})``."""
        return self.f / (self.f + np.roll(self.f, 1))

    @property
    def g(self) -> np.ndarray:
        return self.f / self.f.sum()

    @property
    def ap_star(self) -> float:
        return TWO_23 * float(self.f.sum())

    @property
    def triangles(self) -> np.ndarray:
        """Corner triangle areas ``T_j = f_j**3 / 2``."""
        return 0.5 * self.f**3

    @property
    def residual(self) -> np.ndarray:
        return ps_residual(self.f, self.rhs)

    @property
    def residual_inf(self) -> float:
        return float(np.max(np.abs(self.residual)))


def ps_rhs(r, theta) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    return r * np.roll(r, -1) * np.sin(np.asarray(theta, dtype=float))


def ps_residual(f, rhs) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    return f * (f + np.roll(f, 1)) * (f + np.roll(f, -1)) - rhs


def _log_residual(y, log_rhs):
    f = np.exp(y)
    return y + np.log(f + np.roll(f, 1)) + np.log(f + np.roll(f, -1)) - log_rhs


def _log_jacobian(y):
    f = np.exp(y)
    k = len(f)
    a = f / (f + np.roll(f, 1))   # d/dy_j of log(f_j + f_{j-1})
    b = f / (f + np.roll(f, -1))  # d/dy_j of log(f_j + f_{j+1})
    jac = np.zeros((k, k))
    idx = np.arange(k)
    jac[idx, idx] = 1.0 + a + b
    # cyclic tridiagonal couplings; for k = 3 the two neighbours are distinct
    np.add.at(jac, (idx, (idx - 1) % k), 1.0 - a)
    np.add.at(jac, (idx, (idx + 1) % k), 1.0 - b)
    return jac


def _newton(y, log_rhs, tol, max_iter):
    res = _log_residual(y, log_rhs)
    norm = float(np.max(np.abs(res)))
    for it in range(1, max_iter + 1):
        if norm < tol:
            return y, it - 1, True
        step = np.linalg.solve(_log_jacobian(y), -res)
        lam = 1.0
        while True:
            y_new = y + lam * step
            res_new = _log_residual(y_new, log_rhs)
            norm_new = float(np.max(np.abs(res_new)))
            if norm_new < norm or lam < 1e-10:
                break
            lam *= 0.5
        if not norm_new < norm:
            return y, it, False
        y, res, norm = y_new, res_new, norm_new
    return y, max_iter, norm < tol


def _cubic_root(a, b, rhs):
    """Positive root of f (f + a) (f + b) = rhs by bisection."""
    lo, hi = 0.0, max(rhs ** (1.0 / 3.0), 1e-300)
    while hi * (hi + a) * (hi + b) < rhs:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid * (mid + a) * (mid + b) < rhs:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-16 * hi:
            break
    return 0.5 * (lo + hi)


def _sweeps(f, rhs, count):
    f = f.copy()
    k = len(f)
    for _ in range(count):
        prev = f.copy()
        for j in range(k):
            f[j] = _cubic_root(f[j - 1], f[(j + 1) % k], rhs[j])
        if np.max(np.abs(f - prev)) <= 1e-15 * np.max(f):
            break
    return f


def initial_guess(rhs) -> np.ndarray:
    """``(rhs_j / 4) ** (1/3)``; exact on regular polygons."""
    return (np.asarray(rhs, dtype=float) / 4.0) ** (1.0 / 3.0)


def solve_ps(r, theta, f0=None, tol: float = 1e-14, max_iter: int = 200) -> PSSolution:
    """Solve the system by damped Newton iteration on ``log f``.

    ``tol`` bounds the max relative residual. Falls back to Gauss-Seidel
    sweeps (each coordinate solved exactly by bisection) when Newton stalls.
    """
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if len(r) < 3 or r.shape != theta.shape or np.any(r <= 0):
        raise NoConvergence("system needs at least 3 sides of positive length")
    if np.any(theta <= 0) or np.any(theta >= math.pi * (1 - 1e-12)):
        raise NoConvergence("every angle must lie strictly between 0 and pi")
    rhs = ps_rhs(r, theta)
    log_rhs = np.log(rhs)
    f = initial_guess(rhs) if f0 is None else np.asarray(f0, dtype=float)
    y, its, ok = _newton(np.log(f), log_rhs, tol, max_iter)
    total = its
    if not ok:
        log.debug("Newton stalled after %d iterations, running fixed-point sweeps", its)
        f = _sweeps(np.exp(y), rhs, 10_000)
        y, its, ok = _newton(np.log(f), log_rhs, tol, max_iter)
        total += its
    # relative residual tol ~1e-14 is at the rounding floor; accept 1e-12 there
    if not ok and np.max(np.abs(_log_residual(y, log_rhs))) > 1e-12:
        raise NoConvergence(f"system did not converge after {total} iterations")
    return PSSolution(f=np.exp(y), rhs=rhs, iterations=total)


def solve_polygon(polygon: Polygon, **kwargs) -> PSSolution:
    return solve_ps(polygon.r, polygon.theta, **kwargs)


def tangency_points(polygon: Polygon, sol: PSSolution) -> np.ndarray:
    """Tangency point on every side.

    ``p_j`` sits at distance ``w_j r_j`` from the end vertex ``v_{j+1}`` of
    side ``j``, so that the corner triangle ``(p_j, v_{j+1}, p_{j+1})`` has
    legs ``w_j r_j`` and ``(1 - w_{j+1}) r_{j+1}`` and area ``f_j**3 / 2``.
    """
    v = polygon.vertices
    w = sol.w
    v_next = np.roll(v, -1, axis=0)
    return v_next - w[:, None] * (v_next - v)


def affine_perimeter_of_chain(polygon: Polygon, u) -> float:
    """``2**(2/3) * sum_i (r_i u_i r_{i+1} (1 - u_{i+1}) sin theta_i) ** (1/3)``.

    ``u_j`` is the position of the chain point on side ``j`` measured back from
    ``v_{j+1}`` as a fraction of ``r_j`` (the convention of
    :func:`tangency_points`), so each term is ``2 * cbrt(T_i)`` for the corner
    triangle at ``v_{i+1}``.
    """
    u = np.asarray(u, dtype=float)
    r = polygon.r
    prod = r * u * np.roll(r, -1) * (1.0 - np.roll(u, -1)) * np.sin(polygon.theta)
    return TWO_23 * float(np.sum(np.cbrt(np.maximum(prod, 0.0))))


def regular_f(r: float, kappa: int) -> float:
    """Closed form for the regular ``kappa``-gon with side ``r``."""
    theta = (kappa - 2) * math.pi / kappa
    return (r * r * math.sin(theta) / 4.0) ** (1.0 / 3.0)
