"""Asymptotic equivalent of the convex-position probability of a polygon.

    P_K(n) ~ C * e^{2n} 4^{-n} AP*^{3n} Area(K)^{-n} n^{-(2n + m/2)}

with the constant ``C`` computed on the enlarged polygon ``K_T`` whose limit
shape touches every side, plus exact closed forms for the square, the
triangle and the bi-pointed triangle used as references.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .domfinder import DomReport, find_dom
from .errors import SingularMatrix
from .geom import Polygon
from .pssolver import PSSolution

EXACT_MAX_N = 30


def mixing_rates(k_t: Polygon, sol: PSSolution) -> np.ndarray:
    """Rates of the limiting exponential side-distances, one per side of ``k_t``."""
    r, th, g = k_t.r, k_t.theta, sol.g
    sin, cot = np.sin(th), 1.0 / np.tan(th)
    sh = lambda a, k: np.roll(a, -k)  # noqa: E731  sh(a, k)[j] == a[j + k]
    return (
        (sh(cot, -1) + cot) / r * (g + sh(g, -1))
        + (sh(g, 1) + g) / (sin * sh(r, 1))
        + (sh(g, -1) + sh(g, -2)) / (sh(sin, -1) * sh(r, -1))
    )


def quadratic_form(x, g) -> np.ndarray:
    """``sum_j x_j^2/g_j + (x_j + x_{j+1})^2/(g_j + g_{j+1})`` with ``x_k = -sum x``.

    ``x`` has shape (..., k-1).
    """
    x = np.asarray(x, dtype=float)
    g = np.asarray(g, dtype=float)
    full = np.concatenate([x, -x.sum(axis=-1, keepdims=True)], axis=-1)
    nxt = np.roll(full, -1, axis=-1)
    return np.sum(full**2 / g + (full + nxt) ** 2 / (g + np.roll(g, -1)), axis=-1)


def precision_matrix(g) -> tuple[np.ndarray, float]:
    """Matrix of :func:`quadratic_form` (so that Q(x) = x^T S x) and its determinant."""
    g = np.asarray(g, dtype=float)
    k = len(g)
    lift = np.vstack([np.eye(k - 1), -np.ones((1, k - 1))])
    diag = np.diag(1.0 / g)
    nb = np.eye(k) + np.roll(np.eye(k), 1, axis=1)  # row j selects x_j + x_{j+1}
    pair = nb.T @ np.diag(1.0 / (g + np.roll(g, -1))) @ nb
    s = lift.T @ (diag + pair) @ lift
    s = 0.5 * (s + s.T)
    try:
        chol = np.linalg.cholesky(s)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrix("precision matrix is not positive definite") from exc
    return s, float(np.prod(np.diag(chol)) ** 2)


def precision_matrix_componentwise(g) -> tuple[np.ndarray, float]:
    """Alternative componentwise closed form for the precision matrix.

    Kept for comparison only: it disagrees with the Hessian of the quadratic
    form (on the unit square its determinant is 1600 instead of 1024, and only
    1024 reproduces the known square constant 1/(32 pi^2)).
    """
    g = np.asarray(g, dtype=float)
    k = len(g)
    G = lambda i: g[i - 1]  # noqa: E731  one-based access
    m = np.zeros((k - 1, k - 1))
    for j in range(1, k):
        m[j - 1, j - 1] = (
            1 / G(j) + 1 / G(k) + 1 / (G(1) + G(k)) + 1 / (G(k - 1) + G(k))
            + (j != 1) / (G(j - 1) + G(j)) + (j != k - 1) / (G(j + 1) + G(j))
        )
    for i in range(1, k):
        for j in range(i + 1, k):
            m[i - 1, j - 1] = m[j - 1, i - 1] = (
                1 / G(k) + (j == i + 1) / (G(j - 1) + G(j))
                + (i != 1) / (G(k) + G(1)) + (j != k - 1) / (G(k - 1) + G(k))
            )
    return m, float(np.linalg.det(m))


def constant_C(k_t: Polygon, sol: PSSolution, m_rates, d_K: float) -> float:
    k = k_t.kappa
    prod = np.sqrt(sol.w) * np.asarray(m_rates) * np.sin(k_t.theta) * k_t.r
    return float(math.exp(-0.5 * k * math.log(2 * math.pi) - 0.5 * math.log(d_K) - np.sum(np.log(prod))))


@dataclass(frozen=True, eq=False)
class AsymptoticModel:
    dom: DomReport
    m_rates: np.ndarray
    sigma_inv: np.ndarray
    d_K: float
    C_K: float
    area: float
    sigma_inv_componentwise: np.ndarray
    d_K_componentwise: float

    @property
    def ap_star(self) -> float:
        return self.dom.ap_star

    @property
    def m_tangency(self) -> int:
        return self.dom.m

    @property
    def kappa(self) -> int:
        return self.dom.K_T.kappa

    @property
    def g(self) -> np.ndarray:
        return self.dom.solution.g

    def log_prob(self, n):
        """Natural log of the asymptotic equivalent of ``P_K(n)``; vectorised over ``n``."""
        n = np.asarray(n, dtype=float)
        out = (
            math.log(self.C_K)
            + 2 * n
            - n * math.log(4.0)
            + 3 * n * math.log(self.ap_star)
            - n * math.log(self.area)
            - (2 * n + self.m_tangency / 2) * np.log(n)
        )
        return float(out) if out.ndim == 0 else out

    def barany_limit(self) -> float:
        """``lim n^2 P_K(n)^{1/n} = e^2 AP*^3 / (4 Area)``."""
        return math.e**2 * self.ap_star**3 / (4.0 * self.area)


def build_model(polygon: Polygon, dom: DomReport | None = None) -> AsymptoticModel:
    if dom is None:
        dom = find_dom(polygon)
    k_t, sol = dom.K_T, dom.solution
    m = mixing_rates(k_t, sol)
    s, d = precision_matrix(sol.g)
    sp, dp = precision_matrix_componentwise(sol.g)
    return AsymptoticModel(
        dom=dom,
        m_rates=m,
        sigma_inv=s,
        d_K=d,
        C_K=constant_C(k_t, sol, m, d),
        area=polygon.area,
        sigma_inv_componentwise=sp,
        d_K_componentwise=dp,
    )


def log_prob_asymptotic(polygon: Polygon, n):
    return build_model(polygon).log_prob(n)


def barany_log_limit(polygon: Polygon) -> float:
    return build_model(polygon).barany_limit()


def barany_proxy(log_p, n):
    """``n^2 P^{1/n}`` from ``log P``."""
    n = np.asarray(n, dtype=float)
    return np.exp(np.asarray(log_p) / n + 2 * np.log(n))


# ---------------------------------------------------------------- references

SHAPES = ("square", "triangle", "bipointed")


def _lf(k: int) -> float:
    return math.lgamma(k + 1)


def log_exact(shape: str, n: int) -> float:
    """Log of the exact probability, via log-gamma (no overflow for large ``n``)."""
    _check(shape, n)
    if shape == "square":
        return 2 * (_lf(2 * n - 2) - 2 * _lf(n - 1)) - 2 * _lf(n)
    if shape == "triangle":
        return n * math.log(2) + _lf(3 * n - 3) - _lf(2 * n) - 3 * _lf(n - 1)
    return n * math.log(2) - _lf(n) - _lf(n + 1)


def exact_fraction(shape: str, n: int) -> Fraction:
    _check(shape, n)
    f = math.factorial
    if shape == "square":
        return Fraction(math.comb(2 * n - 2, n - 1) ** 2, f(n) ** 2)
    if shape == "triangle":
        return Fraction(2**n * f(3 * n - 3), f(2 * n) * f(n - 1) ** 3)
    return Fraction(2**n, f(n) * f(n + 1))


def log_fraction(q: Fraction) -> float:
    """Log of a positive rational with arbitrarily large numerator and denominator."""
    return math.log(q.numerator) - math.log(q.denominator)


def exact_reference(shape: str, n: int) -> tuple[float, Fraction | None]:
    """``(log value, exact rational or None)``; the rational is given for ``n <= 30``."""
    return log_exact(shape, n), (exact_fraction(shape, n) if n <= EXACT_MAX_N else None)


def _check(shape: str, n: int) -> None:
    if shape not in SHAPES:
        raise ValueError(f"unknown shape {shape!r}; expected one of {SHAPES}")
    lo = 1 if shape == "bipointed" else 3
    if int(n) != n or n < lo:
        raise ValueError(f"{shape} needs an integer n >= {lo}")


VALTR_CONSTANTS = {
    "square": 1.0 / (32.0 * math.pi**2),
    "triangle": math.sqrt(3.0) / (108.0 * math.pi**1.5),
}
