"""Reduced free energies along symmetric order-parameter families and coexistence scans.

Potts: the total measure ``nu_{j,u}`` puts ``(1 + u(q-1))/q`` on colour ``j``
and ``(1-u)/q`` elsewhere.  Ising with a symmetric field law: ``nu_m`` has
magnetisation ``m``.  In both cases the reduced function below agrees with
``phi[pi](Gamma(nu))`` (up to a constant) at every solution of the mean-field
equation and is stationary exactly there, so its local minima are the
candidate phases and equal depth marks a first-order transition.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import golden

from .exceptions import NoBracket, ValidationError

GRID_POINTS = 2001
INNER_TOL = 1e-10


def potts_order_parameter_measure(q, j, u):
    """``nu_{j,u}`` as a length-``q`` vector (``j`` is 0-based)."""
    nu = np.full(q, (1.0 - u) / q)
    nu[j] = (1.0 + u * (q - 1)) / q
    return nu


def _potts_parts(q, beta, B, u):
    u = np.asarray(u, dtype=float)
    e = np.exp(beta * u)
    A = e * math.exp(B) + q - 1
    D = e + math.exp(B) + q - 2
    return e, A, D


def phi_reduced_potts(q, beta, B, u):
    """Reduced Potts free energy; vanishes at ``u = 0``."""
    _, A, D = _potts_parts(q, beta, B, u)
    u = np.asarray(u, dtype=float)
    out = (np.log((math.exp(B) + q - 1) / D) + beta * (q - 1) * u**2 / (2 * q)
           + beta * u / q - np.log(A / D) / q)
    return out if out.ndim else float(out)


def potts_order_parameter_residual(q, beta, B, u):
    """``u - e^{beta u}/D + 1/A``; zero exactly at order-parameter solutions."""
    e, A, D = _potts_parts(q, beta, B, u)
    return u - e / D + 1.0 / A


def _dphi_reduced_potts(q, beta, B, u):
    return beta * (q - 1) / q * potts_order_parameter_residual(q, beta, B, u)


def _d2phi_reduced_potts(q, beta, B, u):
    e, A, D = _potts_parts(q, beta, B, u)
    d = 1.0 - beta * e * (math.exp(B) + q - 2) / D**2 - beta * e * math.exp(B) / A**2
    return beta * (q - 1) / q * d


def phi_reduced_ising(G, dG, fields, pi, m):
    """``G(m) - m G'(m) - sum_i pi_i log(cosh(h_i - G'(m)) / cosh h_i)``."""
    m = np.asarray(m, dtype=float)
    h = np.asarray(fields, dtype=float)
    pi = np.asarray(pi, dtype=float)
    gp = np.asarray(dG(m), dtype=float)
    x = h[None, :] - np.reshape(gp, (-1, 1))
    # log cosh, overflow-safe
    lc = np.logaddexp(x, -x) - np.logaddexp(h, -h)[None, :]
    out = np.asarray(G(m), dtype=float) - m * gp - np.reshape(lc @ pi, m.shape)
    return out if out.ndim else float(out)


def _polish(f, df, d2f, lo, hi, x0):
    # golden section inside the bracket, then Newton on the derivative
    try:
        x = golden(f, brack=(lo, x0, hi), tol=1e-12)
    except ValueError:
        x = x0
    x = min(max(x, lo), hi)
    for _ in range(50):
        h = d2f(x)
        if not h > 0:
            break
        step = df(x) / h
        nx = min(max(x - step, lo), hi)
        if abs(nx - x) < INNER_TOL * 1e-2:
            x = nx
            break
        x = nx
    return x


def _numeric_derivatives(f, scale=1e-5):
    def df(x):
        return (f(x + scale) - f(x - scale)) / (2 * scale)

    def d2f(x):
        return (f(x + scale) - 2 * f(x) + f(x - scale)) / scale**2

    return df, d2f


def _interior_minima(f, df, d2f, lo, hi, points=GRID_POINTS):
    grid = np.linspace(lo, hi, points)
    vals = np.asarray(f(grid))
    found = []
    for i in range(1, points - 1):
        if vals[i] <= vals[i - 1] and vals[i] <= vals[i + 1]:
            x = _polish(f, df, d2f, grid[i - 1], grid[i + 1], grid[i])
            found.append((float(x), float(f(x))))
    return found


@dataclass(frozen=True)
class OrderParameterMinimum:
    location: float
    value: float


def potts_reduced_minima(q, beta, B, u_max=0.999):
    """Interior local minima of ``phi_reduced_potts`` on ``(0, u_max)``."""
    def f(u):
        return phi_reduced_potts(q, beta, B, u)

    def df(u):
        return _dphi_reduced_potts(q, beta, B, u)

    def d2f(u):
        return _d2phi_reduced_potts(q, beta, B, u)

    return [OrderParameterMinimum(x, v) for x, v in _interior_minima(f, df, d2f, 0.0, u_max)]


def potts_gap(q, beta, B):
    """``min over interior u > 0 minima of phi_reduced - phi_reduced(0)``; ``+inf`` if none."""
    minima = potts_reduced_minima(q, beta, B)
    return min((m.value for m in minima), default=math.inf)


def ising_reduced_minima(G, dG, fields, pi, m_max=0.9999):
    def f(m):
        return phi_reduced_ising(G, dG, fields, pi, m)

    df, d2f = _numeric_derivatives(f)
    return [OrderParameterMinimum(x, v) for x, v in _interior_minima(f, df, d2f, 0.0, m_max)]


def _check_symmetric_fields(fields, pi):
    h = np.asarray(fields, dtype=float)
    pi = np.asarray(pi, dtype=float)
    order = np.argsort(h)
    if not (np.allclose(h[order], -h[order][::-1]) and np.allclose(pi[order], pi[order][::-1])):
        raise ValidationError("the Ising scan needs a field law symmetric under h -> -h")


def ising_gap(G, dG, fields, pi):
    """Depth of the best ``m > 0`` minimum relative to ``m = 0``; ``+inf`` if none."""
    _check_symmetric_fields(fields, pi)
    base = phi_reduced_ising(G, dG, fields, pi, 0.0)
    minima = ising_reduced_minima(G, dG, fields, pi)
    return min((m.value - base for m in minima), default=math.inf)


def bisect_sign_change(gap, lower, upper, tol=1e-6, max_iter=200):
    """Bisection for the parameter where ``gap`` changes sign on ``[lower, upper]``."""
    glo, ghi = gap(lower), gap(upper)
    if glo == 0:
        return lower
    if ghi == 0:
        return upper
    if np.sign(glo) == np.sign(ghi):
        raise NoBracket(
            f"free-energy gap has the same sign at both ends: gap({lower})={glo}, gap({upper})={ghi}"
        )
    lo, hi = lower, upper
    for _ in range(max_iter):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        gm = gap(mid)
        if gm == 0:
            return mid
        if np.sign(gm) == np.sign(glo):
            lo, glo = mid, gm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def potts_critical_beta(q):
    """Closed-form transition of the field-free Potts model, ``2(q-1)/(q-2) log(q-1)``."""
    if q <= 2:
        raise ValidationError("the closed form needs q >= 3")
    return 2.0 * (q - 1) / (q - 2) * math.log(q - 1)


def potts_coexistence_beta(q, B, lower, upper, tol=1e-6):
    return bisect_sign_change(lambda b: potts_gap(q, b, B), lower, upper, tol)


def ising_coexistence(axis, fixed, lower, upper, tol=1e-6, coefficients=None):
    """Coexistence of ``m = 0`` with ``+-m*`` for a symmetric two-valued field.

    ``axis`` is ``"beta"`` (scan beta at field amplitude ``fixed``) or
    ``"field"`` (scan the amplitude at inverse temperature ``fixed``).  With
    ``coefficients`` the interaction is ``G(m) = sum c_k m^k`` scaled by beta.
    """
    def gap(x):
        beta, h = (x, fixed) if axis == "beta" else (fixed, x)
        G, dG = _ising_G(beta, coefficients)
        return ising_gap(G, dG, [h, -h], [0.5, 0.5])

    if axis not in ("beta", "field"):
        raise ValidationError(f"unknown Ising scan axis {axis!r}")
    return bisect_sign_change(gap, lower, upper, tol)


def _ising_G(beta, coefficients):
    if coefficients is None:
        coefficients = [0.0, 0.0, -0.5]
    poly = np.polynomial.Polynomial(beta * np.asarray(coefficients, dtype=float))
    return poly, poly.deriv()


def phi_curve_potts(q, beta, B, points=400, u_max=0.9):
    """``(u, phi_reduced(u))`` on a uniform grid plus the refined local minima.

    The point ``u = 0`` is reported as a minimum whenever it is one.
    """
    u = np.linspace(0.0, u_max, points)
    values = phi_reduced_potts(q, beta, B, u)
    minima = [m for m in potts_reduced_minima(q, beta, B, u_max=u_max)]
    if _d2phi_reduced_potts(q, beta, B, 0.0) > 0:
        minima.insert(0, OrderParameterMinimum(0.0, 0.0))
    return u, values, minima


__all__ = [
    "OrderParameterMinimum",
    "bisect_sign_change",
    "ising_coexistence",
    "ising_gap",
    "phi_curve_potts",
    "phi_reduced_ising",
    "phi_reduced_potts",
    "potts_coexistence_beta",
    "potts_critical_beta",
    "potts_gap",
    "potts_order_parameter_measure",
    "potts_order_parameter_residual",
    "potts_reduced_minima",
]
