"""Numerical kernels: pseudo-inverse, natural cubic splines, Simpson
quadrature and a damped Gauss-Newton (Levenberg-Marquardt) solver."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import InvariantError, NumericalError

PINV_RCOND = 1e-12


def pinv(A: np.ndarray) -> np.ndarray:
    """Moore-Penrose pseudo-inverse via SVD, cutoff ``1e-12 * sigma_max``.

    Works on a single matrix or a stack ``(..., m, n)``.
    """
    A = np.asarray(A, dtype=float)
    if not np.all(np.isfinite(A)):
        raise NumericalError("pseudo-inverse of non-finite matrix")
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    cutoff = PINV_RCOND * s.max(axis=-1, keepdims=True)
    with np.errstate(divide="ignore"):
        s_inv = np.where(s > cutoff, 1.0 / s, 0.0)
    return np.swapaxes(Vt, -1, -2) @ (s_inv[..., :, None] * np.swapaxes(U, -1, -2))


def pinv_solve(A: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Minimum-norm least-squares solution ``A^+ rhs``."""
    rhs = np.asarray(rhs, dtype=float)
    if not np.all(np.isfinite(rhs)):
        raise NumericalError("pseudo-inverse solve with non-finite right-hand side")
    return pinv(A) @ rhs


# ------------------------------------------------------------------ splines

def _solve_tridiagonal(lower, diag, upper, rhs):
    # plain floats: element access on numpy arrays dominates otherwise
    lower, diag, upper, rhs = (np.asarray(v, dtype=float).tolist() for v in (lower, diag, upper, rhs))
    n = len(diag)
    c = [0.0] * n
    d = [0.0] * n
    c[0] = upper[0] / diag[0]
    d[0] = rhs[0] / diag[0]
    for i in range(1, n):
        m = diag[i] - lower[i] * c[i - 1]
        c[i] = upper[i] / m if i < n - 1 else 0.0
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / m
    out = [0.0] * n
    out[-1] = d[-1]
    for i in range(n - 2, -1, -1):
        out[i] = d[i] - c[i] * out[i + 1]
    return np.array(out)


@dataclass(frozen=True)
class Spline1D:
    """Piecewise cubic ``a + b t + c t^2 + d t^3`` with ``t = s - knots[i]``.

    Outside the knot range the end values are held constant.
    """

    knots: np.ndarray
    values: np.ndarray
    coeffs: np.ndarray  # (n_segments, 4)

    def _locate(self, s):
        # minimum/maximum: np.clip carries a large per-call overhead
        k = self.knots
        s = np.minimum(np.maximum(np.asarray(s, dtype=float), k[0]), k[-1])
        idx = np.minimum(np.searchsorted(k, s, side="right") - 1, len(k) - 2)
        return s, idx, s - self.knots[idx]

    def __call__(self, s):
        s_in = np.asarray(s, dtype=float)
        _, idx, t = self._locate(s_in)
        a, b, c, d = self.coeffs[idx].T
        out = a + t * (b + t * (c + t * d))
        return float(out) if out.ndim == 0 else out

    def derivative(self, s, order: int = 1):
        s_in = np.asarray(s, dtype=float)
        _, idx, t = self._locate(s_in)
        a, b, c, d = self.coeffs[idx].T
        if order == 1:
            out = b + t * (2 * c + 3 * d * t)
        elif order == 2:
            out = 2 * c + 6 * d * t
        else:
            raise ValueError("order must be 1 or 2")
        outside = (s_in < self.knots[0]) | (s_in > self.knots[-1])
        out = np.where(outside, 0.0, out)
        return float(out) if out.ndim == 0 else out


def spline_fit(knots, values, extrapolation: str = "hold-endpoint",
               start_slope: float | None = None, end_slope: float | None = None) -> Spline1D:
    """Natural cubic interpolant through ``(knots, values)``.

    ``start_slope`` / ``end_slope`` clamp the first derivative at the first /
    last knot instead of zeroing the second derivative there.
    """
    if extrapolation != "hold-endpoint":
        raise ValueError(f"unsupported extrapolation policy {extrapolation!r}")
    x = np.asarray(knots, dtype=float)
    y = np.asarray(values, dtype=float)
    if x.ndim != 1 or len(x) < 2:
        raise InvariantError("knots", x.tolist(), ">= 2 knots")
    if len(y) != len(x):
        raise InvariantError("values", len(y), f"== len(knots) = {len(x)}")
    h = np.diff(x)
    if np.any(h <= 0) or not np.all(np.isfinite(x)):
        raise InvariantError("knots", x.tolist(), "strictly increasing")
    if not np.all(np.isfinite(y)):
        raise NumericalError("spline values must be finite")

    n = len(x) - 1
    slope = np.diff(y) / h
    lower = np.zeros(n + 1)
    diag = np.ones(n + 1)
    upper = np.zeros(n + 1)
    rhs = np.zeros(n + 1)
    lower[1:n] = h[:-1]
    diag[1:n] = 2 * (h[:-1] + h[1:])
    upper[1:n] = h[1:]
    rhs[1:n] = 6 * (slope[1:] - slope[:-1])
    if start_slope is not None:
        diag[0] = 2 * h[0]
        upper[0] = h[0]
        rhs[0] = 6 * (slope[0] - start_slope)
    if end_slope is not None:
        lower[n] = h[-1]
        diag[n] = 2 * h[-1]
        rhs[n] = 6 * (end_slope - slope[-1])
    M = _solve_tridiagonal(lower, diag, upper, rhs)

    coeffs = np.column_stack([
        y[:-1],
        slope - h * (2 * M[:-1] + M[1:]) / 6,
        M[:-1] / 2,
        (M[1:] - M[:-1]) / (6 * h),
    ])
    x.flags.writeable = False
    y.flags.writeable = False
    coeffs.flags.writeable = False
    return Spline1D(x, y, coeffs)


# --------------------------------------------------------------- quadrature

def _evaluate(f: Callable, s: np.ndarray) -> np.ndarray:
    out = np.asarray(f(s), dtype=float)
    if out.shape != s.shape:
        out = np.array([float(f(v)) for v in s])
    if not np.all(np.isfinite(out)):
        raise NumericalError("integrand evaluated to a non-finite value")
    return out


def integrate(f: Callable, a: float, b: float, step: float = 0.1) -> float:
    """Composite Simpson integral of ``f`` over ``[a, b]`` with panel width <= ``step``."""
    if not step > 0:
        raise InvariantError("step", step, "> 0")
    if not a <= b:
        raise InvariantError("b", b, f">= a = {a}")
    if a == b:
        return 0.0
    s = simpson_grid(a, b, step)
    return simpson_sum(_evaluate(f, s), b - a)


def simpson_grid(a: float, b: float, step: float) -> np.ndarray:
    """Nodes of the composite Simpson rule on ``[a, b]``: an even number of
    panels, each no wider than ``step``."""
    n = max(2, math.ceil((b - a) / step - 1e-9))
    n += n % 2
    return np.linspace(a, b, n + 1)


def simpson_sum(fs: np.ndarray, width: float) -> float:
    """Composite Simpson sum of samples ``fs`` on an equally spaced grid."""
    if not np.all(np.isfinite(fs)):
        raise NumericalError("integrand evaluated to a non-finite value")
    h = width / (len(fs) - 1)
    return float(h / 3 * (fs[0] + fs[-1] + 4 * fs[1:-1:2].sum() + 2 * fs[2:-1:2].sum()))


def cumulative_simpson(f: Callable, s: np.ndarray) -> np.ndarray:
    """``F[i] = integral of f from s[0] to s[i]``; Simpson's rule on each
    interval using its midpoint."""
    s = np.asarray(s, dtype=float)
    mid = 0.5 * (s[:-1] + s[1:])
    fs = _evaluate(f, s)
    fm = _evaluate(f, mid)
    pieces = np.diff(s) / 6 * (fs[:-1] + 4 * fm + fs[1:])
    return np.concatenate([[0.0], np.cumsum(pieces)])


# ------------------------------------------------------------ least squares

class ConvergenceError(NumericalError):
    pass


class SingularJacobianError(NumericalError):
    pass


@dataclass
class LeastSquaresResult:
    x: np.ndarray
    residual_norm: float
    iterations: int
    converged: bool


def finite_difference_jacobian(fun: Callable, x: np.ndarray, rel_step: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of a vector function."""
    x = np.asarray(x, dtype=float)
    f0 = np.asarray(fun(x), dtype=float)
    J = np.empty((f0.size, x.size))
    for i in range(x.size):
        h = rel_step * max(1.0, abs(x[i]))
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        J[:, i] = (np.asarray(fun(xp), dtype=float) - np.asarray(fun(xm), dtype=float)) / (2 * h)
    return J


def least_squares(residual_fn: Callable, x0, jacobian: Callable | None = None,
                  tol: float = 1e-12, max_iter: int = 500, gtol: float = 1e-10,
                  rcond: float = 1e-8) -> LeastSquaresResult:
    """Minimise ``||residual_fn(x)||^2`` by damped Gauss-Newton.

    Steps come from a truncated SVD of the column-scaled Jacobian, so
    directions with singular value below ``rcond * s_max`` are left at their
    current value (minimum-norm step on rank-deficient problems). The
    undamped step is tried first, so linear problems finish in one step; the
    Marquardt damping grows only when the cost does not decrease. Stops on a
    small step, a small relative decrease, or a scaled gradient below
    ``gtol * ||r||``.
    """
    x = np.array(x0, dtype=float)
    jac = jacobian or (lambda v: finite_difference_jacobian(residual_fn, v))
    r = np.asarray(residual_fn(x), dtype=float)
    if not np.all(np.isfinite(r)):
        raise NumericalError("residual is not finite at the initial point")
    cost = float(r @ r)
    lam = 0.0
    for it in range(1, max_iter + 1):
        J = np.asarray(jac(x), dtype=float)
        col = np.sqrt(np.sum(J * J, axis=0))
        if np.any(col == 0):
            raise SingularJacobianError(
                f"Jacobian columns {np.flatnonzero(col == 0).tolist()} are identically zero")
        U, sv, Vt = np.linalg.svd(J / col, full_matrices=False)
        keep = sv > rcond * sv[0]
        Utr = U.T @ r
        g = sv * Utr
        if np.max(np.abs(g[keep])) <= gtol * math.sqrt(cost):
            return LeastSquaresResult(x, math.sqrt(cost), it - 1, True)
        while True:
            filt = np.where(keep, sv / (sv * sv + lam), 0.0)
            step = -(Vt.T @ (filt * Utr)) / col
            x_new = x + step
            r_new = np.asarray(residual_fn(x_new), dtype=float)
            cost_new = float(r_new @ r_new) if np.all(np.isfinite(r_new)) else math.inf
            if cost_new <= cost:
                break
            lam = 1e-3 if lam == 0.0 else lam * 10
            if lam > 1e16:
                return LeastSquaresResult(x, math.sqrt(cost), it, True)
        decrease = (cost - cost_new) / cost if cost > 0 else 0.0
        x, r, cost = x_new, r_new, cost_new
        lam = lam / 10 if lam > 1e-9 else 0.0
        if np.linalg.norm(step) < tol * (np.linalg.norm(x) + tol) or decrease < tol or cost == 0.0:
            return LeastSquaresResult(x, math.sqrt(cost), it, True)
    raise ConvergenceError(f"least squares did not converge in {max_iter} iterations")
