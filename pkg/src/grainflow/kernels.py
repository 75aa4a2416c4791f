"""Scalar kernels: smoothing kernel, weight function, backwards heat kernels.

Everything is specialized to boundary dimension n = 1 in the plane.  The
smoothing kernel is a Gaussian of width eps under a radial cutoff at radius 1,
renormalized to unit mass; evaluation is truncated at min(1, 6*eps), beyond
which the Gaussian carries less than 1e-7 of its mass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._accel import _psi_np

AMBIENT_DIM = 2   # n + 1
BOUNDARY_DIM = 1  # n
SUPPORT_FACTOR = 6.0


def cutoff_psi(s):
    """Radial cutoff: 1 for s <= 1/2, smooth descent to 0 at s = 1."""
    return _psi_np(np.asarray(s, dtype=np.float64))


def cutoff_eta(s):
    """Wider radial cutoff used by truncated heat kernels: 1 on [0,1], 0 past 2."""
    s = np.asarray(s, dtype=np.float64)
    u = np.clip(s - 1.0, 0.0, 1.0)
    return 1.0 - u * u * u * (u * (6.0 * u - 15.0) + 10.0)


class WeightOmega:
    """Ambient weight: either the constant 1 or exp(-sqrt(1 + |x|^2)).

    For the exponential variant the derivative-bound constant c1 is measured
    at construction on a validation grid and inflated by 1%, since only the
    existence of a suitable c1 is given.
    """

    def __init__(self, variant="constant-one", validation_grid=201):
        if variant not in ("constant-one", "exponential"):
            raise ValueError(f"unknown weight variant {variant!r}")
        self.variant = variant
        self.is_constant = variant == "constant-one"
        if self.is_constant:
            self.c1 = 0.0
        else:
            self.c1 = self._measure_c1(validation_grid)

    def _measure_c1(self, grid_n):
        xs = np.linspace(-10.0, 10.0, grid_n)
        xx, yy = np.meshgrid(xs, xs)
        pts = np.column_stack([xx.ravel(), yy.ravel()])
        w = self.value(pts)
        g = np.linalg.norm(self.gradient(pts), axis=1)
        h = np.linalg.norm(self.hessian(pts), axis=(1, 2))
        return 1.01 * float(np.max(np.maximum(g, h) / w))

    def value(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self.is_constant:
            return np.ones(x.shape[:-1]) if x.ndim > 1 else 1.0
        f = np.sqrt(1.0 + (x * x).sum(axis=-1))
        return np.exp(-f)

    def gradient(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self.is_constant:
            return np.zeros_like(x)
        f = np.sqrt(1.0 + (x * x).sum(axis=-1, keepdims=True))
        return -np.exp(-f) * x / f

    def hessian(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if self.is_constant:
            return np.zeros((len(x), 2, 2))
        f = np.sqrt(1.0 + (x * x).sum(axis=-1))[:, None, None]
        eye = np.eye(2)[None, :, :]
        outer = x[:, :, None] * x[:, None, :]
        grad_f_outer = outer / (f * f)
        hess_f = eye / f - outer / f**3
        return np.exp(-f) * (grad_f_outer - hess_f)


@dataclass
class AjWitness:
    passed: bool
    condition: str = ""
    point: tuple | None = None
    lhs: float = 0.0
    rhs: float = 0.0


def aj_membership(phi, j, samples, weight=None):
    """Sampled check of the test-function class: phi <= Omega, |grad phi| <= j phi,
    ||hess phi|| <= j phi.  Returns a pass/fail witness for the first violation."""
    samples = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    w = weight if weight is not None else WeightOmega()
    vals = np.asarray(phi.value(samples), dtype=np.float64)
    omega = np.asarray(w.value(samples), dtype=np.float64)
    grads = np.linalg.norm(np.asarray(phi.gradient(samples)), axis=1)
    hess = np.linalg.norm(np.asarray(phi.hessian(samples)), axis=(1, 2))
    tol = 1e-12
    for name, lhs, rhs in (
        ("phi <= Omega", vals, omega),
        ("|grad phi| <= j phi", grads, j * vals),
        ("|hess phi| <= j phi", hess, j * vals),
    ):
        bad = np.nonzero(lhs > rhs + tol)[0]
        if len(bad):
            k = int(bad[np.argmax((lhs - rhs)[bad])])
            return AjWitness(False, name, tuple(samples[k]), float(lhs[k]), float(rhs[k]))
    return AjWitness(True)


class KernelSuite:
    """Smoothing kernel Phi_eps at scale eps with its cutoff and normalization.

    The normalization constant is solved at construction by radial
    Gauss-Legendre quadrature (piecewise on [0, 1/2] and [1/2, 1] where the
    cutoff transitions), accurate to ~1e-14 absolute.
    """

    def __init__(self, eps, quad_factor=4.0):
        if not 0.0 < eps < 1.0:
            raise ValueError("eps must lie in (0, 1)")
        self.eps = float(eps)
        self.quad_factor = float(quad_factor)
        self.cutoff_radius = min(1.0, SUPPORT_FACTOR * self.eps)
        self.c_eps = 1.0 / self._raw_mass()
        self.lattice_delta = self.eps / self.quad_factor

    def _raw_mass(self):
        nodes, w = np.polynomial.legendre.leggauss(160)
        total = 0.0
        for lo, hi in ((0.0, 0.5), (0.5, 1.0)):
            s = 0.5 * (hi - lo) * nodes + 0.5 * (hi + lo)
            f = cutoff_psi(s) * np.exp(-s * s / (2 * self.eps**2)) / (2 * np.pi * self.eps**2)
            total += 0.5 * (hi - lo) * float(np.sum(w * 2 * np.pi * s * f))
        return total

    def phi(self, x):
        """Kernel value; zero for |x| >= 1."""
        x = np.asarray(x, dtype=np.float64)
        r = np.linalg.norm(np.atleast_2d(x), axis=1)
        val = self.c_eps * cutoff_psi(r) * np.exp(-r * r / (2 * self.eps**2)) / (
            2 * np.pi * self.eps**2
        )
        return val if x.ndim > 1 else float(val[0])

    def grad_phi(self, x):
        """Analytic kernel gradient (radial)."""
        x = np.asarray(x, dtype=np.float64)
        pts = np.atleast_2d(x)
        r = np.linalg.norm(pts, axis=1)
        gauss = np.exp(-r * r / (2 * self.eps**2)) / (2 * np.pi * self.eps**2)
        psi = cutoff_psi(r)
        dpsi = self._dpsi(r)
        radial = self.c_eps * gauss * (dpsi - psi * r / self.eps**2)
        safe = np.where(r > 0, r, 1.0)
        out = radial[:, None] * pts / safe[:, None]
        out[r == 0] = 0.0
        return out if x.ndim > 1 else out[0]

    @staticmethod
    def _dpsi(r):
        u = (np.asarray(r, dtype=np.float64) - 0.5) * 2.0
        inside = (u > 0.0) & (u < 1.0)
        du = np.where(inside, -30.0 * u * u * (u - 1.0) * (u - 1.0) * 2.0, 0.0)
        return du

    def mass_quadrature_2d(self, n=128):
        """2D product-Gauss estimate of the kernel's total mass (should be 1)."""
        half = self.cutoff_radius
        nodes, w = np.polynomial.legendre.leggauss(n)
        xs = half * nodes
        ww = half * w
        xx, yy = np.meshgrid(xs, xs)
        pts = np.column_stack([xx.ravel(), yy.ravel()])
        vals = self.phi(pts).reshape(n, n)
        return float(ww @ vals @ ww)


@dataclass
class HeatKernelQuery:
    """Backwards heat kernel centered at (y, s), truncated at radius r."""

    y: np.ndarray
    s: float
    r: float
    delta: float = 0.0

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=np.float64).reshape(2)
        if self.r <= 0:
            raise ValueError("truncation radius must be positive")


def rho(query, x, t):
    """1-dimensional backwards heat kernel (4 pi (s-t))^{-1/2} exp(-|x-y|^2 / 4(s-t))."""
    if t >= query.s:
        raise ValueError(f"evaluation time {t} must precede the reference time {query.s}")
    x = np.asarray(x, dtype=np.float64)
    d2 = ((np.atleast_2d(x) - query.y) ** 2).sum(axis=1)
    tau = query.s - t
    val = np.exp(-d2 / (4.0 * tau)) / math.sqrt(4.0 * math.pi * tau)
    return val if x.ndim > 1 else float(val[0])


def rho_hat(query, x, t):
    """Truncated kernel eta((x-y)/r) * rho; support |x - y| < 2r."""
    x = np.asarray(x, dtype=np.float64)
    d = np.linalg.norm(np.atleast_2d(x) - query.y, axis=1)
    val = cutoff_eta(d / query.r) * rho(query, np.atleast_2d(x), t)
    return val if x.ndim > 1 else float(val[0])


def rho_hat_r_delta(query, x):
    """Time-free form: the truncated kernel at time offset delta * r^2."""
    if query.delta <= 0:
        raise ValueError("query.delta must be positive for the r-delta kernel")
    shifted = HeatKernelQuery(query.y, query.delta * query.r**2, query.r)
    return rho_hat(shifted, x, 0.0)
