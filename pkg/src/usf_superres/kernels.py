"""B-spline shift-invariant kernels.

A kernel is a finite combination of dilated, integer-shifted centered
B-splines::

    psi(t) = sum_l b[l] * beta_L(t / gamma - l)

Kernels are stored centered (``l = 0`` sits at ``t = 0``); placing them
inside an observation window is the forward model's job.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb, factorial

import numpy as np
from scipy.special import zeta

from ._validation import check_int, check_positive
from .exceptions import ConfigError

__all__ = [
    "KernelModel",
    "FourierCoeffs",
    "favard_constant",
    "bspline_eval",
    "kernel_eval",
    "kernel_sup_norm",
    "kernel_fourier_coeffs",
    "approximation_error_bound",
    "derivative_sup_bound",
]


@dataclass(frozen=True)
class KernelModel:
    """Spline kernel ``sum_l coeffs[l] * beta_order(t / gamma - l)``.

    Parameters
    ----------
    coeffs : sequence of float
        Expansion coefficients ``b[0], b[1], ...``; finite and not all zero.
    gamma : float
        Grid scale in seconds.
    order : int
        Spline order ``L`` (0 = box, 1 = triangle, 3 = cubic).
    """

    coeffs: tuple
    gamma: float = 1.0
    order: int = 3

    def __post_init__(self):
        b = np.asarray(self.coeffs, dtype=float).ravel()
        if b.size == 0 or not np.all(np.isfinite(b)):
            raise ConfigError("kernel coefficients must be a non-empty finite sequence")
        if not np.any(b != 0):
            raise ConfigError("kernel coefficients are all zero")
        object.__setattr__(self, "coeffs", tuple(float(v) for v in b))
        object.__setattr__(self, "gamma", check_positive(self.gamma, "gamma"))
        object.__setattr__(self, "order", check_int(self.order, "order", minimum=0))

    @property
    def b(self):
        return np.asarray(self.coeffs)

    @property
    def support(self):
        """Closed interval outside of which the kernel is identically zero."""
        nz = np.flatnonzero(self.b)
        half = (self.order + 1) / 2.0
        return (self.gamma * (nz[0] - half), self.gamma * (nz[-1] + half))

    @property
    def width(self):
        lo, hi = self.support
        return hi - lo

    def __call__(self, t):
        return kernel_eval(self, t)


@dataclass(frozen=True)
class FourierCoeffs:
    """Fourier-series coefficients ``psi_i`` for ``i = -I..I`` over a window."""

    values: np.ndarray
    window: float

    @property
    def max_index(self):
        return (len(self.values) - 1) // 2

    @property
    def indices(self):
        m = self.max_index
        return np.arange(-m, m + 1)

    def at(self, i):
        return self.values[np.asarray(i) + self.max_index]


def favard_constant(L):
    """Bohr-Favard constant ``K_L = (4/pi) sum_p ((-1)^p / (2p+1))^(L+1)``.

    The series is summed in closed form through the Hurwitz zeta function,
    which is accurate to a few ulp for every order.
    """
    L = check_int(L, "L", minimum=0)
    s = L + 1
    if s == 1:
        # Leibniz series
        return 1.0
    if s % 2 == 0:
        # all terms positive: sum (2p+1)^-s = (1 - 2^-s) zeta(s)
        total = (1.0 - 2.0 ** (-s)) * zeta(s)
    else:
        # Dirichlet beta function
        total = 4.0 ** (-s) * (zeta(s, 0.25) - zeta(s, 0.75))
    return float(4.0 / np.pi * total)


def bspline_eval(t, L):
    """Centered cardinal B-spline of order ``L`` from its one-sided power form."""
    L = check_int(L, "L", minimum=0)
    t = np.asarray(t, dtype=float)
    half = (L + 1) / 2.0
    # evaluate on the left flank (symmetry) to keep the alternating sum short
    x = -np.abs(t)
    out = np.zeros_like(x)
    for k in range(L + 2):
        arg = x - k + half
        if L == 0:
            term = (arg > 0).astype(float)
        else:
            term = np.where(arg > 0, arg, 0.0) ** L
        out += comb(L + 1, k) * (-1) ** k * term
    out /= factorial(L)
    out[np.abs(t) >= half] = 0.0
    return out if out.ndim else float(out)


def kernel_eval(model, t):
    """Evaluate ``sum_l b[l] beta_L(t/gamma - l)`` at ``t`` (seconds)."""
    t = np.asarray(t, dtype=float)
    u = t / model.gamma
    out = np.zeros_like(u)
    for l, bl in enumerate(model.coeffs):
        if bl != 0.0:
            out = out + bl * bspline_eval(u - l, model.order)
    return out if out.ndim else float(out)


def kernel_sup_norm(model, step=None):
    """Dense-grid estimate of ``max |psi|`` (default grid step ``gamma/1000``)."""
    lo, hi = model.support
    step = model.gamma / 1000.0 if step is None else step
    n = int(np.ceil((hi - lo) / step)) + 1
    return float(np.max(np.abs(kernel_eval(model, np.linspace(lo, hi, n)))))


def _simpson(f, a, b, n):
    t = np.linspace(a, b, 2 * n + 1)
    y = f(t)
    h = (b - a) / (2 * n)
    return h / 3.0 * (y[..., 0] + y[..., -1] + 4 * y[..., 1:-1:2].sum(-1) + 2 * y[..., 2:-1:2].sum(-1))


def kernel_fourier_coeffs(model, window, max_index, offset=0.0, rtol=1e-10):
    """Fourier coefficients ``psi_i = (1/tau) int psi(t) exp(-2j pi i t / tau) dt``.

    The kernel is translated so that the left edge of its support lands at
    ``offset``; the translated support must lie inside ``[0, window)``.
    Integration is composite Simpson on knot-aligned panels, refined by
    doubling until successive estimates agree to ``rtol``.
    """
    tau = check_positive(window, "window")
    I = check_int(max_index, "max_index", minimum=0)
    lo, hi = model.support
    shift = offset - lo
    if offset < 0 or hi + shift >= tau:
        raise ConfigError(
            f"kernel support of width {hi - lo:g} placed at {offset:g} exceeds window [0, {tau:g})"
        )
    idx = np.arange(-I, I + 1)[:, None]

    def integrand(t):
        return kernel_eval(model, t - shift)[None, :] * np.exp(-2j * np.pi * idx * t[None, :] / tau)

    n_panels = int(round(model.width / model.gamma))
    edges = lo + shift + model.gamma * np.arange(n_panels + 1)
    n = 4
    prev = None
    while True:
        est = sum(_simpson(integrand, a, b, n) for a, b in zip(edges[:-1], edges[1:])) / tau
        if prev is not None:
            scale = max(np.max(np.abs(est)), np.finfo(float).tiny)
            if np.max(np.abs(est - prev)) <= 15.0 * rtol * scale or n >= 4096:
                break
        prev = est
        n *= 2
    return FourierCoeffs(values=est, window=tau)


def approximation_error_bound(model, window, max_index, sup_norm=None):
    """Upper bound on the truncated Fourier-series mean-squared error.

    ``rho_L = (tau / 2 gamma)^(2L) * 2 ||psi||^2 / (K_L^2 (2L - 1) I^(2L - 1))``
    """
    L = model.order
    if L < 1:
        raise ConfigError("the approximation bound needs spline order >= 1")
    I = check_int(max_index, "max_index", minimum=1)
    tau = check_positive(window, "window")
    sup = kernel_sup_norm(model) if sup_norm is None else check_positive(sup_norm, "sup_norm")
    kl = favard_constant(L)
    return (tau / (2 * model.gamma)) ** (2 * L) * 2 * sup**2 / (kl**2 * (2 * L - 1) * I ** (2 * L - 1))


def derivative_sup_bound(model, h, sup_norm=None):
    """Bound ``(K_{L-h} / K_L) (pi / gamma)^h ||psi||_inf`` on ``||psi^(h)||_inf``."""
    L = model.order
    h = check_int(h, "h", minimum=0)
    if h > L:
        raise ConfigError(f"derivative order h={h} exceeds spline order L={L}")
    sup = kernel_sup_norm(model) if sup_norm is None else check_positive(sup_norm, "sup_norm")
    return favard_constant(L - h) / favard_constant(L) * (np.pi / model.gamma) ** h * sup
