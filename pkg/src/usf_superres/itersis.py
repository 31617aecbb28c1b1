"""Iterative signal sieving for folded, quantized first differences.

The first difference of the folded samples splits into a smooth part
(the first difference of the filtered spikes) and a sparse part (the
fold corrections ``c_m delta[n - n_m]`` with ``c_m`` in ``2 lam Z``)::

    ybar = Dg - eps_bar

The two parts are separated by alternating

* residue recovery: ``eps_bar`` is modelled as a rational function
  ``P(z) / Q(z)`` on the unit-circle nodes ``z_n = exp(2j pi n / (N - 1))``,
  fitted by weighted linear least squares and rounded onto ``2 lam Z``;
* spike estimation: ``Dg = ybar + eps_bar`` is integrated, deconvolved
  in the DFT domain and fitted by a matrix pencil.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_complex, check_int, check_positive, check_signal
from .exceptions import ConfigError, DegenerateError
from .forward import SpikeTrain, kernel_samples, synthesize
from .frontend import FoldedSignal, ResidueModel, residue_from_sequence, residue_quantize
from .spectral import (
    SPECTRUM_FLOOR,
    ConditioningWarning,
    SpectralSamples,
    amplitudes_ls,
    anti_difference,
    delays_from_poles,
    finite_difference,
    hermitian_toeplitz,
    matrix_pencil,
)

__all__ = [
    "RationalFraction",
    "ItersisConfig",
    "ItersisResult",
    "unit_circle_nodes",
    "rational_eval",
    "residue_parameters",
    "fraction_from_steps",
    "fraction_from_poles",
    "relocate_poles",
    "fit_residues",
    "iteration_step",
    "estimate_dc",
    "solve_p2",
    "itersis_recover",
]

POLE_ON_NODE_TOL = 1e-12
DATA_START_RADIUS = 1 - 1e-3
POLE_GUARD = 1e-10
# relative |Q| below which a node is treated as sitting on a pole
NODE_LIMIT_TOL = 1e-8
REPEATED_ROOT_TOL = 1e-6


@dataclass(frozen=True)
class RationalFraction:
    """``P(z) / Q(z)`` with ascending complex coefficients ``p`` and ``q``.

    ``len(p) == len(q) - 1``, so a fraction with ``M`` poles has a
    numerator of degree at most ``M - 1``.
    """

    p: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        p = check_complex(self.p, "p")
        q = check_complex(self.q, "q")
        if p.size != q.size - 1:
            raise ConfigError(f"numerator needs {q.size - 1} coefficients, got {p.size}")
        if not np.any(q != 0):
            raise ConfigError("denominator is identically zero")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)

    @property
    def pole_count(self):
        return self.q.size - 1

    def poles(self):
        q = np.trim_zeros(self.q, "b")
        return np.roots(q[::-1]) if q.size > 1 else np.zeros(0, dtype=complex)


@dataclass(frozen=True)
class ItersisConfig:
    """Settings of the alternating recovery.

    Parameters
    ----------
    fold_count : int
        Number of fold corrections ``M`` in the first-difference residue.
    order : int
        Number of spikes ``K``.
    spectral_count : int
        Highest DFT index ``I`` used by the spike fit (``|l| <= I``).
    outer_max, inner_max, init_count : int
        Outer alternations, weighted-LS iterations per start, random starts.
    sigma_stop : float or None
        Stopping threshold on successive ``Dg`` estimates; ``None`` uses
        ``sigma_scale * 2 lam / 2**bits`` (``1e-9 * 2 lam`` unquantized).
    inner_tol : float
        Inner iterations stop once the denominator moves less than this
        (relative); ``0`` runs all ``inner_max`` iterations.
    data_start : bool
        Add one start whose roots sit at the ``M`` largest target samples,
        ahead of the ``init_count`` random starts.
    """

    fold_count: int
    order: int
    spectral_count: int = 10
    outer_max: int = 30
    inner_max: int = 20
    init_count: int = 8
    sigma_stop: float | None = None
    sigma_scale: float = 1.0
    inner_tol: float = 1e-10
    ridge: float = 1e-12
    data_start: bool = True
    seed: int = 0

    def __post_init__(self):
        check_int(self.fold_count, "fold_count", minimum=0)
        check_int(self.order, "order", minimum=1)
        check_int(self.spectral_count, "spectral_count", minimum=1)
        for name in ("outer_max", "inner_max", "init_count"):
            check_int(getattr(self, name), name, minimum=1)
        if self.sigma_stop is not None:
            check_positive(self.sigma_stop, "sigma_stop")
        check_positive(self.sigma_scale, "sigma_scale")
        check_positive(self.inner_tol, "inner_tol", allow_zero=True)
        check_positive(self.ridge, "ridge", allow_zero=True)
        check_int(self.seed, "seed", minimum=0, maximum=2**64 - 1)
        if self.spectral_count < self.order:
            raise ConfigError("spectral_count must be at least the spike count")

    def stop_threshold(self, lam, bits):
        if self.sigma_stop is not None:
            return self.sigma_stop
        if bits > 0:
            return self.sigma_scale * 2 * lam / 2**bits
        return 1e-9 * 2 * lam


@dataclass
class ItersisResult:
    """Output of :func:`itersis_recover`.

    ``poles`` and ``residues`` describe the selected residue fit as
    ``sum residues[k] / (z - poles[k])``; ``fraction`` gives the same in
    coefficient form. ``trace`` holds one ``{iter, mse, stop_norm}`` dict
    per outer iteration.
    """

    spikes: SpikeTrain
    residue: ResidueModel
    poles: np.ndarray
    residues: np.ndarray
    trace: list = field(default_factory=list)
    converged: bool = False
    iterations: int = 0

    @property
    def fraction(self):
        if self.poles.size == 0:
            return None
        return fraction_from_poles(self.poles, self.residues)


# ---------------------------------------------------------------------------
# residue model (rational fraction on unit-circle nodes)


def unit_circle_nodes(length):
    """``z_n = exp(2j pi n / length)`` for ``n < length``."""
    length = check_int(length, "length", minimum=1)
    return np.exp(2j * np.pi * np.arange(length) / length)


def _powers(z, count):
    # columns z**0 .. z**(count-1)
    return np.vander(z, count, increasing=True)


def rational_eval(frac, length):
    """Values ``P(z_n) / Q(z_n)`` on the ``length`` unit-circle nodes.

    Raises
    ------
    DegenerateError
        If ``Q`` (nearly) vanishes at a node.
    """
    z = unit_circle_nodes(length)
    num = _powers(z, frac.p.size) @ frac.p if frac.p.size else np.zeros(length, dtype=complex)
    den = _powers(z, frac.q.size) @ frac.q
    bad = np.abs(den) < POLE_ON_NODE_TOL * np.linalg.norm(frac.q)
    if np.any(bad):
        raise DegenerateError(f"denominator vanishes at node {int(np.argmax(bad))}")
    return num / den


def residue_parameters(frac, lam, length):
    """Fold corrections encoded by the poles and residues of ``P/Q``.

    ``c_m = -N' u^-1 P(u) / ((1 - u^-N') Q'(u))`` at every root ``u`` of
    ``Q`` and ``n_m = round(N' arg(u) / 2 pi) mod N'`` with ``N' = length``.
    Amplitudes are rounded onto ``2 lam Z``; zero corrections are dropped
    and poles landing on the same node are merged.
    """
    length = check_int(length, "length", minimum=1)
    lam = check_positive(lam, "lam")
    if not np.any(frac.p != 0):
        return ResidueModel()
    poles = frac.poles()
    if poles.size == 0:
        return ResidueModel()
    if poles.size > 1:
        gaps = np.abs(poles[:, None] - poles[None, :]) + np.eye(poles.size)
        # np.roots splits a double root by about sqrt(eps)
        if np.min(gaps) < REPEATED_ROOT_TOL:
            raise DegenerateError("denominator has a repeated root")
    q = np.trim_zeros(frac.q, "b")
    dq = np.polyder(q[::-1])
    p_desc = frac.p[::-1]
    c = -length * np.polyval(p_desc, poles) / (
        poles * (1 - poles ** (-length)) * np.polyval(dq, poles)
    )
    pos = np.mod(np.rint(length * np.angle(poles) / (2 * np.pi)), length).astype(int)
    total = np.zeros(length)
    np.add.at(total, pos, c.real)
    return residue_from_sequence(residue_quantize(total, lam))


def fraction_from_steps(amplitudes, positions, length):
    """Fraction whose node values are the first-difference residue of the given steps.

    Positions may be fractional: a step of height ``c`` at ``n0`` contributes
    ``a / (u - z)`` with ``u = exp(2j pi n0 / N')`` and
    ``a = c (1 - u^-N') u / N'``. Integer positions make ``a`` vanish, so
    callers perturb them slightly off the node.
    """
    amps = np.asarray(amplitudes, dtype=float).ravel()
    pos = np.asarray(positions, dtype=float).ravel()
    u = np.exp(2j * np.pi * pos / length)
    a = amps * (1 - u ** (-length)) * u / length
    # a / (u - z) = -a / (z - u)
    return fraction_from_poles(u, -a)


def iteration_step(target, q_prev, M, q_init=None, ridge=1e-12, _W=None):
    """One weighted least-squares refit of ``P/Q`` to the target sequence.

    Minimizes ``sum |(target Q - P) / Q_prev|^2`` on the nodes subject to
    ``<q_init, q> = 1`` through the closed form
    ``z = H^-1 b / (b^H H^-1 b)`` with ``H = G^H G + eps I``.
    """
    target = check_signal(target, "target")
    M = check_int(M, "M", minimum=1)
    q_prev = check_complex(q_prev, "q_prev")
    if q_prev.size != M + 1:
        raise ConfigError(f"q_prev must have {M + 1} coefficients")
    q_init = q_prev if q_init is None else check_complex(q_init, "q_init")
    n = target.size
    W_q, W_p = _W if _W is not None else _node_matrices(n, M)
    den = W_q @ q_prev
    mag = np.abs(den)
    if np.any(mag < POLE_ON_NODE_TOL * np.max(mag)):
        raise DegenerateError("previous denominator vanishes at a node")
    R = 1.0 / den
    A = (target * R)[:, None] * W_q
    B = R[:, None] * W_p
    G = np.hstack([A, -B])
    H = G.conj().T @ G
    eps = ridge * np.real(np.trace(H)) / H.shape[0]
    H[np.diag_indices_from(H)] += eps
    b = np.concatenate([q_init, np.zeros(M, dtype=complex)])
    try:
        x = np.linalg.solve(H, b)
    except np.linalg.LinAlgError as exc:
        raise DegenerateError("normal matrix is singular") from exc
    scale = np.vdot(b, x)
    if not np.isfinite(scale) or abs(scale) == 0:
        raise DegenerateError("normal matrix is singular")
    z = x / scale
    return RationalFraction(z[M + 1 :], z[: M + 1])


def _node_matrices(length, M):
    z = unit_circle_nodes(length)
    W = _powers(z, M + 1)
    return W, W[:, :M]


# ---------------------------------------------------------------------------
# spike estimation


def estimate_dc(s_tilde, K):
    """Offset ``c0`` in ``s_tilde[0] = s[0] + c0`` from the Toeplitz eigen-shift.

    ``T(s_tilde) = T(s) + c0 I`` with ``T(s)`` Hermitian of rank ``K``, so
    ``c0`` is the eigenvalue of the ``(K+1) x (K+1)`` Toeplitz matrix with the
    smallest magnitude. When ``+|c0|`` and ``-|c0|`` are both eigenvalues the
    sign cannot be told apart; a warning is issued and the positive one kept.
    """
    K = check_int(K, "K", minimum=1)
    T = hermitian_toeplitz(s_tilde, K + 1)
    T = 0.5 * (T + T.conj().T)
    ev = np.linalg.eigvalsh(T)
    i = int(np.argmin(np.abs(ev)))
    c0 = float(ev[i])
    mag = abs(c0)
    tol = 1e-9 * max(np.max(np.abs(ev)), 1.0)
    if mag > tol and np.sum(np.abs(np.abs(ev) - mag) <= tol) > 1 and np.any(np.abs(ev + c0) <= tol):
        warnings.warn("sign of the DC offset is ambiguous", ConditioningWarning)
        c0 = mag
    return c0


def _fit_spikes(s, K):
    poles = matrix_pencil(s, K)
    delays, _ = delays_from_poles(poles, s.window)
    return delays, amplitudes_ls(s, delays)


def solve_p2(unfolded, kernel, K, I_fr, step):
    """Spikes from an estimate of the first difference of the filtered signal.

    The sequence is integrated with zero initial value, divided by the
    kernel DFT on ``0 <= l <= I_fr``, and the unknown integration constant
    in bin 0 is replaced by a pencil extrapolation refined with
    :func:`estimate_dc`. The final pencil fit uses ``|l| <= I_fr``.
    """
    K = check_int(K, "K", minimum=1)
    I_fr = check_int(I_fr, "I_fr", minimum=K)
    g = anti_difference(check_signal(unfolded, "unfolded"), 0.0)
    N = g.size
    if I_fr >= N // 2:
        raise ConfigError(f"I_fr={I_fr} must stay below N/2={N // 2}")
    window = N * step
    kernel_dft = np.fft.fft(kernel_samples(kernel, step, N))
    idx = np.arange(I_fr + 1)
    floor = SPECTRUM_FLOOR * np.max(np.abs(kernel_dft))
    if np.any(np.abs(kernel_dft[idx]) <= floor):
        bad = int(idx[np.argmax(np.abs(kernel_dft[idx]) <= floor)])
        raise DegenerateError(f"kernel spectrum below floor at index {bad}")
    vals = np.fft.fft(g)[idx] / kernel_dft[idx]

    positive = SpectralSamples(vals[1:], idx[1:], window)
    if len(positive) >= 2 * K + 1:
        delays, amps = _fit_spikes(positive, K)
        s0 = float(np.sum(amps))
    else:
        s0 = float(vals[0].real)
    vals = vals.copy()
    vals[0] = s0
    full = SpectralSamples(vals, idx, window).symmetric()
    c0 = estimate_dc(full, K)
    vals[0] = s0 - c0
    full = SpectralSamples(vals, idx, window).symmetric()
    delays, amps = _fit_spikes(full, K)
    return SpikeTrain(amps, delays)


# ---------------------------------------------------------------------------
# alternating recovery


def _init_denominator(seed, outer, start, M):
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), int(outer), int(start)]))
    q = rng.standard_normal(M + 1) + 1j * rng.standard_normal(M + 1)
    return q / np.linalg.norm(q)


def _peak_poles(target, M, radius=DATA_START_RADIUS):
    """Poles just inside the circle at the nodes of the ``M`` largest ``|target|`` samples."""
    n = target.size
    top = np.sort(np.argsort(-np.abs(target), kind="stable")[:M])
    return radius * np.exp(2j * np.pi * top / n)


def _cauchy(z, poles):
    diff = z[:, None] - poles[None, :]
    # a pole exactly on a node is pulled inward so the column stays finite
    on = np.abs(diff) < POLE_GUARD
    if np.any(on):
        poles = np.where(np.any(on, axis=0), poles * (1 - POLE_GUARD), poles)
        diff = z[:, None] - poles[None, :]
    return 1.0 / diff


def _lstsq(A, b):
    try:
        return np.linalg.lstsq(A, b, rcond=None)[0]
    except np.linalg.LinAlgError as exc:
        raise DegenerateError("least-squares fit did not converge") from exc


def relocate_poles(target, poles, z=None):
    """One weighted least-squares refit of ``P/Q`` in partial-fraction form.

    With ``Q_prev`` having roots ``poles``, the weighted problem
    ``min sum |(target Q - P) / Q_prev|^2`` (``Q`` monic) is linear in
    ``sigma = Q / Q_prev = 1 + sum d_k / (z - a_k)`` and
    ``P / Q_prev = sum c_k / (z - a_k)``. The new poles are the zeros of
    ``sigma``, i.e. the eigenvalues of ``diag(a) - 1 d^T``. This is the
    same iteration as :func:`iteration_step` but stays well conditioned
    when many poles cluster on the circle.
    """
    target = check_signal(target, "target")
    poles = check_complex(poles, "poles")
    z = unit_circle_nodes(target.size) if z is None else z
    C = _cauchy(z, poles)
    A = np.hstack([C, -target[:, None] * C])
    x = _lstsq(A, target.astype(complex))
    d = x[poles.size :]
    new = np.linalg.eigvals(np.diag(poles) - np.outer(np.ones(poles.size), d))
    if not np.all(np.isfinite(new)):
        raise DegenerateError("pole relocation produced non-finite poles")
    return new


def fit_residues(target, poles, z=None):
    """Least-squares residues ``r`` of ``target ~ sum r_k / (z - a_k)`` and the fitted values."""
    target = check_signal(target, "target")
    z = unit_circle_nodes(target.size) if z is None else z
    C = _cauchy(z, np.asarray(poles, dtype=complex))
    r = _lstsq(C, target.astype(complex))
    return r, C @ r


def fraction_from_poles(poles, residues):
    """Monomial-coefficient form of ``sum residues[k] / (z - poles[k])``."""
    u = np.asarray(poles, dtype=complex).ravel()
    r = np.asarray(residues, dtype=complex).ravel()
    p_desc = np.zeros(u.size, dtype=complex)
    for m in range(u.size):
        p_desc += r[m] * np.poly(np.delete(u, m))
    return RationalFraction(p_desc[::-1], np.poly(u)[::-1])


def _residue_candidate(target, poles, lam, z):
    """Quantized residue sequence of the partial-fraction fit with the given poles.

    A pole sitting on a node is the noiseless limit of an isolated step;
    there the fit reproduces the target sample, which is used directly.
    """
    r, vals = fit_residues(target, poles, z)
    near = np.min(np.abs(z[:, None] - poles[None, :]), axis=1) < NODE_LIMIT_TOL
    vals = np.where(near, target, vals.real)
    return residue_quantize(vals, lam), r


def _fit_residue(target, cfg, lam, outer, z):
    """Best quantized residue over all starts (selection by MSE to the target)."""
    M = cfg.fold_count
    best = (np.inf, None, None, None)
    starts = [np.roots(_init_denominator(cfg.seed, outer, s, M)[::-1]) for s in range(cfg.init_count)]
    if cfg.data_start:
        starts.insert(0, _peak_poles(target, M))
    for poles in starts:
        for _ in range(cfg.inner_max):
            try:
                new = relocate_poles(target, poles, z)
            except DegenerateError:
                break
            try:
                eps, r = _residue_candidate(target, new, lam, z)
            except DegenerateError:
                break
            mse = float(np.mean((target - eps) ** 2))
            if mse < best[0]:
                best = (mse, new, r, eps)
            moved = np.max(np.abs(new - poles))
            poles = new
            if moved <= cfg.inner_tol:
                break
    return best


def itersis_recover(y, kernel, cfg):
    """Alternate residue recovery and spike estimation on folded samples.

    Parameters
    ----------
    y : FoldedSignal
        Folded (and possibly quantized, noisy) samples.
    kernel : KernelModel
    cfg : ItersisConfig

    Returns
    -------
    ItersisResult
        ``converged`` is False when ``outer_max`` ran out; the iterate with
        the smallest data-consistency residual is returned then.
    """
    if not isinstance(y, FoldedSignal):
        raise ConfigError("itersis_recover expects a FoldedSignal")
    ybar = finite_difference(y.values, 1)
    n = ybar.size
    sigma = cfg.stop_threshold(y.lam, y.bits)
    z = unit_circle_nodes(n)
    empty = np.zeros(0, dtype=complex)

    dg_prev = np.zeros(n)
    target = dg_prev - ybar
    trace = []
    best = None
    for i in range(1, cfg.outer_max + 1):
        if cfg.fold_count:
            mse, poles, res, eps = _fit_residue(target, cfg, y.lam, i, z)
            if poles is None:
                raise DegenerateError("no residue candidate could be fitted")
        else:
            mse, poles, res, eps = float(np.mean(target**2)), empty, empty, np.zeros(n)
        spikes = solve_p2(ybar + eps, kernel, cfg.order, cfg.spectral_count, y.step)
        dg = finite_difference(synthesize(spikes, kernel, y.step, len(y), strict=False).values, 1)
        stop_norm = float(np.max(np.abs(dg - dg_prev)))
        consistency = float(np.mean((dg - ybar - eps) ** 2))
        trace.append({"iter": i, "mse": mse, "stop_norm": stop_norm})
        current = ItersisResult(spikes, residue_from_sequence(eps), poles, res, trace, False, i)
        if best is None or consistency < best[0]:
            best = (consistency, current)
        # the first estimate has no predecessor to compare against
        if i > 1 and stop_norm <= sigma:
            current.converged = True
            return current
        dg_prev = dg
        target = dg - ybar
    result = best[1]
    result.trace = trace
    result.iterations = len(trace)
    return result
