"""Spectral flow, Krein spectral shift, decay and variation checks.

Counting conventions: the kernel window |lambda| < thr (thr the relative
kernel threshold) attaches to the nonnegative side, so

    sf(path) = n_-(A(0)) - n_-(A(1)),

an eigenvalue moving upward through 0 contributes +1, and the flow
telescopes over concatenated subpaths by construction.  Negative counts at
bisection points are computed by LDL inertia (Sylvester's law) instead of a
full eigensolve, which keeps crossing localization cheap at large dimension.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import (
    DegenerateSpectrum,
    NoSignal,
    StencilStraddlesCrossing,
    SupportTooSmall,
    TrackingFailed,
)
from .etazeta import (
    SQRT_PI,
    AsymptoticFit,
    EtaConfig,
    fit_short_time,
    relative_eta_invariant,
    reduced_eta,
)
from .lattice import OperatorPath
from .spectral import (
    DEFAULT_KERNEL_TOL,
    HeatTraceSamples,
    Spectrum,
    eigensolve,
    spectral_gap,
    weighted_trace,
)

MAX_FLOW_EVALS = 1_000_000


@dataclass
class FlowResult:
    sf: int
    crossings: list  # [(r_star, +1/-1), ...] sorted by r_star
    steps_used: int
    min_matching_gap: float


@dataclass
class SpectralShift:
    """Piecewise-constant sigma(lambda) = N_0(lambda) - N_1(lambda).

    breakpoints is the sorted union of both spectra; values[i] is sigma on
    (breakpoints[i], breakpoints[i+1]); sigma vanishes outside the convex
    hull of the spectra.  delta is the smallest nonzero |eigenvalue|.
    """

    breakpoints: np.ndarray
    values: np.ndarray
    delta: float
    _lam0: np.ndarray = field(repr=False, default=None)
    _lam1: np.ndarray = field(repr=False, default=None)

    def value_at(self, x: float) -> int:
        n0 = int(np.searchsorted(self._lam0, x, side="right"))
        n1 = int(np.searchsorted(self._lam1, x, side="right"))
        return n0 - n1

    def near_zero_values(self) -> tuple[int, int]:
        """(sigma on (-delta, 0), sigma on (0, delta))."""
        return self.value_at(-self.delta / 2.0), self.value_at(self.delta / 2.0)


@dataclass(frozen=True)
class TestFunction:
    """Smooth compactly supported function with an exact derivative."""

    f: callable
    df: callable
    support: tuple


@dataclass
class DecayReport:
    rate: float
    predicted: float
    gap: float
    samples: HeatTraceSamples | None = None


@dataclass
class SfEtaReport:
    xi: float
    sf: int
    variation_integral: float
    residual: float


@dataclass
class ParityReport:
    """Off-ladder content of the derivative-weighted trace expansion.

    The integer-power ladder occupies the slots k = n + 1 + 2m; the checked
    slots are the interleaved ones of opposite parity (the even indices in
    the two-dimensional normalization).  leading_index is the first ladder
    entry whose contribution at the window top clears the sampling noise
    floor; ratio compares the largest fitted off-ladder coefficient
    against it.
    """

    leading_index: int
    leading_coeff: float
    checked_indices: np.ndarray
    checked_coeffs: np.ndarray
    ratio: float
    noise_floor: float


# --- inertia counting ---------------------------------------------------------

def negative_count(matrix: np.ndarray, shift: float = 0.0) -> int:
    """Number of eigenvalues strictly below -shift, via LDL inertia."""
    a = matrix + shift * np.eye(matrix.shape[0])
    with warnings.catch_warnings():
        # ldl warns about discarding the imaginary diagonal; for our
        # Hermitian inputs those entries are rounding-level zeros.
        warnings.simplefilter("ignore", np.exceptions.ComplexWarning)
        _, d, _ = scipy.linalg.ldl(a, hermitian=True)
    n = a.shape[0]
    i = count = 0
    while i < n:
        off = abs(d[i, i + 1]) + abs(d[i + 1, i]) if i + 1 < n else 0.0
        if off > 0.0:
            blk = d[i:i + 2, i:i + 2]
            ev = np.linalg.eigvalsh(0.5 * (blk + blk.conj().T))
            count += int((ev < 0).sum())
            i += 2
        else:
            if d[i, i].real < 0:
                count += 1
            i += 1
    return count


def _spectrum_counts(lam: np.ndarray, thr: float) -> int:
    return int(np.count_nonzero(lam < -thr))


# --- spectral flow -------------------------------------------------------------

def _patch_norm_bound(patch: np.ndarray) -> float:
    fro = float(np.linalg.norm(patch, "fro"))
    inf = float(np.abs(patch).sum(axis=1).max())
    return min(fro, inf)


def _interval_bound(path: OperatorPath, lo: float, hi: float, pnorm: float) -> float:
    rs = np.linspace(lo, hi, 9)
    rho = np.array([path.schedule(float(r)) for r in rs])
    return float(np.abs(rho - rho[0]).max()) * pnorm


def spectral_flow(path: OperatorPath, initial_steps: int = 8,
                  kernel_tol: float = DEFAULT_KERNEL_TOL,
                  max_evals: int = MAX_FLOW_EVALS,
                  r_resolution: float = 1e-6) -> FlowResult:
    """Net signed count of eigenvalue crossings through zero along the path.

    The coarse grid is refined per interval until either no crossing is
    possible there (spectral distance to zero exceeds the interval's
    perturbation bound) or consecutive spectra drift by less than a third
    of the local spacing near zero; crossings are then localized by inertia
    bisection to `r_resolution`.
    """
    evals = 0

    def spectrum_at(r: float) -> np.ndarray:
        nonlocal evals
        evals += 1
        if evals > max_evals:
            raise TrackingFailed(f"exceeded {max_evals} eigensolves")
        return np.linalg.eigvalsh(path.at(r).matrix)

    pnorm = _patch_norm_bound(path.patch_matrix)
    grid = np.linspace(0.0, 1.0, initial_steps + 1)
    spectra = {float(r): spectrum_at(float(r)) for r in grid}
    radius = max(float(np.abs(s).max()) if s.size else 0.0 for s in spectra.values())
    thr = kernel_tol * (1.0 + radius + pnorm)
    cluster_tol = thr

    def local_spacing(lam_lo, lam_hi, window: float) -> float:
        spacing = math.inf
        for lam in (lam_lo, lam_hi):
            near = lam[np.abs(lam) <= window]
            if near.size < 2:
                continue
            gaps = np.diff(near)
            gaps = gaps[gaps > cluster_tol]
            if gaps.size:
                spacing = min(spacing, float(gaps.min()))
        return spacing

    accepted: list[tuple[float, float]] = []
    min_gap = math.inf
    work = [(float(grid[i]), float(grid[i + 1])) for i in range(len(grid) - 1)]
    while work:
        lo, hi = work.pop()
        lam_lo, lam_hi = spectra[lo], spectra[hi]
        b = _interval_bound(path, lo, hi, pnorm)
        clear_lo = lam_lo.size == 0 or float(np.abs(lam_lo).min()) > b + thr
        clear_hi = lam_hi.size == 0 or float(np.abs(lam_hi).min()) > b + thr
        if clear_lo or clear_hi:
            accepted.append((lo, hi))
            continue
        window = 4.0 * b + 10.0 * thr
        spacing = local_spacing(lam_lo, lam_hi, window)
        if spacing < math.inf:
            min_gap = min(min_gap, spacing)
        if b < spacing / 3.0 or (hi - lo) <= r_resolution:
            accepted.append((lo, hi))
            continue
        mid = 0.5 * (lo + hi)
        spectra[mid] = spectrum_at(mid)
        work.append((lo, mid))
        work.append((mid, hi))

    def n_minus_inertia(r: float) -> int:
        nonlocal evals
        evals += 1
        if evals > max_evals:
            raise TrackingFailed(f"exceeded {max_evals} eigensolves")
        return negative_count(path.at(r).matrix, thr)

    counts = {r: _spectrum_counts(lam, thr) for r, lam in spectra.items()}
    crossings = []

    def localize(lo: float, hi: float, c_lo: int, c_hi: int) -> None:
        if c_lo == c_hi:
            return
        if (hi - lo) <= r_resolution:
            r_star = 0.5 * (lo + hi)
            step = 1 if c_lo > c_hi else -1
            for _ in range(abs(c_hi - c_lo)):
                crossings.append((r_star, step))
            return
        mid = 0.5 * (lo + hi)
        c_m = n_minus_inertia(mid)
        localize(lo, mid, c_lo, c_m)
        localize(mid, hi, c_m, c_hi)

    for lo, hi in sorted(accepted):
        localize(lo, hi, counts[lo], counts[hi])
    crossings.sort(key=lambda c: c[0])

    sf = counts[0.0] - counts[1.0]
    return FlowResult(sf, crossings, evals, min_gap)


# --- Krein spectral shift -------------------------------------------------------

def spectral_shift(pair) -> SpectralShift:
    """Raw eigenvalue-counting shift function of a pair of spectra."""
    s0, s1 = _as_spectra(pair)
    lam0 = np.sort(s0.eigenvalues)
    lam1 = np.sort(s1.eigenvalues)
    delta = spectral_gap((s0, s1))
    breakpoints = np.unique(np.concatenate([lam0, lam1]))
    mids = 0.5 * (breakpoints[:-1] + breakpoints[1:])
    n0 = np.searchsorted(lam0, mids, side="right")
    n1 = np.searchsorted(lam1, mids, side="right")
    return SpectralShift(breakpoints, (n0 - n1).astype(int), delta, lam0, lam1)


def _as_spectra(pair) -> tuple[Spectrum, Spectrum]:
    out = []
    for a in pair:
        out.append(a if isinstance(a, Spectrum) else eigensolve(a))
    return tuple(out)


def bump_function(center: float, halfwidth: float, amplitude: float = 1.0) -> TestFunction:
    """exp(-1/(1-u^2)) bump, u = (x - center)/halfwidth."""

    def f(x):
        u = (np.asarray(x, dtype=float) - center) / halfwidth
        out = np.zeros_like(u)
        inside = np.abs(u) < 1.0
        out[inside] = amplitude * np.exp(-1.0 / (1.0 - u[inside] ** 2))
        return out if out.ndim else float(out)

    def df(x):
        u = (np.asarray(x, dtype=float) - center) / halfwidth
        out = np.zeros_like(u)
        inside = np.abs(u) < 1.0
        ui = u[inside]
        out[inside] = amplitude * np.exp(-1.0 / (1.0 - ui**2)) \
            * (-2.0 * ui / (1.0 - ui**2) ** 2) / halfwidth
        return out if out.ndim else float(out)

    return TestFunction(f, df, (center - halfwidth, center + halfwidth))


def polynomial_bump(center: float, halfwidth: float, power: int = 4) -> TestFunction:
    """(1-u^2)^power inside the support, zero outside."""

    def f(x):
        u = (np.asarray(x, dtype=float) - center) / halfwidth
        out = np.where(np.abs(u) < 1.0, np.maximum(1.0 - u**2, 0.0) ** power, 0.0)
        return out

    def df(x):
        u = (np.asarray(x, dtype=float) - center) / halfwidth
        inner = np.maximum(1.0 - u**2, 0.0)
        out = np.where(np.abs(u) < 1.0,
                       power * inner ** (power - 1) * (-2.0 * u) / halfwidth, 0.0)
        return out

    return TestFunction(f, df, (center - halfwidth, center + halfwidth))


def modulated_bump(center: float, halfwidth: float, frequency: float = 3.0) -> TestFunction:
    """sin-modulated smooth bump (sign-changing test function)."""
    base = bump_function(center, halfwidth)

    def f(x):
        u = (np.asarray(x, dtype=float) - center) / halfwidth
        return np.sin(frequency * u) * base.f(x)

    def df(x):
        u = (np.asarray(x, dtype=float) - center) / halfwidth
        return (frequency / halfwidth) * np.cos(frequency * u) * base.f(x) \
            + np.sin(frequency * u) * base.df(x)

    return TestFunction(f, df, base.support)


def standard_test_functions(hull: tuple, margin: float = 1.0) -> list[TestFunction]:
    lo, hi = hull
    c = 0.5 * (lo + hi)
    w = 0.5 * (hi - lo) + margin
    return [bump_function(c, w), polynomial_bump(c, w), modulated_bump(c, w)]


def krein_check(pair, phi: TestFunction, quadrature_points: int | None = None) -> float:
    """|Tr(phi(A1) - phi(A0)) - integral phi' sigma| for one test function.

    Default path sums phi differences over the exact breakpoints of sigma
    (sigma is piecewise constant, so the integral telescopes exactly);
    passing `quadrature_points` integrates phi' * sigma on a uniform grid
    of that many points instead.  Raises SupportTooSmall when the support
    does not cover both spectra.
    """
    s0, s1 = _as_spectra(pair)
    lam0, lam1 = s0.eigenvalues, s1.eigenvalues
    hull = (min(lam0.min(), lam1.min()), max(lam0.max(), lam1.max()))
    if phi.support[0] > hull[0] or phi.support[1] < hull[1]:
        raise SupportTooSmall(
            f"test-function support {phi.support} misses the spectral hull {hull}"
        )
    lhs = float(np.sum(phi.f(lam1)) - np.sum(phi.f(lam0)))
    shift = spectral_shift((s0, s1))
    if quadrature_points is None:
        bp = shift.breakpoints
        rhs = float((shift.values * (phi.f(bp[1:]) - phi.f(bp[:-1]))).sum())
    else:
        xs = np.linspace(phi.support[0], phi.support[1], quadrature_points)
        sig = np.array([shift.value_at(float(x)) for x in xs])
        rhs = float(np.trapezoid(phi.df(xs) * sig, xs))
    return abs(lhs - rhs)


# --- long-time decay ------------------------------------------------------------

def decay_check(pair, t_range: tuple | None = None, n_samples: int = 48) -> DecayReport:
    """Fit the exponential decay rate of the relative weighted trace.

    The gap delta = min nonzero |eigenvalue| predicts |h(t)| <~ e^(-delta^2 t)
    with the conservative reportable bound delta^2/2; the fitted rate comes
    from the longest constant-sign tail of the sampled trace.  Raises
    NoSignal when the relative trace vanishes identically at sampling
    precision (fully symmetric pairs).
    """
    s0, s1 = _as_spectra(pair)
    delta = spectral_gap((s0, s1))

    for attempt in range(3):
        if t_range is None:
            hi = (12.0 + 10.0 * attempt) / delta**2
            lo = 2.0 / delta**2
        else:
            lo, hi = t_range
        t = np.linspace(lo, hi, n_samples)
        lam0, lam1 = s0.eigenvalues, s1.eigenvalues
        h = np.array([
            float((lam1 * np.exp(-tt * lam1**2)).sum()
                  - (lam0 * np.exp(-tt * lam0**2)).sum()) for tt in t
        ])
        scale = float((np.abs(lam1) * np.exp(-lo * lam1**2)).sum()
                      + (np.abs(lam0) * np.exp(-lo * lam0**2)).sum())
        floor = 1e-13 * max(scale, 1e-300)
        live = np.abs(h) > floor
        if not live.any():
            raise NoSignal("relative weighted trace vanishes at sampling precision")
        # longest constant-sign run ending at the last live sample
        idx = np.nonzero(live)[0]
        end = idx[-1]
        sign = np.sign(h[end])
        start = end
        while start > 0 and live[start - 1] and np.sign(h[start - 1]) == sign:
            start -= 1
        run = np.arange(start, end + 1)
        if run.size >= 6 or t_range is not None:
            break
    if run.size < 3:
        raise NoSignal("too few usable samples in the decay window")
    slope = np.polyfit(t[run], np.log(np.abs(h[run])), 1)[0]
    samples = HeatTraceSamples(t, h, "relative-eta-weighted")
    return DecayReport(rate=float(-slope), predicted=delta**2 / 2.0,
                       gap=delta, samples=samples)


# --- variation of the invariant --------------------------------------------------

def _derivative_weights(path: OperatorPath, r: float,
                        kernel_tol: float = DEFAULT_KERNEL_TOL):
    """Eigenbasis diagonal of A'(r): spectrum plus weights (V* A' V)_ii."""
    spec = eigensolve(path.at(r), want_vectors=True, kernel_tol=kernel_tol)
    adot = path.derivative(r)
    weights = np.real(np.einsum("ij,jk,ki->i", spec.vectors.conj().T, adot,
                                spec.vectors))
    return spec, weights


def _odd_ladder(lam: np.ndarray, weights: np.ndarray, terms: int) -> np.ndarray:
    """Exact integer-power coefficients g_m = (-1)^m/m! sum_i w_i lam_i^2m."""
    from scipy.special import factorial
    m_idx = np.arange(terms)
    powers = lam[:, None] ** (2 * m_idx[None, :])
    return ((-1.0) ** m_idx / factorial(m_idx)) \
        * (weights[:, None] * powers).sum(axis=0)


def variation_coefficient(path: OperatorPath, r: float,
                          config: EtaConfig | None = None) -> AsymptoticFit:
    """Short-time expansion of the derivative-weighted trace at parameter r.

    g(t) = Tr( A'(r) exp(-t A(r)^2) ), expanded over t^((k-n-1)/2); the
    exact ladder puts (-1)^m/m! Tr(A'(r) A(r)^(2m)) at k = n + 1 + 2m.
    """
    config = config or EtaConfig()
    a = path.at(r)
    n = a.manifold_dim
    spec, weights = _derivative_weights(path, r, config.kernel_tol)
    radius = spec.radius
    t_cut = min(config.t_cut, 1.0 / radius**2) if radius > 0 else config.t_cut
    if config.fit_mode == "exact-taylor":
        from .etazeta import TAYLOR_TERMS
        k_max = n + 1 + 2 * (TAYLOR_TERMS - 1)
        coeffs = np.zeros(k_max + 1)
        coeffs[n + 1 + 2 * np.arange(TAYLOR_TERMS)] = \
            _odd_ladder(spec.eigenvalues, weights, TAYLOR_TERMS)
        return AsymptoticFit(n, k_max, coeffs, t_cut, 0.0, "exact-taylor",
                             weighted=True)
    t_min = t_cut * 10.0 ** (-config.window_decades)
    t_grid = np.geomspace(t_min, t_cut, config.n_samples)
    values = np.array([weighted_trace(spec, weights, tt) for tt in t_grid])
    samples = HeatTraceSamples(t_grid, values, "derivative-weighted")
    return fit_short_time(samples, n, config.k_max, "least-squares", t_cut,
                          weighted=True)


def even_coefficient_check(path: OperatorPath, r: float,
                           config: EtaConfig | None = None,
                           k_max: int = 12) -> ParityReport:
    """Fit the off-ladder expansion slots of the derivative-weighted trace.

    A joint fit of all slots is hopeless here: the half-integer exponents
    are interleaved with the integer-power ladder and the design matrix is
    exponentially ill-conditioned.  Instead the exact ladder, summed
    directly from the spectrum, is subtracted from the sampled trace, and
    only the opposite-parity basis t^((k-n-1)/2) (k = n mod 2, k <= k_max)
    is fit to the remainder.  Raises NoSignal when not a single ladder
    entry clears the sampling noise floor at the window top (the trace is
    then zero to rounding and there is nothing to compare against).
    """
    config = config or EtaConfig()
    n = path.base.manifold_dim
    spec, weights = _derivative_weights(path, r, config.kernel_tol)
    radius = spec.radius
    t_cut = min(config.t_cut, 1.0 / radius**2) if radius > 0 else config.t_cut
    t_min = t_cut * 10.0 ** (-config.window_decades)
    t_grid = np.geomspace(t_min, t_cut, config.n_samples)
    values = np.array([weighted_trace(spec, weights, tt) for tt in t_grid])

    from .etazeta import TAYLOR_TERMS
    m_idx = np.arange(TAYLOR_TERMS)
    gm = _odd_ladder(spec.eigenvalues, weights, TAYLOR_TERMS)
    remainder = values - (gm[None, :] * t_grid[:, None] ** m_idx[None, :]).sum(axis=1)

    floor = float(np.finfo(float).eps * np.abs(weights).sum())
    contributions = np.abs(gm) * t_cut ** m_idx
    live = np.nonzero(contributions > 1e3 * floor)[0]
    if live.size == 0:
        raise NoSignal("derivative-weighted trace is zero to rounding; "
                       "no ladder signal to compare against")
    lead = int(live[0])

    ks = np.arange(n % 2, k_max + 1, 2)
    columns = t_grid[:, None] ** ((ks[None, :] - n - 1) / 2.0)
    scale = np.linalg.norm(columns, axis=0)
    solution, *_ = np.linalg.lstsq(columns / scale, remainder, rcond=None)
    checked = solution / scale
    ratio = float(np.abs(checked).max() / abs(gm[lead]))
    return ParityReport(leading_index=n + 1 + 2 * lead,
                        leading_coeff=float(gm[lead]),
                        checked_indices=ks, checked_coeffs=checked,
                        ratio=ratio, noise_floor=floor)


def _chebyshev_grid(points: int = 17) -> np.ndarray:
    j = np.arange(points)
    return 0.5 * (1.0 - np.cos(np.pi * j / (points - 1)))


def variation_check(path: OperatorPath, base=None, r_grid=None,
                    config: EtaConfig | None = None, fd_step: float = 1e-3,
                    kernel_tol: float = DEFAULT_KERNEL_TOL) -> float:
    """max_r | d/dr eta0(r) + (2/sqrt(pi)) c_n(r) | over the parameter grid.

    The derivative is a centered difference of the regularized invariant of
    (base, path(r +- e)); a stencil straddling an eigenvalue crossing is
    shrunk and retried, and raises StencilStraddlesCrossing if a crossing
    sits at the grid point itself.
    """
    config = config or EtaConfig()
    base_op = base if base is not None else path.endpoints[0]
    if r_grid is None:
        r_grid = _chebyshev_grid(17)
    r_grid = np.clip(np.asarray(r_grid, dtype=float), fd_step, 1.0 - fd_step)

    radius_hint = float(np.abs(path.at(0.5).matrix).sum(axis=1).max())
    thr = kernel_tol * (1.0 + radius_hint)

    worst = 0.0
    for r in r_grid:
        e = fd_step
        for _attempt in range(4):
            lo, hi = max(r - e, 0.0), min(r + e, 1.0)
            c_lo = negative_count(path.at(lo).matrix, thr)
            c_hi = negative_count(path.at(hi).matrix, thr)
            if c_lo == c_hi:
                break
            e *= 0.1
        else:
            raise StencilStraddlesCrossing(f"crossing pinned at r = {r:.6f}")
        eta_hi = relative_eta_invariant((base_op, path.at(hi)), config).finite_part
        eta_lo = relative_eta_invariant((base_op, path.at(lo)), config).finite_part
        fd = (eta_hi - eta_lo) / (hi - lo)
        fit = variation_coefficient(path, float(r), config)
        c_n = float(fit.coeffs[fit.n])
        worst = max(worst, abs(fd + 2.0 / SQRT_PI * c_n))
    return worst


def sf_eta_identity(path: OperatorPath, config: EtaConfig | None = None,
                    r_points: int = 17) -> SfEtaReport:
    """Reduced invariant of the endpoints vs. flow plus variation integral.

    xi(0; A1, A0) = sf(path) + integral_0^1 -(1/sqrt(pi)) c_n(r) dr ;
    in exact-taylor mode c_n vanishes identically and the identity is the
    exact integer statement xi = sf.
    """
    config = config or EtaConfig()
    eta = relative_eta_invariant(tuple(path.endpoints), config)
    xi = reduced_eta(eta)
    flow = spectral_flow(path, kernel_tol=config.kernel_tol)
    rs = _chebyshev_grid(r_points)
    n = path.base.manifold_dim
    cn = np.array([
        float(variation_coefficient(path, float(r), config).coeffs[n])
        for r in rs
    ])
    integral = float(np.trapezoid(-cn / SQRT_PI, rs))
    residual = abs(xi - flow.sf - integral)
    return SfEtaReport(xi=xi, sf=flow.sf, variation_integral=integral,
                       residual=residual)
