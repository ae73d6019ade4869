"""Closed-form and quadrature evaluation of the phase diagram.

Quantities: the pinning free energy F(lambda), the area free energy G(sigma)
and its derivative, the activation energy E(lambda, sigma) with its critical
unpinned fraction beta_star, the dynamic threshold sigma0(lambda), the
macroscopic shape M_sigma, and dense phase grids with regime labels.

G is computed by adaptive quadrature of log cosh(sigma (1 - 2x)) over [0, 1]
to 1e-12 absolute (it multiplies 2N in exponents, so the error must stay far
below 1/N at every target size). The calculus identity
G + sigma G' = log cosh sigma is used only as a cross-check and as the
monotone reformulation for root isolation; the integral definition is the
ground truth.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Optional

from scipy.integrate import quad

from .errors import ConvergenceError, ValidationError

_QUAD_OPTS = dict(epsabs=1e-12, epsrel=1e-13, limit=300)


def log_cosh(x: float) -> float:
    """Overflow-safe log cosh: |x| + log(1 + e^(-2|x|)) - log 2."""
    ax = abs(x)
    return ax + math.log1p(math.exp(-2.0 * ax)) - math.log(2.0)


def free_energy_pinning(lam: float) -> float:
    """F(lambda): 0 up to the pinning threshold lambda = 2, then
    log(lambda / (2 sqrt(lambda - 1)))."""
    if lam < 0:
        raise ValidationError(f"lambda must be nonnegative, got {lam}")
    if lam <= 2.0:
        return 0.0
    return math.log(lam / (2.0 * math.sqrt(lam - 1.0)))


def free_energy_area(sigma: float) -> tuple[float, float]:
    """(G, G') at sigma, by adaptive quadrature; exact zeros at sigma = 0."""
    if sigma < 0:
        raise ValidationError(f"sigma must be nonnegative, got {sigma}")
    if sigma == 0.0:
        return 0.0, 0.0
    g, _ = quad(lambda x: log_cosh(sigma * (1.0 - 2.0 * x)), 0.0, 1.0, **_QUAD_OPTS)
    gp, _ = quad(
        lambda x: (1.0 - 2.0 * x) * math.tanh(sigma * (1.0 - 2.0 * x)),
        0.0,
        1.0,
        **_QUAD_OPTS,
    )
    return g, gp


def _solve_logcosh_equals(target: float, hi: float) -> float:
    """Unique positive root of log cosh(u) = target on (0, hi], by bisection
    (monotone) followed by one Newton polish."""
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if log_cosh(mid) < target:
            lo = mid
        else:
            hi = mid
    u = 0.5 * (lo + hi)
    t = math.tanh(u)
    if t > 0:
        u -= (log_cosh(u) - target) / t
    return u


def sigma0(lam: float) -> float:
    """The dynamic threshold: the positive root of
    G(s) + s G'(s) = F(lambda), i.e. log cosh(s) = F(lambda).

    Defined for lambda > 2 only; below the pinning threshold F = 0 and the
    root degenerates to 0, reported as a domain error rather than silently.
    """
    f = free_energy_pinning(lam)
    if f <= 0.0:
        raise ValidationError(
            f"sigma0 requires lambda > 2 (F > 0); at lambda = {lam} the "
            "degenerate answer is sigma0 = 0"
        )
    # log cosh(s) <= s, so the root lies below max(2*f, 1)
    hi = max(2.0 * f, 1.0)
    while log_cosh(hi) < f:
        hi *= 2.0
    s0 = _solve_logcosh_equals(f, hi)
    g, gp = free_energy_area(s0)
    if abs(g + s0 * gp - f) > 1e-10:
        raise ConvergenceError(f"sigma0 residual {abs(g + s0 * gp - f):.3e} > 1e-10")
    return s0


def activation_energy(lam: float, sigma: float) -> tuple[float, Optional[float]]:
    """(E, beta_star): the barrier height of
    V(beta) = -beta G(beta sigma) - (1 - beta) F(lambda) on [0, 1].

    beta_star is the interior stationarity root when it exists (equivalent to
    log cosh(sigma) > F(lambda) > 0); otherwise E = 0 and beta_star is None.
    """
    f = free_energy_pinning(lam)
    if sigma == 0.0:
        return 0.0, None
    if f <= 0.0 or log_cosh(sigma) <= f:
        return 0.0, None
    # stationarity: log cosh(beta sigma) = F(lambda), monotone in beta
    u = _solve_logcosh_equals(f, sigma)  # u = beta* sigma
    beta = u / sigma
    g_sig, _ = free_energy_area(sigma)
    g_u, gp_u = free_energy_area(u)
    resid = g_u + u * gp_u - f
    if abs(resid) > 1e-10:
        raise ConvergenceError(f"beta_star residual {abs(resid):.3e} > 1e-10")
    if not 0.0 < beta < 1.0:
        return 0.0, None
    e = min(g_sig, f) - (beta * g_u + (1.0 - beta) * f)
    return max(e, 0.0), beta


def macroscopic_shape(sigma: float, u: float) -> float:
    """M_sigma(u) = (1/sigma) log(cosh(sigma)/cosh(sigma(1-u))) on [0, 2];
    identically 0 at sigma = 0 (limit)."""
    if sigma < 0:
        raise ValidationError(f"sigma must be nonnegative, got {sigma}")
    if not 0.0 <= u <= 2.0:
        raise ValidationError(f"u must lie in [0, 2], got {u}")
    if sigma == 0.0:
        return 0.0
    return (log_cosh(sigma) - log_cosh(sigma * (1.0 - u))) / sigma


_TIE_TOL = 1e-12


@dataclass(frozen=True)
class PhasePoint:
    """All analytic quantities at one (lambda, sigma)."""

    lam: float
    sigma: float
    F: float
    G: float
    Gprime: float
    E: float
    beta_star: Optional[float]
    sigma0: float
    static_regime: str  # localized | delocalized | critical
    dynamic_regime: str  # fast | slow


def phase_point(lam: float, sigma: float) -> PhasePoint:
    f = free_energy_pinning(lam)
    g, gp = free_energy_area(sigma)
    e, beta = activation_energy(lam, sigma)
    if abs(g - f) <= _TIE_TOL:
        static = "critical"
    elif g < f:
        static = "localized"
    else:
        static = "delocalized"
    s0 = sigma0(lam) if lam > 2.0 else 0.0
    return PhasePoint(
        lam=lam,
        sigma=sigma,
        F=f,
        G=g,
        Gprime=gp,
        E=e,
        beta_star=beta,
        sigma0=s0,
        static_regime=static,
        dynamic_regime="slow" if e > 0.0 else "fast",
    )


def is_localized(lam: float, sigma: float) -> bool:
    """Regime used for well identification: localized iff G(sigma) <= F(lambda)
    (ties break localized)."""
    g, _ = free_energy_area(sigma)
    return g <= free_energy_pinning(lam)


def phase_grid(
    lambdas: Iterable[float], sigmas: Iterable[float]
) -> list[PhasePoint]:
    """Dense grid of PhasePoints; F, sigma0 cached per lambda and (G, G')
    per sigma, so cost is linear in the axis lengths."""
    lam_vals = list(lambdas)
    sig_vals = list(sigmas)
    if not lam_vals or not sig_vals:
        raise ValidationError("phase_grid needs nonempty ranges")
    f_cache = {lam: free_energy_pinning(lam) for lam in lam_vals}
    s0_cache = {lam: (sigma0(lam) if lam > 2.0 else 0.0) for lam in lam_vals}
    g_cache = {s: free_energy_area(s) for s in sig_vals}
    out = []
    for lam in lam_vals:
        f = f_cache[lam]
        for s in sig_vals:
            g, gp = g_cache[s]
            if s == 0.0 or f <= 0.0 or log_cosh(s) <= f:
                e, beta = 0.0, None
            else:
                beta = s0_cache[lam] / s
                if beta >= 1.0:
                    e, beta = 0.0, None
                else:
                    u = s0_cache[lam]
                    g_u, _ = free_energy_area(u)
                    e = max(min(g, f) - (beta * g_u + (1.0 - beta) * f), 0.0)
            if abs(g - f) <= _TIE_TOL:
                static = "critical"
            elif g < f:
                static = "localized"
            else:
                static = "delocalized"
            out.append(
                PhasePoint(
                    lam=lam,
                    sigma=s,
                    F=f,
                    G=g,
                    Gprime=gp,
                    E=e,
                    beta_star=beta,
                    sigma0=s0_cache[lam],
                    static_regime=static,
                    dynamic_regime="slow" if e > 0.0 else "fast",
                )
            )
    return out


GRID_CSV_COLUMNS = [
    "lambda",
    "sigma",
    "F",
    "G",
    "Gprime",
    "E",
    "beta_star",
    "sigma0",
    "static_regime",
    "dynamic_regime",
]


def write_grid_csv(points: list[PhasePoint], path: str) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(GRID_CSV_COLUMNS)
        for p in points:
            w.writerow(
                [
                    format(p.lam, ".17g"),
                    format(p.sigma, ".17g"),
                    format(p.F, ".17g"),
                    format(p.G, ".17g"),
                    format(p.Gprime, ".17g"),
                    format(p.E, ".17g"),
                    "" if p.beta_star is None else format(p.beta_star, ".17g"),
                    format(p.sigma0, ".17g"),
                    p.static_regime,
                    p.dynamic_regime,
                ]
            )
