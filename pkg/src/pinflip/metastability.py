"""Conditioned initialization in the metastable well, exit-time measurement,
and the exponential-law comparison.

"Exit" means the first change of well membership (the first flip moving
l_max across the beta* N threshold), matching the indicator process whose
limit law is the unit-rate exponential on the relaxation-time scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import exact
from .dynamics import _SimState, replica_rng
from .errors import SamplingError, ValidationError
from .model import ModelParams, PathConfig
from .phase import activation_energy, is_localized

REJECTION_CAP = 20_000


@dataclass(frozen=True)
class WellSpec:
    """The metastable well H_N at one parameter point."""

    beta_star: float
    localized: bool  # G <= F (ties localized)
    well: str  # "E1" | "E2"

    def contains(self, l_max: int, N: int) -> bool:
        in_e1 = l_max <= self.beta_star * N
        return in_e1 if self.well == "E1" else not in_e1


def well_spec(params: ModelParams) -> WellSpec:
    """Identify H_N; refuses parameter points without a two-well structure."""
    e, beta = activation_energy(params.lam, params.sigma)
    if beta is None or e <= 0.0:
        raise ValidationError(
            "no metastable well: E(lambda, sigma) = 0 (beta* undefined) at "
            f"lambda={params.lam}, sigma={params.sigma}"
        )
    loc = is_localized(params.lam, params.sigma)
    return WellSpec(beta_star=beta, localized=loc, well="E2" if loc else "E1")


class _ConditionedSampler:
    """Exact draws from mu_N conditioned on E1 or E2.

    E1 uses direct sampling from the restricted excursion-composition DP.
    E2 uses rejection from the full-table sampler with an attempt cap and a
    direct decomposition fallback (first long excursion, then the three
    segments)."""

    def __init__(self, params: ModelParams, beta_star: float):
        self.params = params
        self.beta_star = beta_star
        N = params.N
        self.cap = exact._part_cap(beta_star * N, N)
        self.logE = exact.excursion_log_weight_array(params)
        self.logB = (
            exact._restricted_logB(params, self.cap, self.logE)
            if self.cap >= 1
            else None
        )
        self.logP = exact.bridge_prefix_log_partition(params)
        self.table = exact.ForwardTable(params, retain=True)
        self.loglam = math.log(params.lam) if params.lam > 0 else -math.inf
        self._exc_tables: dict[int, exact.ExcursionTable] = {}
        self._suffix_tables: dict[int, exact.ForwardTable] = {}

    def _excursion(self, n: int) -> exact.ExcursionTable:
        if n not in self._exc_tables:
            self._exc_tables[n] = exact.ExcursionTable(
                n, n * self.params.sigma / self.params.N
            )
        return self._exc_tables[n]

    def _sample_restricted_parts(self, j: int, rng) -> list[int]:
        """Composition of j into excursion half-lengths <= cap, from the
        exact restricted law (sampled last part first)."""
        parts = []
        while j > 0:
            k = min(j, self.cap)
            ns = np.arange(1, k + 1)
            logp = self.logE[1 : k + 1] + self.logB[j - ns] - self.logB[j]
            logp = logp + np.where(ns == j, 0.0, self.loglam)
            p = np.exp(logp - logp.max())
            p = p / p.sum()
            n = int(rng.choice(ns, p=p))
            parts.append(n)
            j -= n
        parts.reverse()
        return parts

    def _heights_from_parts(self, parts: list[int], rng) -> list[int]:
        heights: list[int] = [0]
        for n in parts:
            exc = self._excursion(n).sample_heights(rng)
            heights.extend(exc[1:])
        return heights

    def sample_E1(self, rng: np.random.Generator) -> PathConfig:
        if self.logB is None or self.logB[self.params.N] == -math.inf:
            raise SamplingError("E1 is empty at this threshold")
        parts = self._sample_restricted_parts(self.params.N, rng)
        heights = self._heights_from_parts(parts, rng)
        return PathConfig(heights)

    def sample_E2(
        self, rng: np.random.Generator, rejection_cap: int = REJECTION_CAP
    ) -> PathConfig:
        N = self.params.N
        thresh = self.beta_star * N
        for _ in range(rejection_cap):
            p = self.table.sample(rng)
            zeros = [x for x, v in enumerate(p.heights) if v == 0]
            lmax = max(b - a for a, b in zip(zeros, zeros[1:])) // 2
            if lmax > thresh:
                return p
        return self._sample_E2_direct(rng)

    def _sample_E2_direct(self, rng: np.random.Generator) -> PathConfig:
        """Decomposition sampler: draw the first long excursion (a, b) from
        its exact law, then the restricted prefix, the excursion shape, and
        the unconstrained suffix."""
        N = self.params.N
        pairs = []
        logs = []
        for ell in range(self.cap + 1, N + 1):
            for a in range(0, N - ell + 1):
                b = a + ell
                lw = (
                    (self.logB[a] if self.logB is not None else (0.0 if a == 0 else -math.inf))
                    + (self.loglam if a > 0 else 0.0)
                    + self.logE[ell]
                    + (self.loglam if b < N else 0.0)
                    + self.logP[N - b]
                )
                if lw > -math.inf:
                    pairs.append((a, b))
                    logs.append(lw)
        if not pairs:
            raise SamplingError("E2 is empty at this threshold")
        logs = np.array(logs)
        p = np.exp(logs - logs.max())
        p = p / p.sum()
        a, b = pairs[int(rng.choice(len(pairs), p=p))]
        prefix_parts = self._sample_restricted_parts(a, rng) if a > 0 else []
        heights = self._heights_from_parts(prefix_parts, rng)
        heights.extend(self._excursion(b - a).sample_heights(rng)[1:])
        if b < N:
            m = N - b
            if m not in self._suffix_tables:
                sub = ModelParams(m, self.params.lam, self.params.sigma * m / N)
                self._suffix_tables[m] = exact.ForwardTable(sub, retain=True)
            suffix = self._suffix_tables[m].sample(rng)
            heights.extend(suffix.heights[1:])
        return PathConfig(heights)


def sample_conditioned(
    params: ModelParams,
    well: str,
    rng: np.random.Generator,
    beta_star: Optional[float] = None,
    sampler: Optional[_ConditionedSampler] = None,
) -> PathConfig:
    """One exact draw from mu_N conditioned on the well ("E1" or "E2")."""
    if well not in ("E1", "E2"):
        raise ValidationError("well must be 'E1' or 'E2'")
    if sampler is None:
        if beta_star is None:
            beta_star = well_spec(params).beta_star
        sampler = _ConditionedSampler(params, beta_star)
    return sampler.sample_E1(rng) if well == "E1" else sampler.sample_E2(rng)


@dataclass(frozen=True)
class ExponentialFit:
    rate: float
    mean: float
    n: int
    censored_n: int
    ks: float
    ci95: tuple[float, float]


def exponential_fit(
    times: np.ndarray, censored: Optional[np.ndarray] = None
) -> ExponentialFit:
    """Exponential MLE with exposure-time censoring and a KS distance of the
    uncensored sample against the fitted law."""
    times = np.asarray(times, dtype=float)
    censored = np.asarray(censored, dtype=float) if censored is not None else np.empty(0)
    n = times.size
    if n < 2:
        raise ValidationError("need at least two uncensored observations")
    exposure = times.sum() + censored.sum()
    rate = n / exposure
    srt = np.sort(times)
    cdf = 1.0 - np.exp(-rate * srt)
    i = np.arange(1, n + 1)
    ks = float(np.max(np.maximum(np.abs(i / n - cdf), np.abs((i - 1) / n - cdf))))
    half = 1.96 / math.sqrt(n)
    return ExponentialFit(
        rate=rate,
        mean=1.0 / rate,
        n=n,
        censored_n=int(censored.size),
        ks=ks,
        ci95=(rate * math.exp(-half), rate * math.exp(half)),
    )


@dataclass
class ExitExperiment:
    """Exit times from the metastable well H_N with the exponential fit."""

    params: ModelParams
    beta_star: float
    regime: str
    well: str
    replicas: int
    exit_times: np.ndarray
    censored_times: np.ndarray
    fit: ExponentialFit
    reference_scale: Optional[float]  # 1/gap when computable


def predicted_exit_scale(params: ModelParams) -> float:
    """Order-of-magnitude forecast of the mean exit time: mu(H_N) divided by
    the exact boundary flow (the two-state reduced rate out of the well).
    A lower-bound-flavored heuristic used for CLI budget refusals."""
    spec = well_spec(params)
    w = exact.bottleneck_weights(params, spec.beta_star)
    log_mu_h = (w.log_Z_E1 if spec.well == "E1" else w.log_Z_E2) - w.log_Z
    return math.exp(log_mu_h - w.log_flow)


def exit_times(
    params: ModelParams,
    base_seed: int,
    replica_lo: int,
    replica_hi: int,
    horizon: float = math.inf,
) -> list[tuple[int, float, bool]]:
    """Exit times for a replica index range: (replica, time, censored).

    Each replica runs on its own counter-based stream, so any partition of
    the index range across workers reproduces the same observations.
    """
    spec = well_spec(params)
    sampler = _ConditionedSampler(params, spec.beta_star)
    N = params.N
    thresh = spec.beta_star * N
    n_sites = 2 * N - 1
    want_e1 = spec.well == "E1"
    out = []
    for r in range(replica_lo, replica_hi):
        rng = replica_rng(base_seed, r)
        init = sampler.sample_E1(rng) if want_e1 else sampler.sample_E2(rng)
        state = _SimState(params, init)
        t = 0.0
        while True:
            t += rng.exponential(1.0 / n_sites)
            if t > horizon:
                out.append((r, horizon, True))
                break
            state.resample(1 + int(rng.integers(n_sites)), rng.random())
            in_e1 = state.l_max <= thresh
            if in_e1 != want_e1:
                out.append((r, t, False))
                break
    return out


def exit_time_experiment(
    params: ModelParams,
    replicas: int,
    base_seed: int,
    horizon: float = math.inf,
    reference_scale: Optional[float] = None,
    observations: Optional[list[tuple[int, float, bool]]] = None,
) -> ExitExperiment:
    """Per replica: start from an exact draw of mu_N conditioned on H_N,
    run the dynamics until the first well-membership change, record the time.
    Truncated runs are recorded as censored observations, never dropped."""
    spec = well_spec(params)
    if observations is None:
        observations = exit_times(params, base_seed, 0, replicas, horizon)
    times = [t for _, t, cens in observations if not cens]
    censored = [t for _, t, cens in observations if cens]
    fit = exponential_fit(np.array(times), np.array(censored))
    return ExitExperiment(
        params=params,
        beta_star=spec.beta_star,
        regime="localized" if spec.localized else "delocalized",
        well=spec.well,
        replicas=replicas,
        exit_times=np.array(times),
        censored_times=np.array(censored),
        fit=fit,
        reference_scale=reference_scale,
    )
