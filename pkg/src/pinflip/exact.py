"""Exact log-domain computation of partition functions, event weights,
marginals, renewal kernels, and exact equilibrium sampling.

Everything here is dynamic programming over the transfer structure of the
walk: a forward table over (position, height) for bridges, a first-return
table for strict excursions, and excursion-composition convolutions for
constrained events (largest-excursion caps, bottleneck boundary weights).
All weights are kept in log domain with log-sum-exp accumulation because
exponents reach 2N G(sigma), i.e. thousands.

Conventions
-----------
* ``u`` denotes the per-site tilt sigma/N of the ambient model; a piece of
  half-length n embedded in it has effective tilt parameter n*u.
* log Zpin(m) is the pinned-bridge partition function of half-length m with
  per-site tilt u (the m-th entry of the prefix array of the forward DP).
* log E(n) is the strict-excursion weight of half-length n (zeros only at the
  endpoints), per-site tilt u.
* Compositions of excursions carry one factor lambda per interior contact,
  i.e. lambda^(k-1) for k excursions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.special import logsumexp

from .errors import CapacityError, ValidationError
from .model import ModelParams, PathConfig, enumerate_paths, log_weight
from .phase import free_energy_pinning, log_cosh

LOG2 = math.log(2.0)
NEG_INF = -math.inf

LOGZ_CAP = 10**6
FULL_TABLE_CAP = 10**4
ENUM_CAP = 10
LMAX_LAW_CAP = 10**4


def _lse(arr: np.ndarray) -> float:
    if arr.size == 0:
        return NEG_INF
    with np.errstate(over="ignore"):
        return float(logsumexp(arr))


def _log_diff(a: float, b: float) -> float:
    """log(e^a - e^b) for a >= b, stable when the two are close."""
    if b == NEG_INF:
        return a
    d = a - b
    if d < 0:
        if d > -1e-12:  # roundoff tie: the difference is numerically zero
            return NEG_INF
        raise ValidationError(f"log_diff needs a >= b, got gap {d}")
    if d == 0.0:
        return NEG_INF
    return a + math.log(-math.expm1(-d))


def _bridge_forward(
    N: int, lam: float, u: float, retain: bool
) -> tuple[Optional[list[np.ndarray]], np.ndarray]:
    """Forward DP for pinned bridges of length 2N with per-site tilt u.

    Returns (rows, prefix): rows[x][h] is the log forward weight of reaching
    (x, h) including all arrival site factors (None unless retained);
    prefix[m] = log Zpin(m), recorded before the pinning factor of the zero
    at 2m is applied to the continuing table.
    """
    loglam = math.log(lam) if lam > 0 else NEG_INF
    prev = np.array([0.0])
    rows: Optional[list[np.ndarray]] = [prev] if retain else None
    prefix = np.full(N + 1, NEG_INF)
    prefix[0] = 0.0
    for x in range(1, 2 * N + 1):
        hmax = min(x, 2 * N - x)
        prev_hmax = len(prev) - 1
        from_below = np.full(hmax + 1, NEG_INF)
        m = min(hmax, prev_hmax + 1)
        if m >= 1:
            from_below[1 : m + 1] = prev[0:m]
        from_above = np.full(hmax + 1, NEG_INF)
        m2 = min(hmax + 1, prev_hmax)
        if m2 >= 1:
            from_above[0:m2] = prev[1 : m2 + 1]
        new = np.logaddexp(from_below, from_above)
        new += -LOG2 + u * np.arange(hmax + 1)
        if x % 2 == 0:
            prefix[x // 2] = new[0]
            if x < 2 * N:
                new[0] += loglam
        if retain:
            rows.append(new)
        prev = new
    return rows, prefix


def _excursion_log_weights(M: int, u: float) -> np.ndarray:
    """log E(n) for n = 1..M in one first-return DP (index 0 unused)."""
    out = np.full(M + 1, NEG_INF)
    if M < 1:
        return out
    prev = np.array([NEG_INF, u - LOG2])  # row at x = 1
    out[1] = prev[1] - LOG2
    for x in range(2, 2 * M):
        hmax = min(x, 2 * M - x)
        prev_hmax = len(prev) - 1
        from_below = np.full(hmax + 1, NEG_INF)
        m = min(hmax, prev_hmax + 1)
        if m >= 1:
            from_below[1 : m + 1] = prev[0:m]
        from_above = np.full(hmax + 1, NEG_INF)
        m2 = min(hmax + 1, prev_hmax)
        if m2 >= 1:
            from_above[0:m2] = prev[1 : m2 + 1]
        new = np.logaddexp(from_below, from_above)
        new += -LOG2 + u * np.arange(hmax + 1)
        new[0] = NEG_INF  # interior heights strictly positive
        if x % 2 == 1:
            out[(x + 1) // 2] = new[1] - LOG2
        prev = new
    return out


def excursion_Z(n: int, sigma_eff: float) -> float:
    """log Z_n(0, sigma_eff): one strict excursion of length 2n with tilt
    exp(sigma_eff * A / n)."""
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    if sigma_eff < 0:
        raise ValidationError(f"sigma_eff must be nonnegative, got {sigma_eff}")
    return float(_excursion_log_weights(n, sigma_eff / n)[n])


class ForwardTable:
    """Log-domain transfer-matrix table for one (N, lambda, sigma).

    Always provides total_logZ and the prefix partition array; retains the
    full per-site rows (for marginals and exact sampling) only on request,
    capped at full_table_cap (default 1e4; the table is O(N^2) floats).
    """

    def __init__(
        self,
        params: ModelParams,
        retain: bool = False,
        full_table_cap: int = FULL_TABLE_CAP,
        logz_cap: int = LOGZ_CAP,
    ):
        if params.N > logz_cap:
            raise CapacityError(f"partition DP capped at N <= {logz_cap}")
        if retain and params.N > full_table_cap:
            raise CapacityError(
                f"full-table retention capped at N <= {full_table_cap}; "
                f"got N = {params.N}"
            )
        self.params = params
        self.N = params.N
        rows, prefix = _bridge_forward(params.N, params.lam, params.site_tilt, retain)
        self.rows = rows
        self.prefix_logZ = prefix
        self.total_logZ = float(prefix[params.N])
        self._backward: Optional[list[np.ndarray]] = None

    def _need_rows(self):
        if self.rows is None:
            raise CapacityError("table built without retention; pass retain=True")

    def _site_factor(self, x: int, hs: np.ndarray) -> np.ndarray:
        p = self.params
        f = -LOG2 + p.site_tilt * hs.astype(float)
        if 0 < x < 2 * self.N:
            loglam = math.log(p.lam) if p.lam > 0 else NEG_INF
            f = f + np.where(hs == 0, loglam, 0.0)
        return f

    def _backward_rows(self) -> list[np.ndarray]:
        self._need_rows()
        if self._backward is not None:
            return self._backward
        N = self.N
        bw: list[np.ndarray] = [np.empty(0)] * (2 * N + 1)
        bw[2 * N] = np.array([0.0])
        for x in range(2 * N - 1, -1, -1):
            hmax = min(x, 2 * N - x)
            nxt = bw[x + 1]
            nxt_hmax = len(nxt) - 1
            hs_next = np.arange(nxt_hmax + 1)
            nxt_full = nxt + self._site_factor(x + 1, hs_next)
            to_above = np.full(hmax + 1, NEG_INF)  # h -> h+1
            m = min(hmax + 1, nxt_hmax)
            if m >= 1:
                to_above[0:m] = nxt_full[1 : m + 1]
            to_below = np.full(hmax + 1, NEG_INF)  # h -> h-1
            m2 = min(hmax, nxt_hmax + 1)
            if m2 >= 1:
                to_below[1 : m2 + 1] = nxt_full[0:m2]
            bw[x] = np.logaddexp(to_above, to_below)
        self._backward = bw
        return bw

    def site_marginal(self, x: int) -> np.ndarray:
        """Exact distribution of xi_x, as probabilities over h = 0..min(x, 2N-x)."""
        if not 0 <= x <= 2 * self.N:
            raise ValidationError(f"site {x} outside 0..{2 * self.N}")
        self._need_rows()
        bw = self._backward_rows()
        logits = self.rows[x] + bw[x]
        probs = np.exp(logits - _lse(logits))
        probs[probs < 0] = 0.0
        return probs / probs.sum()

    def sample(self, rng: np.random.Generator) -> PathConfig:
        """One exact draw from mu_N by backward height-by-height sampling."""
        self._need_rows()
        N = self.N
        heights = [0] * (2 * N + 1)
        h = 0
        for x in range(2 * N - 1, -1, -1):
            row = self.rows[x]
            hmax = len(row) - 1
            cands = [hh for hh in (h - 1, h + 1) if 0 <= hh <= hmax]
            if len(cands) == 1:
                h = cands[0]
            else:
                la, lb = row[cands[0]], row[cands[1]]
                mx = max(la, lb)
                pa = math.exp(la - mx)
                pb = math.exp(lb - mx)
                h = cands[0] if rng.random() * (pa + pb) < pa else cands[1]
            heights[x] = h
        p = PathConfig.__new__(PathConfig)
        object.__setattr__(p, "heights", tuple(heights))
        return p


class ExcursionTable:
    """Retained forward table of a single strict excursion of half-length n
    (per-site tilt sigma_eff / n), for exact shape sampling."""

    def __init__(self, n: int, sigma_eff: float):
        if n < 1:
            raise ValidationError("excursion length must be >= 1")
        self.n = n
        u = sigma_eff / n
        rows = [np.array([0.0])]
        prev = rows[0]
        for x in range(1, 2 * n + 1):
            hmax = min(x, 2 * n - x)
            prev_hmax = len(prev) - 1
            from_below = np.full(hmax + 1, NEG_INF)
            m = min(hmax, prev_hmax + 1)
            if m >= 1:
                from_below[1 : m + 1] = prev[0:m]
            from_above = np.full(hmax + 1, NEG_INF)
            m2 = min(hmax + 1, prev_hmax)
            if m2 >= 1:
                from_above[0:m2] = prev[1 : m2 + 1]
            new = np.logaddexp(from_below, from_above)
            new += -LOG2 + u * np.arange(hmax + 1)
            if 0 < x < 2 * n:
                new[0] = NEG_INF
            rows.append(new)
            prev = new
        self.rows = rows
        self.log_weight = float(rows[2 * n][0])

    def sample_heights(self, rng: np.random.Generator) -> list[int]:
        heights = [0] * (2 * self.n + 1)
        h = 0
        for x in range(2 * self.n - 1, -1, -1):
            row = self.rows[x]
            hmax = len(row) - 1
            cands = [hh for hh in (h - 1, h + 1) if 0 <= hh <= hmax]
            cands = [hh for hh in cands if row[hh] > NEG_INF]
            if len(cands) == 1:
                h = cands[0]
            else:
                la, lb = row[cands[0]], row[cands[1]]
                mx = max(la, lb)
                pa, pb = math.exp(la - mx), math.exp(lb - mx)
                h = cands[0] if rng.random() * (pa + pb) < pa else cands[1]
            heights[x] = h
        return heights


def partition_function(params: ModelParams) -> float:
    """log Z_N(lambda, sigma) by the forward DP (O(N^2), O(N) memory)."""
    return ForwardTable(params).total_logZ


def exact_sample(params: ModelParams, rng: np.random.Generator) -> PathConfig:
    """One exact equilibrium draw; builds a throwaway table.  Use
    ForwardTable(params, retain=True).sample(rng) for repeated draws."""
    return ForwardTable(params, retain=True).sample(rng)


def site_marginal(params: ModelParams, x: int) -> np.ndarray:
    """Exact height distribution at site x; builds a throwaway table."""
    return ForwardTable(params, retain=True).site_marginal(x)


def bridge_prefix_log_partition(params: ModelParams) -> np.ndarray:
    """log Zpin(m) = log Z_m(lambda, m sigma / N) for m = 0..N."""
    return ForwardTable(params).prefix_logZ


def excursion_log_weight_array(params: ModelParams, M: Optional[int] = None) -> np.ndarray:
    """log E(n) = log Z_n(0, n sigma / N) for n = 1..M (default M = N)."""
    M = params.N if M is None else M
    return _excursion_log_weights(M, params.site_tilt)


def _part_cap(beta_star_n: float, N: int) -> int:
    """Largest integer part length admissible under l <= beta_star * N."""
    return min(N, int(math.floor(beta_star_n)))


def _restricted_logB(
    params: ModelParams, cap: int, logE: Optional[np.ndarray] = None
) -> np.ndarray:
    """logB[j] = log weight of bridges of half-length j with all excursions
    of half-length <= cap; logB[0] = 0."""
    N = params.N
    if logE is None:
        logE = excursion_log_weight_array(params)
    loglam = math.log(params.lam) if params.lam > 0 else NEG_INF
    logB = np.full(N + 1, NEG_INF)
    logB[0] = 0.0
    for j in range(1, N + 1):
        k = min(j, cap)
        if k < 1:
            continue
        ns = np.arange(1, k + 1)
        terms = logE[1 : k + 1] + logB[j - ns]
        lam_adj = np.where(ns == j, 0.0, loglam)
        logB[j] = _lse(terms + lam_adj)
    return logB


def restricted_partition(params: ModelParams, m: int) -> float:
    """log Z(l_max <= m): exact event weight via excursion-composition DP."""
    if not 1 <= m <= params.N:
        raise ValidationError(f"m must lie in 1..{params.N}, got {m}")
    return float(_restricted_logB(params, m)[params.N])


def lmax_distribution(params: ModelParams) -> np.ndarray:
    """Exact law of l_max as probabilities indexed 1..N (entry 0 unused).

    Cost is O(N^3): one capped composition DP per threshold.
    """
    N = params.N
    if N > LMAX_LAW_CAP:
        raise CapacityError(f"lmax law capped at N <= {LMAX_LAW_CAP}")
    logE = excursion_log_weight_array(params)
    log_cum = np.array(
        [NEG_INF]
        + [float(_restricted_logB(params, m, logE)[N]) for m in range(1, N + 1)]
    )
    logZ = log_cum[N]
    probs = np.zeros(N + 1)
    for m in range(1, N + 1):
        probs[m] = math.exp(_log_diff(log_cum[m], log_cum[m - 1]) - logZ)
    return probs


@dataclass(frozen=True)
class BottleneckWeights:
    """Exact log weights of the bottleneck partition at one (params, beta*)."""

    beta_star: float
    part_cap: int
    log_Z: float
    log_Z_E1: float
    log_Z_E2: float
    log_Z_boundary: float
    log_flow: float  # log of mu-normalized probability flow E1 -> E2


def _no_merge_logZ(params: ModelParams, beta_star: float, logE: np.ndarray) -> float:
    """log weight of {all excursions <= beta* N and no adjacent pair sums
    beyond beta* N}: the complement of the boundary within E1."""
    D, cap = _no_merge_last_part(params, beta_star, logE)
    if cap < 1:
        return NEG_INF
    return _lse(D[params.N])


def _no_merge_last_part(params: ModelParams, beta_star: float, logE: np.ndarray
                        ) -> tuple[np.ndarray, int]:
    """The last-part transfer table D[j, n] of the no-merge DP (compositions
    of j, parts <= cap, no adjacent pair summing beyond beta* N, last part n),
    plus the part cap."""
    N = params.N
    T = beta_star * N
    cap = _part_cap(T, N)
    loglam = math.log(params.lam) if params.lam > 0 else NEG_INF
    D = np.full((N + 1, cap + 1), NEG_INF)
    if cap < 1:
        return D, cap
    pre = np.full((N + 1, cap + 1), NEG_INF)
    ns = np.arange(1, cap + 1)
    pair_cap = np.minimum(np.floor(T - ns).astype(int), cap)
    pair_cap = np.maximum(pair_cap, 0)
    for j in range(1, N + 1):
        k = min(j, cap)
        row = np.full(cap + 1, NEG_INF)
        nn = ns[:k]
        gathered = pre[j - nn, pair_cap[:k]]  # pre[., 0] is -inf (no part 0)
        row[1 : k + 1] = logE[1 : k + 1] + loglam + gathered
        if j <= cap:
            row[j] = np.logaddexp(row[j], logE[j])  # single-part composition
        D[j] = row
        pre[j] = np.logaddexp.accumulate(row)
    return D, cap


def _boundary_logZ_direct(
    params: ModelParams, beta_star: float, logE: np.ndarray, logB: np.ndarray
) -> float:
    """log Z(boundary of E1) as a direct sum (no cancellation): decompose by
    the first adjacent excursion pair exceeding the threshold; the prefix up
    to it has no such pair (no-merge table), the suffix is only capped."""
    N = params.N
    T = beta_star * N
    D, cap = _no_merge_last_part(params, beta_star, logE)
    if cap < 1:
        return NEG_INF
    loglam = math.log(params.lam) if params.lam > 0 else NEG_INF
    # G[r, m] = LSE over n2 in [m, min(cap, r)] of
    #   E(n2) + lambda^[r-n2>0] + B_T(r-n2)
    G = np.full((N + 1, cap + 2), NEG_INF)
    for m in range(cap, 0, -1):
        rs = np.arange(m, N + 1)
        adj = np.where(rs - m > 0, loglam, 0.0)
        term = logE[m] + adj + logB[rs - m]
        G[rs, m] = np.logaddexp(G[rs, m + 1], term)
    terms = []
    for j1 in range(1, N):
        k = min(j1, cap)
        n1 = np.arange(1, k + 1)
        n2_min = np.floor(T - n1).astype(int) + 1
        n2_min = np.clip(n2_min, 1, cap + 1)
        row = D[j1, 1 : k + 1] + loglam + G[N - j1, n2_min]
        finite = row[np.isfinite(row)]
        if finite.size:
            terms.append(_lse(finite))
    if not terms:
        return NEG_INF
    return _lse(np.array(terms))


def _e2_logZ_direct(
    params: ModelParams, cap: int, logE: np.ndarray, logB: np.ndarray,
    logP: np.ndarray,
) -> float:
    """log Z(E2) as a direct sum over the first excursion exceeding the cap:
    capped prefix, long excursion, unconstrained suffix."""
    N = params.N
    loglam = math.log(params.lam) if params.lam > 0 else NEG_INF
    terms = []
    for ell in range(cap + 1, N + 1):
        a = np.arange(0, N - ell + 1)
        b = a + ell
        lw = (
            logB[a]
            + np.where(a > 0, loglam, 0.0)
            + logE[ell]
            + np.where(b < N, loglam, 0.0)
            + logP[N - b]
        )
        finite = lw[np.isfinite(lw)]
        if finite.size:
            terms.append(_lse(finite))
    if not terms:
        return NEG_INF
    return _lse(np.array(terms))


def _pair_flow_log(params: ModelParams, beta_star: float, logE: np.ndarray,
                   logB: np.ndarray) -> float:
    """log of the qualifying-pair weighted sum: over configurations of E1 and
    each adjacent excursion pair (n1, n2) with n1 + n2 > beta* N, the full
    configuration weight.  Equals the exact probability flow E1 -> E2 divided
    by the (1,0,1)-flip rate and by Z_N."""
    N = params.N
    T = beta_star * N
    cap = _part_cap(T, N)
    if cap < 1:
        return NEG_INF
    loglam = math.log(params.lam) if params.lam > 0 else NEG_INF
    # Q(a) = logB(a) + lambda factor for the contact joining it to the pair
    idx = np.arange(N + 1)
    Q = logB + np.where(idx == 0, 0.0, loglam)
    # pairweight[s] = LSE over n1+n2 = s, both <= cap, of E(n1) E(n2)
    smax = min(2 * cap, N)
    terms = []
    for s in range(int(math.floor(T)) + 1, smax + 1):
        if s <= T:
            continue
        n1_lo = max(1, s - cap)
        n1_hi = min(cap, s - 1)
        if n1_lo > n1_hi:
            continue
        n1 = np.arange(n1_lo, n1_hi + 1)
        pw = _lse(logE[n1] + logE[s - n1])
        rest = N - s
        outer = _lse(Q[0 : rest + 1] + Q[rest::-1])
        terms.append(pw + loglam + outer)
    if not terms:
        return NEG_INF
    return _lse(np.array(terms))


def bottleneck_weights(params: ModelParams, beta_star: float) -> BottleneckWeights:
    """Exact Z, Z(E1), Z(E2), Z(boundary of E1) and the E1 -> E2 probability
    flow, all in log domain."""
    if not 0.0 < beta_star < 1.0:
        raise ValidationError(f"beta_star must lie in (0,1), got {beta_star}")
    N = params.N
    table = ForwardTable(params)
    log_z = table.total_logZ
    logP = table.prefix_logZ
    logE = excursion_log_weight_array(params)
    cap = _part_cap(beta_star * N, N)
    if cap >= 1:
        logB = _restricted_logB(params, cap, logE)
        log_e1 = float(logB[N])
        log_e2 = _e2_logZ_direct(params, cap, logE, logB, logP)
        log_boundary = _boundary_logZ_direct(params, beta_star, logE, logB)
        pair = _pair_flow_log(params, beta_star, logE, logB)
    else:
        log_e1 = NEG_INF
        log_e2 = log_z
        log_boundary = NEG_INF
        pair = NEG_INF
    e2n = math.exp(2.0 * params.sigma / N)
    r101 = e2n / (params.lam + e2n)
    log_flow = math.log(r101) + pair - log_z
    return BottleneckWeights(
        beta_star=beta_star,
        part_cap=cap,
        log_Z=log_z,
        log_Z_E1=log_e1,
        log_Z_E2=log_e2,
        log_Z_boundary=log_boundary,
        log_flow=log_flow,
    )


def boundary_weight(params: ModelParams, beta_star: float) -> float:
    """log Z(boundary of E1): exact weight of configurations of E1 with at
    least one flip exiting E1 (i.e. some adjacent excursion pair merging past
    the threshold)."""
    return bottleneck_weights(params, beta_star).log_Z_boundary


@dataclass(frozen=True)
class RenewalKernels:
    """SRW excursion kernel K and tilted kernel K~ for one (N, lambda, sigma)."""

    n_max: int
    K: np.ndarray  # K[n], n = 1..n_max (entry 0 unused)
    log_Ktilde: np.ndarray  # log K~(n)


def srw_excursion_kernel(n_max: int) -> np.ndarray:
    """K(n) = Catalan(n-1) 4^(-n) by the stable ratio recurrence."""
    K = np.zeros(n_max + 1)
    if n_max >= 1:
        K[1] = 0.25
    for n in range(1, n_max):
        K[n + 1] = K[n] * (2 * n - 1) / (2 * (n + 1))
    return K


def srw_excursion_kernel_bruteforce(n: int) -> float:
    """P(S_2n = 0, S_k > 0 for 0 < k < 2n) by exhausting increment signs."""
    if n > 8:
        raise CapacityError("brute-force kernel capped at n <= 8")
    total = 0
    steps = 2 * n
    for bits in range(1 << steps):
        h = 0
        ok = True
        for k in range(steps):
            h += 1 if (bits >> k) & 1 else -1
            if k < steps - 1 and h <= 0:
                ok = False
                break
        if ok and h == 0:
            total += 1
    return total / float(1 << steps)


def renewal_kernels(params: ModelParams, n_max: Optional[int] = None) -> RenewalKernels:
    """K by the Catalan closed form and K~(n) = lambda e^(-2nF) Z_n(0, n sigma/N)."""
    n_max = params.N if n_max is None else n_max
    if n_max > params.N:
        raise ValidationError("n_max cannot exceed N")
    if params.lam <= 2.0:
        raise ValidationError("renewal kernels require lambda > 2 (F > 0)")
    F = free_energy_pinning(params.lam)
    logE = _excursion_log_weights(n_max, params.site_tilt)
    ns = np.arange(n_max + 1)
    log_ktilde = math.log(params.lam) - 2.0 * F * ns + logE
    log_ktilde[0] = NEG_INF
    return RenewalKernels(n_max=n_max, K=srw_excursion_kernel(n_max), log_Ktilde=log_ktilde)


def renewal_identity_check(params: ModelParams) -> float:
    """Defect of the renewal identity: the composition sum of K~ over
    partitions of N against lambda e^(-2NF) Z_N(lambda, sigma)."""
    N = params.N
    kern = renewal_kernels(params)
    logU = np.full(N + 1, NEG_INF)
    logU[0] = 0.0
    for j in range(1, N + 1):
        ns = np.arange(1, j + 1)
        logU[j] = _lse(kern.log_Ktilde[1 : j + 1] + logU[j - ns])
    F = free_energy_pinning(params.lam)
    rhs = math.log(params.lam) - 2.0 * N * F + partition_function(params)
    return abs(float(logU[N]) - rhs)


TILTED_WALK_CAP = 2000


@dataclass(frozen=True)
class TiltedWalkResult:
    """Positivity probability of the inhomogeneously tilted walk and the
    free normalizer, whose sum reconstructs log Z_N(0, sigma)."""

    N: int
    sigma: float
    log_event: float  # log nu_N(S_2N = 0; interior > 0)
    log_normalizer: float  # sum of log cosh(h_k) over the 2N tilts

    @property
    def log_excursion_Z(self) -> float:
        return self.log_event + self.log_normalizer


def tilted_walk_positivity(N: int, sigma: float) -> TiltedWalkResult:
    """Exact DP for the tilted-walk representation of Z_N(0, sigma).

    The walk has independent steps, step k going up with probability
    e^(h_k) / (2 cosh h_k) where h_k = sigma (N - k + 1/2) / N; the event is
    {S_2N = 0, S_k > 0 for 0 < k < 2N}.
    """
    if N > TILTED_WALK_CAP:
        raise CapacityError(f"tilted-walk DP capped at N <= {TILTED_WALK_CAP}")
    if sigma < 0:
        raise ValidationError("sigma must be nonnegative")
    ks = np.arange(1, 2 * N + 1)
    h = sigma * (N - ks + 0.5) / N
    log_up = h - (np.array([log_cosh(v) for v in h]) + LOG2)
    log_dn = -h - (np.array([log_cosh(v) for v in h]) + LOG2)
    log_norm = float(np.sum([log_cosh(v) for v in h]))
    prev = np.array([0.0])  # position 0, height 0
    for k in range(1, 2 * N + 1):
        hmax = min(k, 2 * N - k)
        prev_hmax = len(prev) - 1
        from_below = np.full(hmax + 1, NEG_INF)
        m = min(hmax, prev_hmax + 1)
        if m >= 1:
            from_below[1 : m + 1] = prev[0:m] + log_up[k - 1]
        from_above = np.full(hmax + 1, NEG_INF)
        m2 = min(hmax + 1, prev_hmax)
        if m2 >= 1:
            from_above[0:m2] = prev[1 : m2 + 1] + log_dn[k - 1]
        new = np.logaddexp(from_below, from_above)
        if 0 < k < 2 * N:
            new[0] = NEG_INF
        prev = new
    return TiltedWalkResult(
        N=N, sigma=sigma, log_event=float(prev[0]), log_normalizer=log_norm
    )


def event_weight_oracle(
    params: ModelParams, predicate: Callable[[PathConfig], bool]
) -> float:
    """Ground truth by full enumeration (N <= 10): log-sum-exp of the weights
    of all paths satisfying the predicate."""
    if params.N > ENUM_CAP:
        raise CapacityError(f"enumeration oracle capped at N <= {ENUM_CAP}")
    logs = [
        log_weight(params, p) for p in enumerate_paths(params.N) if predicate(p)
    ]
    if not logs:
        return NEG_INF
    return _lse(np.array(logs))
