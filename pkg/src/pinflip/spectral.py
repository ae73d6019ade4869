"""Explicit generators, exact spectral gaps, exact TV mixing times, and all
the gap bounds evaluated as numeric inequalities.

States are indexed in the lexicographic increment order shared with
``model.enumerate_paths`` so matrices are reproducible bit for bit.  The
reversible generator is symmetrized by the sqrt(mu) similarity transform,
turning the eigenproblem into a symmetric positive-semidefinite one; dense
solves below a size cutoff, Lanczos with explicit deflation of the constant
eigenvector above it.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigh, expm
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import LinearOperator, eigsh
from scipy.special import logsumexp

from . import exact
from .errors import CapacityError, ConvergenceError, ValidationError
from .model import ModelParams, PathConfig, enumerate_paths

STATE_CAP = 300_000
DENSE_CUTOFF = 3000
STAR_CAP = 12
TV_CAP = 6
LR_DP_CAP = 60
CUT_FAMILY_CAP = 2_000_000


def _state_matrix(N: int) -> np.ndarray:
    """Heights of every path of Omega_N, one row per state, canonical order."""
    return np.array([p.heights for p in enumerate_paths(N)], dtype=np.int16)


def _codes_from_heights(H: np.ndarray) -> np.ndarray:
    """Increment bit codes, leftmost step most significant; numeric order
    equals the canonical lexicographic order."""
    steps = np.diff(H.astype(np.int64), axis=1)  # each +-1
    bits = (steps + 1) // 2
    two_n = bits.shape[1]
    weights = 1 << np.arange(two_n - 1, -1, -1, dtype=np.int64)
    return bits @ weights


def _path_of(row: np.ndarray) -> PathConfig:
    p = PathConfig.__new__(PathConfig)
    object.__setattr__(p, "heights", tuple(int(v) for v in row))
    return p


@dataclass
class SparseGenerator:
    """Rate matrix of the (possibly restricted) heat-bath chain together with
    its reversible measure (log weights and normalized probabilities)."""

    params: ModelParams
    heights: np.ndarray  # (n_states, 2N+1) int16
    rates: sp.csr_matrix  # off-diagonal rates; diagonal implied by row sums
    log_pi: np.ndarray  # unnormalized log weights
    pi: np.ndarray  # normalized stationary probabilities
    star: bool = False

    @property
    def n_states(self) -> int:
        return self.heights.shape[0]

    def reversibility_defect(self) -> float:
        """Max relative defect of mu(i) r(i,j) = mu(j) r(j,i) over stored pairs."""
        coo = self.rates.tocoo()
        fwd = self.pi[coo.row] * coo.data
        # rate of the reverse transition for each stored pair
        rev_rates = np.asarray(self.rates[coo.col, coo.row]).ravel()
        bwd = self.pi[coo.col] * rev_rates
        scale = np.abs(fwd).max()
        return float(np.abs(fwd - bwd).max() / scale) if scale > 0 else 0.0

    def path(self, i: int) -> PathConfig:
        return _path_of(self.heights[i])


def _lr_of_heights(H: np.ndarray, N: int) -> tuple[np.ndarray, np.ndarray]:
    """L and R contact positions (lattice units 0..2N) for each state."""
    z = H == 0
    L = N - np.argmax(z[:, N::-1], axis=1)
    R = N + np.argmax(z[:, N:], axis=1)
    return L.astype(np.int32), R.astype(np.int32)


def build_generator(
    params: ModelParams,
    subset: Optional[Callable[[PathConfig], bool]] = None,
    star: bool = False,
) -> SparseGenerator:
    """Explicit generator of the corner-flip chain; ``subset`` restricts to a
    conditioned chain (exiting transitions dropped), ``star`` removes
    transitions moving L or R by more than one lattice pair.

    Raises a structural error if the requested chain is empty, disconnected,
    or fails detailed balance.
    """
    N = params.N
    H = _state_matrix(N)
    if H.shape[0] > STATE_CAP:
        raise CapacityError(f"state space {H.shape[0]} exceeds cap {STATE_CAP}")
    codes = _codes_from_heights(H)
    if np.any(np.diff(codes) <= 0):
        raise AssertionError("canonical order is not code order")

    if subset is not None:
        keep = np.fromiter(
            (bool(subset(_path_of(H[i]))) for i in range(H.shape[0])),
            dtype=bool,
            count=H.shape[0],
        )
        if not keep.any():
            raise ValidationError("subset selects no states")
        H = H[keep]
        codes = codes[keep]

    n = H.shape[0]
    lam, sigma = params.lam, params.sigma
    e2 = math.exp(2.0 * sigma / N)
    A = H.sum(axis=1, dtype=np.int64)
    contacts = (H[:, 1 : 2 * N] == 0).sum(axis=1)
    log_pi = -2.0 * N * math.log(2.0) + (sigma / N) * A.astype(float)
    if lam > 0:
        log_pi = log_pi + contacts * math.log(lam)
    else:
        log_pi = np.where(contacts == 0, log_pi, -np.inf)
    if not np.isfinite(log_pi).any():
        raise ValidationError("all selected states carry zero weight")
    pi = np.exp(log_pi - logsumexp(log_pi))
    pi = pi / pi.sum()

    if star:
        L, R = _lr_of_heights(H, N)

    rows_i, cols_j, vals = [], [], []
    two_n = 2 * N
    for x in range(1, two_n):
        a = H[:, x - 1].astype(np.int32)
        b = H[:, x + 1].astype(np.int32)
        m = H[:, x].astype(np.int32)
        active = (a == b) & (a > 0)
        if not active.any():
            continue
        up = active & (m < a)
        dn = active & (m > a)
        at_wall = a == 1
        rate = np.zeros(n)
        rate[up & at_wall] = e2 / (lam + e2)
        rate[up & ~at_wall] = e2 / (1.0 + e2)
        rate[dn & at_wall] = lam / (lam + e2)
        rate[dn & ~at_wall] = 1.0 / (1.0 + e2)
        idx = np.nonzero(rate > 0.0)[0]
        if idx.size == 0:
            continue
        # flipping at site x swaps increments x-1 and x (0-based steps),
        # i.e. toggles bits (2N-1)-(x-1) and (2N-1)-x
        xor_mask = np.int64((1 << (two_n - x)) | (1 << (two_n - 1 - x)))
        nbr_codes = codes[idx] ^ xor_mask
        j = np.searchsorted(codes, nbr_codes)
        in_set = (j < n) & (codes[np.minimum(j, n - 1)] == nbr_codes)
        idx, j = idx[in_set], j[in_set]
        if star and idx.size:
            ok = (np.abs(L[idx] - L[j]) <= 2) & (np.abs(R[idx] - R[j]) <= 2)
            idx, j = idx[ok], j[ok]
        if idx.size:
            rows_i.append(idx)
            cols_j.append(j)
            vals.append(rate[idx])
    if not rows_i:
        raise ValidationError("chain has no transitions")
    rates = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows_i), np.concatenate(cols_j))),
        shape=(n, n),
    )
    ncomp, _ = connected_components(rates, directed=False)
    if ncomp != 1:
        raise ValidationError(f"chain is disconnected ({ncomp} components)")
    gen = SparseGenerator(
        params=params, heights=H, rates=rates, log_pi=log_pi, pi=pi, star=star
    )
    defect = gen.reversibility_defect()
    if defect > 1e-12:
        raise ValidationError(f"detailed balance defect {defect:.3e} > 1e-12")
    return gen


def restrict(gen: SparseGenerator, mask: np.ndarray) -> SparseGenerator:
    """Conditioned chain on a state mask: exiting transitions dropped."""
    if not mask.any():
        raise ValidationError("restriction selects no states")
    rates = gen.rates[mask][:, mask].tocsr()
    log_pi = gen.log_pi[mask]
    pi = np.exp(log_pi - logsumexp(log_pi))
    return SparseGenerator(
        params=gen.params,
        heights=gen.heights[mask],
        rates=rates,
        log_pi=log_pi,
        pi=pi / pi.sum(),
        star=gen.star,
    )


def _symmetrized(gen: SparseGenerator) -> tuple[sp.csr_matrix, np.ndarray]:
    """-S where S = D^(1/2) L D^(-1/2): symmetric PSD with kernel sqrt(pi)."""
    coo = gen.rates.tocoo()
    rev_rates = np.asarray(gen.rates[coo.col, coo.row]).ravel()
    sym_off = np.sqrt(coo.data * rev_rates)
    out_rates = np.asarray(gen.rates.sum(axis=1)).ravel()
    n = gen.n_states
    A = sp.csr_matrix((sym_off, (coo.row, coo.col)), shape=(n, n))
    A = sp.diags(out_rates) - 0.5 * (A + A.T)
    v = np.sqrt(gen.pi)
    return A.tocsr(), v / np.linalg.norm(v)


def spectral_gap(gen: SparseGenerator, dense_cutoff: int = DENSE_CUTOFF) -> float:
    """Smallest positive eigenvalue of -L: dense solve below the cutoff,
    deflated Lanczos above, validated to residual 1e-10."""
    n = gen.n_states
    if n < 2:
        raise ValidationError("spectral gap undefined for a single state")
    A, v = _symmetrized(gen)
    if n <= dense_cutoff:
        w = eigh(A.toarray(), eigvals_only=True)
        return float(w[1])
    c = 2.0 * float(A.diagonal().max()) + 1.0

    def mv(x):
        return A @ x + c * v * (v @ x)

    op = LinearOperator((n, n), matvec=mv, dtype=float)
    rng = np.random.default_rng(n)
    v0 = rng.standard_normal(n)
    v0 -= v * (v @ v0)
    try:
        w, vec = eigsh(
            op, k=1, which="SA", tol=1e-12, maxiter=50000, ncv=min(n, 120), v0=v0
        )
    except Exception as err:  # ArpackNoConvergence and friends
        raise ConvergenceError(f"Lanczos failed on {n} states: {err}") from err
    theta = float(w[0])
    x = vec[:, 0]
    resid = float(np.linalg.norm(A @ x - theta * x))
    if resid > max(1e-10, 1e-8 * abs(theta)):
        raise ConvergenceError(
            f"eigen residual {resid:.3e} exceeds tolerance at {n} states"
        )
    return theta


def spectral_gap_or_inf(gen: Optional[SparseGenerator]) -> float:
    """Gap of a factor chain; singleton factors relax instantly (inf)."""
    if gen is None or gen.n_states < 2:
        return math.inf
    return spectral_gap(gen)


def second_eigenvector(gen: SparseGenerator) -> np.ndarray:
    """The eigenfunction achieving the gap (in the original, unsymmetrized
    coordinates)."""
    A, _ = _symmetrized(gen)
    w, vecs = eigh(A.toarray())
    return vecs[:, 1] / np.sqrt(gen.pi)


def dirichlet_rayleigh(
    gen: SparseGenerator, f: np.ndarray
) -> tuple[float, float, float]:
    """(Dirichlet form, variance, Rayleigh quotient) of a state function."""
    f = np.asarray(f, dtype=float)
    coo = gen.rates.tocoo()
    dirichlet = 0.5 * float(
        np.sum(gen.pi[coo.row] * coo.data * (f[coo.col] - f[coo.row]) ** 2)
    )
    mean = float(gen.pi @ f)
    var = float(gen.pi @ (f - mean) ** 2)
    if var <= 0.0:
        raise ValidationError("Rayleigh quotient undefined for constant f")
    return dirichlet, var, dirichlet / var


def wilson_bound(n: int) -> float:
    """Gap floor 2 sin^2(pi / 4n) of the zero-pinning constrained chain."""
    return 2.0 * math.sin(math.pi / (4.0 * n)) ** 2


def bottleneck_bound(params: ModelParams, beta_star: float) -> float:
    """Lower bound on T_rel: Z(E1) Z(E2) / (2N Z(dE1) Z_N).

    Degenerate when a piece is empty (variance zero: no information); the
    boundary itself is provably nonempty whenever both pieces carry weight,
    but an empty boundary is still flagged as +inf defensively."""
    w = exact.bottleneck_weights(params, beta_star)
    if w.log_Z_E1 == -math.inf or w.log_Z_E2 == -math.inf:
        raise ValidationError("degenerate bottleneck partition: empty piece")
    if w.log_Z_boundary == -math.inf:
        return math.inf
    log_bound = (
        w.log_Z_E1 + w.log_Z_E2 - math.log(2 * params.N) - w.log_Z_boundary - w.log_Z
    )
    return math.exp(log_bound)


def fa_bound(params: ModelParams, gen: SparseGenerator, a: float = 0.5) -> float:
    """Lower bound on T_rel from the area test function exp(a A / N)."""
    A = gen.heights.sum(axis=1, dtype=np.int64).astype(float)
    f = np.exp(a * A / params.N)
    dirichlet, var, _ = dirichlet_rayleigh(gen, f)
    return var / dirichlet


@dataclass
class ReducedChain:
    """Chain on partition-piece indices: exact piece masses, exact
    inter-piece rates (pi_i-averaged), and an exit-rate bound."""

    labels: list
    pi_bar: np.ndarray
    rates: np.ndarray  # dense (k, k), zero diagonal
    gamma_bar: float

    @property
    def n_states(self) -> int:
        return len(self.labels)

    def gap(self) -> float:
        k = self.n_states
        if k < 2:
            raise ValidationError("reduced gap undefined for a single piece")
        flows = self.pi_bar[:, None] * self.rates
        sym = 0.5 * (flows + flows.T)  # reversible flows, averaged for roundoff
        with np.errstate(divide="ignore", invalid="ignore"):
            S = sym / np.sqrt(np.outer(self.pi_bar, self.pi_bar))
        S[~np.isfinite(S)] = 0.0
        Amat = np.diag(self.rates.sum(axis=1)) - S
        w = eigh(Amat, eigvals_only=True)
        return float(w[1])

    def flow(self, i: int, j: int) -> float:
        return float(self.pi_bar[i] * self.rates[i, j])

    def reversibility_defect(self) -> float:
        flows = self.pi_bar[:, None] * self.rates
        scale = flows.max()
        return float(np.abs(flows - flows.T).max() / scale) if scale > 0 else 0.0


def reduce_by_labels(gen: SparseGenerator, labels: list) -> ReducedChain:
    """Exact reduction of an explicit generator over a state labelling."""
    uniq = sorted(set(labels))
    index = {lab: i for i, lab in enumerate(uniq)}
    inv = np.array([index[lab] for lab in labels])
    k = len(uniq)
    pi_bar = np.zeros(k)
    np.add.at(pi_bar, inv, gen.pi)
    coo = gen.rates.tocoo()
    li, lj = inv[coo.row], inv[coo.col]
    cross = li != lj
    flows = np.zeros((k, k))
    np.add.at(flows, (li[cross], lj[cross]), gen.pi[coo.row[cross]] * coo.data[cross])
    rates = flows / pi_bar[:, None]
    np.fill_diagonal(rates, 0.0)
    exit_rate = np.zeros(gen.n_states)
    np.add.at(exit_rate, coo.row[cross], coo.data[cross])
    return ReducedChain(
        labels=uniq, pi_bar=pi_bar, rates=rates, gamma_bar=float(exit_rate.max())
    )


def lr_labels(gen: SparseGenerator) -> list:
    """(L/2, R/2) labels of every state of an explicit generator."""
    L, R = _lr_of_heights(gen.heights, gen.params.N)
    return [(int(l) // 2, int(r) // 2) for l, r in zip(L, R)]


def two_set_labels(gen: SparseGenerator, beta_star: float) -> list:
    """1 for E1 (l_max <= beta* N), 2 for E2."""
    N = gen.params.N
    out = []
    for i in range(gen.n_states):
        lmax = _lmax_of_row(gen.heights[i])
        out.append(1 if lmax <= beta_star * N else 2)
    return out


def _lmax_of_row(row: np.ndarray) -> int:
    zeros = np.nonzero(row == 0)[0]
    return int(np.diff(zeros).max() // 2)


def lr_reduced_chain_dp(params: ModelParams) -> ReducedChain:
    """Exact reduced chain of the starred dynamics on Upsilon_N, built from
    transfer-matrix arrays rather than state enumeration (valid to N <= 60).

    Piece masses come from the prefix/excursion factorisation; merge flows
    are exact; split rates follow from reversibility.  The exit-rate bound
    gamma_bar = 4 is the starred chain's worst case.
    """
    N = params.N
    if N > LR_DP_CAP:
        raise CapacityError(f"LR reduced DP capped at N <= {LR_DP_CAP}")
    if params.lam <= 0:
        raise ValidationError("LR reduced DP requires lambda > 0")
    logP = exact.bridge_prefix_log_partition(params)
    logE = exact.excursion_log_weight_array(params)
    loglam = math.log(params.lam)
    log_z = float(logP[N])
    e2 = math.exp(2.0 * params.sigma / N)
    r101 = e2 / (params.lam + e2)

    xs = range(0, N // 2 + 1)
    labels = []
    logpi = {}
    for x in xs:
        for y in range((N + 1) // 2, N + 1):
            # a zero at N forces L = R = N, so mixed pieces need 2x < N < 2y
            if x < y:
                if not (2 * x < N < 2 * y):
                    continue
            elif 2 * x != N:
                continue
            if x == y:
                lw = logP[x] + loglam + logP[N - y] - log_z
            else:
                lw = (
                    logP[x]
                    + (loglam if x > 0 else 0.0)
                    + logE[y - x]
                    + (loglam if y < N else 0.0)
                    + logP[N - y]
                    - log_z
                )
            if lw == -math.inf:
                continue
            labels.append((x, y))
            logpi[(x, y)] = lw
    index = {lab: i for i, lab in enumerate(labels)}
    k = len(labels)
    pi_bar = np.exp(np.array([logpi[lab] for lab in labels]))
    pi_bar = pi_bar / pi_bar.sum()
    flows = np.zeros((k, k))

    def add_flow(src, dst, log_flow):
        if src in index and dst in index:
            f = math.exp(log_flow)
            flows[index[src], index[dst]] += f
            flows[index[dst], index[src]] += f  # reversibility

    for x, y in labels:
        if x < y:
            # L-merge: unit excursion (x-1, x) absorbed, L moves to 2(x-1)
            if x >= 1:
                lf = (
                    math.log(r101)
                    + logP[x - 1]
                    + (loglam if x - 1 > 0 else 0.0)
                    + logE[1]
                    + loglam
                    + logE[y - x]
                    + (loglam if y < N else 0.0)
                    + logP[N - y]
                    - log_z
                )
                add_flow((x, y), (x - 1, y), lf)
            # R-merge: unit excursion (y, y+1) absorbed, R moves to 2(y+1)
            if y + 1 <= N:
                lf = (
                    math.log(r101)
                    + logP[x]
                    + (loglam if x > 0 else 0.0)
                    + logE[y - x]
                    + loglam
                    + logE[1]
                    + (loglam if y + 1 < N else 0.0)
                    + logP[N - y - 1]
                    - log_z
                )
                add_flow((x, y), (x, y + 1), lf)
        else:
            # diagonal move from (x, x): flipping up the shared zero at N
            # merges the two unit arches flanking it
            if x >= 1 and x + 1 <= N:
                # zeros at 2(x-1), N, 2(x+1) flanked by forced unit arches
                lf = (
                    math.log(r101)
                    + logP[x - 1]
                    + (loglam if x - 1 > 0 else 0.0)
                    + logE[1]
                    + loglam
                    + logE[1]
                    + (loglam if x + 1 < N else 0.0)
                    + logP[N - x - 1]
                    - log_z
                )
                add_flow((x, x), (x - 1, x + 1), lf)
    rates = flows / pi_bar[:, None]
    np.fill_diagonal(rates, 0.0)
    return ReducedChain(labels=labels, pi_bar=pi_bar, rates=rates, gamma_bar=4.0)


def lr_surrogate_weight(params: ModelParams) -> dict:
    """The closed-form surrogate p_bar(x, y) used by the Cheeger argument:
    e^(2n(G(n sigma/N) - F)) (n+1)^(-3/2) (sigma^2 (n+1)^3 / N^2 v 1), n = y-x."""
    from .phase import free_energy_area, free_energy_pinning

    N = params.N
    F = free_energy_pinning(params.lam)
    out = {}
    g_cache: dict[int, float] = {}
    for x in range(0, N // 2 + 1):
        for y in range((N + 1) // 2, N + 1):
            if not (2 * x <= N <= 2 * y) or x > y:
                continue
            n = y - x
            if n not in g_cache:
                g_cache[n] = free_energy_area(n * params.sigma / N)[0]
            val = (
                2.0 * n * (g_cache[n] - F)
                - 1.5 * math.log(n + 1.0)
                + math.log(max(params.sigma**2 * (n + 1.0) ** 3 / N**2, 1.0))
            )
            out[(x, y)] = val
    return out


def reduced_chain(
    params: ModelParams,
    partition: str,
    beta_star: Optional[float] = None,
    method: str = "auto",
) -> ReducedChain:
    """Build the reduced chain for the LR partition (of the starred dynamics)
    or the two-set bottleneck partition.

    method: "enum" aggregates an explicit generator (N <= enumeration cap);
    "dp" uses transfer-matrix identities (LR to N <= 60, two-set to the DP
    caps); "auto" picks enum when the state space is enumerable.
    """
    if partition not in ("lr", "two_set"):
        raise ValidationError("partition must be 'lr' or 'two_set'")
    if partition == "two_set" and beta_star is None:
        raise ValidationError("two_set partition needs beta_star")
    if method == "auto":
        method = "enum" if params.N <= 8 else "dp"
    if method == "enum":
        star = partition == "lr"
        gen = build_generator(params, star=star)
        labels = (
            lr_labels(gen) if partition == "lr" else two_set_labels(gen, beta_star)
        )
        return reduce_by_labels(gen, labels)
    if partition == "lr":
        return lr_reduced_chain_dp(params)
    w = exact.bottleneck_weights(params, beta_star)
    if w.log_Z_E1 == -math.inf or w.log_Z_E2 == -math.inf:
        raise ValidationError(
            "degenerate two_set partition: one piece carries no weight"
        )
    mu1 = math.exp(w.log_Z_E1 - w.log_Z)
    mu2 = math.exp(w.log_Z_E2 - w.log_Z)
    flow = math.exp(w.log_flow)
    pi_bar = np.array([mu1, mu2])
    rates = np.array([[0.0, flow / mu1], [flow / mu2, 0.0]])
    return ReducedChain(
        labels=[1, 2], pi_bar=pi_bar, rates=rates, gamma_bar=2.0 * params.N
    )


@dataclass(frozen=True)
class JerrumReport:
    gap: float
    reduced_gap: float
    min_restricted_gap: float
    gamma_bar: float
    rhs: float
    holds: bool


def jerrum_check(
    params: ModelParams,
    partition: str,
    beta_star: Optional[float] = None,
) -> JerrumReport:
    """Evaluate the chain-decomposition inequality
    gap >= min(gbar/3, gbar * min_i gap_i / (gbar + 3 gamma_bar))
    with every quantity exact (enumeration path)."""
    if partition not in ("lr", "two_set", "trivial"):
        raise ValidationError("partition must be 'lr', 'two_set' or 'trivial'")
    if partition == "two_set" and beta_star is None:
        raise ValidationError("two_set partition needs beta_star")
    star = partition == "lr"
    gen = build_generator(params, star=star)
    if partition == "lr":
        labels = lr_labels(gen)
    elif partition == "two_set":
        labels = two_set_labels(gen, beta_star)
    else:
        labels = [0] * gen.n_states
    red = reduce_by_labels(gen, labels)
    gap = spectral_gap(gen)
    gbar = red.gap() if red.n_states >= 2 else math.inf
    lab_index = {lab: i for i, lab in enumerate(red.labels)}
    lab_arr = np.array([lab_index[lab] for lab in labels])
    min_restricted = math.inf
    for i in range(red.n_states):
        mask = lab_arr == i
        if mask.sum() < 2:
            continue
        min_restricted = min(min_restricted, spectral_gap(restrict(gen, mask)))
    if math.isinf(gbar):
        # single-piece partition: the restricted chain is the chain itself
        rhs = min_restricted
    elif math.isinf(min_restricted):
        rhs = gbar / 3.0
    else:
        rhs = min(gbar / 3.0, gbar * min_restricted / (gbar + 3.0 * red.gamma_bar))
    return JerrumReport(
        gap=gap,
        reduced_gap=gbar,
        min_restricted_gap=min_restricted,
        gamma_bar=red.gamma_bar,
        rhs=rhs,
        holds=bool(gap >= rhs - 1e-9),
    )


def star_chain_gap(params: ModelParams) -> float:
    """Gap of the nearest-neighbor-(L,R) modified chain; always <= the full
    chain's gap (fewer transitions, same reversible measure)."""
    if params.N > STAR_CAP:
        raise CapacityError(f"star chain capped at N <= {STAR_CAP}")
    return spectral_gap(build_generator(params, star=True))


def _upsilon_upsets(labels: list) -> list[np.ndarray]:
    """All nonempty proper up-sets of Upsilon_N in the order
    (x', y') >= (x, y) iff x' <= x and y' >= y, as boolean masks.

    An up-set is a per-x threshold t(x) = min included y, nondecreasing in x,
    with excluded columns forming a suffix; the family size is binomial in N,
    not exponential in the state count.
    """
    xs = sorted({x for x, _ in labels})
    ys = sorted({y for _, y in labels})
    index = {lab: i for i, lab in enumerate(labels)}
    n_lab = len(labels)
    est = math.comb(len(xs) + len(ys), len(xs))
    if est > CUT_FAMILY_CAP:
        raise CapacityError(f"up-set family of ~{est} cuts exceeds cap")
    masks: list[np.ndarray] = []

    def emit(current: list) -> None:
        if current and len(current) < n_lab:
            mask = np.zeros(n_lab, dtype=bool)
            mask[current] = True
            masks.append(mask)

    def rec(col: int, min_t_idx: int, current: list) -> None:
        if col == len(xs):
            emit(current)
            return
        emit(current)  # exclude this column and all further ones
        x = xs[col]
        for ti in range(min_t_idx, len(ys)):
            t = ys[ti]
            added = current + [index[(x, y)] for y in ys if y >= t and (x, y) in index]
            rec(col + 1, ti, added)

    rec(0, 0, [])
    seen: set[bytes] = set()
    uniq = []
    for m in masks:
        key = m.tobytes()
        if key not in seen:
            seen.add(key)
            uniq.append(m)
    return uniq


def cheeger_bound(red: ReducedChain, base: Optional[int] = None) -> float:
    """chi^2 / 2 over the admissible cut family: exhaustive cuts for <= 20
    states, the monotone up-set family for Upsilon chains.

    chi' = min over cuts A excluding the base state of flow(A, A^c) / pi(A);
    gap >= chi^2/2 >= chi'^2/2 (the up-set family mirrors the effective
    one-dimensional potential; its minimum is verified against the exact
    reduced gap wherever that is computable).
    """
    k = red.n_states
    if k < 2:
        raise ValidationError("Cheeger bound needs at least two pieces")
    flows = red.pi_bar[:, None] * red.rates
    flows = 0.5 * (flows + flows.T)
    if k <= 20:
        if base is None:
            base = int(np.argmax(red.pi_bar))
        others = [i for i in range(k) if i != base]
        best = math.inf
        for r in range(1, len(others) + 1):
            for combo in itertools.combinations(others, r):
                mask = np.zeros(k, dtype=bool)
                mask[list(combo)] = True
                cut = flows[mask][:, ~mask].sum()
                best = min(best, cut / red.pi_bar[mask].sum())
        return best**2 / 2.0
    if not all(isinstance(lab, tuple) and len(lab) == 2 for lab in red.labels):
        raise CapacityError("exhaustive cuts capped at 20 states")
    masks = _upsilon_upsets(red.labels)
    best = math.inf
    for mask in masks:
        cut = flows[mask][:, ~mask].sum()
        best = min(best, cut / red.pi_bar[mask].sum())
    return best**2 / 2.0


def tv_mixing_exact(params: ModelParams, epsilon: float) -> float:
    """Exact worst-start total-variation mixing time, by exponentiating the
    generator with bisection refinement to 1e-4 relative."""
    if params.N > TV_CAP:
        raise CapacityError(f"exact TV mixing capped at N <= {TV_CAP}")
    if not 0.0 < epsilon < 1.0:
        raise ValidationError("epsilon must lie in (0, 1)")
    gen = build_generator(params)
    R = gen.rates.toarray()
    np.fill_diagonal(R, -R.sum(axis=1))
    mu = gen.pi

    def worst_tv(t: float) -> float:
        P = expm(R * t)
        return float(0.5 * np.abs(P - mu[None, :]).sum(axis=1).max())

    hi = 1.0
    while worst_tv(hi) > epsilon:
        hi *= 2.0
        if hi > 1e9:
            raise ConvergenceError("TV mixing bracket failed")
    lo = 0.0
    while (hi - lo) > 1e-4 * hi:
        mid = 0.5 * (lo + hi)
        if worst_tv(mid) > epsilon:
            lo = mid
        else:
            hi = mid
    return hi
