"""Configuration space, Hamiltonian functionals, corner flips and jump rates.

Single source of truth for the interface model: a configuration is a
nonnegative nearest-neighbor bridge of length 2N whose unnormalized weight is

    2^(-2N) * lambda^H * exp(sigma * A / N)

with H the number of interior contacts with the wall and A the enclosed area.
All other modules consume these definitions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

from .errors import CapacityError, ValidationError

ENUMERATION_CAP = 12  # Catalan(12) = 208012 states


@dataclass(frozen=True)
class ModelParams:
    """Model parameters (N, lambda, sigma).

    The per-site area tilt is sigma/N; it is derived where needed and never
    stored pre-multiplied. sigma < 0 is out of scope and rejected.
    """

    N: int
    lam: float
    sigma: float

    def __post_init__(self):
        if self.N < 1:
            raise ValidationError(f"N must be a positive integer, got {self.N}")
        if self.lam < 0:
            raise ValidationError(f"lambda must be nonnegative, got {self.lam}")
        if self.sigma < 0:
            raise ValidationError(f"sigma must be nonnegative, got {self.sigma}")

    @property
    def site_tilt(self) -> float:
        """Per-site tilt sigma/N."""
        return self.sigma / self.N


class PathConfig:
    """A nonnegative nearest-neighbor bridge: heights (xi_0, ..., xi_2N).

    Immutable once constructed; invariants (endpoints zero, unit steps,
    nonnegativity) are enforced at construction.
    """

    __slots__ = ("heights",)

    def __init__(self, heights: Sequence[int]):
        h = tuple(int(v) for v in heights)
        n = len(h)
        if n < 3 or n % 2 == 0:
            raise ValidationError(f"need an odd number of heights >= 3, got {n}")
        if h[0] != 0 or h[-1] != 0:
            raise ValidationError("path must start and end at height 0")
        for x in range(1, n):
            if abs(h[x] - h[x - 1]) != 1:
                raise ValidationError(f"|step| != 1 at site {x}")
            if h[x] < 0:
                raise ValidationError(f"negative height at site {x}")
        object.__setattr__(self, "heights", h)

    @property
    def half_length(self) -> int:
        return (len(self.heights) - 1) // 2

    def __eq__(self, other):
        return isinstance(other, PathConfig) and self.heights == other.heights

    def __hash__(self):
        return hash(self.heights)

    def __repr__(self):
        return f"PathConfig({list(self.heights)})"

    def to_text(self) -> str:
        """Canonical one-line text form: whitespace-separated heights."""
        return " ".join(str(v) for v in self.heights)

    @classmethod
    def from_text(cls, line: str) -> "PathConfig":
        return cls([int(tok) for tok in line.split()])

    @classmethod
    def zigzag(cls, N: int) -> "PathConfig":
        """The minimal path (0,1,0,1,...,0)."""
        return cls([x % 2 for x in range(2 * N + 1)])

    @classmethod
    def maximal(cls, N: int) -> "PathConfig":
        """The single-arch maximum xi_x = x ^ (2N - x)."""
        return cls([min(x, 2 * N - x) for x in range(2 * N + 1)])


@dataclass(frozen=True)
class Landmarks:
    """Derived observables of a path: contacts, area, L/R contacts around the
    center, excursion structure and the largest excursion half-length."""

    H: int
    A: int
    L: int
    R: int
    l_max: int
    excursions: tuple[tuple[int, int], ...]


def landmarks(path: PathConfig) -> Landmarks:
    h = path.heights
    two_n = len(h) - 1
    N = two_n // 2
    H = sum(1 for x in range(1, two_n) if h[x] == 0)
    A = sum(h)
    zeros = [x for x in range(two_n + 1) if h[x] == 0]
    L = max(x for x in zeros if x <= N)
    R = min(x for x in zeros if x >= N)
    excursions = tuple(
        (zeros[i], zeros[i + 1])
        for i in range(len(zeros) - 1)
        if zeros[i + 1] - zeros[i] > 0
    )
    l_max = max((b - a) // 2 for a, b in excursions)
    return Landmarks(H=H, A=A, L=L, R=R, l_max=l_max, excursions=excursions)


def _check_site(path: PathConfig, x: int) -> None:
    two_n = len(path.heights) - 1
    if not 1 <= x <= two_n - 1:
        raise ValidationError(f"site index {x} outside 1..{two_n - 1}")


def corner_flip(path: PathConfig, x: int) -> PathConfig:
    """Return xi^x: the corner at x flipped when admissible, else xi.

    The frozen case xi_{x-1} = xi_{x+1} = 0 and the non-extremum case
    xi_{x-1} != xi_{x+1} both return the path unchanged.
    """
    _check_site(path, x)
    h = path.heights
    a, b = h[x - 1], h[x + 1]
    if a != b or a == 0:
        return path
    out = list(h)
    out[x] = a + b - h[x]
    flipped = PathConfig.__new__(PathConfig)
    object.__setattr__(flipped, "heights", tuple(out))
    return flipped


def flip_rate(params: ModelParams, path: PathConfig, x: int) -> float:
    """Heat-bath rate of the corner flip at x, per the five-case table.

    e^(2 sigma / N) enters every case; the rate is nonzero only where the
    flip changes the path (for lambda > 0).
    """
    _check_site(path, x)
    h = path.heights
    a, b = h[x - 1], h[x + 1]
    if a != b or a == 0:
        return 0.0
    e2 = math.exp(2.0 * params.sigma / params.N)
    mid = h[x]
    if a == 1:
        if mid == 0:
            return e2 / (params.lam + e2)
        return params.lam / (params.lam + e2)
    if mid < a:
        return e2 / (1.0 + e2)
    return 1.0 / (1.0 + e2)


def log_weight(params: ModelParams, path: PathConfig) -> float:
    """log of the unnormalized weight 2^(-2N) lambda^H exp(sigma A / N).

    Returns -inf for zero-weight paths (lambda = 0 with H >= 1, under the
    convention 0^0 = 1).
    """
    lm = landmarks(path)
    N = params.N
    base = -2.0 * N * math.log(2.0) + params.sigma * lm.A / N
    if lm.H == 0:
        return base
    if params.lam == 0.0:
        return -math.inf
    return base + lm.H * math.log(params.lam)


@dataclass(frozen=True)
class RegionMembership:
    in_E1: bool
    in_E2: bool
    in_HN: bool


def classify_region(
    lm: Landmarks, beta_star: float, regime: str, N: int | None = None
) -> RegionMembership:
    """Membership in the bottleneck partition E1/E2 and the metastable well.

    E1 = {l_max <= beta_star * N} (weak inequality, exact real comparison);
    the well H_N is E2 in the localized regime (ties localized) and E1 in the
    delocalized one.
    """
    if not 0.0 < beta_star < 1.0:
        raise ValidationError(f"beta_star must lie in (0,1), got {beta_star}")
    if regime not in ("localized", "delocalized"):
        raise ValidationError(f"regime must be localized|delocalized, got {regime!r}")
    if N is None:
        # the last excursion always ends at 2N
        N = lm.excursions[-1][1] // 2
    in_e1 = lm.l_max <= beta_star * N
    in_hn = (not in_e1) if regime == "localized" else in_e1
    return RegionMembership(in_E1=in_e1, in_E2=not in_e1, in_HN=in_hn)


def enumerate_paths(N: int) -> Iterator[PathConfig]:
    """Yield every path of Omega_N once, in lexicographic increment order
    (down-step < up-step, leftmost increment most significant)."""
    if N > ENUMERATION_CAP:
        raise CapacityError(
            f"enumeration capped at N <= {ENUMERATION_CAP} "
            f"(Catalan({ENUMERATION_CAP}) = 208012 states); got N = {N}"
        )
    two_n = 2 * N
    heights = [0] * (two_n + 1)

    # a step to h' at position x+1 is viable iff h' >= 0 and h' can still
    # return to 0 within the remaining steps
    def rec(x: int) -> Iterator[PathConfig]:
        if x == two_n:
            p = PathConfig.__new__(PathConfig)
            object.__setattr__(p, "heights", tuple(heights))
            yield p
            return
        h = heights[x]
        rem = two_n - (x + 1)
        for step in (-1, 1):
            hp = h + step
            if hp >= 0 and hp <= rem:
                heights[x + 1] = hp
                yield from rec(x + 1)

    return rec(0)


def catalan(n: int) -> int:
    """Catalan number by the standard recurrence (enumeration oracle)."""
    c = [1] * (n + 1)
    for k in range(1, n + 1):
        c[k] = c[k - 1] * 2 * (2 * k - 1) // (k + 1)
    return c[n]


def event_indicator_boundary_E1(
    params: ModelParams, beta_star: float
) -> Callable[[PathConfig], bool]:
    """Predicate for the inner boundary of E1: paths of E1 with some flip
    leaving E1 (used by enumeration oracles)."""

    def pred(path: PathConfig) -> bool:
        lm = landmarks(path)
        N = params.N
        if not lm.l_max <= beta_star * N:
            return False
        for x in range(1, 2 * N):
            if flip_rate(params, path, x) > 0.0:
                if landmarks(corner_flip(path, x)).l_max > beta_star * N:
                    return True
        return False

    return pred
