"""Continued fractions and small-divisor sweeps.

Two lattice sweeps live here. ``verify_eigenvalue_bound`` scans the smaller
positive eigenvalue of the coupled mode matrix,
``|R|m| - sqrt(1 + k^2)|``, and measures how fast it may approach zero
relative to ``(1 + k^2)^-2``. ``admissibility_check`` measures the gaps
``eps_k`` between ``sqrt(1 + k^2)`` and the lattice ``R Z``.

Positivity of the sweep constants is evidence, not proof: doubles cannot
certify an irrationality measure. Exact coincidences (a gap that vanishes to
rounding) are reported as hard failures.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np

from .kernels import gap_sweep

__all__ = [
    "MAX_DEPTH",
    "PrecisionHorizonWarning",
    "continued_fraction",
    "certified_depth",
    "convergents",
    "DiophantineReport",
    "verify_eigenvalue_bound",
    "admissibility_gap",
    "AdmissibilityReport",
    "admissibility_check",
    "COUPLED_RATIO",
]

MAX_DEPTH = 40
# R = 2**-1/4: R is algebraic of degree 4 and R**-2 = sqrt(2) is a quadratic
# irrational, so both R and R**-2 have irrationality measure 2.
COUPLED_RATIO = 2.0 ** -0.25
_COINCIDENCE_ULPS = 64.0
_SHORT_DENOMINATOR = 2**26


class PrecisionHorizonWarning(UserWarning):
    """Requested partial quotients go beyond what a double determines."""


def _cf_exact(x: Fraction, depth: int) -> list[int]:
    terms = []
    for _ in range(depth):
        a = math.floor(x)
        terms.append(int(a))
        frac = x - a
        if frac == 0:
            break
        x = 1 / frac
    return terms


def certified_depth(x: float) -> int:
    """Number of leading partial quotients shared by every real within one ulp of ``x``."""
    lo = _cf_exact(Fraction(math.nextafter(x, -math.inf)), MAX_DEPTH + 2)
    hi = _cf_exact(Fraction(math.nextafter(x, math.inf)), MAX_DEPTH + 2)
    mid = _cf_exact(Fraction(x), MAX_DEPTH + 2)
    n = 0
    # the last shared term may still be ambiguous, so it is not counted
    for a, b, c in zip(lo[:-1], mid[:-1], hi[:-1]):
        if a == b == c:
            n += 1
        else:
            break
    return n


def continued_fraction(x, depth: int = 20) -> list[int]:
    """Partial quotients ``[a0, a1, ...]`` of ``x > 0``.

    Floats are expanded exactly as the binary rationals they are. If more
    terms are returned than :func:`certified_depth` vouches for, a
    :class:`PrecisionHorizonWarning` is issued: those trailing terms describe
    the double, not the real number it approximates. ``Fraction`` and ``int``
    inputs, and doubles with a denominator of at most ``2**26``, are exact.
    """
    if depth < 1:
        raise ValueError("depth must be at least 1")
    if depth > MAX_DEPTH:
        raise ValueError(f"depth {depth} exceeds the double-precision horizon {MAX_DEPTH}")
    exact = isinstance(x, (Fraction, int))
    value = Fraction(x)
    if not value > 0:
        raise ValueError("continued fractions are computed for x > 0")
    terms = _cf_exact(value, depth)
    # a double with a short denominator (0.5, 0.375) is taken at face value
    if not exact and value.denominator > _SHORT_DENOMINATOR:
        horizon = certified_depth(float(x))
        if len(terms) > horizon:
            warnings.warn(
                f"only {horizon} partial quotients of {x!r} are determined by the double",
                PrecisionHorizonWarning,
                stacklevel=2,
            )
    return terms


def convergents(terms) -> list[tuple[int, int]]:
    """Successive convergents ``(p_n, q_n)`` of a continued fraction."""
    p0, q0, p1, q1 = 1, 0, int(terms[0]), 1
    out = [(p1, q1)]
    for a in terms[1:]:
        p0, q0, p1, q1 = p1, q1, int(a) * p1 + p0, int(a) * q1 + q0
        out.append((p1, q1))
    return out


def _safe_cf(x: float, depth: int = 20) -> list[int]:
    terms = _cf_exact(Fraction(x), depth)
    if len(terms) < depth:
        return terms
    return terms[: max(1, min(depth, certified_depth(x)))]


@dataclass
class DiophantineReport:
    """Outcome of the lattice sweep for the coupled eigenvalue lower bound."""

    ratio: float
    target: float
    cf_coefficients: list[int]
    ratio_cf_coefficients: list[int]
    N: int
    worst_pair: tuple[int, int]
    empirical_constant: float
    bound_exponent: float = 2.0
    min_gap: float = math.inf
    min_gap_pair: tuple[int, int] = (0, 0)
    coincidences: list[tuple[int, int]] = field(default_factory=list)
    case1_checked: int = 0
    case1_violations: int = 0
    passed: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def _case_split_limits(R: float, N: int) -> tuple[np.ndarray, float]:
    ratio = 1.0 + 1.0 / R  # 1 + T / (2 pi)
    k = np.arange(N + 1, dtype=float)
    # every m with |m| / sqrt(1+k^2) < ratio, plus the first Case-1 row
    limits = np.ceil(ratio * np.sqrt(1.0 + k * k)).astype(np.int64)
    return limits, ratio


def verify_eigenvalue_bound(R: float, N: int, band_factor: float = 2.0) -> DiophantineReport:
    """Sweep ``lambda2+(m, k) (1 + k^2)^2`` over the case split of the lower bound.

    Case 2 (``|m| / sqrt(1+k^2) < 1 + 1/R``) is enumerated exhaustively for
    ``|k| <= N``; its minimum is the empirical constant. Case 1 is checked on
    the band ``1 + 1/R <= |m| / sqrt(1+k^2) < band_factor (1 + 1/R)``, where
    the chain ``lambda2+ >= R sqrt(1+k^2) >= R / (1+k^2)^2`` must hold.
    The sweep is symmetric in the signs of m and k, so only m, k >= 0 are
    visited.
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    if not R > 0:
        raise ValueError("R must be positive")
    limits, ratio = _case_split_limits(R, N)
    value, wm, wk = gap_sweep(R, N, limits)

    # coincidence scan on the raw gap
    min_gap, gap_pair, coincidences = math.inf, (0, 0), []
    for k in range(N + 1):
        root = math.sqrt(1.0 + k * k)
        m = np.arange(int(limits[k]) + 1, dtype=float)
        gaps = np.abs(R * m - root)
        j = int(np.argmin(gaps))
        if gaps[j] < min_gap:
            min_gap, gap_pair = float(gaps[j]), (j, k)
        tol = _COINCIDENCE_ULPS * np.finfo(float).eps * np.maximum(R * m, root)
        for jj in np.flatnonzero(gaps <= tol):
            coincidences.append((int(jj), k))

    checked = violations = 0
    for k in range(N + 1):
        w = 1.0 + k * k
        root = math.sqrt(w)
        lo = int(math.ceil(ratio * root))
        hi = int(math.ceil(band_factor * ratio * root))
        m = np.arange(lo, hi + 1, dtype=float)
        m = m[m / root >= ratio]
        lam = R * m - root
        first = lam >= R * root
        second = R * root >= R / (w * w)
        checked += m.size
        violations += int(np.count_nonzero(~first)) + (0 if second else m.size)

    target = (1.0 / R) ** 2
    return DiophantineReport(
        ratio=R,
        target=target,
        cf_coefficients=_safe_cf(target),
        ratio_cf_coefficients=_safe_cf(R),
        N=N,
        worst_pair=(int(wm), int(wk)),
        empirical_constant=float(value),
        min_gap=min_gap,
        min_gap_pair=gap_pair,
        coincidences=coincidences,
        case1_checked=checked,
        case1_violations=violations,
        passed=bool(value > 0 and not coincidences and violations == 0),
    )


def admissibility_gap(T: float, k: int) -> float:
    """``eps_k``: ``sqrt(1 + k^2)`` reduced modulo ``2 pi / T`` into ``(-pi/T, pi/T]``."""
    period = 2.0 * math.pi / T
    lam = math.sqrt(1.0 + float(k) ** 2)
    eps = math.remainder(lam, period)
    if eps == -0.5 * period:
        eps = 0.5 * period
    return eps


@dataclass
class AdmissibilityReport:
    T: float
    h: float
    N: int
    c_h: float
    worst_k: int
    coincidences: list[int]
    gaps: list[float]
    passed: bool

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("gaps")
        return d


def admissibility_check(T: float, h: float = 3.5, N: int = 256) -> AdmissibilityReport:
    """Check ``|eps_k| > c_h k^-h`` for ``1 <= k <= N`` and report ``c_h``.

    ``c_h`` is the smallest ``|eps_k| k^h`` over non-coincident k. Any k whose
    gap vanishes to rounding is listed in ``coincidences`` and fails the check.
    """
    if h <= 3:
        warnings.warn(
            f"h = {h} <= 3: the gap bound is not guaranteed for this exponent",
            stacklevel=2,
        )
    gaps, coincidences = [], []
    c_h, worst = math.inf, 0
    for k in range(1, N + 1):
        eps = admissibility_gap(T, k)
        gaps.append(eps)
        lam = math.sqrt(1.0 + k * k)
        if abs(eps) <= _COINCIDENCE_ULPS * np.finfo(float).eps * lam:
            coincidences.append(k)
            continue
        val = abs(eps) * k**h
        if val < c_h:
            c_h, worst = val, k
    return AdmissibilityReport(
        T=T,
        h=h,
        N=N,
        c_h=c_h,
        worst_k=worst,
        coincidences=coincidences,
        gaps=gaps,
        passed=bool(not coincidences and c_h > 0),
    )
