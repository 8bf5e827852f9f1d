"""Periods that phase-align the dominant levels.

The target is every ``t_p > 0`` with ``alpha_i t_p = C + h m_i`` for all
levels, integers ``m_i`` and one common ``C`` in ``[0, h)``.  Differences
``m_{i+1} - m_i`` must reproduce the spacing ratios, so the solver
rationalizes those ratios, builds the smallest positive integer difference
vector, and walks its multiples.  All integer bookkeeping uses Python ints
and ``Fraction``; floats appear only when ``t_p`` and ``C`` are reported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import reduce
from typing import Callable, Sequence

import numpy as np

from .errors import ApproximationFailure, EmptyWithinBounds, PositiveBmax
from .evolution import DominantSubset, dominant_subset, effective_b_max
from .linalg import SpectralData
from .rational import best_rational

MAX_DENOMINATOR = 10**6
RATIO_TOL = 1e-9
MAX_SCALE = 10**4
MAX_M1 = 10**6
MAX_CANDIDATES = 16
MERGE_TOL = 1e-9
SNAP_TOL = 1e-9


def planck(hbar: float = 1.0) -> float:
    return 2.0 * math.pi * hbar


@dataclass(frozen=True)
class RationalSpacing:
    """Distinct sorted levels with their rationalized spacing ratios.

    ``ratios[j]`` for ``j < n-2`` approximates ``s_j / s_{j+1}`` (``s`` the
    consecutive spacings); the last entry is the closing ratio
    ``s_{n-1} / (alpha_n - alpha_1)``, derived from the chain and checked.
    ``diffs`` is the primitive integer vector of ``m_{j+1} - m_j``.
    """

    alphas: tuple[float, ...]
    ratios: tuple[tuple[int, int], ...]
    max_denominator: int
    approx_error: float
    diffs: tuple[int, ...]
    levels: tuple[float, ...] = ()
    groups: tuple[int, ...] = ()

    @property
    def order(self) -> int:
        return len(self.alphas)


@dataclass(frozen=True)
class PeriodCandidate:
    t_p: float
    m: tuple[int, ...]
    C: float
    f_value: float
    damped_f: float
    scale: int = 1
    residual: float = 0.0


@dataclass(frozen=True)
class PeriodSelection:
    candidate: PeriodCandidate
    degenerate: bool
    B_max: float


def _rel_err(approx: Fraction, target: Fraction) -> float:
    return float(abs(approx - target) / abs(target))


def merge_levels(alphas: Sequence[float], tol: float = MERGE_TOL) -> tuple[list[float], list[int]]:
    """Sort and collapse levels closer than ``tol`` times their scale.

    Returns the distinct levels and, for each sorted input level, the index
    of the distinct level it joined.
    """
    vals = sorted(float(a) for a in alphas)
    scale = max(1.0, max(abs(v) for v in vals))
    distinct: list[float] = []
    groups: list[int] = []
    for v in vals:
        if distinct and v - distinct[-1] <= tol * scale:
            groups.append(len(distinct) - 1)
        else:
            distinct.append(v)
            groups.append(len(distinct) - 1)
    return distinct, groups


def primitive_diffs(ratios: Sequence[tuple[int, int]]) -> list[int]:
    """Smallest positive integers ``D`` with ``D_j / D_{j+1} = n_j / d_j``."""
    D = [Fraction(1)]
    for n, d in ratios:
        D.append(D[-1] * d / n)
    lcm = reduce(math.lcm, (x.denominator for x in D), 1)
    ints = [int(x * lcm) for x in D]
    g = reduce(math.gcd, ints)
    return [x // g for x in ints]


def rationalize_spacings(alphas: Sequence[float], max_denominator: int = MAX_DENOMINATOR,
                         tol: float = RATIO_TOL, merge_tol: float = MERGE_TOL) -> RationalSpacing:
    levels = sorted(float(a) for a in alphas)
    distinct, groups = merge_levels(levels, merge_tol)
    if len(distinct) < 2:
        return RationalSpacing(tuple(distinct), (), max_denominator, 0.0, (), tuple(levels), tuple(groups))
    exact = [Fraction(a) for a in distinct]
    gaps = [b - a for a, b in zip(exact, exact[1:])]

    chain: list[tuple[int, int]] = []
    err = 0.0
    for s, s_next in zip(gaps, gaps[1:]):
        target = s / s_next
        r = best_rational(target, max_denominator)
        if r <= 0:
            raise ApproximationFailure(f"spacing ratio {float(target):.6g} rounds to zero")
        e = _rel_err(r, target)
        if e > tol:
            raise ApproximationFailure(
                f"no rational with denominator <= {max_denominator} within {tol:g} of {float(target):.12g}"
                f" (best {r}, relative error {e:.3e})")
        chain.append((r.numerator, r.denominator))
        err = max(err, e)

    D = primitive_diffs(chain)
    closing = Fraction(D[-1], sum(D))
    closing_target = gaps[-1] / (exact[-1] - exact[0])
    e = _rel_err(closing, closing_target)
    if e > tol:
        raise ApproximationFailure(f"rationalized chain implies closing ratio {closing}, "
                                   f"target {float(closing_target):.12g} (relative error {e:.3e})")
    err = max(err, e)
    ratios = tuple(chain) + ((closing.numerator, closing.denominator),)
    return RationalSpacing(tuple(distinct), ratios, max_denominator, err, tuple(D), tuple(levels), tuple(groups))


def verify_alignment(alphas: Sequence[float], t_p: float, h: float, tol_align: float = 1e-9) -> tuple[bool, float]:
    """Do all ``alpha_i t_p`` share one residue modulo ``h``?

    Residues are compared on the circle, so values just below ``h`` agree
    with values just above 0.  Returns the flag and the mean residue ``C``.
    """
    r = np.mod(np.asarray(alphas, dtype=float) * t_p, h)
    d = np.mod(r - r[0] + h / 2, h) - h / 2
    ok = bool(np.max(np.abs(d)) <= tol_align * h)
    C = float(np.mod(r[0] + d.mean(), h))
    if C >= h * (1.0 - tol_align):
        C = 0.0
    return ok, C


def alignment_residual(alphas: Sequence[float], t_p: float, h: float) -> float:
    """Largest circular disagreement of the residues, in units of ``h``."""
    r = np.mod(np.asarray(alphas, dtype=float) * t_p, h)
    d = np.mod(r - r[0] + h / 2, h) - h / 2
    return float(np.max(np.abs(d)) / h)


def _phase_sum_sq(alphas: Sequence[float], t_p: float, hbar: float) -> float:
    z = np.exp(-1j * np.asarray(alphas, dtype=float) * t_p / hbar).sum()
    return float(abs(z) ** 2)


def _base_offset(alpha1: Fraction, cycles: Fraction) -> tuple[int, Fraction]:
    """``m_1`` and ``C / h`` from ``alpha_1 t_p / h = cycles`` with ``C/h`` in ``[0, 1)``."""
    m1 = math.floor(cycles)
    frac = cycles - m1
    if 1 - frac <= SNAP_TOL * max(1, abs(cycles)):
        m1 += 1
        frac = Fraction(0)
    elif frac <= SNAP_TOL * max(1, abs(cycles)):
        frac = Fraction(0)
    return m1, frac


def _emit(distinct, levels, groups, distinct_m, t_p, C, h, hbar, B_max, scale, tol_align):
    m_full = tuple(distinct_m[g] for g in groups)
    res = alignment_residual(distinct, t_p, h)
    # float rounding of alpha * t_p, in units of h
    rounding = 8 * np.finfo(float).eps * max(abs(a) for a in distinct) * t_p / h
    if res > tol_align + rounding:
        raise ApproximationFailure(f"candidate t_p = {t_p:.12g} fails the congruence check (residual {res:.3e} h)")
    f = _phase_sum_sq(levels, t_p, hbar)
    return PeriodCandidate(t_p, m_full, C, f, f * math.exp(2 * B_max * t_p / hbar), scale, res)


def _certificate_tol(approx_error: float, cycles: int, tol_align: float) -> float:
    # rationalization error grows with the number of cycles spanned
    return tol_align + 10.0 * approx_error * cycles


def _enumerate(make: Callable[[int], tuple], max_scale: int, max_m1: int, max_candidates: int) -> list:
    out = []
    for scale in range(1, max_scale + 1):
        cand = make(scale)
        if abs(cand.m[0]) > max_m1:
            break
        out.append(cand)
        if len(out) >= max_candidates:
            break
    if not out:
        raise EmptyWithinBounds(f"no aligned period with scale <= {max_scale} and |m_1| <= {max_m1}")
    return sorted(out, key=lambda c: c.t_p)


def solve_order2(alphas: Sequence[float], h: float, hbar: float | None = None, B_max: float = 0.0,
                 max_scale: int = MAX_SCALE, max_m1: int = MAX_M1, max_candidates: int = MAX_CANDIDATES,
                 tol_align: float = 1e-12) -> list[PeriodCandidate]:
    """Two levels: ``t_p = h k / (alpha_2 - alpha_1)`` for ``k = m_2 - m_1 = 1, 2, ...``.

    ``m_1`` is the unique integer with
    ``alpha_2 m_1 <= alpha_1 m_2 < alpha_2 m_1 + (alpha_2 - alpha_1)``.
    """
    a1, a2 = (Fraction(float(a)) for a in alphas)
    if not a1 < a2:
        raise ValueError("order-2 solver needs alpha_1 < alpha_2")
    hbar = h / (2 * math.pi) if hbar is None else hbar

    def make(k: int) -> PeriodCandidate:
        m1, frac = _base_offset(a1, a1 * k / (a2 - a1))
        t_p = h * float(Fraction(k) / (a2 - a1))
        pair = (float(a1), float(a2))
        return _emit(pair, pair, (0, 1), (m1, m1 + k), t_p, h * float(frac), h, hbar, B_max, k, tol_align)

    return _enumerate(make, max_scale, max_m1, max_candidates)


def solve_order3(spacing: RationalSpacing, h: float, hbar: float | None = None, B_max: float = 0.0,
                 max_scale: int = MAX_SCALE, max_m1: int = MAX_M1, max_candidates: int = MAX_CANDIDATES,
                 tol_align: float = 1e-12) -> list[PeriodCandidate]:
    """Three levels with the ratios ``n_1/d_1`` (chain) and ``n_2/d_2`` (closing).

    ``m_2 - m_1 = a n_1 n_2 / g`` and ``m_3 - m_2 = a n_2 d_1 / g`` with
    ``g = gcd(n_2, d_1)``; the consistency ``d_1 d_2 = n_2 (d_1 + n_1)`` is
    asserted rather than assumed.
    """
    if spacing.order != 3:
        raise ValueError("order-3 solver needs exactly three distinct levels")
    hbar = h / (2 * math.pi) if hbar is None else hbar
    (n1, d1), (n2, d2) = spacing.ratios
    if d1 * d2 != n2 * (d1 + n1):
        raise ApproximationFailure(f"inconsistent ratios {n1}/{d1}, {n2}/{d2}: d1 d2 != n2 (d1 + n1)")
    g = math.gcd(n2, d1)
    a1, a2, _ = (Fraction(a) for a in spacing.alphas)
    step12, step23 = n1 * n2 // g, n2 * d1 // g

    def make(a: int) -> PeriodCandidate:
        cycles = a * step12 / (a2 - a1)
        m1, frac = _base_offset(a1, a1 * cycles)
        distinct_m = (m1, m1 + a * step12, m1 + a * (step12 + step23))
        t_p = h * float(cycles)
        tol = _certificate_tol(spacing.approx_error, a * (step12 + step23), tol_align)
        return _emit(spacing.alphas, spacing.levels, spacing.groups, distinct_m, t_p, h * float(frac), h, hbar,
                     B_max, a, tol)

    return _enumerate(make, max_scale, max_m1, max_candidates)


def solve_lattice(spacing: RationalSpacing, h: float, hbar: float | None = None, B_max: float = 0.0,
                  max_scale: int = MAX_SCALE, max_m1: int = MAX_M1, max_candidates: int = MAX_CANDIDATES,
                  tol_align: float = 1e-12) -> list[PeriodCandidate]:
    """Any order: multiples ``l * diffs`` of the primitive difference vector.

    ``t_p = h l sum(diffs) / (alpha_n - alpha_1)``, using the full span so
    rationalization error is spread evenly across the levels.
    """
    if spacing.order < 2:
        raise ValueError("need at least two distinct levels")
    hbar = h / (2 * math.pi) if hbar is None else hbar
    D = spacing.diffs
    span = Fraction(spacing.alphas[-1]) - Fraction(spacing.alphas[0])
    a1 = Fraction(spacing.alphas[0])
    total = sum(D)
    offsets = [0]
    for x in D:
        offsets.append(offsets[-1] + x)

    def make(l: int) -> PeriodCandidate:
        cycles = Fraction(l * total) / span
        m1, frac = _base_offset(a1, a1 * cycles)
        distinct_m = tuple(m1 + l * o for o in offsets)
        tol = _certificate_tol(spacing.approx_error, l * total, tol_align)
        return _emit(spacing.alphas, spacing.levels, spacing.groups, distinct_m, h * float(cycles),
                     h * float(frac), h, hbar, B_max, l, tol)

    return _enumerate(make, max_scale, max_m1, max_candidates)


def solve_general(spacing: RationalSpacing, h: float, hbar: float | None = None, B_max: float = 0.0,
                  max_scale: int = MAX_SCALE, max_m1: int = MAX_M1, max_candidates: int = MAX_CANDIDATES,
                  tol_align: float = 1e-12) -> list[PeriodCandidate]:
    """Dispatch on the number of distinct levels.

    A single distinct level aligns at every period, so there is nothing to
    select and :class:`EmptyWithinBounds` is raised.
    """
    kw = dict(hbar=hbar, B_max=B_max, max_scale=max_scale, max_m1=max_m1, max_candidates=max_candidates,
              tol_align=tol_align)
    if spacing.order < 2:
        raise EmptyWithinBounds("a single distinct level has no preferred period")
    if spacing.order == 2:
        hb = h / (2 * math.pi) if hbar is None else hbar
        out = []
        for c in solve_order2(spacing.alphas, h, **kw):
            f = _phase_sum_sq(spacing.levels, c.t_p, hb)
            out.append(replace(c, m=tuple(c.m[g] for g in spacing.groups), f_value=f,
                               damped_f=f * math.exp(2 * B_max * c.t_p / hb)))
        return out
    if spacing.order == 3:
        return solve_order3(spacing, h, **kw)
    return solve_lattice(spacing, h, **kw)


def select_period(candidates: Sequence[PeriodCandidate], B_max: float, hbar: float = 1.0,
                  rtol: float = 1e-9) -> PeriodSelection:
    """Pick the period maximizing ``f(t_p) e^{2 B t_p / hbar}``.

    With ``B_max < 0`` the damping breaks ties toward the smallest period.
    With ``B_max == 0`` every aligned candidate is an equal maximum; the
    smallest is returned and ``degenerate`` is set.
    """
    if not candidates:
        raise EmptyWithinBounds("no candidates to select from")
    if B_max > 0:
        raise PositiveBmax(f"B_max = {B_max} > 0: the overlap grows without bound in t_p")
    scored = [replace(c, damped_f=c.f_value * math.exp(2 * B_max * c.t_p / hbar)) for c in candidates]
    best = max(c.damped_f for c in scored)
    top = [c for c in scored if c.damped_f >= best * (1 - rtol)]
    return PeriodSelection(min(top, key=lambda c: c.t_p), B_max == 0.0, B_max)


@dataclass(frozen=True)
class PeriodSolution:
    spacing: RationalSpacing
    candidates: list[PeriodCandidate]
    selection: PeriodSelection
    subset: DominantSubset
    h: float
    extra: dict = field(default_factory=dict)


def solve_period(S: SpectralData, hbar: float = 1.0, tol_deg: float = 1e-9,
                 max_denominator: int = MAX_DENOMINATOR, tol: float = RATIO_TOL,
                 max_scale: int = MAX_SCALE, max_m1: int = MAX_M1, max_candidates: int = MAX_CANDIDATES,
                 tol_align: float = 1e-12) -> PeriodSolution:
    """Dominant subset, rationalized spacings, candidates, selection."""
    sub = dominant_subset(S, tol_deg)
    B = effective_b_max(S, sub, tol_deg)
    if B > 0:
        raise PositiveBmax(f"B_max = {B} > 0")
    alphas = S.eigenvalues[list(sub.indices)].real
    spacing = rationalize_spacings(alphas, max_denominator, tol)
    h = planck(hbar)
    cands = solve_general(spacing, h, hbar=hbar, B_max=B, max_scale=max_scale, max_m1=max_m1,
                          max_candidates=max_candidates, tol_align=tol_align)
    return PeriodSolution(spacing, cands, select_period(cands, B, hbar), sub, h)


@dataclass(frozen=True)
class ScanReport:
    t: np.ndarray
    f: np.ndarray
    damped_f: np.ndarray
    argmax_t: float
    argmax_value: float
    local_maxima: list[tuple[float, float]]
    flat: bool
    resolution: float
    B_max: float


def golden_section_max(fun: Callable[[float], float], a: float, b: float, tol: float,
                       max_iter: int = 200) -> tuple[float, float]:
    """Maximize a unimodal ``fun`` on ``[a, b]``; returns ``(x, fun(x))``."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    x1 = b - invphi * (b - a)
    x2 = a + invphi * (b - a)
    f1, f2 = fun(x1), fun(x2)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if f1 >= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - invphi * (b - a)
            f1 = fun(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (b - a)
            f2 = fun(x2)
    x = 0.5 * (a + b)
    return x, fun(x)


def scan_oracle(S: SpectralData, hbar: float = 1.0, t_max: float = 10.0, grid_points: int = 1000,
                t_min: float = 0.0, subset: DominantSubset | None = None, refine_margin: float = 0.05,
                report_threshold: float = 0.5) -> ScanReport:
    """Brute-force grid maximization of ``|Tr e^{-iHt/hbar}|^2``.

    ``damped_f`` is the exact objective; ``f`` divides out ``e^{2 B_max t/hbar}``
    and so measures phase alignment alone.  Interior grid maxima whose value
    is within ``refine_margin`` of the best are polished by golden section
    to ``1e-10 * t_max``; the global answer prefers interior maxima, falling
    back to the grid endpoints only when there are none.
    """
    if grid_points < 2 or t_max <= t_min:
        raise ValueError("need grid_points >= 2 and t_max > t_min")
    from .periodic import amplitude_modulus_sq

    sub = subset if subset is not None else dominant_subset(S)
    B = sub.B_max
    t = np.linspace(t_min, t_max, grid_points)
    damped = np.asarray(amplitude_modulus_sq(S, t, hbar))
    f = damped * np.exp(-2 * B * t / hbar)
    step = float(t[1] - t[0])
    top = float(damped.max())

    def obj(x: float) -> float:
        return amplitude_modulus_sq(S, x, hbar)

    if top - float(damped.min()) <= 1e-12 * max(1.0, top):
        return ScanReport(t, f, damped, float(t[0]), float(damped[0]), [], True, step, B)

    inner = np.flatnonzero((damped[1:-1] >= damped[:-2]) & (damped[1:-1] >= damped[2:])) + 1
    best_inner = float(damped[inner].max()) if inner.size else -np.inf
    maxima = []
    tol = 1e-10 * t_max
    for i in inner:
        if damped[i] >= best_inner - refine_margin * abs(best_inner):
            maxima.append(golden_section_max(obj, float(t[i - 1]), float(t[i + 1]), tol))
        elif damped[i] >= report_threshold * top:
            maxima.append((float(t[i]), float(damped[i])))
    if maxima:
        vbest = max(p[1] for p in maxima)
        x, v = min((p for p in maxima if p[1] >= vbest - 1e-12 * abs(vbest)), key=lambda p: p[0])
    else:
        k = int(np.argmax(damped))
        x, v = float(t[k]), float(damped[k])
    shown = sorted(p for p in maxima if p[1] >= report_threshold * top)
    return ScanReport(t, f, damped, x, v, shown, False, step, B)
