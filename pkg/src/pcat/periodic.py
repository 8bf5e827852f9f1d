"""Periodic-time expectation values and the overlap objective ``f(t_p)``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import VanishingTrace
from .evolution import DominantSubset, dominant_subset, effective_b_max
from .linalg import SpectralData, trace_weighted_exp
from .qgeometry import QMetric

VANISHING_RTOL = 1e-12
KAPPA = 1e-2

__all__ = [
    "DominantSubset", "PeriodicExpectation", "RealityReport", "amplitude_modulus_sq",
    "amplitude_modulus_sq_derivative", "dominant_subset", "im_ratio", "periodic_expectation",
    "reality_report", "reduced_expectation", "theorem3_prerequisites",
]


@dataclass(frozen=True)
class PeriodicExpectation:
    """``value = numerator / denominator``.

    Both traces are stored divided by ``exp(log_scale)``; the exact form
    uses ``log_scale = B_max t_p / hbar`` so large damping or growth cannot
    overflow, and the reduced form drops the common ``e^{B t_p / hbar}``.
    """

    value: complex
    t_p: float
    numerator: complex
    denominator: complex
    reduced: bool
    subset_size: int
    log_scale: float = 0.0


def im_ratio(value: complex) -> float:
    return abs(value.imag) / (1.0 + abs(value))


def periodic_expectation(S: SpectralData, Q: QMetric | None, O, t_p: float,
                         hbar: float = 1.0) -> PeriodicExpectation:
    """``Tr(e^{-iHt_p/hbar} O) / Tr(e^{-iHt_p/hbar})`` over the full spectrum.

    The trace is declared vanishing when it falls below ``1e-12`` times
    ``sum_n |e^{-i lambda_n t_p / hbar}|``, the size it would have without
    phase cancellation (``n`` for a real spectrum).
    """
    if t_p < 0:
        raise ValueError(f"period must be non-negative, got {t_p}")
    shift = float(S.eigenvalues.imag.max()) * t_p / hbar
    num = trace_weighted_exp(S, Q, O, t_p, hbar, shift)
    den = trace_weighted_exp(S, Q, np.eye(S.n), t_p, hbar, shift)
    scale = float(np.sum(np.exp(S.eigenvalues.imag * t_p / hbar - shift)))
    if abs(den) < VANISHING_RTOL * scale:
        raise VanishingTrace(f"|Tr exp(-iHt_p/hbar)| vanishes at t_p = {t_p} "
                             f"({abs(den):.3e} against {scale:.3e})")
    return PeriodicExpectation(num / den, t_p, num, den, False, S.n, shift)


def reduced_expectation(S: SpectralData, Q: QMetric | None, O, t_p: float, hbar: float = 1.0,
                        subset: DominantSubset | None = None) -> PeriodicExpectation:
    """Dominant-subset approximant with phases ``theta_n = Re(lambda_n) t_p / hbar``.

    The common factor ``e^{B t_p / hbar}`` cancels and is left out of the
    stored numerator and denominator.
    """
    sub = subset if subset is not None else dominant_subset(S)
    idx = np.array(sub.indices, dtype=int)
    diag = np.diag(S.eigen_coordinates(O))[idx]
    phases = np.exp(-1j * S.eigenvalues[idx].real * t_p / hbar)
    num = complex(np.sum(diag * phases))
    den = complex(np.sum(phases))
    if abs(den) < VANISHING_RTOL * idx.size:
        raise VanishingTrace(f"truncated trace vanishes at t_p = {t_p}")
    return PeriodicExpectation(num / den, t_p, num, den, True, idx.size, sub.B_max * t_p / hbar)


def _levels(S: SpectralData, subset: DominantSubset | None):
    if subset is None:
        return S.eigenvalues.real, S.eigenvalues.imag
    idx = np.array(subset.indices, dtype=int)
    return S.eigenvalues[idx].real, np.full(idx.size, subset.B_max)


def amplitude_modulus_sq(S: SpectralData, t_p, hbar: float = 1.0, subset: DominantSubset | None = None):
    """``f(t_p) = |Tr e^{-iHt_p/hbar}|^2``.

    Without ``subset`` this is exact.  With it, only subset levels enter and
    each is damped by the common ``B_max``, which gives
    ``e^{2Bt/hbar} sum_{n,m} cos((Re l_m - Re l_n) t / hbar)``.
    Accepts a scalar or an array of periods.
    """
    alpha, beta = _levels(S, subset)
    t = np.asarray(t_p, dtype=float)
    z = np.exp(np.multiply.outer(t, (beta - 1j * alpha) / hbar)).sum(axis=-1)
    f = z.real**2 + z.imag**2
    return float(f) if f.ndim == 0 else f


def amplitude_modulus_sq_derivative(S: SpectralData, t_p, hbar: float = 1.0,
                                    subset: DominantSubset | None = None):
    """Analytic ``df/dt_p``.

    Pairwise, ``d/dt [e^{(b_n+b_m)t} cos(D t)] = [(b_n+b_m) cos(D t) - D sin(D t)] e^{(b_n+b_m)t}``
    (all over ``hbar``); on a subset ``b_n + b_m = 2 B_max``.
    """
    alpha, beta = _levels(S, subset)
    t = np.asarray(t_p, dtype=float)[..., None, None]
    D = (alpha[None, :] - alpha[:, None]) / hbar
    G = (beta[None, :] + beta[:, None]) / hbar
    terms = (G * np.cos(D * t) - D * np.sin(D * t)) * np.exp(G * t)
    d = terms.sum(axis=(-1, -2))
    return float(d) if d.ndim == 0 else d


def theorem3_prerequisites(S: SpectralData, subset: DominantSubset, kappa: float = KAPPA,
                           tol_deg: float = 1e-9) -> dict:
    alpha = np.sort(S.eigenvalues[list(subset.indices)].real)
    spacing = float(np.min(np.diff(alpha))) if alpha.size > 1 else float("inf")
    B = effective_b_max(S, subset, tol_deg)
    b_nonpositive = B <= 0.0
    small = abs(B) <= kappa * spacing
    return {
        "B_max_nonpositive": bool(b_nonpositive),
        "B_small_vs_spacing": bool(small),
        "min_spacing": spacing,
        "kappa": kappa,
        "holds": bool(b_nonpositive and small),
    }


@dataclass(frozen=True)
class RealityReport:
    exact: PeriodicExpectation
    reduced: PeriodicExpectation
    exact_im_ratio: float
    reduced_im_ratio: float
    subset: DominantSubset
    theorem2: bool
    theorem3: dict
    dominance: float

    def as_dict(self) -> dict:
        return {
            "t_p": self.exact.t_p,
            "exact_value": self.exact.value,
            "exact_im_ratio": self.exact_im_ratio,
            "reduced_value": self.reduced.value,
            "reduced_im_ratio": self.reduced_im_ratio,
            "subset": list(self.subset.indices),
            "B_max": self.subset.B_max,
            "gap": self.subset.gap,
            "dominance": self.dominance,
            "theorem2_prerequisite": self.theorem2,
            "theorem3_prerequisites": self.theorem3,
        }


def reality_report(S: SpectralData, Q: QMetric | None, O, t_p: float, hbar: float = 1.0,
                   tol_deg: float = 1e-9, kappa: float = KAPPA) -> RealityReport:
    """Exact and reduced values side by side with the theorem prerequisites.

    ``dominance`` is ``t_p * gap / hbar``; the truncation error of the
    reduced form is of order ``exp(-dominance)``.
    """
    sub = dominant_subset(S, tol_deg)
    exact = periodic_expectation(S, Q, O, t_p, hbar)
    red = reduced_expectation(S, Q, O, t_p, hbar, sub)
    return RealityReport(
        exact=exact,
        reduced=red,
        exact_im_ratio=im_ratio(exact.value),
        reduced_im_ratio=im_ratio(red.value),
        subset=sub,
        theorem2=len(sub) == 1,
        theorem3=theorem3_prerequisites(S, sub, kappa, tol_deg),
        dominance=t_p * sub.gap / hbar,
    )
