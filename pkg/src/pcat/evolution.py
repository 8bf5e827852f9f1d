"""Future-included dynamics in eigenbasis coordinates.

A state is stored by its coefficients in the eigenbasis ``|lambda_i>``.
Because the eigenvectors are Q-orthonormal, Q inner products reduce to plain
dot products of coordinates, which is how everything here is evaluated.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import DimensionMismatch, EmptySubset, TimeOutOfRange, VanishingDenominator
from .linalg import SpectralData, as_vector
from .qgeometry import QMetric, q_split

VANISHING_RTOL = 1e-12


@dataclass(frozen=True)
class StatePair:
    """Past-state coefficients ``a`` at ``T_A`` and future-state ``b`` at ``T_B``."""

    a: np.ndarray
    b: np.ndarray
    T_A: float
    T_B: float

    def __post_init__(self):
        a = as_vector(self.a, name="a")
        b = as_vector(self.b, a.shape[0], "b")
        if self.T_B < self.T_A:
            raise TimeOutOfRange(f"T_B = {self.T_B} precedes T_A = {self.T_A}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def T(self) -> float:
        return self.T_B - self.T_A

    def normalized(self) -> "StatePair":
        return replace(self, a=self.a / np.linalg.norm(self.a), b=self.b / np.linalg.norm(self.b))


@dataclass(frozen=True)
class EvolvedPair:
    a: np.ndarray
    b: np.ndarray
    t: float


def _check(S: SpectralData, pair: StatePair) -> None:
    if pair.a.shape[0] != S.n:
        raise DimensionMismatch(f"pair has {pair.a.shape[0]} coefficients, spectrum has {S.n} levels")


def evolve_pair(S: SpectralData, pair: StatePair, t: float, hbar: float = 1.0) -> EvolvedPair:
    """``a`` forward under ``H`` from ``T_A``; ``b`` backward under ``H^{dagger Q}`` from ``T_B``."""
    _check(S, pair)
    slack = 1e-12 * max(1.0, abs(pair.T_A), abs(pair.T_B))
    if t < pair.T_A - slack or t > pair.T_B + slack:
        raise TimeOutOfRange(f"t = {t} outside [{pair.T_A}, {pair.T_B}]")
    lam = S.eigenvalues
    a = pair.a * np.exp(-1j * lam * (t - pair.T_A) / hbar)
    b = pair.b * np.exp(-1j * lam.conj() * (t - pair.T_B) / hbar)
    return EvolvedPair(a, b, t)


def transition_amplitude(S: SpectralData, Q: QMetric | None, pair: StatePair, hbar: float = 1.0,
                         t: float | None = None) -> complex:
    """``<B(t)|_Q A(t)>``; conserved, so ``t`` defaults to ``T_A``."""
    ev = evolve_pair(S, pair, pair.T_A if t is None else t, hbar)
    return complex(np.vdot(ev.b, ev.a))


@dataclass(frozen=True)
class DominantSubset:
    """Indices whose Im(lambda) attains the maximum ``B_max``."""

    indices: tuple[int, ...]
    B_max: float
    gap: float

    def __len__(self) -> int:
        return len(self.indices)


def dominant_subset(S: SpectralData, tol_deg: float = 1e-9) -> DominantSubset:
    im = S.eigenvalues.imag
    top = float(im.max())
    inside = top - im <= tol_deg * (1.0 + abs(top))
    idx = tuple(int(i) for i in np.flatnonzero(inside))
    rest = im[~inside]
    gap = float(top - rest.max()) if rest.size else float("inf")
    return DominantSubset(idx, top, gap)


def effective_b_max(S: SpectralData, sub: DominantSubset, tol_deg: float = 1e-9) -> float:
    """``B_max`` with values within ``tol_deg (1 + max|lambda|)`` of zero snapped to 0.

    Rounding leaves imaginary parts of order ``eps ||H||`` on spectra that
    are real in exact arithmetic; those must not count as growth.
    """
    B = sub.B_max
    return 0.0 if abs(B) <= tol_deg * (1.0 + float(np.max(np.abs(S.eigenvalues)))) else B


def maximize_states(S: SpectralData, T: float, hbar: float = 1.0, weights=None,
                    theta_c: float = 0.0, T_A: float = 0.0, tol_deg: float = 1e-9,
                    subset: DominantSubset | None = None) -> StatePair:
    """Closed-form pair maximizing ``|<B|_Q A>|`` over an elapsed time ``T``.

    Support lies on the dominant subset with ``|a_i| = |b_i| = sqrt(w_i)``;
    phases are ``theta_b = 0`` and ``theta_a = theta_c + T Re(lambda_i) / hbar``
    so every term of the amplitude carries the same phase.
    """
    if T <= 0:
        raise TimeOutOfRange(f"elapsed time must be positive, got {T}")
    sub = subset if subset is not None else dominant_subset(S, tol_deg)
    idx = np.array(sub.indices, dtype=int)
    if idx.size == 0:
        raise EmptySubset("dominant subset is empty")
    if weights is None:
        w = np.full(idx.size, 1.0 / idx.size)
    else:
        w = np.asarray(weights, dtype=float).reshape(-1)
        if w.shape[0] != idx.size or np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be positive, one per subset index, and sum to 1")
    a = np.zeros(S.n, dtype=np.complex128)
    b = np.zeros(S.n, dtype=np.complex128)
    mod = np.sqrt(w)
    a[idx] = mod * np.exp(1j * (theta_c + T * S.eigenvalues[idx].real / hbar))
    b[idx] = mod
    return StatePair(a, b, T_A, T_A + T)


def _norm(x: np.ndarray) -> float:
    # scaled so large amplitudes do not overflow when squared
    m = float(np.max(np.abs(x)))
    return m * float(np.linalg.norm(x / m)) if m > 0 else 0.0


def _weak_value_at(S: SpectralData, Oc: np.ndarray, pair: StatePair, t: float, hbar: float) -> complex:
    ev = evolve_pair(S, pair, t, hbar)
    den = np.vdot(ev.b, ev.a)
    bound = _norm(ev.a) * _norm(ev.b)
    if abs(den) < VANISHING_RTOL * bound:
        raise VanishingDenominator(f"|<B|_Q A>| = {abs(den):.3e} against scale {bound:.3e}")
    return complex(np.vdot(ev.b, Oc @ ev.a) / den)


def weak_value(O, S: SpectralData, Q: QMetric | None, pair: StatePair, t: float | None = None,
               hbar: float = 1.0) -> complex:
    """Normalized matrix element ``<B(t)|_Q O|A(t)> / <B(t)|_Q A(t)>``."""
    _check(S, pair)
    return _weak_value_at(S, S.eigen_coordinates(O), pair, pair.T_A if t is None else t, hbar)


def default_dt(H, hbar: float = 1.0) -> float:
    return 1e-4 * hbar / max(float(np.linalg.norm(H)), 1e-300)


def reconstruct(S: SpectralData) -> np.ndarray:
    """``P diag(lambda) P^-1``."""
    return (S.P * S.eigenvalues[None, :]) @ S.Pinv


def heisenberg_residual(O, S: SpectralData, Q: QMetric, pair: StatePair, t: float,
                        dt: float | None = None, hbar: float = 1.0) -> float:
    """``|d/dt <O>_wv - (i/hbar) <[H_Qh, O]>_wv|`` with a centered difference.

    The derivative needs ``t +- dt`` inside ``[T_A, T_B]``.
    """
    H = reconstruct(S)
    O = np.asarray(O, dtype=np.complex128)
    dt = default_dt(H, hbar) if dt is None else dt
    Oc = S.eigen_coordinates(O)
    deriv = (_weak_value_at(S, Oc, pair, t + dt, hbar) - _weak_value_at(S, Oc, pair, t - dt, hbar)) / (2 * dt)
    Hqh, _ = q_split(H, Q)
    comm = Hqh @ O - O @ Hqh
    rhs = 1j / hbar * _weak_value_at(S, S.eigen_coordinates(comm), pair, t, hbar)
    return float(abs(deriv - rhs))
