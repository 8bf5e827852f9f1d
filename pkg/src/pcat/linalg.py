"""Dense complex matrices, inversion and a gauge-fixed eigendecomposition."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, NonDiagonalizable, Singular

COND_CEILING = 1e10
TOL_EIG = 1e-10
SINGULAR_RTOL = 1e-12

GAUGE_UNIT_MAXREAL = "unit-norm/max-component-real-positive"
GAUGE_CUSTOM = "custom"


def as_matrix(A, name: str = "matrix") -> np.ndarray:
    """Coerce to a finite square complex128 array."""
    M = np.array(A, dtype=np.complex128)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] == 0:
        raise DimensionMismatch(f"{name} must be a non-empty square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} has non-finite entries")
    return M


def as_vector(v, n: int | None = None, name: str = "vector") -> np.ndarray:
    x = np.array(v, dtype=np.complex128).reshape(-1)
    if n is not None and x.shape[0] != n:
        raise DimensionMismatch(f"{name} has length {x.shape[0]}, expected {n}")
    return x


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


def mat_inverse(A, rtol: float = SINGULAR_RTOL) -> np.ndarray:
    """Inverse through partially pivoted LU plus one refinement step.

    The refinement residual ``I - X A`` is formed in extended precision, which
    roughly halves the left residual for ill-conditioned ``A``.  Raises
    :class:`Singular` when a pivot of U falls below ``rtol * ||A||_F``.
    """
    A = as_matrix(A)
    scale = np.linalg.norm(A)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(A, check_finite=False)
    pivots = np.abs(np.diag(lu))
    if scale == 0.0 or pivots.min() < rtol * scale:
        raise Singular(f"smallest pivot {pivots.min():.3e} below {rtol:g} * ||A||_F = {rtol * scale:.3e}")
    X = scipy.linalg.lu_solve((lu, piv), np.eye(A.shape[0], dtype=np.complex128), check_finite=False)
    Xl = X.astype(np.clongdouble)
    R = np.eye(A.shape[0], dtype=np.clongdouble) - Xl @ A.astype(np.clongdouble)
    return (Xl + R @ Xl).astype(np.complex128)


def fix_gauge(P: np.ndarray) -> np.ndarray:
    """Scale each column to unit norm with its largest-modulus entry real positive.

    Near-ties in modulus (within 1e-12 relative) resolve to the lowest row
    index so the choice does not flip under rounding.
    """
    P = np.array(P, dtype=np.complex128, copy=True)
    for j in range(P.shape[1]):
        v = P[:, j]
        v /= np.linalg.norm(v)
        mod = np.abs(v)
        k = int(np.flatnonzero(mod >= mod.max() * (1.0 - 1e-12))[0])
        v *= np.conj(v[k]) / mod[k]
        v[k] = mod[k]
        P[:, j] = v
    return P


def _order(eigenvalues: np.ndarray, tol: float) -> np.ndarray:
    # Im descending with clustering, then Re ascending inside each cluster.
    by_im = sorted(range(len(eigenvalues)), key=lambda i: (-eigenvalues[i].imag, eigenvalues[i].real))
    order: list[int] = []
    group: list[int] = []
    for i in by_im:
        if group and eigenvalues[group[0]].imag - eigenvalues[i].imag > tol:
            order.extend(sorted(group, key=lambda k: eigenvalues[k].real))
            group = []
        group.append(i)
    order.extend(sorted(group, key=lambda k: eigenvalues[k].real))
    return np.array(order, dtype=int)


def _clusters(eigenvalues: np.ndarray, tol: float) -> list[list[int]]:
    seen: set[int] = set()
    out = []
    for i in range(len(eigenvalues)):
        if i in seen:
            continue
        members = [j for j in range(i, len(eigenvalues))
                   if j not in seen and abs(eigenvalues[j] - eigenvalues[i]) <= tol]
        seen.update(members)
        out.append(members)
    return out


@dataclass(frozen=True)
class SpectralData:
    """Eigenvalues with diagonalizer ``P`` (columns are right eigenvectors)."""

    eigenvalues: np.ndarray
    P: np.ndarray
    Pinv: np.ndarray
    cond_P: float
    gauge: str = GAUGE_UNIT_MAXREAL

    @property
    def n(self) -> int:
        return len(self.eigenvalues)

    def residual(self, H) -> float:
        """Relative residual ``||HP - PD||_F / ||H||_F``."""
        H = as_matrix(H)
        r = np.linalg.norm(H @ self.P - self.P * self.eigenvalues[None, :])
        scale = np.linalg.norm(H)
        return float(r / scale) if scale > 0 else float(r)

    def eigen_coordinates(self, O) -> np.ndarray:
        """``P^-1 O P``: the operator in the eigenbasis, rows being Q-bras."""
        O = as_matrix(O, "operator")
        if O.shape[0] != self.n:
            raise DimensionMismatch(f"operator is {O.shape[0]}x{O.shape[0]}, spectrum has {self.n} levels")
        return self.Pinv @ O @ self.P

    def regauge(self, scales) -> "SpectralData":
        """Rescale eigenvector columns by nonzero complex factors."""
        s = as_vector(scales, self.n, "scales")
        if np.any(s == 0):
            raise ValueError("gauge scales must be nonzero")
        return spectral_from_eigenvectors(self.eigenvalues, self.P * s[None, :], gauge=GAUGE_CUSTOM)


def spectral_from_eigenvectors(eigenvalues, P, gauge: str = GAUGE_CUSTOM) -> SpectralData:
    """Wrap an explicit diagonalizer; used for gauge overrides."""
    lam = as_vector(eigenvalues, name="eigenvalues")
    P = as_matrix(P, "P")
    if P.shape[0] != lam.shape[0]:
        raise DimensionMismatch("eigenvalue count does not match P")
    Pinv = mat_inverse(P)
    return SpectralData(_frozen(lam), _frozen(P), _frozen(Pinv), float(np.linalg.cond(P)), gauge)


def eig(H, tol_eig: float = TOL_EIG, cond_ceiling: float = COND_CEILING) -> SpectralData:
    """Diagonalize ``H = P diag(lambda) P^-1`` in a reproducible gauge.

    LAPACK's ``zgeev`` does the Hessenberg reduction and shifted QR sweeps.
    Eigenvalues come back sorted by (Im descending, Re ascending), each
    eigenvector has unit norm with its largest component real and positive,
    and eigenvectors sharing an eigenvalue are orthonormalized first.
    """
    H = as_matrix(H, "H")
    scale = max(float(np.linalg.norm(H)), 1.0)
    lam, V = np.linalg.eig(H)

    raw_cond = np.linalg.cond(V / np.linalg.norm(V, axis=0)[None, :])
    if not np.isfinite(raw_cond) or raw_cond > cond_ceiling:
        raise NonDiagonalizable(f"eigenvector matrix condition {raw_cond:.3e} exceeds {cond_ceiling:.1e}")

    order = _order(lam, tol_eig * scale)
    lam, V = lam[order], V[:, order]

    for members in _clusters(lam, tol_eig * scale):
        if len(members) > 1:
            q, _ = np.linalg.qr(V[:, members])
            V[:, members] = q

    P = fix_gauge(V)
    cond_P = float(np.linalg.cond(P))
    if cond_P > cond_ceiling:
        raise NonDiagonalizable(f"cond(P) = {cond_P:.3e} exceeds {cond_ceiling:.1e}")
    S = SpectralData(_frozen(lam), _frozen(P), _frozen(mat_inverse(P)), cond_P)
    if S.residual(H) > tol_eig:
        raise NonDiagonalizable(f"eigen-residual {S.residual(H):.3e} exceeds {tol_eig:g}; H looks defective")
    return S


def trace_weighted_exp(S: SpectralData, Q, O, t: float, hbar: float = 1.0, log_scale: float = 0.0) -> complex:
    """Exact ``Tr(exp(-iHt/hbar) O) * exp(-log_scale)`` summed over every eigenstate.

    ``Q`` is accepted for symmetry with the rest of the API; the Q-bras are
    the rows of ``P^-1`` whenever Q was built from ``S``.
    """
    diag = np.diag(S.eigen_coordinates(O))
    if Q is not None and np.shape(getattr(Q, "Q", Q))[0] != S.n:
        raise DimensionMismatch("Q metric dimension does not match the spectrum")
    phases = np.exp(-1j * S.eigenvalues * t / hbar - log_scale)
    return complex(np.sum(phases * diag))
