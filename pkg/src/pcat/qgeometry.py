"""The metric ``Q = (P^dagger)^-1 P^-1`` and everything measured with it.

Under ``<u|_Q v> = u^dagger Q v`` the eigenvectors of a diagonalizable ``H``
are orthonormal and ``H`` is normal, whatever its ordinary normality.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch
from .linalg import SpectralData, as_matrix, as_vector, mat_inverse


@dataclass(frozen=True)
class QMetric:
    """``Q = M^dagger M`` kept together with its factor.

    Products with ``Q`` go through ``M`` and ``M^-1`` so rounding grows with
    ``cond(M)`` rather than ``cond(Q) = cond(M)^2``.
    """

    Q: np.ndarray
    Qinv: np.ndarray
    source_gauge: str
    M: np.ndarray | None = None
    Minv: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.Q.shape[0]

    def _check(self, k: int, what: str) -> None:
        if k != self.n:
            raise DimensionMismatch(f"{what} has dimension {k}, metric has {self.n}")


def build_q_metric(S: SpectralData) -> QMetric:
    M = S.Pinv
    Q = M.conj().T @ M
    Q = 0.5 * (Q + Q.conj().T)
    Qinv = S.P @ S.P.conj().T
    Q.setflags(write=False)
    Qinv.setflags(write=False)
    return QMetric(Q, Qinv, S.gauge, S.Pinv, S.P)


def metric_from_matrix(Q) -> QMetric:
    """Wrap a user-supplied Hermitian positive-definite matrix (tests only).

    The factor is ``M = L^dagger`` from the Cholesky split ``Q = L L^dagger``.
    """
    Q = as_matrix(Q, "Q")
    L = np.linalg.cholesky(0.5 * (Q + Q.conj().T))
    M = L.conj().T
    return QMetric(Q, mat_inverse(Q), "explicit", M, mat_inverse(M))


def q_inner(u, v, Q: QMetric) -> complex:
    u = as_vector(u, Q.n, "u")
    v = as_vector(v, Q.n, "v")
    if Q.M is not None:
        return complex(np.vdot(Q.M @ u, Q.M @ v))
    return complex(u.conj() @ Q.Q @ v)


def q_adjoint(A, Q: QMetric) -> np.ndarray:
    """``Q^-1 A^dagger Q``, evaluated as ``M^-1 (M A M^-1)^dagger M``."""
    A = as_matrix(A)
    Q._check(A.shape[0], "operator")
    if Q.M is not None:
        return Q.Minv @ (Q.M @ A @ Q.Minv).conj().T @ Q.M
    return Q.Qinv @ A.conj().T @ Q.Q


def q_split(H, Q: QMetric) -> tuple[np.ndarray, np.ndarray]:
    """Q-Hermitian and anti-Q-Hermitian parts; they sum back to ``H``."""
    H = as_matrix(H)
    Hd = q_adjoint(H, Q)
    herm = 0.5 * (H + Hd)
    return herm, H - herm


def q_commutator_norm(H, Q: QMetric) -> float:
    """``||[H, H^{dagger Q}]||_F / ||H||_F^2``."""
    H = as_matrix(H)
    Hd = q_adjoint(H, Q)
    scale = np.linalg.norm(H) ** 2
    c = np.linalg.norm(H @ Hd - Hd @ H)
    return float(c / scale) if scale > 0 else float(c)


def is_q_normal(H, Q: QMetric, tol: float = 1e-9) -> bool:
    return q_commutator_norm(H, Q) <= tol


def random_q_hermitian(Q: QMetric, seed: int, scale: float = 1.0) -> np.ndarray:
    """Seeded sample ``(G + G^{dagger Q}) / 2`` with Gaussian complex ``G``."""
    rng = np.random.default_rng(seed)
    n = Q.n
    G = scale * (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2.0)
    return 0.5 * (G + q_adjoint(G, Q))


def q_hermitize(O, Q: QMetric) -> np.ndarray:
    O = as_matrix(O, "operator")
    return 0.5 * (O + q_adjoint(O, Q))


def biorthonormality_error(S: SpectralData, Q: QMetric) -> float:
    """``max_ij |<lambda_i|Q|lambda_j> - delta_ij|``."""
    if Q.M is not None:
        X = Q.M @ S.P
        G = X.conj().T @ X
    else:
        G = S.P.conj().T @ Q.Q @ S.P
    return float(np.max(np.abs(G - np.eye(S.n))))


def hermiticity_error(Q: QMetric) -> float:
    return float(np.linalg.norm(Q.Q - Q.Q.conj().T) / np.linalg.norm(Q.Q))


def min_eigenvalue(Q: QMetric) -> float:
    return float(np.linalg.eigvalsh(0.5 * (Q.Q + Q.Q.conj().T)).min())


def diagonal_elements(O, S: SpectralData) -> np.ndarray:
    """``<lambda_n|_Q O |lambda_n>`` for every n (gauge invariant)."""
    return np.diag(S.eigen_coordinates(O)).copy()
