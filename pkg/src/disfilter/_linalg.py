"""Small dense linear-algebra helpers shared by the filter and analysis code."""

import numpy as np

SYM_TOL = 1e-10
PSD_TOL = 1e-10


class NumericalError(ArithmeticError):
    """A matrix lost a property (definiteness, invertibility) the algorithm needs."""


def symmetrize(X):
    return 0.5 * (X + np.swapaxes(X, -1, -2))


def asymmetry(X):
    """Largest absolute entry of X - X^T."""
    X = np.asarray(X, dtype=float)
    if X.size == 0:
        return 0.0
    return float(np.max(np.abs(X - np.swapaxes(X, -1, -2))))


def check_psd(X, name="matrix", sym_tol=1e-12, eig_tol=PSD_TOL, strict=False):
    """Validate a symmetric (semi)definite matrix and return it as a float array.

    Raises ``ValueError`` naming the offending eigenvalue.
    """
    X = np.array(X, dtype=float)
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise ValueError(f"{name} must be square, got shape {X.shape}")
    if asymmetry(X) > sym_tol * max(1.0, float(np.max(np.abs(X), initial=0.0))):
        raise ValueError(f"{name} is not symmetric (max |X - X^T| = {asymmetry(X):.3e})")
    if X.shape[0] == 0:
        return X
    lam = np.linalg.eigvalsh(symmetrize(X))
    if strict and lam[0] <= 0:
        raise ValueError(f"{name} is not positive definite: smallest eigenvalue {lam[0]:.6e}")
    if lam[0] < -eig_tol:
        raise ValueError(f"{name} is not positive semidefinite: eigenvalue {lam[0]:.6e}")
    return X


def psd_sqrt(X):
    """Symmetric PSD square root via eigendecomposition (works for singular X)."""
    lam, U = np.linalg.eigh(symmetrize(np.asarray(X, dtype=float)))
    lam = np.clip(lam, 0.0, None)
    return (U * np.sqrt(lam)) @ U.T


def psd_factor(X, rtol=1e-12):
    """Thin factor F with F @ F.T == X, keeping only the nonzero eigen-directions."""
    lam, U = np.linalg.eigh(symmetrize(np.asarray(X, dtype=float)))
    keep = lam > rtol * max(float(lam[-1]) if lam.size else 0.0, 0.0)
    if not np.any(keep):
        return np.zeros((X.shape[0], 0))
    return U[:, keep] * np.sqrt(lam[keep])


def _chol(X):
    try:
        return np.linalg.cholesky(X)
    except np.linalg.LinAlgError:
        pass
    d = X.shape[-1]
    tr = np.trace(X, axis1=-2, axis2=-1)
    jitter = 1e-12 * np.abs(tr)[..., None, None] / d * np.eye(d)
    try:
        return np.linalg.cholesky(X + jitter)
    except np.linalg.LinAlgError:
        lam = np.linalg.eigvalsh(symmetrize(X))
        raise NumericalError(
            f"matrix is not positive definite (smallest eigenvalue {lam.min():.6e})"
        ) from None


def spd_inv(X):
    """Inverse of a (stack of) SPD matrices by Cholesky factorisation.

    A single jitter of ``1e-12 * trace / dim`` is added if the first
    factorisation fails. The result is exactly symmetric.
    """
    X = symmetrize(np.asarray(X, dtype=float))
    L = _chol(X)
    eye = np.broadcast_to(np.eye(X.shape[-1]), X.shape)
    Linv = np.linalg.solve(L, eye)
    return np.swapaxes(Linv, -1, -2) @ Linv


def spd_solve(X, B):
    """Solve X Z = B for SPD X."""
    X = symmetrize(np.asarray(X, dtype=float))
    L = _chol(X)
    Y = np.linalg.solve(L, B)
    return np.linalg.solve(np.swapaxes(L, -1, -2), Y)


def min_eig(X):
    """Smallest eigenvalue of a symmetric matrix (or of each in a stack)."""
    return np.linalg.eigvalsh(symmetrize(np.asarray(X, dtype=float)))[..., 0]


def spectral_radius(X):
    X = np.asarray(X, dtype=float)
    if X.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(X))))
