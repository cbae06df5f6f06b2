"""JADE blind source separation for real signals.

Whitening by eigendecomposition of the sample covariance, then joint
diagonalization of the fourth-order cumulant matrices by Givens rotations.
"""

from __future__ import annotations

import numpy as np

from .core import SignalError


def whiten(X: np.ndarray, rcond: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
    """Return (W, Z) with Z = W @ X having identity covariance.

    X is (n_channels, n_samples) and is assumed zero-mean.
    """
    T = X.shape[1]
    cov = X @ X.T / T
    evals, evecs = np.linalg.eigh(cov)
    if evals[0] <= rcond * max(evals[-1], np.finfo(float).tiny):
        raise SignalError("degenerate channels")
    W = (evecs / np.sqrt(evals)).T
    return W, W @ X


def cumulant_matrices(Z: np.ndarray) -> list[np.ndarray]:
    """Fourth-order cumulant slices of whitened data, one per index pair i <= j."""
    m, T = Z.shape
    eye = np.eye(m)
    mats = []
    for i in range(m):
        zi = Z[i]
        Q = (Z * (zi * zi)) @ Z.T / T - eye - 2.0 * np.outer(eye[i], eye[i])
        mats.append(Q)
        for j in range(i):
            zij = zi * Z[j]
            Q = (Z * zij) @ Z.T / T - np.outer(eye[i], eye[j]) - np.outer(eye[j], eye[i])
            mats.append(np.sqrt(2.0) * Q)
    return mats


def joint_diagonalize(mats: list[np.ndarray], tol: float = 1e-8,
                      max_sweeps: int = 100) -> np.ndarray:
    """Orthogonal V such that V.T @ M @ V is as diagonal as possible for all M."""
    m = mats[0].shape[0]
    C = np.hstack(mats)  # m x (m * K)
    K = len(mats)
    V = np.eye(m)
    for _ in range(max_sweeps):
        rotated = False
        for p in range(m - 1):
            for q in range(p + 1, m):
                ip = np.arange(p, m * K, m)
                iq = np.arange(q, m * K, m)
                g = np.vstack([C[p, ip] - C[q, iq], C[p, iq] + C[q, ip]])
                G = g @ g.T
                ton = G[0, 0] - G[1, 1]
                toff = G[0, 1] + G[1, 0]
                theta = 0.5 * np.arctan2(toff, ton + np.hypot(ton, toff))
                if abs(theta) > tol:
                    rotated = True
                    c, s = np.cos(theta), np.sin(theta)
                    R = np.array([[c, -s], [s, c]])
                    pair = [p, q]
                    V[:, pair] = V[:, pair] @ R
                    C[pair, :] = R.T @ C[pair, :]
                    cp, cq = C[:, ip].copy(), C[:, iq].copy()
                    C[:, ip] = c * cp + s * cq
                    C[:, iq] = -s * cp + c * cq
        if not rotated:
            break
    return V


def jade(X: np.ndarray, tol: float = 1e-8, max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Separate the rows of ``X`` into independent sources.

    Returns (B, S) with S = B @ (X - mean) and unit-variance rows of S.
    """
    X = np.asarray(X, dtype=float)
    X = X - X.mean(axis=1, keepdims=True)
    W, Z = whiten(X)
    V = joint_diagonalize(cumulant_matrices(Z), tol, max_sweeps)
    B = V.T @ W
    return B, B @ X
