"""Classical multidimensional scaling spectrum of a set of embeddings:
double-centered squared-distance matrix, eigenvalues via cyclic Jacobi
rotations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nn import ContractViolation


def jacobi_eigenvalues(a, tol=1e-10, max_sweeps=100):
    """Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.

    Iterates sweeps until the largest off-diagonal magnitude drops below
    ``tol`` (relative to the Frobenius norm of the input).
    """
    a = np.array(a, dtype=np.float64)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ContractViolation("matrix must be square")
    if not np.allclose(a, a.T, atol=1e-12):
        raise ContractViolation("matrix must be symmetric")
    scale = max(np.linalg.norm(a), 1.0)
    for _ in range(max_sweeps):
        off = np.abs(a - np.diag(np.diag(a))).max() if n > 1 else 0.0
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= tol * scale * 1e-3:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rot_p = c * a[:, p] - s * a[:, q]
                rot_q = s * a[:, p] + c * a[:, q]
                a[:, p], a[:, q] = rot_p, rot_q
                rot_p = c * a[p, :] - s * a[q, :]
                rot_q = s * a[p, :] + c * a[q, :]
                a[p, :], a[q, :] = rot_p, rot_q
    return np.diag(a).copy()


@dataclass
class SpectrumReport:
    eigenvalues: np.ndarray  # descending
    top2_mass: float

    @property
    def n_points(self):
        return len(self.eigenvalues)


def mds_spectrum(embeddings, tol=1e-10):
    """Spectrum of the double-centered squared-distance (Gram) matrix of a
    point set; dominant eigenvalues count the intrinsic Euclidean
    dimension."""
    x = np.asarray(embeddings, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ContractViolation("need at least 2 embeddings")
    n = x.shape[0]
    sq = np.sum(x * x, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.fill_diagonal(d2, 0.0)
    j = np.eye(n) - np.ones((n, n)) / n
    b = -0.5 * j @ d2 @ j
    b = 0.5 * (b + b.T)
    eigs = np.sort(jacobi_eigenvalues(b, tol=tol))[::-1]
    total = np.sum(np.abs(eigs))
    top2 = float(eigs[0] + (eigs[1] if n > 1 else 0.0))
    mass = top2 / total if total > 0 else 0.0
    return SpectrumReport(eigenvalues=eigs, top2_mass=float(mass))
