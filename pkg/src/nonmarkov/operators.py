"""Dense Hermitian linear algebra and state functionals.

Everything here operates on plain complex numpy arrays.  States are density
matrices (Hermitian, PSD, unit trace), observables and witnesses are Hermitian
matrices.  All spectral work goes through ``numpy.linalg.eigh``; eigenvalues
below the support cutoff are treated as exact zeros so that logarithms and
fractional powers stay finite near rank deficiency.  Divergences use the
natural logarithm throughout.
"""

from __future__ import annotations

import numpy as np

# Hermiticity tolerance, relative to the largest entry magnitude.
HERMITICITY_TOL = 1e-12
# Density-matrix validation: min eigenvalue and trace deviation.
DENSITY_TOL = 1e-10
# Minimum eigenvalue below which a matrix is rejected as not PSD.
PSD_TOL = 1e-8
# Eigenvalues below this (relative to the spectral scale) count as exact zeros.
ZERO_EIG_TOL = 1e-12
# Sigma eigenvalues below this count as outside the support for divergences.
SUPPORT_TOL = 1e-10


class NotPSDError(ValueError):
    """Raised when an operation requires a positive semidefinite input."""


def hermitian_part(a: np.ndarray) -> np.ndarray:
    """Return (A + A†)/2."""
    a = np.asarray(a, dtype=complex)
    return 0.5 * (a + a.conj().T)


def is_hermitian(a: np.ndarray, tol: float = HERMITICITY_TOL) -> bool:
    """Check A = A† within ``tol`` relative to the largest entry magnitude."""
    a = np.asarray(a)
    scale = max(np.abs(a).max(), 1.0) if a.size else 1.0
    return bool(np.abs(a - a.conj().T).max() <= tol * scale)


def check_hermitian(a: np.ndarray, name: str = "operator") -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {a.shape}")
    if not is_hermitian(a):
        raise ValueError(f"{name} is not Hermitian within tolerance {HERMITICITY_TOL}")
    return a


def check_density_matrix(rho: np.ndarray, name: str = "state") -> np.ndarray:
    """Validate Hermiticity, positivity (≥ -1e-10) and unit trace (±1e-10)."""
    rho = check_hermitian(rho, name)
    w = np.linalg.eigvalsh(hermitian_part(rho))
    if w.min() < -DENSITY_TOL:
        raise ValueError(f"{name} has negative eigenvalue {w.min():.3e}")
    tr = float(np.trace(rho).real)
    if abs(tr - 1.0) > DENSITY_TOL:
        raise ValueError(f"{name} has trace {tr!r}, expected 1")
    return rho


def _check_same_dim(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")


def spectral_decomposition(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (descending) and matching orthonormal eigenvector columns."""
    w, v = np.linalg.eigh(hermitian_part(a))
    order = np.argsort(w)[::-1]
    return w[order], v[:, order]


def trace_norm(a: np.ndarray) -> float:
    """Trace norm ||A||_1; for Hermitian A this is the sum of |eigenvalues|."""
    w = np.linalg.eigvalsh(hermitian_part(a))
    return float(np.abs(w).sum())


def operator_norm(a: np.ndarray) -> float:
    """Operator norm ||A||; for Hermitian A this is max |eigenvalue|."""
    w = np.linalg.eigvalsh(hermitian_part(a))
    return float(np.abs(w).max())


def matrix_function(a: np.ndarray, kind: str, power: float | None = None) -> np.ndarray:
    """Apply sqrt, log or a fractional power to a PSD Hermitian matrix.

    Eigenvalues below the support cutoff are clamped to exact zero before the
    scalar function is applied; ``log`` maps clamped zeros to 0 (support
    projection is owned by the divergence routines).  Raises :class:`NotPSDError`
    when the minimum eigenvalue is below ``-1e-8``.
    """
    w, v = np.linalg.eigh(hermitian_part(a))
    if w.size and w.min() < -PSD_TOL:
        raise NotPSDError(f"matrix_function({kind}): min eigenvalue {w.min():.3e} < -{PSD_TOL}")
    scale = max(np.abs(w).max(), 1.0) if w.size else 1.0
    w = np.where(w < ZERO_EIG_TOL * scale, 0.0, w)
    if kind == "sqrt":
        fw = np.sqrt(w)
    elif kind == "log":
        fw = np.where(w > 0, np.log(np.where(w > 0, w, 1.0)), 0.0)
    elif kind == "power":
        if power is None:
            raise ValueError("matrix_function('power') requires the exponent")
        fw = np.where(w > 0, np.where(w > 0, w, 1.0) ** power, 0.0)
    else:
        raise ValueError(f"unknown matrix function {kind!r}")
    return (v * fw) @ v.conj().T


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    """D(rho, sigma) = ||rho - sigma||_1 / 2."""
    _check_same_dim(np.asarray(rho), np.asarray(sigma))
    return 0.5 * trace_norm(np.asarray(rho) - np.asarray(sigma))


def fidelity(rho: np.ndarray, sigma: np.ndarray) -> float:
    """Uhlmann fidelity (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2."""
    rho = np.asarray(rho, dtype=complex)
    sigma = np.asarray(sigma, dtype=complex)
    _check_same_dim(rho, sigma)
    s = matrix_function(rho, "sqrt")
    w = np.linalg.eigvalsh(hermitian_part(s @ sigma @ s))
    w = np.clip(w, 0.0, None)
    return float(np.sqrt(w).sum() ** 2)


def _eig_state(rho: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """State eigensystem with the support cutoff applied (tiny eigenvalues are
    exact zeros, so fractional powers cannot amplify eigensolver noise)."""
    w, v = np.linalg.eigh(hermitian_part(rho))
    scale = max(np.abs(w).max(), 1.0) if w.size else 1.0
    w = np.where(w < ZERO_EIG_TOL * scale, 0.0, w)
    return w, v


def relative_entropy(rho: np.ndarray, sigma: np.ndarray) -> float:
    """S(rho||sigma) = Tr rho (log rho - log sigma), natural log.

    Returns ``inf`` when the support of rho is not contained in the support of
    sigma (sigma eigenvalues below 1e-10 carrying nonzero rho weight).
    """
    rho = np.asarray(rho, dtype=complex)
    sigma = np.asarray(sigma, dtype=complex)
    _check_same_dim(rho, sigma)
    p, u = _eig_state(rho)
    q, v = _eig_state(sigma)
    overlap = np.abs(u.conj().T @ v) ** 2  # overlap[i, j] = |<u_i|v_j>|^2
    kernel = q < SUPPORT_TOL
    if kernel.any() and float(p @ overlap[:, kernel].sum(axis=1)) > SUPPORT_TOL:
        return float("inf")
    plogp = float(np.sum(p[p > 0] * np.log(p[p > 0])))
    logq = np.where(kernel, 0.0, np.log(np.where(kernel, 1.0, q)))
    cross = float(p @ (overlap[:, ~kernel] @ logq[~kernel]))
    return plogp - cross


def renyi_relative_entropy(rho: np.ndarray, sigma: np.ndarray, alpha: float) -> float:
    """Renyi relative entropy log(Tr rho^a sigma^(1-a)) / (a - 1).

    Restricted to the channel-monotone range alpha in [0,1) u (1,2].  For
    alpha > 1 a support violation yields +inf.
    """
    if not (0.0 <= alpha < 1.0 or 1.0 < alpha <= 2.0):
        raise ValueError(f"alpha must lie in [0,1) u (1,2], got {alpha}")
    rho = np.asarray(rho, dtype=complex)
    sigma = np.asarray(sigma, dtype=complex)
    _check_same_dim(rho, sigma)
    p, u = _eig_state(rho)
    q, v = _eig_state(sigma)
    rho_a = (u * p**alpha) @ u.conj().T
    if alpha > 1.0:
        overlap = np.abs(u.conj().T @ v) ** 2
        kernel = q < SUPPORT_TOL
        if kernel.any() and float(p @ overlap[:, kernel].sum(axis=1)) > SUPPORT_TOL:
            return float("inf")
        q_pow = np.where(kernel, 0.0, np.where(kernel, 1.0, q) ** (1.0 - alpha))
    else:
        q_pow = np.where(q > 0, np.where(q > 0, q, 1.0) ** (1.0 - alpha), 0.0)
    sigma_b = (v * q_pow) @ v.conj().T
    val = float(np.trace(rho_a @ sigma_b).real)
    if val <= 0.0:
        return float("inf")
    return float(np.log(val) / (alpha - 1.0))


def tsallis_relative_entropy(rho: np.ndarray, sigma: np.ndarray, q: float) -> float:
    """Tsallis relative entropy (1 - Tr rho^q sigma^(1-q)) / (1 - q), q in [0,1)."""
    if not 0.0 <= q < 1.0:
        raise ValueError(f"q must lie in [0,1), got {q}")
    rho = np.asarray(rho, dtype=complex)
    sigma = np.asarray(sigma, dtype=complex)
    _check_same_dim(rho, sigma)
    p, u = _eig_state(rho)
    s, v = _eig_state(sigma)
    rho_q = (u * p**q) @ u.conj().T
    s_pow = np.where(s > 0, np.where(s > 0, s, 1.0) ** (1.0 - q), 0.0)
    sigma_b = (v * s_pow) @ v.conj().T
    val = float(np.trace(rho_q @ sigma_b).real)
    return (1.0 - val) / (1.0 - q)


def von_neumann_entropy(rho: np.ndarray) -> float:
    """S(rho) = -Tr rho log rho with 0 log 0 := 0."""
    w = np.linalg.eigvalsh(hermitian_part(rho))
    w = w[w > 0]
    return float(-np.sum(w * np.log(w)))


def skew_information(rho: np.ndarray, x: np.ndarray, p: float = 0.5) -> float:
    """Wigner-Yanase-Dyson skew information -Tr [rho^p, X][rho^(1-p), X] / 2."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0,1), got {p}")
    rho = np.asarray(rho, dtype=complex)
    x = np.asarray(x, dtype=complex)
    _check_same_dim(rho, x)
    w, v = _eig_state(rho)
    a = (v * w**p) @ v.conj().T
    b = (v * w ** (1.0 - p)) @ v.conj().T
    ca = a @ x - x @ a
    cb = b @ x - x @ b
    return float(-0.5 * np.trace(ca @ cb).real)


def max_entangled_projector(dim: int) -> np.ndarray:
    """Projector onto (1/sqrt(d)) sum_i |i>|i> on the doubled space."""
    if dim < 2:
        raise ValueError("dim must be at least 2")
    psi = np.zeros(dim * dim, dtype=complex)
    psi[:: dim + 1] = 1.0 / np.sqrt(dim)
    return np.outer(psi, psi.conj())


def random_hermitian(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Gaussian random Hermitian matrix."""
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return hermitian_part(a)


def random_density_matrix(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Random full-rank state from the Ginibre ensemble."""
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


def random_pure_state(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unit vector."""
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)
