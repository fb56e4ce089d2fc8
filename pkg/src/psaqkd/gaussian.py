"""Covariance-matrix calculus for zero-mean Gaussian states.

All matrices are in shot-noise units with quadrature ordering
``(x1, p1, x2, p2, ...)``; the vacuum is the identity.
"""

from __future__ import annotations

import functools

import numpy as np

from .errors import DomainError, NumericalDomainError

SIGMA_Z = np.diag([1.0, -1.0])
_PAIR_TOL = 1e-8
_PURITY_CLAMP = 1e-9


def n_modes(gamma: np.ndarray) -> int:
    dim = gamma.shape[0]
    if gamma.ndim != 2 or gamma.shape[1] != dim or dim % 2:
        raise ValueError(f"expected a square matrix of even size, got shape {gamma.shape}")
    return dim // 2


@functools.lru_cache(maxsize=None)
def omega(n: int) -> np.ndarray:
    """Symplectic form: block-diagonal stack of ``[[0, 1], [-1, 0]]`` (read-only, cached)."""
    w = np.kron(np.eye(n), np.array([[0.0, 1.0], [-1.0, 0.0]]))
    w.flags.writeable = False
    return w


def vacuum(n: int) -> np.ndarray:
    return np.eye(2 * n)


def thermal(V: float) -> np.ndarray:
    """Single-mode thermal state with quadrature variance ``V``."""
    return V * np.eye(2)


def epr_state(V: float) -> np.ndarray:
    """Two-mode squeezed vacuum with quadrature variance ``V`` on each mode."""
    if V < 1:
        raise DomainError(f"unphysical EPR variance: V={V} < 1")
    c = np.sqrt(V * V - 1.0)
    return np.block([[V * np.eye(2), c * SIGMA_Z], [c * SIGMA_Z, V * np.eye(2)]])


def _check_index(idx: int, n: int) -> None:
    if not 0 <= idx < n:
        raise ValueError(f"mode index {idx} out of range for {n} modes")


def beamsplitter(eta: float, n_modes: int, mode_a: int, mode_b: int, dtype=float) -> np.ndarray:
    """Beamsplitter of transmittance ``eta`` mixing ``mode_a`` (signal) with ``mode_b``.

    On the two modes the transform is ``[[t I, r I], [-r I, t I]]`` with
    ``t = sqrt(eta)`` and ``r = sqrt(1 - eta)``; identity elsewhere. With
    ``dtype=np.longdouble`` the identity ``t^2 + r^2 = 1`` holds to extended
    precision, which matters once the state carries very large variances.
    """
    if not 0.0 <= eta <= 1.0:
        raise DomainError(f"beamsplitter transmittance must lie in [0, 1], got {eta}")
    if mode_a == mode_b:
        raise ValueError("beamsplitter needs two distinct modes")
    _check_index(mode_a, n_modes)
    _check_index(mode_b, n_modes)
    one = dtype(1)
    t, r = np.sqrt(dtype(eta)), np.sqrt(one - dtype(eta))
    Y = np.eye(2 * n_modes, dtype=dtype)
    a, b = 2 * mode_a, 2 * mode_b
    for k in (0, 1):
        Y[a + k, a + k] = t
        Y[a + k, b + k] = r
        Y[b + k, a + k] = -r
        Y[b + k, b + k] = t
    return Y


def psa(g: float, n_modes: int, mode: int, dtype=float) -> np.ndarray:
    """Noiseless phase-sensitive amplifier: ``x -> sqrt(g) x``, ``p -> p / sqrt(g)``."""
    if g < 1:
        raise DomainError(f"deamplifying gain: g={g} < 1")
    _check_index(mode, n_modes)
    Y = np.eye(2 * n_modes, dtype=dtype)
    k = 2 * mode
    root = np.sqrt(dtype(g))
    Y[k, k] = root
    Y[k + 1, k + 1] = 1 / root
    return Y


def attach_vacuum(gamma: np.ndarray) -> np.ndarray:
    """Append one vacuum mode with no correlations to the existing ones."""
    dim = 2 * n_modes(gamma)
    out = np.eye(dim + 2, dtype=gamma.dtype)
    out[:dim, :dim] = gamma
    return out


def apply(transform: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    """Return ``Y gamma Y^T``."""
    if transform.shape != gamma.shape:
        raise ValueError(f"dimension mismatch: transform {transform.shape} vs state {gamma.shape}")
    return transform @ gamma @ transform.T


def select_modes(gamma: np.ndarray, modes: list[int]) -> np.ndarray:
    """Reduced (and reordered) covariance matrix on the listed modes."""
    n = n_modes(gamma)
    for m in modes:
        _check_index(m, n)
    idx = [2 * m + q for m in modes for q in (0, 1)]
    return gamma[np.ix_(idx, idx)]


def symplectic_eigenvalues(gamma: np.ndarray) -> np.ndarray:
    """Symplectic spectrum of ``gamma``, sorted descending.

    The eigenvalues of ``Omega gamma`` come in pairs ``+-i nu``; their moduli
    are sorted and every second entry is kept.
    """
    n = n_modes(gamma)
    try:
        np.linalg.cholesky(gamma)
    except np.linalg.LinAlgError as exc:
        raise NumericalDomainError("covariance matrix is not positive-definite") from exc
    mods = np.sort(np.abs(np.linalg.eigvals(omega(n) @ gamma)))
    lo, hi = mods[0::2], mods[1::2]
    if np.any(np.abs(hi - lo) > _PAIR_TOL * np.maximum(1.0, hi)):
        raise NumericalDomainError(f"symplectic spectrum failed to pair up: {mods}")
    return ((lo + hi) / 2)[::-1]


def is_physical(gamma: np.ndarray, tol: float = 1e-9) -> bool:
    return bool(symplectic_eigenvalues(gamma).min() >= 1.0 - tol)


def g_function(x: float) -> float:
    """``G(x) = (x+1) log2(x+1) - x log2(x)`` in bits, with ``G(0) = 0``."""
    if x < 0:
        raise DomainError(f"G is undefined for negative argument {x}")
    if x == 0:
        return 0.0
    return float((x + 1.0) * np.log2(x + 1.0) - x * np.log2(x))


def entropy_from_spectrum(nus) -> float:
    """Von Neumann entropy (bits) of a Gaussian state from its symplectic spectrum."""
    total = 0.0
    for nu in nus:
        # values within 1e-9 below 1 are float noise around a pure mode
        total += g_function((max(float(nu), 1.0) - 1.0) / 2.0)
    return total


def von_neumann_entropy(gamma: np.ndarray) -> float:
    return entropy_from_spectrum(symplectic_eigenvalues(gamma))


def homodyne_condition(gamma: np.ndarray, measured_mode: int, quadrature: str = "x") -> np.ndarray:
    """Covariance of the remaining modes after homodyning one quadrature of ``measured_mode``.

    Implements ``gamma_rest - c c^T / V_q``, where ``c`` holds the covariances
    between the remaining quadratures and the measured one. This is the
    Moore-Penrose form ``sigma (X gamma_m X)^MP sigma^T`` with ``X = diag(1, 0)``
    (or ``diag(0, 1)`` for ``p``).
    """
    n = n_modes(gamma)
    if n < 2:
        raise ValueError("homodyne conditioning needs at least two modes")
    _check_index(measured_mode, n)
    if quadrature not in ("x", "p"):
        raise ValueError(f"quadrature must be 'x' or 'p', got {quadrature!r}")
    q = 2 * measured_mode + (0 if quadrature == "x" else 1)
    v_q = gamma[q, q]
    if v_q <= 0:
        raise NumericalDomainError(f"measured quadrature variance must be positive, got {v_q}")
    rest = [i for i in range(2 * n) if i not in (2 * measured_mode, 2 * measured_mode + 1)]
    c = gamma[rest, q]
    out = gamma[np.ix_(rest, rest)] - np.outer(c, c) / v_q
    return (out + out.T) / 2
