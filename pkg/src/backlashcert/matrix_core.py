"""Dense linear-algebra kernels for small state dimensions.

Everything here works on plain ``numpy`` arrays. Matrices are expected to
be small (order well below 64), so no attempt is made at structured or
sparse paths.
"""

import numpy as np
import scipy.linalg

from .errors import DomainError, HypothesisError, NumericalError

SYMMETRY_RTOL = 1e-10


def symmetrizer(M):
    """Return ``(M + M.T) / 2``."""
    M = np.asarray(M, dtype=float)
    return 0.5 * (M + M.T)


def _as_square(M, name="M"):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DomainError(f"{name} must be square, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise DomainError(f"{name} has non-finite entries")
    return M


def _check_symmetric(M, name="M"):
    scale = np.linalg.norm(M)
    if np.linalg.norm(M - M.T) > SYMMETRY_RTOL * max(scale, 1e-300):
        raise DomainError(f"{name} is not symmetric")


def expm(A, t=1.0):
    """Matrix exponential ``exp(t A)``.

    Scaling-and-squaring with a Pade kernel (delegated to
    :func:`scipy.linalg.expm`). Raises :class:`NumericalError` on overflow.
    """
    A = _as_square(A, "A")
    with np.errstate(over="ignore", invalid="ignore"):
        out = scipy.linalg.expm(float(t) * A)
    if not np.all(np.isfinite(out)):
        raise NumericalError(f"exp(tA) overflowed for t={t}, ||A||={np.linalg.norm(A):.3g}")
    return out


def expm_and_psi(A, t):
    """Return ``(exp(tA), t * Psi(tA))`` from one augmented exponential.

    The upper-right block of ``exp(t [[A, I], [0, 0]])`` equals
    ``int_0^t exp(sA) ds = t Psi(tA)``, which stays well defined when ``A``
    is singular.
    """
    A = _as_square(A, "A")
    n = A.shape[0]
    aug = np.zeros((2 * n, 2 * n))
    aug[:n, :n] = A
    aug[:n, n:] = np.eye(n)
    big = expm(aug, t)
    return big[:n, :n], big[:n, n:]


def psi_matrix(A, t):
    """Matrix extension of ``Psi(u) = (e^u - 1)/u`` evaluated at ``tA``.

    ``xi(t) = t * psi_matrix(A, t) @ omega`` solves ``xi' = A xi + omega``
    with ``xi(0) = 0``.

    >>> float(psi_matrix([[1.0]], 1.0)[0, 0])  # e - 1
    1.718281828459045
    """
    A = _as_square(A, "A")
    n = A.shape[0]
    t = float(t)
    if t == 0.0:
        return np.eye(n)
    _, integral = expm_and_psi(A, t)
    return integral / t


def psi_apply(A, t, omega):
    """Return ``t Psi(tA) omega`` via an (n+1)-dimensional embedding."""
    A = _as_square(A, "A")
    omega = np.asarray(omega, dtype=float).reshape(-1)
    n = A.shape[0]
    aug = np.zeros((n + 1, n + 1))
    aug[:n, :n] = A
    aug[:n, n] = omega
    return expm(aug, t)[:n, n]


def symmetric_eigs(M):
    """Ascending real eigenvalues of a symmetric matrix."""
    M = _as_square(M)
    _check_symmetric(M)
    return np.linalg.eigvalsh(symmetrizer(M))


def spectral_abscissa(F):
    """Largest real part of the eigenvalues of ``F``."""
    F = _as_square(F, "F")
    try:
        eigs = np.linalg.eigvals(F)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigenvalue iteration failed: {exc}") from exc
    return float(np.max(eigs.real))


def is_hurwitz(F):
    return spectral_abscissa(F) < 0.0


def lyapunov_certificate(F, lam, check_tol=1e-9):
    """Positive definite ``Pi`` with ``S(Pi F) <= -lam Pi``.

    Solves the Lyapunov equation ``(F + lam I)^T Pi + Pi (F + lam I) = -I``,
    so that ``S(Pi F) = -lam Pi - I/2``. The inequality is re-checked on the
    returned matrix.

    Raises
    ------
    HypothesisError
        If ``F`` is not Hurwitz or ``lam`` lies outside ``(0, |mu|)``.
    NumericalError
        If the solve fails or the a-posteriori check does not pass.
    """
    F = _as_square(F, "F")
    n = F.shape[0]
    mu = spectral_abscissa(F)
    if mu >= 0.0:
        raise HypothesisError(f"F is not Hurwitz (spectral abscissa {mu:.6g})")
    if not 0.0 < lam < abs(mu):
        raise HypothesisError(f"rate lambda={lam:.6g} must satisfy 0 < lambda < |mu| = {abs(mu):.6g}")
    shifted = F + lam * np.eye(n)
    try:
        Pi = scipy.linalg.solve_continuous_lyapunov(shifted.T, -np.eye(n))
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"Lyapunov solve failed: {exc}") from exc
    Pi = symmetrizer(Pi)
    if not np.all(np.isfinite(Pi)) or np.linalg.eigvalsh(Pi)[0] <= 0.0:
        raise NumericalError("Lyapunov solution is not positive definite")
    residual = np.linalg.eigvalsh(symmetrizer(Pi @ F) + lam * Pi)[-1]
    if residual > check_tol * max(1.0, np.linalg.norm(Pi)):
        raise NumericalError(f"Lyapunov inequality check failed: lambda_max = {residual:.3e}")
    return Pi


def exponential_decay_constant(F, lam):
    """Return ``kappa`` with ``||exp(sF)|| <= kappa * exp(-lam s)`` for ``s >= 0``.

    Derived from the Lyapunov certificate: ``kappa = sqrt(cond(Pi))``.
    """
    ev = np.linalg.eigvalsh(lyapunov_certificate(F, lam))
    return float(np.sqrt(ev[-1] / ev[0]))


def block_spectral_max(a, b, g):
    """Largest eigenvalue of ``[[a I_n, g], [g^T, b I_p]]`` in closed form.

    Equals ``(a + b)/2 + sqrt(||g||^2 + ((a - b)/2)^2)`` with ``||g||`` the
    spectral norm.
    """
    g = np.atleast_2d(np.asarray(g, dtype=float))
    gnorm = np.linalg.norm(g, 2) if g.size else 0.0
    return 0.5 * (a + b) + np.hypot(gnorm, 0.5 * (a - b))


def block_matrix(a, b, g):
    """Assemble ``[[a I_n, g], [g^T, b I_p]]``."""
    g = np.atleast_2d(np.asarray(g, dtype=float))
    n, p = g.shape
    return np.block([[a * np.eye(n), g], [g.T, b * np.eye(p)]])
