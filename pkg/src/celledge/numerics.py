"""Small dense complex linear algebra used by every solver.

The matrices handled here are interference-plus-noise covariances the size
of a user's receive array (a handful of antennas), so everything is direct
factorization; there is deliberately no iterative machinery.
"""

import numpy as np
import scipy.linalg

# Hermitian deviation larger than this is treated as a caller bug; smaller
# deviations are repaired by averaging with the conjugate transpose.
HERMITIAN_TOL = 1e-8


class NumericsError(ValueError):
    pass


def _as_complex_matrix(a):
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim != 2:
        raise NumericsError(f"expected a matrix, got ndim={a.ndim}")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise NumericsError(f"matrix dimensions must be >= 1, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NumericsError("matrix has non-finite entries")
    return a


def as_hermitian_pd(a, herm_tol=HERMITIAN_TOL):
    """Validate and symmetrize a Hermitian positive-definite matrix.

    Deviations from Hermitian symmetry up to `herm_tol` (relative) are
    repaired silently by averaging; larger deviations raise. Positive
    definiteness itself is checked where the matrix is factorized.
    """
    a = _as_complex_matrix(a)
    if a.shape[0] != a.shape[1]:
        raise NumericsError(f"matrix must be square, got {a.shape}")
    scale = np.linalg.norm(a)
    dev = np.linalg.norm(a - a.conj().T)
    if dev > herm_tol * max(scale, 1e-300):
        raise NumericsError(f"matrix is not Hermitian (relative deviation {dev / max(scale, 1e-300):.3e})")
    return 0.5 * (a + a.conj().T)


def pd_solve(a, b):
    """Solve A x = b for Hermitian positive-definite A via Cholesky."""
    a = as_hermitian_pd(a)
    b = np.asarray(b, dtype=np.complex128)
    if b.shape[0] != a.shape[0]:
        raise NumericsError(f"dimension mismatch: A is {a.shape}, b has leading dim {b.shape[0]}")
    if not np.all(np.isfinite(b)):
        raise NumericsError("right-hand side has non-finite entries")
    try:
        factor = scipy.linalg.cho_factor(a, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError as err:
        raise NumericsError(f"matrix is not positive definite: {err}") from err
    return scipy.linalg.cho_solve(factor, b, check_finite=False)


def quad_form(x, a):
    """Return Re(x^H A x) for Hermitian A, asserting the imaginary residue is noise."""
    a = as_hermitian_pd(a)
    x = np.asarray(x, dtype=np.complex128)
    if x.shape[0] != a.shape[0]:
        raise NumericsError(f"dimension mismatch: A is {a.shape}, x has leading dim {x.shape[0]}")
    v = np.vdot(x, a @ x)
    if abs(v.imag) > 1e-10 * abs(v) + 1e-30:
        raise NumericsError(f"quadratic form has non-negligible imaginary part {v.imag:.3e}")
    return float(v.real)
