import numpy as np
import pytest

from qfsp import Presentation, build_standard
from qfsp.quasifree import fock_form, thermal_form


@pytest.fixture
def diag1():
    return build_standard(1, Presentation.DIAGONAL)


@pytest.fixture
def diag2():
    return build_standard(2, Presentation.DIAGONAL)


@pytest.fixture
def pos1():
    return build_standard(1, Presentation.POSITION)


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


def squeeze(r: float) -> np.ndarray:
    """Real squeeze matrix in the 1-mode Diagonal coordinates."""
    return np.array([[np.cosh(r), np.sinh(r)], [np.sinh(r), np.cosh(r)]],
                    dtype=complex)


def real_vec(rng, amp: float) -> np.ndarray:
    """Gamma-fixed vector of the 1-mode Diagonal space with |a| <= amp."""
    a = amp * (rng.uniform(0.2, 1.0)) * np.exp(1j * rng.uniform(0, 2 * np.pi))
    return np.array([a, np.conj(a)])


def random_kappa_real(ps, rng, scale=0.3) -> np.ndarray:
    """Random real-matrix symplectic map via a purely imaginary Hamiltonian."""
    import scipy.linalg as sla
    from qfsp.sp_algebra import hamiltonian_projection

    raw = (rng.normal(size=(ps.dim, ps.dim))
           + 1j * rng.normal(size=(ps.dim, ps.dim))) * scale
    h = hamiltonian_projection(ps, raw)
    h_imag = 0.5 * (h.op - np.conj(h.op))
    return sla.expm(1j * h_imag).real.astype(complex)
