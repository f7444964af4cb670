"""Dense density-matrix primitives for small quantum systems.

All functions accept either a single ``(d, d)`` matrix or a stack of
matrices with shape ``(..., d, d)``; operators broadcast against the stack.
Two-qubit helpers use the computational basis ordered as
``|uu>, |ud>, |du>, |dd>`` where ``u`` is the +1 eigenstate of sigma_z.
"""

import logging
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)

# positivity monitor thresholds
POSITIVITY_WARN = -1e-8
POSITIVITY_ABORT = -1e-5


class DimensionError(ValueError):
    """Operator and state dimensions do not match."""


class TraceCollapseError(ArithmeticError):
    """Density matrix trace vanished, usually an integrator blow-up."""


class PositivityError(ArithmeticError):
    """Density matrix eigenvalue fell below the abort threshold."""


def _check_dims(A, rho):
    A = np.asarray(A)
    rho = np.asarray(rho)
    if A.shape[-2:] != rho.shape[-2:] or rho.shape[-1] != rho.shape[-2]:
        raise DimensionError(
            f"operator shape {A.shape[-2:]} incompatible with state shape {rho.shape[-2:]}")
    return A, rho


def dag(A):
    return np.conj(np.swapaxes(A, -1, -2))


def expectation(A, rho):
    """Return ``Tr[A rho]`` (complex, batched over leading axes)."""
    A, rho = _check_dims(A, rho)
    return np.einsum("...ij,...ji->...", A, rho)


def dissipator(A, rho):
    r"""Lindblad dissipator :math:`A\rho A^\dagger - \frac12\{A^\dagger A, \rho\}`."""
    A, rho = _check_dims(A, rho)
    Ad = dag(A)
    AdA = Ad @ A
    return A @ rho @ Ad - 0.5 * (AdA @ rho + rho @ AdA)


def innovation(A, rho):
    r"""Measurement superoperator :math:`A\rho + \rho A^\dagger - \mathrm{Tr}[(A + A^\dagger)\rho]\rho`."""
    A, rho = _check_dims(A, rho)
    Ad = dag(A)
    mean = expectation(A + Ad, rho)
    return A @ rho + rho @ Ad - mean[..., None, None] * rho


def commutator(A, B):
    return A @ B - B @ A


def anticommutator(A, B):
    return A @ B + B @ A


def normalize(rho):
    """Rescale ``rho`` to unit trace.

    Raises
    ------
    TraceCollapseError
        If any trace magnitude is below 1e-14.
    """
    rho = np.asarray(rho)
    tr = np.trace(rho, axis1=-2, axis2=-1)
    if np.any(np.abs(tr) < 1e-14):
        raise TraceCollapseError("density matrix trace collapsed to zero")
    return rho / tr[..., None, None]


def min_eigenvalue(rho):
    rho = np.asarray(rho)
    herm = 0.5 * (rho + dag(rho))
    return np.linalg.eigvalsh(herm)[..., 0]


def check_positivity(rho, warn=POSITIVITY_WARN, abort=POSITIVITY_ABORT):
    """Monitor positivity; warn below ``warn`` and raise below ``abort``.

    Returns the smallest eigenvalue found over the stack.
    """
    lam = float(np.min(min_eigenvalue(rho)))
    if lam < abort:
        raise PositivityError(f"minimum eigenvalue {lam:.3e} below {abort:.0e}")
    if lam < warn:
        logger.warning("density matrix eigenvalue %.3e below %.0e", lam, warn)
    return lam


def projector(psi):
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


# -- two-qubit structure ------------------------------------------------------

def two_qubit_ops():
    """Return single-site Pauli operators embedded in the two-qubit space.

    Returns a dict with keys ``sx1, sy1, sz1, sx2, sy2, sz2``.
    """
    ops = {}
    for name, s in (("x", SIGMA_X), ("y", SIGMA_Y), ("z", SIGMA_Z)):
        ops[f"s{name}1"] = np.kron(s, IDENTITY_2)
        ops[f"s{name}2"] = np.kron(IDENTITY_2, s)
    return ops


def collective_spin():
    """Return ``(Lx, Lz)`` with ``L = (sigma_1 + sigma_2) / 2``."""
    ops = two_qubit_ops()
    return 0.5 * (ops["sx1"] + ops["sx2"]), 0.5 * (ops["sz1"] + ops["sz2"])


_s = 1 / np.sqrt(2)
# columns: T_-1, T_0, T_1, S expressed in the computational basis
TRIPLET_BASIS = np.array([
    [0, 0, 1, 0],
    [0, _s, 0, _s],
    [0, _s, 0, -_s],
    [1, 0, 0, 0],
], dtype=complex)
TRIPLET_LABELS = ("T_-1", "T_0", "T_1", "S")


def triplet_state(label):
    """Ket for one of ``"T_-1", "T_0", "T_1", "S"``."""
    return TRIPLET_BASIS[:, TRIPLET_LABELS.index(label)].copy()


def to_triplet_basis(rho):
    """Express ``rho`` in the ordered basis ``(T_-1, T_0, T_1, S)``."""
    U = TRIPLET_BASIS
    return dag(U) @ np.asarray(rho) @ U


def from_triplet_basis(r):
    U = TRIPLET_BASIS
    return U @ np.asarray(r) @ dag(U)


_SYSY = np.kron(SIGMA_Y, SIGMA_Y)


def _psd_sqrt(M):
    w, v = np.linalg.eigh(M)
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)[..., None, :]) @ dag(v)


def concurrence(rho, tol=1e-8):
    """Wootters concurrence of a two-qubit state (batched).

    ``C = max(0, l1 - l2 - l3 - l4)`` with ``l_i`` the decreasing eigenvalues of
    ``sqrt(sqrt(rho) rho_tilde sqrt(rho))``.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.shape[-2:] != (4, 4):
        raise DimensionError("concurrence is defined for 4x4 density matrices")
    if np.max(np.abs(rho - dag(rho)), initial=0.0) > tol:
        raise ValueError("concurrence requires a Hermitian density matrix")
    herm = 0.5 * (rho + dag(rho))
    if np.min(np.linalg.eigvalsh(herm)) < -tol:
        raise ValueError("concurrence requires a positive semidefinite density matrix")
    rho_tilde = _SYSY @ herm.conj() @ _SYSY
    sq = _psd_sqrt(herm)
    inner = sq @ rho_tilde @ sq
    inner = 0.5 * (inner + dag(inner))
    lam = np.sqrt(np.clip(np.linalg.eigvalsh(inner), 0.0, None))[..., ::-1]
    c = lam[..., 0] - lam[..., 1] - lam[..., 2] - lam[..., 3]
    return np.maximum(c, 0.0)


@dataclass(frozen=True)
class TripletDecomposition:
    """Populations and coherences of a two-qubit state in the triplet basis.

    Coherences follow ``t_ab = <a|rho|b>``; for example ``t_01`` is
    ``<T_0|rho|T_1>`` and ``t_s0`` is ``<S|rho|T_0>``.
    """

    t_m1: float
    t_0: float
    t_1: float
    t_s: float
    t_1m1: complex
    t_01: complex
    t_0m1: complex
    t_sm1: complex
    t_s0: complex
    t_s1: complex

    @property
    def populations(self):
        return np.array([self.t_m1, self.t_0, self.t_1, self.t_s])

    def to_matrix(self):
        """Rebuild the triplet-basis matrix ordered ``(T_-1, T_0, T_1, S)``."""
        r = np.zeros((4, 4), dtype=complex)
        r[0, 0], r[1, 1], r[2, 2], r[3, 3] = self.t_m1, self.t_0, self.t_1, self.t_s
        for (a, b), v in zip(_COHERENCE_INDEX, (self.t_1m1, self.t_01, self.t_0m1,
                                                 self.t_sm1, self.t_s0, self.t_s1)):
            r[a, b] = v
            r[b, a] = np.conj(v)
        return r

    @classmethod
    def from_matrix(cls, r):
        r = np.asarray(r)
        coh = [complex(r[a, b]) for a, b in _COHERENCE_INDEX]
        return cls(float(r[0, 0].real), float(r[1, 1].real), float(r[2, 2].real),
                   float(r[3, 3].real), *coh)


# (row, column) in the (T_-1, T_0, T_1, S) ordering for each stored coherence
_COHERENCE_INDEX = ((2, 0), (1, 2), (1, 0), (3, 0), (3, 1), (3, 2))


def triplet_decompose(rho):
    """Project a single 4x4 state onto the triplet/singlet basis."""
    rho = np.asarray(rho)
    if rho.shape != (4, 4):
        raise DimensionError("triplet decomposition needs a single 4x4 matrix")
    return TripletDecomposition.from_matrix(to_triplet_basis(rho))
