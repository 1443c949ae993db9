"""Two-qubit polarization states and projective measurements.

The computational basis is fixed package-wide as the tensor order
``(|HH>, |HV>, |VH>, |VV>)`` with the signal qubit first.  Linear
polarizer settings are parametrized by the analyzer angle ``phi``:
outcome 0 passes ``cos(phi)|H> + sin(phi)|V>`` and outcome 1 passes the
orthogonal direction ``sin(phi)|H> - cos(phi)|V>``, so ``phi = 0`` is
the rectilinear basis (H/V) and ``phi = pi/4`` the diagonal one (D/A
with ``A = (|H> - |V>)/sqrt(2)``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

HERMITICITY_TOL = 1e-9
TRACE_TOL = 1e-9
EIGENVALUE_FLOOR = -1e-9

RECTILINEAR = 0.0
DIAGONAL = np.pi / 4


@dataclass(frozen=True)
class BasisProjector:
    """One output port of a polarization analyzer.

    Parameters
    ----------
    angle : float
        Analyzer angle in radians; 0 and pi/4 are the two mutually
        unbiased settings used throughout.
    outcome : int
        Port index, 0 or 1.
    """

    angle: float
    outcome: int

    def __post_init__(self):
        if self.outcome not in (0, 1):
            raise ValidationError(f"outcome must be 0 or 1, got {self.outcome}")
        if not np.isfinite(self.angle):
            raise ValidationError("analyzer angle must be finite")

    @property
    def ket(self) -> np.ndarray:
        return polarizer_state(self.angle, self.outcome)

    @property
    def orthogonal(self) -> "BasisProjector":
        return BasisProjector(self.angle, 1 - self.outcome)

    @property
    def conjugate(self) -> "BasisProjector":
        """Same outcome index in the conjugate (mutually unbiased) basis."""
        if np.isclose(self.angle, RECTILINEAR):
            return BasisProjector(DIAGONAL, self.outcome)
        if np.isclose(self.angle, DIAGONAL):
            return BasisProjector(RECTILINEAR, self.outcome)
        raise ValidationError(
            f"conjugate basis only defined for angles 0 and pi/4, got {self.angle}"
        )


def polarizer_state(phi: float, outcome: int) -> np.ndarray:
    """Single-photon polarization ket passed by analyzer port `outcome`."""
    if outcome == 0:
        return np.array([np.cos(phi), np.sin(phi)], dtype=complex)
    if outcome == 1:
        return np.array([np.sin(phi), -np.cos(phi)], dtype=complex)
    raise ValidationError(f"outcome must be 0 or 1, got {outcome}")


def validate_state(rho: np.ndarray, dim: int = 4) -> np.ndarray:
    """Check that `rho` is a density matrix and return it as complex ndarray.

    Hermiticity and unit trace are enforced to 1e-9; positivity allows
    eigenvalues down to -1e-9 to absorb rounding, anything lower is
    rejected rather than projected back.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (dim, dim):
        raise ValidationError(f"expected a {dim}x{dim} matrix, got shape {rho.shape}")
    if not np.all(np.isfinite(rho.view(float))):
        raise ValidationError("density matrix contains non-finite entries")
    if np.max(np.abs(rho - rho.conj().T)) > HERMITICITY_TOL:
        raise ValidationError("density matrix is not hermitian within 1e-9")
    if abs(np.trace(rho).real - 1.0) > TRACE_TOL or abs(np.trace(rho).imag) > TRACE_TOL:
        raise ValidationError("density matrix trace differs from 1 by more than 1e-9")
    eigs = np.linalg.eigvalsh(rho)
    if eigs.min() < EIGENVALUE_FLOOR:
        raise ValidationError(
            f"density matrix has negative eigenvalue {eigs.min():.3e} below the -1e-9 floor"
        )
    return rho


def pair_projector(proj_s: BasisProjector, proj_i: BasisProjector) -> np.ndarray:
    """Rank-1 projector onto the joint analyzer outcome (signal x idler)."""
    ket = np.kron(proj_s.ket, proj_i.ket)
    return np.outer(ket, ket.conj())


def projection_probability(
    rho: np.ndarray, proj_s: BasisProjector, proj_i: BasisProjector
) -> float:
    """Probability that a pair passes both analyzer ports.

    Parameters
    ----------
    rho : (4, 4) array_like
        Two-photon polarization density matrix.
    proj_s, proj_i : BasisProjector
        Signal and idler analyzer ports.

    Returns
    -------
    float
        ``Tr[(P_s (x) P_i) rho]``, clipped of rounding noise into [0, 1].
    """
    rho = validate_state(rho)
    ket = np.kron(proj_s.ket, proj_i.ket)
    p = float(np.real(ket.conj() @ rho @ ket))
    return float(np.clip(p, 0.0, 1.0))


def signal_marginal(rho: np.ndarray, proj_s: BasisProjector) -> float:
    """Probability that the signal photon alone passes its analyzer port."""
    rho = validate_state(rho)
    ket = proj_s.ket
    proj = np.kron(np.outer(ket, ket.conj()), np.eye(2))
    return float(np.clip(np.real(np.trace(proj @ rho)), 0.0, 1.0))


def idler_marginal(rho: np.ndarray, proj_i: BasisProjector) -> float:
    """Probability that the idler photon alone passes its analyzer port."""
    rho = validate_state(rho)
    ket = proj_i.ket
    proj = np.kron(np.eye(2), np.outer(ket, ket.conj()))
    return float(np.clip(np.real(np.trace(proj @ rho)), 0.0, 1.0))


def source_visibility(rho: np.ndarray, phi: float) -> float:
    """Intrinsic polarization-correlation visibility in basis `phi`.

    Computed as ``P00 - P01 - P10 + P11`` over the four joint analyzer
    outcomes, which equals ``2 (P_c - P_uc)`` for a correlation-symmetric
    state.  The sign is preserved: anticorrelated states give a negative
    value and callers concerned with fringe visibility take ``abs()``.
    """
    probs = {}
    for x in (0, 1):
        for y in (0, 1):
            probs[x, y] = projection_probability(
                rho, BasisProjector(phi, x), BasisProjector(phi, y)
            )
    return probs[0, 0] - probs[0, 1] - probs[1, 0] + probs[1, 1]


def average_source_visibility(rho: np.ndarray) -> float:
    """Mean of |visibility| over the rectilinear and diagonal bases."""
    return 0.5 * (
        abs(source_visibility(rho, RECTILINEAR)) + abs(source_visibility(rho, DIAGONAL))
    )


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    """Trace distance ``0.5 * || rho - sigma ||_1`` between two states.

    For hermitian arguments the trace norm is the sum of absolute
    eigenvalues of the difference, so the result lies in [0, 1].
    """
    rho = validate_state(rho, dim=rho.shape[0] if hasattr(rho, "shape") else 4)
    sigma = validate_state(sigma, dim=rho.shape[0])
    if rho.shape != sigma.shape:
        raise ValidationError("states must have the same dimension")
    eigs = np.linalg.eigvalsh(rho - sigma)
    return float(0.5 * np.sum(np.abs(eigs)))


def concurrence(rho: np.ndarray) -> float:
    """Entanglement of a two-qubit state via the spin-flip construction.

    The spin-flipped state is ``(sy (x) sy) rho* (sy (x) sy)``; with
    ``l1 >= l2 >= l3 >= l4`` the square roots of the eigenvalues of
    ``rho rho_tilde``, the concurrence is ``max(0, l1 - l2 - l3 - l4)``.
    """
    rho = validate_state(rho)
    sy = np.array([[0, -1j], [1j, 0]])
    flip = np.kron(sy, sy)
    rho_tilde = flip @ rho.conj() @ flip
    # rho @ rho_tilde is similar to a PSD product; tiny negative real
    # parts from rounding are clipped before the square root.
    eigs = np.linalg.eigvals(rho @ rho_tilde)
    lams = np.sqrt(np.clip(eigs.real, 0.0, None))
    lams = np.sort(lams)[::-1]
    return float(max(0.0, lams[0] - lams[1] - lams[2] - lams[3]))


# -- common fixture states ---------------------------------------------------

_H = np.array([1.0, 0.0], dtype=complex)
_V = np.array([0.0, 1.0], dtype=complex)


def bell_state(kind: str) -> np.ndarray:
    """Return a Bell-state ket: one of phi_plus, phi_minus, psi_plus, psi_minus."""
    hh = np.kron(_H, _H)
    hv = np.kron(_H, _V)
    vh = np.kron(_V, _H)
    vv = np.kron(_V, _V)
    table = {
        "phi_plus": (hh + vv),
        "phi_minus": (hh - vv),
        "psi_plus": (hv + vh),
        "psi_minus": (hv - vh),
    }
    if kind not in table:
        raise ValidationError(f"unknown Bell state {kind!r}")
    return table[kind] / np.sqrt(2.0)


def pure_state(ket: np.ndarray) -> np.ndarray:
    """Density matrix of a (normalized) ket."""
    ket = np.asarray(ket, dtype=complex)
    norm = np.linalg.norm(ket)
    if norm < 1e-15:
        raise ValidationError("cannot normalize a zero ket")
    ket = ket / norm
    return np.outer(ket, ket.conj())


def maximally_mixed() -> np.ndarray:
    return np.eye(4, dtype=complex) / 4.0


def werner_state(v: float, kind: str = "phi_plus") -> np.ndarray:
    """Bell state mixed with white noise: ``v |B><B| + (1 - v) I/4``.

    With ``kind='phi_plus'`` the state is correlated in both the
    rectilinear and diagonal bases and has visibility ``v`` in each, the
    convention used for scalar-visibility sources throughout.
    """
    if not 0.0 <= v <= 1.0:
        raise ValidationError(f"mixing weight must lie in [0, 1], got {v}")
    return v * pure_state(bell_state(kind)) + (1.0 - v) * maximally_mixed()
