"""Scalar observables: density, connected correlation, and discord.

The discord measure used throughout is the local quantum uncertainty,
1 - lambda_max(W) with W_ab = Tr[sqrt(rho) (sigma_a x 1) sqrt(rho)
(sigma_b x 1)].  It vanishes exactly when some local observable of the
first spin commutes with the state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spin_dynamics import (
    IDENTITY_2,
    NUMBER_OP,
    PAULI,
    PSD_EPS,
    DriveParams,
    HERMITICITY_TOL,
    require_qubit_state,
    require_two_qubit_state,
)

CORRELATION_TOL = 1e-10

_N_FIRST = np.kron(NUMBER_OP, IDENTITY_2)
_N_SECOND = np.kron(IDENTITY_2, NUMBER_OP)
_NN = np.kron(NUMBER_OP, NUMBER_OP)


def excitation_density(state) -> float:
    """Tr[n rho] per spin; two-spin input is averaged over the two spins."""
    state = np.asarray(state)
    if state.shape == (2, 2):
        rho = require_qubit_state(state)
        return float(np.trace(NUMBER_OP @ rho).real)
    rho = require_two_qubit_state(state)
    nj = np.trace(_N_FIRST @ rho).real
    nk = np.trace(_N_SECOND @ rho).real
    return float(0.5 * (nj + nk))


def connected_correlation(state) -> float:
    """<n_j n_k> - <n_j><n_k> of a two-spin state; lies in [-1/4, 1/4]."""
    rho = require_two_qubit_state(state)
    nn = np.trace(_NN @ rho).real
    nj = np.trace(_N_FIRST @ rho).real
    nk = np.trace(_N_SECOND @ rho).real
    c = float(nn - nj * nk)
    if not (-0.25 - CORRELATION_TOL <= c <= 0.25 + CORRELATION_TOL):
        raise ValueError(f"connected correlation {c} outside [-1/4, 1/4]")
    return c


def connected_correlation_closed_form(protocol: int, params: DriveParams, gamma: float) -> float:
    """Stationary connected correlation under Poisson resetting.

    protocol=1: unconditional reset to all-up.  protocol=2: the
    conditional protocol; its own closed form only applies on the
    omega > delta branch, elsewhere the protocols coincide and the
    protocol-1 value is returned.
    """
    if not (gamma > 0.0):
        raise ValueError(f"gamma must be > 0, got {gamma}")
    g2 = gamma * gamma
    om2 = params.omega**2
    ob2 = params.effective_rabi**2
    if protocol == 1 or (protocol == 2 and params.omega <= params.delta):
        a = g2 + 4.0 * ob2
        b = g2 + 16.0 * ob2
        return 4.0 * om2 * om2 * (5.0 * g2 + 8.0 * ob2) / (a * a * b)
    if protocol == 2:
        num = g2 - 12.0 * om2 + 16.0 * ob2
        den = g2 * g2 + 20.0 * g2 * ob2 + 64.0 * ob2 * ob2
        return 0.25 - 2.0 * om2 * num / den
    raise ValueError(f"no closed form for protocol {protocol}")


def hermitian_sqrt(m) -> np.ndarray:
    """Principal square root of a Hermitian PSD matrix via eigendecomposition.

    Eigenvalues in [-PSD_EPS, 0) are clamped to zero (averaging noise);
    anything more negative is rejected with the offending eigenvalue.
    """
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    herm = np.max(np.abs(m - m.conj().T))
    if herm > HERMITICITY_TOL:
        raise ValueError(f"matrix is not Hermitian (max deviation {herm:.3e})")
    lam, vec = np.linalg.eigh(0.5 * (m + m.conj().T))
    if lam[0] < -PSD_EPS:
        raise ValueError(f"matrix is not PSD (eigenvalue {lam[0]:.3e})")
    lam = np.clip(lam, 0.0, None)
    return (vec * np.sqrt(lam)) @ vec.conj().T


@dataclass(frozen=True)
class LquResult:
    """Local quantum uncertainty with its 3x3 correlation matrix."""

    value: float
    w_matrix: np.ndarray
    lambda_max: float


def lqu(state) -> LquResult:
    """Local quantum uncertainty of a two-spin state, observable on spin j.

    The local Pauli acts on the first tensor slot; for the
    exchange-symmetric states produced here the choice of slot is
    unobservable.  W is symmetrized before the eigenvalue solve since
    rounding breaks its analytic symmetry.
    """
    rho = require_two_qubit_state(state)
    sq = hermitian_sqrt(rho)
    locals_ = [np.kron(s, IDENTITY_2) for s in PAULI]
    sq_locals = [sq @ o for o in locals_]
    w = np.empty((3, 3))
    for a in range(3):
        for b in range(3):
            w[a, b] = np.trace(sq_locals[a] @ sq_locals[b]).real
    w = 0.5 * (w + w.T)
    lam_max = float(np.linalg.eigvalsh(w)[-1])
    value = 1.0 - lam_max
    if value < -1e-8 or value > 1.0 + 1e-8:
        raise ValueError(f"local quantum uncertainty {value} outside [0, 1]")
    return LquResult(float(min(max(value, 0.0), 1.0)), w, lam_max)
