"""Brute-force dense references: state-vector evolution via eigendecomposition
of the fully materialized Hamiltonian, full outcome distributions, and a
hand-rolled power-iteration operator norm.  Everything here is the slow,
independent side of every equivalence test; nothing here is used on chains
with more than the dense site cap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericalIntegrityError
from .model import MblInstance, check_dense_feasible, dense_hamiltonian


@dataclass(frozen=True)
class DenseState:
    """2^N amplitudes in the computational z basis, site 1 most significant."""

    n_sites: int
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        if self.amplitudes.shape != (2**self.n_sites,):
            raise DomainError("amplitude vector has the wrong length")
        norm = np.linalg.norm(self.amplitudes)
        if abs(norm - 1.0) > 1e-10:
            raise NumericalIntegrityError(f"state norm {norm!r} deviates from 1 beyond 1e-10")


@dataclass(frozen=True)
class OutcomeDistribution:
    """Probabilities over all 2^N bitstrings, indexed by basis integer."""

    n_sites: int
    probabilities: np.ndarray

    def probability(self, bits: str) -> float:
        if len(bits) != self.n_sites or set(bits) - {"0", "1"}:
            raise DomainError(f"bitstring {bits!r} does not match N={self.n_sites}")
        return float(self.probabilities[int(bits, 2)])

    def tvd(self, other: "OutcomeDistribution") -> float:
        if other.n_sites != self.n_sites:
            raise DomainError("distributions live on different chain sizes")
        return 0.5 * float(np.abs(self.probabilities - other.probabilities).sum())


def evolve_state(
    instance: MblInstance,
    t: float,
    r_j: int | None = None,
    r_u: int | None = None,
) -> np.ndarray:
    """exp(-iHt)|0...0> through a full eigendecomposition of the dense
    (optionally truncated) Hamiltonian."""
    n = instance.n_sites
    check_dense_feasible(n, "dense evolution")
    ham = dense_hamiltonian(instance, r_j=r_j, r_u=r_u)
    vals, vecs = np.linalg.eigh(ham)
    initial = np.zeros(2**n, dtype=complex)
    initial[0] = 1.0
    state = vecs @ (np.exp(-1j * vals * t) * (vecs.conj().T @ initial))
    norm = np.linalg.norm(state)
    if abs(norm - 1.0) > 1e-10:
        raise NumericalIntegrityError(
            f"dense evolution lost unitarity: norm {norm!r} after t={t}"
        )
    return state


def exact_distribution(
    instance: MblInstance,
    t: float,
    r_j: int | None = None,
    r_u: int | None = None,
) -> OutcomeDistribution:
    """Exact D(sigma) = |<sigma|exp(-iHt)|0...0>|^2 over all bitstrings."""
    state = evolve_state(instance, t, r_j=r_j, r_u=r_u)
    probs = np.abs(state) ** 2
    total = probs.sum()
    if abs(total - 1.0) > 1e-9:
        raise NumericalIntegrityError(f"distribution mass {total!r} deviates from 1")
    return OutcomeDistribution(instance.n_sites, probs)


def operator_norm(
    matrix: np.ndarray,
    rel_tol: float = 1e-8,
    max_iters: int = 20000,
    seed: int = 7,
) -> float:
    """Largest singular value via power iteration on M^dagger M.

    Iterates v -> M^dag M v with a seeded random start until the Rayleigh
    quotient is stable to rel_tol; raises after max_iters without
    convergence.
    """
    m = np.asarray(matrix)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DomainError(f"operator_norm needs a square matrix, got shape {m.shape}")
    dim = m.shape[0]
    if dim > 2**14:
        raise DomainError(f"matrix dimension {dim} exceeds the dense cap 2^14")
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    last = 0.0
    for _ in range(max_iters):
        w = m.conj().T @ (m @ v)
        lam = np.linalg.norm(w)
        if lam == 0.0:
            return 0.0
        v = w / lam
        if abs(lam - last) <= rel_tol * lam:
            return float(np.sqrt(lam))
        last = lam
    raise NumericalIntegrityError(
        f"power iteration did not converge to rel_tol={rel_tol} in {max_iters} iterations"
    )
