"""Finite-dimensional Schroedinger evolution (hbar = 1).

Besides plain propagation and expectation values this module holds two
toys:

* a truncated translation lattice with incoming (negative sites) and
  outgoing (positive sites) subspaces, on which the evolution only ever
  moves weight from the incoming to the outgoing side;
* a comparator between a coherent superposition of Hamiltonian eigenstates
  and the statistical mixture with the same weights |c_k|^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .operators import (
    ComplexOperator,
    EigenSystem,
    StateVector,
    hermitian_eigensystem,
    matrix_exponential_i,
)


@dataclass(frozen=True)
class EvolutionSystem:
    hamiltonian: ComplexOperator
    state: StateVector
    basis_labels: tuple[str, ...] | None = None

    def __post_init__(self):
        if not self.hamiltonian.is_hermitian():
            raise ValueError("Hamiltonian must be Hermitian")
        if self.state.dim != self.hamiltonian.dim:
            raise ValueError(
                f"state dimension {self.state.dim} != Hamiltonian dimension {self.hamiltonian.dim}"
            )
        if abs(self.state.norm() - 1.0) > 1e-10:
            raise ValueError(f"state must be normalized (norm {self.state.norm():.3e})")
        if self.basis_labels is not None and len(self.basis_labels) != self.hamiltonian.dim:
            raise ValueError("one basis label per basis vector required")


def propagate(sys: EvolutionSystem, t: float) -> StateVector:
    return matrix_exponential_i(sys.hamiltonian, t) @ sys.state


def expectation(state: StateVector, obs: ComplexOperator) -> float:
    """<psi|A|psi> for Hermitian A; an imaginary part above 1e-10 is an error."""
    if state.dim != obs.dim:
        raise ValueError(f"dimension mismatch: state {state.dim}, observable {obs.dim}")
    if not obs.is_hermitian():
        raise ValueError("observable must be Hermitian")
    v = state.amplitudes
    value = complex(np.vdot(v, obs.matrix @ v))
    if abs(value.imag) > 1e-10:
        raise ValueError(f"expectation value has imaginary part {value.imag:.3e}")
    return value.real


# -- incoming / outgoing subspaces ------------------------------------------


@dataclass(frozen=True)
class SubspacePair:
    dim: int
    minus_indices: tuple[int, ...]
    plus_indices: tuple[int, ...]

    def __post_init__(self):
        if set(self.minus_indices) & set(self.plus_indices):
            raise ValueError("incoming and outgoing index sets must be disjoint")
        for i in self.minus_indices + self.plus_indices:
            if not 0 <= i < self.dim:
                raise ValueError(f"index {i} outside a {self.dim}-dimensional basis")

    def _projector(self, indices) -> ComplexOperator:
        d = np.zeros(self.dim)
        d[list(indices)] = 1.0
        return ComplexOperator(np.diag(d), hermitian=True)

    @property
    def p_minus(self) -> ComplexOperator:
        return self._projector(self.minus_indices)

    @property
    def p_plus(self) -> ComplexOperator:
        return self._projector(self.plus_indices)

    def occupancies(self, state: StateVector) -> tuple[float, float]:
        w = np.abs(state.amplitudes) ** 2
        return float(w[list(self.minus_indices)].sum()), float(w[list(self.plus_indices)].sum())


@dataclass(frozen=True)
class ShiftModel:
    """Translation lattice on sites -n..n (dimension 2n+1).

    One time unit moves every site one step to the right.  The lattice is
    closed into a ring so the step is exactly unitary; the wrap-around is a
    truncation artifact and is kept out of view by only running for
    ``horizon = n`` steps from states supported on sites <= 0.
    ``system.hamiltonian`` generates the step: exp(-i H) equals the shift.
    """

    n: int
    system: EvolutionSystem
    subspaces: SubspacePair
    step: ComplexOperator

    @property
    def dim(self) -> int:
        return 2 * self.n + 1

    @property
    def horizon(self) -> int:
        return self.n

    @property
    def sites(self) -> range:
        return range(-self.n, self.n + 1)

    def index(self, site: int) -> int:
        if not -self.n <= site <= self.n:
            raise ValueError(f"site {site} outside -{self.n}..{self.n}")
        return site + self.n

    def site_state(self, site: int) -> StateVector:
        return StateVector.basis(self.dim, self.index(site))

    def position(self) -> ComplexOperator:
        return ComplexOperator(np.diag(np.arange(-self.n, self.n + 1, dtype=float)), hermitian=True)

    def evolve_steps(self, psi0: StateVector, steps: int, reverse: bool = False) -> list[StateVector]:
        """States after 0, 1, ..., ``steps`` applications of the shift (or its inverse)."""
        u = self.step.dag() if reverse else self.step
        out = [psi0]
        for _ in range(steps):
            out.append(u @ out[-1])
        return out

    def plus_occupancy(self, psi0: StateVector, steps: int | None = None, reverse: bool = False):
        steps = self.horizon if steps is None else steps
        return [self.subspaces.occupancies(s)[1] for s in self.evolve_steps(psi0, steps, reverse)]

    def orbit_sites(self, start: str = "minus", max_steps: int | None = None) -> set[int]:
        """Sites reached by translating the basis of one subspace.

        ``start="minus"`` moves the incoming basis forward, ``"plus"`` moves
        the outgoing basis backward; ``max_steps`` defaults to 2n.
        """
        max_steps = 2 * self.n if max_steps is None else max_steps
        if start == "minus":
            seeds, direction = [i - self.n for i in self.subspaces.minus_indices], 1
        elif start == "plus":
            seeds, direction = [i - self.n for i in self.subspaces.plus_indices], -1
        else:
            raise ValueError("start must be 'minus' or 'plus'")
        reached = set()
        for s in seeds:
            for t in range(max_steps + 1):
                reached.add((s + direction * t + self.n) % self.dim - self.n)
        return reached


def is_nondecreasing(values: Sequence[float], tol: float = 1e-12) -> bool:
    return all(b >= a - tol for a, b in zip(values, values[1:]))


def build_shift_model(n: int, start_site: int | None = None) -> ShiftModel:
    """Lattice -n..n with right translation; incoming sites < 0, outgoing > 0.

    The generator H is diagonal in the lattice Fourier basis with phases
    chosen in (-pi, pi], so exp(-i H) reproduces the shift exactly.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    dim = 2 * n + 1
    shift = np.roll(np.eye(dim), 1, axis=0)  # |j> -> |j+1 mod dim>
    j = np.arange(dim)
    p = np.arange(dim)
    fourier = np.exp(2j * math.pi * np.outer(j, p) / dim) / math.sqrt(dim)
    # shift @ f_p = exp(-2 pi i p / dim) f_p, so H f_p = theta_p f_p
    theta = 2 * math.pi * p / dim
    theta = np.where(theta > math.pi, theta - 2 * math.pi, theta)
    h = (fourier * theta) @ fourier.conj().T
    h = 0.5 * (h + h.conj().T)
    start = -n if start_site is None else start_site
    labels = tuple(str(s) for s in range(-n, n + 1))
    system = EvolutionSystem(
        ComplexOperator(h, hermitian=True),
        StateVector.basis(dim, start + n),
        labels,
    )
    pair = SubspacePair(dim, tuple(range(0, n)), tuple(range(n + 1, dim)))
    return ShiftModel(n, system, pair, ComplexOperator(shift, unitary=True))


# -- superposition versus mixture -------------------------------------------


@dataclass(frozen=True, eq=False)
class SuperpositionSpec:
    """Coefficients of a state over the eigenbasis of a Hamiltonian."""

    coefficients: np.ndarray
    eigensystem: EigenSystem

    def __post_init__(self):
        c = np.array(self.coefficients, dtype=np.complex128).reshape(-1)
        if c.size != self.eigensystem.dim:
            raise ValueError(f"{c.size} coefficients for a {self.eigensystem.dim}-level system")
        total = float(np.sum(np.abs(c) ** 2))
        if abs(total - 1.0) > 1e-10:
            raise ValueError(f"sum of |c_k|^2 is {total!r}, expected 1")
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)

    @classmethod
    def from_hamiltonian(cls, h: ComplexOperator, coefficients) -> "SuperpositionSpec":
        return cls(coefficients, hermitian_eigensystem(h))

    @property
    def weights(self) -> np.ndarray:
        return np.abs(self.coefficients) ** 2

    def state(self, t: float = 0.0) -> StateVector:
        es = self.eigensystem
        phases = np.exp(-1j * es.eigenvalues * t)
        return StateVector(es.eigenvectors @ (self.coefficients * phases))


def _check_obs(spec: SuperpositionSpec, obs: ComplexOperator):
    if obs.dim != spec.eigensystem.dim:
        raise ValueError(f"observable dimension {obs.dim} != system dimension {spec.eigensystem.dim}")


def mixture_expectation(spec: SuperpositionSpec, obs: ComplexOperator) -> float:
    """sum_k |c_k|^2 <psi_k|A|psi_k>; depends on the moduli |c_k| only."""
    _check_obs(spec, obs)
    v = spec.eigensystem.eigenvectors
    diag = np.einsum("ik,ij,jk->k", v.conj(), obs.matrix, v).real
    return float(np.dot(spec.weights, diag))


def pure_expectation(spec: SuperpositionSpec, obs: ComplexOperator, t: float = 0.0) -> float:
    _check_obs(spec, obs)
    return expectation(spec.state(t), obs)


class PureMixedComparison(NamedTuple):
    pure: float
    mixed: float
    difference: float


def compare_pure_vs_mixed(spec: SuperpositionSpec, obs: ComplexOperator, t: float) -> PureMixedComparison:
    pure = pure_expectation(spec, obs, t)
    mixed = mixture_expectation(spec, obs)
    return PureMixedComparison(pure, mixed, pure - mixed)


def time_averaged_pure(spec: SuperpositionSpec, obs: ComplexOperator, period: float, points: int = 2048) -> float:
    """Mean of the coherent expectation over one period (uniform grid).

    For a Hamiltonian whose eigenvalue gaps are integer multiples of
    2 pi / period the integrand is a trigonometric polynomial, and the
    equally spaced rule is exact once ``points`` exceeds its top frequency.
    """
    ts = np.arange(points) * (period / points)
    return float(np.mean([pure_expectation(spec, obs, t) for t in ts]))
