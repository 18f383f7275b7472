"""CHSH Bell operator under the three commutation regimes.

The combination ``a1 b1 + a2 b1 + a1 b2 - a2 b2`` is built from four
Hermitian involutions (dichotomic +/-1 observables).  How far its operator
norm can climb depends on which of the four operators are forced to
commute:

========== ======================================== =======
regime     constraint                               limit
========== ======================================== =======
classical  every pair commutes                      2
local      a's commute with b's (tensor factors)    2*sqrt(2)
nonlocal   nothing is required to commute           2*sqrt(3)
========== ======================================== =======

Each product ``x y`` enters as the symmetric product ``(x y + y x) / 2`` so
the operator stays Hermitian when the factors do not commute.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from .operators import (
    HERM_TOL,
    ComplexOperator,
    commutator,
    identity,
    operator_norm,
    random_involution,
    random_unitary,
    tensor_product,
)
from .seeding import derive_seed, substream

SQRT2 = math.sqrt(2.0)
SQRT3 = math.sqrt(3.0)

#: Simplex stopping rule shared by both optimizers.
SIMPLEX_XATOL = 1e-10
MAX_EVALUATIONS = 50_000

_SIGMA_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
_SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)


class CommutationRegime(enum.Enum):
    CLASSICAL = "classical"
    LOCAL = "local"
    NONLOCAL = "nonlocal"

    @property
    def limit(self) -> float:
        return {"classical": 2.0, "local": 2 * SQRT2, "nonlocal": 2 * SQRT3}[self.value]

    @classmethod
    def parse(cls, value) -> "CommutationRegime":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            names = ", ".join(r.value for r in cls)
            raise ValueError(f"unknown regime {value!r}; expected one of {names}") from None


class RegimeViolation(ValueError):
    """A commutation constraint of the declared regime does not hold."""


@dataclass(frozen=True)
class DichotomicObservable:
    angle: float
    matrix: ComplexOperator


def make_observable(angle: float) -> DichotomicObservable:
    """Polarization analyzer at ``angle`` (radians) as a +/-1 observable.

    The matrix is cos(2 angle) sigma_z + sin(2 angle) sigma_x; angles are
    reduced modulo pi since a polarizer axis has no direction.
    """
    angle = float(angle)
    if not math.isfinite(angle):
        raise ValueError(f"angle must be finite, got {angle}")
    angle = math.fmod(angle, math.pi)
    if angle < 0:
        angle += math.pi
    if angle >= math.pi:  # tiny negatives round up to pi
        angle = 0.0
    m = math.cos(2 * angle) * _SIGMA_Z + math.sin(2 * angle) * _SIGMA_X
    return DichotomicObservable(angle, ComplexOperator(m, hermitian=True, unitary=True))


@dataclass(frozen=True, eq=False)
class BellScenario:
    """Four involutions plus the regime they are claimed to satisfy.

    For the local regime ``a1, a2`` act on the first tensor factor and
    ``b1, b2`` on the second; they are embedded as ``a (x) I`` and
    ``I (x) b`` when the Bell operator is formed.  For the other regimes all
    four act on one common space.
    """

    a1: ComplexOperator
    a2: ComplexOperator
    b1: ComplexOperator
    b2: ComplexOperator
    regime: CommutationRegime

    def __post_init__(self):
        object.__setattr__(self, "regime", CommutationRegime.parse(self.regime))

    @classmethod
    def from_angles(cls, angles: Sequence[float]) -> "BellScenario":
        a1, a2, b1, b2 = (make_observable(x).matrix for x in angles)
        return cls(a1, a2, b1, b2, CommutationRegime.LOCAL)

    def embedded(self) -> tuple[ComplexOperator, ...]:
        if self.regime is CommutationRegime.LOCAL:
            ia, ib = identity(self.a1.dim), identity(self.b1.dim)
            return (
                tensor_product(self.a1, ib),
                tensor_product(self.a2, ib),
                tensor_product(ia, self.b1),
                tensor_product(ia, self.b2),
            )
        return self.a1, self.a2, self.b1, self.b2

    def validate(self, tol: float = HERM_TOL) -> None:
        names = ("a1", "a2", "b1", "b2")
        if self.regime is CommutationRegime.LOCAL:
            if self.a1.dim != self.a2.dim or self.b1.dim != self.b2.dim:
                raise ValueError("local factors of one party must share a dimension")
        elif len({op.dim for op in (self.a1, self.a2, self.b1, self.b2)}) != 1:
            raise ValueError(f"{self.regime.value} scenario needs a common dimension")
        for name, op in zip(names, (self.a1, self.a2, self.b1, self.b2)):
            m = op.matrix
            if np.max(np.abs(m - m.conj().T)) > tol:
                raise ValueError(f"{name} is not Hermitian")
            if np.max(np.abs(m @ m - np.eye(op.dim))) > tol:
                raise ValueError(f"{name} is not an involution ({name}^2 != I)")

        ops = dict(zip(names, self.embedded()))
        if self.regime is CommutationRegime.CLASSICAL:
            pairs = list(itertools.combinations(names, 2))
        elif self.regime is CommutationRegime.LOCAL:
            pairs = [(a, b) for a in ("a1", "a2") for b in ("b1", "b2")]
        else:
            pairs = []
        for x, y in pairs:
            dev = float(np.max(np.abs(commutator(ops[x], ops[y]).matrix)))
            if dev > tol:
                raise RegimeViolation(
                    f"[{x},{y}] = {dev:.3e} violates the {self.regime.value} regime"
                )


def _sym(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return 0.5 * (x @ y + y @ x)


def _chsh(a1, a2, b1, b2) -> np.ndarray:
    b = _sym(a1, b1) + _sym(a2, b1) + _sym(a1, b2) - _sym(a2, b2)
    return 0.5 * (b + b.conj().T)


def _norm(m: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvalsh(m))))


def bell_operator(s: BellScenario) -> ComplexOperator:
    s.validate()
    mats = [op.matrix for op in s.embedded()]
    return ComplexOperator(_chsh(*mats), hermitian=True)


def bell_value(s: BellScenario) -> float:
    return operator_norm(bell_operator(s))


def local_square_residual(s: BellScenario) -> float:
    """max |B^2 - (4 I - [a1,a2] (x) [b1,b2])| for a local scenario."""
    if s.regime is not CommutationRegime.LOCAL:
        raise ValueError("the square identity is stated for the local regime")
    b = bell_operator(s).matrix
    ca = commutator(s.a1, s.a2)
    cb = commutator(s.b1, s.b2)
    rhs = 4 * np.eye(b.shape[0]) - tensor_product(ca, cb).matrix
    return float(np.max(np.abs(b @ b - rhs)))


@dataclass
class BoundCertificate:
    regime: CommutationRegime
    achieved: float
    theoretical_limit: float
    witness: BellScenario
    method: str
    seed: int | None = None
    evaluations: int = 0
    witness_angles: tuple[float, ...] | None = None
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in ("enumeration", "eigenanalysis", "optimization"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.achieved > self.theoretical_limit + 1e-9:
            raise ValueError(
                f"achieved {self.achieved!r} exceeds the {self.regime.value} limit "
                f"{self.theoretical_limit!r}"
            )

    def to_dict(self) -> dict:
        out = {
            "regime": self.regime.value,
            "achieved": self.achieved,
            "limit": self.theoretical_limit,
            "method": self.method,
            "seed": self.seed,
            "evaluations": self.evaluations,
        }
        if self.witness_angles is not None:
            out["witness_angles"] = list(self.witness_angles)
        else:
            out["witness_matrices"] = {
                name: _matrix_to_json(getattr(self.witness, name).matrix)
                for name in ("a1", "a2", "b1", "b2")
            }
        out.update(self.details)
        return out


def _matrix_to_json(m: np.ndarray) -> dict:
    return {"real": m.real.tolist(), "imag": m.imag.tolist()}


def _chsh_scalar(a1, a2, b1, b2):
    return a1 * b1 + a2 * b1 + a1 * b2 - a2 * b2


def classical_max() -> BoundCertificate:
    """Enumerate the 16 deterministic +/-1 assignments.

    The [0, 1] transmission-probability variant (vertices of {0,1}^4) is
    enumerated as well and reported under ``details``.
    """
    best, witness = -math.inf, None
    for values in itertools.product((1, -1), repeat=4):
        v = _chsh_scalar(*values)
        if v > best:
            best, witness = v, values
    prob_best, prob_witness = -math.inf, None
    for values in itertools.product((1, 0), repeat=4):
        v = _chsh_scalar(*values)
        if v > prob_best:
            prob_best, prob_witness = v, values
    ops = [ComplexOperator([[x]], hermitian=True, unitary=True) for x in witness]
    scenario = BellScenario(*ops, CommutationRegime.CLASSICAL)
    achieved = bell_value(scenario)
    return BoundCertificate(
        regime=CommutationRegime.CLASSICAL,
        achieved=achieved,
        theoretical_limit=CommutationRegime.CLASSICAL.limit,
        witness=scenario,
        method="enumeration",
        evaluations=16,
        details={
            "witness_values": list(witness),
            "transmission_max": float(prob_best),
            "transmission_witness": list(prob_witness),
        },
    )


class _Tracker:
    """Counts objective evaluations and remembers the largest value seen."""

    def __init__(self, fn):
        self.fn = fn
        self.calls = 0
        self.max_seen = -math.inf

    def __call__(self, x):
        value = self.fn(x)
        self.calls += 1
        if value > self.max_seen:
            self.max_seen = value
        return -value


def _local_value(angles: np.ndarray) -> float:
    obs = [math.cos(2 * t) * _SIGMA_Z + math.sin(2 * t) * _SIGMA_X for t in angles]
    i2 = np.eye(2)
    a1, a2 = (np.kron(o, i2) for o in obs[:2])
    b1, b2 = (np.kron(i2, o) for o in obs[2:])
    return _norm(_chsh(a1, a2, b1, b2))


def _simplex(fn, x0: np.ndarray, max_evals: int):
    return minimize(
        fn,
        x0,
        method="Nelder-Mead",
        options={
            "xatol": SIMPLEX_XATOL,
            "fatol": math.inf,
            "maxfev": max_evals,
            "maxiter": max_evals,
            "adaptive": x0.size > 8,
        },
    )


def maximize_local_quantum(
    restarts: int = 20, seed: int = 0, max_evals: int = MAX_EVALUATIONS
) -> BoundCertificate:
    """Maximize the Bell norm over the four analyzer angles.

    Restart ``k`` starts from uniform angles drawn from substream
    ``(seed, k)``; the best restart wins (ties keep the earliest).
    """
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    tracker = _Tracker(_local_value)
    best_value, best_x = -math.inf, None
    for k in range(restarts):
        x0 = substream(seed, k).uniform(0.0, math.pi, size=4)
        res = _simplex(tracker, x0, max_evals)
        if -res.fun > best_value:
            best_value, best_x = -res.fun, res.x
    angles = tuple(make_observable(x).angle for x in best_x)
    witness = BellScenario.from_angles(angles)
    return BoundCertificate(
        regime=CommutationRegime.LOCAL,
        achieved=bell_value(witness),
        theoretical_limit=CommutationRegime.LOCAL.limit,
        witness=witness,
        method="optimization",
        seed=seed,
        evaluations=tracker.calls,
        witness_angles=angles,
        details={"restarts": restarts, "max_evaluated": tracker.max_seen},
    )


def _hermitian_from_params(p: np.ndarray, d: int) -> np.ndarray:
    """Stack of Hermitian matrices, each from d^2 reals (diag, Re/Im upper)."""
    p = np.asarray(p, dtype=np.float64).reshape(-1, d * d)
    iu = np.triu_indices(d, 1)
    m = len(iu[0])
    k = np.zeros((p.shape[0], d, d), dtype=np.complex128)
    k[:, np.arange(d), np.arange(d)] = p[:, :d]
    upper = p[:, d : d + m] + 1j * p[:, d + m : d + 2 * m]
    k[:, iu[0], iu[1]] = upper
    k[:, iu[1], iu[0]] = upper.conj()
    return k


def involution_from_params(p: np.ndarray, d: int) -> np.ndarray:
    """V diag(+1..,-1..) V^dag with V = exp(i K), K Hermitian from d^2 reals.

    ``p`` may hold several parameter blocks of length d^2; the result then
    has one involution per block along the leading axis.
    """
    w, u = np.linalg.eigh(_hermitian_from_params(p, d))
    v = (u * np.exp(1j * w)[:, None, :]) @ np.swapaxes(u.conj(), 1, 2)
    signs = np.array([1.0] * (d // 2) + [-1.0] * (d - d // 2))
    m = (v * signs) @ np.swapaxes(v.conj(), 1, 2)
    m = 0.5 * (m + np.swapaxes(m.conj(), 1, 2))
    return m if np.size(p) > d * d else m[0]


def _nonlocal_value(p: np.ndarray, d: int) -> float:
    return _norm(_chsh(*involution_from_params(p, d)))


def maximize_nonlocal(
    dim: int = 4,
    restarts: int = 200,
    seed: int = 0,
    max_evals: int = MAX_EVALUATIONS,
) -> BoundCertificate:
    """Maximize the symmetrized Bell norm over unconstrained involutions.

    The certificate's ``details`` record whether the search reached the
    nonlocal target ``2*sqrt(3) - 1e-2`` (``stalled`` is True otherwise).
    """
    if dim not in (4, 8):
        raise ValueError(f"dim must be 4 or 8, got {dim}")
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    tracker = _Tracker(lambda p: _nonlocal_value(p, dim))
    best_value, best_x = -math.inf, None
    for k in range(restarts):
        x0 = substream(seed, k).normal(0.0, 1.0, size=4 * dim * dim)
        res = _simplex(tracker, x0, max_evals)
        if -res.fun > best_value:
            best_value, best_x = -res.fun, res.x
    n = dim * dim
    ops = [
        ComplexOperator(involution_from_params(best_x[i * n : (i + 1) * n], dim), hermitian=True)
        for i in range(4)
    ]
    witness = BellScenario(*ops, CommutationRegime.NONLOCAL)
    achieved = bell_value(witness)
    target = CommutationRegime.NONLOCAL.limit - 1e-2
    return BoundCertificate(
        regime=CommutationRegime.NONLOCAL,
        achieved=achieved,
        theoretical_limit=CommutationRegime.NONLOCAL.limit,
        witness=witness,
        method="optimization",
        seed=seed,
        evaluations=tracker.calls,
        details={
            "dim": dim,
            "restarts": restarts,
            "max_evaluated": tracker.max_seen,
            "target": target,
            "stalled": achieved < target,
        },
    )


def random_scenario(regime, seed: int, dim: int | None = None) -> BellScenario:
    """Random scenario that satisfies ``regime`` by construction.

    classical: one Haar unitary V and independent random sign diagonals, so
    all four V diag(s) V^dag commute (default dim 4).  local: independent
    random qubit involutions per factor (default local dim 2).  nonlocal:
    four independent balanced involutions (default dim 4).
    """
    regime = CommutationRegime.parse(regime)
    rng = np.random.default_rng(seed)
    if regime is CommutationRegime.LOCAL:
        d = dim or 2
        ops = [random_involution(d, rng) for _ in range(4)]
    elif regime is CommutationRegime.CLASSICAL:
        d = dim or 4
        u = random_unitary(d, rng)
        ops = []
        for _ in range(4):
            signs = rng.choice((-1.0, 1.0), size=d)
            m = (u * signs) @ u.conj().T
            ops.append(ComplexOperator(0.5 * (m + m.conj().T), hermitian=True))
    else:
        d = dim or 4
        ops = [random_involution(d, rng) for _ in range(4)]
    return BellScenario(*ops, regime)


def regime_sample_sweep(regime, samples: int, seed: int = 0, dim: int | None = None) -> list[float]:
    """Bell norms of ``samples`` random scenarios; sample i uses seed (seed, i)."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    regime = CommutationRegime.parse(regime)
    return [
        bell_value(random_scenario(regime, derive_seed(seed, i), dim)) for i in range(samples)
    ]
