"""Coincidence and polarizer-chain experiments, quantum and hidden-variable.

Quantum predictions come from the two-photon state (|HH> + |VV>)/sqrt(2)
and the analyzer observables of :mod:`chshlab.bell`.  Local hidden-variable
models are :class:`ResponseModel` instances: each photon pair shares one
hidden polarization ``lam`` in [0, pi), each arm draws its own uniform
``u``, and each arm decides pass/absorb from its own angle only.

Monte Carlo runs are split into fixed-size chunks.  Chunk ``c`` of stream
``s`` draws from ``substream(seed, s, c)``, so counts do not depend on how
many workers process the chunks.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .bell import make_observable
from .operators import ComplexOperator, StateVector, identity, tensor_product
from .seeding import substream

QUANTUM = "quantum"
MALUS_CHAIN = "malus"

CHUNK_SIZE = 1 << 16

_PAIR_STATE = StateVector(np.array([1, 0, 0, 1]) / math.sqrt(2), normalized=True)


class UnknownModelError(LookupError):
    pass


def _uniform_polarization(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.uniform(0.0, math.pi, size=n)


@dataclass(frozen=True)
class ResponseModel:
    """Hidden-variable response rule for a single polarizer.

    All callables are vectorized over numpy arrays of photons:

    ``sample_hidden(rng, n)``
        draws ``n`` hidden polarizations in [0, pi).
    ``pass_rule(angle, lam, u)``
        boolean array; must be a deterministic function of its inputs.
    ``update_rule(lam, angle, passed)``
        hidden polarization after the polarizer, in [0, pi).
    """

    name: str
    pass_rule: Callable[[float, np.ndarray, np.ndarray], np.ndarray]
    update_rule: Callable[[np.ndarray, float, np.ndarray], np.ndarray]
    sample_hidden: Callable[[np.random.Generator, int], np.ndarray] = _uniform_polarization


def _repolarize(lam, angle, passed):
    return np.where(passed, angle % math.pi, lam)


def _sign_pass(angle, lam, u):
    return np.cos(2.0 * (angle - lam)) > 0.0


def _malus_threshold_pass(angle, lam, u):
    return u < np.cos(angle - lam) ** 2


SIGN_MODEL = ResponseModel("sign", _sign_pass, _repolarize)
MALUS_THRESHOLD_MODEL = ResponseModel("malus-threshold", _malus_threshold_pass, _repolarize)

_BUILTINS = {m.name: m for m in (SIGN_MODEL, MALUS_THRESHOLD_MODEL)}
_registry: dict[str, ResponseModel] = dict(_BUILTINS)


def builtin_models() -> dict[str, ResponseModel]:
    return dict(_BUILTINS)


def register_model(model: ResponseModel, replace: bool = False) -> None:
    if model.name in (QUANTUM, MALUS_CHAIN):
        raise ValueError(f"{model.name!r} is reserved")
    if model.name in _registry and not replace:
        raise ValueError(f"model {model.name!r} already registered")
    _registry[model.name] = model


def get_model(name: str) -> ResponseModel:
    try:
        return _registry[name]
    except KeyError:
        known = ", ".join(sorted(_registry))
        raise UnknownModelError(f"unknown response model {name!r} (known: {known})") from None


def model_names() -> list[str]:
    return sorted(_registry)


def _resolve(model):
    if isinstance(model, ResponseModel) or model in (QUANTUM, MALUS_CHAIN):
        return model
    return get_model(model)


# -- analytic predictions ---------------------------------------------------


def malus_transmission(theta: float) -> float:
    return math.cos(theta) ** 2


def _expect(op: ComplexOperator, state: StateVector = _PAIR_STATE) -> float:
    v = state.amplitudes
    return float(np.vdot(v, op.matrix @ v).real)


def quantum_pair_correlation(alpha: float, beta: float) -> float:
    """<Phi| A(alpha) (x) A(beta) |Phi>, which equals cos 2(alpha - beta)."""
    a = make_observable(alpha).matrix
    b = make_observable(beta).matrix
    return _expect(tensor_product(a, b))


def _projector(angle: float, outcome: int) -> ComplexOperator:
    a = make_observable(angle).matrix
    return 0.5 * (identity(2) + outcome * a)


def quantum_outcome_probabilities(alpha: float, beta: float) -> tuple[float, float, float, float]:
    """(p_pp, p_pa, p_ap, p_aa); 'p' is pass (+1), 'a' is absorb (-1)."""
    probs = []
    for oa in (1, -1):
        for ob in (1, -1):
            probs.append(_expect(tensor_product(_projector(alpha, oa), _projector(beta, ob))))
    p = np.array(probs)
    p[p < 1e-15] = 0.0
    return tuple(float(x) for x in p / p.sum())


def quantum_coincidence_probability(alpha: float, beta: float) -> float:
    """Probability both photons pass: 0.5 * cos^2(alpha - beta)."""
    return _expect(tensor_product(_projector(alpha, 1), _projector(beta, 1)))


# -- coincidence Monte Carlo ------------------------------------------------


@dataclass(frozen=True)
class CorrelationEstimate:
    alpha: float
    beta: float
    value: float
    std_error: float


@dataclass(frozen=True)
class CoincidenceCounts:
    alpha: float
    beta: float
    n_pp: int
    n_pa: int
    n_ap: int
    n_aa: int

    @property
    def n_total(self) -> int:
        return self.n_pp + self.n_pa + self.n_ap + self.n_aa

    def __add__(self, other: "CoincidenceCounts") -> "CoincidenceCounts":
        return CoincidenceCounts(
            self.alpha,
            self.beta,
            self.n_pp + other.n_pp,
            self.n_pa + other.n_pa,
            self.n_ap + other.n_ap,
            self.n_aa + other.n_aa,
        )

    def correlation(self) -> CorrelationEstimate:
        n = self.n_total
        if n == 0:
            raise ValueError(f"no pairs recorded at settings ({self.alpha}, {self.beta})")
        e = (self.n_pp + self.n_aa - self.n_pa - self.n_ap) / n
        # each pair contributes an i.i.d. +/-1 product
        se = math.sqrt(max(1.0 - e * e, 0.0) / n)
        return CorrelationEstimate(self.alpha, self.beta, e, se)


def _chunks(n: int, size: int) -> list[int]:
    full, rest = divmod(n, size)
    return [size] * full + ([rest] if rest else [])


def _run_chunks(job, sizes: list[int], workers: int) -> list:
    if workers <= 1 or len(sizes) <= 1:
        return [job(i, m) for i, m in enumerate(sizes)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(job, range(len(sizes)), sizes))


def run_coincidence(
    model,
    alpha: float,
    beta: float,
    n_pairs: int,
    seed: int = 0,
    *,
    stream: int = 0,
    chunk_size: int = CHUNK_SIZE,
    workers: int = 1,
) -> CoincidenceCounts:
    """Simulate ``n_pairs`` photon pairs at analyzer angles (alpha, beta).

    ``model`` is ``"quantum"``, a registered model name or a ResponseModel.
    Quantum pairs are drawn from the four analytic outcome probabilities.
    ``stream`` separates independent runs sharing one master seed.
    """
    if n_pairs < 1:
        raise ValueError("n_pairs must be >= 1")
    model = _resolve(model)
    if model == MALUS_CHAIN:
        raise ValueError("the analytic Malus chain has no coincidence simulation")

    if model == QUANTUM:
        probs = quantum_outcome_probabilities(alpha, beta)

        def job(c, m):
            rng = substream(seed, stream, c)
            return rng.multinomial(m, probs)

    else:

        def job(c, m):
            rng = substream(seed, stream, c)
            lam = model.sample_hidden(rng, m)
            u_a = rng.random(m)
            u_b = rng.random(m)
            pa = np.asarray(model.pass_rule(alpha, lam, u_a), dtype=bool)
            pb = np.asarray(model.pass_rule(beta, lam, u_b), dtype=bool)
            return np.array(
                [
                    np.count_nonzero(pa & pb),
                    np.count_nonzero(pa & ~pb),
                    np.count_nonzero(~pa & pb),
                    np.count_nonzero(~pa & ~pb),
                ]
            )

    totals = np.sum(_run_chunks(job, _chunks(n_pairs, chunk_size), workers), axis=0)
    return CoincidenceCounts(alpha, beta, *(int(x) for x in totals))


@dataclass(frozen=True)
class ChshEstimate:
    value: float
    std_error: float
    correlations: tuple[CorrelationEstimate, ...]


def chsh_settings(a1: float, a2: float, b1: float, b2: float) -> list[tuple[float, float]]:
    """Setting pairs in the order (a1,b1), (a2,b1), (a1,b2), (a2,b2)."""
    return [(a1, b1), (a2, b1), (a1, b2), (a2, b2)]


def estimate_chsh(counts: Sequence[CoincidenceCounts]) -> ChshEstimate:
    """S = E11 + E21 + E12 - E22 with independent binomial errors added in quadrature."""
    if len(counts) != 4:
        raise ValueError("need counts at exactly four setting pairs")
    corr = tuple(c.correlation() for c in counts)
    s = corr[0].value + corr[1].value + corr[2].value - corr[3].value
    se = math.sqrt(sum(c.std_error**2 for c in corr))
    return ChshEstimate(s, se, corr)


def run_chsh(
    model,
    angles: Sequence[float],
    n_pairs: int,
    seed: int = 0,
    *,
    chunk_size: int = CHUNK_SIZE,
    workers: int = 1,
) -> tuple[list[CoincidenceCounts], ChshEstimate]:
    """Coincidence runs at the four CHSH settings from angles (a1, a2, b1, b2)."""
    counts = [
        run_coincidence(
            model, alpha, beta, n_pairs, seed, stream=k, chunk_size=chunk_size, workers=workers
        )
        for k, (alpha, beta) in enumerate(chsh_settings(*angles))
    ]
    return counts, estimate_chsh(counts)


# -- polarizer chains -------------------------------------------------------


@dataclass(frozen=True)
class ChainStage:
    stage: int
    angle: float
    pass_fraction: float
    analytic_reference: float
    std_error: float


def malus_chain_reference(angles: Sequence[float], source_angle: float | None = None) -> list[float]:
    """Cumulative ideal-polarizer transmission after each stage.

    Unpolarized light loses half at the first polarizer; a polarized source
    at ``source_angle`` follows Malus' law there as well.
    """
    out = []
    frac = 0.5 if source_angle is None else malus_transmission(angles[0] - source_angle)
    out.append(frac)
    for prev, cur in zip(angles, angles[1:]):
        frac *= malus_transmission(cur - prev)
        out.append(frac)
    return out


def chain_transmission(
    angles: Sequence[float],
    model,
    n_photons: int = 100_000,
    seed: int = 0,
    *,
    source_angle: float | None = None,
    chunk_size: int = CHUNK_SIZE,
    workers: int = 1,
) -> list[ChainStage]:
    """Fraction of photons surviving each polarizer of a chain.

    With ``model="malus"`` the analytic reference is returned as the result
    (zero error).  Otherwise every photon carries its own hidden polarization
    through the chain, drawing a fresh ``u`` at each polarizer.
    """
    angles = [float(a) for a in angles]
    if not angles:
        raise ValueError("polarizer chain must contain at least one polarizer")
    model = _resolve(model)
    if model == QUANTUM:
        raise ValueError("use 'malus' for the quantum single-photon chain")
    reference = malus_chain_reference(angles, source_angle)
    if model == MALUS_CHAIN:
        return [
            ChainStage(i + 1, a, r, r, 0.0) for i, (a, r) in enumerate(zip(angles, reference))
        ]
    if n_photons < 1:
        raise ValueError("n_photons must be >= 1")

    def job(c, m):
        rng = substream(seed, 0, c)
        if source_angle is None:
            lam = model.sample_hidden(rng, m)
        else:
            lam = np.full(m, float(source_angle) % math.pi)
        alive = np.ones(m, dtype=bool)
        passed_counts = []
        for angle in angles:
            u = rng.random(m)
            passed = alive & np.asarray(model.pass_rule(angle, lam, u), dtype=bool)
            lam = np.where(passed, model.update_rule(lam, angle, passed), lam)
            alive = passed
            passed_counts.append(np.count_nonzero(alive))
        return np.array(passed_counts)

    totals = np.sum(_run_chunks(job, _chunks(n_photons, chunk_size), workers), axis=0)
    stages = []
    for i, (angle, k, ref) in enumerate(zip(angles, totals, reference)):
        p = int(k) / n_photons
        stages.append(ChainStage(i + 1, angle, p, ref, math.sqrt(p * (1 - p) / n_photons)))
    return stages


__all__ = [
    "QUANTUM",
    "MALUS_CHAIN",
    "CHUNK_SIZE",
    "ResponseModel",
    "SIGN_MODEL",
    "MALUS_THRESHOLD_MODEL",
    "UnknownModelError",
    "builtin_models",
    "register_model",
    "get_model",
    "model_names",
    "malus_transmission",
    "quantum_pair_correlation",
    "quantum_outcome_probabilities",
    "quantum_coincidence_probability",
    "CoincidenceCounts",
    "CorrelationEstimate",
    "ChshEstimate",
    "run_coincidence",
    "chsh_settings",
    "estimate_chsh",
    "run_chsh",
    "ChainStage",
    "malus_chain_reference",
    "chain_transmission",
]
