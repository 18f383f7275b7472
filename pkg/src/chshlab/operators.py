"""Dense complex operators on small Hilbert spaces.

Everything here works on ``complex128`` numpy arrays wrapped in light
immutable containers.  Dimensions stay small (a few dozen at most), so the
Hermitian eigensolver is a plain cyclic Jacobi iteration rather than a call
into LAPACK; ``operator_norm`` uses LAPACK's ``eigvalsh`` and the two are
cross-checked in the tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

HERM_TOL = 1e-10
EIG_TOL = 1e-9
UNITARY_TOL = 1e-10

MAX_JACOBI_SWEEPS = 60

__all__ = [
    "HERM_TOL",
    "EIG_TOL",
    "UNITARY_TOL",
    "ComplexOperator",
    "StateVector",
    "EigenSystem",
    "NotHermitianError",
    "ConvergenceError",
    "identity",
    "sigma_x",
    "sigma_y",
    "sigma_z",
    "tensor_product",
    "commutator",
    "hermitian_eigensystem",
    "operator_norm",
    "matrix_exponential_i",
    "random_involution",
    "random_unitary",
    "random_hermitian",
]


class NotHermitianError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    pass


def _frozen(array) -> np.ndarray:
    out = np.array(array, dtype=np.complex128, copy=True)
    out.setflags(write=False)
    return out


def _max_abs(a: np.ndarray) -> float:
    return float(np.max(np.abs(a))) if a.size else 0.0


@dataclass(frozen=True, eq=False)
class ComplexOperator:
    """Square complex matrix with advisory Hermitian/unitary flags.

    The flags are hints set by constructors that know the structure of what
    they build.  They are validated once at construction so a wrong flag
    never survives; ``is_hermitian``/``is_unitary`` recheck on demand.
    """

    matrix: np.ndarray
    hermitian: bool = False
    unitary: bool = False

    def __post_init__(self):
        m = _frozen(self.matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
            raise ValueError(f"operator must be a non-empty square matrix, got shape {m.shape}")
        object.__setattr__(self, "matrix", m)
        if self.hermitian and not self.is_hermitian():
            raise NotHermitianError("hermitian flag set on a non-Hermitian matrix")
        if self.unitary and not self.is_unitary():
            raise ValueError("unitary flag set on a non-unitary matrix")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def is_hermitian(self, tol: float = HERM_TOL) -> bool:
        return _max_abs(self.matrix - self.matrix.conj().T) <= tol

    def is_unitary(self, tol: float = UNITARY_TOL) -> bool:
        m = self.matrix
        return _max_abs(m.conj().T @ m - np.eye(self.dim)) <= tol

    def dag(self) -> "ComplexOperator":
        return ComplexOperator(self.matrix.conj().T, hermitian=self.hermitian, unitary=self.unitary)

    def __matmul__(self, other):
        if isinstance(other, ComplexOperator):
            _check_dims(self, other)
            return ComplexOperator(self.matrix @ other.matrix, unitary=self.unitary and other.unitary)
        if isinstance(other, StateVector):
            if other.dim != self.dim:
                raise ValueError(f"dimension mismatch: operator {self.dim}, state {other.dim}")
            return StateVector(self.matrix @ other.amplitudes)
        return NotImplemented

    def __add__(self, other: "ComplexOperator") -> "ComplexOperator":
        _check_dims(self, other)
        return ComplexOperator(self.matrix + other.matrix, hermitian=self.hermitian and other.hermitian)

    def __sub__(self, other: "ComplexOperator") -> "ComplexOperator":
        _check_dims(self, other)
        return ComplexOperator(self.matrix - other.matrix, hermitian=self.hermitian and other.hermitian)

    def __neg__(self) -> "ComplexOperator":
        return ComplexOperator(-self.matrix, hermitian=self.hermitian, unitary=self.unitary)

    def __mul__(self, scalar) -> "ComplexOperator":
        scalar = complex(scalar)
        return ComplexOperator(
            scalar * self.matrix,
            hermitian=self.hermitian and scalar.imag == 0,
            unitary=self.unitary and abs(scalar) == 1,
        )

    __rmul__ = __mul__

    def allclose(self, other, atol: float = 1e-12) -> bool:
        other = other.matrix if isinstance(other, ComplexOperator) else np.asarray(other)
        return other.shape == self.matrix.shape and _max_abs(self.matrix - other) <= atol

    def __repr__(self):
        flags = "".join(f for f, on in (("H", self.hermitian), ("U", self.unitary)) if on)
        return f"ComplexOperator(dim={self.dim}{', ' + flags if flags else ''})"


def _check_dims(a: ComplexOperator, b: ComplexOperator):
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")


@dataclass(frozen=True, eq=False)
class StateVector:
    amplitudes: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        v = _frozen(self.amplitudes).reshape(-1)
        if v.size == 0:
            raise ValueError("state vector must be non-empty")
        object.__setattr__(self, "amplitudes", v)
        if self.normalized and abs(self.norm() - 1.0) > 1e-10:
            raise ValueError(f"state flagged normalized has norm {self.norm():.3e}")

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalize(self) -> "StateVector":
        n = self.norm()
        if n == 0:
            raise ValueError("cannot normalize the zero vector")
        return StateVector(self.amplitudes / n, normalized=True)

    def inner(self, other: "StateVector") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    @classmethod
    def basis(cls, dim: int, index: int) -> "StateVector":
        v = np.zeros(dim, dtype=np.complex128)
        v[index] = 1.0
        return cls(v, normalized=True)


@dataclass(frozen=True, eq=False)
class EigenSystem:
    """Eigenvalues in ascending order with eigenvectors as matrix columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def __post_init__(self):
        w = np.array(self.eigenvalues, dtype=np.float64, copy=True)
        w.setflags(write=False)
        object.__setattr__(self, "eigenvalues", w)
        object.__setattr__(self, "eigenvectors", _frozen(self.eigenvectors))

    @property
    def dim(self) -> int:
        return self.eigenvalues.size

    def vector(self, k: int) -> StateVector:
        return StateVector(self.eigenvectors[:, k], normalized=True)

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


def identity(dim: int) -> ComplexOperator:
    return ComplexOperator(np.eye(dim), hermitian=True, unitary=True)


def sigma_x() -> ComplexOperator:
    return ComplexOperator([[0, 1], [1, 0]], hermitian=True, unitary=True)


def sigma_y() -> ComplexOperator:
    return ComplexOperator([[0, -1j], [1j, 0]], hermitian=True, unitary=True)


def sigma_z() -> ComplexOperator:
    return ComplexOperator([[1, 0], [0, -1]], hermitian=True, unitary=True)


def tensor_product(a: ComplexOperator, b: ComplexOperator) -> ComplexOperator:
    """Kronecker product; entry (i*db + k, j*db + l) is a[i, j] * b[k, l]."""
    return ComplexOperator(
        np.kron(a.matrix, b.matrix),
        hermitian=a.hermitian and b.hermitian,
        unitary=a.unitary and b.unitary,
    )


def commutator(a: ComplexOperator, b: ComplexOperator) -> ComplexOperator:
    _check_dims(a, b)
    return ComplexOperator(a.matrix @ b.matrix - b.matrix @ a.matrix)


def _require_hermitian(m: ComplexOperator, tol: float = HERM_TOL):
    dev = _max_abs(m.matrix - m.matrix.conj().T)
    if dev > tol:
        raise NotHermitianError(f"operator is not Hermitian (max |M - M^dag| = {dev:.3e})")


def _jacobi(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi diagonalization of a Hermitian matrix.

    Each (p, q) rotation first removes the phase of a[p, q] with a diagonal
    unitary and then applies the real symmetric Jacobi rotation, so the
    combined 2x2 unitary annihilates the pair exactly.
    """
    a = np.array(a, dtype=np.complex128)
    n = a.shape[0]
    v = np.eye(n, dtype=np.complex128)
    scale = np.linalg.norm(a)
    if n == 1 or scale == 0:
        return a.diagonal().real.copy(), v
    threshold = n * np.finfo(float).eps * scale
    offdiag = ~np.eye(n, dtype=bool)
    for _ in range(MAX_JACOBI_SWEEPS):
        if np.linalg.norm(a[offdiag]) <= threshold:
            return a.diagonal().real.copy(), v
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                mag = abs(apq)
                if mag <= 1e-300 or mag <= 1e-18 * scale:
                    continue
                phase = apq / mag
                app = a[p, p].real
                aqq = a[q, q].real
                theta = (aqq - app) / (2.0 * mag)
                t = (1.0 if theta >= 0 else -1.0) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                # g = diag(1, conj(phase)) @ [[c, s], [-s, c]]
                gpp, gpq = c, s
                gqp, gqq = -s * phase.conjugate(), c * phase.conjugate()
                col_p = a[:, p].copy()
                col_q = a[:, q]
                a[:, p] = col_p * gpp + col_q * gqp
                a[:, q] = col_p * gpq + col_q * gqq
                row_p = a[p, :].copy()
                row_q = a[q, :]
                a[p, :] = row_p * gpp + row_q * np.conj(gqp)
                a[q, :] = row_p * gpq + row_q * np.conj(gqq)
                a[p, q] = a[q, p] = 0.0
                a[p, p] = a[p, p].real
                a[q, q] = a[q, q].real
                vp = v[:, p].copy()
                vq = v[:, q]
                v[:, p] = vp * gpp + vq * gqp
                v[:, q] = vp * gpq + vq * gqq
    raise ConvergenceError(f"Jacobi iteration did not converge in {MAX_JACOBI_SWEEPS} sweeps")


def _canonical_basis(vectors: np.ndarray) -> np.ndarray:
    """Deterministic orthonormal basis of span(vectors).

    Standard basis vectors are projected onto the span in index order and
    Gram-Schmidt orthonormalized; the first ``k`` independent ones win.
    The result depends only on the subspace, not on the input basis.
    """
    n, k = vectors.shape
    proj = vectors @ vectors.conj().T
    out = []
    for i in range(n):
        w = proj[:, i].copy()
        for u in out:
            w -= u * np.vdot(u, w)
        for u in out:
            w -= u * np.vdot(u, w)
        norm = np.linalg.norm(w)
        if norm > 1e-6:
            out.append(w / norm)
            if len(out) == k:
                break
    return np.column_stack(out)


def hermitian_eigensystem(m: ComplexOperator) -> EigenSystem:
    """Full eigendecomposition of a Hermitian operator.

    Eigenvalues come back ascending.  Within a cluster of eigenvalues that
    agree to ``EIG_TOL`` (relative to the matrix scale) the eigenvectors are
    replaced by the canonical basis from ``_canonical_basis``; isolated
    eigenvectors get their largest component made real and positive.  The
    output is therefore a deterministic function of the input matrix.

    Raises NotHermitianError for non-Hermitian input and ConvergenceError
    if the Jacobi sweep cap (``MAX_JACOBI_SWEEPS``) is hit.
    """
    _require_hermitian(m)
    h = 0.5 * (m.matrix + m.matrix.conj().T)
    w, v = _jacobi(h)
    order = np.argsort(w, kind="stable")
    w, v = w[order], v[:, order]

    scale = max(1.0, float(np.max(np.abs(w))))
    start = 0
    n = w.size
    while start < n:
        stop = start + 1
        while stop < n and w[stop] - w[stop - 1] <= EIG_TOL * scale:
            stop += 1
        if stop - start > 1:
            v[:, start:stop] = _canonical_basis(v[:, start:stop])
        else:
            col = v[:, start]
            j = int(np.argmax(np.abs(col) > np.max(np.abs(col)) * (1 - 1e-8)))
            v[:, start] = col * (abs(col[j]) / col[j])
        start = stop
    return EigenSystem(w, v)


def operator_norm(m: ComplexOperator) -> float:
    """Largest absolute eigenvalue of a Hermitian operator."""
    _require_hermitian(m)
    h = 0.5 * (m.matrix + m.matrix.conj().T)
    return float(np.max(np.abs(np.linalg.eigvalsh(h))))


def matrix_exponential_i(h: ComplexOperator, t: float) -> ComplexOperator:
    """Return exp(-i h t) built from the eigendecomposition of ``h``."""
    es = hermitian_eigensystem(h)
    return propagator_from_eigensystem(es, t)


def propagator_from_eigensystem(es: EigenSystem, t: float) -> ComplexOperator:
    v = es.eigenvectors
    phases = np.exp(-1j * es.eigenvalues * float(t))
    return ComplexOperator((v * phases) @ v.conj().T, unitary=True)


def _rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(int(seed) & 0xFFFFFFFFFFFFFFFF)


def random_unitary(dim: int, seed: int | np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary (QR of a complex Ginibre matrix, phase-fixed)."""
    rng = seed if isinstance(seed, np.random.Generator) else _rng(seed)
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = r.diagonal()
    return q * (d / np.abs(d))


def random_hermitian(dim: int, seed: int | np.random.Generator) -> ComplexOperator:
    rng = seed if isinstance(seed, np.random.Generator) else _rng(seed)
    z = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return ComplexOperator(0.5 * (z + z.conj().T), hermitian=True)


def random_involution(dim: int, seed: int | np.random.Generator) -> ComplexOperator:
    """Random Hermitian involution V diag(+1.., -1..) V^dag with Haar V.

    Even ``dim`` always gets the balanced signature (dim/2 of each sign).
    Odd ``dim`` picks the number of +1 eigenvalues uniformly from
    {(dim-1)/2, (dim+1)/2}, so ``dim=1`` yields +1 or -1 with equal odds.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else _rng(seed)
    if dim % 2 == 0:
        n_plus = dim // 2
    else:
        n_plus = dim // 2 + int(rng.integers(0, 2))
    signs = np.array([1.0] * n_plus + [-1.0] * (dim - n_plus))
    if dim == 1:
        return ComplexOperator([[signs[0]]], hermitian=True, unitary=True)
    u = random_unitary(dim, rng)
    m = (u * signs) @ u.conj().T
    m = 0.5 * (m + m.conj().T)
    return ComplexOperator(m, hermitian=True, unitary=True)
