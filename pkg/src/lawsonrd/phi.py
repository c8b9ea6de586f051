"""Actions of exp(tau*M) and phi_j(tau*M) on vectors.

Two backends are provided. The spectral backend diagonalises ``M`` once
(optionally through the orthonormal sine transform for the Dirichlet
finite-difference Laplacian) and applies scalar phi functions to the
eigenvalues. The dense backend uses Pade scaling-and-squaring for the
exponential and, for the higher phi functions, the exponential of a block
matrix augmented by the vectors being acted on.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np
import scipy.fft
import scipy.linalg

__all__ = [
    "MAX_PHI_INDEX",
    "LinearPropagator",
    "PhiRequest",
    "augmented_oracle",
    "phi_scalar",
    "propagator_apply",
]

MAX_PHI_INDEX = 5
_TAYLOR_RADIUS = 1.0
_TAYLOR_TERMS = 25
_ORACLE_MAX_DIM = 200


def phi_scalar(z, j: int):
    """Evaluate phi_j(z) for scalars or arrays (real or complex).

    phi_0 is the exponential and phi_{j+1}(z) = (phi_j(z) - 1/j!)/z.
    Arguments with ``|z| < 1`` use the Taylor series sum_m z^m/(m+j)!,
    which avoids the cancellation of the recurrence near the origin.
    """
    if not 0 <= j <= MAX_PHI_INDEX:
        raise ValueError(f"phi index must lie in [0, {MAX_PHI_INDEX}], got {j}")
    scalar_input = np.ndim(z) == 0
    z = np.asarray(z)
    if not np.issubdtype(z.dtype, np.inexact):
        z = z.astype(float)
    if j == 0:
        out = np.exp(z)
        return out[()] if scalar_input else out

    out = np.empty_like(z)
    small = np.abs(z) < _TAYLOR_RADIUS
    if np.any(small):
        zs = z[small]
        acc = np.full_like(zs, 1.0 / math.factorial(_TAYLOR_TERMS - 1 + j))
        for m in range(_TAYLOR_TERMS - 2, -1, -1):
            acc = acc * zs + 1.0 / math.factorial(m + j)
        out[small] = acc
    big = ~small
    if np.any(big):
        zb = z[big]
        val = np.expm1(zb) / zb
        for i in range(1, j):
            val = (val - 1.0 / math.factorial(i)) / zb
        out[big] = val
    return out[()] if scalar_input else out


@dataclass(frozen=True)
class PhiRequest:
    """A request for phi_j(tau*M) v."""

    tau: float
    j: int
    v: np.ndarray

    def __post_init__(self):
        if self.tau < 0:
            raise ValueError("tau must be non-negative")
        if not 0 <= self.j <= MAX_PHI_INDEX:
            raise ValueError(f"phi index must lie in [0, {MAX_PHI_INDEX}]")


class LinearPropagator:
    """Immutable operator wrapper evaluating phi_j(tau*M) v.

    Build instances through :meth:`spectral`, :meth:`sine` or :meth:`dense`.
    Matrix-function data computed for a given scale are cached; the cache is
    guarded by a lock so instances may be shared between threads.
    """

    def __init__(self, matrix: np.ndarray, backend: str, *, eigenvalues=None,
                 basis=None, basis_inv=None, transform: str | None = None):
        matrix = np.asarray(matrix, dtype=float)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ValueError("operator matrix must be square")
        if not np.all(np.isfinite(matrix)):
            raise ValueError("operator matrix has non-finite entries")
        if backend not in ("spectral", "dense"):
            raise ValueError(f"unknown backend {backend!r}")
        self.matrix = matrix
        self.backend = backend
        self.eigenvalues = eigenvalues
        self.basis = basis
        self.basis_inv = basis_inv
        self.transform = transform
        self._cache: dict = {}
        self._lock = threading.Lock()

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    # -- constructors -----------------------------------------------------
    @classmethod
    def spectral(cls, matrix: np.ndarray, check: bool = True) -> "LinearPropagator":
        """Eigendecomposition backend.

        Tridiagonal matrices whose off-diagonal products are positive are
        diagonally similar to a symmetric one and go through
        ``eigh_tridiagonal``; other symmetric matrices through ``eigh`` and
        the rest through ``eig``.
        """
        m = np.asarray(matrix, dtype=float)
        symmetric = np.array_equal(m, m.T)
        tridiagonal = (np.count_nonzero(np.triu(m, 2)) == 0
                       and np.count_nonzero(np.tril(m, -2)) == 0)
        upper, lower = np.diag(m, 1), np.diag(m, -1)
        if tridiagonal and np.all(upper * lower > 0):
            # D m D^-1 is symmetric for d_{i+1} = d_i sqrt(upper_i / lower_i)
            d = np.concatenate([[1.0], np.cumprod(np.sqrt(upper / lower))])
            off = np.sqrt(upper * lower)
            lam, q = scipy.linalg.eigh_tridiagonal(np.diag(m).copy(), off)
            vec, vinv = q / d[:, None], q.T * d
        elif symmetric:
            lam, vec = np.linalg.eigh(m)
            vinv = vec.T
        else:
            lam, vec = np.linalg.eig(m)
            vinv = np.linalg.inv(vec)
            if np.max(np.abs(lam.imag)) == 0.0:
                lam, vec, vinv = lam.real, vec.real, vinv.real
        prop = cls(m, "spectral", eigenvalues=lam, basis=vec, basis_inv=vinv)
        if check:
            prop.check_reconstruction()
        return prop

    @classmethod
    def sine(cls, matrix: np.ndarray, spacing: float) -> "LinearPropagator":
        """Spectral backend for tridiag(1, -2, 1)/h^2 using the DST-I basis."""
        m = np.asarray(matrix, dtype=float)
        n = m.shape[0]
        diag_ok = np.allclose(np.diag(m), -2.0 / spacing**2, rtol=1e-13, atol=0)
        off_ok = np.allclose(np.diag(m, 1), 1.0 / spacing**2, rtol=1e-13, atol=0)
        if not (diag_ok and off_ok and np.array_equal(m, m.T)
                and np.count_nonzero(np.triu(m, 2)) == 0):
            raise ValueError("sine backend needs the Dirichlet matrix tridiag(1,-2,1)/h^2")
        modes = np.arange(1, n + 1)
        lam = -4.0 / spacing**2 * np.sin(modes * np.pi / (2 * (n + 1))) ** 2
        return cls(m, "spectral", eigenvalues=lam, transform="dst")

    @classmethod
    def dense(cls, matrix: np.ndarray) -> "LinearPropagator":
        return cls(matrix, "dense")

    def check_reconstruction(self, tol: float = 1e-10) -> float:
        """Relative residual of V diag(lambda) V^-1 against M (spectral only)."""
        if self.basis is None:
            raise ValueError("no explicit eigenbasis stored")
        rebuilt = (self.basis * self.eigenvalues) @ self.basis_inv
        scale = np.linalg.norm(self.matrix, np.inf)
        res = np.linalg.norm(rebuilt - self.matrix, np.inf) / scale
        if not res <= tol:
            raise ValueError(f"eigendecomposition residual {res:.3e} exceeds {tol:.1e}")
        return float(res)

    # -- evaluation -------------------------------------------------------
    def apply(self, tau: float, j: int, v: np.ndarray) -> np.ndarray:
        """Return phi_j(tau*M) v; ``v`` may carry leading batch axes."""
        v = np.asarray(v)
        if v.shape[-1:] != (self.dimension,):
            raise ValueError(f"vector length {v.shape[-1:]} does not match dimension {self.dimension}")
        if not np.all(np.isfinite(v)):
            raise ValueError("non-finite input vector")
        if tau < 0:
            raise ValueError("tau must be non-negative")
        if not 0 <= j <= MAX_PHI_INDEX:
            raise ValueError(f"phi index must lie in [0, {MAX_PHI_INDEX}]")
        if tau == 0.0:
            return v / math.factorial(j)
        if self.backend == "spectral":
            weights = self._cached(("phi", tau, j), lambda: phi_scalar(tau * self.eigenvalues, j))
            return self._from_modal(weights * self._to_modal(v))
        return self._dense_apply(tau, j, v)

    def _to_modal(self, v):
        if self.transform == "dst":
            return scipy.fft.dst(v, type=1, norm="ortho", axis=-1)
        return v @ self.basis_inv.T

    def _from_modal(self, w):
        if self.transform == "dst":
            return scipy.fft.idst(w, type=1, norm="ortho", axis=-1)
        out = w @ self.basis.T
        return out.real if np.iscomplexobj(out) else out

    def _cached(self, key, factory):
        with self._lock:
            hit = self._cache.get(key)
        if hit is not None:
            return hit
        value = factory()
        with self._lock:
            return self._cache.setdefault(key, value)

    def _dense_apply(self, tau, j, v):
        scaled_norm = tau * np.linalg.norm(self.matrix, np.inf)
        if j > 0 and scaled_norm <= _TAYLOR_RADIUS:
            # sum_m (tau M)^m v / (m+j)!, truncated once terms drop below roundoff
            term = v / math.factorial(j)
            acc = term.copy()
            for m in range(1, 40):
                term = tau * (term @ self.matrix.T) / (m + j)
                acc = acc + term
                if np.max(np.abs(term)) <= 1e-18 * np.max(np.abs(acc), initial=1e-300):
                    break
            return acc
        if j == 0:
            expo = self._cached(("expm", tau), lambda: scipy.linalg.expm(tau * self.matrix))
            return v @ expo.T
        # the phi_j recurrence through M^-1 cancels badly when tau*|lambda| is
        # small for some modes, so use one augmented exponential per chunk
        n = self.dimension
        flat = v.reshape(-1, n)
        chunk = max(1, n // j)
        out = np.empty_like(flat)
        for start in range(0, flat.shape[0], chunk):
            block = flat[start:start + chunk]
            out[start:start + len(block)] = _augmented_batch(tau * self.matrix, j, block)
        return out.reshape(v.shape)

    def exponential_matrix(self, tau: float) -> np.ndarray:
        """Dense matrix exp(tau*M)."""
        if self.backend == "dense":
            return self._cached(("expm", tau), lambda: scipy.linalg.expm(tau * self.matrix))
        return self.matrix_function(lambda z: np.exp(tau * z))

    def matrix_function(self, fn) -> np.ndarray:
        """Dense matrix fn(M) through the eigensystem (spectral backend only)."""
        if self.backend != "spectral":
            raise ValueError("matrix_function needs the spectral backend")
        vals = fn(self.eigenvalues)
        if self.transform == "dst":
            eye = np.eye(self.dimension)
            basis = scipy.fft.dst(eye, type=1, norm="ortho", axis=0)
            return (basis * vals) @ basis.T
        out = (self.basis * vals) @ self.basis_inv
        return out.real if np.iscomplexobj(out) else out


def propagator_apply(prop: LinearPropagator, request: PhiRequest) -> np.ndarray:
    """Functional form of :meth:`LinearPropagator.apply`."""
    return prop.apply(request.tau, request.j, request.v)


def _augmented_batch(scaled: np.ndarray, j: int, vectors: np.ndarray) -> np.ndarray:
    """Rows phi_j(scaled) v for each row v, from a single block exponential."""
    n, p = scaled.shape[0], vectors.shape[0]
    big = np.zeros((n + j * p, n + j * p))
    big[:n, :n] = scaled
    for q in range(p):
        first = n + q * j
        big[:n, first] = vectors[q]
        for i in range(j - 1):
            big[first + i, first + i + 1] = 1.0
    expo = scipy.linalg.expm(big)
    return expo[:n, n + j - 1::j].T


def augmented_oracle(matrix: np.ndarray, tau: float, j: int, v: np.ndarray) -> np.ndarray:
    """phi_j(tau*M) v from the exponential of one augmented block matrix.

    The top-right block of ``expm([[tau*M, v e_1^T], [0, J]])`` with ``J``
    the nilpotent shift holds phi_l(tau*M) v in its l-th column.
    Only meant as a small-dimension cross-check.
    """
    m = np.atleast_2d(np.asarray(matrix, dtype=float))
    v = np.atleast_1d(np.asarray(v, dtype=float))
    n = m.shape[0]
    if n > _ORACLE_MAX_DIM:
        raise ValueError(f"augmented oracle limited to dimension {_ORACLE_MAX_DIM}")
    if v.shape != (n,):
        raise ValueError("vector length does not match matrix")
    if j == 0:
        return scipy.linalg.expm(tau * m) @ v
    if tau == 0.0:
        return v / math.factorial(j)
    big = np.zeros((n + j, n + j))
    big[:n, :n] = tau * m
    big[:n, n] = v
    for i in range(j - 1):
        big[n + i, n + i + 1] = 1.0
    return scipy.linalg.expm(big)[:n, n + j - 1]
