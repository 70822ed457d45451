"""Dense Hermitian linear algebra on tensor-product spaces.

Matrices are plain ``numpy`` complex arrays. A *split* is a tuple of factor
dimensions ``(d1, d2[, d3, ...])`` describing how the row/column index of a
square matrix factors as a tensor product (first factor most significant,
matching ``numpy.kron``).

All entropies are in bits.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import BadExponent, DimMismatch, NonHermitian, NotPSD, UnnormalizedStateWarning

TOL_HERM = 1e-10
TOL_EIG = 1e-9
TOL_TRACE = 1e-9
EIG_CLIP = 1e-15


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray  # real, descending
    eigenvectors: np.ndarray  # columns

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


@dataclass(frozen=True)
class BipartiteState:
    """Pure state on C^d1 (x) C^d2 stored by its coefficient matrix.

    ``psi = sum_jk coeffs[j, k] e_j (x) e_k``, so the first marginal is
    ``coeffs @ coeffs^dagger``.
    """

    coeffs: np.ndarray

    @property
    def dims(self) -> tuple[int, int]:
        return self.coeffs.shape

    @property
    def vector(self) -> np.ndarray:
        return self.coeffs.reshape(-1)

    @property
    def projector(self) -> np.ndarray:
        v = self.vector
        return np.outer(v, v.conj())

    def marginal(self, which: int = 1) -> np.ndarray:
        a = self.coeffs
        if which == 1:
            return a @ a.conj().T
        return a.T @ a.conj()

    def normalized(self) -> "BipartiteState":
        return BipartiteState(self.coeffs / np.linalg.norm(self.coeffs))


def as_matrix(m) -> np.ndarray:
    arr = np.asarray(m, dtype=complex)
    if arr.ndim != 2:
        raise DimMismatch(f"expected a 2-d matrix, got shape {arr.shape}")
    return arr


def check_hermitian(h: np.ndarray, tol: float = TOL_HERM) -> None:
    scale = max(np.linalg.norm(h), 1.0)
    err = np.linalg.norm(h - h.conj().T)
    if err > tol * scale:
        raise NonHermitian(f"||H - H^dag||_F = {err:.3e} exceeds {tol:.1e} (relative)")


def herm_eig(h, tol: float = TOL_HERM) -> Spectrum:
    """Eigendecomposition of a Hermitian matrix, eigenvalues descending."""
    h = as_matrix(h)
    if h.shape[0] != h.shape[1]:
        raise DimMismatch(f"matrix is not square: {h.shape}")
    check_hermitian(h, tol)
    w, v = np.linalg.eigh(0.5 * (h + h.conj().T))
    return Spectrum(w[::-1].copy(), v[:, ::-1].copy())


def _psd_eigh(q: np.ndarray, tol: float = TOL_HERM) -> tuple[np.ndarray, np.ndarray]:
    spec = herm_eig(q, tol)
    w = spec.eigenvalues
    scale = max(np.linalg.norm(q), 1e-300)
    if w.size and w[-1] < -tol * scale:
        raise NotPSD(f"minimum eigenvalue {w[-1]:.3e} is negative")
    return w, spec.eigenvectors


def clip_eigenvalues(w: np.ndarray) -> np.ndarray:
    """Zero eigenvalues below ``EIG_CLIP * max(w)`` (and negatives)."""
    if w.size == 0:
        return w
    top = max(float(np.max(w)), 0.0)
    out = np.where(w > EIG_CLIP * top, w, 0.0)
    return out


def schatten_norm(m, p: float) -> float:
    """Schatten p-norm from singular values; ``p = inf`` gives the operator norm."""
    if not (p == math.inf or p >= 1):
        raise BadExponent(f"Schatten norm needs p >= 1, got {p}")
    s = np.linalg.svd(as_matrix(m), compute_uv=False)
    if p == math.inf:
        return float(s[0]) if s.size else 0.0
    if s.size == 0 or s[0] == 0.0:
        return 0.0
    # scale out the largest singular value to keep large p finite
    return float(s[0] * np.sum((s / s[0]) ** p) ** (1.0 / p))


def kron(*mats) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for m in mats:
        out = np.kron(out, m)
    return out


def _check_split(m: np.ndarray, dims: Sequence[int]) -> tuple[int, ...]:
    dims = tuple(int(d) for d in dims)
    if any(d < 1 for d in dims):
        raise DimMismatch(f"factor dimensions must be positive: {dims}")
    n = int(np.prod(dims))
    if m.shape != (n, n):
        raise DimMismatch(f"split {dims} needs a {n}x{n} matrix, got {m.shape}")
    return dims


def partial_trace(m, dims: Sequence[int], keep: Iterable[int]) -> np.ndarray:
    """Trace out every factor not listed in ``keep`` (factors numbered from 1).

    The kept factors stay in their original order.
    """
    m = as_matrix(m)
    dims = _check_split(m, dims)
    keep = sorted({int(k) for k in keep})
    n = len(dims)
    if any(k < 1 or k > n for k in keep):
        raise DimMismatch(f"keep={keep} out of range for {n} factors")
    t = m.reshape(dims + dims)
    letters = "abcdefghijklmnopqrstuvwxyz"
    rows = list(letters[:n])
    cols = list(letters[n:2 * n])
    for i in range(n):
        if i + 1 not in keep:
            cols[i] = rows[i]
    out_rows = "".join(rows[i] for i in range(n) if i + 1 in keep)
    out_cols = "".join(cols[i] for i in range(n) if i + 1 in keep)
    spec = "".join(rows) + "".join(cols) + "->" + out_rows + out_cols
    res = np.einsum(spec, t)
    k = int(np.prod([dims[i - 1] for i in keep])) if keep else 1
    return res.reshape(k, k)


def permute_systems(m, dims: Sequence[int], order: Sequence[int]) -> np.ndarray:
    """Reorder tensor factors; ``order`` lists the old factor (1-based) for each new slot."""
    m = as_matrix(m)
    dims = _check_split(m, dims)
    n = len(dims)
    perm = [o - 1 for o in order]
    if sorted(perm) != list(range(n)):
        raise DimMismatch(f"bad permutation {order}")
    t = m.reshape(dims + dims).transpose(perm + [p + n for p in perm])
    size = int(np.prod(dims))
    return t.reshape(size, size)


def matrix_fn_psd(q, f: Callable[[np.ndarray], np.ndarray], tol: float = TOL_HERM) -> np.ndarray:
    """Apply ``f`` to the spectrum of a PSD matrix.

    Eigenvalues under the clip threshold are passed to ``f`` as exact zeros,
    and ``f(0)`` is taken to be 0 whatever ``f`` itself returns there.
    """
    q = as_matrix(q)
    w, v = _psd_eigh(q, tol)
    w = clip_eigenvalues(w)
    fw = np.zeros_like(w)
    pos = w > 0
    if np.any(pos):
        fw[pos] = f(w[pos])
    return (v * fw) @ v.conj().T


def psd_power(q, s: float) -> np.ndarray:
    """``Q**s`` on the support of Q (negative powers act as pseudo-inverse powers)."""
    return matrix_fn_psd(q, lambda x: x ** s)


def entropy_of_spectrum(w: np.ndarray) -> float:
    w = clip_eigenvalues(np.asarray(w, dtype=float))
    w = w[w > 0]
    return float(-np.sum(w * np.log2(w)))


def von_neumann_entropy(rho, tol: float = TOL_HERM) -> float:
    """Entropy ``-Tr rho log2 rho`` in bits.

    A matrix whose trace differs from 1 by more than ``TOL_TRACE`` is
    normalized first, with an :class:`UnnormalizedStateWarning`.
    """
    rho = as_matrix(rho)
    w, _ = _psd_eigh(rho, tol)
    w = clip_eigenvalues(w)
    tr = float(np.sum(w))
    if abs(tr - 1.0) > TOL_TRACE:
        warnings.warn(f"trace {tr:.12g} != 1; normalizing", UnnormalizedStateWarning, stacklevel=2)
        if tr <= 0:
            return 0.0
        w = w / tr
    return entropy_of_spectrum(w)


def conditional_entropy(gamma12, dims: Sequence[int]) -> float:
    """S(gamma12) - S(gamma1) in bits, with gamma1 the first-factor marginal."""
    gamma12 = as_matrix(gamma12)
    dims = _check_split(gamma12, dims)
    if len(dims) != 2:
        raise DimMismatch(f"conditional entropy needs a bipartite split, got {dims}")
    return von_neumann_entropy(gamma12) - von_neumann_entropy(partial_trace(gamma12, dims, [1]))


def purify(rho) -> BipartiteState:
    """Purification of ``rho`` on C^d (x) C^d; ancilla basis ordered by descending eigenvalue."""
    rho = as_matrix(rho)
    w, v = _psd_eigh(rho)
    w = clip_eigenvalues(w)
    return BipartiteState(v * np.sqrt(w))


def schmidt(psi: BipartiteState) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Schmidt coefficients with left/right bases as columns.

    ``psi = sum_k mu[k] left[:, k] (x) right[:, k]``.
    """
    u, s, vh = np.linalg.svd(psi.coeffs)
    return s, u[:, : s.size], vh[: s.size, :].T


def random_density(d: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Ginibre-induced random density matrix ``G G^dag / Tr(G G^dag)``."""
    k = d if rank is None else rank
    g = rng.standard_normal((d, k)) + 1j * rng.standard_normal((d, k))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_pure_state(dims: tuple[int, int], rng: np.random.Generator) -> BipartiteState:
    a = rng.standard_normal(dims) + 1j * rng.standard_normal(dims)
    return BipartiteState(a / np.linalg.norm(a))


def max_entangled(d: int) -> BipartiteState:
    return BipartiteState(np.eye(d, dtype=complex) / math.sqrt(d))
