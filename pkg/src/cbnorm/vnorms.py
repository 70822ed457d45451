"""Vector-valued Schatten norms of PSD matrices on C^d (x) C^n.

``||X||_(s,q)`` is the norm of X viewed in L_s(M_d; L_q(M_n)). For PSD X
the cases computed here are:

* ``norm_p1``   ``||X||_(p,1) = ||Tr_2 X||_p`` (closed form);
* ``norm_1p``   ``||X||_(1,p) = min_B ||X^1/2 (B^(1/p-1) (x) I) X^1/2||_p`` over densities B;
* ``norm_sq``   the same infimum for any ``s <= q``, exponent ``1/q - 1/s``;
* ``norm_infp`` ``||X||_(inf,p) = sup_A ||(A (x) I) X (A (x) I)^dag||_p / ||A A^dag||_p``;
* ``maxmin_p``  the inf-sup expression that reproduces ``||Y||_p``.

The infimum problems are convex in B (B -> B^-a is operator convex for
0 <= a <= 1), so a handful of restarts suffices. The supremum over A is not
concave and is handled by multi-start ascent; ``OptReport.spread`` exposes
disagreement between restarts.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from . import _opt, linalg
from ._opt import OptReport
from .errors import BadExponent, DimMismatch

EPS_B = 1e-12
MAXMIN_TOL = 1e-2
P_MAX = 64.0

__all__ = [
    "NormParams",
    "OptReport",
    "norm_p1",
    "norm_1p",
    "norm_sq",
    "norm_infp",
    "maxmin_p",
    "minimizer_B",
    "objective_1p",
]


@dataclass(frozen=True)
class NormParams:
    p: float = 2.0
    restarts: int = 20
    max_iters: int = 2000
    grad_tol: float = 1e-9
    seed: int = 0

    def __post_init__(self):
        if self.p < 1:
            raise BadExponent(f"p must be >= 1, got {self.p}")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")

    def with_p(self, p: float) -> "NormParams":
        return replace(self, p=p)

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "restarts": self.restarts,
            "max_iters": self.max_iters,
            "grad_tol": self.grad_tol,
            "seed": self.seed,
        }


def _bipartite(x, split: Sequence[int]) -> tuple[np.ndarray, int, int]:
    x = linalg.as_matrix(x)
    if len(split) != 2:
        raise DimMismatch(f"expected a bipartite split, got {tuple(split)}")
    d, n = int(split[0]), int(split[1])
    if x.shape != (d * n, d * n):
        raise DimMismatch(f"split {tuple(split)} does not match shape {x.shape}")
    linalg.matrix_fn_psd(x, lambda w: w)  # raises NotPSD / NonHermitian
    return x, d, n


def _check_p(p: float) -> None:
    if not (1 <= p <= P_MAX):
        raise BadExponent(f"variational norms support 1 <= p <= {P_MAX:g}, got {p}")


def norm_p1(x, split: Sequence[int], p: float) -> float:
    """``||X||_(p,1)``: the p-norm of the first marginal."""
    x, _, _ = _bipartite(x, split)
    return linalg.schatten_norm(linalg.partial_trace(x, split, [1]), p)


def _sqrt_psd(x: np.ndarray) -> np.ndarray:
    w, v = _opt.psd_eigh(x)
    return (v * np.sqrt(w)) @ v.conj().T


def _sandwich(xh: np.ndarray, d: int, n: int, c: np.ndarray) -> np.ndarray:
    return xh @ np.kron(c, np.eye(n)) @ xh


def _ptrace2(m: np.ndarray, d: int, n: int) -> np.ndarray:
    return np.trace(m.reshape(d, n, d, n), axis1=1, axis2=3)


def _power_objective(xh, d, n, b, expo, q):
    """``log Tr (X^1/2 (B^expo (x) I) X^1/2)^q`` and ``Z`` with ``d(log...) = Tr(Z dB)``."""
    w, u = _opt.psd_eigh(b)
    w = np.maximum(w, EPS_B)
    c = (u * w ** expo) @ u.conj().T
    v = _sandwich(xh, d, n, c)
    lam, vv = _opt.psd_eigh(v)
    top = lam[-1]
    r = lam / top
    tot = float(np.sum(r ** q))
    val = q * math.log(top) + math.log(tot)
    wv = (vv * (q * r ** (q - 1) / (top * tot))) @ vv.conj().T
    wc = _ptrace2(xh @ wv @ xh, d, n)
    f = divided_differences_power(w, expo)
    z = u @ (f * (u.conj().T @ wc @ u)) @ u.conj().T
    return val, z


def divided_differences_power(w: np.ndarray, expo: float) -> np.ndarray:
    return _opt.divided_differences(w, lambda t: t ** expo, lambda t: expo * t ** (expo - 1))


def objective_1p(x, split: Sequence[int], p: float, b) -> float:
    """``||X^1/2 (B^(1/p-1) (x) I) X^1/2||_p`` for a given density B."""
    x, d, n = _bipartite(x, split)
    xh = _sqrt_psd(x)
    w, u = _opt.psd_eigh(linalg.as_matrix(b))
    c = (u * np.maximum(w, EPS_B) ** (1 / p - 1)) @ u.conj().T
    return linalg.schatten_norm(_sandwich(xh, d, n, c), p)


def norm_sq(x, split: Sequence[int], s: float, q: float, params: NormParams | None = None) -> OptReport:
    """``||X||_(s,q)`` for PSD X and ``1 <= s <= q`` via the infimum over densities B."""
    params = params or NormParams()
    if not (1 <= s <= q):
        raise BadExponent(f"norm_sq needs 1 <= s <= q, got s={s}, q={q}")
    _check_p(q)
    x, d, n = _bipartite(x, split)
    tr = float(np.trace(x).real)
    expo = 1 / q - 1 / s
    if tr <= 0:
        return OptReport(0.0, np.eye(d) / d)
    xn = x / tr
    if expo == 0.0:
        return OptReport(tr * linalg.schatten_norm(xn, q), np.eye(d, dtype=complex) / d)
    xh = _sqrt_psd(xn)
    scale = 1.0 / abs(expo)

    def fun(g):
        b = _opt.density_from_factor(g, EPS_B)
        val, z = _power_objective(xh, d, n, b, expo, q)
        return scale * val, scale * _opt.factor_chain(g, z)

    rng = np.random.default_rng(params.seed)
    starts = [_opt.random_complex((d, d), rng) for _ in range(params.restarts)]
    rep = _opt.run_multistart(fun, starts, maximize=False, max_iters=params.max_iters,
                              grad_tol=params.grad_tol, keep_traces=True)
    b = _opt.density_from_factor(rep.argument, EPS_B)
    b = b / np.trace(b).real
    to_norm = lambda v: tr * math.exp(v / (scale * q))
    rep.value = to_norm(rep.value)
    rep.restart_values = [to_norm(v) for v in rep.restart_values]
    rep.spread = max(rep.restart_values) - min(rep.restart_values)
    rep.traces = [[to_norm(v) for v in t] for t in rep.traces]
    rep.argument = b
    return rep


def norm_1p(x, split: Sequence[int], params: NormParams | None = None) -> OptReport:
    """``||X||_(1,p)`` with ``p = params.p``; ``report.argument`` is the minimizing density B."""
    params = params or NormParams()
    return norm_sq(x, split, 1.0, params.p, params)


def minimizer_B(x, split: Sequence[int], p: float, params: NormParams | None = None) -> np.ndarray:
    """Density B attaining ``||X||_(1,p)``; at p = 1 every B is optimal and X_1 is returned."""
    params = params or NormParams()
    if p == 1:
        x1 = linalg.partial_trace(linalg.as_matrix(x), split, [1])
        return x1 / np.trace(x1).real
    return norm_1p(x, split, params.with_p(p)).argument


def norm_infp(x, split: Sequence[int], params: NormParams | None = None) -> OptReport:
    """``||X||_(inf,p)`` for PSD X; ``report.argument`` is the optimal A (Frobenius-normalized)."""
    params = params or NormParams()
    p = params.p
    _check_p(p)
    x, d, n = _bipartite(x, split)
    xh = _sqrt_psd(x)
    eye_n = np.eye(n)

    def fun(a):
        m = np.kron(a, eye_n) @ xh
        num, gm = _opt.log_trpow(m, p)
        den, ga = _opt.log_trpow(a, p)
        g = _ptrace2(gm @ xh, d, n) - ga
        return (num - den) / p, g / p

    rng = np.random.default_rng(params.seed)
    starts = [_opt.random_complex((d, d), rng) for _ in range(params.restarts)]
    rep = _opt.run_multistart(fun, starts, maximize=True, max_iters=params.max_iters,
                              grad_tol=params.grad_tol, keep_traces=True)
    rep.value = math.exp(rep.value)
    rep.restart_values = [math.exp(v) for v in rep.restart_values]
    rep.spread = max(rep.restart_values) - min(rep.restart_values)
    rep.traces = [[math.exp(v) for v in t] for t in rep.traces]
    rep.argument = rep.argument / np.linalg.norm(rep.argument)
    return rep


def _maxmin_inner(zh, d, n, p, starts, max_iters):
    expo = 1 / p

    def fun(g):
        a = _opt.density_from_factor(g, EPS_B)
        val, z = _power_objective(zh, d, n, a, expo, p)
        return val, _opt.factor_chain(g, z)

    rep = _opt.run_multistart(fun, starts, maximize=True, max_iters=max_iters, grad_tol=1e-10)
    return math.exp(rep.value / p)


def maxmin_p(y, split: Sequence[int], params: NormParams | None = None) -> float:
    """Inf over densities B of sup over densities A of
    ``||(A (x) I)^(1/2p) (B (x) I)^(-1/2p) Y (B (x) I)^(-1/2p) (A (x) I)^(1/2p)||_p``.

    Nested and coarse: the inner supremum is a multi-start L-BFGS, the outer
    infimum a Nelder-Mead search over a Cholesky-like factor of B. Agreement
    with ``||Y||_p`` is expected to about ``MAXMIN_TOL``.
    """
    params = params or NormParams(restarts=3)
    p = params.p
    _check_p(p)
    y, d, n = _bipartite(y, split)
    rng = np.random.default_rng(params.seed)
    # fixed inner starts keep the outer objective deterministic for Nelder-Mead
    inner_starts = [np.eye(d, dtype=complex)] + [
        _opt.random_complex((d, d), rng) for _ in range(max(0, min(params.restarts, 3) - 1))
    ]

    def outer(xvec):
        g = (xvec[: d * d] + 1j * xvec[d * d:]).reshape(d, d)
        b = _opt.density_from_factor(g, EPS_B)
        w, u = _opt.psd_eigh(b)
        bm = (u * np.maximum(w, EPS_B) ** (-1 / (2 * p))) @ u.conj().T
        z = np.kron(bm, np.eye(n)) @ y @ np.kron(bm, np.eye(n))
        # the spectrum of A^(1/2p) Z A^(1/2p) matches Z^1/2 A^(1/p) Z^1/2
        zh = _sqrt_psd(z)
        return _maxmin_inner(zh, d, n, p, inner_starts, 200)

    y1 = linalg.partial_trace(y, split, [1])
    g0 = _sqrt_psd(y1 / np.trace(y1).real + 1e-3 * np.eye(d))
    best = math.inf
    for k in range(max(1, min(params.restarts, 2))):
        start = g0 if k == 0 else g0 + 0.3 * _opt.random_complex((d, d), rng)
        x0 = np.concatenate([start.real.ravel(), start.imag.ravel()])
        res = minimize(outer, x0, method="Nelder-Mead",
                       options={"maxfev": 250, "xatol": 1e-4, "fatol": 1e-7})
        best = min(best, float(res.fun))
    return best
