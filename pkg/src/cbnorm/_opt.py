"""Multi-start quasi-Newton optimization over complex matrix parameters.

Objectives are supplied as ``f(z) -> (value, grad)`` where ``z`` is a complex
array and ``grad = df/dRe(z) + 1j * df/dIm(z)``. The driver wraps
``scipy.optimize.minimize`` (L-BFGS-B) on the stacked real/imaginary parts.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize

from .linalg import EIG_CLIP


@dataclass
class OptReport:
    value: float
    argument: np.ndarray
    iterations: int = 0
    restarts_used: int = 0
    converged: bool = True
    spread: float = 0.0
    restart_values: list = field(default_factory=list)
    traces: list = field(default_factory=list)  # objective per iteration, per restart

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "iterations": self.iterations,
            "restarts_used": self.restarts_used,
            "converged": self.converged,
            "spread": self.spread,
            "restart_values": list(self.restart_values),
        }


def _pack(z: np.ndarray) -> np.ndarray:
    return np.concatenate([z.real.ravel(), z.imag.ravel()])


def _unpack(x: np.ndarray, shape) -> np.ndarray:
    n = x.size // 2
    return (x[:n] + 1j * x[n:]).reshape(shape)


def run_multistart(
    fun: Callable[[np.ndarray], tuple[float, np.ndarray]],
    starts: Sequence[np.ndarray],
    maximize: bool = False,
    max_iters: int = 2000,
    grad_tol: float = 1e-9,
    keep_traces: bool = False,
) -> OptReport:
    """Run L-BFGS from every start; return the best point found.

    ``value`` in the report is the raw objective (not negated) at the best
    argument.
    """
    sign = -1.0 if maximize else 1.0
    best = None
    values, traces = [], []
    total_iters = 0
    for z0 in starts:
        shape = z0.shape

        def wrapped(x):
            f, g = fun(_unpack(x, shape))
            return sign * f, sign * _pack(g)

        trace: list[float] = []

        def callback(intermediate_result):
            trace.append(sign * float(intermediate_result.fun))

        res = minimize(
            wrapped,
            _pack(np.asarray(z0, dtype=complex)),
            jac=True,
            method="L-BFGS-B",
            callback=callback if keep_traces else None,
            options={"maxiter": max_iters, "gtol": grad_tol, "ftol": 1e-15, "maxls": 50},
        )
        z = _unpack(res.x, shape)
        f = sign * float(res.fun)
        values.append(f)
        total_iters += int(res.nit)
        if keep_traces:
            traces.append(trace)
        gnorm = float(np.max(np.abs(res.jac))) if res.jac is not None else np.inf
        ok = bool(res.success) or gnorm <= grad_tol
        if best is None or sign * f < sign * best[0]:
            best = (f, z, ok)
    assert best is not None
    return OptReport(
        value=best[0],
        argument=best[1],
        iterations=total_iters,
        restarts_used=len(values),
        converged=best[2],
        spread=float(max(values) - min(values)),
        restart_values=values,
        traces=traces,
    )


def random_complex(shape, rng: np.random.Generator) -> np.ndarray:
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


# objective building blocks -------------------------------------------------


def log_trpow(m: np.ndarray, p: float) -> tuple[float, np.ndarray]:
    """``log Tr (M M^dag)^p`` and its gradient with respect to M."""
    u, s, vh = np.linalg.svd(m, full_matrices=False)
    s0 = s[0]
    r = s / s0
    r = np.where(r > np.sqrt(EIG_CLIP), r, 0.0)
    tot = float(np.sum(r ** (2 * p)))
    val = 2 * p * np.log(s0) + np.log(tot)
    coef = 2 * p * r ** (2 * p - 1) / (s0 * tot)
    return val, (u * coef) @ vh


def entropy_and_grad(m: np.ndarray) -> tuple[float, np.ndarray]:
    """Entropy (nats) of ``M M^dag / Tr(M M^dag)`` and its gradient in M."""
    u, s, vh = np.linalg.svd(m, full_matrices=False)
    t = float(np.sum(s ** 2))
    lam = s ** 2 / t
    pos = lam > EIG_CLIP * lam[0]
    loglam = np.zeros_like(lam)
    loglam[pos] = np.log(lam[pos])
    h = float(-np.sum(lam[pos] * loglam[pos]))
    coef = np.where(pos, 2 * (-loglam - h) * s / t, 0.0)
    return h, (u * coef) @ vh


def psd_eigh(h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    w, v = np.linalg.eigh(0.5 * (h + h.conj().T))
    return np.clip(w, 0.0, None), v


def divided_differences(w: np.ndarray, f, df) -> np.ndarray:
    """First divided differences of a scalar function on a spectrum."""
    fw = f(w)
    dw = w[:, None] - w[None, :]
    close = np.abs(dw) <= 1e-10 * max(float(np.max(np.abs(w))), 1e-300)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (fw[:, None] - fw[None, :]) / dw
    mid = 0.5 * (w[:, None] + w[None, :])
    return np.where(close, df(mid), out)


def density_from_factor(g: np.ndarray, eps: float) -> np.ndarray:
    b = g @ g.conj().T
    return b / np.trace(b).real + eps * np.eye(g.shape[0])


def factor_chain(g: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Pull back ``Tr(Z dB)`` through ``B = G G^dag / Tr(G G^dag)`` to a gradient in G."""
    t = float(np.sum(np.abs(g) ** 2))
    zg = z @ g
    return 2 * zg / t - 2 * float(np.real(np.vdot(g, zg))) * g / t ** 2
