"""CB 1->p norms, minimal CB conditional entropy and their closed forms.

For a channel Phi with Kraus operators K_j and a pure input
``psi_A = sum_jk A_jk e_j (x) e_k`` the output ``gamma12 = (I (x) Phi)(psi psi^dag)``
equals ``M M^dag`` where column j of M is ``vec(A K_j^T)``. Every optimization
below runs over the unconstrained complex matrix A; the objectives are scale
invariant so no normalization constraint is needed.

Entropies are reported in bits.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy.optimize import bisect

from . import _opt, linalg
from .channels import Channel, nonunital_qubit, tensor
from .errors import BadExponent, BadName, DimMismatch, NoSignChange, NotCP, NotTP
from .linalg import BipartiteState
from .vnorms import NormParams, OptReport

LN2 = math.log(2.0)
DEFAULT_P_GRID = (1.2, 1.1, 1.05, 1.02, 1.01)
PRINTED_MU_STAR = 0.74592
TENSOR_RESTART_FACTOR = 3


@dataclass
class CbResult:
    value: float
    state: BipartiteState
    report: OptReport = field(repr=False)

    def to_dict(self) -> dict:
        a = self.state.coeffs
        return {
            "value": self.value,
            "state_schmidt": np.linalg.svd(a, compute_uv=False).tolist(),
            "report": self.report.to_dict(),
        }


class TensorCheck(NamedTuple):
    lhs: float
    rhs: float
    gap: float


# output of I (x) Phi on a pure input -------------------------------------------


def output_factor(a: np.ndarray, phi: Channel) -> np.ndarray:
    """Matrix M with ``M M^dag = (I (x) Phi)(psi_A psi_A^dag)``."""
    cols = np.einsum("ik,rjk->rij", a, phi.kraus_array)  # A K_r^T
    return cols.reshape(len(phi.kraus), -1).T


def _pull_back(gm: np.ndarray, a: np.ndarray, phi: Channel) -> np.ndarray:
    """Gradient in A from the gradient in M (see ``output_factor``)."""
    r = len(phi.kraus)
    g = gm.T.reshape(r, a.shape[0], phi.d_out)
    return np.einsum("rij,rjk->ik", g, phi.kraus_array.conj())


def output_state(phi: Channel, psi: BipartiteState) -> np.ndarray:
    m = output_factor(psi.coeffs, phi)
    return m @ m.conj().T


def _check_input_dims(phi: Channel, seeds) -> list[np.ndarray]:
    out = []
    for s in seeds or ():
        s = np.asarray(s.coeffs if isinstance(s, BipartiteState) else s, dtype=complex)
        if s.shape != (phi.d_in, phi.d_in):
            raise DimMismatch(f"seed state shape {s.shape} != ({phi.d_in}, {phi.d_in})")
        out.append(s)
    return out


def _starts(phi: Channel, params: NormParams, seeds) -> list[np.ndarray]:
    rng = np.random.default_rng(params.seed)
    d = phi.d_in
    return _check_input_dims(phi, seeds) + [_opt.random_complex((d, d), rng) for _ in range(params.restarts)]


def _max_entangled_report(value: float, d: int) -> OptReport:
    return OptReport(value, np.eye(d, dtype=complex) / math.sqrt(d), restart_values=[value])


# omega_p, nu_p ----------------------------------------------------------------------


def _log_ratio(a: np.ndarray, phi: Channel, p: float) -> tuple[float, np.ndarray]:
    num, gm = _opt.log_trpow(output_factor(a, phi), p)
    den, ga = _opt.log_trpow(a, p)
    return (num - den) / p, (_pull_back(gm, a, phi) - ga) / p


def omega_ratio(phi: Channel, psi: BipartiteState, p: float) -> float:
    """``||gamma12||_p / ||gamma1||_p`` for the given input state."""
    return linalg.schatten_norm(output_state(phi, psi), p) / linalg.schatten_norm(psi.marginal(1), p)


def omega_p(phi: Channel, p: float, params: NormParams | None = None,
            use_max_entangled: bool = False, seeds: Sequence | None = None) -> CbResult:
    """``omega_p(Phi) = ||Phi||_CB,1->p`` as a supremum over pure bipartite inputs.

    ``use_max_entangled`` evaluates only at the maximally entangled input,
    which is exact for covariant channels. ``seeds`` are extra starting
    coefficient matrices tried before the random restarts.
    """
    params = params or NormParams()
    if p < 1:
        raise BadExponent(f"omega_p needs p >= 1, got {p}")
    if use_max_entangled:
        psi = linalg.max_entangled(phi.d_in)
        val = omega_ratio(phi, psi, p)
        return CbResult(val, psi, _max_entangled_report(val, phi.d_in))
    rep = _opt.run_multistart(lambda a: _log_ratio(a, phi, p), _starts(phi, params, seeds),
                              maximize=True, max_iters=params.max_iters, grad_tol=params.grad_tol)
    psi = BipartiteState(rep.argument).normalized()
    rep.restart_values = [math.exp(v) for v in rep.restart_values]
    rep.spread = max(rep.restart_values) - min(rep.restart_values)
    value = omega_ratio(phi, psi, p)
    rep.value = value
    rep.argument = psi.coeffs
    return CbResult(value, psi, rep)


def nu_p(phi: Channel, p: float, params: NormParams | None = None) -> CbResult:
    """``nu_p(Phi) = sup_rho ||Phi(rho)||_p`` over pure inputs (the maximum of a convex function).

    The returned state has a one-dimensional reference factor.
    """
    params = params or NormParams()
    if p < 1:
        raise BadExponent(f"nu_p needs p >= 1, got {p}")
    k = phi.kraus_array

    def fun(v):
        n = np.einsum("rij,j->ir", k, v)  # columns K_r v
        val, gn = _opt.log_trpow(n, p)
        nv = float(np.vdot(v, v).real)
        g = np.einsum("rji,jr->i", k.conj(), gn) - p * 2 * v / nv
        return val / p - math.log(nv), g / p

    rng = np.random.default_rng(params.seed)
    starts = [_opt.random_complex(phi.d_in, rng) for _ in range(params.restarts)]
    rep = _opt.run_multistart(fun, starts, maximize=True, max_iters=params.max_iters,
                              grad_tol=params.grad_tol)
    v = rep.argument / np.linalg.norm(rep.argument)
    value = linalg.schatten_norm(phi(np.outer(v, v.conj())), p)
    rep.restart_values = [math.exp(x) for x in rep.restart_values]
    rep.spread = max(rep.restart_values) - min(rep.restart_values)
    rep.value = value
    rep.argument = v
    return CbResult(value, BipartiteState(v[None, :]), rep)


# S_CB,min ------------------------------------------------------------------------------


def conditional_entropy_of_input(phi: Channel, psi: BipartiteState) -> float:
    gamma12 = output_state(phi, psi)
    return linalg.conditional_entropy(gamma12 / np.trace(gamma12).real, (phi.d_in, phi.d_out))


def _cond_entropy_nats(a: np.ndarray, phi: Channel) -> tuple[float, np.ndarray]:
    h12, gm = _opt.entropy_and_grad(output_factor(a, phi))
    h1, ga = _opt.entropy_and_grad(a)
    return h12 - h1, _pull_back(gm, a, phi) - ga


def s_cb_min(phi: Channel, params: NormParams | None = None,
             use_max_entangled: bool = False, seeds: Sequence | None = None) -> CbResult:
    """Minimal CB conditional entropy ``inf_psi S(gamma12) - S(gamma1)`` in bits."""
    params = params or NormParams()
    if not phi.is_tp:
        raise NotTP(f"S_CB,min needs a trace-preserving channel (residual {phi.tp_residual:.3e})")
    if use_max_entangled:
        psi = linalg.max_entangled(phi.d_in)
        val = conditional_entropy_of_input(phi, psi)
        return CbResult(val, psi, _max_entangled_report(val, phi.d_in))
    rep = _opt.run_multistart(lambda a: _cond_entropy_nats(a, phi), _starts(phi, params, seeds),
                              maximize=False, max_iters=params.max_iters, grad_tol=params.grad_tol)
    psi = BipartiteState(rep.argument).normalized()
    rep.restart_values = [v / LN2 for v in rep.restart_values]
    rep.spread = max(rep.restart_values) - min(rep.restart_values)
    value = conditional_entropy_of_input(phi, psi)
    rep.value = value
    rep.argument = psi.coeffs
    return CbResult(value, psi, rep)


# u(p, gamma12) and the limit formula -----------------------------------------------------


def u_fn(p: float, gamma12, split: Sequence[int]) -> float:
    """``(1 - Tr gamma12^p / Tr gamma1^p) / (p - 1)``, evaluated in nats and returned in bits."""
    if not p > 1:
        raise BadExponent(f"u(p, gamma) is defined for p > 1, got {p}")
    gamma12 = linalg.as_matrix(gamma12)
    gamma1 = linalg.partial_trace(gamma12, split, [1])
    ratio = (linalg.schatten_norm(gamma12, p) / linalg.schatten_norm(gamma1, p)) ** p
    return (1 - ratio) / (p - 1) / LN2


def limit_curve(phi: Channel, p_grid: Sequence[float] | None = None,
                params: NormParams | None = None, use_max_entangled: bool = False) -> list[dict]:
    """``(1 - omega_p^p)/(p - 1)`` in bits at each grid point."""
    params = params or NormParams()
    grid = list(DEFAULT_P_GRID if p_grid is None else p_grid)
    if not grid or any(not (1 < p <= 2) for p in grid):
        raise BadExponent(f"p_grid must lie in (1, 2], got {grid}")
    if not phi.is_tp:
        raise NotTP(f"the limit formula needs a trace-preserving channel (residual {phi.tp_residual:.3e})")
    rows = []
    for p in grid:
        om = omega_p(phi, p, params, use_max_entangled).value
        rows.append({"p": p, "omega": om, "quotient": (1 - om ** p) / (p - 1) / LN2})
    return rows


def extrapolate_to_one(rows: Sequence[dict]) -> float:
    """Linear extrapolation in (p - 1) to p = 1 from the two grid points closest to 1."""
    pts = sorted(rows, key=lambda r: r["p"])[:2]
    if len(pts) == 1:
        return pts[0]["quotient"]
    (x1, y1), (x2, y2) = [(r["p"] - 1, r["quotient"]) for r in pts]
    return y1 - (y2 - y1) / (x2 - x1) * x1


def cb_limit_estimate(phi: Channel, p_grid: Sequence[float] | None = None,
                      params: NormParams | None = None, use_max_entangled: bool = False) -> float:
    """Estimate of S_CB,min (bits) from the p -> 1+ limit of ``(1 - omega_p^p)/(p - 1)``."""
    return extrapolate_to_one(limit_curve(phi, p_grid, params, use_max_entangled))


# closed forms --------------------------------------------------------------------------


def _xlog2x(x: float) -> float:
    return x * math.log2(x) if x > 0 else 0.0


def omega_dep(d: int, mu: float, p: float) -> float:
    big = 1 - mu + d * d * mu
    return d ** (-(p + 1) / p) * (big ** p + (d * d - 1) * (1 - mu) ** p) ** (1 / p)


def scb_dep(d: int, mu: float) -> float:
    big = 1 - mu + d * d * mu
    return math.log2(d) - (_xlog2x(big) + (d * d - 1) * _xlog2x(1 - mu)) / (d * d)


def nu_dep_qubit(mu: float, p: float) -> float:
    return 0.5 * ((1 + mu) ** p + (1 - mu) ** p) ** (1 / p)


def omega_wh(d: int, p: float) -> float:
    return (2 / (d - 1)) ** (1 - 1 / p)


def nu_wh(d: int, p: float) -> float:
    return (1 / (d - 1)) ** (1 - 1 / p)


def scb_wh(d: int) -> float:
    return math.log2((d - 1) / 2)


_CLOSED_FORMS = {
    "omega_dep": (omega_dep, ("d", "mu", "p")),
    "scb_dep": (scb_dep, ("d", "mu")),
    "nu_dep_qubit": (nu_dep_qubit, ("mu", "p")),
    "omega_wh": (omega_wh, ("d", "p")),
    "nu_wh": (nu_wh, ("d", "p")),
    "scb_wh": (scb_wh, ("d",)),
}


def closed_forms(name: str, d: int | None = None, mu: float | None = None, p: float | None = None) -> float:
    """Evaluate a named closed-form reference value (entropies in bits)."""
    if name not in _CLOSED_FORMS:
        raise BadName(f"unknown closed form {name!r}; choose from {sorted(_CLOSED_FORMS)}")
    fn, needs = _CLOSED_FORMS[name]
    given = {"d": d, "mu": mu, "p": p}
    missing = [k for k in needs if given[k] is None]
    if missing:
        raise BadName(f"{name} needs {missing}")
    return fn(*(given[k] for k in needs))


# tensor-product checks -------------------------------------------------------------------


def _tensor_params(params: NormParams) -> NormParams:
    from dataclasses import replace

    return replace(params, restarts=params.restarts * TENSOR_RESTART_FACTOR)


def mult_check_omega(phi_a: Channel, phi_b: Channel, p: float,
                     params: NormParams | None = None) -> TensorCheck:
    """``omega_p(A (x) B)`` against ``omega_p(A) omega_p(B)``.

    The tensor optimization is seeded at the product of the factor optima,
    so ``lhs >= rhs`` up to rounding by construction.
    """
    params = params or NormParams()
    ra, rb = omega_p(phi_a, p, params), omega_p(phi_b, p, params)
    seed = np.kron(ra.state.coeffs, rb.state.coeffs)
    lhs = omega_p(tensor(phi_a, phi_b), p, _tensor_params(params), seeds=[seed]).value
    rhs = ra.value * rb.value
    return TensorCheck(lhs, rhs, lhs - rhs)


def add_check_scb(phi_a: Channel, phi_b: Channel, params: NormParams | None = None) -> TensorCheck:
    """``S_CB,min(A (x) B)`` against ``S_CB,min(A) + S_CB,min(B)`` (product-seeded)."""
    params = params or NormParams()
    ra, rb = s_cb_min(phi_a, params), s_cb_min(phi_b, params)
    seed = np.kron(ra.state.coeffs, rb.state.coeffs)
    lhs = s_cb_min(tensor(phi_a, phi_b), _tensor_params(params), seeds=[seed]).value
    rhs = ra.value + rb.value
    return TensorCheck(lhs, rhs, lhs - rhs)


# depolarizing threshold -------------------------------------------------------------------


@dataclass(frozen=True)
class MuStar:
    root: float
    printed_value: float
    discrepancy: float
    tol: float

    @property
    def discrepancy_flagged(self) -> bool:
        return abs(self.discrepancy) > 10 * self.tol

    def to_dict(self) -> dict:
        return {
            "root": self.root,
            "printed_value": self.printed_value,
            "discrepancy": self.discrepancy,
            "discrepancy_flagged": self.discrepancy_flagged,
            "tol": self.tol,
        }


def mu_star(d: int = 2, bracket: tuple[float, float] = (0.5, 0.9), tol: float = 1e-6) -> MuStar:
    """Sign change of ``scb_dep(d, mu)`` located by bisection."""
    lo, hi = bracket
    f_lo, f_hi = scb_dep(d, lo), scb_dep(d, hi)
    if f_lo * f_hi > 0:
        raise NoSignChange(f"scb_dep({d}, mu) has the same sign at {lo} and {hi}")
    samples = [scb_dep(d, m) for m in np.linspace(lo, hi, 41)]
    if np.any(np.diff(samples) > 0):
        raise NoSignChange(f"scb_dep({d}, mu) is not monotone on [{lo}, {hi}]")
    root = float(bisect(lambda m: scb_dep(d, m), lo, hi, xtol=tol * 1e-3))
    printed = PRINTED_MU_STAR if d == 2 else float("nan")
    return MuStar(root, printed, root - printed, tol)


# non-unital qubit map ----------------------------------------------------------------------


def nonunital_gamma(a: float, lam: float, tau: float) -> np.ndarray:
    """Output for the input ``sqrt(a)|00> + sqrt(1-a)|11>``, entries laid out as displayed
    in the source (output factor first, reference second)."""
    off = lam * math.sqrt(a * (1 - a))
    g = np.diag([a * (1 + tau + lam), (1 - a) * (1 + tau - lam),
                 a * (1 - tau - lam), (1 - a) * (1 - tau + lam)]).astype(complex)
    g[0, 3] = g[3, 0] = 2 * off
    return g / 2


def nonunital_sweep(lam: float, tau: float, p: float, a_grid: Sequence[float] | None = None,
                    require_cp: bool = True) -> tuple[float, np.ndarray, np.ndarray]:
    """``||gamma12||_p / ||gamma1||_p`` along ``a``; returns ``(a*, a_grid, ratios)``.

    With ``require_cp=False`` parameters outside the CP region are evaluated
    on the displayed matrix anyway (norms then come from singular values)
    and a ``RuntimeWarning`` is issued instead of raising ``NotCP``.
    """
    try:
        nonunital_qubit(lam, tau)
    except NotCP:
        if require_cp:
            raise
        warnings.warn(f"nonunital map with lambda={lam}, tau={tau} is not CP; "
                      "evaluating the displayed matrix formula", RuntimeWarning, stacklevel=2)
    grid = np.linspace(0.0, 1.0, 201) if a_grid is None else np.asarray(a_grid, dtype=float)
    ratios = np.array([
        linalg.schatten_norm(nonunital_gamma(a, lam, tau), p)
        / linalg.schatten_norm(np.diag([a, 1 - a]), p)
        for a in grid
    ])
    return float(grid[int(np.argmax(ratios))]), grid, ratios
