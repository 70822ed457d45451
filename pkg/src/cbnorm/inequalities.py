"""Randomized verification suites for entropy and trace inequalities.

Every suite draws its instances from ``numpy.random.default_rng([seed, trial])``
so any single trial can be replayed. A trial's *slack* is ``rhs - lhs`` divided
by ``max(1, |lhs|, |rhs|)``; a trial is a violation when its slack falls below
``-slack_tol``.

Random PSD instances are Ginibre ``G G^dag / Tr(G G^dag)``; random non-PSD
inputs are complex Gaussian matrices normalized in the relevant Schatten norm.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import _opt, linalg, vnorms
from .channels import Channel, apply_extended, random_ebt
from .errors import BadExponent, DimMismatch, NotEBT
from .linalg import partial_trace, psd_power, schatten_norm, von_neumann_entropy
from .vnorms import NormParams

LN2 = math.log(2.0)


@dataclass(frozen=True)
class TrialConfig:
    trials: int = 100
    seed: int = 0
    dims: tuple = (2, 2)
    p: float = 2.0
    t: float | None = None
    q: float | None = None
    slack_tol: float = 1e-9

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))

    def rng(self, trial: int) -> np.random.Generator:
        return np.random.default_rng([self.seed, trial])

    def to_dict(self) -> dict:
        return {
            "trials": self.trials,
            "seed": self.seed,
            "dims": list(self.dims),
            "p": self.p,
            "t": self.t,
            "q": self.q,
            "slack_tol": self.slack_tol,
        }


@dataclass
class SuiteReport:
    name: str
    trials: int
    passed: int
    violations: list  # (trial index, relative slack), sorted by trial
    min_slack: float
    notes: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "trials": self.trials,
            "passed": self.passed,
            "violations": [[int(i), float(s)] for i, s in self.violations],
            "min_slack": self.min_slack,
            "notes": self.notes,
        }


def relative_slack(lhs: float, rhs: float) -> float:
    return (rhs - lhs) / max(1.0, abs(lhs), abs(rhs))


def _run(name: str, cfg: TrialConfig, trial: Callable[[np.random.Generator], float],
         notes: dict | None = None) -> SuiteReport:
    slacks = [float(trial(cfg.rng(i))) for i in range(cfg.trials)]
    bad = [(i, s) for i, s in enumerate(slacks) if s < -cfg.slack_tol]
    return SuiteReport(name, cfg.trials, cfg.trials - len(bad), bad, min(slacks),
                       notes if notes is not None else {})


def _need_dims(cfg: TrialConfig, n: int, what: str) -> tuple:
    if len(cfg.dims) != n:
        raise DimMismatch(f"{what} needs {n} factor dimensions, got {cfg.dims}")
    return cfg.dims


def _entropy(q: np.ndarray, dims: Sequence[int], keep: Sequence[int]) -> float:
    return von_neumann_entropy(partial_trace(q, dims, keep)) if keep else 0.0


# strong subadditivity and conditional subadditivity --------------------------------------


def ssa_terms(q, dims: Sequence[int]) -> tuple[float, float]:
    """``(S(Q123) + S(Q3), S(Q23) + S(Q13))``."""
    lhs = von_neumann_entropy(q) + _entropy(q, dims, [3])
    rhs = _entropy(q, dims, [2, 3]) + _entropy(q, dims, [1, 3])
    return lhs, rhs


def ssa_check(cfg: TrialConfig) -> SuiteReport:
    dims = _need_dims(cfg, 3, "ssa_check")
    n = int(np.prod(dims))

    def trial(rng):
        return relative_slack(*ssa_terms(linalg.random_density(n, rng), dims))

    return _run("ssa", cfg, trial)


def cond_subadd_terms(q, dims: Sequence[int]) -> dict:
    """Both sides of conditional subadditivity and the two SSA instances summing to it.

    Factors are ordered ``(E1, E2, A1, A2)``.
    """
    s = lambda keep: _entropy(q, dims, keep)
    full, e1, e2, e12 = von_neumann_entropy(q), s([1]), s([2]), s([1, 2])
    e1a1, e2a2, e12a2 = s([1, 3]), s([2, 4]), s([1, 2, 4])
    lhs = full - e12
    rhs = e1a1 - e1 + e2a2 - e2
    first = (e1a1 + e12a2) - (full + e1)
    second = (e12 + e2a2) - (e12a2 + e2)
    return {"lhs": lhs, "rhs": rhs, "slack": rhs - lhs, "ssa_slacks": (first, second)}


def cond_subadd_check(cfg: TrialConfig) -> SuiteReport:
    dims = _need_dims(cfg, 4, "cond_subadd_check")
    n = int(np.prod(dims))
    worst = [0.0]

    def trial(rng):
        terms = cond_subadd_terms(linalg.random_density(n, rng), dims)
        worst[0] = max(worst[0], abs(terms["slack"] - sum(terms["ssa_slacks"])))
        return relative_slack(terms["lhs"], terms["rhs"])

    notes = {}
    rep = _run("cond_subadd", cfg, trial, notes)
    notes["max_decomposition_mismatch"] = worst[0]
    return rep


# Minkowski family ----------------------------------------------------------------------------


def _tr_power(m: np.ndarray, s: float) -> float:
    return float(np.trace(psd_power(m, s)).real)


def mink_mat_sides(q, dims: Sequence[int], t: float) -> tuple[float, float]:
    """``([Tr1 (Tr2 Q)^t]^(1/t), Tr2 (Tr1 Q^t)^(1/t))``; lhs <= rhs for t >= 1, reversed for t <= 1."""
    lhs = _tr_power(partial_trace(q, dims, [1]), t) ** (1 / t)
    rhs = _tr_power(partial_trace(psd_power(q, t), dims, [2]), 1 / t)
    return lhs, rhs


def mink_qp_sides(r, dims: Sequence[int], q: float, p: float) -> tuple[float, float]:
    """``([Tr1 (Tr2 R^q)^(p/q)]^(1/p), [Tr2 (Tr1 R^p)^(q/p)]^(1/q))`` for ``q <= p``."""
    lhs = _tr_power(partial_trace(psd_power(r, q), dims, [1]), p / q) ** (1 / p)
    rhs = _tr_power(partial_trace(psd_power(r, p), dims, [2]), q / p) ** (1 / q)
    return lhs, rhs


def flip_q1_sides(w, dims: Sequence[int], p: float, params: NormParams) -> dict:
    """``||W2||_p`` against certified upper bounds on ``||W12||_(1,p)``.

    The bound used is the smaller of the objective at ``B = W1`` and the
    optimizer's value; both are values of the objective at feasible points.
    """
    w2 = partial_trace(w, dims, [2])
    w1 = partial_trace(w, dims, [1])
    lhs = schatten_norm(w2, p)
    at_marginal = vnorms.objective_1p(w, dims, p, w1 / np.trace(w1).real)
    opt = vnorms.norm_1p(w, dims, params.with_p(p)).value
    cert = "optimizer" if opt <= at_marginal else "marginal"
    return {"lhs": lhs, "rhs": min(opt, at_marginal), "certificate": cert}


def minkowski_checks(cfg: TrialConfig, params: NormParams | None = None) -> SuiteReport:
    """Matrix Minkowski (both directions), its (q, p) form and the q = 1 flip-map bound.

    ``cfg.t`` (default ``cfg.p``) is the Minkowski exponent. For ``t >= 1``
    each trial also draws ``q`` uniformly from ``[1, t]`` for the (q, p) form
    with ``p = t`` and checks ``||W2||_t <= ||W12||_(1,t)``.
    """
    dims = _need_dims(cfg, 2, "minkowski_checks")
    t = cfg.p if cfg.t is None else cfg.t
    if t <= 0:
        raise BadExponent(f"Minkowski exponent must be positive, got {t}")
    params = params or NormParams(restarts=2)
    n = int(np.prod(dims))
    per_check: dict[str, float] = {}
    certs = {"optimizer": 0, "marginal": 0}

    def record(key, s):
        per_check[key] = min(per_check.get(key, math.inf), s)
        return s

    def trial(rng):
        q = linalg.random_density(n, rng)
        lhs, rhs = mink_mat_sides(q, dims, t)
        if t < 1:
            lhs, rhs = rhs, lhs
        slacks = [record("mink_mat", relative_slack(lhs, rhs))]
        if t >= 1:
            qq = float(rng.uniform(1.0, t))
            slacks.append(record("mink_qp", relative_slack(*mink_qp_sides(q, dims, qq, t))))
            flip = flip_q1_sides(q, dims, t, params)
            certs[flip["certificate"]] += 1
            slacks.append(record("flip_q1", relative_slack(flip["lhs"], flip["rhs"])))
        return min(slacks)

    notes = {"t": t, "min_slack_by_check": per_check, "flip_q1_certificates": certs}
    return _run("minkowski", cfg, trial, notes)


def mink3_sides(q, dims: Sequence[int], t: float) -> tuple[float, float]:
    """Both sides of the three-factor Minkowski conjecture."""
    d1, d2, d3 = dims
    q23 = partial_trace(q, dims, [2, 3])
    inner = partial_trace(psd_power(q23, t), (d2, d3), [2])
    lhs = _tr_power(inner, 1 / t)
    q13 = partial_trace(psd_power(q, t), dims, [1, 3])
    rhs = _tr_power(q13, 1 / t)
    return lhs, rhs


def mink3_search(cfg: TrialConfig) -> SuiteReport:
    """Randomized counterexample search; a violation is a finding, flagged in ``notes``."""
    dims = _need_dims(cfg, 3, "mink3_search")
    t = cfg.p if cfg.t is None else cfg.t
    if not (1 <= t <= 2):
        raise BadExponent(f"mink3_search needs t in [1, 2], got {t}")
    n = int(np.prod(dims))

    def trial(rng):
        rank = int(rng.integers(1, n + 1))  # low-rank states probe the boundary
        return relative_slack(*mink3_sides(linalg.random_density(n, rng, rank), dims, t))

    rep = _run("mink3", cfg, trial, {"t": t})
    rep.notes["conjecture_violated"] = not rep.ok
    return rep


# trace inequalities ----------------------------------------------------------------------------


def lieb_thirring_sides(c, d, p: float) -> tuple[float, float]:
    """``(Tr (C^dag D C)^p, Tr (C C^dag)^p D^p)``."""
    c, d = linalg.as_matrix(c), linalg.as_matrix(d)
    lhs = _tr_power(c.conj().T @ d @ c, p)
    rhs = float(np.trace(psd_power(c @ c.conj().T, p) @ psd_power(d, p)).real)
    return lhs, rhs


def lieb_thirring_check(cfg: TrialConfig) -> SuiteReport:
    n = cfg.dims[0]
    if cfg.p < 1:
        raise BadExponent(f"Lieb-Thirring needs p >= 1, got {cfg.p}")

    def trial(rng):
        rank = int(rng.integers(1, n + 1))
        c = _opt.random_complex((n, rank), rng) @ _opt.random_complex((rank, n), rng)
        d = linalg.random_density(n, rng) * float(rng.uniform(0.5, 2.0))
        return relative_slack(*lieb_thirring_sides(c, d, cfg.p))

    return _run("lieb_thirring", cfg, trial, {"p": cfg.p})


def klein_sides(a, b) -> tuple[float, float]:
    """``(Tr(A - B), Tr A log A - Tr A log B)`` in natural log."""
    a, b = linalg.as_matrix(a), linalg.as_matrix(b)
    log_a = linalg.matrix_fn_psd(a, np.log)
    log_b = linalg.matrix_fn_psd(b, np.log)
    rhs = float(np.trace(a @ (log_a - log_b)).real)
    return float(np.trace(a - b).real), rhs


def klein_check(cfg: TrialConfig) -> SuiteReport:
    n = cfg.dims[0]

    def trial(rng):
        a = linalg.random_density(n, rng) * float(rng.uniform(0.5, 2.0))
        b = linalg.random_density(n, rng) * float(rng.uniform(0.5, 2.0))
        return relative_slack(*klein_sides(a, b))

    return _run("klein", cfg, trial)


# EBT lemma -----------------------------------------------------------------------------------


def ebt_lemma_sides(phi: Channel, q, n: int, p: float) -> tuple[float, float]:
    """``(||(I_n (x) Phi)(Q)||_p, ||Tr_2 Q||_p)``."""
    dims = (n, phi.d_in)
    return schatten_norm(apply_extended(phi, q, dims), p), schatten_norm(partial_trace(q, dims, [1]), p)


def ebt_lemma_check(phi: Channel | None, cfg: TrialConfig) -> SuiteReport:
    """``cfg.dims = (n, d)``: extension and channel input dimension.

    With ``phi=None`` every trial draws a fresh random EBT channel on C^d.
    """
    n, d = _need_dims(cfg, 2, "ebt_lemma_check")
    if phi is not None:
        if not phi.ebt:
            raise NotEBT(f"{phi!r} is not tagged entanglement breaking; build it with ebt_channel")
        if phi.d_in != d:
            raise DimMismatch(f"cfg.dims[1]={d} != channel input dimension {phi.d_in}")

    def trial(rng):
        chan = phi if phi is not None else random_ebt(d, d, int(rng.integers(2, 5)), rng)
        q = linalg.random_density(n * d, rng)
        return relative_slack(*ebt_lemma_sides(chan, q, n, cfg.p))

    return _run("ebt_lemma", cfg, trial, {"p": cfg.p, "random_channels": phi is None})


# derivative at p = 1 and B(p) -> X1 -------------------------------------------------------------


DEFAULT_DELTAS = (0.04, 0.02, 0.01)


def deriv_1p_check(x, split: Sequence[int], delta_grid: Sequence[float] = DEFAULT_DELTAS,
                   params: NormParams | None = None) -> tuple[float, float, float]:
    """Finite-difference slope of ``||X||_(1,p)^p`` at p = 1 against ``S(X1) - S(X12)``.

    Returns ``(fd_slope, target, err)`` in bits. The slope is extrapolated
    linearly in delta to zero from the two smallest grid points.
    """
    params = params or NormParams(restarts=3)
    if any(not (0 < dl <= 0.2) for dl in delta_grid):
        raise BadExponent(f"delta_grid must lie in (0, 0.2], got {list(delta_grid)}")
    x = linalg.as_matrix(x)
    x = x / np.trace(x).real
    quotients = []
    for dl in sorted(delta_grid)[:2]:
        val = vnorms.norm_1p(x, split, params.with_p(1 + dl)).value
        quotients.append((dl, (val ** (1 + dl) - 1) / dl / LN2))
    if len(quotients) == 1:
        slope = quotients[0][1]
    else:
        (d1, f1), (d2, f2) = quotients
        slope = f1 - (f2 - f1) / (d2 - d1) * d1
    target = von_neumann_entropy(partial_trace(x, split, [1])) - von_neumann_entropy(x)
    return slope, target, abs(slope - target)


def bp_convergence_check(x, split: Sequence[int], delta_grid: Sequence[float] = (0.1, 0.03, 0.01),
                         params: NormParams | None = None) -> list[float]:
    """Trace distances ``||B(1 + delta) - X1||_1`` along ``delta_grid``, in the order given."""
    params = params or NormParams(restarts=3)
    x = linalg.as_matrix(x)
    x1 = partial_trace(x, split, [1])
    x1 = x1 / np.trace(x1).real
    return [schatten_norm(vnorms.minimizer_B(x, split, 1 + dl, params) - x1, 1) for dl in delta_grid]


# q -> p norms of channels --------------------------------------------------------------------


def positive_q_to_p(phi: Channel, q: float, p: float, params: NormParams | None = None):
    """``sup ||Phi(rho)||_p / ||rho||_q`` over PSD rho, by ascent over ``rho = G G^dag``.

    Returns the optimizer report (value and maximizing rho).
    """
    params = params or NormParams(restarts=5)
    if q < 1 or p < 1:
        raise BadExponent(f"q and p must be >= 1, got q={q}, p={p}")
    k = phi.kraus_array
    d = phi.d_in

    def fun(g):
        n = np.concatenate(list(k @ g), axis=1)  # [K_1 G, K_2 G, ...]
        num, gn = _opt.log_trpow(n, p)
        den, gg = _opt.log_trpow(g, q)
        blocks = gn.reshape(phi.d_out, len(k), g.shape[1]).transpose(1, 0, 2)
        grad = np.einsum("rji,rjk->ik", k.conj(), blocks)
        return num / p - den / q, grad / p - gg / q

    rng = np.random.default_rng(params.seed)
    starts = [_opt.random_complex((d, d), rng) for _ in range(params.restarts)]
    if q == 1:
        starts = [_opt.random_complex((d, 1), rng) for _ in range(params.restarts)]
    rep = _opt.run_multistart(fun, starts, maximize=True, max_iters=params.max_iters,
                              grad_tol=params.grad_tol)
    g = rep.argument
    rho = g @ g.conj().T
    rho = rho / schatten_norm(rho, q)
    rep.value = schatten_norm(phi(rho), p)
    rep.restart_values = [math.exp(v) for v in rep.restart_values]
    rep.spread = max(rep.restart_values) - min(rep.restart_values)
    rep.argument = rho
    return rep


def positive_achiever_check(phi: Channel, q: float, p: float, cfg: TrialConfig,
                            params: NormParams | None = None) -> SuiteReport:
    """Random non-PSD inputs never beat the PSD optimum of ``||Phi(A)||_p / ||A||_q``."""
    psd = positive_q_to_p(phi, q, p, params)
    d = phi.d_in

    def trial(rng):
        a = _opt.random_complex((d, d), rng)
        a = a / schatten_norm(a, q)
        return relative_slack(schatten_norm(phi(a), p), psd.value)

    return _run("positive_achiever", cfg, trial, {"q": q, "p": p, "psd_optimum": psd.value})


def q_geq_p_cb_check(phi: Channel, q: float, p: float, d_ext: int, cfg: TrialConfig,
                     params: NormParams | None = None) -> SuiteReport:
    """``||(I (x) Phi)(Q)||_p <= ||Phi||+_(q->p) ||Q||_(p,q)`` on random PSD Q, for ``q >= p``.

    ``||Q||_(p,q)`` comes from the infimum over densities (an upper bound on
    the true value), so the default ``slack_tol`` here should be loose (1e-2).
    """
    if not (q >= p >= 1):
        raise BadExponent(f"need q >= p >= 1, got q={q}, p={p}")
    params = params or NormParams(restarts=3)
    norm_qp = positive_q_to_p(phi, q, p, params).value
    dims = (d_ext, phi.d_in)

    def trial(rng):
        big_q = linalg.random_density(d_ext * phi.d_in, rng)
        lhs = schatten_norm(apply_extended(phi, big_q, dims), p)
        rhs = norm_qp * vnorms.norm_sq(big_q, dims, p, q, params).value
        return relative_slack(lhs, rhs)

    return _run("q_geq_p_cb", cfg, trial, {"q": q, "p": p, "positive_norm": norm_qp})


SUITES = {
    "ssa": ssa_check,
    "cond_subadd": cond_subadd_check,
    "minkowski": minkowski_checks,
    "mink3": mink3_search,
    "lieb_thirring": lieb_thirring_check,
    "klein": klein_check,
}
