import math

import numpy as np
import pytest

from cbnorm import channels as ch
from cbnorm import inequalities as ineq
from cbnorm import linalg, vnorms
from cbnorm.errors import BadExponent, DimMismatch, NotEBT
from cbnorm.inequalities import TrialConfig
from cbnorm.vnorms import NormParams


def product(rng, *dims):
    return linalg.kron(*(linalg.random_density(d, rng) for d in dims))


# SSA and conditional subadditivity -----------------------------------------------------


def test_ssa_product_is_tight(rng):
    lhs, rhs = ineq.ssa_terms(product(rng, 2, 2, 2), (2, 2, 2))
    assert rhs - lhs == pytest.approx(0.0, abs=1e-10)


def test_ssa_ghz():
    v = np.zeros(8)
    v[0] = v[7] = 1 / math.sqrt(2)
    lhs, rhs = ineq.ssa_terms(np.outer(v, v), (2, 2, 2))
    # S(123) = 0, S(3) = S(23) = S(13) = 1
    assert (lhs, rhs) == pytest.approx((1.0, 2.0), abs=1e-10)


def test_ssa_suite():
    rep = ineq.ssa_check(TrialConfig(trials=500, dims=(2, 2, 2)))
    assert rep.ok and rep.passed == 500 and rep.min_slack >= -1e-9


def test_ssa_needs_three_factors():
    with pytest.raises(DimMismatch):
        ineq.ssa_check(TrialConfig(trials=1, dims=(2, 2)))


def test_cond_subadd_product_across_cut(rng):
    e1a1, e2a2 = linalg.random_density(4, rng), linalg.random_density(4, rng)
    q = linalg.permute_systems(np.kron(e1a1, e2a2), (2, 2, 2, 2), [1, 3, 2, 4])  # to (E1, E2, A1, A2)
    assert ineq.cond_subadd_terms(q, (2, 2, 2, 2))["slack"] == pytest.approx(0.0, abs=1e-10)


def test_cond_subadd_suite_and_decomposition():
    rep = ineq.cond_subadd_check(TrialConfig(trials=200, dims=(2, 2, 2, 2)))
    assert rep.ok
    assert rep.notes["max_decomposition_mismatch"] <= 1e-10


def test_cond_subadd_ssa_pieces_nonnegative(rng):
    for _ in range(20):
        terms = ineq.cond_subadd_terms(linalg.random_density(16, rng), (2, 2, 2, 2))
        assert min(terms["ssa_slacks"]) >= -1e-10


# Minkowski family ----------------------------------------------------------------------


def test_mink_mat_product_equality(rng):
    for t in (0.5, 2.0, 3.0):
        lhs, rhs = ineq.mink_mat_sides(product(rng, 2, 3), (2, 3), t)
        assert lhs == pytest.approx(rhs, rel=1e-10)


def test_mink_mat_t2_direct(rng):
    q = linalg.random_density(4, rng)
    t = q.reshape(2, 2, 2, 2)
    q1 = np.einsum("ikjk->ij", t)  # trace over the second factor
    lhs_oracle = math.sqrt(np.trace(q1 @ q1).real)
    q2sq = (q @ q).reshape(2, 2, 2, 2)
    m = np.einsum("kikj->ij", q2sq)  # trace over the first factor of Q^2
    w = np.linalg.eigvalsh(m)
    rhs_oracle = np.sum(np.sqrt(np.clip(w, 0, None)))
    lhs, rhs = ineq.mink_mat_sides(q, (2, 2), 2)
    assert (lhs, rhs) == pytest.approx((lhs_oracle, rhs_oracle), rel=1e-10)
    assert lhs <= rhs


def test_mink_mat_reverse_below_one(rng):
    for _ in range(20):
        lhs, rhs = ineq.mink_mat_sides(linalg.random_density(4, rng), (2, 2), 0.5)
        assert rhs <= lhs + 1e-12


@pytest.mark.parametrize("t", [0.5, 1.5, 2.0])
def test_minkowski_suite(t):
    rep = ineq.minkowski_checks(TrialConfig(trials=20, dims=(2, 2), t=t))
    assert rep.ok
    if t >= 1:
        assert set(rep.notes["min_slack_by_check"]) == {"mink_mat", "mink_qp", "flip_q1"}
        assert sum(rep.notes["flip_q1_certificates"].values()) == 20


def test_flip_q1_uses_smaller_certificate(rng):
    w = linalg.random_density(4, rng)
    res = ineq.flip_q1_sides(w, (2, 2), 2.0, NormParams(restarts=2))
    w1 = linalg.partial_trace(w, (2, 2), [1])
    at_marginal = vnorms.objective_1p(w, (2, 2), 2.0, w1)
    assert res["rhs"] <= at_marginal + 1e-15
    assert res["lhs"] <= res["rhs"]


def test_mink3_t1_is_trace(rng):
    q = linalg.random_density(8, rng)
    lhs, rhs = ineq.mink3_sides(q, (2, 2, 2), 1.0)
    assert lhs == pytest.approx(1.0) and rhs == pytest.approx(1.0)


def test_mink3_t2_no_violations():
    rep = ineq.mink3_search(TrialConfig(trials=500, dims=(2, 2, 2), t=2.0))
    assert rep.ok and rep.notes["conjecture_violated"] is False


def test_mink3_exploratory_reports_min_slack():
    rep = ineq.mink3_search(TrialConfig(trials=100, dims=(2, 2, 2), t=1.5))
    assert math.isfinite(rep.min_slack)
    assert rep.notes["conjecture_violated"] == (not rep.ok)


def test_mink3_exponent_range():
    with pytest.raises(BadExponent):
        ineq.mink3_search(TrialConfig(trials=1, dims=(2, 2, 2), t=3.0))


# Lieb-Thirring and Klein ---------------------------------------------------------------


def test_lieb_thirring_unitary_equality(rng):
    u = ch.random_isometry(3, 3, 1)
    d = linalg.random_density(3, rng)
    lhs, rhs = ineq.lieb_thirring_sides(u, d, 1.0)
    assert lhs == pytest.approx(rhs, abs=1e-10) and rhs == pytest.approx(1.0)
    lhs, rhs = ineq.lieb_thirring_sides(u, d, 2.5)
    assert abs(ineq.relative_slack(lhs, rhs)) <= 1e-10


def test_lieb_thirring_rank_deficient(rng):
    c = np.outer(rng.standard_normal(3), rng.standard_normal(3))
    lhs, rhs = ineq.lieb_thirring_sides(c, linalg.random_density(3, rng), 2.0)
    assert lhs <= rhs + 1e-12


def test_lieb_thirring_suite():
    assert ineq.lieb_thirring_check(TrialConfig(trials=200, dims=(3,), p=2.0)).ok


def test_klein_equal_arguments(rng):
    a = linalg.random_density(3, rng)
    lhs, rhs = ineq.klein_sides(a, a)
    assert rhs - lhs == pytest.approx(0.0, abs=1e-12)


def test_klein_suite():
    assert ineq.klein_check(TrialConfig(trials=200, dims=(3,))).ok


def test_klein_slack_is_quadratic(rng):
    """The slack is the relative entropy; near B = A it is half the Kubo-Mori quadratic form."""
    a = linalg.random_density(3, rng, rank=3)
    h = rng.standard_normal((3, 3))
    h = h + h.T

    def slack(eps):
        b = a + eps * h
        b = b / np.trace(b)
        lhs, rhs = ineq.klein_sides(a, b)
        return rhs - lhs

    eps = np.array([1e-4, 5e-5, 2.5e-5])
    vals = np.array([slack(e) for e in eps])
    order = np.polyfit(np.log(eps), np.log(vals), 1)[0]
    assert order == pytest.approx(2.0, abs=0.01)
    w, u = np.linalg.eigh(a)
    direction = u.conj().T @ (h - np.trace(h) * a) @ u
    lw = np.log(w)
    kernel = np.where(np.isclose(w[:, None], w[None, :]), 1 / w[:, None],
                      (lw[:, None] - lw[None, :]) / (w[:, None] - w[None, :] + np.eye(3)))
    coeff = 0.5 * np.sum(np.abs(direction) ** 2 * kernel)
    assert vals[-1] / eps[-1] ** 2 == pytest.approx(coeff, rel=1e-3)


# EBT lemma -----------------------------------------------------------------------------


def test_ebt_lemma_dephasing_bell():
    units = [np.diag([1.0, 0.0]), np.diag([0.0, 1.0])]
    phi = ch.ebt_channel(ch.EbtSpec(units, units))
    lhs, rhs = ineq.ebt_lemma_sides(phi, linalg.max_entangled(2).projector, 2, 2.0)
    assert lhs == pytest.approx(1 / math.sqrt(2)) and rhs == pytest.approx(1 / math.sqrt(2))


def test_ebt_lemma_product(rng):
    phi = ch.random_ebt(2, 2, 3, rng)
    lhs, rhs = ineq.ebt_lemma_sides(phi, product(rng, 3, 2), 3, 2.0)
    assert lhs <= rhs + 1e-12


def test_ebt_lemma_random_channels():
    assert ineq.ebt_lemma_check(None, TrialConfig(trials=200, dims=(2, 2))).ok


def test_ebt_lemma_sic():
    phi = ch.ebt_channel(ch.qubit_sic_ebt())
    assert ineq.ebt_lemma_check(phi, TrialConfig(trials=50, dims=(3, 2), p=3.0)).ok


def test_ebt_lemma_requires_tag():
    with pytest.raises(NotEBT):
        ineq.ebt_lemma_check(ch.depolarizing(2, 0.9), TrialConfig(trials=1))


# derivative at p = 1 and B(p) -------------------------------------------------------------


@pytest.mark.parametrize(
    "name, x, target",
    [
        ("product", np.diag([1.0, 0, 0, 0]), 0.0),
        ("bell", linalg.max_entangled(2).projector, 1.0),
        ("uniform", np.eye(4) / 4, -1.0),
    ],
)
def test_deriv_1p_examples(name, x, target):
    slope, tgt, err = ineq.deriv_1p_check(x, (2, 2))
    assert tgt == pytest.approx(target, abs=1e-9)
    assert err <= 0.05


def test_deriv_1p_random_battery():
    for i in range(20):
        x = linalg.random_density(4, np.random.default_rng([21, i]))
        assert ineq.deriv_1p_check(x, (2, 2))[2] <= 0.05


def test_deriv_grid_validation():
    with pytest.raises(BadExponent):
        ineq.deriv_1p_check(np.eye(4) / 4, (2, 2), (0.5, 0.1))


def test_bp_convergence(rng):
    rho = linalg.random_density(2, rng)
    dists = ineq.bp_convergence_check(np.kron(rho, linalg.random_density(2, rng)), (2, 2))
    assert max(dists) <= 0.05
    x = linalg.random_density(4, rng)
    dists = ineq.bp_convergence_check(x, (2, 2))
    assert all(b <= a + 0.02 for a, b in zip(dists, dists[1:]))
    assert dists[-1] <= 0.05


# q -> p norms --------------------------------------------------------------------------


def test_positive_q_to_p_depolarizing():
    rep = ineq.positive_q_to_p(ch.depolarizing(2, 0.5), 1.0, 2.0)
    assert rep.value == pytest.approx(0.79057, abs=1e-5)


def test_positive_q_to_p_identity():
    assert ineq.positive_q_to_p(ch.identity(2), 1.0, 2.0).value == pytest.approx(1.0, rel=1e-6)
    assert ineq.positive_q_to_p(ch.identity(3), 2.0, 2.0).value == pytest.approx(1.0, rel=1e-6)


@pytest.mark.parametrize(
    "phi, q, p",
    [(ch.identity(2), 1.0, 2.0), (ch.depolarizing(2, 0.5), 1.0, 2.0), (ch.werner_holevo(2), 2.0, 2.0)],
    ids=["identity", "depolarizing", "werner-holevo"],
)
def test_positive_achiever(phi, q, p):
    rep = ineq.positive_achiever_check(phi, q, p, TrialConfig(trials=200))
    assert rep.ok


@pytest.mark.parametrize(
    "phi, q, p",
    [(ch.identity(2), 2.0, 2.0), (ch.depolarizing(2, 0.5), 2.0, 2.0), (ch.random_cpt(2, 2, 2, 3), 3.0, 2.0)],
    ids=["identity", "depolarizing", "random"],
)
def test_q_geq_p_cb(phi, q, p):
    rep = ineq.q_geq_p_cb_check(phi, q, p, 2, TrialConfig(trials=50, slack_tol=1e-2))
    assert rep.ok


def test_q_geq_p_needs_order():
    with pytest.raises(BadExponent):
        ineq.q_geq_p_cb_check(ch.identity(2), 1.0, 2.0, 2, TrialConfig(trials=1))


# reports -------------------------------------------------------------------------------


def test_violations_are_exactly_negative_slacks():
    cfg = TrialConfig(trials=30, dims=(3,), slack_tol=0.0)
    trial_slacks = [-1.0 if i % 7 == 0 else 0.5 for i in range(30)]
    it = iter(trial_slacks)
    rep = ineq._run("synthetic", cfg, lambda rng: next(it))
    assert [i for i, _ in rep.violations] == [i for i, s in enumerate(trial_slacks) if s < 0]
    assert rep.passed == 30 - len(rep.violations) and not rep.ok


def test_reports_deterministic():
    cfg = TrialConfig(trials=20, dims=(2, 2, 2), seed=9)
    assert ineq.ssa_check(cfg).to_dict() == ineq.ssa_check(cfg).to_dict()
