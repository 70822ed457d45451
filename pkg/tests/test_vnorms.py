import math

import numpy as np
import pytest

from cbnorm import channels as ch
from cbnorm import linalg, vnorms
from cbnorm.errors import BadExponent, NotPSD
from cbnorm.vnorms import NormParams

FAST = NormParams(restarts=5)


def bell():
    return linalg.max_entangled(2).projector


def random_product(rng, d=2, n=2):
    rho, sigma = linalg.random_density(d, rng), linalg.random_density(n, rng)
    return rho, sigma, np.kron(rho, sigma)


def test_norm_p1_examples(rng):
    assert vnorms.norm_p1(bell(), (2, 2), 2) == pytest.approx(1 / math.sqrt(2))
    rho, sigma, x = random_product(rng, 3, 2)
    assert vnorms.norm_p1(x, (3, 2), 3) == pytest.approx(linalg.schatten_norm(rho, 3))


def test_norm_p1_matches_sup_form(rng):
    """Sup over A > 0 of Tr(A^2 X1) / ||A^2||_p' sampled on random 2x2 A."""
    p = 3.0
    pd = p / (p - 1)
    x = linalg.random_density(4, rng)
    x1 = linalg.partial_trace(x, (2, 2), [1])
    val = vnorms.norm_p1(x, (2, 2), p)
    best = 0.0
    for _ in range(4000):
        g = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        a2 = g @ g.conj().T
        best = max(best, np.trace(a2 @ x1).real / linalg.schatten_norm(a2, pd))
    assert best <= val + 1e-12
    assert best == pytest.approx(val, rel=1e-2)
    a2 = linalg.psd_power(x1, p - 1)  # Hoelder equality point
    assert np.trace(a2 @ x1).real / linalg.schatten_norm(a2, pd) == pytest.approx(val, rel=1e-10)


def test_norm_p1_rejects_non_psd():
    with pytest.raises(NotPSD):
        vnorms.norm_p1(np.diag([1.0, -0.5, 0.2, 0.3]), (2, 2), 2)


def test_norm_1p_product(rng):
    for _ in range(10):
        rho, sigma, x = random_product(rng)
        rep = vnorms.norm_1p(x, (2, 2), FAST.with_p(2.5))
        assert rep.value == pytest.approx(linalg.schatten_norm(sigma, 2.5), rel=1e-6)


def test_norm_1p_diagonal_reduction():
    x = np.diag([0.25, 0.25, 0.25, 0.25])
    assert vnorms.norm_1p(x, (2, 2), FAST).value == pytest.approx(0.70711, abs=1e-5)
    rng = np.random.default_rng(1)
    for p in (1.5, 3.0):
        w = rng.random((3, 2))
        w /= w.sum()
        oracle = sum(np.sum(row ** p) ** (1 / p) for row in w)
        rep = vnorms.norm_1p(np.diag(w.reshape(-1)), (3, 2), FAST.with_p(p))
        assert rep.value == pytest.approx(oracle, rel=1e-6)


def test_norm_1p_bell():
    rep = vnorms.norm_1p(bell(), (2, 2), FAST)
    at_symmetric = vnorms.objective_1p(bell(), (2, 2), 2, np.eye(2) / 2)
    # B^(1/p - 1) = sqrt(2) I at B = I/2, so the objective is sqrt(2) ||Bell||_2
    assert at_symmetric == pytest.approx(math.sqrt(2))
    assert rep.value == pytest.approx(at_symmetric, rel=1e-6)
    assert np.linalg.norm(rep.argument - np.eye(2) / 2) <= 1e-3


def test_norm_1p_at_p_one_is_trace(rng):
    x = linalg.random_density(4, rng) * 3.0
    assert vnorms.norm_1p(x, (2, 2), FAST.with_p(1.0)).value == pytest.approx(3.0, abs=1e-9)


def test_norm_1p_above_flipped_marginal(rng):
    for _ in range(10):
        x = linalg.random_density(4, rng)
        x2 = linalg.partial_trace(x, (2, 2), [2])
        assert linalg.schatten_norm(x2, 2) <= vnorms.norm_1p(x, (2, 2), FAST).value + 1e-6


def test_norm_sq_interpolates_known_cases(rng):
    x = linalg.random_density(4, rng)
    same = vnorms.norm_sq(x, (2, 2), 2.0, 2.0, FAST).value
    assert same == pytest.approx(linalg.schatten_norm(x, 2), rel=1e-12)
    assert vnorms.norm_sq(x, (2, 2), 1.0, 2.0, FAST).value == pytest.approx(
        vnorms.norm_1p(x, (2, 2), FAST).value, rel=1e-9)
    with pytest.raises(BadExponent):
        vnorms.norm_sq(x, (2, 2), 3.0, 2.0)


def test_norm_infp_examples():
    rep = vnorms.norm_infp(ch.identity(2).choi.matrix, (2, 2), FAST)
    assert rep.value == pytest.approx(math.sqrt(2), rel=1e-6)
    rep = vnorms.norm_infp(ch.depolarizing(2, 0.5).choi.matrix, (2, 2), FAST)
    assert rep.value == pytest.approx(math.sqrt(7) / (2 * math.sqrt(2)), abs=1e-4)
    assert rep.value == pytest.approx(0.93541, abs=1e-4)


def test_norm_infp_product(rng):
    for _ in range(5):
        rho, sigma, x = random_product(rng)
        rep = vnorms.norm_infp(x, (2, 2), FAST.with_p(3.0))
        oracle = np.linalg.eigvalsh(rho).max() * linalg.schatten_norm(sigma, 3)
        assert rep.value == pytest.approx(oracle, rel=1e-6)


@pytest.mark.parametrize("norm", ["p1", "1p", "infp"])
def test_homogeneity(norm, rng):
    x = linalg.random_density(4, rng)
    run = {
        "p1": lambda m: vnorms.norm_p1(m, (2, 2), 2),
        "1p": lambda m: vnorms.norm_1p(m, (2, 2), FAST).value,
        "infp": lambda m: vnorms.norm_infp(m, (2, 2), FAST).value,
    }[norm]
    assert run(4.5 * x) == pytest.approx(4.5 * run(x), rel=1e-9 if norm != "infp" else 1e-6)


def test_minimizer_B_limits(rng):
    rho, _, x = random_product(rng)
    b = vnorms.minimizer_B(x, (2, 2), 1.01, FAST)
    assert linalg.schatten_norm(b - rho, 1) <= 0.05
    b = vnorms.minimizer_B(bell(), (2, 2), 1.01, FAST)
    assert linalg.schatten_norm(b - np.eye(2) / 2, 1) <= 0.05
    assert np.allclose(vnorms.minimizer_B(x, (2, 2), 1.0), rho)


def test_reports_are_monotone(rng):
    x = linalg.random_density(4, rng)
    for rep, sign in ((vnorms.norm_1p(x, (2, 2), FAST), 1), (vnorms.norm_infp(x, (2, 2), FAST), -1)):
        assert rep.spread >= 0
        for trace in rep.traces:
            steps = sign * np.diff(trace)
            assert np.all(steps <= 1e-9 * max(1.0, abs(trace[0])))


@pytest.mark.slow
@pytest.mark.parametrize("case", ["uniform", "bell", "random"])
def test_maxmin_reproduces_schatten(case):
    rng = np.random.default_rng(5)
    y, p = {
        "uniform": (np.eye(4) / 4, 2.0),
        "bell": (bell(), 3.0),
        "random": (linalg.random_density(4, rng), 2.0),
    }[case]
    val = vnorms.maxmin_p(y, (2, 2), NormParams(p=p, restarts=1))
    assert abs(val - linalg.schatten_norm(y, p)) <= vnorms.MAXMIN_TOL


def test_bad_p():
    with pytest.raises(BadExponent):
        vnorms.norm_1p(bell(), (2, 2), NormParams(p=vnorms.P_MAX + 1))
