from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fdefamily.errors import ConfigurationError, DomainError, InfeasibleExponentError
from fdefamily.nonlinearity import (
    NonlinearityEnvelope,
    NonlinearitySpec,
    absorb_gamma,
    check_envelope,
    envelope_for,
    estimate_lipschitz_constant,
    eval_g,
    osgood_integral,
    release_gamma,
)
from fdefamily.specfun import gamma_fn

power = NonlinearitySpec.power_law


def test_eval_examples():
    assert eval_g(power(1, 0.5), 0.25) == pytest.approx(0.5, rel=1e-15)
    assert eval_g(power(2, 0.75), 1.0) == 2.0
    table = NonlinearitySpec.table([0, 0.5, 1], [0, 0.2, 1])
    for spec in (power(1, 0.5), power(3, 0.1), table):
        assert eval_g(spec, 0.0) == 0.0
    assert eval_g(table, 0.75) == pytest.approx(0.6)
    np.testing.assert_allclose(eval_g(table, np.array([0.25, 1.0])), [0.1, 1.0])


@pytest.mark.parametrize("u", [-1e-3, math.nan, 1.5])
def test_eval_domain(u):
    table = NonlinearitySpec.table([0, 1], [0, 1])
    with pytest.raises(DomainError):
        eval_g(table, u)


def test_power_law_domain_is_unbounded():
    assert eval_g(power(1, 0.5), 4.0) == 2.0
    with pytest.raises(DomainError):
        eval_g(power(1, 0.5), -1.0)


@pytest.mark.parametrize(
    ("u", "g"),
    [
        ([0, 1], [1, 2]),          # g(0) != 0
        ([0, 0.5], [0, 1]),        # does not cover [0, 1]
        ([0, 0.5, 1], [0, 0, 1]),  # vanishes inside (0, 1]
        ([0, 0.5, 0.4, 1], [0, 1, 1, 1]),
    ],
)
def test_table_validation(u, g):
    with pytest.raises(ConfigurationError):
        NonlinearitySpec.table(u, g)


def test_power_law_validation():
    with pytest.raises(ConfigurationError):
        power(0, 0.5)
    with pytest.raises(ConfigurationError):
        power(1, 1.0)


def test_table_csv(tmp_path):
    path = tmp_path / "g.csv"
    path.write_text("u,g\n0,0\n0.5,0.6\n1,1\n2,1.5\n")
    spec = NonlinearitySpec.from_csv(path)
    assert spec.u_max == 2.0
    assert eval_g(spec, 1.5) == pytest.approx(1.25)
    path.write_text("x,y\n0,0\n")
    with pytest.raises(ConfigurationError):
        NonlinearitySpec.from_csv(path)


def test_absorb_and_release_gamma():
    alpha = 0.4
    g_tilde = power(1.3, 0.6)
    g = absorb_gamma(g_tilde, alpha)
    u = np.linspace(0, 3, 11)
    np.testing.assert_allclose(g(u), g_tilde(u / gamma_fn(alpha)), rtol=1e-14)
    back = release_gamma(g, alpha)
    np.testing.assert_allclose(back(u), g_tilde(u), rtol=1e-14)

    table = NonlinearitySpec.table([0, 0.5, 1, 3], [0, 1, 1.2, 2])
    absorbed = absorb_gamma(table, alpha)
    v = np.linspace(0, 1, 7)
    np.testing.assert_allclose(absorbed(v * gamma_fn(alpha)), table(v), rtol=1e-14)


# {{{ envelope


def test_check_envelope_pass():
    rep = check_envelope(power(1, 0.7), NonlinearityEnvelope(1, 1, 0.75, 0.7, 1.0))
    assert rep.passed
    assert rep.confidence == "sampled"


def test_check_envelope_fail_upper():
    rep = check_envelope(power(2, 0.5), NonlinearityEnvelope(1, 1, 0.5, 0.5, 1.0))
    assert not rep.passed
    assert rep.upper_worst_u == 1.0
    assert rep.upper_margin == pytest.approx(-1.0, abs=1e-15)


def test_check_envelope_equality():
    rep = check_envelope(power(1, 0.5), NonlinearityEnvelope(1, 1, 0.5, 0.5, 1.0))
    assert rep.passed
    assert rep.lower_margin == 0.0
    assert rep.upper_margin == 0.0


def test_check_envelope_detects_linear_tail_of_table():
    # u - 0.5 u**0.75 is negative below 1/16, smallest at u = 0.375**4
    table = NonlinearitySpec.table([0, 1], [0, 1])
    rep = check_envelope(table, NonlinearityEnvelope(0.5, 1, 0.75, 0.7, 1.0))
    assert not rep.passed
    assert rep.lower_worst_u == pytest.approx(0.375**4, rel=0.01)
    assert rep.lower_margin == pytest.approx(0.375**4 - 0.5 * 0.375**3, rel=1e-4)


@settings(max_examples=60, deadline=None)
@given(
    st.floats(0.1, 5), st.floats(0.05, 0.95), st.floats(0.05, 0.95),
    st.floats(0.2, 3), st.floats(0.2, 3), st.floats(1e-3, 1e3),
)
def test_check_envelope_scale_consistent(c, d, delta, c1, c2, lam):
    c1, c2 = sorted((c1, c2))
    env = NonlinearityEnvelope(c1, c2, delta, min(delta, d), 1.0)
    env_scaled = NonlinearityEnvelope(lam * c1, lam * c2, env.delta1, env.delta2, 1.0)
    a = check_envelope(power(c, d), env, 500)
    b = check_envelope(power(lam * c, d), env_scaled, 500)
    assert a.passed == b.passed


def test_envelope_validate_exponents():
    env = NonlinearityEnvelope(1, 1, 0.75, 0.7, 1)
    env.validate_exponents(0.5)
    with pytest.raises(InfeasibleExponentError):
        NonlinearityEnvelope(1, 1, 0.5, 0.5, 1).validate_exponents(0.5)
    with pytest.raises(InfeasibleExponentError):
        NonlinearityEnvelope(1, 1, 0.7, 0.75, 1).validate_exponents(0.5)
    with pytest.raises(ConfigurationError):
        NonlinearityEnvelope(2, 1, 0.7, 0.7, 1)


def test_envelope_for_power_law_is_exact():
    env, source = envelope_for(power(8, 0.75), c_lip=6.0)
    assert (env.c1, env.c2, env.delta1, env.delta2, env.c_lip) == (8, 8, 0.75, 0.75, 6.0)
    assert source == "user"
    env, source = envelope_for(power(8, 0.75), n_samples=100)
    assert source == "estimated"
    assert env.c_lip == pytest.approx(6.0, rel=1e-6)


def test_envelope_for_table_needs_exponents():
    table = NonlinearitySpec.table([0, 1], [0, 1])
    with pytest.raises(ConfigurationError):
        envelope_for(table)
    env, _ = envelope_for(table, 0.9, 0.8, c_lip=1.0)
    assert check_envelope(table, env).passed


# }}}


# {{{ Lipschitz


@pytest.mark.parametrize(("c", "d"), [(1.0, 0.5), (3.0, 0.7), (0.2, 0.25)])
def test_lipschitz_power_law_approaches_cd_from_below(c, d):
    # mean value theorem: ratio = c d (min/xi)**(1-d) <= c d
    est = estimate_lipschitz_constant(power(c, d), d, 100_000)
    assert est <= c * d * (1 + 1e-6)
    assert est >= c * d * (1 - 1e-5)


def test_lipschitz_linear_g():
    # ratio is min(y1, y2)**0.25, supremum 1 as min -> 1
    est = estimate_lipschitz_constant(NonlinearitySpec.table([0, 1], [0, 1]), 0.75, 100_000)
    assert 0.999 <= est <= 1.0 + 1e-12


def test_lipschitz_nested_monotone():
    spec = power(2.0, 0.6)
    values = [estimate_lipschitz_constant(spec, 0.6, n) for n in (10, 100, 1000, 10_000)]
    assert all(b >= a for a, b in zip(values, values[1:]))


@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 10), st.floats(0.05, 0.95), st.integers(0, 2**32 - 1))
def test_lipschitz_power_law_never_exceeds_bound(c, d, seed):
    est = estimate_lipschitz_constant(power(c, d), d, 2000, seed=seed)
    assert est <= c * d * (1 + 1e-6)


def test_lipschitz_domain():
    with pytest.raises(DomainError):
        estimate_lipschitz_constant(power(1, 0.5), 1.0, 10)


# }}}


# {{{ integral criterion


@pytest.mark.parametrize(("d", "expected"), [(0.5, 2.0), (0.75, 4.0), (0.9, 10.0)])
def test_osgood_power_law(d, expected):
    res = osgood_integral(power(1, d))
    assert not res.diverged
    assert res.value == pytest.approx(expected, rel=1e-9)


def test_osgood_scaled_power_law():
    res = osgood_integral(power(2.5, 0.3))
    assert res.value == pytest.approx(1 / (2.5 * 0.7), rel=1e-9)


def test_osgood_linear_diverges():
    res = osgood_integral(NonlinearitySpec.table([0, 1], [0, 1]))
    assert res.diverged
    assert math.isinf(res.value)
    # partial integrals grow by log 2 per halving
    np.testing.assert_allclose(np.diff(res.partials), math.log(2), rtol=1e-10)


def test_osgood_table_with_sqrt_head():
    u = np.concatenate([[0.0], np.logspace(-30, 0, 400)])
    res = osgood_integral(NonlinearitySpec.table(u, np.sqrt(u)))
    assert not res.diverged
    assert res.value == pytest.approx(2.0, rel=1e-3)


def test_osgood_domain():
    with pytest.raises(DomainError):
        osgood_integral(power(1, 0.5), lower_cut=1.0)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.2, 5), st.floats(0.1, 0.85), st.floats(0.2, 1.0), st.floats(0.0, 0.3))
def test_osgood_bounded_when_envelope_passes(c, d, c1_frac, ddelta):
    spec = power(c, d)
    env = NonlinearityEnvelope(c * c1_frac, c, min(d + ddelta, 0.95), d, 1.0)
    if check_envelope(spec, env, 2000).passed:
        bound = 1 / (env.c1 * (1 - env.delta1))
        assert osgood_integral(spec).value <= bound * (1 + 1e-9)


# }}}
