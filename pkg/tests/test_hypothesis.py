from __future__ import annotations

import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fdefamily.errors import ConfigurationError, InfeasibleExponentError
from fdefamily.hypothesis import (
    HypothesisCertificate,
    SearchRanges,
    check_certificate,
    check_exponents,
    contraction_constant,
    derive_unit_embedding,
    lipschitz_floor,
    search_feasible,
)
from fdefamily.nonlinearity import NonlinearityEnvelope, NonlinearitySpec
from fdefamily.specfun import beta_fn

# g = 8 u**0.75 style envelope with an artificially small Lipschitz constant
SMALL_LIP = NonlinearityEnvelope(c1=8.0, c2=8.0, delta1=0.75, delta2=0.7, c_lip=0.01)


def feasible_certificate() -> HypothesisCertificate:
    # 8 Y1 = c1 with Y1 = 1; c2 = 8 <= 0.5 Y2**0.3 needs Y2 >= 16**(10/3) ~ 10321;
    # (1 + Y2)(1 - T)**1.5 < 0.5 holds for Y2 = 2e4, T = 0.9995
    return HypothesisCertificate.build(0.5, SMALL_LIP, 1.0, 2e4, 0.9995)


def test_hand_constructed_certificate_passes():
    cert = feasible_certificate()
    assert cert.eps1 == pytest.approx(0.5)
    assert cert.eps2 == pytest.approx(1 / 6)
    rep = check_certificate(cert)
    assert rep.passed, rep.failed
    assert rep["decay_budget"].lhs == pytest.approx(20001 * 0.0005**1.5)


def test_decay_budget_failure():
    env = NonlinearityEnvelope(8, 8, 0.75, 0.75, 6.0)
    rep = check_certificate(HypothesisCertificate.build(0.5, env, 1, 1, 0.5))
    cond = rep["decay_budget"]
    assert not cond.passed
    assert cond.lhs == pytest.approx(2 * 0.5**1.5, rel=1e-14)
    assert cond.lhs == pytest.approx(0.7071067812, abs=1e-10)
    assert rep.binding.name == "decay_budget"


def test_lower_growth_failure():
    env = NonlinearityEnvelope(4, 4, 0.75, 0.75, 0.01)
    rep = check_certificate(HypothesisCertificate.build(0.5, env, 1, 2e4, 0.9995))
    assert not rep["lower_growth"].passed
    assert rep["lower_growth"].margin == -4.0


def test_contraction_constant_value():
    env = NonlinearityEnvelope(8, 8, 0.75, 0.75, 0.1)
    cert = HypothesisCertificate.build(0.5, env, 1, 1, 0.5)
    # 0.1 / 0.5**0.75 * 8**0.25 evaluated independently
    assert cert.k == pytest.approx(0.1 * 2**0.75 * 2**0.75, rel=1e-14)
    assert cert.k == pytest.approx(0.2828427125, abs=1e-10)
    assert check_certificate(cert)["contraction"].passed


def test_certificate_requires_admissible_exponents():
    env = NonlinearityEnvelope(1, 1, 0.5, 0.5, 0.5)
    with pytest.raises(InfeasibleExponentError):
        HypothesisCertificate.build(0.5, env, 1, 1, 0.5)
    rep = check_exponents(0.5, env)
    assert not rep.passed
    assert rep.binding.name == "delta2_lower"


def test_certificate_text_roundtrip(tmp_path):
    cert = feasible_certificate()
    cert.save(tmp_path / "cert.txt")
    back = HypothesisCertificate.load(tmp_path / "cert.txt")
    assert back == cert
    with pytest.raises(ConfigurationError):
        HypothesisCertificate.from_text("beta=0.5\n")


def test_report_document_fields():
    doc = check_certificate(feasible_certificate()).as_dict()
    assert doc["pass"] is True
    for cond in doc["conditions"]:
        assert set(cond) == {"tag", "expr", "lhs", "rhs", "margin", "pass"}


# {{{ unit embedding


def test_unit_embedding_small_interval():
    env = NonlinearityEnvelope(8, 8, 0.75, 0.75, 6.0)
    cert = HypothesisCertificate.build(0.5, env, 1, 1, 0.999)
    emb = derive_unit_embedding(cert)
    assert emb.passed
    assert emb.lower_term < 1e-4 and emb.upper_term < 1e-4
    assert emb.lower_term == pytest.approx(beta_fn(2.5, 0.5) * 0.001**2.0, rel=1e-12)


def test_unit_embedding_fails_for_small_T():
    env = NonlinearityEnvelope(8, 8, 0.75, 0.75, 6.0)
    cert = HypothesisCertificate.build(0.5, env, 1, 1, 1e-9)
    assert not derive_unit_embedding(cert).passed


@settings(max_examples=200, deadline=None)
@given(
    st.floats(0.05, 0.95), st.floats(0.0, 1.0), st.floats(0.0, 1.0),
    st.floats(1.0, 1e4), st.floats(1.0, 1e4), st.floats(1e-3, 1 - 1e-6),
)
def test_decay_budget_implies_unit_embedding(beta, s1, s2, Y1, Y2, T):
    lo, hi = 1 / (2 - beta), 2 / (3 - beta)
    d1 = lo + (hi - lo) * (0.01 + 0.98 * max(s1, s2))
    d2 = lo + (hi - lo) * (0.01 + 0.98 * min(s1, s2))
    env = NonlinearityEnvelope(1, 1, d1, d2, 1)
    cert = HypothesisCertificate.build(beta, env, Y1, Y2, T)
    if check_certificate(cert)["decay_budget"].passed:
        assert derive_unit_embedding(cert).passed


# }}}


def test_margins_continuous():
    cert = feasible_certificate()
    base = {c.name: c.margin for c in check_certificate(cert).conditions}
    for field in ("Y1", "Y2", "T"):
        value = getattr(cert, field)
        moved = HypothesisCertificate.build(
            cert.beta, cert.env, *(getattr(cert, f) + (1e-9 if f == field else 0)
                                   for f in ("Y1", "Y2", "T")))
        for c in check_certificate(moved).conditions:
            assert abs(c.margin - base[c.name]) < 1e-6, (field, value, c.name)


def test_lipschitz_floor_makes_certificates_unrealizable():
    # with c_lip >= delta1 c1, 8 Y1 <= c1 and c1 >= 8 the contraction constant exceeds 1
    rng = np.random.default_rng(3)
    for _ in range(500):
        beta = rng.uniform(0.01, 0.99)
        lo, hi = 1 / (2 - beta), 2 / (3 - beta)
        d1 = rng.uniform(lo, hi)
        c1 = rng.uniform(8, 1e4)
        env = NonlinearityEnvelope(c1, c1, d1, d1, 1.0)
        Y1 = rng.uniform(1, c1 / 8)
        assert contraction_constant(lipschitz_floor(env), beta, d1, Y1) > 1


# {{{ search


def test_search_ranges_validation():
    with pytest.raises(ConfigurationError):
        SearchRanges(Y1=(0.5, 10))
    with pytest.raises(ConfigurationError):
        SearchRanges(Y2=(10, 5))
    with pytest.raises(ConfigurationError):
        SearchRanges(T=(0.5, 1.0))


def test_search_power_law_is_infeasible_with_contraction_binding():
    res = search_feasible(NonlinearitySpec.power_law(8, 0.75), 0.5, seed=7)
    assert not res.feasible
    assert res.binding.name == "contraction"
    assert [c.name for c in res.report.failed] == ["contraction"]
    assert res.c_lip_source == "estimated"
    # closed form: d 64**(1-d) c**d / (1-beta)**d with c_lip = c d
    k_min = 0.75 * 64**0.25 * 8**0.75 / 0.5**0.75
    assert res.certificate.k == pytest.approx(k_min, rel=1e-6)


def test_search_finds_small_lipschitz_certificate():
    res = search_feasible(None, 0.5, env=SMALL_LIP, seed=3)
    assert res.feasible
    assert check_certificate(res.certificate).passed
    assert derive_unit_embedding(res.certificate).passed


def test_search_inadmissible_exponents():
    res = search_feasible(NonlinearitySpec.power_law(1, 0.5), 0.5)
    assert not res.feasible and res.certificate is None
    assert res.binding.name == "delta2_lower"


def test_search_is_deterministic():
    spec = NonlinearitySpec.power_law(8, 0.75)
    a = search_feasible(spec, 0.5, seed=11)
    b = search_feasible(spec, 0.5, seed=11)
    assert a.certificate == b.certificate
    assert a.certificate.to_text() == b.certificate.to_text()


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_search_output_respects_type_invariants(seed):
    for env in (SMALL_LIP, dataclasses.replace(SMALL_LIP, c_lip=3.0)):
        res = search_feasible(None, 0.5, env=env, seed=seed)
        cert = res.certificate
        assert cert.Y1 >= 1 and cert.Y2 >= 1 and 0 < cert.T < 1
        assert cert.eps1 >= cert.eps2
        assert cert.k == pytest.approx(contraction_constant(env.c_lip, 0.5, env.delta1, cert.Y1))
        if check_certificate(cert).passed:
            assert derive_unit_embedding(cert).passed


# }}}
