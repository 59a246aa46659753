import json
import math

import numpy as np
import pytest

from lognorm_cert.certify import (CERTIFIED, FAILS, HOLDS, INCONCLUSIVE, NOT_CERTIFIED, CertifyConfig,
                                  check_A1, check_A2, check_A3, certify, envelope_bound, envelope_spotcheck,
                                  overall_verdict)
from lognorm_cert.linalg import NormKind
from lognorm_cert.odesim import IntegratorSettings, integrate_ode
from lognorm_cert.system_model import Perturbation, Scenario, builtin_scenario, constant_matrix

TWO, ONE, INF = NormKind.TWO, NormKind.ONE, NormKind.INF
A1 = [[-11.0, 10.0], [2.0, -3.0]]


@pytest.fixture(scope="module")
def ex2():
    return builtin_scenario("example2", {"beta": "t4"})


@pytest.fixture(scope="module")
def ex3():
    return builtin_scenario("example3", {"lam": 1.0})


class TestA1:
    def test_example2_euclidean(self, ex2):
        v = check_A1(ex2.matrix_function, TWO, 20.0)
        assert v.verdict == HOLDS
        assert v.parameters["integral_at_T"] == pytest.approx(-220.0, rel=1e-6)

    def test_example2_column_norm(self, ex2):
        assert check_A1(ex2.matrix_function, ONE, 20.0).verdict == FAILS

    @pytest.mark.parametrize("kind", [ONE, TWO, INF])
    def test_zero_matrix(self, kind):
        assert check_A1(constant_matrix(np.zeros((2, 2))), kind, 10.0).verdict == FAILS

    def test_below_threshold_is_inconclusive(self, ex3):
        assert check_A1(ex3.matrix_function, TWO, 20.0).verdict == INCONCLUSIVE
        assert check_A1(ex3.matrix_function, TWO, 60.0).verdict == HOLDS


class TestA2:
    def test_example2(self, ex2):
        v = check_A2(ex2.matrix_function, TWO, (0.0, 20.0))
        assert v.verdict == HOLDS and v.parameters["max_mu"] <= -1.0 + 1e-12

    def test_example2_exact_samples(self, ex2):
        v = check_A2(ex2.matrix_function, TWO, (0.0, 20.0))
        assert np.allclose(v.columns["mu"], -(v.columns["t"] + 1.0), atol=1e-12, rtol=0)

    def test_example3(self, ex3):
        v = check_A2(ex3.matrix_function, TWO, (0.0, 10.0))
        assert v.verdict == HOLDS and v.parameters["max_mu"] == pytest.approx(-1.0, abs=1e-12)

    def test_constant_positive(self):
        v = check_A2(constant_matrix(A1), TWO, (3.0, 9.0))
        assert v.verdict == FAILS and v.parameters["max_mu"] == pytest.approx(0.2111025509, abs=1e-9)

    def test_window_validation(self, ex2):
        with pytest.raises(ValueError):
            check_A2(ex2.matrix_function, TWO, (5.0, 5.0))


class TestA3:
    grid = np.linspace(0.0, 20.0, 512)

    def test_example2(self, ex2):
        v = check_A3(ex2.perturbation, ex2.matrix_function, TWO, self.grid)
        assert v.verdict == HOLDS and v.parameters["trend_slope"] < 0

    def test_example3(self, ex3):
        v = check_A3(ex3.perturbation, ex3.matrix_function, TWO, self.grid)
        assert v.verdict == FAILS
        assert np.allclose(v.columns["ratio"], 1.0, atol=1e-12)

    def test_zero_perturbation(self, ex3):
        v = check_A3(None, ex3.matrix_function, TWO, self.grid)
        assert v.verdict == HOLDS
        assert np.all(v.columns["ratio"] == 0.0)

    def test_missing_envelope(self, ex3):
        p = Perturbation(lambda x, t: np.zeros(2))
        v = check_A3(p, ex3.matrix_function, TWO, self.grid)
        assert v.verdict == INCONCLUSIVE and "envelope" in v.message

    def test_nonnegative_mu(self):
        v = check_A3(None, constant_matrix(A1), TWO, self.grid)
        assert v.verdict == INCONCLUSIVE


class TestEnvelope:
    def test_unperturbed(self, ex2):
        sc = Scenario("bare", ex2.matrix_function, None)
        ts = np.linspace(0, 4, 9)
        B = envelope_bound(sc, TWO, ts, 1.0)
        assert np.allclose(B, np.exp(-(ts * ts / 2 + ts)), rtol=1e-9)

    def test_example3_tight(self, ex3):
        ts = np.linspace(0, 4, 81)
        B = envelope_bound(ex3, TWO, ts, 0.0)
        assert np.abs(B - (1 - np.exp(-ts))).max() <= 1e-6

    def test_example2_finite_and_decaying(self, ex2):
        ts = np.linspace(0, 20, 201)
        B = envelope_bound(ex2, TWO, ts, math.hypot(5, 2))
        assert np.all(np.isfinite(B))
        # B inherits the 100|cos t| ripple, so compare window maxima
        peaks = [B[(ts >= a) & (ts <= a + 5)].max() for a in (5.0, 10.0, 15.0)]
        assert peaks[0] > peaks[1] > peaks[2]

    def test_no_overflow_when_integral_is_very_negative(self, ex2):
        ts = np.linspace(0, 40, 41)  # integral reaches -840
        B = envelope_bound(ex2, TWO, ts, 1.0)
        assert np.all(np.isfinite(B)) and B[-1] > 0

    def test_single_point(self, ex2):
        assert envelope_bound(ex2, TWO, [0.0], 3.0).tolist() == [3.0]


class TestSpotcheck:
    def test_example2_passes(self, ex2):
        assert envelope_spotcheck(ex2.perturbation, 2).passed

    def test_bounded_nonlinearity_passes(self):
        p = Perturbation(lambda x, t: math.exp(-t) * math.sin(x[0]) * np.array([1.0, 0.0]),
                         lambda t: math.exp(-t))
        assert envelope_spotcheck(p, 2, x_radius=5.0).passed

    def test_violation_has_witness(self):
        p = Perturbation(lambda x, t: x, lambda t: 1.0)
        r = envelope_spotcheck(p, 2, x_radius=2.0)
        assert not r.passed
        assert r.witness["norm_w"] > 1.0 and np.linalg.norm(r.witness["x"]) > 1.0


class TestCertify:
    def test_example2(self, ex2):
        reports = certify(ex2, [TWO, ONE, INF])
        assert [r.overall for r in reports] == [CERTIFIED, NOT_CERTIFIED, NOT_CERTIFIED]
        for r in reports[1:]:
            assert r.assumptions[0].verdict == FAILS

    def test_example3(self, ex3):
        (r,) = certify(ex3, [TWO], CertifyConfig(simulate=True))
        assert r.overall == NOT_CERTIFIED and r.assumptions[2].verdict == FAILS
        assert r.simulation["passed"]
        assert r.simulation["tail_norm"] == pytest.approx(1 - math.exp(-4), abs=1e-3)

    def test_overall_recomputable_and_deterministic(self, ex2):
        a = certify(ex2, [TWO, ONE])
        b = certify(ex2, [TWO, ONE])
        for ra, rb in zip(a, b):
            assert ra.to_json() == rb.to_json()
            assert overall_verdict(ra.assumptions) == ra.overall
            d = json.loads(ra.to_json())
            assert set(d) == {"scenario", "kind", "assumptions", "overall", "simulation"}
            assert [x["id"] for x in d["assumptions"]] == ["A1", "A2", "A3"]

    def test_random_initial_states_respect_envelope(self, ex2):
        cfg = CertifyConfig(simulate=True, random_x0=10, seed=3)
        (r,) = certify(ex2, [TWO], cfg)
        assert r.overall == CERTIFIED
        assert r.simulation["initial_states"] == 11
        assert r.simulation["max_envelope_ratio"] <= 1 + 1e-3

    def test_unperturbed_decay(self, ex2):
        x0 = np.array([-5.0, 2.0])
        ts = np.linspace(0, 5, 51)
        bare = Scenario("bare", ex2.matrix_function, None)
        tr = integrate_ode(bare.rhs, x0, (0, 5), IntegratorSettings(1e-11, 1e-18), t_eval=ts)
        bound = np.linalg.norm(x0) * np.exp(-(ts * ts / 2 + ts)) * (1 + 1e-3)
        assert np.all(np.linalg.norm(tr.states, axis=1) <= bound)


def test_overall_rules():
    from lognorm_cert.certify import AssumptionVerdict as V
    mk = lambda *s: [V(f"A{i + 1}", x, "") for i, x in enumerate(s)]
    assert overall_verdict(mk(HOLDS, HOLDS, HOLDS)) == CERTIFIED
    assert overall_verdict(mk(HOLDS, FAILS, INCONCLUSIVE)) == NOT_CERTIFIED
    assert overall_verdict(mk(HOLDS, INCONCLUSIVE, HOLDS)) == INCONCLUSIVE
