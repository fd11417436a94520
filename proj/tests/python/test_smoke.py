import math

import pytest

import weaklab


def test_version_and_catalog():
    assert weaklab.__version__ == "0.1.0"
    names = [name for name, _ in weaklab.list_studies()]
    assert "weak-rate" in names and "greeks" in names


def test_gbm_euler_mean_matches_recursion():
    assert weaklab.gbm_euler_mean(0.1, 1.0, 8, 1.0) == pytest.approx((1 + 0.1 / 8) ** 8, rel=1e-14)


def test_monte_carlo_expectation_is_reproducible():
    model = weaklab.gbm_model(0.1, 0.2)
    a = weaklab.estimate_expectation(model, weaklab.identity(), [1.0], 8, 1.0, 20000, seed=3)
    b = weaklab.estimate_expectation(model, weaklab.identity(), [1.0], 8, 1.0, 20000, seed=3)
    assert a == b
    assert abs(a[0] - weaklab.gbm_euler_mean(0.1, 1.0, 8, 1.0)) < 4 * a[1]


def test_constant_model_has_no_density_error():
    model = weaklab.constant_model(0.3, 0.8)
    assert weaklab.principal_density_pi(model, 0.5, [0.0], [0.2])[0] == 0.0
    assert abs(weaklab.density_error_exact(model, 4, 0.5, [0.0], [0.2])) < 1e-14


def test_fit_rate_recovers_slope():
    ns = [8, 16, 32, 64]
    fit = weaklab.fit_rate(ns, [1.0 / n for n in ns], [1e-9] * 4)
    assert fit["slope"] == pytest.approx(-1.0, abs=1e-12)


def test_black_scholes_call_delta():
    price, delta, gamma = weaklab.black_scholes_call(1.0, 1.0, 0.0, 0.2, 1.0)
    assert delta == pytest.approx(0.5 * (1 + math.erf(0.1 / math.sqrt(2))), rel=1e-12)
    assert price > 0 and gamma > 0


def test_run_study_and_exit_codes():
    config = {
        "study": "weak-rate",
        "model": {"name": "gbm", "mu": 0.1, "sigma": 0.2},
        "function": {"name": "identity"},
        "n_ladder": [8, 16, 32, 64],
        "mode": "deterministic",
        "x": 1.0,
    }
    out = weaklab.run_study(config)
    assert out["exit_code"] == 0
    assert out["summary"]["status"] == "pass"
    assert out["csv"].startswith("study,model,f,t,x,n,N,estimate,truth,bias,ci_halfwidth,oracle\n")
    config["samples"] = 10
    assert weaklab.run_study(config)["exit_code"] == 3


def test_validate_raises_config_error():
    with pytest.raises(weaklab.ConfigError):
        weaklab.validate('{"study": "weak-rate", "oops": 1}')
