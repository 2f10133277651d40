"""Function specs: builtin corpus, expression parser, spikes and strict CSV."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from regvar_lab.errors import ConfigError, DataFormatError, DomainError
from regvar_lab.functions import FunctionSpec, parse_csv, read_csv, slowly_varying, spike_mask, write_csv

X = np.array([2.0, 10.0, 1e3, 1e6])


@pytest.mark.parametrize("text,oracle", [
    ("pow_slowvar(1.7, log2)", lambda x: x**1.7 * np.log(x) ** 2),
    ("pow_slowvar(2, one)", lambda x: x**2),
    ("pow_slowvar(0.5, loglog)", lambda x: np.sqrt(x) * np.log(np.log(x))),
    ("pow_slowvar(-1, exp_sqrt_log)", lambda x: np.exp(np.sqrt(np.log(x))) / x),
    ("const(3)", lambda x: np.full_like(x, 3.0)),
    ("sin_osc", lambda x: 2 + np.sin(x)),
    ("affine_phi(3, 0.5)", lambda x: 3 + 0.5 * x),
    ("sqrt_phi", np.sqrt),
    ("(1+x)**2.5", lambda x: (1 + x) ** 2.5),
    ("3*n**-1.7/log(n)**2", lambda x: 3 * x**-1.7 / np.log(x) ** 2),
    ("x*(2+sin(x)) - pi", lambda x: x * (2 + np.sin(x)) - math.pi),
])
def test_corpus_values(text, oracle):
    np.testing.assert_allclose(FunctionSpec.parse(text)(X), oracle(X), rtol=1e-14)


def test_scalar_call_returns_float():
    assert isinstance(FunctionSpec.parse("x**2")(3.0), float)


@pytest.mark.parametrize("bad", ["import os", "__import__('os')", "x.real", "foo(x)", "pow_slowvar(1, nope)",
                                 "const()", "y + 1", "lambda x: x", "spiked(x, 2, 1)"])
def test_parser_rejects(bad):
    with pytest.raises(ConfigError):
        FunctionSpec.parse(bad)


def test_slowly_varying_lookup():
    assert slowly_varying("log")(math.e) == pytest.approx(1.0)
    with pytest.raises(ConfigError):
        slowly_varying("nope")


def test_spike_mask_deterministic_and_rate():
    x = np.linspace(1, 1e5, 100_000)
    m1, m2 = spike_mask(x, 0.001, 0), spike_mask(x, 0.001, 0)
    assert np.array_equal(m1, m2)
    assert 50 <= m1.sum() <= 150
    assert not np.array_equal(m1, spike_mask(x, 0.001, 1))
    # membership is pointwise, so subsets see the same spikes
    assert np.array_equal(spike_mask(x[::7], 0.001, 0), m1[::7])


def test_spiked_builtin_records_parameters():
    spec = FunctionSpec.parse("spiked(2+1/x, 0.01, 100)", seed=4)
    assert spec.describe()["spikes"] == {"fraction": 0.01, "height": 100.0, "seed": 4}
    x = np.linspace(1, 1000, 5000)
    y = spec(x)
    m = spike_mask(x, 0.01, 4)
    assert np.all(y[m] == 100.0)
    np.testing.assert_allclose(y[~m], 2 + 1 / x[~m])


def test_tabulated_domain():
    spec = FunctionSpec.tabulated([1.0, 2.0, 3.0], [1.0, 4.0, 9.0])
    assert spec(2.5) == pytest.approx(6.5)
    with pytest.raises(DomainError):
        spec(3.5)


@pytest.mark.parametrize("text,fragment", [
    ("a,b\n1,2\n2,3\n", ":1:"),
    ("x,value\n1,2\n2\n", ":3:"),
    ("x,value\n1,2\n2,abc\n", ":3:"),
    ("x,value\n1,2\n1,3\n", ":3:"),
    ("x,value\n1,2\n2,inf\n", ":3:"),
    ("x,value\n1,2\n", "two data rows"),
])
def test_csv_errors(text, fragment):
    with pytest.raises(DataFormatError, match=fragment):
        parse_csv(text)


@given(st.lists(st.floats(-1e300, 1e300, allow_nan=False), min_size=2, max_size=50))
@settings(max_examples=40, deadline=None)
def test_csv_round_trip_exact(tmp_path_factory, values):
    path = tmp_path_factory.mktemp("csv") / "t.csv"
    xs = np.arange(1.0, len(values) + 1) * 0.1
    write_csv(path, xs, values)
    rx, rv = read_csv(path)
    assert np.array_equal(rx, xs) and np.array_equal(rv, np.asarray(values))
