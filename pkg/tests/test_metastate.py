import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from metastates import (
    NonDegeneracy2Violation,
    ValidationError,
    build_metastate_report,
    check_nondegeneracy2,
    ising_model,
    potts_model,
    solve,
    stability_vector_direct,
    stability_vector_partition,
    visibility,
    weights_mc,
    weights_two_types,
)
from metastates.exceptions import TieFractionExceeded
from metastates.free_energy import phi
from metastates.metastate import (
    GaussianSampler,
    classify,
    free_energy_identity,
    metastate,
)
from metastates.model import free_model, gamma_kernels, make_polynomial_ising, general_ising_model
from metastates.transitions import potts_order_parameter_measure

MODELS = [
    ising_model(2.0, [0.5, -0.5]),
    ising_model(1.5, [0.1, 0.4, -0.3], [0.3, 0.3, 0.4]),
    potts_model(3, 2.9, 0.3),
    potts_model(4, 2.2, 0.4),
    general_ising_model(make_polynomial_ising([0, 0, -1.5, 0, -0.4]), [0.3, -0.3]),
]


def fresh(model):
    return solve(model).global_minimizers


# stability vectors


def test_free_model_stability_vectors_vanish():
    alpha = np.array([[0.2, 0.8], [0.7, 0.3], [0.5, 0.5]])
    model = free_model(alpha, [0.2, 0.3, 0.5])
    np.testing.assert_allclose(stability_vector_direct(model, alpha), 0.0, atol=1e-15)
    for nu in ([0.3, 0.7], [0.9, 0.1]):
        np.testing.assert_allclose(stability_vector_partition(model, nu), 0.0, atol=1e-15)


def test_symmetric_ising_vectors_are_swapped(ising_two_phase):
    model, result = ising_two_phase
    a, b = result.global_minimizers
    Ba, Bb = stability_vector_direct(model, a), stability_vector_direct(model, b)
    np.testing.assert_allclose(Ba, Bb[::-1], atol=1e-12)


def test_ising_partition_vector_closed_form():
    beta, fields = 1.3, np.array([0.2, -0.7, 1.1])
    model = ising_model(beta, fields)
    for m in (-0.4, 0.0, 0.65):
        raw = np.log(np.cosh(beta * m + fields) / np.cosh(fields))
        B = stability_vector_partition(model, [(1 + m) / 2, (1 - m) / 2])
        np.testing.assert_allclose(B, raw - raw.mean(), atol=1e-14)


def test_potts_partition_vector_sign_pattern():
    q, beta, B = 3, 2.5, 0.3
    model = potts_model(q, beta, B)
    for u in (0.2, 0.6):
        v = stability_vector_partition(model, potts_order_parameter_measure(q, 0, u))
        first = (q - 1) / q * math.log((math.exp(beta * u + B) + q - 1)
                                       / (math.exp(beta * u) + math.exp(B) + q - 2))
        assert v[0] == pytest.approx(first, abs=1e-14)
        assert v[0] > 0 and v[1] < 0 and v[1] == pytest.approx(v[2], abs=1e-15)


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.F.name)
def test_dual_formulas_and_identity_agree(model):
    for m in fresh(model):
        np.testing.assert_allclose(stability_vector_direct(model, m),
                                   stability_vector_partition(model, m.total_measure), atol=1e-10)
        np.testing.assert_allclose(stability_vector_direct(model, m).sum(), 0.0, atol=1e-12)
        target = phi(model, None, gamma_kernels(model, m.total_measure))
        assert free_energy_identity(model, m.total_measure) == pytest.approx(target, abs=1e-9)


# non-degeneracy 2


def test_nondegeneracy2_cases(ising_two_phase):
    model, result = ising_two_phase
    B = [stability_vector_direct(model, m) for m in result.global_minimizers]
    assert check_nondegeneracy2(B).passed
    with pytest.raises(NonDegeneracy2Violation) as err:
        check_nondegeneracy2([B[0], B[1], B[0]])
    assert err.value.pair == (0, 2) and err.value.distance == 0.0
    diag = check_nondegeneracy2([B[0], B[0]], raise_on_failure=False)
    assert not diag.passed


def test_single_disorder_symbol_collapses_vectors():
    model = ising_model(2.0, [0.0])
    B = [stability_vector_direct(model, m) for m in fresh(model)]
    np.testing.assert_array_equal(B, 0.0)
    with pytest.raises(NonDegeneracy2Violation):
        check_nondegeneracy2(B)


# visibility


def test_visibility_trivial_cases():
    rep = visibility([[0.0, 0.0]])
    assert rep.visible.tolist() == [True]
    rep = visibility([[0.3, -0.3], [-0.1, 0.1]])
    assert rep.visible.tolist() == [True, True]


def test_visibility_interior_point_certificate():
    B = np.array([[1.0, 0.0, -1.0], [-1.0, 1.0, 0.0], [0.0, -1.0, 1.0], [0.0, 0.0, 0.0],
                  [0.2, 0.1, -0.3]])
    rep = visibility(B)
    assert rep.visible.tolist() == [True, True, True, False, False]
    for j, entry in enumerate(rep.entries):
        assert entry.verify(B, j)
    lam = rep.entries[3].combination
    np.testing.assert_allclose(lam @ B, B[3], atol=1e-9)


def test_visibility_of_potts_coexistence(potts_coexistence):
    model, result = potts_coexistence
    states = result.global_minimizers
    B = np.array([stability_vector_direct(model, m) for m in states])
    rep = visibility(B)
    for j, m in enumerate(states):
        zero = np.allclose(m.total_measure, 1 / 3, atol=1e-9)
        assert rep.entries[j].visible is (not zero)
        if zero:
            np.testing.assert_allclose(B[j], 0.0, atol=1e-12)
            np.testing.assert_allclose(np.sort(rep.entries[j].combination), [0, 1/3, 1/3, 1/3],
                                       atol=1e-6)
        assert rep.entries[j].verify(B, j)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 6), st.integers(2, 4), st.integers(0, 2**32 - 1))
def test_visibility_certificates_reverify(k, d, seed):
    rng = np.random.default_rng(seed)
    B = rng.normal(size=(k, d))
    B -= B.mean(axis=1, keepdims=True)
    rep = visibility(B)
    for j, entry in enumerate(rep.entries):
        assert entry.verify(B, j)
    # the extreme points carry the largest projection in some direction
    assert rep.visible[np.argmax(B[:, 0])]


# Gaussian sampler


def test_sampler_moments():
    pi = np.array([0.1, 0.2, 0.3, 0.4])
    n = 10**6
    X = GaussianSampler(pi, seed=3).sample(n)
    assert np.max(np.abs(X.sum(axis=1))) <= 1e-12
    var = pi * (1 - pi)
    se_mean = np.sqrt(var / n)
    assert np.all(np.abs(X.mean(axis=0)) <= 5 * se_mean)
    # Var of the sample variance of a Gaussian is 2 sigma^4 / n
    emp_var = X.var(axis=0)
    assert np.all(np.abs(emp_var - var) <= 5 * np.sqrt(2 * var**2 / n))
    # every covariance entry has standard error at most sqrt(2 / n) / 4
    cov = np.cov(X.T)
    expected = np.diag(pi) - np.outer(pi, pi)
    np.testing.assert_allclose(cov, expected, atol=5 * np.sqrt(2 / n) / 4)


def test_sampler_two_symbols():
    X = GaussianSampler([0.5, 0.5], seed=0).sample(200_000)
    np.testing.assert_allclose(X[:, 0], -X[:, 1], atol=1e-15)
    assert X[:, 0].var() == pytest.approx(0.25, rel=0.02)


def test_sampler_is_seeded_and_iterable():
    a = GaussianSampler([0.3, 0.7], seed=9).sample(10)
    b = GaussianSampler([0.3, 0.7], seed=9).sample(10)
    assert np.array_equal(a, b)
    it = iter(GaussianSampler([0.3, 0.7], seed=9))
    np.testing.assert_array_equal(next(it), a[0])


# weights


def test_two_states_get_half_each(ising_two_phase):
    model, result = ising_two_phase
    B = [stability_vector_direct(model, m) for m in result.global_minimizers]
    w = weights_mc(B, model.pi, samples=200_000, seed=1)
    assert w.weights.sum() == 1.0
    assert np.all(np.abs(w.weights - 0.5) <= 3 * w.stderr)
    np.testing.assert_array_equal(weights_two_types(B), [0.5, 0.5])


def test_two_types_three_states(rfim_three_phase):
    model, result = rfim_three_phase
    states = result.global_minimizers
    assert len(states) == 3
    B = np.array([stability_vector_direct(model, m) for m in states])
    exact = weights_two_types(B)
    assert sorted(exact) == [0.0, 0.5, 0.5]
    w = weights_mc(B, model.pi, samples=200_000, seed=2)
    assert np.count_nonzero(w.weights) == 2
    nz = w.weights > 0
    assert np.all(np.abs(w.weights[nz] - 0.5) <= 3 * w.stderr[nz])
    np.testing.assert_array_equal(nz, exact > 0)


def test_potts_weights(potts_coexistence):
    model, result = potts_coexistence
    states = result.global_minimizers
    B = np.array([stability_vector_direct(model, m) for m in states])
    w = weights_mc(B, model.pi, samples=300_000, seed=5)
    for j, m in enumerate(states):
        if np.allclose(m.total_measure, 1 / 3, atol=1e-9):
            assert w.weights[j] == 0.0
        else:
            assert abs(w.weights[j] - 1 / 3) <= 3 * w.stderr[j]


def test_weights_are_invariant_under_translation_and_scaling():
    rng = np.random.default_rng(4)
    B = rng.normal(size=(4, 3))
    G = GaussianSampler([0.2, 0.3, 0.5], seed=8).sample(10_000)
    base = classify(B, G)
    assert np.array_equal(base, classify(B + np.array([0.3, -1.0, 2.0]), G))
    for c in (1e-3, 0.5, 17.0):
        assert np.array_equal(base, classify(c * B, G))


def test_weights_respect_symmetry():
    # swapping disorder symbols 0 and 1 fixes pi and exchanges the first two vectors
    pi = np.array([0.3, 0.3, 0.4])
    B = np.array([[0.5, -0.2, -0.3], [-0.2, 0.5, -0.3], [-0.25, -0.25, 0.5]])
    w = weights_mc(B, pi, samples=400_000, seed=6)
    assert abs(w.weights[0] - w.weights[1]) <= 3 * np.hypot(w.stderr[0], w.stderr[1])


def test_weights_do_not_depend_on_workers():
    B = np.array([[0.5, -0.5, 0.0], [0.0, 0.4, -0.4], [-0.3, 0.0, 0.3]])
    pi = [0.2, 0.3, 0.5]
    a = weights_mc(B, pi, samples=150_000, seed=3, workers=1)
    b = weights_mc(B, pi, samples=150_000, seed=3, workers=4)
    assert np.array_equal(a.counts, b.counts)


def test_weights_refuse_degenerate_input():
    pi = [0.5, 0.5]
    with pytest.raises(NonDegeneracy2Violation):
        weights_mc([[0.1, -0.1], [0.1, -0.1]], pi, samples=10_000)
    with pytest.raises(TieFractionExceeded):
        # the difference (1, 1) is orthogonal to every tangent sample: all ties
        weights_mc([[0.1, -0.1], [1.1, 0.9]], pi, samples=10_000)
    with pytest.raises(ValidationError):
        weights_mc([[0.1, -0.1]], pi, samples=100)


# reports


def test_single_minimizer_report():
    model = ising_model(0.5, [0.3, -0.1])
    report = metastate(model, samples=10_000)
    assert len(report.minimizers) == 1
    assert report.weights.weights.tolist() == [1.0]
    np.testing.assert_allclose(report.kernels[0],
                               gamma_kernels(model, report.minimizers[0].total_measure))


def test_two_phase_report_kernels_swap(ising_two_phase):
    model, result = ising_two_phase
    report = build_metastate_report(model, result.minimizers, samples=100_000)
    np.testing.assert_allclose(report.kernels[0], report.kernels[1][::-1, ::-1], atol=1e-12)
    assert np.all(np.abs(report.weights.weights - 0.5) <= 3 * report.weights.stderr)
    np.testing.assert_array_equal(report.exact_weights, [0.5, 0.5])


def test_potts_report_matches_components(potts_coexistence):
    model, result = potts_coexistence
    report = build_metastate_report(model, result.minimizers, samples=100_000, seed=4)
    B = np.array([stability_vector_direct(model, m) for m in report.minimizers])
    np.testing.assert_array_equal(report.stability_vectors, B)
    np.testing.assert_array_equal(report.visibility.visible, visibility(B).visible)
    w = weights_mc(B, model.pi, samples=100_000, seed=4)
    np.testing.assert_array_equal(report.weights.counts, w.counts)
    assert np.all(report.weights.weights[~report.visibility.visible] == 0)
    assert report.formula_gap <= 1e-10
    data = json.loads(report.to_json())
    assert data["schema_version"] == "1"
    assert [s["visible"] for s in data["states"]] == report.visibility.visible.tolist()
    assert report.to_json() == build_metastate_report(
        model, result.minimizers, samples=100_000, seed=4).to_json()
    assert "invisible" in report.summary()


def test_report_propagates_nondegeneracy_violation():
    model = ising_model(2.0, [0.0])
    with pytest.raises(NonDegeneracy2Violation):
        metastate(model, samples=10_000)
