"""
Property-Based and Acceptance Tests
Algebraic properties checked with hypothesis, plus the numerical acceptance
oracles (quadratic exactness, trace-rule equivalence, error order, AD
correctness, oracle determinism, sampler fidelity, alpha limit)

Run with:
  - pytest test_properties.py -m "not slow"
  - HYPOTHESIS_PROFILE=ci pytest test_properties.py
"""

import math
from functools import reduce

import numpy as np
import pytest
from hypothesis import given, assume, settings, strategies as st

from core.errors import DomainError
from expressions.nodes import serialize
from expressions.parser import parse
from expressions.evaluator import evaluate
from autodiff.derivatives import gradient, hessian, fd_check
from stochastic.model import validate, Family
from stochastic.sampler import sample, chunk_layout
from taylor.observable import Observable, trace_form, hessian_to_observable
from taylor.estimators import second_order_mean, symmetric_trace_mean
from oracle.accumulator import MomentAccumulator
from oracle.monte_carlo import estimate_mean, chunk_moments, empirical_covariance
from bridge.density import DensityAnalog, quantum_average
from bridge.convergence import convergence_scan, fit_gap_slope, fit_rescaled_line

FAMILIES = [Family.GAUSSIAN, Family.SYMMETRIC_TWO_POINT, Family.UNIFORM]

# Expression sources over x1..x3 that are smooth everywhere
VARIABLES = st.sampled_from(['x1', 'x2', 'x3'])
CONSTANTS = st.one_of(st.just(0.0), st.floats(min_value=1e-3, max_value=4.0)).map(repr)


def _extend(children):
    return st.one_of(
        st.tuples(children, st.sampled_from(['+', '-', '*']), children).map(
            lambda t: f"({t[0]} {t[1]} {t[2]})"
        ),
        st.tuples(st.sampled_from(['sin', 'cos', 'tanh']), children).map(lambda t: f"{t[0]}({t[1]})"),
        children.map(lambda s: f"-{s}"),
        st.tuples(children, st.sampled_from(['2', '3'])).map(lambda t: f"({t[0]})^{t[1]}"),
    )


SMOOTH = st.recursive(st.one_of(VARIABLES, CONSTANTS), _extend, max_leaves=8)
POINTS = st.lists(st.floats(min_value=-1.0, max_value=1.0), min_size=3, max_size=3)
COEFFICIENTS = st.floats(min_value=-3.0, max_value=3.0, allow_nan=False)
SEEDS = st.integers(min_value=0, max_value=2 ** 32 - 1)


def random_covariance(rng, n, ridge=0.1):
    """Well-conditioned, exactly symmetric PSD matrix"""
    M = rng.normal(size=(n, n))
    B = M @ M.T / n + ridge * np.eye(n)
    return (B + B.T) / 2


def smooth_or_skip(function, *args):
    try:
        return function(*args)
    except DomainError:
        assume(False)


def vanishing_at_origin(source):
    """f - f(0), which is exactly 0 at the origin"""
    offset = smooth_or_skip(evaluate, parse(source), np.zeros(3))
    return parse(f"({source}) - ({offset!r})")


# Expressions

@given(SMOOTH)
def test_parse_serialize_round_trip(source):
    expression = parse(source)
    again = parse(serialize(expression))
    assert again == expression
    assert serialize(again) == serialize(expression)


@given(SMOOTH, POINTS)
def test_evaluate_is_deterministic(source, point):
    f = parse(source)
    first = smooth_or_skip(evaluate, f, point)
    assert evaluate(f, point) == first


# Derivatives

@given(SMOOTH, POINTS)
def test_hessian_exactly_symmetric(source, point):
    H = smooth_or_skip(hessian, parse(source), point)
    assert np.array_equal(H, H.T)


@given(SMOOTH, SMOOTH, COEFFICIENTS, COEFFICIENTS, POINTS)
def test_derivatives_are_linear(f_source, g_source, a, b, point):
    combined = parse(f"{a!r} * ({f_source}) + {b!r} * ({g_source})")
    f, g = parse(f_source), parse(g_source)

    expected_grad = a * smooth_or_skip(gradient, f, point) + b * smooth_or_skip(gradient, g, point)
    expected_hess = a * smooth_or_skip(hessian, f, point) + b * smooth_or_skip(hessian, g, point)
    grad = smooth_or_skip(gradient, combined, point)
    hess = smooth_or_skip(hessian, combined, point)

    scale = 1.0 + np.abs(expected_grad).max()
    assert np.allclose(grad, expected_grad, rtol=1e-12, atol=1e-12 * scale)
    scale = 1.0 + np.abs(expected_hess).max()
    assert np.allclose(hess, expected_hess, rtol=1e-12, atol=1e-12 * scale)


@given(CONSTANTS, POINTS)
def test_constant_has_zero_derivatives(constant, point):
    f = parse(f"{constant} * 3 + sin({constant})")
    assert np.array_equal(gradient(f, point), np.zeros(3))
    assert np.array_equal(hessian(f, point), np.zeros((3, 3)))


AD_CORPUS = [
    'x1^2',
    'x1*x2',
    'exp(x1)',
    'sin(x1)*cos(x2)',
    'tanh(x1 - 2*x2)',
    'log(2 + x1)',
    'sqrt(3 + x1*x2)',
    '1/(2 + x1)',
    'x1^3 - 2*x1*x2^2 + x3',
    'exp(x1*x2)*x3',
    'cos(x1 + x2 + x3)',
    'x1 / (1.5 + sin(x2))',
    '(1 + x1^2)^0.5',
    '2^x1',
    'exp(-x1^2 - x2^2)',
    'log(1.5 + cos(x1)) * x2',
    'tanh(x1)*tanh(x2)*tanh(x3)',
    'sin(x1^2 + x2)',
    '(2 + x1)^x2',
    'sqrt(x1^2 + x2^2 + 1)',
]


@pytest.mark.parametrize('index', range(len(AD_CORPUS)))
def test_fd_agreement_on_corpus(index):
    source = AD_CORPUS[index]
    f = parse(source)
    rng = np.random.default_rng(index)
    for _ in range(10):
        point = rng.uniform(-1.0, 1.0, size=max(f.arity, 1))
        report = fd_check(f, point, 1e-4)
        assert report.within(1e-5), (source, point, report)
        H = hessian(f, point)
        assert np.array_equal(H, H.T)


# Trace form and Taylor estimators

@st.composite
def symmetric_pairs(draw):
    n = draw(st.integers(min_value=1, max_value=4))
    entries = st.floats(min_value=-10.0, max_value=10.0, allow_nan=False)
    values = draw(st.lists(entries, min_size=2 * n * n, max_size=2 * n * n))
    first = np.array(values[:n * n]).reshape(n, n)
    second = np.array(values[n * n:]).reshape(n, n)
    return (first + first.T) / 2, (second + second.T) / 2


@given(symmetric_pairs())
def test_trace_form_is_symmetric_in_its_arguments(pair):
    B, A = pair
    assert trace_form(B, Observable(A)) == trace_form(A, Observable(B))
    assert trace_form(B.T, A.T) == trace_form(B, A)


@given(symmetric_pairs(), symmetric_pairs(), COEFFICIENTS, COEFFICIENTS)
def test_trace_form_is_linear(first, second, s, t):
    B1, A = first
    B2, _ = second
    assume(B1.shape == B2.shape)
    combined = trace_form(s * B1 + t * B2, A)
    expected = s * trace_form(B1, A) + t * trace_form(B2, A)
    scale = math.fsum(np.abs(s * B1 * A).ravel()) + math.fsum(np.abs(t * B2 * A).ravel())
    assert abs(combined - expected) <= 1e-12 * scale + 1e-300


@given(SMOOTH, SEEDS, st.sampled_from([0.25, 0.5, 2.0, 4.0]))
def test_covariance_scaling_scales_the_correction(source, seed, s):
    rng = np.random.default_rng(seed)
    B = random_covariance(rng, 3)
    mean = rng.uniform(-1.0, 1.0, size=3)
    f = parse(source)
    base = smooth_or_skip(second_order_mean, f, validate(mean, B))
    scaled = second_order_mean(f, validate(mean, s * B))
    assert scaled.correction_term == s * base.correction_term
    assert scaled.constant_term == base.constant_term


@settings(max_examples=100)
@given(SMOOTH, SEEDS)
def test_trace_rule_equivalence(source, seed):
    f = vanishing_at_origin(source)
    model = validate(np.zeros(3), random_covariance(np.random.default_rng(seed), 3))
    trace = smooth_or_skip(symmetric_trace_mean, f, model)
    direct = trace_form(model.covariance, hessian_to_observable(f, 3))
    second = second_order_mean(f, model).value
    assert abs(trace - direct) <= 1e-14
    assert abs(trace - second) <= 1e-14


@settings(max_examples=100)
@given(SMOOTH, SEEDS, COEFFICIENTS, COEFFICIENTS, COEFFICIENTS)
def test_linear_terms_do_not_contribute(source, seed, c1, c2, c3):
    f = parse(source)
    shifted = parse(f"({source}) + {c1!r}*x1 + {c2!r}*x2 + {c3!r}*x3")
    rng = np.random.default_rng(seed)
    B = random_covariance(rng, 3)

    centred = validate(np.zeros(3), B)
    base = smooth_or_skip(second_order_mean, f, centred)
    assert abs(second_order_mean(shifted, centred).value - base.value) < 1e-12

    mean = rng.uniform(-1.0, 1.0, size=3)
    moved = validate(mean, B)
    base = smooth_or_skip(second_order_mean, f, moved)
    linear = c1 * mean[0] + c2 * mean[1] + c3 * mean[2]
    value = second_order_mean(shifted, moved).value
    scale = abs(base.value) + abs(c1 * mean[0]) + abs(c2 * mean[1]) + abs(c3 * mean[2]) + abs(base.correction_term)
    assert abs(value - (base.value + linear)) <= 1e-12 * scale + 1e-15


def quadratic_form(rng, n):
    """Random f = c + b.x + x.Qx with its closed-form pieces"""
    Q = rng.normal(size=(n, n))
    Q = (Q + Q.T) / 2
    b = rng.normal(size=n)
    c = float(rng.normal())
    terms = [repr(c)]
    terms += [f"({float(b[i])!r})*x{i + 1}" for i in range(n)]
    terms += [f"({float(Q[i, j])!r})*x{i + 1}*x{j + 1}" for i in range(n) for j in range(n)]
    return parse(' + '.join(terms)), Q, b, c


def closed_form_mean(Q, b, c, m, B):
    return c + b @ m + m @ Q @ m + np.trace(B @ Q)


def test_quadratic_exactness_against_closed_form():
    rng = np.random.default_rng(2024)
    dimensions = [1, 2, 5, 20]
    for case in range(50):
        n = dimensions[case % len(dimensions)]
        f, Q, b, c = quadratic_form(rng, n)
        m = rng.normal(size=n) * 0.5
        B = random_covariance(rng, n)
        value = second_order_mean(f, validate(m, B)).value
        expected = closed_form_mean(Q, b, c, m, B)
        scale = abs(c) + np.abs(b) @ np.abs(m) + np.abs(m) @ np.abs(Q) @ np.abs(m) + np.sum(np.abs(B * Q))
        assert abs(value - expected) <= 1e-12 * scale, (n, value, expected)


@pytest.mark.parametrize('family', FAMILIES)
@pytest.mark.parametrize('n', [1, 2, 5, 20])
def test_quadratic_exactness_against_oracle(family, n):
    rng = np.random.default_rng(1000 + n)
    f, Q, b, c = quadratic_form(rng, n)
    m = rng.normal(size=n) * 0.5
    B = random_covariance(rng, n)
    if family.diagonal_only:
        B = np.diag(np.diag(B))
    model = validate(m, B, family)
    taylor = second_order_mean(f, model).value
    oracle = estimate_mean(f, model, 1000000, 77 + n)
    assert abs(taylor - oracle.mean) <= 4 * oracle.std_error


def test_second_order_error_order_for_exp():
    f = parse('exp(x1)')
    variances = np.array([0.2, 0.1, 0.05, 0.025])
    errors = []
    for variance in variances:
        value = second_order_mean(f, validate([0.0], [[variance]])).value
        error = abs(value - math.exp(variance / 2))
        assert abs(error - variance ** 2 / 8) <= 0.15 * variance ** 2 / 8
        errors.append(error)
    slope = np.polyfit(np.log(variances), np.log(errors), 1)[0]
    assert abs(slope - 2.0) <= 0.1


# Monte Carlo oracle and sampler

def test_oracle_determinism_across_workers():
    f = parse('sin(x1) + x2^2*exp(x1)')
    model = validate([0.2, -0.1], [[0.4, 0.1], [0.1, 0.3]])
    results = [estimate_mean(f, model, 1000000, 424242, workers=w) for w in (1, 2, 8)]
    assert results[0] == results[1] == results[2]

    chunks = [chunk_moments(f, model, 424242, k, size, offset) for k, offset, size in chunk_layout(1000000)]
    merged = reduce(MomentAccumulator.merge, chunks, MomentAccumulator())
    assert (merged.mean, merged.std_error) == (results[0].mean, results[0].std_error)


@given(st.lists(st.floats(min_value=-1e3, max_value=1e3), min_size=2, max_size=200), st.integers(1, 199))
def test_accumulator_merge_matches_single_pass(values, cut):
    assume(cut < len(values))
    whole = MomentAccumulator.from_values(values)
    merged = MomentAccumulator.from_values(values[:cut]).merge(MomentAccumulator.from_values(values[cut:]))
    assert merged.count == whole.count
    assert math.isclose(merged.mean, whole.mean, rel_tol=1e-12, abs_tol=1e-9)
    assert math.isclose(merged.m2, whole.m2, rel_tol=1e-9, abs_tol=1e-6)


@pytest.mark.parametrize('family', FAMILIES)
def test_sampler_moment_fidelity(family):
    if family.diagonal_only:
        B = np.array([[1.0, 0.0], [0.0, 2.0]])
    else:
        B = np.array([[1.0, 0.5], [0.5, 2.0]])
    batch = sample(validate([0.0, 0.0], B, family), 1000000, 2718)
    N = batch.count
    mean, covariance = empirical_covariance(batch)
    deviations = batch.points - mean

    for i in range(2):
        assert abs(mean[i]) <= 5 * math.sqrt(B[i, i] / N)
        cubes = deviations[:, i] ** 3
        assert abs(cubes.mean()) <= 5 * cubes.std() / math.sqrt(N)
        for j in range(2):
            products = deviations[:, i] * deviations[:, j]
            assert abs(covariance[i, j] - B[i, j]) <= 5 * products.std() / math.sqrt(N)


@pytest.mark.parametrize('family', FAMILIES)
def test_sampler_mean_bound_with_offset(family):
    m = np.array([1.5, -2.0])
    B = np.diag([0.5, 3.0])
    batch = sample(validate(m, B, family), 1000000, 99)
    sigma = np.sqrt(np.diag(B))
    assert np.all(np.abs(batch.points.mean(axis=0) - m) <= 4 * sigma / math.sqrt(batch.count))


# Density analog and convergence

@given(SEEDS, st.integers(min_value=1, max_value=5))
def test_quantum_average_of_identity_is_one(seed, n):
    rng = np.random.default_rng(seed)
    P = random_covariance(rng, n)
    rho = DensityAnalog.from_matrix(P / np.trace(P))
    assert abs(quantum_average(rho, Observable.identity(n)) - 1.0) <= 1e-12


@given(SEEDS, COEFFICIENTS)
def test_quantum_average_is_linear_in_the_observable(seed, s):
    rng = np.random.default_rng(seed)
    P = random_covariance(rng, 3)
    rho = DensityAnalog.from_matrix(P / np.trace(P))
    A1 = random_covariance(rng, 3, ridge=0.0)
    A2 = random_covariance(rng, 3, ridge=0.0)
    combined = quantum_average(rho, Observable(A1 + s * A2))
    expected = quantum_average(rho, Observable(A1)) + s * quantum_average(rho, Observable(A2))
    scale = 1.0 + abs(quantum_average(rho, Observable(A1))) + abs(s * quantum_average(rho, Observable(A2)))
    assert abs(combined - expected) <= 1e-12 * scale


@given(SEEDS, st.floats(min_value=0.0, max_value=1.0))
def test_quantum_average_is_linear_in_rho(seed, t):
    rng = np.random.default_rng(seed)
    P1 = random_covariance(rng, 3)
    P2 = random_covariance(rng, 3)
    rho1 = P1 / np.trace(P1)
    rho2 = P2 / np.trace(P2)
    A = Observable(random_covariance(rng, 3, ridge=0.0))
    mixed = quantum_average(DensityAnalog.from_matrix(t * rho1 + (1.0 - t) * rho2), A)
    first = quantum_average(DensityAnalog.from_matrix(rho1), A)
    second = quantum_average(DensityAnalog.from_matrix(rho2), A)
    expected = t * first + (1.0 - t) * second
    assert abs(mixed - expected) <= 1e-12 * (1.0 + abs(first) + abs(second))


@given(SEEDS, st.integers(min_value=1, max_value=5))
def test_quantum_average_is_symmetric_in_rho_and_observable(seed, n):
    rng = np.random.default_rng(seed)
    P = random_covariance(rng, n)
    rho = DensityAnalog.from_matrix(P / np.trace(P))
    A = random_covariance(rng, n, ridge=0.0)
    assert quantum_average(rho, Observable(A)) == trace_form(A, Observable(rho.rho))


@pytest.mark.parametrize('source', ['x1^4 + x1^2', 'cos(x1) - 1 + x1^2'])
def test_gap_shrinks_linearly_for_two_point_samples(source):
    rows = convergence_scan(parse(source), DensityAnalog.from_matrix([[1.0]]), count=10, seed=1,
                            family=Family.SYMMETRIC_TWO_POINT)
    gaps = [row.gap for row in rows]
    assert all(later < earlier for earlier, later in zip(gaps, gaps[1:]))
    fit = fit_gap_slope(rows)
    assert fit.significant
    assert 0.8 <= fit.slope <= 1.2


@pytest.mark.slow
def test_alpha_limit_gaussian():
    rows = convergence_scan(parse('x1^2 + x1^4'), DensityAnalog.from_matrix([[1.0]]),
                            count=10 ** 7, seed=5, family=Family.GAUSSIAN, max_row_count=10 ** 8)
    line = fit_rescaled_line(rows)
    assert abs(line.slope - 3.0) <= 0.3
    assert abs(line.intercept - 1.0) <= 0.05
    fit = fit_gap_slope(rows)
    assert 0.8 <= fit.slope <= 1.2
