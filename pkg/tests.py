"""
Comprehensive Unit Tests for the Moment Propagation Engine
Tests parsing, derivatives, stochastic models, Taylor estimators, the
Monte Carlo oracle, the density-analog bridge, comparison, storage and the CLI

TESTING APPROACH:
- Worked examples use exact expected values wherever the arithmetic is exact
- Monte Carlo checks use fixed seeds and statistical bounds (4 standard errors)
- CLI tests call cli.app.main() in-process with temporary job files

Property-based tests and the long acceptance runs live in test_properties.py.
"""

import contextlib
import io
import json
import math
import os
import shutil
import sqlite3
import tempfile
import unittest
from functools import reduce
from unittest.mock import patch

import numpy as np
from dotenv import load_dotenv

from core.errors import (
    ParseError, DomainError, NotPSDError, FamilyConstraintError, NotSymmetricError,
    DensityError, InsufficientSamplesError, PreconditionViolation, ConfigError,
    DimensionMismatchError
)
from expressions.nodes import Constant, Variable, Unary, Binary, serialize
from expressions.parser import parse
from expressions.evaluator import evaluate, evaluate_batch
from autodiff.derivatives import gradient, hessian, derivatives, fd_check
from stochastic.model import validate, cholesky_factor, Family
from stochastic.sampler import sample, SampleBatch, CHUNK_SIZE, chunk_layout
from taylor.observable import Observable, trace_form, hessian_to_observable
from taylor.estimators import (
    first_order_mean, second_order_mean, symmetric_trace_mean, linearization_check
)
from oracle.accumulator import MomentAccumulator
from oracle.monte_carlo import estimate_mean, chunk_moments, empirical_covariance
from bridge.density import DensityAnalog, quantum_average, make_alpha_model
from bridge.convergence import convergence_scan, fit_gap_slope, fit_rescaled_line, row_count
from comparison.method_comparator import MethodComparator
from storage.database import init_database, get_connection
from storage.run_store import RunStore
from cli.app import main
from cli.config import JobConfig, parse_config
from cli.runner import run_estimate

# Load environment variables
load_dotenv()

WORKED_EXAMPLE = {
    'expression': 'exp(x1)',
    'mean': [0.0],
    'covariance': [[0.1]],
    'family': 'gaussian',
    'methods': ['taylor1', 'taylor2', 'mc'],
    'mc_count': 1000000,
    'seed': 20240601,
}


def _text_sections(text):
    """Parse the text report into {section: {field: raw value}}"""
    sections = {}
    current = None
    for line in text.splitlines():
        if line.startswith('[') and line.endswith(']'):
            current = sections.setdefault(line[1:-1], {})
        elif current is not None and ' = ' in line:
            name, value = line.split(' = ', 1)
            current[name.strip()] = value.strip()
    return sections


class MomentEngineTestCase(unittest.TestCase):
    """Unit tests for the moment propagation engine"""

    @classmethod
    def setUpClass(cls):
        """Set up test configuration"""
        print("\n" + "=" * 60)
        print("Moment Propagation Engine - Unit Test Suite")
        print("=" * 60)
        print("Testing: Parser, AD, Models, Taylor, MC, Bridge, CLI")
        print("=" * 60 + "\n")

        cls.workdir = tempfile.mkdtemp(prefix='moments_test_')
        cls.db_path = os.path.join(cls.workdir, 'test_moments.db')
        init_database(cls.db_path)

    @classmethod
    def tearDownClass(cls):
        """Clean up after tests"""
        shutil.rmtree(cls.workdir, ignore_errors=True)

    def write_job(self, name, job):
        path = os.path.join(self.workdir, name)
        with open(path, 'w', encoding='utf-8') as handle:
            json.dump(job, handle)
        return path

    def run_cli(self, *argv):
        stdout, stderr = io.StringIO(), io.StringIO()
        with contextlib.redirect_stdout(stdout), contextlib.redirect_stderr(stderr):
            code = main(list(argv))
        return code, stdout.getvalue(), stderr.getvalue()

    # Test 1: Parser
    def test_01_parse_examples(self):
        """Test parse trees, arity and error offsets"""
        print("\n1. Testing parser...")

        f = parse('x1^2')
        self.assertEqual(f.root, Binary('^', Variable(1), Constant(2.0)))
        self.assertEqual(f.arity, 1)

        g = parse('sin(x1) + 2*x3')
        self.assertEqual(
            g.root,
            Binary('+', Unary('sin', Variable(1)), Binary('*', Constant(2.0), Variable(3)))
        )
        self.assertEqual(g.arity, 3)
        self.assertEqual(g.variables, (1, 3))

        with self.assertRaises(ParseError) as caught:
            parse('x1 + * 2')
        self.assertEqual(caught.exception.offset, 5)
        self.assertIn('variable', caught.exception.expected)

        # only ASCII digits: U+0661 is ARABIC-INDIC DIGIT ONE
        for bad in ('x0 + 1', 'foo(x1)', 'sin x1', '(x1 + 2', 'x1 2', '', 'x\u0661', '\u0661 + x1'):
            with self.assertRaises(ParseError):
                parse(bad)

        print(f"   'x1^2' -> {f}, arity {f.arity}")
        print(f"   'x1 + * 2' -> offset {caught.exception.offset}")

    # Test 2: Byte offsets
    def test_02_parse_byte_offsets(self):
        """Test that error offsets count UTF-8 bytes"""
        print("\n2. Testing byte offsets...")

        # U+00A0 is whitespace but two bytes in UTF-8
        with self.assertRaises(ParseError) as caught:
            parse('x1\u00a0+ * 2')
        self.assertEqual(caught.exception.offset, 6)

        with self.assertRaises(ParseError) as caught:
            parse('x1 + 2 )')
        self.assertEqual(caught.exception.offset, 7)
        self.assertIn('end', caught.exception.expected)

        print(f"   Offset after a 2-byte space: {caught.exception.offset}")

    # Test 3: Evaluation
    def test_03_evaluate_examples(self):
        """Test evaluation, precedence and domain errors"""
        print("\n3. Testing evaluation...")

        self.assertEqual(evaluate(parse('x1^2'), [3.0]), 9.0)
        self.assertEqual(evaluate(parse('exp(x1)'), [0.0]), 1.0)
        self.assertEqual(evaluate(parse('2+3*4'), []), 14.0)
        self.assertEqual(evaluate(parse('(2+3)*4'), []), 20.0)
        self.assertEqual(evaluate(parse('-x1^2'), [3.0]), -9.0)
        self.assertEqual(evaluate(parse('2^3^2'), []), 512.0)

        for source, point in (('log(x1)', [0.0]), ('1/x1', [0.0]), ('sqrt(x1)', [-1.0]),
                              ('exp(x1)', [1000.0])):
            with self.assertRaises(DomainError):
                evaluate(parse(source), point)

        print("   Precedence: 2+3*4 = 14, -x1^2 at 3 = -9, 2^3^2 = 512")

    # Test 4: Batch evaluation and serialization
    def test_04_batch_and_serialize(self):
        """Test batch evaluation error rows and round-trip serialization"""
        print("\n4. Testing batch evaluation...")

        f = parse('log(x1) + 1/x2')
        values = evaluate_batch(f, [[1.0, 1.0], [math.e, 2.0]])
        np.testing.assert_allclose(values, [1.0, 1.5])

        with self.assertRaises(DomainError) as caught:
            evaluate_batch(f, [[1.0, 1.0], [2.0, 0.0], [-1.0, 1.0]], index_offset=100)
        self.assertEqual(caught.exception.index, 101)
        self.assertEqual(caught.exception.reason, 'division by zero')
        self.assertEqual(caught.exception.point, (2.0, 0.0))

        for source in ('x1^2', '-x1^2 + sin(x2)*3.5e-3', '2^x1^x2', '(x1 - x2) / (1 + x1*x1)'):
            expression = parse(source)
            self.assertEqual(parse(serialize(expression)), expression)

        self.assertEqual(serialize(parse('x1 - x2 + x3')), '(x1 - x2 + x3)')
        self.assertEqual(serialize(parse('x1 - (x2 + x3)')), '(x1 - (x2 + x3))')
        self.assertEqual(serialize(parse('x1 * x2 / x3 + 1')), '((x1 * x2 / x3) + 1.0)')

        print(f"   Lowest failing row reported: {caught.exception.index}")

    # Test 5: Gradient
    def test_05_gradient(self):
        """Test exact gradients"""
        print("\n5. Testing gradients...")

        np.testing.assert_array_equal(gradient(parse('x1^2'), [3.0]), [6.0])
        np.testing.assert_array_equal(gradient(parse('x1*x2'), [2.0, 5.0]), [5.0, 2.0])
        np.testing.assert_array_equal(gradient(parse('sin(x1)'), [0.0]), [1.0])
        np.testing.assert_array_equal(gradient(parse('3 + 4'), [1.0, 2.0]), [0.0, 0.0])

        with self.assertRaises(DomainError):
            gradient(parse('log(x1)'), [-1.0])

        print("   d(x1*x2) at (2, 5) = (5, 2)")

    # Test 6: Hessian
    def test_06_hessian(self):
        """Test exact Hessians and their symmetry"""
        print("\n6. Testing Hessians...")

        np.testing.assert_array_equal(hessian(parse('x1*x2'), [0.3, -7.0]), [[0.0, 1.0], [1.0, 0.0]])
        np.testing.assert_array_equal(hessian(parse('x1^2*x2 + sin(x1)'), [0.0, 0.0]), np.zeros((2, 2)))
        np.testing.assert_array_equal(hessian(parse('exp(x1)'), [0.0]), [[1.0]])
        np.testing.assert_array_equal(hessian(parse('7.5'), [1.0, 2.0, 3.0]), np.zeros((3, 3)))

        H = hessian(parse('exp(x1*x2) + x3^3*x1 + tanh(x2 - x3)'), [0.2, -0.4, 0.7])
        self.assertTrue(np.array_equal(H, H.T))

        result = derivatives(parse('x1^2 + x1*x2'), [1.0, 2.0])
        self.assertEqual(result.value, 3.0)
        np.testing.assert_array_equal(result.gradient, [4.0, 1.0])
        np.testing.assert_array_equal(result.hessian, [[2.0, 1.0], [1.0, 0.0]])
        self.assertFalse(result.hessian.flags.writeable)

        print(f"   Hessian of x1*x2: {hessian(parse('x1*x2'), [0.0, 0.0]).tolist()}")

    # Test 7: Finite-difference check
    def test_07_fd_check(self):
        """Test the finite-difference cross-check"""
        print("\n7. Testing fd_check...")

        quadratic = fd_check(parse('x1^2'), [1.0], 1e-4)
        self.assertLessEqual(quadratic.gradient_discrepancy, 1e-9)

        exponential = fd_check(parse('exp(x1)'), [0.0], 1e-4)
        self.assertLessEqual(exponential.gradient_discrepancy, 1e-6)
        self.assertLessEqual(exponential.hessian_discrepancy, 1e-6)
        self.assertTrue(exponential.within(1e-6))

        with self.assertRaises(DomainError):
            fd_check(parse('log(x1)'), [1e-5], 1e-4)

        print(f"   exp(x1) discrepancies: {exponential.gradient_discrepancy:.2e}, "
              f"{exponential.hessian_discrepancy:.2e}")

    # Test 8: Model validation
    def test_08_validate(self):
        """Test stochastic model validation"""
        print("\n8. Testing model validation...")

        model = validate([0.0], [[1.0]], 'gaussian')
        self.assertEqual(model.dimension, 1)
        self.assertEqual(model.family, Family.GAUSSIAN)
        self.assertFalse(model.symmetrized)

        with self.assertRaises(NotPSDError) as caught:
            validate([0.0, 0.0], [[1.0, 2.0], [2.0, 1.0]], 'gaussian')
        self.assertAlmostEqual(caught.exception.min_eigenvalue, -1.0, places=12)

        with self.assertRaises(FamilyConstraintError):
            validate([0.0, 0.0], [[1.0, 0.5], [0.5, 2.0]], 'symmetric-two-point')

        with self.assertRaises(NotSymmetricError):
            validate([0.0, 0.0], [[1.0, 0.5], [0.6, 2.0]])

        with self.assertRaises(ConfigError):
            validate([0.0], [[1.0]], 'cauchy')

        nudged = validate([0.0, 0.0], [[1.0, 0.5], [0.5 + 1e-14, 2.0]])
        self.assertTrue(nudged.symmetrized)
        self.assertTrue(np.array_equal(nudged.covariance, nudged.covariance.T))

        # a zero variance makes the coordinate deterministic
        degenerate = validate([1.0, 2.0], [[0.0, 0.0], [0.0, 1.0]], 'uniform')
        self.assertTrue(np.all(sample(degenerate, 100, 5).points[:, 0] == 1.0))

        print(f"   NotPSD smallest eigenvalue: {caught.exception.min_eigenvalue:.3f}")

    # Test 9: Cholesky factor
    def test_09_cholesky(self):
        """Test semidefinite Cholesky factors"""
        print("\n9. Testing Cholesky factor...")

        np.testing.assert_array_equal(cholesky_factor(validate([0.0], [[4.0]])), [[2.0]])

        L = cholesky_factor(validate([0.0, 0.0], [[1.0, 0.5], [0.5, 2.0]]))
        np.testing.assert_allclose(L, [[1.0, 0.0], [0.5, math.sqrt(1.75)]], rtol=0, atol=1e-15)

        rank_one = cholesky_factor(validate([0.0, 0.0], [[1.0, 1.0], [1.0, 1.0]]))
        np.testing.assert_array_equal(rank_one, [[1.0, 0.0], [1.0, 0.0]])

        B = np.array([[2.0, 0.3, 0.1], [0.3, 1.0, -0.2], [0.1, -0.2, 0.5]])
        L = cholesky_factor(validate(np.zeros(3), B))
        np.testing.assert_allclose(L @ L.T, B, rtol=0, atol=1e-10)

        # tiny positive pivot: strongly correlated, still positive definite
        tiny = np.array([[5e-11, 6e-6], [6e-6, 1.0]])
        L = cholesky_factor(validate([0.0, 0.0], tiny))
        self.assertGreater(L[0, 0], 0.0)
        np.testing.assert_allclose(L @ L.T, tiny, rtol=0, atol=1e-10)
        np.testing.assert_allclose(L[1, 0], 6e-6 / math.sqrt(5e-11), rtol=1e-12)

        # clamped negative pivot with a column that does not vanish
        with self.assertRaises(NotPSDError):
            validate([0.0, 0.0, 0.0], [[1.0, 1.0, 0.0], [1.0, 1.0, 1e-6], [0.0, 1e-6, 1.0]])

        print(f"   L for the tiny-pivot covariance: {L.tolist()}")

    # Test 10: Sampling
    def test_10_sample(self):
        """Test sampling families and determinism"""
        print("\n10. Testing sampler...")

        two_point = sample(validate([0.0], [[1.0]], 'symmetric-two-point'), 10000, 42)
        self.assertTrue(np.all(np.isin(two_point.points, [-1.0, 1.0])))

        rank_one = sample(validate([0.0, 0.0], [[1.0, 1.0], [1.0, 1.0]]), 10000, 42)
        self.assertTrue(np.all(np.abs(rank_one.points[:, 0] - rank_one.points[:, 1]) <= 1e-12))

        uniform = sample(validate([1.0], [[4.0]], 'uniform'), 10000, 42)
        self.assertTrue(np.all(np.abs(uniform.points - 1.0) <= 2.0 * math.sqrt(3.0)))

        model = validate([0.5, -1.0], [[1.0, 0.2], [0.2, 0.5]])
        count = 3 * CHUNK_SIZE + 17
        first = sample(model, count, 9, workers=1)
        again = sample(model, count, 9, workers=4)
        self.assertTrue(np.array_equal(first.points, again.points))
        self.assertEqual(first.count, count)
        self.assertFalse(np.array_equal(first.points, sample(model, count, 10).points))

        with self.assertRaises(ConfigError):
            sample(model, 0, 1)
        with self.assertRaises(ConfigError):
            sample(model, 10, -1)

        print(f"   {count} points identical across 1 and 4 workers")

    # Test 11: First-order mean
    def test_11_first_order_mean(self):
        """Test first-order Taylor estimates"""
        print("\n11. Testing first-order mean...")

        estimate = first_order_mean(parse('exp(x1)'), validate([0.0], [[0.3]]))
        self.assertEqual(estimate.value, 1.0)
        self.assertEqual(estimate.correction_term, 0.0)
        self.assertEqual(estimate.order, 1)

        self.assertEqual(first_order_mean(parse('3*x1 + 2'), validate([5.0], [[9.0]])).value, 17.0)
        self.assertEqual(first_order_mean(parse('x1^2'), validate([0.0], [[1.0]])).value, 0.0)

        print(f"   exp(x1) at mean 0: {estimate.value}")

    # Test 12: Second-order mean
    def test_12_second_order_mean(self):
        """Test second-order Taylor estimates"""
        print("\n12. Testing second-order mean...")

        estimate = second_order_mean(parse('exp(x1)'), validate([0.0], [[0.1]]))
        self.assertEqual(estimate.value, 1.05)
        self.assertEqual(estimate.constant_term, 1.0)
        self.assertEqual(estimate.correction_term, 0.05)
        self.assertEqual(estimate.value, estimate.constant_term + estimate.correction_term)

        quadratic = second_order_mean(
            parse('x1^2 + x1*x2 + 2*x2^2'), validate([0.0, 0.0], [[1.0, 0.5], [0.5, 2.0]])
        )
        self.assertEqual(quadratic.value, 5.5)

        cosine = second_order_mean(parse('cos(x1) - 1'), validate([0.0], [[0.1]]))
        self.assertEqual(cosine.value, -0.05)

        # scaling the covariance by a power of two scales the correction exactly
        scaled = second_order_mean(parse('exp(x1)'), validate([0.0], [[0.4]]))
        self.assertEqual(scaled.correction_term, 4 * estimate.correction_term)
        self.assertEqual(scaled.constant_term, estimate.constant_term)

        print(f"   exp(x1), sigma^2 = 0.1: {estimate.constant_term} + {estimate.correction_term}")

    # Test 13: Observable and trace form
    def test_13_observable_and_trace_form(self):
        """Test A = f''(0)/2 and Tr(B A)"""
        print("\n13. Testing observables...")

        np.testing.assert_array_equal(hessian_to_observable(parse('x1^2'), 1).matrix, [[1.0]])
        np.testing.assert_array_equal(
            hessian_to_observable(parse('x1*x2'), 2).matrix, [[0.0, 0.5], [0.5, 0.0]]
        )
        np.testing.assert_array_equal(hessian_to_observable(parse('sin(x1)'), 1).matrix, [[0.0]])

        self.assertEqual(trace_form(np.eye(2), Observable.identity(2)), 2.0)
        M = np.array([[1.0, 0.5], [0.5, 2.0]])
        self.assertEqual(trace_form(M, Observable(M)), 5.5)
        self.assertEqual(trace_form(np.array([[3.0, -1.0], [2.0, 7.0]]), Observable(np.zeros((2, 2)))), 0.0)

        with self.assertRaises(DimensionMismatchError):
            trace_form(np.eye(2), Observable.identity(3))
        with self.assertRaises(ValueError):
            Observable(np.array([[0.0, 1.0], [2.0, 0.0]]))

        print("   Tr(I2 I2) = 2, Tr(B B) = 5.5")

    # Test 14: Symmetric trace mean
    def test_14_symmetric_trace_mean(self):
        """Test the trace rule and its preconditions"""
        print("\n14. Testing symmetric trace mean...")

        for alpha in (0.0, 0.01, 0.7, 3.0):
            self.assertEqual(symmetric_trace_mean(parse('x1^2'), validate([0.0], [[alpha]])), alpha)

        self.assertEqual(symmetric_trace_mean(parse('sin(x1)'), validate([0.0], [[0.25]])), 0.0)

        with self.assertRaises(PreconditionViolation) as caught:
            symmetric_trace_mean(parse('exp(x1)'), validate([0.0], [[0.1]]))
        self.assertEqual(caught.exception.conditions, ['f(0) = 0'])

        with self.assertRaises(PreconditionViolation) as caught:
            symmetric_trace_mean(parse('exp(x1)'), validate([0.5], [[0.1]]))
        self.assertEqual(caught.exception.conditions, ['m_x = 0', 'f(0) = 0'])

        model = validate([0.0, 0.0], [[1.0, 0.5], [0.5, 2.0]])
        f = parse('x1^2 + 3*x1*x2 - sin(x2)*x2')
        self.assertEqual(symmetric_trace_mean(f, model), second_order_mean(f, model).value)

        print(f"   Failed conditions reported: {caught.exception.conditions}")

    # Test 15: Linearization check
    def test_15_linearization_check(self):
        """Test the linearization adequacy report"""
        print("\n15. Testing linearization check...")

        report = linearization_check(parse('exp(x1)'), validate([0.0], [[0.1]]))
        self.assertAlmostEqual(report.relative_correction, 0.05, places=15)
        self.assertFalse(report.linear_adequate)

        linear = linearization_check(parse('3*x1 + 2'), validate([1.0], [[4.0]]))
        self.assertEqual(linear.relative_correction, 0.0)
        self.assertTrue(linear.linear_adequate)

        print(f"   exp(x1) relative correction: {report.relative_correction}")

    # Test 16: Monte Carlo mean
    def test_16_estimate_mean(self):
        """Test the Monte Carlo oracle"""
        print("\n16. Testing Monte Carlo mean...")

        estimate = estimate_mean(parse('x1'), validate([0.0], [[1.0]]), 1000000, 123)
        self.assertLessEqual(abs(estimate.mean), 0.004)
        self.assertAlmostEqual(estimate.std_error, 0.001, delta=1e-5)

        exact = estimate_mean(parse('x1^2'), validate([0.0], [[1.0]], 'symmetric-two-point'), 5000, 7)
        self.assertEqual(exact.mean, 1.0)
        self.assertEqual(exact.std_error, 0.0)

        model = validate([0.0], [[1.0]])
        with self.assertRaises(DomainError) as caught:
            estimate_mean(parse('log(x1)'), model, 100, 5)
        points = sample(model, 100, 5).points
        first = int(np.flatnonzero(points[:, 0] <= 0.0)[0])
        self.assertEqual(caught.exception.index, first)
        self.assertEqual(caught.exception.point, tuple(points[first]))

        print(f"   E[x1] = {estimate.mean:.5f} +- {estimate.std_error:.5f}")
        print(f"   log(x1) failed at sample {caught.exception.index}")

    # Test 17: Oracle determinism
    def test_17_oracle_determinism(self):
        """Test worker-count independence and chunk-merge identity"""
        print("\n17. Testing oracle determinism...")

        f = parse('exp(x1) * cos(x2)')
        model = validate([0.1, -0.2], [[0.5, 0.1], [0.1, 0.3]])
        count = 4 * CHUNK_SIZE + 999

        results = [estimate_mean(f, model, count, 31, workers=w) for w in (1, 2, 8)]
        self.assertEqual(results[0], results[1])
        self.assertEqual(results[0], results[2])

        chunks = [chunk_moments(f, model, 31, k, size, offset) for k, offset, size in chunk_layout(count)]
        merged = reduce(MomentAccumulator.merge, chunks, MomentAccumulator())
        self.assertEqual(merged.mean, results[0].mean)
        self.assertEqual(merged.std_error, results[0].std_error)

        # a short last chunk still reports global indices from chunk_index * CHUNK_SIZE
        last_index, last_offset, last_size = chunk_layout(count)[-1]
        self.assertEqual(last_size, 999)
        never_defined = parse('sqrt(-1 - x1^2)')
        with self.assertRaises(DomainError) as caught:
            chunk_moments(never_defined, model, 31, last_index, last_size)
        self.assertEqual(caught.exception.index, last_offset)
        self.assertEqual(caught.exception.index, 4 * CHUNK_SIZE)

        print(f"   Mean {results[0].mean!r} identical for 1, 2 and 8 workers")

    # Test 18: Empirical covariance
    def test_18_empirical_covariance(self):
        """Test sample mean and covariance"""
        print("\n18. Testing empirical covariance...")

        same = SampleBatch(points=np.full((50, 2), 0.3), seed=0, count=50)
        mean, covariance = empirical_covariance(same)
        np.testing.assert_array_equal(covariance, np.zeros((2, 2)))

        pair = SampleBatch(points=np.array([[0.0], [2.0]]), seed=0, count=2)
        mean, covariance = empirical_covariance(pair)
        np.testing.assert_array_equal(mean, [1.0])
        np.testing.assert_array_equal(covariance, [[2.0]])

        with self.assertRaises(InsufficientSamplesError):
            empirical_covariance(SampleBatch(points=np.zeros((1, 1)), seed=0, count=1))

        B = np.array([[1.0, 0.5], [0.5, 2.0]])
        batch = sample(validate([0.0, 0.0], B), 1000000, 77)
        mean, covariance = empirical_covariance(batch)
        self.assertTrue(np.array_equal(covariance, covariance.T))
        centred = batch.points - mean
        for i in range(2):
            for j in range(2):
                products = centred[:, i] * centred[:, j]
                se = products.std() / math.sqrt(batch.count)
                self.assertLessEqual(abs(covariance[i, j] - B[i, j]), 5 * se)

        print(f"   Covariance of 10^6 gaussian samples: {covariance.round(4).tolist()}")

    # Test 19: Density analog
    def test_19_density_analog(self):
        """Test density analog validation and the quantum average"""
        print("\n19. Testing density analog...")

        half = DensityAnalog.from_matrix(np.eye(2) / 2)
        self.assertEqual(quantum_average(half, Observable.identity(2)), 1.0)

        diagonal = DensityAnalog.from_matrix([[0.25, 0.0], [0.0, 0.75]])
        self.assertEqual(quantum_average(diagonal, Observable(np.diag([1.0, -1.0]))), -0.5)

        mixed = DensityAnalog.from_matrix([[0.3, 0.1], [0.1, 0.7]])
        self.assertAlmostEqual(quantum_average(mixed, Observable(2.5 * np.eye(2))), 2.5, places=12)

        with self.assertRaises(DensityError):
            DensityAnalog.from_matrix([[2.0]])
        with self.assertRaises(NotPSDError):
            DensityAnalog.from_matrix([[0.5, 0.6], [0.6, 0.5]])

        model = make_alpha_model(DensityAnalog.from_matrix([[1.0]]), 0.01)
        np.testing.assert_array_equal(model.covariance, [[0.01]])
        np.testing.assert_array_equal(model.mean, [0.0])
        np.testing.assert_array_equal(make_alpha_model(half, 0.1).covariance, [[0.05, 0.0], [0.0, 0.05]])

        with self.assertRaises(FamilyConstraintError):
            make_alpha_model(mixed, 0.1, 'symmetric-two-point')
        with self.assertRaises(PreconditionViolation):
            make_alpha_model(half, 0.0)

        print("   Tr(rho I) = 1, Tr(diag(.25, .75) diag(1, -1)) = -0.5")

    # Test 20: Convergence scan
    def test_20_convergence_scan(self):
        """Test the alpha scan and its fits"""
        print("\n20. Testing convergence scan...")

        rho = DensityAnalog.from_matrix([[1.0]])

        # two-point samples make f constant over the stream: rescaled = 1 + alpha exactly
        rows = convergence_scan(parse('x1^2 + x1^4'), rho, count=10, seed=3,
                                family=Family.SYMMETRIC_TWO_POINT)
        self.assertEqual(len(rows), 5)
        for row in rows:
            self.assertEqual(row.quantum_value, 1.0)
            self.assertAlmostEqual(row.rescaled, 1.0 + row.alpha, places=12)
            self.assertEqual(row.gap, abs(row.rescaled - row.quantum_value))
            self.assertEqual(row.count, row_count(10, row.alpha, 10 ** 8))
        gap_fit = fit_gap_slope(rows)
        self.assertTrue(gap_fit.significant)
        self.assertAlmostEqual(gap_fit.slope, 1.0, places=6)
        line = fit_rescaled_line(rows)
        self.assertAlmostEqual(line.slope, 1.0, places=6)
        self.assertAlmostEqual(line.intercept, 1.0, places=9)

        noisy = convergence_scan(parse('x1^2'), rho, count=2000, seed=8, max_row_count=200000)
        self.assertFalse(fit_gap_slope(noisy).significant)
        self.assertEqual(max(row.count for row in noisy), 200000)

        with self.assertRaises(PreconditionViolation):
            convergence_scan(parse('exp(x1)'), rho, count=10)

        print(f"   Gap slope (two-point x^2 + x^4): {gap_fit.slope:.6f}")

    # Test 21: Method comparison
    def test_21_method_comparison(self):
        """Test pairwise method comparison"""
        print("\n21. Testing method comparison...")

        comparator = MethodComparator(reference='mc')
        result = comparator.compare_methods({
            'mc': {'value': 1.0512, 'std_error': 0.0003},
            'taylor1': {'value': 1.0},
            'taylor2': {'value': 1.05},
        })

        self.assertEqual([(d['from'], d['to']) for d in result['deltas']],
                         [('taylor1', 'taylor2'), ('taylor1', 'mc'), ('taylor2', 'mc')])
        self.assertAlmostEqual(result['deltas'][0]['delta'], 0.05, places=15)
        self.assertEqual(result['closest_to_reference'], 'taylor2')
        self.assertAlmostEqual(result['comparison_metrics']['spread'], 0.0512, places=12)
        self.assertAlmostEqual(
            result['comparison_metrics']['standard_errors_from_reference']['taylor2'], 4.0, places=6
        )

        no_reference = comparator.compare_methods({'taylor1': {'value': 0.0}, 'trace': {'value': 1.0}})
        self.assertIsNone(no_reference['closest_to_reference'])
        self.assertIsNone(no_reference['reference'])

        print(f"   Closest to MC: {result['closest_to_reference']}")

    # Test 22: Run storage
    def test_22_run_store(self):
        """Test recording and reading back runs"""
        print("\n22. Testing run store...")

        config = JobConfig(expression='exp(x1)', mean=[0.0], covariance=[[0.1]],
                           methods=('taylor1', 'taylor2', 'mc'), mc_count=20000, seed=3)
        report = run_estimate(config)

        store = RunStore(self.db_path)
        run_id = store.store_estimate(report)
        self.assertIsNotNone(run_id)

        run = store.get_run(run_id)
        self.assertEqual(run['kind'], 'estimate')
        self.assertEqual(run['seed'], '3')
        self.assertEqual(run['report'], report)

        history = store.get_run_history(limit=5)
        self.assertGreaterEqual(len(history), 1)
        self.assertEqual(history[0]['id'], run_id)

        self.assertEqual(store.get_method_win_rate('taylor2'), 100.0)
        self.assertEqual(store.get_method_win_rate('trace'), 0.0)

        # a failing insert rolls back and still closes its connection
        opened = []

        def tracking_connection(path):
            conn = get_connection(path)
            opened.append(conn)
            return conn

        broken = dict(report, methods={'taylor1': {'order': 1}})
        with patch('storage.run_store.get_connection', side_effect=tracking_connection):
            with self.assertRaises(KeyError):
                store.store_estimate(broken)
        self.assertEqual(len(opened), 1)
        with self.assertRaises(sqlite3.ProgrammingError):
            opened[0].execute('SELECT 1')
        self.assertEqual(store.get_run_history(limit=1)[0]['id'], run_id)

        print(f"   Run stored: ID {run_id}, history records: {len(history)}")

    # Test 23: Job configuration
    def test_23_job_config(self):
        """Test job file validation"""
        print("\n23. Testing job configuration...")

        config = parse_config(dict(WORKED_EXAMPLE, methods=['mc', 'taylor1']), 'estimate')
        self.assertEqual(config.methods, ('taylor1', 'mc'))
        self.assertEqual(config.with_overrides(seed=5).seed, 5)

        for broken in (
            dict(WORKED_EXAMPLE, methods=[]),
            dict(WORKED_EXAMPLE, methods=['taylor3']),
            dict(WORKED_EXAMPLE, covariance=[[0.1, 0.0]]),
            dict(WORKED_EXAMPLE, seed=-1),
            dict(WORKED_EXAMPLE, seed=2 ** 64),
            dict(WORKED_EXAMPLE, mc_count=0),
            {k: v for k, v in WORKED_EXAMPLE.items() if k != 'mean'},
        ):
            with self.assertRaises(ConfigError):
                parse_config(broken, 'estimate')

        with self.assertRaises(ConfigError):
            parse_config({'expression': 'x1^2', 'bridge': {}}, 'bridge')

        bridge = parse_config({'expression': 'x1^2', 'bridge': {'rho': [[1.0]]}}, 'bridge')
        self.assertEqual(len(bridge.bridge.alphas), 5)

        print(f"   Methods normalised to {config.methods}")

    # Test 24: CLI worked example
    def test_24_cli_worked_example(self):
        """Test the worked example end to end"""
        print("\n24. Testing CLI worked example...")

        configs = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'configs')
        with open(os.path.join(configs, 'worked_example.expected.json'), encoding='utf-8') as handle:
            golden = json.load(handle)
        code, checked_in, _ = self.run_cli(
            'estimate', '--config', os.path.join(configs, 'worked_example.json'), '--format', 'json'
        )
        self.assertEqual(code, 0)
        checked_in = json.loads(checked_in)
        for field in ('command', 'expression', 'arity', 'family', 'mean', 'covariance',
                      'seed', 'mc_count', 'linearization'):
            self.assertEqual(checked_in[field], golden[field], field)
        for method in ('taylor1', 'taylor2'):
            self.assertEqual(checked_in['methods'][method], golden['methods'][method], method)
        mc = checked_in['methods']['mc']
        self.assertLessEqual(abs(mc['value'] - golden['mc']['reference']),
                             golden['mc']['max_standard_errors'] * mc['std_error'])

        path = self.write_job('worked.json', WORKED_EXAMPLE)
        code, first, _ = self.run_cli('estimate', '--config', path, '--format', 'json')
        self.assertEqual(code, 0)
        report = json.loads(first)

        methods = report['methods']
        self.assertEqual(methods['taylor1']['value'], 1.0)
        self.assertEqual(methods['taylor2']['value'], 1.05)
        self.assertEqual(methods['taylor2']['constant_term'], 1.0)
        self.assertEqual(methods['taylor2']['correction_term'], 0.05)
        mc = methods['mc']
        self.assertLessEqual(abs(mc['value'] - math.exp(0.05)), 4 * mc['std_error'])
        self.assertEqual(report['comparison']['closest_to_reference'], 'taylor2')

        code, again, _ = self.run_cli('estimate', '--config', path, '--format', 'json')
        self.assertEqual(again, first)

        code, text, _ = self.run_cli('estimate', '--config', path, '--format', 'text')
        self.assertEqual(code, 0)
        sections = _text_sections(text)
        for method, result in methods.items():
            for name, value in result.items():
                self.assertEqual(float(sections[method][name]), value)
        for name in ('relative_correction', 'threshold'):
            self.assertEqual(float(sections['linearization'][name]), report['linearization'][name])

        code, override, _ = self.run_cli('estimate', '--config', path, '--format', 'json',
                                         '--seed', '99', '--mc-count', '5000', '--workers', '2')
        override = json.loads(override)
        self.assertEqual(override['seed'], 99)
        self.assertEqual(override['methods']['mc']['count'], 5000)
        self.assertEqual(override['methods']['taylor2'], methods['taylor2'])

        print(f"   taylor2 = {methods['taylor2']['value']}, mc = {mc['value']:.7f} +- {mc['std_error']:.7f}")

    # Test 25: CLI exit codes
    def test_25_cli_exit_codes(self):
        """Test error categories and exit statuses"""
        print("\n25. Testing CLI exit codes...")

        cases = [
            ('trace.json', dict(WORKED_EXAMPLE, expression='x1^2', mean=[0.5], methods=['trace']),
             4, 'precondition'),
            ('syntax.json', dict(WORKED_EXAMPLE, expression='x1 + * 2'), 2, 'parse'),
            ('domain.json', dict(WORKED_EXAMPLE, expression='log(x1)', methods=['mc'], mc_count=1000),
             3, 'domain'),
            ('psd.json', dict(WORKED_EXAMPLE, expression='x1 + x2', mean=[0.0, 0.0],
                              covariance=[[1.0, 2.0], [2.0, 1.0]]), 2, 'config'),
        ]
        for name, job, expected, category in cases:
            code, stdout, stderr = self.run_cli('estimate', '--config', self.write_job(name, job))
            self.assertEqual(code, expected, name)
            self.assertEqual(stdout, '')
            self.assertTrue(stderr.strip().splitlines()[-1].startswith(f"{category}: "), stderr)
            print(f"   {name}: exit {code} ({category})")

        code, _, _ = self.run_cli('estimate', '--config', os.path.join(self.workdir, 'missing.json'))
        self.assertEqual(code, 2)

        no_rho = self.write_job('no_rho.json', {'expression': 'x1^2', 'bridge': {}})
        code, _, stderr = self.run_cli('bridge', '--config', no_rho)
        self.assertEqual(code, 2)
        self.assertIn('rho', stderr)

    # Test 26: CLI bridge
    def test_26_cli_bridge(self):
        """Test the bridge command and optional storage"""
        print("\n26. Testing CLI bridge...")

        job = {
            'expression': 'x1^2 + x1^4',
            'family': 'symmetric-two-point',
            'mc_count': 10,
            'seed': 4,
            'bridge': {'rho': [[1.0]]},
        }
        path = self.write_job('bridge.json', job)
        with patch.dict(os.environ, {'MOMENTS_DB_PATH': self.db_path}):
            code, stdout, _ = self.run_cli('bridge', '--config', path, '--format', 'json')
        self.assertEqual(code, 0)
        report = json.loads(stdout)
        self.assertEqual(len(report['rows']), 5)
        self.assertEqual(report['quantum_value'], 1.0)
        self.assertAlmostEqual(report['gap_fit']['slope'], 1.0, places=6)

        code, text, _ = self.run_cli('bridge', '--config', path)
        self.assertEqual(code, 0)
        self.assertIn('[rows]', text)
        self.assertEqual(float(_text_sections(text)['gap_fit']['slope']), report['gap_fit']['slope'])

        history = RunStore(self.db_path).get_run_history(limit=1)
        self.assertEqual(history[0]['kind'], 'bridge')

        bad_origin = self.write_job('bridge_exp.json', dict(job, expression='exp(x1)'))
        code, _, _ = self.run_cli('bridge', '--config', bad_origin)
        self.assertEqual(code, 4)

        print(f"   Gap slope: {report['gap_fit']['slope']:.6f}")

    # Test 27: Long expressions
    def test_27_long_expressions(self):
        """Test sums far longer than the interpreter recursion limit"""
        print("\n27. Testing long expressions...")

        terms = 5000
        f = parse(' + '.join(['x1'] * terms))
        self.assertEqual(f.variables, (1,))
        self.assertEqual(evaluate(f, [0.5]), 2500.0)
        np.testing.assert_array_equal(gradient(f, [2.0]), [5000.0])
        np.testing.assert_array_equal(hessian(f, [2.0]), [[0.0]])

        canonical = serialize(f)
        self.assertTrue(canonical.startswith('(x1 + x1 + x1'))
        again = parse(canonical)
        self.assertEqual(again, f)
        self.assertEqual(hash(again), hash(f))

        with self.assertRaises(ParseError) as caught:
            parse('(' * 5000 + 'x1' + ')' * 5000)
        self.assertLessEqual(caught.exception.offset, 5000)

        job = dict(WORKED_EXAMPLE, expression=' + '.join(['x1*x1'] * 2000), mc_count=2000)
        code, stdout, _ = self.run_cli('estimate', '--config', self.write_job('long.json', job),
                                       '--format', 'json')
        self.assertEqual(code, 0)
        methods = json.loads(stdout)['methods']
        self.assertEqual(methods['taylor1']['value'], 0.0)
        self.assertAlmostEqual(methods['taylor2']['value'], 200.0, places=9)

        nested = dict(WORKED_EXAMPLE, expression='(' * 3000 + 'x1' + ')' * 3000)
        code, stdout, stderr = self.run_cli('estimate', '--config', self.write_job('nested.json', nested))
        self.assertEqual(code, 2)
        self.assertEqual(stdout, '')
        self.assertTrue(stderr.strip().splitlines()[-1].startswith('parse: '), stderr)

        print(f"   {terms}-term sum serialized to {len(canonical)} characters")

    # Test 28: Quadratic form in many variables
    def test_28_large_quadratic_form(self):
        """Test second-order mean of a full quadratic form in 40 variables"""
        print("\n28. Testing 40-variable quadratic form...")

        n = 40
        A = np.array([[((i * j) % 7 + 1) / 4.0 for j in range(1, n + 1)] for i in range(1, n + 1)])
        source = ' + '.join(
            f"{float(A[i, j])!r}*x{i + 1}*x{j + 1}" for i in range(n) for j in range(n)
        )
        B = 0.5 * np.eye(n) + 0.01 * np.ones((n, n))

        f = parse(source)
        self.assertEqual(f.arity, n)

        estimate = second_order_mean(f, validate(np.zeros(n), B))
        self.assertEqual(estimate.constant_term, 0.0)
        # exact for quadratics: the Hessian is 2A
        self.assertEqual(estimate.value, trace_form(B, Observable(A)))
        self.assertAlmostEqual(estimate.value, float(np.sum(B * A)), places=9)

        print(f"   E[x^T A x] = {estimate.value!r}")


def run_tests():
    """Run all tests with detailed output"""
    print("=" * 60)
    print("MOMENT PROPAGATION ENGINE - UNIT TEST SUITE")
    print("=" * 60)

    # Create test suite
    test_suite = unittest.TestLoader().loadTestsFromTestCase(MomentEngineTestCase)

    # Run tests with detailed output
    runner = unittest.TextTestRunner(verbosity=2)
    result = runner.run(test_suite)

    # Print summary
    print("\n" + "=" * 60)
    print("TEST SUMMARY")
    print("=" * 60)
    print(f"Tests run: {result.testsRun}")
    print(f"Successes: {result.testsRun - len(result.failures) - len(result.errors) - len(result.skipped)}")
    print(f"Failures: {len(result.failures)}")
    print(f"Errors: {len(result.errors)}")
    print(f"Skipped: {len(result.skipped)}")

    if result.testsRun > 0:
        success_rate = ((result.testsRun - len(result.failures) - len(result.errors)) / result.testsRun * 100)
        print(f"Success rate: {success_rate:.1f}%")

    if result.failures:
        print("\nFAILURES:")
        for test, traceback in result.failures:
            print(f"  - {test}")

    if result.errors:
        print("\nERRORS:")
        for test, traceback in result.errors:
            print(f"  - {test}")

    if not result.failures and not result.errors:
        print("\nALL TESTS PASSED!")

    print("=" * 60)

    return result.wasSuccessful()


if __name__ == "__main__":
    print("Moment Propagation Engine - Unit Test Suite")
    print("=" * 60)
    print("\nYou can run tests with:")
    print("  - unittest: python tests.py")
    print("  - pytest: pytest tests.py")
    print("  - properties and acceptance: pytest test_properties.py -m 'not slow'")
    print("=" * 60)

    try:
        success = run_tests()
        exit(0 if success else 1)
    except KeyboardInterrupt:
        print("\n\nTests interrupted by user")
        exit(1)
