"""
Moment Propagation Engine - Main Demonstration
Walks through parsing, derivatives, Taylor estimators, Monte Carlo and the trace-rule bridge
"""

import os
from dotenv import load_dotenv

from storage.database import init_database
from storage.run_store import RunStore
from expressions.nodes import serialize
from expressions.parser import parse
from expressions.evaluator import evaluate
from autodiff.derivatives import derivatives, fd_check
from stochastic.model import validate, Family
from stochastic.sampler import sample
from taylor.estimators import (
    first_order_mean, second_order_mean, symmetric_trace_mean, linearization_check
)
from oracle.monte_carlo import estimate_mean, empirical_covariance
from bridge.density import DensityAnalog
from bridge.convergence import convergence_scan, fit_gap_slope, fit_rescaled_line
from cli.config import JobConfig, BridgeConfig
from cli.runner import run_estimate, run_bridge

# Load environment variables
load_dotenv()


def print_section(title):
    """Print section header"""
    print("\n" + "=" * 70)
    print(f"  {title}")
    print("=" * 70)


def demo_expressions():
    """Demonstrate parsing and evaluation"""
    print_section("1. Parsing and Evaluation")

    source = "exp(x1) * sin(x2) + x1^2 / 2"
    f = parse(source)

    print(f"\nSource:     {source}")
    print(f"Canonical:  {serialize(f)}")
    print(f"Arity:      {f.arity}")
    print(f"f(0.5, 1):  {evaluate(f, [0.5, 1.0])!r}")


def demo_derivatives():
    """Demonstrate exact gradients and Hessians"""
    print_section("2. Exact Derivatives with Hyper-Dual Numbers")

    f = parse("x1^2 * x2 + sin(x1 * x2)")
    point = [0.3, -1.2]
    d = derivatives(f, point)

    print(f"\nf        = {d.value!r}")
    print(f"gradient = {[float(v) for v in d.gradient]}")
    print(f"hessian  = {[[float(v) for v in row] for row in d.hessian]}")

    report = fd_check(f, point, 1e-4)
    print(f"\nFinite-difference agreement within 1e-5: {report.within(1e-5)}")


def demo_sampling():
    """Demonstrate model validation and reproducible sampling"""
    print_section("3. Stochastic Model and Sampling")

    model = validate([1.0, -1.0], [[1.0, 0.5], [0.5, 2.0]], Family.GAUSSIAN)
    print(f"\nFactor L = {[[float(v) for v in row] for row in model.factor]}")

    batch = sample(model, 100_000, seed=42, workers=2)
    mean, covariance = empirical_covariance(batch)
    print(f"Sample mean       = {[round(float(v), 4) for v in mean]}")
    print(f"Sample covariance = {[[round(float(v), 4) for v in row] for row in covariance]}")


def demo_estimators():
    """Demonstrate the Taylor estimators against Monte Carlo"""
    print_section("4. Taylor Estimators vs Monte Carlo")

    f = parse("exp(x1)")
    model = validate([0.0], [[0.1]])

    first = first_order_mean(f, model)
    second = second_order_mean(f, model)
    mc = estimate_mean(f, model, 1_000_000, seed=20240601)

    print(f"\nf = exp(x1), x1 ~ N(0, 0.1)")
    print(f"   taylor1: {first.value!r}")
    print(f"   taylor2: {second.value!r}")
    print(f"   mc:      {mc.mean!r} +/- {mc.std_error!r}")

    linearization = linearization_check(f, model)
    print(f"\nRelative second-order correction: {linearization.relative_correction:.4f}")
    print(f"Linear approximation adequate:    {linearization.linear_adequate}")

    g = parse("x1^2 + 3*x1*x2 + x2^2")
    centred = validate([0.0, 0.0], [[1.0, 0.5], [0.5, 2.0]])
    print(f"\nTrace rule for x1^2 + 3*x1*x2 + x2^2: {symmetric_trace_mean(g, centred)!r}")
    print(f"Second-order estimate:               {second_order_mean(g, centred).value!r}")


def demo_bridge():
    """Demonstrate the convergence scan"""
    print_section("5. Classical to Trace-Rule Convergence")

    f = parse("x1^2 + x1^4")
    rho = DensityAnalog.from_matrix([[1.0]])

    rows = convergence_scan(
        f, rho, alphas=[0.5, 0.25, 0.125], count=1000, seed=11,
        family=Family.SYMMETRIC_TWO_POINT,
    )

    print(f"\nQuantum value Tr(rho A) = {rows[0].quantum_value!r}")
    print(f"\n{'alpha':>8}  {'rescaled':>12}  {'gap':>12}")
    for row in rows:
        print(f"{row.alpha:>8}  {row.rescaled:>12.6f}  {row.gap:>12.6f}")

    gap_fit = fit_gap_slope(rows)
    rescaled_fit = fit_rescaled_line(rows)
    print(f"\nGap slope (convergence order): {gap_fit.slope:.3f}")
    print(f"Rescaled intercept:            {rescaled_fit.intercept:.3f}")


def demo_run_history(db_path):
    """Demonstrate recording runs and the method win rate"""
    print_section("6. Run History")

    store = RunStore(db_path)

    estimate = run_estimate(JobConfig(
        expression="x1^2 + 3*x1*x2 + x2^2",
        mean=[0.0, 0.0],
        covariance=[[1.0, 0.5], [0.5, 2.0]],
        methods=('taylor2', 'trace', 'mc'),
        mc_count=200_000,
        seed=7,
    ))
    bridge = run_bridge(JobConfig(
        expression="x1^2 + x1^4",
        family=Family.SYMMETRIC_TWO_POINT.value,
        mc_count=1000,
        seed=11,
        bridge=BridgeConfig(rho=[[1.0]], alphas=(0.5, 0.25)),
    ))

    store.store_estimate(estimate)
    store.store_bridge(bridge)

    print(f"\nClosest to mc: {estimate['comparison']['closest_to_reference']}")
    print("\nRecent runs:")
    for run in store.get_run_history(limit=5):
        print(f"   #{run['id']} {run['kind']:<8} {run['expression']}")

    for method in ('taylor2', 'trace'):
        print(f"Win rate {method}: {store.get_method_win_rate(method):.1f}%")


def main():
    """Run all demonstrations"""
    print("\n" + "=" * 70)
    print("  Moment Propagation Engine - Complete Demonstration")
    print("=" * 70)

    try:
        # Clean up old database
        db_path = 'demo.db'
        if os.path.exists(db_path):
            os.remove(db_path)

        init_database(db_path)

        # Run demonstrations
        demo_expressions()
        demo_derivatives()
        demo_sampling()
        demo_estimators()
        demo_bridge()
        demo_run_history(db_path)

        print("\n" + "=" * 70)
        print("  All Demonstrations Completed!")
        print("=" * 70)
        print("\nKey Concepts Demonstrated:")
        print("  1. Expression Parsing - Canonical form and evaluation")
        print("  2. Exact Derivatives - Gradient and Hessian in one pass per pair")
        print("  3. Reproducible Sampling - Seeded counter-based streams")
        print("  4. Taylor Estimators - First order, second order and trace rule")
        print("  5. Convergence Scan - Rescaled classical means vs Tr(rho A)")
        print("  6. Run History - Stored reports and method win rates")
        print("\nTo run the command line:")
        print("  python -m cli estimate --config configs/worked_example.json")
        print("\nTo run tests:")
        print("  python tests.py")
        print()

        # Cleanup
        if os.path.exists(db_path):
            os.remove(db_path)

    except KeyboardInterrupt:
        print("\n\nDemonstration interrupted by user")
    except Exception as e:
        print(f"\nError: {e}")
        import traceback
        traceback.print_exc()


if __name__ == '__main__':
    main()
