#!/usr/bin/env python3
"""
Desk-scale acceptance suite for the dendrite dynamics toolkit
Checks the environment, runs every acceptance item and prints the consolidated report
"""

import argparse
import math
import sys
import time
from pathlib import Path

# Add project root to path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))


def check_requirements():
    """Check if required packages are installed"""
    required_packages = [
        'numpy',
        'pandas',
        'networkx',
        'dotenv'  # python-dotenv imports as 'dotenv'
    ]

    missing_packages = []
    for package in required_packages:
        try:
            __import__(package)
        except ImportError:
            missing_packages.append(package)

    if missing_packages:
        print("❌ Missing required packages:")
        for package in missing_packages:
            pip_name = 'python-dotenv' if package == 'dotenv' else package
            print(f"   - {pip_name}")
        print("\n💡 Install missing packages with:")
        print("   python -m pip install -r requirements.txt")
        return False

    return True


def check_environment():
    """Report configuration issues; the suite still runs with defaults"""
    from config.app_config import config

    if not (project_root / '.env').exists():
        print("⚠️ .env file not found in project root, using defaults")
    issues = config.validate_config()
    for issue in issues:
        print(f"   - {issue}")
    return not issues


def check_inputs():
    """Check if the bundled example inputs exist"""
    model_path = project_root / "src" / "models"
    required_files = [
        "star3.json",
        "star3_rotation.json",
        "star3_branch_structure.json",
        "star3_two_branch_structure.json",
        "tent.json",
    ]
    missing_files = [name for name in required_files if not (model_path / name).exists()]
    if missing_files:
        print("❌ Missing example inputs:")
        for name in missing_files:
            print(f"   - src/models/{name}")
        return False
    return True


class AcceptanceSuite:
    """Runs the acceptance items and collects check records"""

    def __init__(self, seed: int = 0, quick: bool = False):
        import numpy as np

        self.seed = seed
        self.quick = quick
        self.rng = np.random.default_rng(seed)
        self.records = []
        self._table = None

    def table(self, N):
        from src.services.arith import sieve

        if self._table is None or self._table.N < N:
            self._table = sieve(N)
        return self._table

    def add(self, item, checks, started):
        elapsed = time.perf_counter() - started
        passed = all(check["passed"] for check in checks)
        print(f"{'✅' if passed else '❌'} item {item}: {sum(c['passed'] for c in checks)}/{len(checks)} "
              f"checks passed ({elapsed:.1f}s)")
        self.records.append({"command": f"acceptance-{item}", "passed": passed, "checks": checks})

    # 1
    def sieve_correctness(self):
        from src.app.app_controller import make_check
        from src.services.arith import cross_check, sieve

        started = time.perf_counter()
        exhaustive = 10 ** 4 if self.quick else 10 ** 5
        big = 10 ** 5 if self.quick else 10 ** 7
        table = sieve(big)
        mismatches = cross_check(table, range(1, exhaustive + 1))
        sample = self.rng.integers(1, big + 1, size=10 ** 4)
        mismatches += cross_check(table, sample)
        elapsed = time.perf_counter() - started
        self._table = table
        self.add(1, [
            make_check("1.oracle", "mismatches against trial factorization", len(mismatches), 0),
            make_check("1.runtime", "sieve and cross-check seconds", elapsed, 5.0),
        ], started)

    # 2
    def eventually_periodic(self):
        from src.app.app_controller import make_check
        from src.services.arith import ep_average

        started = time.perf_counter()
        N = 10 ** 5 if self.quick else 10 ** 6
        table = self.table(N)
        checks = []
        for p in (1, 2, 3, 5, 7):
            cycle = self.rng.integers(0, 2, size=p).astype(float)
            preperiod = self.rng.integers(0, 2, size=int(self.rng.integers(0, 21))).astype(float)
            series = ep_average(table, preperiod, cycle, N)
            checks.append(make_check(f"2.p{p}", f"|ep_average| at N={N}, period {p}", abs(series.final), 0.01))
        self.add(2, checks, started)

    # 3
    def gap_averages(self):
        from src.app.app_controller import make_check
        from src.services.arith import gap_sequence, holed_average

        started = time.perf_counter()
        N = 10 ** 5
        table = self.table(N)
        checks = []
        for k in (2, 5, 10, 50):
            worst = 0.0
            for trial in range(20):
                a = gap_sequence(N, k, seed=self.seed * 1000 + k * 20 + trial)
                result = holed_average(table, a, k, N, start=1000)
                worst = max(worst, result.sup)
            checks.append(make_check(f"3.k{k}", f"running sup for gap {k}", worst, 1.0 / k + 1e-3))
        self.add(3, checks, started)

    # 4
    def decomposition_invariants(self):
        from src.app.app_controller import make_check
        from src.services.decomposition import CellIndex, coarse_decompose, refine_cell, verify_decomposition
        from src.services.dendrite import random_dendrite

        started = time.perf_counter()
        count = 20 if self.quick else 100
        violations, partition_failures = 0, 0
        for i in range(count):
            X = random_dendrite(int(self.rng.integers(2, 51)), seed=self.seed * 10_000 + i)
            for delta in (0.1, 0.25, 0.5):
                cells = [c for coarse in coarse_decompose(X, delta) for c in refine_cell(X, coarse)]
                report = verify_decomposition(X, cells, delta)
                violations += len(report.violations)
                index = CellIndex(X, cells)
                grid = X.grid(X.total_length() / 1000.0)
                partition_failures += sum(1 for p in grid if abs(index.psi_sum(p) - 1.0) > 1e-12)
        self.add(4, [
            make_check("4.violations", "decomposition violations", violations, 0),
            make_check("4.partition", "partition-of-unity failures on 10^3-point grids", partition_failures, 0),
        ], started)

    # 5
    def core_identities(self):
        from src.app.app_controller import make_check
        from src.services.dendrite import point_key, random_dendrite, random_point

        started = time.perf_counter()
        rounds = 1000 if self.quick else 10 ** 4
        failures = {"idempotence": 0, "hull": 0, "endpoints": 0, "metric": 0}
        X = None
        for i in range(rounds):
            if i % 100 == 0:
                X = random_dendrite(int(self.rng.integers(2, 30)), seed=self.seed * 10_000 + i)
            F = [random_point(X, self.rng) for _ in range(int(self.rng.integers(1, 6)))]
            Y = X.convex_hull(F)
            x = random_point(X, self.rng)
            r = X.first_point_map(Y, x)
            if not X.same_point(X.first_point_map(Y, r), r):
                failures["idempotence"] += 1
            shuffled = [F[j] for j in self.rng.permutation(len(F))]
            ends = sorted(point_key(p) for p in X.endpoints(Y))
            if ends != sorted(point_key(p) for p in X.endpoints(X.convex_hull(shuffled))):
                failures["hull"] += 1
            if not all(any(X.same_point(e, p) for p in F) for e in X.endpoints(Y)):
                failures["endpoints"] += 1
            y, z = random_point(X, self.rng), random_point(X, self.rng)
            dxy, dyz, dxz = X.distance(x, y), X.distance(y, z), X.distance(x, z)
            if dxz > dxy + dyz + 1e-12 or abs(dxy - X.distance(y, x)) > 1e-12 or X.distance(x, x) != 0.0:
                failures["metric"] += 1
        self.add(5, [make_check(f"5.{name}", f"{name} violations", count, 0) for name, count in failures.items()],
                 started)

    # 6
    def entropy(self):
        from src.app.app_controller import make_check
        from src.services.dendrite import Dendrite
        from src.services.dynamics import branch_rotation, entropy_estimate, identity_map, tent_map
        from src.services.gehman import entropy_compare, parse_spec

        started = time.perf_counter()
        n_max = 8 if self.quick else 12
        star = Dendrite(4, [(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0)])
        ident = entropy_estimate(identity_map(star), 0.05, 6).estimate
        rotation = entropy_estimate(branch_rotation(3), 0.05, 6).estimate
        tent = entropy_estimate(tent_map(), 0.01, n_max).estimate
        tm = entropy_compare(parse_spec("thue-morse"), 32 if self.quick else 48).map_estimate.estimate
        self.add(6, [
            make_check("6.identity", "identity estimate", ident, None, ident == 0.0),
            make_check("6.rotation", "branch rotation estimate", rotation, None, rotation == 0.0),
            make_check("6.tent", "|tent estimate - log 2|", abs(tent - math.log(2)), 0.1),
            make_check("6.thue_morse", "Thue-Morse shift map estimate", tm, 0.05),
        ], started)

    # 7
    def conjugacy(self):
        from src.app.app_controller import make_check
        from src.services.gehman import build_gehman, parse_spec, shift_map, verify_conjugacy, word_complexity

        started = time.perf_counter()
        top = 8 if self.quick else 12
        checks = []
        for name in ("full", "thue-morse"):
            spec = parse_spec(name)
            counts = word_complexity(spec, top)
            failed, leaf_mismatch = [], []
            for depth in range(2, top + 1):
                G = build_gehman(spec, depth)
                if not verify_conjugacy(G, shift_map(G)).passed:
                    failed.append(depth)
                leaves = len(G.dendrite.endpoint_vertices()) - 1  # minus the stem base
                if leaves != counts[depth - 1]:
                    leaf_mismatch.append(depth)
            checks.append(make_check(f"7.{name}.conjugacy", f"{name} depths failing conjugacy", len(failed), 0))
            checks.append(make_check(f"7.{name}.leaves", f"{name} depths with leaf count != p(n)",
                                     len(leaf_mismatch), 0))
        self.add(7, checks, started)

    # 8
    def structure_verifier(self):
        from src.app.app_controller import make_check
        from src.services.disjointness import analyze_fixed_point_complement, verify_structure
        from src.services.dynamics import OmegaApprox, omega_limit
        from src.services.gehman import build_gehman, build_odometer, dyadic_structure, odometer_map, parse_spec, shift_map
        from src.services.io_formats import load_map, load_structure

        started = time.perf_counter()
        models = project_root / "src" / "models"
        f = load_map(models / "star3_rotation.json")
        L = omega_limit(f, f.dendrite.point(0, 0.5), 10, 30)
        good = verify_structure(f, load_structure(f.dendrite, models / "star3_branch_structure.json"), L)
        bad = verify_structure(f, load_structure(f.dendrite, models / "star3_two_branch_structure.json"), L)
        checks = [
            make_check("8.rotation", "one-branch structure conditions failed", len(good.failed_conditions), 0),
            make_check("8.negative_control", "two-branch structure fails disjointness", 0, None,
                       not bad.condition_passed(2)),
        ]

        spec = parse_spec("thue-morse")
        depth = 10
        host = build_odometer(depth, spec)
        g = odometer_map(host)
        L = omega_limit(g, host.leaf(0), 1, 2 ** (depth + 1))
        for k in (1, 2):
            report = verify_structure(g, dyadic_structure(spec, host, k), L)
            checks.append(make_check(f"8.dyadic.k{k}", f"odometer dyadic k={k} conditions failed",
                                     len(report.failed_conditions), 0))
        complement = analyze_fixed_point_complement(g, host.point(""), L, 4)
        checks.append(make_check("8.complement", "hub complement slots form a 2-cycle", complement.n_slots, None,
                                 complement.is_n_cycle and complement.n_slots == 2))

        G = build_gehman(spec, 6)
        prefix = verify_structure(shift_map(G), dyadic_structure(spec, G, 1),
                                  OmegaApprox(G.leaves, 0, len(G.leaves), 0.0))
        checks.append(make_check("8.prefix_tree", "prefix-tree hulls share the hub", 0, None,
                                 not prefix.condition_passed(2)))
        self.add(8, checks, started)

    # 9 and 10
    def bound(self):
        from src.app.app_controller import make_check
        from src.services.decomposition import decompose
        from src.services.disjointness import bound_experiment
        from src.services.gehman import build_odometer, dyadic_structure, odometer_map, parse_spec

        started = time.perf_counter()
        N = 10 ** 5 if self.quick else 10 ** 6
        spec = parse_spec("thue-morse")
        host = build_odometer(10, spec)
        f = odometer_map(host)
        S = dyadic_structure(spec, host, 2)
        cells = decompose(f.dendrite, 0.2)
        table = self.table(N)
        checkpoints = [10 ** e for e in range(3, len(str(N)))]
        bound_checks, split_checks = [], []
        for level in (1, 2):
            report = bound_experiment(f, host.leaf(0), cells, S, table, N, level, checkpoints)
            bound_checks += [
                make_check(f"9.L{level}.total", f"level {level} max sum |A_N^j|", report.max_total,
                           report.bound + 0.01),
                make_check(f"9.L{level}.boundary_slots", f"level {level} boundary-type slots",
                           report.max_boundary_slots, 2),
                make_check(f"9.L{level}.periodic", f"level {level} max periodic-type |A_N^j|",
                           report.max_periodic, 0.01),
            ]
            split_checks.append(make_check(f"10.L{level}", f"level {level} splitting identity error",
                                           report.split_error, 1e-10))
        elapsed = time.perf_counter() - started
        bound_checks.append(make_check("9.runtime", "bound experiment seconds", elapsed, 120.0))
        self.add(9, bound_checks, started)
        self.add(10, split_checks, started)

    def run_all(self):
        for step in (self.sieve_correctness, self.eventually_periodic, self.gap_averages,
                     self.decomposition_invariants, self.core_identities, self.entropy, self.conjugacy,
                     self.structure_verifier, self.bound):
            step()
        return self.records


def main(argv=None):
    """Main acceptance function"""
    parser = argparse.ArgumentParser(description="Run the desk-scale acceptance suite.")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--quick", action="store_true", help="reduced sizes for a smoke run")
    parser.add_argument("--out", help="report CSV path (default: OUTPUT_DIR/acceptance.csv)")
    args = parser.parse_args(argv)

    print("🧪 Dendrite Dynamics Toolkit acceptance suite")
    print("=" * 50)

    print("📦 Checking requirements...")
    if not check_requirements():
        return 2
    print("✅ All required packages are installed")

    print("\n🔧 Checking environment...")
    if not check_environment():
        print("⚠️ Some configuration values look wrong, but continuing...")
    else:
        print("✅ Configuration is valid")

    print("\n📁 Checking example inputs...")
    if not check_inputs():
        return 2
    print("✅ Example inputs found")

    from config.app_config import config
    from src.app.app_controller import ExperimentController
    from src.services.io_formats import write_csv, write_ndjson

    seed = args.seed if args.seed is not None else config.seed
    print(f"\n🚀 Running acceptance items (seed {seed})...")
    suite = AcceptanceSuite(seed, args.quick)
    records = suite.run_all()

    out = Path(args.out) if args.out else Path(config.output_dir) / "acceptance.csv"
    write_ndjson(records, out.with_suffix(".ndjson"))
    result = ExperimentController().report(records)
    write_csv(result.rows, out, result.columns)
    print("=" * 50)
    print(f"{'✅ PASS' if result.passed else '❌ FAIL'}: report written to {out}")
    return 0 if result.passed else 3


if __name__ == "__main__":
    sys.exit(main())
