#!/usr/bin/env python3
"""
Demo script to showcase the subsonic flow solver.

Solves vortical flow past a smooth bump on a coarse grid, runs the
verification suite, builds the matched annulus state and sweeps the
upstream density toward the critical value.

    python demo.py
"""
import logging

import numpy as np

from app.annulus_matcher import build_state, check_state, compare_with_solution, solve_rho1
from app.continuation import ProblemSetup, analytic_threshold, sweep, verify_record
from app.flow_verify import reconstruct
from app.gas_model import GasModel
from app.geometry_grid import Obstacle
from app.schemas import SolverConfig
from app.upstream_profile import UpstreamProfile, validate

logging.basicConfig(level=logging.WARNING, format="%(asctime)s - %(name)s - %(levelname)s - %(message)s")


def print_report(report):
    for check in report.checks:
        mark = "ok  " if check.passed else "FAIL"
        print(f"   [{mark}] {check.name:<24} margin {check.margin:.3e}")


def main():
    print("=" * 60)
    print("Subsonic Axisymmetric Flow Demo")
    print("=" * 60)
    print()

    gas = GasModel(1.4)
    profile = UpstreamProfile.exp_vortical(1.0, 0.3, 12.0)
    setup = ProblemSetup(gas=gas, profile=profile, obstacle=Obstacle.smooth_bump(0.3),
                         X=4.0, L=4.0, nx=64, nr=32, solver=SolverConfig())

    # 1. Upstream data
    print("1. Checking the upstream profile...")
    print(f"   Admissible: {validate(profile).passed}")
    print(f"   Sonic threshold rho_inf: {setup.sonic_threshold:.4f}")
    print(f"   Certification threshold (eps0=0.05): {analytic_threshold(profile, gas, 0.05):.4f}")
    print()

    # 2. Solve
    print("2. Solving at rho_inf = 12...")
    record = sweep([12.0], setup)[0]
    field, trunc = record.field, record.trunc
    print(f"   Status: {record.status.value}")
    print(f"   Q = {field.q:.6f} (upstream bound {record.q_lower_bound:.6f})")
    print(f"   Picard iterations: {field.picard_iterations}, CG iterations: {field.linear_iterations}")
    flow = reconstruct(field, trunc, gas)
    print(f"   Max Mach: {np.nanmax(flow.mach):.6f}")
    print()

    # 3. Verify
    print("3. Running the verification suite (with the X-doubled companion)...")
    print_report(verify_record(setup, record, n_lines=8))
    print()

    # 4. Annulus
    print("4. Matching the downstream annulus...")
    J = setup.obstacle.J
    rho1 = solve_rho1(trunc, gas, setup.L, J)
    state = build_state(rho1, trunc, gas, setup.L, J)
    print(f"   rho1 = {rho1:.8f}")
    print_report(check_state(state, trunc, gas))
    print_report(compare_with_solution(state, field, trunc))
    print()

    # 5. Continuation
    print("5. Sweeping the upstream density...")
    for rec in sweep([12.0, 8.0, 6.0, 5.0], setup):
        q = "n/a" if rec.q is None else f"{rec.q:.6f}"
        print(f"   rho_inf = {rec.rho_inf:<5} {rec.status.value:<18} Q = {q}")
    print()

    print("=" * 60)
    print("Demo complete!")
    print("=" * 60)


if __name__ == "__main__":
    main()
