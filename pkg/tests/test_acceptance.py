"""Acceptance criteria, one test per criterion.

Each test prints a single ``criterion N: PASS|FAIL`` line (collected again in
the terminal summary) followed by the individual checks behind it.  Run this
file directly with ``python tests/test_acceptance.py`` for the report alone.
"""
import time

import pytest

from semiflow import verify

RESULTS: dict[int, tuple[bool, str]] = {}


def report(number: int, title: str, checks, extra: str = "") -> None:
    ok = all(c.passed for c in checks)
    worst = [c for c in checks if not c.passed] or checks
    summary = "; ".join(f"{c.name}: {c.value:.3e}" for c in worst[:3])
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {title} ({summary}{extra})"
    RESULTS[number] = (ok, line)
    print(line)
    for c in checks:
        print("    " + c.line())
    assert ok, "\n".join(c.line() for c in checks if not c.passed)


@pytest.fixture(scope="module")
def energy_runs():
    return verify.energy_runs()


def test_criterion_01_adjoint_identity():
    t0 = time.perf_counter()
    checks = verify.check_adjoint(samples=100)
    checks.append(verify.at_most("adjoint run time [s]", time.perf_counter() - t0, 10.0))
    report(1, "adjoint identity of the density derivative", checks)


def test_criterion_02_operator_symmetry_positivity():
    report(2, "assembled inertia operator symmetric and positive, all presets", verify.check_operator())


def test_criterion_03_burgers_reduction():
    report(3, "burgers preset matches characteristics", verify.check_burgers())


@pytest.mark.slow
def test_criterion_04_energy_conservation(energy_runs):
    report(4, "energy drift and fourth-order drift ratio", verify.check_energy(energy_runs))


@pytest.mark.slow
def test_criterion_05_mass_conservation(energy_runs):
    report(5, "mass conservation on every energy run", verify.check_mass(energy_runs))


def test_criterion_06_form_equivalence():
    report(6, "momentum and velocity forms agree", verify.check_forms())


def test_criterion_07_shift_equivariance():
    report(7, "lattice-shift equivariance of simulate", verify.check_shift())


def test_criterion_08_dispersion():
    report(8, "small-amplitude frequencies match linearization", verify.check_dispersion())


def test_criterion_09_density_geometry():
    report(9, "closed forms, submersion, horizontality, displacement oracle", verify.check_density())


def test_criterion_10_flow_reconstruction():
    report(10, "pushforward of the reconstructed flow matches rho(t)", verify.check_flow())


def test_criterion_11_failure_honesty():
    report(11, "breaking reported as blow-up with finite outputs", verify.check_breaking())


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-s"]))
