"""End-to-end acceptance gate.

Each test checks one shipping criterion at its stated tolerance against
frozen benchmark values and prints a single PASS/FAIL line (visible under
``pytest -s``).  The heavy sweeps are shared through module-scoped fixtures;
the whole module is expected to run in several minutes.
"""

import time

import numpy as np
import pytest

import daeqoi
from daeqoi.core import QoISpec, TimeGrid
from daeqoi.estimator import effectivity, estimate_error, reference_qoi_error
from daeqoi.experiment import ExperimentConfig, run_experiment
from daeqoi.forward import NewtonSettings, bdf1_solve
from daeqoi.numerics import gauss_legendre_5
from daeqoi.problems import build_problem

from helpers import unit_slope


def _verdict(name, checks):
    failed = [msg for ok, msg in checks if not ok]
    status = "PASS" if not failed else "FAIL"
    detail = f"  [{'; '.join(failed)}]" if failed else ""
    print(f"\nACCEPTANCE {name}: {status}{detail}")
    assert not failed, f"{name} failed: {failed}"


def _rel(value, target):
    return abs(value - target) / abs(target)


def _analyze(problem, traj, qoi, path, r=4, backend="rk-adaptive", newton=None):
    adjoint = daeqoi.solve_adjoint_backward(problem, traj, qoi, path=path, r=r)
    report = estimate_error(problem, traj, qoi, adjoint)
    report.reference_error = reference_qoi_error(
        problem, traj, qoi, backend=backend, r=r, newton_settings=newton)
    effectivity(report)
    return report


# -- reaction-network sweeps (criteria 1, 2, 9) -----------------------------

ROBERTSON_GRID = {"dt": [0.001, 0.0005], "T": [1.0, 10.0, 20.0, 50.0, 100.0]}


@pytest.fixture(scope="module")
def robertson_diff_sweep():
    config = ExperimentConfig.from_dict({
        "schema": 1, "problem": "robertson", **ROBERTSON_GRID,
        "method": "both",
        "qoi": {"kind": "cumulative", "psi_y": [1.0, 1.0], "psi_z": 0.0}})
    started = time.perf_counter()
    table = run_experiment(config)
    elapsed = time.perf_counter() - started
    return table, elapsed


@pytest.fixture(scope="module")
def robertson_alg_sweep():
    config = ExperimentConfig.from_dict({
        "schema": 1, "problem": "robertson", **ROBERTSON_GRID,
        "method": "both",
        "qoi": {"kind": "cumulative", "psi_y": 0.0, "psi_z": 1.0}})
    return run_experiment(config)


def _row(table, dt, T, method):
    for row in table.rows:
        if (row.dt, row.T, row.method) == (dt, T, method):
            return row
    raise AssertionError(f"missing row {(dt, T, method)}")


def test_criterion_1_cumulative_differential_table(robertson_diff_sweep):
    table, elapsed = robertson_diff_sweep
    r1 = _row(table, 0.001, 1.0, "adjoint-dae")
    r2 = _row(table, 0.0005, 1.0, "adjoint-dae")
    checks = [
        (not table.failed_rows, "all 20 cells computed"),
        (_rel(r1.estimate, -2.8546e-06) <= 0.01,
         f"estimate {r1.estimate:.5e} vs -2.8546e-06"),
        (abs(r1.effectivity - 0.9989) <= 0.005,
         f"effectivity {r1.effectivity:.4f} vs 0.9989+-0.005"),
        (_rel(r2.estimate, -1.4288e-06) <= 0.01,
         f"halved-step estimate {r2.estimate:.5e} vs -1.4288e-06"),
        (elapsed <= 300.0, f"sweep took {elapsed:.0f}s (limit 300s)"),
    ]
    _verdict("criterion 1 (reaction network, cumulative differential QoI)", checks)


def test_criterion_2_cumulative_algebraic_negation(robertson_diff_sweep,
                                                   robertson_alg_sweep):
    diff_table, _ = robertson_diff_sweep
    alg_table = robertson_alg_sweep
    checks = [(not alg_table.failed_rows, "all 20 cells computed")]
    for dt in ROBERTSON_GRID["dt"]:
        for T in ROBERTSON_GRID["T"]:
            for method in ("adjoint-dae", "adjoint-ode"):
                a = _row(alg_table, dt, T, method)
                d = _row(diff_table, dt, T, method)
                checks.append((
                    _rel(a.estimate, -d.estimate) <= 1e-3,
                    f"negation at dt={dt} T={T} {method}: "
                    f"{a.estimate:.5e} vs {-d.estimate:.5e}"))
                checks.append((
                    0.994 <= a.effectivity <= 1.005,
                    f"effectivity {a.effectivity:.4f} at dt={dt} T={T} {method}"))
    _verdict("criterion 2 (algebraic QoI mirrors the differential table)", checks)


# -- pendulum terminal QoIs (criteria 3, 9) ---------------------------------

@pytest.fixture(scope="module")
def pendulum1_reports():
    problem = build_problem("pendulum1")
    traj = bdf1_solve(problem, TimeGrid(0.0, 1.0, 1000))
    qois = {"diff": QoISpec.terminal([1.0, 1.0, 1.0, 1.0], [0.0]),
            "alg": QoISpec.terminal([0.0, 0.0, 0.0, 0.0], [1.0])}
    return {(tag, path): _analyze(problem, traj, qoi, path)
            for tag, qoi in qois.items() for path in ("dae", "ode")}


def test_criterion_3_pendulum_terminal_qois(pendulum1_reports):
    reports = pendulum1_reports
    checks = [
        (_rel(reports[("diff", "dae")].total_estimate, -5.0234e-03) <= 0.01,
         f"diff estimate {reports[('diff', 'dae')].total_estimate:.5e}"),
        (0.995 <= reports[("diff", "dae")].effectivity <= 1.005,
         f"diff effectivity {reports[('diff', 'dae')].effectivity:.4f}"),
        (_rel(reports[("alg", "dae")].total_estimate, 5.0059e-03) <= 0.01,
         f"alg estimate {reports[('alg', 'dae')].total_estimate:.5e}"),
        (0.993 <= reports[("alg", "dae")].effectivity <= 1.003,
         f"alg effectivity {reports[('alg', 'dae')].effectivity:.4f}"),
        (_rel(reports[("diff", "ode")].total_estimate, -5.0252e-03) <= 0.01,
         f"reduced-path diff estimate {reports[('diff', 'ode')].total_estimate:.5e}"),
        (_rel(reports[("alg", "ode")].total_estimate, 5.0019e-03) <= 0.01,
         f"reduced-path alg estimate {reports[('alg', 'ode')].total_estimate:.5e}"),
    ]
    _verdict("criterion 3 (pendulum index-1 terminal QoIs)", checks)


# -- index-2 cumulative QoIs (criterion 4) ----------------------------------

def test_criterion_4_index2_cumulative_effectivities():
    # growth-rate parameter from the run config; the closed-form solution is
    # the reference
    problem = build_problem("petzold2", lam=-0.9)
    qois = {"diff": QoISpec.cumulative([1.0, 1.0], [0.0]),
            "alg": QoISpec.cumulative([0.0, 0.0], [1.0])}
    checks = []
    ode_alg_T3 = None
    for T in (1.0, 2.0, 3.0):
        traj = bdf1_solve(problem, TimeGrid(0.0, T, int(round(T / 0.001))))
        for tag, qoi in qois.items():
            report = _analyze(problem, traj, qoi, "dae", backend="analytic")
            checks.append((0.9986 <= report.effectivity <= 1.001,
                           f"{tag} T={T}: effectivity {report.effectivity:.5f}"))
            if tag == "alg" and T == 3.0:
                ode = _analyze(problem, traj, qoi, "ode", backend="analytic")
                ode_alg_T3 = ode.effectivity
    checks.append((0.85 <= ode_alg_T3 <= 0.95,
                   f"reduced-path degradation at T=3: {ode_alg_T3:.4f}"))
    _verdict("criterion 4 (index-2 cumulative QoIs, both paths)", checks)


# -- mixed terminal QoI through the general index-2 route (criterion 5) -----

def test_criterion_5_mixed_terminal_qoi():
    problem = build_problem("pendulum2")
    traj = bdf1_solve(problem, TimeGrid(0.0, 1.0, 1000))
    qoi = QoISpec.terminal([1.0, 1.0, 1.0, 1.0], [1.0])
    adjoint = daeqoi.solve_adjoint_backward(problem, traj, qoi, path="dae", r=4)
    report = estimate_error(problem, traj, qoi, adjoint)
    report.reference_error = reference_qoi_error(problem, traj, qoi,
                                                 backend="rk-adaptive", r=4)
    effectivity(report)
    checks = [
        (adjoint.terminal_kind == "dae2-terminal" and np.any(qoi.zeta_z != 0),
         "general terminal route exercised"),
        ("dgdt_weighted_zeta_z_at_T" in report.terms,
         "constraint-rate boundary correction present"),
        (_rel(report.total_estimate, -1.7153e-03) <= 0.01,
         f"estimate {report.total_estimate:.5e} vs -1.7153e-03"),
        (abs(report.effectivity - 1.002) <= 0.01,
         f"effectivity {report.effectivity:.4f} vs 1.002+-0.01"),
    ]
    _verdict("criterion 5 (pendulum index-2 mixed terminal QoI)", checks)


# -- semi-discretized ion transport (criterion 6) ----------------------------

def test_criterion_6_ion_transport_properties():
    started = time.perf_counter()
    ns = 50
    problem = build_problem("ennpe", ns=ns, d_c=1.0, d_a=2.0)
    newton = NewtonSettings()
    checks = []

    traj = bdf1_solve(problem, TimeGrid(0.0, 0.5, 500), newton)
    C, A = traj.Y[:, :ns], traj.Y[:, ns:]
    drift = max(np.max(np.abs(C.sum(axis=1) - C.sum(axis=1)[0])),
                np.max(np.abs(A.sum(axis=1) - A.sum(axis=1)[0])))
    checks.append((drift <= 1e-9 * ns, f"cell-sum drift {drift:.2e}"))
    final_cell = np.max(np.abs(C[:, -1] - A[:, -1]))
    checks.append((final_cell <= 10 * newton.tol,
                   f"final-cell neutrality {final_cell:.2e}"))

    quarter = QoISpec.terminal(np.repeat([1.0, 0.0, 1.0, 0.0], ns // 2),
                               np.zeros(ns - 1))
    for dt in (0.002, 0.001):
        cell = bdf1_solve(problem, TimeGrid(0.0, 0.5, int(round(0.5 / dt))), newton)
        report = _analyze(problem, cell, quarter, "dae", r=3,
                          backend="fine-bdf-richardson", newton=newton)
        checks.append((0.95 <= report.effectivity <= 1.03,
                       f"quarter-mask effectivity {report.effectivity:.4f} at dt={dt}"))

    ones = QoISpec.terminal(np.ones(2 * ns), np.zeros(ns - 1))
    adjoint = daeqoi.solve_adjoint_backward(problem, traj, ones, path="dae", r=3)
    report = estimate_error(problem, traj, ones, adjoint)
    parts = daeqoi.cancellation_split(problem, traj, adjoint, parts=4)
    mags = np.abs(parts)
    checks.append((mags.max() - mags.min() <= 1e-10,
                   f"block magnitudes agree to {mags.max() - mags.min():.2e}"))
    checks.append((np.all(np.sign(parts) == [-1.0, 1.0, -1.0, 1.0])
                   or np.all(np.sign(parts) == [1.0, -1.0, 1.0, -1.0]),
                   f"alternating signs {np.sign(parts)}"))
    checks.append((abs(report.total_estimate) <= 1e-9,
                   f"cancelled total {report.total_estimate:.2e}"))
    elapsed = time.perf_counter() - started
    checks.append((elapsed <= 600.0, f"runtime {elapsed:.0f}s (limit 600s)"))
    _verdict("criterion 6 (ion transport conservation/cancellation)", checks)


# -- first-order convergence everywhere (criterion 7) ------------------------

def _order(coarse, fine):
    return np.log2(abs(coarse) / abs(fine))


def test_criterion_7_convergence_orders():
    cases = [
        ("robertson", {}, QoISpec.cumulative([1.0, 1.0], [0.0]),
         ("dae", "ode"), 0.002, 1.0, "rk-adaptive"),
        ("robertson", {}, QoISpec.cumulative([0.0, 0.0], [1.0]),
         ("dae", "ode"), 0.002, 1.0, "rk-adaptive"),
        ("pendulum1", {}, QoISpec.terminal([1.0] * 4, [0.0]),
         ("dae", "ode"), 0.002, 1.0, "rk-adaptive"),
        ("pendulum1", {}, QoISpec.terminal([0.0] * 4, [1.0]),
         ("dae", "ode"), 0.002, 1.0, "rk-adaptive"),
        ("petzold2", {}, QoISpec.cumulative([1.0, 1.0], [0.0]),
         ("dae", "ode"), 0.002, 1.0, "analytic"),
        ("petzold2", {}, QoISpec.cumulative([0.0, 0.0], [1.0]),
         ("dae", "ode"), 0.002, 1.0, "analytic"),
        ("pendulum2", {}, QoISpec.terminal([1.0] * 4, [1.0]),
         ("dae", "ode"), 0.002, 1.0, "rk-adaptive"),
        ("ennpe", {"ns": 20}, QoISpec.terminal(np.repeat([1.0, 0.0, 1.0, 0.0], 10),
                                               np.zeros(19)),
         ("dae",), 0.004, 0.5, "fine-bdf-richardson"),
    ]
    checks = []
    for name, params, qoi, paths, dt, T, backend in cases:
        problem = build_problem(name, **params)
        r = 3 if name == "ennpe" else 4
        reports = {}
        for step in (dt, dt / 2):
            traj = bdf1_solve(problem, TimeGrid(0.0, T, int(round(T / step))))
            reports[step] = {path: _analyze(problem, traj, qoi, path, r=r,
                                            backend=backend)
                             for path in paths}
        ref_order = _order(reports[dt][paths[0]].reference_error,
                           reports[dt / 2][paths[0]].reference_error)
        checks.append((0.9 <= ref_order <= 1.1,
                       f"{name} reference order {ref_order:.3f}"))
        for path in paths:
            est_order = _order(reports[dt][path].total_estimate,
                               reports[dt / 2][path].total_estimate)
            checks.append((0.9 <= est_order <= 1.1,
                           f"{name}/{path} estimate order {est_order:.3f}"))
    _verdict("criterion 7 (first-order convergence of estimates and errors)",
             checks)


# -- invariant suite (criterion 8) -------------------------------------------

def test_criterion_8_invariant_suite():
    checks = []

    pend2 = build_problem("pendulum2")
    traj2 = bdf1_solve(pend2, TimeGrid(0.0, 1.0, 200))
    worst_idem = worst_annihilation = 0.0
    for t in np.linspace(0.0, 1.0, 9):
        ops = daeqoi.linearized_ops_at(pend2, traj2, t)
        P = daeqoi.projector(ops)
        worst_idem = max(worst_idem, np.max(np.abs(P @ P - P)))
        worst_annihilation = max(worst_annihilation, np.max(np.abs(ops.gy @ P)))
    checks.append((worst_idem <= 1e-10, f"projector idempotence {worst_idem:.2e}"))
    checks.append((worst_annihilation <= 1e-10,
                   f"projector annihilation {worst_annihilation:.2e}"))

    rob = build_problem("robertson")
    traj_rob = bdf1_solve(rob, TimeGrid(0.0, 1.0, 1000))
    qoi = QoISpec.cumulative([1.0, 1.0], [0.0])
    adjoint = daeqoi.solve_adjoint_backward(rob, traj_rob, qoi, r=4)
    checks.append((adjoint.alg_residual <= 1e-12,
                   f"index-1 algebraic adjoint residual {adjoint.alg_residual:.2e}"))
    pet = build_problem("petzold2")
    traj_pet = bdf1_solve(pet, TimeGrid(0.0, 1.0, 500))
    adj_pet = daeqoi.solve_adjoint_backward(
        pet, traj_pet, QoISpec.cumulative([0.0, 0.0], [1.0]), r=4)
    checks.append((adj_pet.alg_residual <= 1e-12,
                   f"index-2 algebraic adjoint residual {adj_pet.alg_residual:.2e}"))

    quad = abs(gauss_legendre_5(lambda t: t**9, 0.0, 1.0) - 0.1)
    checks.append((quad <= 1e-13, f"degree-9 quadrature defect {quad:.2e}"))

    from daeqoi.numerics import fd_jacobian
    rng = np.random.default_rng(17)
    worst_fd = 0.0
    for _ in range(20):
        y = pend2.y0 + 0.3 * rng.standard_normal(4)
        z = pend2.z0 + 0.3 * rng.standard_normal(1)
        t = rng.uniform(0.0, 2.0)
        fd = fd_jacobian(lambda v: pend2.f(v, z, t), y)
        scale = 1.0 + np.max(np.abs(pend2.fy(y, z, t)))
        worst_fd = max(worst_fd, np.max(np.abs(fd - pend2.fy(y, z, t))) / scale)
    checks.append((worst_fd <= 1e-6, f"analytic-vs-FD agreement {worst_fd:.2e}"))

    exact = unit_slope()
    traj0 = bdf1_solve(exact, TimeGrid(0.0, 1.0, 8))
    qoi0 = QoISpec.cumulative([1.0], [1.0])
    adj0 = daeqoi.solve_adjoint_backward(exact, traj0, qoi0, r=4)
    rep0 = estimate_error(exact, traj0, qoi0, adj0)
    checks.append((rep0.total_estimate == 0.0,
                   f"zero-residual estimate {rep0.total_estimate!r}"))

    report = estimate_error(rob, traj_rob, qoi, adjoint)
    total = sum(report.terms.values())
    checks.append((abs(report.total_estimate - total)
                   <= 1e-14 * max(1e-300, abs(total)),
                   "term-sum identity"))
    _verdict("criterion 8 (invariant suite)", checks)


# -- agreement of the two adjoint routes (criterion 9) ------------------------

def test_criterion_9_cross_path_agreement(robertson_diff_sweep, pendulum1_reports):
    table, _ = robertson_diff_sweep
    checks = []
    for T in ROBERTSON_GRID["T"]:
        dae = _row(table, 0.001, T, "adjoint-dae").estimate
        ode = _row(table, 0.001, T, "adjoint-ode").estimate
        checks.append((abs(dae - ode) <= 1e-3 * abs(dae),
                       f"reaction network T={T}: {abs(dae - ode) / abs(dae):.2e}"))
    for tag in ("diff", "alg"):
        dae = pendulum1_reports[(tag, "dae")].total_estimate
        ode = pendulum1_reports[(tag, "ode")].total_estimate
        checks.append((abs(dae - ode) <= 1e-3 * abs(dae),
                       f"pendulum {tag}: {abs(dae - ode) / abs(dae):.2e}"))
    _verdict("criterion 9 (adjoint route agreement)", checks)
