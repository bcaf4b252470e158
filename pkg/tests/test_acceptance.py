"""Acceptance criteria AC1-AC9.

Each test prints one ``ACn PASS|FAIL ...`` line (visible without ``-s``)
and then asserts. Run ``pytest tests/test_acceptance.py -v`` or
``python tests/test_acceptance.py`` for just the summary lines.
"""

import time

import numpy as np
import pytest

from stressdiff import (GridSpec, NormTracker, Parameters, SolverOptions, State, equilibrium_b,
                        evf_identity, rho_b_pair_residual, run, seeded_random)
from stressdiff import derivation as dv
from stressdiff.diagnostics import combined_coefficient, cumulative_energy_residual, energy_ledger
from stressdiff.mms import Rung, convergence_study, default_solution, make_forcing, random_solution
from stressdiff.state import band_limited_random

from oracles import FiniteDifference1D

PI = np.pi
_SUMMARY = []


def report(label, ok, detail, capsys=None):
    line = f"{label} {'PASS' if ok else 'FAIL'} {detail}"
    _SUMMARY.append(line)
    if capsys is not None:
        with capsys.disabled():
            print("\n" + line)
    else:
        print(line)
    return ok


def _ratios(values):
    v = np.abs(np.asarray(values, dtype=float))
    return v[:-1] / v[1:]


def _in(values, lo, hi):
    values = np.asarray(values)
    return bool(np.all((values >= lo) & (values <= hi)))


# -- shared long run (AC1, AC2, AC4) ---------------------------------------------------

@pytest.fixture(scope="module")
def long_run():
    p = Parameters(gamma=4.0)
    s0 = seeded_random(GridSpec(2, 64), 2024)
    t0 = time.perf_counter()
    res = run(s0, p, 1.0, dt=1e-3, snapshot_every=100)
    return s0, p, res, time.perf_counter() - t0


def test_ac1_mass_conservation(long_run, capsys):
    s0, _, res, elapsed = long_run
    m0 = s0.mass
    masses = np.array([s0.mass] + [s.mass for s in res.snapshots] + [res.final.mass])
    drift = float(np.max(np.abs(masses - m0)) / m0)
    ok = len(res.reports) == 1000 and drift <= 1e-12 and elapsed < 60
    report("AC1", ok, f"mass drift {drift:.2e} (<= 1e-12) over {len(res.reports)} steps in {elapsed:.1f} s "
           "(< 60 s)", capsys)
    assert ok


def test_ac2_energy_inequality(long_run, capsys):
    s0, p, res, _ = long_run
    e0 = energy_ledger(s0, p).total
    totals = np.concatenate([[e0], res.energies])
    worst = float(np.max(np.diff(totals)))
    monotone = worst <= 1e-8 * e0
    cum = []
    for dt in (2e-3, 1e-3, 5e-4):
        w = run(s0, p, 0.1, dt=dt, snapshot_every=1).snapshots
        cum.append(cumulative_energy_residual(w, p))
    ratios = _ratios(cum)
    ok = monotone and _in(ratios, 1.7, 2.3)
    report("AC2", ok, f"max step increase {worst:.2e} (<= {1e-8 * e0:.2e}); cumulative residual "
           f"{np.abs(cum)} ratios {np.round(ratios, 3)} (in [1.7, 2.3])", capsys)
    assert ok


# -- AC3 ------------------------------------------------------------------------------

def test_ac3_korteweg_identity(capsys):
    g = GridSpec(2, 64)
    rng = np.random.default_rng(3)
    eye = np.eye(2).reshape(2, 2, 1, 1)
    worst = 0.0
    for _ in range(100):
        b = 1.0 + 0.2 * band_limited_random(g, rng, max_mode=10)
        grad_b = g.gradient(b)
        outer = g.dealiased_product(grad_b[:, None], grad_b[None, :])
        K = outer - 0.5 * np.trace(outer) * eye
        rhs = g.dealiased_product(g.laplacian(b)[None], grad_b)
        worst = max(worst, float(np.max(np.abs(g.divergence(K) - rhs))))
    ok = worst <= 1e-9
    report("AC3", ok, f"max |Div K - lap b grad b| = {worst:.2e} over 100 fields (<= 1e-9)", capsys)
    assert ok


# -- AC4 ------------------------------------------------------------------------------

def _eigen_error():
    worst = 0.0
    for dim in (1, 2, 3):
        g = GridSpec(dim, 16)
        for n in ((1,), (2, 1), (1, 3, 2))[dim - 1:dim]:
            arg = sum(PI * k * x for k, x in zip(n, g.coords))
            f = np.cos(arg + 0.3)
            k2 = PI**2 * sum(k * k for k in n)
            worst = max(worst, float(np.max(np.abs(g.inverse_laplacian(f) + f / k2))),
                        float(np.max(np.abs(g.laplacian(f) + k2 * f))) / k2)
    return worst


def test_ac4_inverse_laplacian_and_evf(long_run, capsys):
    eig = _eigen_error()
    p = Parameters()
    g = GridSpec(2, 64)
    ms = random_solution(2, p, seed=2)
    forcing = make_forcing(ms, g, p)
    res, floor = [], 4 * p.mu / 3 + p.lam
    coeff_ok = True
    for dt in (1e-3, 5e-4, 2.5e-4):
        w = run(ms.state(g, 0.0), p, 0.1, dt=dt, forcing=forcing, snapshot_every=1,
                options=SolverOptions(track_energy=False)).snapshots
        rep = evf_identity(w, p, forcing=forcing)
        res.append(rep.residual)
        coeff_ok &= bool(np.all(rep.combined_coefficient_field >= floor))
    _, lp, lr, _ = long_run
    for s in lr.snapshots:
        coeff_ok &= bool(np.all(combined_coefficient(s.b, lp) >= 4 * lp.mu / 3 + lp.lam))
    ratios = _ratios(res)
    ok = eig <= 1e-13 and _in(ratios, 1.7, 2.3) and coeff_ok
    report("AC4", ok, f"eigenfunction error {eig:.1e} (<= 1e-13); EVF residual {np.abs(res)} ratios "
           f"{np.round(ratios, 3)} (in [1.7, 2.3]); combined coefficient >= 4mu/3+lambda: {coeff_ok}", capsys)
    assert ok


# -- AC5 ------------------------------------------------------------------------------

def test_ac5_mms_convergence(capsys):
    p = Parameters()
    t0 = time.perf_counter()
    spatial = convergence_study(default_solution(2, p, steady=True, decay=0.3), p,
                                [Rung(16, 1e-5), Rung(32, 1e-5), Rung(64, 1e-5)], 2e-3)
    drops = {f: _ratios(spatial.errors("linf", f)) for f in ("rho", "u", "b")}
    spatial_ok = all(np.all(d >= 100) for d in drops.values())
    temporal = convergence_study(default_solution(2, p), p,
                                 [Rung(32, dt) for dt in (4e-3, 2e-3, 1e-3, 5e-4)], 0.2)
    orders = {f: temporal.orders("linf", f)[1:] for f in ("rho", "u", "b")}
    temporal_ok = all(np.all(np.abs(o - 1.0) <= 0.2) for o in orders.values())
    elapsed = time.perf_counter() - t0
    ok = spatial_ok and temporal_ok and elapsed < 300
    min_drop = min(float(d.min()) for d in drops.values())
    o = np.concatenate(list(orders.values()))
    report("AC5", ok, f"spatial min drop per doubling {min_drop:.0f}x (>= 100x); temporal orders in "
           f"[{o.min():.3f}, {o.max():.3f}] (1 +- 0.2); {elapsed:.1f} s (< 300 s)", capsys)
    assert ok


# -- AC6 ------------------------------------------------------------------------------

def test_ac6_derivation_checks(capsys):
    checks = [(dv.check_bp_evolution, dv.DeformationTrajectory.random),
              (dv.check_trace_identity, dv.DeformationTrajectory.random),
              (dv.check_spherical_reduction, dv.DeformationTrajectory.spherical)]
    all_ratios = []
    for seed in range(20):
        for check, build in checks:
            _, r = dv.convergence_ratios(check, build(seed), dv.SPACINGS)
            all_ratios.extend(r)
    all_ratios = np.array(all_ratios)
    xi = dv.sample_dissipation(0, n=10_000)
    violations = int(np.sum(xi < 0))
    p = Parameters(gamma=4.0)
    w = run(seeded_random(GridSpec(2, 32), 5), p, 0.1, dt=5e-4, snapshot_every=1).snapshots
    _, disagreement = dv.check_energy_identity(w, p)
    ok = _in(all_ratios, 3.5, 4.5) and violations == 0 and disagreement <= 1e-12
    report("AC6", ok, f"{all_ratios.size} FD ratios in [{all_ratios.min():.3f}, {all_ratios.max():.3f}] "
           f"(in [3.5, 4.5]); xi violations {violations}/10000; energy identity vs ledger "
           f"{disagreement:.1e} (<= 1e-12)", capsys)
    assert ok


# -- AC7 ------------------------------------------------------------------------------

def _smooth_1d(x, b_eq):
    return (1 + 0.05 * np.cos(PI * x) + 0.02 * np.sin(2 * PI * x),
            0.05 * np.sin(PI * x),
            b_eq * (1 + 0.05 * np.cos(PI * x + 0.5)))


def test_ac7_oracle_equivalence(capsys):
    p = Parameters(mu=0.05, lam=0.05, sigma=0.05, gamma=2.0)
    b_eq = equilibrium_b(p)
    g = GridSpec(1, 64)
    rho, u, b = _smooth_1d(g.coords[0], b_eq)
    dt = 1e-3
    spec = run(State(g, 0.0, rho, u[None], b), p, 0.1, dt=dt).final
    fd = FiniteDifference1D(256, p.to_dict())
    R, U, B = fd.integrate(*_smooth_1d(fd.x, b_eq), 0.1, dt / 100)
    stride = 256 // 64
    errs = [float(np.max(np.abs(R[::stride] - spec.rho))), float(np.max(np.abs(U[::stride] - spec.u[0]))),
            float(np.max(np.abs(B[::stride] - spec.b)))]
    ok = max(errs) <= 1e-4
    report("AC7", ok, f"L_inf spectral vs FD-RK4 (rho, u, b) = {np.array(errs)} (<= 1e-4)", capsys)
    assert ok


# -- AC8 ------------------------------------------------------------------------------

def test_ac8_eps_consistency(capsys):
    g = GridSpec(1, 64)
    s0 = seeded_random(g, 8)
    finals, pair = [], []
    for eps in (1e-2, 1e-3, 1e-4):
        p = Parameters(epsilon=eps)
        res = run(s0, p, 0.1, dt=1e-4, snapshot_every=10, options=SolverOptions(track_energy=False))
        finals.append(res.final)
        pair.append(rho_b_pair_residual(res.snapshots, p, include_eps=False))
    diff = lambda a, b: max(np.max(np.abs(a.rho - b.rho)), np.max(np.abs(a.u - b.u)), np.max(np.abs(a.b - b.b)))
    d = [diff(finals[0], finals[1]), diff(finals[1], finals[2])]
    ratio = pair[0] / pair[1]
    ok = d[0] > d[1] and 8 <= ratio <= 12
    report("AC8", ok, f"successive L_inf differences {np.array(d)} (decreasing); rho-b residual without "
           f"eps term ratio {ratio:.2f} between eps=1e-2 and 1e-3 (in [8, 12])", capsys)
    assert ok


# -- AC9 ------------------------------------------------------------------------------

def test_ac9_norm_ledger(capsys):
    p = Parameters(gamma=4.0, alpha=2.0)
    assert p.theorem_mode
    s0 = seeded_random(GridSpec(2, 32), 9)
    tracker = NormTracker()
    tracker.update(s0, p)
    run(s0, p, 1.0, [lambda s: tracker.update(s, p)], dt=2e-3, callback_every=5,
        options=SolverOptions(track_energy=False))
    finite = all(np.all(np.isfinite(v)) for v in tracker.instant.values()) and \
        all(np.all(np.isfinite(v)) for v in tracker.integrals.values())
    t = np.array(tracker.times)
    acc = np.array(tracker.integrals["rho_L_gamma_plus_1"])
    half = t >= t[-1] / 2
    slope, icpt = np.polyfit(t[half], acc[half], 1)
    fit = slope * t[half] + icpt
    r2 = 1 - np.sum((acc[half] - fit) ** 2) / np.sum((acc[half] - acc[half].mean()) ** 2)
    ok = finite and r2 >= 0.99
    report("AC9", ok, f"all tracked norms finite: {finite}; accumulated int rho^(gamma+1) linear fit "
           f"R^2 = {r2:.6f} over the second half (>= 0.99)", capsys)
    assert ok


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-q"]))
