"""Manufactured forcing against symbolic and closed-form oracles; convergence harness."""

import numpy as np
import pytest
import sympy as sp

from stressdiff import GridSpec, Parameters, SolverOptions, equilibrium_b, run
from stressdiff import constitutive as cst
from stressdiff.diagnostics import energy_ledger
from stressdiff.mms import (ManufacturedSolution, Mode, Rung, RungFailure, convergence_study,
                            default_solution, forcing_fields, forcing_power, make_forcing,
                            random_solution)

PI = np.pi


def _sympy_forcing_1d(p, rho_e, u_e, b_e, x):
    """f_rho, f_m, f_b of the 1D system by symbolic differentiation (steady fields)."""
    d = lambda f: sp.diff(f, x)
    e_prime = p.a1 * p.alpha * b_e ** (p.alpha - 1) - p.a2 / b_e
    e = p.a1 * b_e**p.alpha - p.a2 * sp.log(b_e)
    p_el = -e - sp.Rational(2, 3) * b_e * e_prime
    visc = (sp.Rational(4, 3) * p.mu + p.lam) * d(u_e)
    kort = p.sigma * sp.Rational(1, 2) * d(b_e) ** 2
    f_rho = d(rho_e * u_e)
    f_m = d(rho_e * u_e**2) + d(p.a0 * rho_e**p.gamma + p_el + sp.Rational(2, 3) * p.sigma * b_e * d(d(b_e))) \
        - d(visc) + d(kort)
    f_b = u_e * d(b_e) + (e_prime - p.sigma * d(d(b_e))) / p.nu - sp.Rational(2, 3) * b_e * d(u_e)
    return [sp.lambdify(x, f, "numpy") for f in (f_rho, f_m, f_b)]


class TestForcing:
    @pytest.mark.parametrize("dim", [1, 2, 3])
    def test_equilibrium_needs_none(self, dim):
        p = Parameters()
        ms = ManufacturedSolution(dim, 1.0, (), (), equilibrium_b(p), ())
        g = GridSpec(dim, 8)
        for f in forcing_fields(ms, g, p, 0.3):
            assert np.max(np.abs(f)) < 1e-14

    def test_symbolic_density_only(self):
        p = Parameters(gamma=4.0)
        g = GridSpec(1, 64)
        ms = ManufacturedSolution(1, 1.0, (Mode(0.1, (1,)),), ((),), 1.0, ())
        x = sp.symbols("x")
        _, f_m, f_b = _sympy_forcing_1d(p, 1 + sp.Rational(1, 10) * sp.cos(sp.pi * x), sp.Integer(0),
                                        sp.Integer(1), x)
        (xs,) = g.coords
        got = forcing_fields(ms, g, p, 0.0)
        assert np.max(np.abs(got[1][0] - f_m(xs))) < 1e-11
        assert np.allclose(got[2], f_b(xs) * np.ones_like(xs), atol=1e-14)

    def test_symbolic_all_fields(self):
        p = Parameters(gamma=3.0, alpha=2.0, sigma=0.2, mu=0.3, lam=0.1, nu=0.7)
        g = GridSpec(1, 64)
        ms = ManufacturedSolution(1, 1.0, (Mode(0.1, (1,), phase=0.4),), ((Mode(0.2, (2,), phase=1.0),),),
                                  1.2, (Mode(0.15, (1,), phase=-0.6),))
        x = sp.symbols("x")
        c = lambda a, n, ph: a * sp.cos(n * sp.pi * x + ph)
        fns = _sympy_forcing_1d(p, 1 + c(0.1, 1, 0.4), c(0.2, 2, 1.0), 1.2 + c(0.15, 1, -0.6), x)
        (xs,) = g.coords
        got = forcing_fields(ms, g, p, 0.0)
        assert np.max(np.abs(got[0] - fns[0](xs))) < 1e-12
        assert np.max(np.abs(got[1][0] - fns[1](xs))) < 1e-10
        assert np.max(np.abs(got[2] - fns[2](xs))) < 1e-11

    def test_time_periodic_b(self):
        # b* = 1 + 0.1 sin(t) cos(pi x), u* = 0
        p = Parameters(sigma=0.2, nu=0.5)
        g = GridSpec(1, 32)
        ms = ManufacturedSolution(1, 1.0, (), ((),), 1.0, (Mode(0.1, (1,), omega=1.0, time_phase=PI / 2),))
        (x,) = g.coords
        for t in (0.0, 0.4, 2.0):
            b = 1 + 0.1 * np.sin(t) * np.cos(PI * x)
            lap_b = -0.1 * PI**2 * np.sin(t) * np.cos(PI * x)
            expected = 0.1 * np.cos(t) * np.cos(PI * x) + (cst.elastic_energy_prime(b, p) - p.sigma * lap_b) / p.nu
            assert np.max(np.abs(forcing_fields(ms, g, p, t)[2] - expected)) < 1e-12

    def test_exact_solution_of_rhs(self):
        # the forced right-hand side reproduces the closed-form time derivatives
        from stressdiff.solver import rhs_b, rhs_continuity
        p = Parameters()
        g = GridSpec(2, 32)
        ms = default_solution(2, p)
        t = 0.3
        f_rho, _, f_b = forcing_fields(ms, g, p, t)
        s = ms.state(g, t)
        d_rho, _, d_b = ms.rates(g, t)
        assert np.max(np.abs(rhs_continuity(s, p) + f_rho - d_rho)) < 1e-12
        assert np.max(np.abs(rhs_b(s, p) + f_b - d_b)) < 1e-12

    def test_steady_forcing_cached(self):
        p = Parameters()
        g = GridSpec(1, 16)
        f = make_forcing(default_solution(1, p, steady=True), g, p)
        assert f(0.0) is f(1.0)


class TestFamilies:
    def test_default_amplitudes(self):
        ms = default_solution(2, Parameters())
        modes = list(ms.rho_modes) + list(ms.b_modes) + [m for c in ms.u_modes for m in c]
        assert all(abs(m.amplitude) <= 0.2 for m in modes)
        assert ms.b_base == equilibrium_b(Parameters())

    def test_positive_fields(self):
        p = Parameters()
        g = GridSpec(2, 32)
        for seed in range(5):
            rho, _, b = random_solution(2, p, seed).fields(g, 0.37)
            assert rho.min() > 0.7 and b.min() > 0.7 * equilibrium_b(p)

    def test_random_reproducible_and_coupled(self):
        a, b = random_solution(2, Parameters(), 4), random_solution(2, Parameters(), 4)
        assert a == b
        assert all(c[0].wavevector == a.rho_modes[0].wavevector for c in a.u_modes)

    def test_decay_range(self):
        with pytest.raises(ValueError):
            Mode(0.1, (1,), decay=1.0)

    def test_decay_profile_series(self):
        # (cos t - r) / (1 - 2 r cos t + r^2) = sum_j r^(j-1) cos(j t)
        th = np.linspace(0, 2 * PI, 50)
        r = 0.3
        series = sum(r ** (j - 1) * np.cos(j * th) for j in range(1, 60))
        m = Mode(1.0, (1,), decay=r)
        assert np.allclose(m._spatial((th / PI,), (0.0,)), series, atol=1e-14)


class TestConvergenceStudy:
    def test_zero_time(self):
        p = Parameters()
        table = convergence_study(default_solution(2, p), p, [Rung(8, 1e-3), Rung(16, 1e-3), Rung(32, 1e-3)], 0.0)
        assert all(r.error == 0.0 for r in table.rows)

    def test_needs_three_rungs(self):
        p = Parameters()
        with pytest.raises(ValueError):
            convergence_study(default_solution(1, p), p, [Rung(8, 1e-3)] * 2, 0.1)

    def test_rung_failure(self):
        p = Parameters()
        with pytest.raises(RungFailure) as info:
            convergence_study(default_solution(1, p), p, [Rung(16, 1e-3)] * 3, 0.01,
                              options=SolverOptions(b_floor=5.0, max_halvings=1, track_energy=False))
        assert info.value.rung == 0

    def test_band_limited_steady_is_exact(self):
        p = Parameters()
        ms = default_solution(2, p, steady=True)
        table = convergence_study(ms, p, [Rung(16, 1e-3), Rung(32, 1e-3), Rung(64, 1e-3)], 5e-3)
        assert np.all(table.errors("linf", "rho") < 1e-12)

    def test_temporal_first_order(self):
        p = Parameters()
        rungs = [Rung(16, dt) for dt in (4e-3, 2e-3, 1e-3)]
        table = convergence_study(default_solution(1, p), p, rungs, 0.2)
        for name in ("rho", "u", "b"):
            orders = table.orders("linf", name)[1:]
            assert np.all(np.abs(orders - 1.0) < 0.2), name

    def test_table_rows(self):
        p = Parameters()
        table = convergence_study(default_solution(1, p), p, [Rung(16, 1e-2)] * 3, 0.02)
        assert len(table.rows) == 3 * 6
        assert np.isnan(table.rows[0].observed_order)

    @pytest.mark.parametrize("cells", [(1, 0), (3, -5), (8, 2)])
    def test_translation_invariance(self, cells):
        p = Parameters()
        ms = default_solution(2, p)
        h = GridSpec(2, 16).spacing
        rungs = [Rung(16, 2e-3)] * 3
        base = convergence_study(ms, p, rungs, 0.02)
        moved = convergence_study(ms.translated(tuple(c * h for c in cells)), p, rungs, 0.02)
        for a, b in zip(base.rows, moved.rows):
            assert abs(a.error - b.error) < 1e-11


class TestForcedEnergyBalance:
    def test_first_order(self):
        # dE/dt + dissipation = forcing power, trapezoid in time
        p = Parameters()
        ms = default_solution(2, p)
        g = GridSpec(2, 32)
        out = []
        for dt in (2e-3, 1e-3, 5e-4):
            forcing = make_forcing(ms, g, p)
            w = run(ms.state(g, 0.0), p, 0.1, dt=dt, forcing=forcing, snapshot_every=1).snapshots
            e = np.array([energy_ledger(s, p).total for s in w])
            d = np.array([energy_ledger(s, p).dissipation for s in w])
            pw = np.array([forcing_power(s, forcing(s.time), p) for s in w])
            src = d - pw
            out.append(abs(e[-1] - e[0] + dt * (src.sum() - 0.5 * (src[0] + src[-1]))))
        ratios = np.array(out[:-1]) / np.array(out[1:])
        assert np.all((ratios > 1.7) & (ratios < 2.3))
