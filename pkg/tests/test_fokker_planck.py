import math

import numpy as np
import pytest

from collapselab.fokker_planck import (STABILITY_C, FpGrid, StabilityError, absorbed_fractions,
                                       cell_centers, default_dt, fp_evolve, fp_step, stability_bound)
from collapselab.model import DiffusionSpec, InvariantViolation, make_channel_state
from collapselab.reduction import born_statistics


@pytest.fixture
def spec():
    return DiffusionSpec(1.0, 1, 1e-4)


def naive_mean(p0, M, t):
    """Same grid stepped with A * d2P/dp2 (coefficient outside the derivative)."""
    h = 1.0 / M
    x = cell_centers(M)
    A = x * (1 - x)
    P = FpGrid.from_point(p0, M).density.copy()
    dt = 0.45 * h * h / A.max()
    for _ in range(int(t / dt)):
        Pp = np.concatenate([[0.0], P, [0.0]])
        P = P + dt * A * (Pp[2:] - 2 * P + Pp[:-2]) / h ** 2
    return np.dot(x, P) / P.sum()


class TestGrid:
    def test_vertex_initial_condition(self):
        g = FpGrid.from_point(1.0, 64)
        assert absorbed_fractions(g) == (0.0, 1.0, 0.0)
        assert FpGrid.from_point(0.0, 64).absorbed == (1.0, 0.0)

    def test_fresh_interior(self):
        a0, a1, inner = absorbed_fractions(FpGrid.from_point(0.3, 128))
        assert (a0, a1) == (0.0, 0.0)
        assert inner == pytest.approx(1.0, abs=1e-14)

    @pytest.mark.parametrize("p0", [0.3, 0.36, 0.5, 0.001, 0.999])
    def test_point_has_exact_moment(self, p0):
        g = FpGrid.from_point(p0, 256)
        assert g.first_moment == pytest.approx(p0, abs=1e-15)
        assert sum(absorbed_fractions(g)) == pytest.approx(1.0, abs=1e-14)

    def test_invariants(self):
        with pytest.raises(InvariantViolation, match="num_cells"):
            FpGrid(np.ones(32))
        with pytest.raises(InvariantViolation, match="density"):
            FpGrid(np.r_[-1.0, np.full(63, 65 / 63)])
        with pytest.raises(InvariantViolation, match="mass"):
            FpGrid(np.ones(64), (0.5, 0.0))
        with pytest.raises(InvariantViolation, match="initial"):
            FpGrid.from_point(1.5, 64)

    def test_immutable(self):
        g = FpGrid.from_point(0.5, 64)
        with pytest.raises(ValueError):
            g.density[0] = 1.0


class TestStep:
    def test_stability_rejected_with_bound(self, spec):
        g = FpGrid.from_point(0.5, 64)
        bound = stability_bound(64, 1.0)
        assert bound == pytest.approx(STABILITY_C / 64 ** 2 / (0.5 ** 2 - (0.5 / 64) ** 2))
        with pytest.raises(StabilityError) as info:
            fp_step(g, spec, 1.01 * bound)
        assert info.value.bound == bound
        assert repr(bound) in str(info.value)
        fp_step(g, spec, bound)

    def test_bound_scales_with_sources(self):
        assert stability_bound(64, 2.0) == pytest.approx(stability_bound(64, 1.0) / 2)
        spec2 = DiffusionSpec(1.0, 2, 1e-4)
        with pytest.raises(StabilityError):
            fp_step(FpGrid.from_point(0.5, 64), spec2, stability_bound(64, 1.0))

    def test_symmetry(self, spec):
        g = FpGrid.from_point(0.5, 128)
        dt = default_dt(128, 1.0)
        for _ in range(20):
            g = fp_step(g, spec, dt, 500)
            assert abs(g.absorbed[0] - g.absorbed[1]) <= 1e-10
        assert g.absorbed[0] > 0.1

    def test_mass_and_moment_over_million_steps(self, spec):
        g = FpGrid.from_point(0.3, 64)
        dt = default_dt(64, 1.0)
        m0 = g.first_moment
        worst_mass = worst_moment = 0.0
        for _ in range(100):
            g = fp_step(g, spec, dt, 10_000)
            worst_mass = max(worst_mass, abs(sum(absorbed_fractions(g)) - 1.0))
            worst_moment = max(worst_moment, abs(g.first_moment - m0))
        assert worst_mass <= 1e-8
        assert worst_moment < 1e-6
        assert g.interior_mass < 1e-6

    def test_time_tracks(self, spec):
        g = fp_step(FpGrid.from_point(0.5, 64), spec, 1e-5, 7)
        assert g.time == pytest.approx(7e-5)


class TestEvolve:
    def test_born_from_point_three(self, spec):
        g, hist = fp_evolve(FpGrid.from_point(0.3, 256), spec, interior_tol=1e-4)
        a0, a1, inner = absorbed_fractions(g)
        assert inner < 1e-4
        assert a1 == pytest.approx(0.3, abs=2e-3)
        assert np.max(np.abs(hist.first_moment - 0.3)) < 1e-6
        assert np.all(np.diff(hist.absorbed_1) >= 0)

    def test_long_time_symmetric_and_asymmetric(self, spec):
        g, _ = fp_evolve(FpGrid.from_point(0.5, 128), spec, interior_tol=1e-6)
        assert g.absorbed[0] == pytest.approx(0.5, abs=1e-6)
        assert g.absorbed[1] == pytest.approx(0.5, abs=1e-6)
        g, _ = fp_evolve(FpGrid.from_point(0.36, 128), spec, interior_tol=1e-4)
        assert g.absorbed[0] == pytest.approx(0.64, abs=2e-3)
        assert g.absorbed[1] == pytest.approx(0.36, abs=2e-3)

    def test_lands_on_t_final(self, spec):
        g, hist = fp_evolve(FpGrid.from_point(0.3, 64), spec, t_final=0.37)
        assert g.time == pytest.approx(0.37, abs=1e-12)
        assert hist.times[-1] == g.time

    def test_needs_stop_rule(self, spec):
        with pytest.raises(ValueError):
            fp_evolve(FpGrid.from_point(0.3, 64), spec)

    def test_grid_convergence(self, spec):
        # p0 = 0.25 sits on a cell face for every grid, so the initial split is the same shape
        res = {M: fp_evolve(FpGrid.from_point(0.25, M), spec, t_final=0.5)[0].absorbed[1]
               for M in (64, 128, 256, 1024)}
        err = [abs(res[M] - res[1024]) for M in (64, 128, 256)]
        orders = [math.log2(err[0] / err[1]), math.log2(err[1] / err[2])]
        assert min(orders) >= 1.0, orders
        # the successive-difference ratio needs no reference solution
        d1, d2 = res[64] - res[128], res[128] - res[256]
        assert math.log2(abs(d1 / d2)) >= 1.0

    def test_operator_ordering_is_load_bearing(self, spec):
        # A d2P/dp2 carries a drift; d2(AP)/dp2 does not
        g, _ = fp_evolve(FpGrid.from_point(0.3, 128), spec, t_final=0.5)
        assert abs(g.first_moment - 0.3) < 1e-12
        assert abs(naive_mean(0.3, 128, 0.5) - 0.3) > 0.05

    def test_agrees_with_monte_carlo(self):
        spec = DiffusionSpec(1.0, 1, 1e-3)
        mc = born_statistics(make_channel_state([0.7, 0.3]), spec, 5000, 99)
        g, _ = fp_evolve(FpGrid.from_point(0.3, 128), spec, interior_tol=1e-4)
        assert abs(mc.frequencies[1] - g.absorbed[1]) <= 3 * mc.stderr[1] + 2e-3
