import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from collapselab.blocks import (assemble_full, dp1_dt, dp2_dt, evolve_blocks, exact_evolution,
                                min_eigenvalues, random_blocks, random_pure_blocks)
from collapselab.model import BlockDensityMatrix, HamiltonianBlocks, InvariantViolation


def scalar_blocks(h12, r12, p1=0.5):
    h = HamiltonianBlocks([[0.0]], [[0.0]], [[h12]])
    rho = BlockDensityMatrix([[p1]], [[1 - p1]], [[r12]])
    return h, rho


def trace_oracle(h12, rho12):
    # Tr(h12 rho12^dagger) = sum_ij h12[i, j] conj(rho12[i, j])
    d = h12.shape[0]
    s = 0j
    for i in range(d):
        for j in range(d):
            s += h12[i, j] * np.conj(rho12[i, j])
    return 2.0 * s.imag


class TestRate:
    def test_real_coupling_gives_zero(self):
        h, rho = scalar_blocks(0.2, 0.3)
        assert dp1_dt(h, rho) == 0.0

    def test_imaginary_coupling(self):
        # 2 Im(i g r) with g = 0.2, r = 0.3
        h, rho = scalar_blocks(0.2j, 0.3)
        assert dp1_dt(h, rho) == pytest.approx(0.12, abs=1e-15)

    def test_random_against_double_loop(self, rng):
        h = random_blocks(3, rng)
        rho = random_pure_blocks(3, rng, 0.6, 0.8)
        assert dp1_dt(h, rho) == pytest.approx(trace_oracle(h.h12, rho.rho12), abs=1e-14)

    def test_matches_finite_difference_of_exact_evolution(self, rng):
        h = random_blocks(2, rng)
        rho = random_pure_blocks(2, rng, 0.6, 0.8j)
        eps = 1e-5
        fwd = exact_evolution(h, rho, eps).p1
        back = exact_evolution(h, rho, -eps).p1
        assert dp1_dt(h, rho) == pytest.approx((fwd - back) / (2 * eps), abs=1e-8)

    @settings(max_examples=100, deadline=None)
    @given(st.integers(1, 4), st.integers(0, 2 ** 32 - 1))
    def test_antisymmetry(self, d, seed):
        r = np.random.default_rng(seed)
        h = random_blocks(d, r)
        rho = random_pure_blocks(d, r, r.uniform(0.1, 1.0), r.uniform(0.1, 1.0))
        a, b = dp1_dt(h, rho), dp2_dt(h, rho)
        assert abs(a + b) <= 1e-15 * max(1.0, abs(a))

    def test_dimension_mismatch(self, rng):
        h = random_blocks(2, rng)
        rho = random_pure_blocks(3, rng, 0.6, 0.8)
        with pytest.raises(InvariantViolation, match="dimension"):
            dp1_dt(h, rho)
        with pytest.raises(InvariantViolation, match="dimension"):
            evolve_blocks(h, rho, 1.0, 1e-3)


class TestAssemble:
    def test_zero(self):
        z = np.zeros((2, 2))
        assert np.array_equal(assemble_full(HamiltonianBlocks(z, z, z)), np.zeros((4, 4)))

    def test_scalar(self):
        h = HamiltonianBlocks([[1.0]], [[2.0]], [[1j]])
        assert np.array_equal(assemble_full(h), np.array([[1, 1j], [-1j, 2]]))

    def test_hermitian(self, rng):
        m = assemble_full(random_blocks(4, rng))
        assert np.max(np.abs(m - m.conj().T)) <= 1e-12


def frob(a, b):
    return max(np.linalg.norm(a.rho1 - b.rho1), np.linalg.norm(a.rho2 - b.rho2),
               np.linalg.norm(a.rho12 - b.rho12))


class TestEvolve:
    def test_decoupled_traces_constant(self, rng):
        d = 3
        h = HamiltonianBlocks(random_blocks(d, rng).h1, random_blocks(d, rng).h2, np.zeros((d, d)))
        rho = random_pure_blocks(d, rng, 0.6, 0.8)
        tr = evolve_blocks(h, rho, 10.0, 1e-3, record_every=100)
        assert np.max(np.abs(tr.p1 - tr.p1[0])) < 1e-10
        assert np.max(np.abs(tr.p2 - tr.p2[0])) < 1e-10

    def test_rabi(self):
        # |c1|^2 cos^2(gt) + |c2|^2 sin^2(gt) for real c1, c2 and real g
        g, c1, c2 = 0.7, 0.6, 0.8
        h = HamiltonianBlocks([[0.0]], [[0.0]], [[g]])
        rho = BlockDensityMatrix.from_pure(c1, c2, [1.0], [1.0])
        tr = evolve_blocks(h, rho, 5.0, 1e-3, record_every=500)
        u = [expm(-1j * t * np.array([[0, g], [g, 0]])) for t in tr.t]
        psi = np.array([c1, c2])
        want = np.array([abs((m @ psi)[0]) ** 2 for m in u])
        assert np.max(np.abs(tr.p1 - want)) < 1e-10
        closed = c1 ** 2 * np.cos(g * tr.t) ** 2 + c2 ** 2 * np.sin(g * tr.t) ** 2
        assert np.max(np.abs(tr.p1 - closed)) < 1e-10

    @pytest.mark.parametrize("d", [1, 2, 3, 4])
    def test_oracle_equivalence(self, d, rng):
        h = random_blocks(d, rng)
        rho = random_pure_blocks(d, rng, 0.6, 0.8j)
        tr = evolve_blocks(h, rho, 10.0, 1e-3, record_every=10000)
        assert tr.t[-1] == 10.0
        assert frob(tr.final, exact_evolution(h, rho, 10.0)) < 1e-6

    def test_isolated_eigenvalues_constant(self, rng):
        d = 3
        h = HamiltonianBlocks(random_blocks(d, rng).h1, random_blocks(d, rng).h2, np.zeros((d, d)))
        a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        r1 = a @ a.conj().T
        r1 = 0.4 * r1 / np.trace(r1).real
        r2 = np.diag([0.6, 0.0, 0.0]).astype(complex)
        rho = BlockDensityMatrix(r1, r2, np.zeros((d, d)))
        tr = evolve_blocks(h, rho, 5.0, 1e-3, record_every=1000)
        ev0 = np.linalg.eigvalsh(rho.rho1)
        for s in tr.states:
            assert np.max(np.abs(np.linalg.eigvalsh(s.rho1) - ev0)) < 1e-9
            assert np.array_equal(s.rho12, np.zeros((d, d)))

    def test_long_run_defects(self, rng):
        h = random_blocks(2, rng)
        rho = random_pure_blocks(2, rng, 0.6, 0.8)
        tr = evolve_blocks(h, rho, 10.0, 1e-3, record_every=100)
        assert len(tr.t) == 101
        assert tr.herm_defect.max() <= 1e-9
        assert tr.trace_defect.max() <= 1e-9
        assert min(min_eigenvalues(tr.final)) > -1e-9

    def test_zero_block_stays_zero(self, rng):
        # rho2 = 0 and rho12 = 0 with h12 = 0: channel 2 is never populated
        d = 2
        hb = random_blocks(d, rng)
        h = HamiltonianBlocks(hb.h1, hb.h2, np.zeros((d, d)))
        rho = BlockDensityMatrix.from_pure(1.0, 0.0, [1, 1j], [1, 0])
        tr = evolve_blocks(h, rho, 1.0, 1e-3, record_every=100)
        for s in tr.states:
            assert np.all(s.rho2 == 0) and np.all(s.rho12 == 0)
        assert np.all(tr.p2 == 0.0)

    def test_zero_steps(self, rng):
        rho = random_pure_blocks(2, rng, 0.6, 0.8)
        tr = evolve_blocks(random_blocks(2, rng), rho, 0.0, 1e-3)
        assert tr.t.tolist() == [0.0] and tr.final is rho

    def test_blow_up_aborts_with_step(self, rng):
        h = random_blocks(2, rng, norm=1000.0)
        rho = random_pure_blocks(2, rng, 0.6, 0.8)
        with pytest.raises(InvariantViolation) as info:
            evolve_blocks(h, rho, 10.0, 0.5)
        err = info.value
        assert err.step is not None and err.step >= 1
        assert err.invariant.startswith("evolve_blocks.")
        assert err.magnitude is None or not err.magnitude <= 1e-9

    def test_bad_dt(self, rng):
        rho = random_pure_blocks(2, rng, 0.6, 0.8)
        with pytest.raises(ValueError):
            evolve_blocks(random_blocks(2, rng), rho, 1.0, 0.0)

    def test_coupling_envelope_zero_freezes(self, rng):
        h = random_blocks(2, rng)
        d = HamiltonianBlocks(h.h1, h.h2, np.zeros((2, 2)))
        rho = random_pure_blocks(2, rng, 0.6, 0.8)
        a = evolve_blocks(h, rho, 1.0, 1e-3, coupling_envelope=lambda t: 0.0)
        b = evolve_blocks(d, rho, 1.0, 1e-3)
        assert np.array_equal(a.p1, b.p1)
