import math

import numpy as np
import pytest

from collapselab import epr
from collapselab.epr import CHANNELS, EprConfig, epr_run, independence_check
from collapselab.model import InvariantViolation, make_channel_state
from collapselab.reduction import two_proportion_z


def test_channel_order():
    assert CHANNELS == ("H'V''", "V'H''", "H'H''", "V'V''")
    p = EprConfig().initial_state()
    assert p.probs[2] == 0.0 and p.probs[3] == 0.0
    assert p.probs[:2] == pytest.approx([0.5, 0.5], abs=1e-15)


def test_default_run():
    res = epr_run(EprConfig(num_runs=10_000, seed=1))
    assert res.counts[2] == 0 and res.counts[3] == 0
    assert res.unabsorbed == 0
    assert np.all(np.abs(res.frequencies[:2] - 0.5) <= 3 * res.stderr[:2])
    table = res.contingency()
    assert table[0, 0] == 0 and table[1, 1] == 0
    assert table.sum() == 10_000
    # H' marginal follows the Born weight of H'V''
    se = math.sqrt(0.25 / 10_000)
    assert abs(res.marginal_h_prime() - 0.5) <= 3 * se


def test_no_superposition():
    res = epr_run(EprConfig(amplitudes=(1, 0), num_runs=200))
    assert res.counts.tolist() == [200, 0, 0, 0]
    assert np.all(res.batch.absorption_times == 0.0)


def test_complex_amplitudes():
    res = epr_run(EprConfig(amplitudes=(0.6, 0.8j), num_runs=10_000, seed=5, dt=1e-3))
    sigma = math.sqrt(0.36 * 0.64 / 10_000)
    assert abs(res.frequencies[0] - 0.36) <= 3 * sigma


def test_noise_locality():
    # only the summed intensity enters the outcome statistics
    a = epr_run(EprConfig(amplitudes=(0.6, 0.8), intensities=(1, 1), num_runs=10_000, seed=2, dt=1e-3))
    b = epr_run(EprConfig(amplitudes=(0.6, 0.8), intensities=(2, 0), num_runs=10_000, seed=3, dt=1e-3))
    assert abs(two_proportion_z(a.counts[0], 10_000, b.counts[0], 10_000)) < 3.0
    ta, tb = a.batch.absorption_times, b.batch.absorption_times
    assert abs(ta.mean() - tb.mean()) < 4 * math.hypot(ta.std() / 100, tb.std() / 100)


def test_forbidden_hit_is_fatal(monkeypatch):
    real = epr.reduction.run_batch

    def tampered(*args, **kw):
        batch = real(*args, **kw)
        batch.outcomes[7] = 3
        return batch

    monkeypatch.setattr(epr.reduction, "run_batch", tampered)
    with pytest.raises(InvariantViolation, match="forbidden") as info:
        epr_run(EprConfig(num_runs=100, dt=1e-3))
    assert "seed" in str(info.value) and "V'V''" in str(info.value)


class TestIndependence:
    def test_million_samples(self):
        rep = independence_check(EprConfig(), 1_000_000, seed=4)
        assert rep.bound == pytest.approx(4e-3)
        assert np.all(np.abs(rep.correlation) < rep.bound)
        assert rep.correlation[2] == 0.0 and rep.correlation[3] == 0.0

    def test_general_state(self):
        state = make_channel_state([0.4, 0.3, 0.2, 0.1])
        rep = independence_check(EprConfig(), 100_000, state=state, seed=6)
        assert np.all(np.abs(rep.correlation) < rep.bound)

    def test_silent_source(self):
        rep = independence_check(EprConfig(intensities=(1.0, 0.0)), 10_000)
        assert np.all(rep.correlation == 0.0)
        assert np.all(rep.var_second == 0.0)

    def test_variances_add(self):
        rep = independence_check(EprConfig(intensities=(1.0, 0.5)), 200_000, seed=8)
        live = slice(0, 2)
        assert rep.var_sum[live] == pytest.approx(rep.var_first[live] + rep.var_second[live], rel=0.05)
        # each source: 2 * lambda * p1 p2 * dt
        assert rep.var_first[0] == pytest.approx(2 * 1.0 * 0.25 * 1e-4, rel=0.05)
        assert rep.var_second[0] == pytest.approx(2 * 0.5 * 0.25 * 1e-4, rel=0.05)

    def test_min_samples(self):
        with pytest.raises(ValueError):
            independence_check(EprConfig(), 9_999)


@pytest.mark.parametrize("kw,name", [
    (dict(amplitudes=(1, 1)), "amplitudes"),
    (dict(amplitudes=(1,)), "amplitudes"),
    (dict(intensities=(-1, 2)), "intensities"),
    (dict(intensities=(0, 0)), "intensities"),
    (dict(dt=0), "dt"),
])
def test_config_invariants(kw, name):
    with pytest.raises(InvariantViolation, match=name):
        EprConfig(**kw)
