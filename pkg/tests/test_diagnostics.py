import numpy as np
import pytest

from tailmix.diagnostics import default_grid, mean_residual_life, mrl_slope, threshold_stability
from tailmix.distributions import GpdParams, sample
from tailmix.errors import InvalidParameterError


def test_mrl_small_example():
    pts, skipped = mean_residual_life([1.0, 2.0, 3.0], [1.5])
    assert pts[0].mean_excess == 1.0 and pts[0].n_exceed == 2
    assert not skipped


def test_mrl_flags_thin_thresholds():
    pts, skipped = mean_residual_life([1.0, 2.0, 3.0], [0.5, 2.5, 5.0])
    assert [p.u for p in pts] == [0.5]
    assert [s.u for s in skipped] == [2.5, 5.0]


def test_mrl_exponential_is_flat():
    x = np.random.default_rng(0).exponential(size=100_000)
    pts, _ = mean_residual_life(x, [0.0, 0.5, 1.0, 2.0])
    for p in pts:
        assert abs(p.mean_excess - 1.0) <= 0.05
        assert p.ci_low <= p.mean_excess <= p.ci_high


def test_mrl_gpd_slope():
    x = sample(GpdParams(0, 1, 0.2), 100_000, 1)
    pts, _ = mean_residual_life(x, np.linspace(0, 2, 21))
    assert abs(mrl_slope(pts) - 0.25) <= 0.1


def test_mrl_shift_moves_axis_only():
    x = np.random.default_rng(2).exponential(size=500)
    grid = np.quantile(x, [0.1, 0.5, 0.8])
    a, _ = mean_residual_life(x, grid)
    b, _ = mean_residual_life(x + 10.0, grid + 10.0)
    for p, q in zip(a, b):
        assert q.u == pytest.approx(p.u + 10.0)
        assert q.mean_excess == pytest.approx(p.mean_excess, rel=1e-12)
        assert q.n_exceed == p.n_exceed


def test_default_grid_shape():
    g = default_grid(np.arange(1000.0))
    assert g.size == 40 and g[0] == 0.0 and np.all(np.diff(g) > 0)


def test_stability_on_exact_gpd():
    x = sample(GpdParams(0, 1, 0.2), 100_000, 3)
    pts, skipped = threshold_stability(x, np.linspace(0, 1, 11))
    assert not skipped
    xi = [p.xi_hat for p in pts]
    mod = [p.modified_scale for p in pts]
    assert max(xi) - min(xi) < 0.1
    assert max(mod) - min(mod) < 0.15
    for p in pts:
        assert p.modified_scale == p.sigma_hat - p.u * p.xi_hat
        assert p.xi_ci_low <= p.xi_hat <= p.xi_ci_high
        assert p.scale_ci_low <= p.modified_scale <= p.scale_ci_high
    assert [p.u for p in pts] == sorted(p.u for p in pts)


def test_stability_flags_thin_threshold():
    x = np.concatenate([np.random.default_rng(4).exponential(size=200), [50.0, 51.0, 52.0]])
    pts, skipped = threshold_stability(x, [0.5, 20.0], min_exceedances=10)
    assert [p.u for p in pts] == [0.5]
    assert skipped[0].u == 20.0


def test_diagnostics_reject_empty():
    with pytest.raises(InvalidParameterError):
        mean_residual_life([], [0.0])
