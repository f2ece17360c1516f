import numpy as np
import pytest

from sdwnsim.errors import ConfigError
from sdwnsim.model import (AccessPoint, ChannelParams,
                           DeploymentParams, LoadSplit, Region, assign_slices,
                           channel_gain, gain_matrix, generate_edge_weighted_users,
                           generate_ppp_users, wlan_phy_rate, wlan_rate_matrix)

REGION = Region(200.0, 200.0)
DEPLOY = DeploymentParams(lambda_mean=5.0)


def test_region_validation():
    with pytest.raises(ConfigError):
        Region(0.0, 10.0)
    with pytest.raises(ConfigError):
        Region(10.0, -1.0)


def test_channel_params_validation():
    with pytest.raises(ConfigError):
        ChannelParams(pathloss_exponent=2.0)
    with pytest.raises(ConfigError):
        ChannelParams(noise_power=0.0)
    with pytest.raises(ConfigError):
        ChannelParams(fading="nakagami")


def test_load_split_bounds():
    with pytest.raises(ConfigError):
        LoadSplit(rho1=1.5)
    with pytest.raises(ConfigError):
        DeploymentParams(lambda_mean=0.0)


def test_ppp_mean_count():
    # lambda_mean = 5 over 4 APs: sample mean within 3 standard errors of 20
    draws = 10_000
    counts = [len(generate_ppp_users(REGION, DEPLOY, 4, seed)) for seed in range(draws)]
    mean = np.mean(counts)
    se = np.sqrt(20.0 / draws)
    assert abs(mean - 20.0) < 3 * se


def test_ppp_determinism():
    a = generate_ppp_users(REGION, DEPLOY, 4, seed=42)
    b = generate_ppp_users(REGION, DEPLOY, 4, seed=42)
    assert np.array_equal(a, b)


def test_ppp_empty_frequency_matches_pmf():
    # lambda = 0.001: P(N = 0) = exp(-0.001); empirical frequency within 1%
    deploy = DeploymentParams(lambda_mean=0.001)
    draws = 100_000
    empty = sum(len(generate_ppp_users(REGION, deploy, 1, seed)) == 0
                for seed in range(draws))
    assert abs(empty / draws - np.exp(-0.001)) < 0.01


def test_ppp_positions_inside_region():
    for seed in range(50):
        pts = generate_ppp_users(REGION, DEPLOY, 4, seed)
        assert np.all(pts >= 0)
        assert np.all(pts[:, 0] <= REGION.width)
        assert np.all(pts[:, 1] <= REGION.height)


def test_seeds_differ():
    distinct = 0
    for seed in range(100):
        a = generate_ppp_users(REGION, DEPLOY, 4, seed)
        b = generate_ppp_users(REGION, DEPLOY, 4, seed + 1000)
        if a.shape != b.shape or not np.array_equal(a, b):
            distinct += 1
    assert distinct >= 99


def test_assign_slices_degenerate():
    assert np.all(assign_slices(100, LoadSplit(1.0), seed=1) == 1)
    assert np.all(assign_slices(100, LoadSplit(0.0), seed=1) == 2)


def test_assign_slices_concentration():
    ids = assign_slices(10_000, LoadSplit(0.5), seed=7)
    frac = np.mean(ids == 1)
    assert 0.48 <= frac <= 0.52


def test_assign_slices_determinism():
    a = assign_slices(500, LoadSplit(0.3), seed=9)
    b = assign_slices(500, LoadSplit(0.3), seed=9)
    assert np.array_equal(a, b)


def test_channel_gain_reference_distance():
    ap = AccessPoint(id=0, position=(0.0, 0.0))
    params = ChannelParams(reference_gain=2.0)
    assert channel_gain((1.0, 0.0), ap, params) == pytest.approx(2.0)
    # clamping below d0
    assert channel_gain((0.0, 0.0), ap, params) == pytest.approx(2.0)


def test_channel_gain_power_law():
    ap = AccessPoint(id=0, position=(0.0, 0.0))
    params = ChannelParams(pathloss_exponent=3.5)
    assert channel_gain((2.0, 0.0), ap, params) == pytest.approx(2 ** -3.5)


def test_channel_gain_monotone():
    ap = AccessPoint(id=0, position=(0.0, 0.0))
    params = ChannelParams()
    dists = np.linspace(1.0, 300.0, 80)
    gains = [channel_gain((d, 0.0), ap, params) for d in dists]
    assert all(g1 > g2 for g1, g2 in zip(gains, gains[1:]))


def test_gain_matrix_matches_scalar_path():
    aps = [AccessPoint(id=i, position=(50.0 * i, 20.0), channel_id=i) for i in range(3)]
    params = ChannelParams()
    pts = np.array([[10.0, 5.0], [120.0, 180.0]])
    g = gain_matrix(pts, aps, params)
    for i, p in enumerate(pts):
        for j, ap in enumerate(aps):
            assert g[i, j] == pytest.approx(channel_gain(p, ap, params))


def test_rayleigh_fading_mean():
    aps = [AccessPoint(id=0, position=(0.0, 0.0))]
    params = ChannelParams(fading="rayleigh")
    base = ChannelParams()
    pts = np.tile([[10.0, 0.0]], (20_000, 1))
    g = gain_matrix(pts, aps, params, fading_seed=3)
    g0 = gain_matrix(pts[:1], aps, base)[0, 0]
    assert np.mean(g / g0) == pytest.approx(1.0, abs=0.03)


def test_wlan_phy_rate_edges():
    assert wlan_phy_rate(0.0) == 0.0
    assert wlan_phy_rate(10 ** (4.9 / 10)) == 0.0           # below lowest threshold
    assert wlan_phy_rate(10 ** (40.0 / 10)) == 54.0          # saturation
    assert wlan_phy_rate(10 ** (5.0 / 10)) == 6.0            # exactly at threshold
    assert wlan_phy_rate(10 ** (15.0 / 10)) == 24.0


def test_wlan_phy_rate_monotone():
    snrs = np.logspace(-1, 4, 200)
    rates = [wlan_phy_rate(s) for s in snrs]
    assert all(r1 <= r2 for r1, r2 in zip(rates, rates[1:]))


def test_wlan_rate_matrix_consistency():
    aps = [AccessPoint(id=0, position=(0.0, 0.0), tx_power=0.25)]
    params = ChannelParams(noise_power=1e-11)
    pts = np.array([[30.0, 0.0], [500.0, 0.0]])
    g = gain_matrix(pts, aps, params)
    r = wlan_rate_matrix(g, aps, params)
    for i in range(2):
        assert r[i, 0] == wlan_phy_rate(g[i, 0] * 0.25 / 1e-11)


def test_build_users():
    from sdwnsim.model import build_users
    positions = np.array([[1.0, 2.0], [3.0, 4.0]])
    users = build_users(positions, np.array([1, 2]))
    assert users[0].id == 0 and users[0].slice_id == 1
    assert users[1].position == (3.0, 4.0)


def test_edge_weighted_deployment():
    aps = [AccessPoint(id=i, position=p, channel_id=i)
           for i, p in enumerate([(50.0, 50.0), (150.0, 50.0), (50.0, 150.0), (150.0, 150.0)])]
    pts = generate_edge_weighted_users(REGION, DeploymentParams(6.0), aps,
                                       edge_fraction=0.7, edge_threshold=0.8, seed=5)
    from sdwnsim.cellular import classify_cell_edge
    if len(pts):
        flags = classify_cell_edge(pts, aps, 0.8)
        # with 70% target and Poisson(24) users the edge share should dominate
        assert flags.mean() > 0.5
