"""Two-way ranging protocol, clock model, and range calibration."""
import math

import numpy as np
import pytest

from uip.errors import CalibrationError, ContractViolationError
from uip.rng import derive_rng
from uip.uwb import (
    N_NODES,
    SPEED_OF_LIGHT,
    CalibrationResult,
    NodeClock,
    apply_calibration,
    ideal_clocks,
    occlusion_noise_sigma,
    ransac_affine_calibrate,
    resolve_tof,
    run_ranging_round,
    sample_clocks,
    simulate_stream,
)

PAIRS = [(i, j) for i in range(N_NODES) for j in range(i + 1, N_NODES)]


def body_positions(rng=None) -> np.ndarray:
    pos = np.array(
        [
            [0.0, 0.0, 1.0],
            [0.1, 0.6, 0.9],
            [0.1, -0.6, 0.9],
            [0.05, 0.1, 0.5],
            [0.05, -0.1, 0.5],
            [0.0, 0.0, 1.6],
        ]
    )
    if rng is not None:
        pos = pos + rng.normal(0.0, 0.05, pos.shape)
    return pos


def truth_matrix(pos: np.ndarray) -> np.ndarray:
    return np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=2)


def test_occlusion_sigma_threshold():
    assert occlusion_noise_sigma(0.0) == 0.051
    assert occlusion_noise_sigma(0.19) == 0.051
    assert occlusion_noise_sigma(0.2) == 0.083
    assert occlusion_noise_sigma(1.0) == 0.083
    assert occlusion_noise_sigma(0.5, 0.01, 0.07) == 0.07
    with pytest.raises(ContractViolationError):
        occlusion_noise_sigma(1.2)


def test_resolve_tof_oracle():
    # One-way flight of 10 ns with a 2 us reply turnaround at the responder.
    tof = resolve_tof(0.0, 2.01e-6, 1.0e-8, 2.0e-6)
    assert math.isclose(tof, 1.0e-8, rel_tol=1e-12)


def test_clean_round_resolves_geometry():
    pos = body_positions()
    rnd = run_ranging_round(pos, ideal_clocks())
    truth = truth_matrix(pos)
    assert rnd.valid[~np.eye(N_NODES, dtype=bool)].all()
    assert np.allclose(rnd.distances, truth, atol=1e-9)
    assert np.array_equal(rnd.distances, rnd.distances.T)


def test_clock_offsets_cancel_exactly():
    pos = body_positions()
    clocks = tuple(
        NodeClock(offset=float(o), skew_ppm=0.0, antenna_delay=0.0)
        for o in (3.0, -12.5, 0.001, 7.7, -0.4, 123.0)
    )
    rnd = run_ranging_round(pos, clocks)
    assert np.allclose(rnd.distances, truth_matrix(pos), atol=1e-6)


def test_antenna_delay_bias_is_sum_of_delays():
    pos = body_positions()
    delays = (1e-9, 2e-9, 0.5e-9, 3e-9, 1.5e-9, 2.5e-9)
    clocks = tuple(NodeClock(offset=0.0, skew_ppm=0.0, antenna_delay=d) for d in delays)
    rnd = run_ranging_round(pos, clocks)
    truth = truth_matrix(pos)
    for i, j in PAIRS:
        want_bias = SPEED_OF_LIGHT * (delays[i] + delays[j])
        assert math.isclose(rnd.distances[i, j] - truth[i, j], want_bias, rel_tol=1e-6)


def test_skew_error_stays_bounded():
    pos = body_positions()
    skew_ppm = 20.0  # far above spec hardware, still small over a slot
    clocks = tuple(NodeClock(offset=0.0, skew_ppm=skew_ppm, antenna_delay=0.0) for _ in range(6))
    rnd = run_ranging_round(pos, clocks)
    err = np.abs(rnd.distances - truth_matrix(pos))
    # bound: skew * max reply delay (5 slots of 2 ms) * c
    assert err.max() < skew_ppm * 1e-6 * 0.01 * SPEED_OF_LIGHT + 1e-9


def test_noise_sigma_comes_out_as_configured():
    pos = body_positions()
    rng = derive_rng(6, "uwb", "noise")
    sigma = 0.05
    samples = []
    for _ in range(3000):
        rnd = run_ranging_round(pos, ideal_clocks(), rng, sigma_fn=lambda i, j: sigma)
        samples.append(rnd.distances[0, 1])
    err = np.array(samples) - truth_matrix(pos)[0, 1]
    assert abs(err.std() - sigma) < 0.004
    assert abs(err.mean()) < 0.004


def test_drops_invalidate_only_affected_pairs():
    pos = body_positions()
    rng = derive_rng(6, "uwb", "drop")
    seen_partial = False
    for _ in range(40):
        rnd = run_ranging_round(pos, ideal_clocks(), rng, drop_prob=0.3)
        off_diag = ~np.eye(N_NODES, dtype=bool)
        n_valid = rnd.valid[off_diag].sum()
        if 0 < n_valid < 30:
            seen_partial = True
        truth = truth_matrix(pos)
        for i, j in PAIRS:
            if rnd.valid[i, j]:
                assert abs(rnd.distances[i, j] - truth[i, j]) < 1e-9
            else:
                assert rnd.distances[i, j] == 0.0
    assert seen_partial


def test_drop_prob_one_kills_everything():
    rnd = run_ranging_round(
        body_positions(), ideal_clocks(), derive_rng(6, "uwb", "all"), drop_prob=1.0
    )
    assert not rnd.valid.any()


def test_stream_round_count_and_times():
    stream = simulate_stream(lambda t: body_positions(), ideal_clocks(), 10.0)
    assert stream.times.shape[0] == 250
    assert np.allclose(np.diff(stream.times), 0.04, atol=1e-12)
    stream = simulate_stream(lambda t: body_positions(), ideal_clocks(), 1.0)
    assert stream.times.shape[0] == 25


def test_stream_positions_fn_sees_round_times():
    seen = []

    def feed(t):
        seen.append(t)
        return body_positions()

    simulate_stream(feed, ideal_clocks(), 0.2)
    assert seen == [0.0, 0.04, 0.08, 0.12, 0.16]


def test_sample_clocks_deterministic_and_plausible():
    a = sample_clocks(derive_rng(6, "uwb", "clk"))
    b = sample_clocks(derive_rng(6, "uwb", "clk"))
    assert len(a) == N_NODES
    for ca, cb in zip(a, b):
        assert (ca.offset, ca.skew_ppm, ca.antenna_delay) == (
            cb.offset,
            cb.skew_ppm,
            cb.antenna_delay,
        )
        assert abs(ca.skew_ppm) < 0.1
        assert 0.0 < ca.antenna_delay < 1e-9


def test_ransac_recovers_affine_under_outliers():
    rng = derive_rng(6, "uwb", "ransac")
    truth = rng.uniform(0.3, 2.0, 400)
    raw = 1.02 * truth + 0.35 + rng.normal(0.0, 0.01, truth.size)
    outliers = rng.uniform(size=truth.size) < 0.1
    raw[outliers] += rng.uniform(0.5, 2.0, int(outliers.sum()))
    cal = ransac_affine_calibrate(raw, truth, derive_rng(6, "uwb", "fit"))
    assert abs(cal.scale - 1.02) < 0.005
    assert abs(cal.bias - 0.35) < 0.02
    assert cal.inliers >= int(0.8 * truth.size)


def test_apply_calibration_inverts_affine():
    cal = CalibrationResult(scale=1.02, bias=0.35, inliers=9)
    assert math.isclose(apply_calibration(2.39, cal), 2.0, rel_tol=1e-12)
    arr = apply_calibration(np.array([0.35, 1.37]), cal)
    assert np.allclose(arr, [0.0, 1.0], atol=1e-12)


def test_ransac_rejects_degenerate_input():
    with pytest.raises(CalibrationError):
        ransac_affine_calibrate(np.array([1.0]), np.array([1.0]), derive_rng(6, "uwb", "d"))
