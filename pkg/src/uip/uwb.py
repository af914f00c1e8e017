"""Broadcast two-way ranging over six body-worn nodes, plus calibration.

One ranging round: the initiator (node 0) broadcasts a request, then each
responder transmits in its fixed TDMA slot. Every node timestamps every
transmission it hears, and responders overhear each other, so a single
round resolves all 15 pairs: for i < j, node j's reply answers node i's
earlier transmission and

    tof_ij = 0.5 * (t_i_received - t_i_sent + t_j_received - t_j_sent)

Send/receive stamps are read through each node's own clock (offset +
multiplicative skew). Offsets cancel exactly in the formula; skew leaves
an error bounded by skew * reply-delay * c; antenna delays add a constant
range bias that the affine calibration removes.

Gaussian range noise is injected as receive-timestamp jitter with sigma
sigma_m * sqrt(2) / c per message, which makes the resolved pair distance
noise come out at exactly the configured sigma_m.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CalibrationError, ContractViolationError

SPEED_OF_LIGHT = 299_792_458.0
N_NODES = 6
ROUND_PERIOD_S = 0.04  # 25 Hz round rate
SLOT_S = 0.002  # TDMA reply slot spacing inside a round

SIGMA_LOS = 0.051  # m, line-of-sight range noise
SIGMA_NLOS = 0.083  # m, occluded range noise
OCCLUSION_THRESHOLD = 0.2  # occlusion ratio at or above which a pair counts as NLOS


def occlusion_noise_sigma(
    c: float,
    sigma_los: float = SIGMA_LOS,
    sigma_nlos: float = SIGMA_NLOS,
    threshold: float = OCCLUSION_THRESHOLD,
) -> float:
    """Range noise sigma for a pair whose sight line has occlusion ratio c."""
    if not 0.0 <= c <= 1.0:
        raise ContractViolationError(f"occlusion ratio {c} outside [0, 1]")
    return sigma_nlos if c >= threshold else sigma_los


@dataclass(frozen=True, slots=True)
class NodeClock:
    """Free-running node clock: local(t) = (1 + skew_ppm * 1e-6) * t + offset."""

    skew_ppm: float = 0.0
    offset: float = 0.0
    antenna_delay: float = 0.0  # seconds, applied symmetrically on tx and rx

    def __post_init__(self):
        if abs(self.skew_ppm) > 50.0:
            raise ContractViolationError(f"clock skew {self.skew_ppm} ppm outside +-50 ppm")
        if self.antenna_delay < 0.0:
            raise ContractViolationError("antenna delay must be non-negative")

    def local(self, t: float) -> float:
        return (1.0 + self.skew_ppm * 1e-6) * t + self.offset


def ideal_clocks() -> tuple[NodeClock, ...]:
    return tuple(NodeClock() for _ in range(N_NODES))


def sample_clocks(
    rng: np.random.Generator,
    skew_ppm_sigma: float = 0.01,
    offset_sigma: float = 1.0,
    antenna_delay_ns: float = 0.3,
    antenna_delay_jitter_ns: float = 0.02,
) -> tuple[NodeClock, ...]:
    """Per-node clocks; default skews model residual error after crystal trim."""
    clocks = []
    for _ in range(N_NODES):
        delay = max(0.0, antenna_delay_ns + rng.normal(0.0, antenna_delay_jitter_ns)) * 1e-9
        clocks.append(
            NodeClock(
                skew_ppm=float(rng.normal(0.0, skew_ppm_sigma)),
                offset=float(rng.normal(0.0, offset_sigma)),
                antenna_delay=delay,
            )
        )
    return tuple(clocks)


def resolve_tof(t_i_sent: float, t_i_received: float, t_j_received: float, t_j_sent: float) -> float:
    """Two-way time of flight from the four local timestamps of a pair."""
    return 0.5 * (t_i_received - t_i_sent + t_j_received - t_j_sent)


@dataclass(frozen=True)
class RangingRound:
    """All timestamps and resolved distances of one broadcast round."""

    index: int
    t_start: float
    initiator: int
    send_ts: np.ndarray  # (6,) local send stamps
    recv_ts: np.ndarray  # (6, 6) recv_ts[r, s] = r's local stamp of s's message (nan = dropped)
    distances: np.ndarray  # (6, 6) resolved pair distances, symmetric, 0 on diagonal
    valid: np.ndarray  # (6, 6) bool


def run_ranging_round(
    positions: np.ndarray,
    clocks: tuple[NodeClock, ...],
    rng: np.random.Generator | None = None,
    *,
    index: int = 0,
    t_start: float = 0.0,
    initiator: int = 0,
    drop_prob: float = 0.0,
    sigma_fn=None,
    slot_s: float = SLOT_S,
) -> RangingRound:
    """Simulate one round at frozen node positions.

    sigma_fn(i, j) -> range noise sigma in meters for the unordered pair;
    None means noise-free. Dropped receptions (probability drop_prob each)
    invalidate exactly the pairs that needed them.
    """
    positions = np.asarray(positions, dtype=float)
    if positions.shape != (N_NODES, 3):
        raise ContractViolationError(f"expected positions ({N_NODES}, 3), got {positions.shape}")
    order = [initiator] + [k for k in range(N_NODES) if k != initiator]
    tx_time = {node: t_start + slot * slot_s for slot, node in enumerate(order)}

    send_ts = np.zeros(N_NODES)
    recv_ts = np.full((N_NODES, N_NODES), np.nan)
    for s in range(N_NODES):
        send_ts[s] = clocks[s].local(tx_time[s])
    for s in range(N_NODES):
        emit = tx_time[s] + clocks[s].antenna_delay
        for r in range(N_NODES):
            if r == s:
                continue
            if rng is not None and drop_prob > 0.0 and rng.random() < drop_prob:
                continue
            dist = float(np.linalg.norm(positions[r] - positions[s]))
            arrival = emit + dist / SPEED_OF_LIGHT + clocks[r].antenna_delay
            stamp = clocks[r].local(arrival)
            if sigma_fn is not None:
                sigma_m = sigma_fn(min(r, s), max(r, s))
                if sigma_m > 0.0:
                    if rng is None:
                        raise ContractViolationError("noise requested without an rng")
                    stamp += rng.normal(0.0, sigma_m * math.sqrt(2.0) / SPEED_OF_LIGHT)
            recv_ts[r, s] = stamp

    distances = np.zeros((N_NODES, N_NODES))
    valid = np.zeros((N_NODES, N_NODES), dtype=bool)
    slot_of = {node: k for k, node in enumerate(order)}
    for i in range(N_NODES):
        for j in range(i + 1, N_NODES):
            a, b = (i, j) if slot_of[i] < slot_of[j] else (j, i)  # a transmitted first
            if math.isnan(recv_ts[b, a]) or math.isnan(recv_ts[a, b]):
                continue
            tof = resolve_tof(send_ts[a], recv_ts[a, b], recv_ts[b, a], send_ts[b])
            distances[i, j] = distances[j, i] = tof * SPEED_OF_LIGHT
            valid[i, j] = valid[j, i] = True
    return RangingRound(index, t_start, initiator, send_ts, recv_ts, distances, valid)


@dataclass
class RawDistanceStream:
    """Per-round resolved distances at the round rate."""

    times: np.ndarray  # (R,) round start times
    distances: np.ndarray  # (R, 6, 6)
    valid: np.ndarray  # (R, 6, 6) bool


def simulate_stream(
    positions_fn,
    clocks: tuple[NodeClock, ...],
    duration_s: float,
    rng: np.random.Generator | None = None,
    *,
    period_s: float = ROUND_PERIOD_S,
    drop_prob: float = 0.0,
    sigma_fn_for_round=None,
    slot_s: float = SLOT_S,
) -> RawDistanceStream:
    """Rounds every period_s for duration_s; positions_fn(t) -> (6, 3).

    sigma_fn_for_round(round_index, t) may return a per-round sigma_fn or
    None for noise-free operation.
    """
    n_rounds = int(math.ceil(duration_s / period_s - 1e-9))
    times = np.zeros(n_rounds)
    dists = np.zeros((n_rounds, N_NODES, N_NODES))
    valid = np.zeros((n_rounds, N_NODES, N_NODES), dtype=bool)
    for k in range(n_rounds):
        t0 = k * period_s
        sigma_fn = sigma_fn_for_round(k, t0) if sigma_fn_for_round is not None else None
        rnd = run_ranging_round(
            positions_fn(t0),
            clocks,
            rng,
            index=k,
            t_start=t0,
            drop_prob=drop_prob,
            sigma_fn=sigma_fn,
            slot_s=slot_s,
        )
        times[k] = t0
        dists[k] = rnd.distances
        valid[k] = rnd.valid
    return RawDistanceStream(times, dists, valid)


@dataclass(frozen=True)
class CalibrationResult:
    """Affine corruption model raw ~ scale * truth + bias, with inlier count."""

    scale: float
    bias: float
    inliers: int


def ransac_affine_calibrate(
    raw: np.ndarray,
    truth: np.ndarray,
    rng: np.random.Generator,
    *,
    iters: int = 200,
    tol: float = 0.1,
) -> CalibrationResult:
    """RANSAC fit of raw = scale * truth + bias, refined on the inlier set.

    Deterministic for a fixed rng state. Raises CalibrationError with
    fewer than 2 samples or when every sample pair is degenerate.
    """
    raw = np.asarray(raw, dtype=float).ravel()
    truth = np.asarray(truth, dtype=float).ravel()
    if raw.shape != truth.shape:
        raise ContractViolationError("raw and truth must have equal length")
    n = raw.size
    if n < 2:
        raise CalibrationError(f"need at least 2 samples to calibrate, got {n}")
    best_inliers: np.ndarray | None = None
    best_count = 0
    for _ in range(iters):
        i, j = rng.integers(0, n, size=2)
        if i == j or abs(truth[i] - truth[j]) < 1e-9:
            continue
        scale = (raw[i] - raw[j]) / (truth[i] - truth[j])
        bias = raw[i] - scale * truth[i]
        inliers = np.abs(raw - (scale * truth + bias)) <= tol
        count = int(inliers.sum())
        if count > best_count:
            best_count = count
            best_inliers = inliers
    if best_inliers is None or best_count < 2:
        raise CalibrationError("RANSAC found no non-degenerate sample pair")
    a = np.column_stack([truth[best_inliers], np.ones(best_count)])
    coef, *_ = np.linalg.lstsq(a, raw[best_inliers], rcond=None)
    return CalibrationResult(scale=float(coef[0]), bias=float(coef[1]), inliers=best_count)


def apply_calibration(raw, cal: CalibrationResult):
    """Corrected range(s): invert the fitted corruption model."""
    if cal.scale == 0.0:
        raise CalibrationError("degenerate calibration scale 0")
    return (np.asarray(raw, dtype=float) - cal.bias) / cal.scale
