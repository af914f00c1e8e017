"""Pose network forward passes on the autodiff tape.

Two branches estimate root-relative sensor positions per frame: a stacked
LSTM over concatenated orientation/acceleration features (temporal), and a
distance-attention graph layer stack over per-frame sensor distances
(spatial). An acceleration-gated blend fuses them, and a small decoder maps
the fused positions plus the raw features to joint rotations and foot
contacts.

Everything runs through one tape-based implementation; the public
functions wrap it for single frames or sequences and return plain arrays.
Batch layout: a batch is W windows of T frames, flattened to N = W*T
frame columns in window-major order. Sensor-vector blocks (positions,
accelerations) use sensor-major rows: row 3*s + k is coordinate k of
sensor s.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..autodiff import Ids, Tape
from ..errors import ConfigError, ContractViolationError, DataError
from ..skeleton import HEAD_SENSOR, N_SENSORS, PELVIS_SENSOR
from .params import PoseNetParams

# Minimum believable head-pelvis separation for distance normalization.
MIN_NORMALIZER_M = 0.01

# Pairs (i < j) in lexicographic order; shared with the ranging stack.
SENSOR_PAIRS: tuple[tuple[int, int], ...] = tuple(
    (i, j) for i in range(N_SENSORS) for j in range(i + 1, N_SENSORS)
)


@dataclass(frozen=True)
class ModelInput:
    """One frame of network input.

    r: per-sensor orientations, 6D representation, shape (6, 6)
    a: per-sensor world accelerations (gravity removed), m/s^2, shape (6, 3)
    d: inter-sensor distances, m, shape (6, 6), symmetric with zero diagonal
    valid: entry validity mask for d, shape (6, 6)
    """

    r: np.ndarray
    a: np.ndarray
    d: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float)
        a = np.asarray(self.a, dtype=float)
        d = np.asarray(self.d, dtype=float)
        v = np.asarray(self.valid, dtype=bool)
        if r.shape != (N_SENSORS, 6) or a.shape != (N_SENSORS, 3):
            raise ContractViolationError(
                f"bad input shapes r{r.shape} a{a.shape}"
            )
        if d.shape != (N_SENSORS, N_SENSORS) or v.shape != d.shape:
            raise ContractViolationError(f"bad distance shapes d{d.shape} valid{v.shape}")
        if not np.array_equal(d, d.T):
            raise ContractViolationError("distance matrix must be symmetric")
        if np.any(np.diag(d) != 0.0):
            raise ContractViolationError("distance matrix diagonal must be zero")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "valid", v)


@dataclass(frozen=True)
class PoseOutput:
    """Per-frame network output.

    p_t, p_s, p: temporal, spatial, and fused sensor positions relative to
    the pelvis sensor, m, shape (6, 3). rotations: local joint rotations in
    6D representation, shape (15, 6), not orthonormalized. contacts: foot
    contact probabilities (left, right), each in [0, 1].
    """

    p_t: np.ndarray
    p_s: np.ndarray
    p: np.ndarray
    rotations: np.ndarray
    contacts: np.ndarray


def normalize_distances(d: np.ndarray, valid: np.ndarray | None = None) -> np.ndarray:
    """Distance matrix divided by its head-pelvis entry.

    An all-invalid mask leaves the values untouched (they are about to be
    masked out anyway, and scaling by an untrusted entry would only inject
    noise); otherwise a head-pelvis distance at or below 1 cm is rejected.
    """
    d = np.asarray(d, dtype=float)
    if valid is not None and not np.asarray(valid, dtype=bool).any():
        return d.copy()
    ref = float(d[HEAD_SENSOR, PELVIS_SENSOR])
    if ref <= MIN_NORMALIZER_M:
        raise DataError(
            f"head-pelvis distance {ref:.4f} m too small to normalize by"
        )
    return d / ref


def fusion_weights(
    accel_norm: np.ndarray, low: float = 2.0, high: float = 8.0
) -> np.ndarray:
    """Temporal-branch weight per sensor: 0 at/below `low`, 1 at/above `high`."""
    if not 0.0 <= low < high:
        raise ConfigError(f"need 0 <= low < high, got ({low}, {high})")
    a = np.asarray(accel_norm, dtype=float)
    return np.clip((a - low) / (high - low), 0.0, 1.0)


def fuse_positions(
    p_t: np.ndarray,
    p_s: np.ndarray,
    accel_norm: np.ndarray,
    low: float = 2.0,
    high: float = 8.0,
) -> np.ndarray:
    """Blend the branch outputs per sensor by acceleration magnitude.

    w = 0 and w = 1 reproduce p_s and p_t bitwise; in between the result is
    w*p_t + (1-w)*p_s.
    """
    p_t = np.asarray(p_t, dtype=float)
    p_s = np.asarray(p_s, dtype=float)
    w = fusion_weights(accel_norm, low, high)[:, None]
    return w * p_t + (1.0 - w) * p_s


class Forward:
    """Tape-side forward builder over one batch of equal-length windows."""

    def __init__(self, tape: Tape, params: PoseNetParams):
        self.tape = tape
        self.cfg = params.config
        self.ids = {name: tape.leaf(arr) for name, arr in params.tensors.items()}
        self._zero = int(tape.leaf(np.zeros(1))[0])

    def _tile(self, vec: Ids, n: int) -> Ids:
        return np.tile(vec[:, None], (1, n))

    # -- temporal branch ---------------------------------------------------

    def lstm(self, x: np.ndarray) -> Ids:
        """x: (W, T, 54) features -> (18, W*T) position ids, window-major."""
        t = self.tape
        w_count, t_count, _ = x.shape
        h_size = self.cfg.lstm_hidden
        x_ids = t.leaf(x)
        layer_in: list[Ids] = [x_ids[:, step, :].T for step in range(t_count)]
        for layer in range(self.cfg.lstm_layers):
            wx = self.ids[f"lstm{layer}_wx"]
            wh = self.ids[f"lstm{layer}_wh"]
            b = self._tile(self.ids[f"lstm{layer}_b"], w_count)
            h = t.leaf(np.zeros((h_size, w_count)))
            c = t.leaf(np.zeros((h_size, w_count)))
            outs: list[Ids] = []
            for step in range(t_count):
                z = t.add(t.add(t.matmul(wx, layer_in[step]), t.matmul(wh, h)), b)
                gi = t.sigmoid(z[:h_size])
                gf = t.sigmoid(z[h_size : 2 * h_size])
                gg = t.tanh(z[2 * h_size : 3 * h_size])
                go = t.sigmoid(z[3 * h_size :])
                c = t.add(t.mul(gf, c), t.mul(gi, gg))
                h = t.mul(go, t.tanh(c))
                outs.append(h)
            layer_in = outs
        out = np.empty((N_SENSORS * 3, w_count * t_count), dtype=np.int64)
        w_pt = self.ids["pt_w"]
        b_pt = self._tile(self.ids["pt_b"], w_count)
        for step in range(t_count):
            y = t.add(t.matmul(w_pt, layer_in[step]), b_pt)
            for w_idx in range(w_count):
                out[:, w_idx * t_count + step] = y[:, w_idx]
        return out

    # -- spatial branch ------------------------------------------------------

    def _normalize_batch(self, d: np.ndarray, valid: np.ndarray) -> np.ndarray:
        """Per-frame head-pelvis normalization over (N, 6, 6) stacks."""
        ref = d[:, HEAD_SENSOR, PELVIS_SENSOR].copy()
        all_invalid = ~valid.reshape(valid.shape[0], -1).any(axis=1)
        ref[all_invalid] = 1.0
        bad = ref <= MIN_NORMALIZER_M
        if np.any(bad):
            frame = int(np.argmax(bad))
            raise DataError(
                f"head-pelvis distance {ref[frame]:.4f} m too small to "
                f"normalize by (frame {frame})"
            )
        return d / ref[:, None, None]

    def correlation(self, layer: int, dn: np.ndarray, mask: np.ndarray) -> Ids:
        """Masked correlation matrices C for one layer over all frames.

        dn: (N, 6, 6) normalized distances; mask: (N, 6, 6) validity with
        the diagonal already cleared. Returns (N, 6, 6) node ids. Masked
        entries are the shared zero node; each row with surviving entries
        is renormalized to sum 1 unless its sum is vanishingly small (a row
        of zeros stays zeros, keeping the map total).
        """
        t = self.tape
        n = dn.shape[0]
        s = N_SENSORS
        a_ids = np.tile(self.ids[f"gcn{layer}_adj"].reshape(1, s * s), (n, 1))
        b_ids = np.tile(self.ids[f"gcn{layer}_bias"].reshape(1, s * s), (n, 1))
        raw = t.add(t.mul(a_ids, t.leaf(dn.reshape(n, s * s))), b_ids)
        rows = raw.reshape(n * s, s).copy()
        rows[~mask.reshape(n * s, s)] = self._zero
        sums = t.group_sum(rows)
        keep = np.abs(t.val(sums)) >= 1e-30
        out = rows.copy()
        if np.any(keep):
            inv = t.recip(sums[keep])
            out[keep] = t.mul(rows[keep], np.repeat(inv[:, None], s, axis=1))
        return out.reshape(n, s, s)

    def dagcn(self, r_cols: np.ndarray, d: np.ndarray, valid: np.ndarray) -> tuple[Ids, np.ndarray]:
        """Spatial branch over N frames.

        r_cols: (6, 6N) orientation features, column f*6+s is sensor s of
        frame f; d, valid: (N, 6, 6) raw distances and mask. Returns
        (18, N) position ids and the masked normalized distances (N, 36)
        that the decoder reuses.
        """
        t = self.tape
        n = d.shape[0]
        s = N_SENSORS
        mask = valid.copy()
        mask[:, np.arange(s), np.arange(s)] = False
        dn = self._normalize_batch(d, valid)
        dn_masked = np.where(mask, dn, 0.0).reshape(n, s * s)

        emb = t.add(
            t.matmul(self.ids["emb_w"], t.leaf(r_cols)),
            self._tile(self.ids["emb_b"], n * s),
        )
        h = emb
        for layer in range(self.cfg.gcn_layers):
            c_ids = self.correlation(layer, dn, mask)
            g = t.matmul(self.ids[f"gcn{layer}_w"], h)
            g = t.mul(g, np.tile(self.ids[f"gcn{layer}_mod"], (1, n)))
            h2 = np.empty_like(g)
            for f in range(n):
                h2[:, f * s : (f + 1) * s] = t.matmul(g[:, f * s : (f + 1) * s], c_ids[f])
            h2 = t.add(
                t.mul(h2, self._tile(self.ids[f"gcn{layer}_scale"], n * s)),
                self._tile(self.ids[f"gcn{layer}_shift"], n * s),
            )
            h = t.add(h2, emb)
        p = t.add(t.matmul(self.ids["ps_w"], h), self._tile(self.ids["ps_b"], n * s))
        p = p.reshape(3, n, s).transpose(2, 0, 1).reshape(s * 3, n)
        return p, dn_masked

    # -- fusion and decoder --------------------------------------------------

    def fuse(self, p_t: Ids, p_s: Ids, accel: np.ndarray) -> Ids:
        """Blend (18, N) branch outputs; accel is (N, 6, 3) world accel."""
        norms = np.linalg.norm(accel, axis=2)  # (N, 6)
        w = fusion_weights(norms, self.cfg.accel_low, self.cfg.accel_high)
        w18 = np.repeat(w, 3, axis=1).T  # rows sensor-major, (18, N)
        return self.tape.blend(p_t, p_s, w18, 1.0 - w18)

    def decoder(self, p: Ids, r_flat: np.ndarray, a_rows: np.ndarray, dn_masked: np.ndarray) -> tuple[Ids, Ids]:
        """Joint-rotation and contact-logit heads from fused positions.

        r_flat: (36, N) per-frame flattened orientations; a_rows: (18, N)
        accelerations; dn_masked: (N, 36) masked normalized distances.
        Returns (90, N) rotation ids and (2, N) contact logit ids.
        """
        t = self.tape
        n = p.shape[1]
        feats = np.concatenate(
            [p, t.leaf(r_flat), t.leaf(a_rows), t.leaf(dn_masked.T)], axis=0
        )
        hidden = t.tanh(
            t.add(t.matmul(self.ids["dec_w"], feats), self._tile(self.ids["dec_b"], n))
        )
        rot = t.add(t.matmul(self.ids["rot_w"], hidden), self._tile(self.ids["rot_b"], n))
        con = t.add(t.matmul(self.ids["con_w"], hidden), self._tile(self.ids["con_b"], n))
        return rot, con


def batch_features(r: np.ndarray, a: np.ndarray) -> dict[str, np.ndarray]:
    """Input rearrangements shared by training and inference.

    r: (W, T, 6, 6) orientations, a: (W, T, 6, 3) accelerations. Returns
    the LSTM feature tensor plus the column layouts the other stages use.
    """
    w_count, t_count = r.shape[:2]
    n = w_count * t_count
    x = np.concatenate([r, a], axis=3).reshape(w_count, t_count, N_SENSORS * 9)
    r_frames = r.reshape(n, N_SENSORS, 6)
    a_frames = a.reshape(n, N_SENSORS, 3)
    return {
        "lstm_x": x,
        "r_cols": r_frames.transpose(2, 0, 1).reshape(6, n * N_SENSORS),
        "r_flat": r_frames.reshape(n, N_SENSORS * 6).T,
        "a_rows": a_frames.transpose(1, 2, 0).reshape(N_SENSORS * 3, n),
        "a_frames": a_frames,
    }


def _single_window(r_seq: np.ndarray, a_seq: np.ndarray) -> dict[str, np.ndarray]:
    r = np.asarray(r_seq, dtype=float)[None, ...]
    a = np.asarray(a_seq, dtype=float)[None, ...]
    if r.shape[2:] != (N_SENSORS, 6) or a.shape[2:] != (N_SENSORS, 3):
        raise ContractViolationError(
            f"bad sequence shapes r{r.shape[1:]} a{a.shape[1:]}"
        )
    if r.shape[1] != a.shape[1]:
        raise ContractViolationError("orientation and acceleration lengths differ")
    if r.shape[1] < 1:
        raise ContractViolationError("sequence must have at least one frame")
    return batch_features(r, a)


def lstm_branch(params: PoseNetParams, r_seq: np.ndarray, a_seq: np.ndarray) -> np.ndarray:
    """Temporal branch over one sequence -> (T, 6, 3) positions."""
    feats = _single_window(r_seq, a_seq)
    tape = Tape()
    fwd = Forward(tape, params)
    ids = fwd.lstm(feats["lstm_x"])
    t_count = feats["lstm_x"].shape[1]
    return tape.val(ids).T.reshape(t_count, N_SENSORS, 3)


def dagcn_branch(
    params: PoseNetParams,
    r: np.ndarray,
    d: np.ndarray,
    valid: np.ndarray | None = None,
) -> np.ndarray:
    """Spatial branch for one frame -> (6, 3) positions.

    Distances come in raw; the branch normalizes by the head-pelvis entry,
    so any uniform rescaling of d cancels exactly.
    """
    r = np.asarray(r, dtype=float)
    d = np.asarray(d, dtype=float)
    if r.shape != (N_SENSORS, 6):
        raise ContractViolationError(f"bad orientation shape {r.shape}")
    if valid is None:
        valid = ~np.eye(N_SENSORS, dtype=bool)
    v = np.asarray(valid, dtype=bool)
    tape = Tape()
    fwd = Forward(tape, params)
    r_cols = r.T  # (6 features, 6 nodes), single frame
    ids, _ = fwd.dagcn(r_cols, d[None, ...], v[None, ...])
    return tape.val(ids[:, 0]).reshape(N_SENSORS, 3)


def dagcn_correlation(
    params: PoseNetParams,
    layer: int,
    d: np.ndarray,
    valid: np.ndarray | None = None,
) -> np.ndarray:
    """Post-mask correlation matrix of one layer for one frame (6, 6)."""
    d = np.asarray(d, dtype=float)
    if valid is None:
        valid = ~np.eye(N_SENSORS, dtype=bool)
    mask = np.asarray(valid, dtype=bool).copy()
    np.fill_diagonal(mask, False)
    tape = Tape()
    fwd = Forward(tape, params)
    dn = fwd._normalize_batch(d[None, ...], mask[None, ...])
    ids = fwd.correlation(layer, dn, mask[None, ...])
    return tape.val(ids[0])


def infer(params: PoseNetParams, inputs: list[ModelInput]) -> list[PoseOutput]:
    """Run both branches, fusion, and the decoder over a sequence."""
    if len(inputs) < 1:
        raise ContractViolationError("need at least one input frame")
    r = np.stack([f.r for f in inputs])
    a = np.stack([f.a for f in inputs])
    d = np.stack([f.d for f in inputs])
    valid = np.stack([f.valid for f in inputs])
    feats = batch_features(r[None, ...], a[None, ...])
    tape = Tape()
    fwd = Forward(tape, params)
    p_t = fwd.lstm(feats["lstm_x"])
    p_s, dn_masked = fwd.dagcn(feats["r_cols"], d, valid)
    p = fwd.fuse(p_t, p_s, feats["a_frames"])
    rot, con = fwd.decoder(p, feats["r_flat"], feats["a_rows"], dn_masked)
    probs = tape.sigmoid(con)
    out = []
    for i in range(len(inputs)):
        out.append(
            PoseOutput(
                p_t=tape.val(p_t[:, i]).reshape(N_SENSORS, 3),
                p_s=tape.val(p_s[:, i]).reshape(N_SENSORS, 3),
                p=tape.val(p[:, i]).reshape(N_SENSORS, 3),
                rotations=tape.val(rot[:, i]).reshape(15, 6),
                contacts=tape.val(probs[:, i]),
            )
        )
    return out
