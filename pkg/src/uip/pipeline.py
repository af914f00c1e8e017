"""Pipeline stages behind the CLI: synth, filter, train, eval, report.

Each stage reads hashed inputs, derives every random stream from the run
seed, and writes text artifacts plus a manifest, so a stage rerun with
identical inputs reproduces identical bytes. No stage mutates its input
directory.
"""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .config import RunConfig, load_config
from .errors import ConfigError, DataError
from .geometry import Quaternion, Vec3, quat_rotate, rot6d_from_quat, quat_from_rot6d
from .imu import ImuNoiseModel, orientation_filter, synthesize_accel, synthesize_imu, tpose_calibrate
from .metrics import ClipMetrics, SIP_JOINTS, jitter, position_error, sip_error, split_by_acceleration
from .motions import generate_motion_suite
from .posenet import (
    ModelInput,
    PoseNetConfig,
    PoseNetParams,
    TrainConfig,
    TrainingWindow,
    infer,
    train,
)
from .rng import derive_rng
from .skeleton import (
    MotionClip,
    N_SENSORS,
    Skeleton,
    default_placement,
    default_skeleton,
    fk_pose,
    pairwise_occlusion,
    sensor_pose,
    tpose,
)
from .storage import (
    read_imu_csv,
    read_model_input,
    read_ranging_csv,
    read_report_json,
    read_targets,
    read_truth,
    verify_manifest,
    write_calibration,
    write_distances,
    write_imu_csv,
    write_manifest,
    write_model_input,
    write_ranging_csv,
    write_report_csv,
    write_report_json,
    write_targets,
    write_truth,
)
from .uwb import (
    CalibrationResult,
    apply_calibration,
    occlusion_noise_sigma,
    ransac_affine_calibrate,
    sample_clocks,
    simulate_stream,
)
from .ekf import PairFilterBank

CLIPS_FILE = "clips.json"
CONFIG_FILE = "config.json"
CONTACT_SPEED = 0.4  # m/s; slower ankles count as planted

PAIRS = [(i, j) for i in range(N_SENSORS) for j in range(i + 1, N_SENSORS)]


def _setup(cfg: RunConfig):
    skel = default_skeleton(cfg.skeleton.height_m)
    return skel, default_placement(skel)


def _tpose_sensors(skel, placement):
    """Static T-pose: joint pose plus per-sensor world poses."""
    jp, jr = tpose(skel)
    pos = np.zeros((N_SENSORS, 3))
    rot = []
    for s in range(N_SENSORS):
        p, q = sensor_pose(placement, s, jp, jr)
        pos[s] = p.to_array()
        rot.append(q)
    return jp, pos, rot


def _noise_models(cfg: RunConfig) -> list[ImuNoiseModel]:
    """One noise model per sensor; biases persist across every segment."""
    out = []
    for s in range(N_SENSORS):
        out.append(
            ImuNoiseModel.sampled(
                derive_rng(cfg.seed, "imu", "bias", s),
                cfg.imu.accel_sigma,
                cfg.imu.gyro_sigma,
                cfg.imu.accel_bias_sigma,
                cfg.imu.gyro_bias_sigma,
            )
        )
    return out


def _clip_truth(skel: Skeleton, placement, clip: MotionClip):
    """One FK sweep: joint and sensor trajectories for a whole clip."""
    frames = clip.n_frames
    joint_pos = np.zeros((frames, skel.n_joints, 3))
    joint_rot: list[list[Quaternion]] = []
    sensor_pos = np.zeros((frames, N_SENSORS, 3))
    sensor_rot: list[list[Quaternion]] = []
    joint_vecs: list[list[Vec3]] = []
    for k in range(frames):
        jp, jr = fk_pose(skel, clip.local_rot[k], clip.root_pos[k])
        joint_vecs.append(jp)
        joint_rot.append(jr)
        for j, p in enumerate(jp):
            joint_pos[k, j] = p.to_array()
        row = []
        for s in range(N_SENSORS):
            p, q = sensor_pose(placement, s, jp, jr)
            sensor_pos[k, s] = p.to_array()
            row.append(q)
        sensor_rot.append(row)
    return joint_pos, joint_rot, sensor_pos, sensor_rot, joint_vecs


def _occlusion_sigma_fn(cfg: RunConfig, skel, placement, joint_vecs, sensor_pos, rate):
    """Per-round noise model: sigma by the body-occlusion ratio of each pair."""
    last = len(joint_vecs) - 1

    def for_round(_k: int, t: float):
        frame = min(int(round(t * rate)), last)
        occ = pairwise_occlusion(skel, placement, joint_vecs[frame], sensor_pos[frame])

        def sigma(i: int, j: int) -> float:
            return occlusion_noise_sigma(occ[i, j], cfg.uwb.sigma_los, cfg.uwb.sigma_nlos)

        return sigma

    return for_round


def synthesize_dataset(cfg: RunConfig, out_dir: str | Path) -> dict:
    """Emit ground truth, raw IMU, and raw ranging for the whole catalog."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    skel, placement = _setup(cfg)
    rate = cfg.motions.rate_hz
    noise = _noise_models(cfg)
    clocks = sample_clocks(
        derive_rng(cfg.seed, "uwb", "clocks"),
        skew_ppm_sigma=cfg.uwb.skew_ppm_sigma,
        offset_sigma=cfg.uwb.offset_sigma,
    )
    written: list[str] = []

    # Stationary T-pose segment: calibration source for IMU offsets and
    # the affine range correction.
    jp_t, spos_t, srot_t = _tpose_sensors(skel, placement)
    n_tpose = int(round(cfg.imu.tpose_seconds * rate))
    for s in range(N_SENSORS):
        pos = np.tile(spos_t[s], (n_tpose, 1))
        stream = synthesize_imu(
            pos, [srot_t[s]] * n_tpose, noise[s], derive_rng(cfg.seed, "imu", "tpose", s), dt=1.0 / rate
        )
        name = f"tpose_imu_s{s}.csv"
        write_imu_csv(out / name, stream)
        written.append(name)
    occ_t = pairwise_occlusion(skel, placement, jp_t, spos_t)

    def tpose_sigma(_k, _t):
        return lambda i, j: occlusion_noise_sigma(occ_t[i, j], cfg.uwb.sigma_los, cfg.uwb.sigma_nlos)

    ranging_t = simulate_stream(
        lambda _t: spos_t,
        clocks,
        cfg.imu.tpose_seconds,
        derive_rng(cfg.seed, "uwb", "tpose"),
        drop_prob=cfg.uwb.drop_prob,
        sigma_fn_for_round=tpose_sigma,
    )
    write_ranging_csv(out / "tpose_ranging.csv", ranging_t)
    written.append("tpose_ranging.csv")

    clips = generate_motion_suite(cfg.seed, cfg.motions.catalog, cfg.motions.duration_s, rate, skel)
    meta = []
    for idx, clip in enumerate(clips):
        cdir = out / clip.name
        cdir.mkdir(exist_ok=True)
        joint_pos, joint_rot, sensor_pos, sensor_rot, joint_vecs = _clip_truth(skel, placement, clip)
        times = np.arange(clip.n_frames) / rate
        write_truth(cdir / "truth.jsonl", times, joint_pos, joint_rot, sensor_pos, sensor_rot)
        written.append(f"{clip.name}/truth.jsonl")
        accel = np.stack(
            [synthesize_accel(sensor_pos[:, s], dt=1.0 / rate) for s in range(N_SENSORS)], axis=1
        )
        mean_accel = float(np.linalg.norm(accel, axis=2).mean())
        for s in range(N_SENSORS):
            quats = [sensor_rot[k][s] for k in range(clip.n_frames)]
            stream = synthesize_imu(
                sensor_pos[:, s], quats, noise[s], derive_rng(cfg.seed, "imu", idx, s), dt=1.0 / rate
            )
            name = f"{clip.name}/imu_s{s}.csv"
            write_imu_csv(cdir / f"imu_s{s}.csv", stream)
            written.append(name)
        last = clip.n_frames - 1
        ranging = simulate_stream(
            lambda t: sensor_pos[min(int(round(t * rate)), last)],
            clocks,
            clip.duration,
            derive_rng(cfg.seed, "uwb", idx),
            drop_prob=cfg.uwb.drop_prob,
            sigma_fn_for_round=_occlusion_sigma_fn(cfg, skel, placement, joint_vecs, sensor_pos, rate),
        )
        write_ranging_csv(cdir / "ranging.csv", ranging)
        written.append(f"{clip.name}/ranging.csv")
        meta.append(
            {
                "name": clip.name,
                "kind": clip.kind,
                "frames": clip.n_frames,
                "rate_hz": rate,
                "mean_accel_ms2": mean_accel,
            }
        )

    (out / CLIPS_FILE).write_text(json.dumps(meta, indent=2) + "\n")
    written.append(CLIPS_FILE)
    cfg.save(out / CONFIG_FILE)
    written.append(CONFIG_FILE)
    hashes = write_manifest(out, written)
    return {"clips": meta, "files": hashes}


def read_clip_meta(dataset_dir: str | Path) -> list[dict]:
    p = Path(dataset_dir) / CLIPS_FILE
    if not p.is_file():
        raise DataError(f"missing file {p}")
    try:
        meta = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{p} is not valid JSON: {exc}") from exc
    if not isinstance(meta, list) or not meta:
        raise DataError(f"{p}: expected a non-empty clip list")
    return meta


def _calibrate_imu(cfg: RunConfig, dataset: Path, srot_t) -> list[tuple[Vec3, Vec3]]:
    offsets = []
    for s in range(N_SENSORS):
        stream = read_imu_csv(dataset / f"tpose_imu_s{s}.csv")
        offsets.append(tpose_calibrate(stream, srot_t[s]))
    return offsets


def _calibrate_uwb(cfg: RunConfig, dataset: Path, spos_t) -> CalibrationResult:
    ranging = read_ranging_csv(dataset / "tpose_ranging.csv")
    raw, truth = [], []
    for i, j in PAIRS:
        d_true = float(np.linalg.norm(spos_t[i] - spos_t[j]))
        picked = ranging.valid[:, i, j]
        raw.extend(ranging.distances[picked, i, j])
        truth.extend([d_true] * int(picked.sum()))
    return ransac_affine_calibrate(
        np.array(raw), np.array(truth), derive_rng(cfg.seed, "uwb", "cal")
    )


def _local_rotations(skel: Skeleton, joint_rot: list[list[Quaternion]]) -> np.ndarray:
    """Global truth orientations back to local 6D targets (T, J, 6)."""
    frames = len(joint_rot)
    out = np.zeros((frames, skel.n_joints, 6))
    for k in range(frames):
        for j in range(skel.n_joints):
            parent = skel.joints[j].parent
            if parent < 0:
                local = joint_rot[k][j]
            else:
                local = (joint_rot[k][parent].conjugate() * joint_rot[k][j]).normalized()
            out[k, j] = rot6d_from_quat(local)
    return out


def _contact_labels(skel: Skeleton, joint_pos: np.ndarray, rate: float) -> np.ndarray:
    """Foot contact by ankle world speed below CONTACT_SPEED."""
    out = np.zeros((joint_pos.shape[0], 2))
    for col, name in enumerate(("l_ankle", "r_ankle")):
        p = joint_pos[:, skel.joint_index(name)]
        speed = np.linalg.norm(np.diff(p, axis=0), axis=1) * rate
        speed = np.append(speed, speed[-1])
        out[:, col] = (speed < CONTACT_SPEED).astype(float)
    return out


def _pelvis_frame_targets(sensor_pos: np.ndarray, sensor_rot) -> np.ndarray:
    """Sensor positions expressed in the pelvis sensor's frame (T, 6, 3)."""
    frames = sensor_pos.shape[0]
    out = np.zeros((frames, N_SENSORS, 3))
    for k in range(frames):
        inv = sensor_rot[k][0].conjugate()
        for s in range(N_SENSORS):
            rel = Vec3(*(sensor_pos[k, s] - sensor_pos[k, 0]))
            out[k, s] = quat_rotate(inv, rel).to_array()
    return out


def filter_dataset(dataset_dir: str | Path, out_dir: str | Path, cfg: RunConfig | None = None) -> dict:
    """Orientation filter + EKF bank over a synthesized dataset.

    Writes per-clip model inputs, filtered distances, and training targets,
    plus the range calibration and a raw-vs-filtered RMSE diagnostic.
    """
    dataset = Path(dataset_dir)
    verify_manifest(dataset)
    if cfg is None:
        cfg = load_config(dataset / CONFIG_FILE)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    skel, placement = _setup(cfg)
    rate = cfg.motions.rate_hz
    _, spos_t, srot_t = _tpose_sensors(skel, placement)
    written: list[str] = []

    offsets = _calibrate_imu(cfg, dataset, srot_t)
    cal = _calibrate_uwb(cfg, dataset, spos_t)
    write_calibration(out / "calibration.json", cal)
    written.append("calibration.json")

    rmse_report: dict[str, dict] = {}
    meta = read_clip_meta(dataset)
    for entry in meta:
        name = entry["name"]
        cdir = dataset / name
        truth = read_truth(cdir / "truth.jsonl")
        frames = truth.times.shape[0]
        ranging = read_ranging_csv(cdir / "ranging.csv")

        # Orientation filter per sensor, seeded at the calibration pose.
        r6 = np.zeros((frames, N_SENSORS, 6))
        accel_w = np.zeros((frames, N_SENSORS, 3))
        quats: list[list[Quaternion]] = [[] for _ in range(frames)]
        for s in range(N_SENSORS):
            stream = read_imu_csv(cdir / f"imu_s{s}.csv")
            if len(stream) != frames:
                raise DataError(f"{name}: IMU stream s{s} has {len(stream)} frames, truth {frames}")
            gyro_off, accel_off = offsets[s]
            for k, est in enumerate(
                orientation_filter(stream, srot_t[s], cfg.imu.filter_gain, gyro_off, accel_off)
            ):
                r6[k, s] = rot6d_from_quat(est.q)
                accel_w[k, s] = est.accel_world.to_array()
                quats[k].append(est.q)

        # Pair EKF bank on the IMU grid, measurement ticks at round times.
        # Input noise spans (a_i, a_j, q_i, q_j); orientation terms do not
        # reach the covariance, so only the accel entries carry sigma.
        sigma_u = np.concatenate([np.full(6, cfg.ekf.accel_noise), np.zeros(6)])
        bank = PairFilterBank(
            skel,
            placement,
            sigma_u=sigma_u,
            r_diag=(cfg.ekf.range_sigma, cfg.ekf.speed_sigma),
            dt=1.0 / rate,
            speed_mode=cfg.ekf.speed_mode,
        )
        round_at_frame = {}
        for k in range(ranging.times.shape[0]):
            frame = int(round(ranging.times[k] * rate))
            if 0 <= frame < frames:
                round_at_frame[frame] = k
        d_stream = np.zeros((frames, N_SENSORS, N_SENSORS))
        mask_stream = np.zeros((frames, N_SENSORS, N_SENSORS), dtype=bool)
        for k in range(frames):
            controls = [(Vec3(*accel_w[k, s]), quats[k][s]) for s in range(N_SENSORS)]
            bank.predict_all(controls)
            if k in round_at_frame:
                rnd = round_at_frame[k]
                d_cal = apply_calibration(ranging.distances[rnd], cal)
                bank.update_all(d_cal, ranging.valid[rnd], float(truth.times[k]))
            d_stream[k], mask_stream[k] = bank.distance_matrix()

        cdir_out = out / name
        cdir_out.mkdir(exist_ok=True)
        write_model_input(cdir_out / "model_input.jsonl", truth.times, r6, accel_w, d_stream, mask_stream)
        write_distances(cdir_out / "distances.jsonl", truth.times, d_stream, mask_stream)
        targets_pos = _pelvis_frame_targets(truth.sensor_pos, truth.sensor_rot)
        targets_rot = _local_rotations(skel, truth.joint_rot)
        contacts = _contact_labels(skel, truth.joint_pos, rate)
        write_targets(cdir_out / "targets.jsonl", truth.times, targets_pos, targets_rot, contacts)
        written += [f"{name}/model_input.jsonl", f"{name}/distances.jsonl", f"{name}/targets.jsonl"]

        rmse_report[name] = _distance_rmse(
            truth.sensor_pos, ranging, cal, d_stream, mask_stream, rate
        )

    (out / "rmse_report.json").write_text(json.dumps(rmse_report, indent=2) + "\n")
    written.append("rmse_report.json")
    (out / CLIPS_FILE).write_text((dataset / CLIPS_FILE).read_text())
    written.append(CLIPS_FILE)
    cfg.save(out / CONFIG_FILE)
    written.append(CONFIG_FILE)
    write_manifest(out, written)
    return {"calibration": cal, "rmse": rmse_report}


def _distance_rmse(sensor_pos, ranging, cal, d_stream, mask_stream, rate) -> dict:
    """Per-pair RMSE of calibrated raw and filtered distances vs truth."""
    frames = sensor_pos.shape[0]
    raw_rmse, filt_rmse = [], []
    for i, j in PAIRS:
        truth_all = np.linalg.norm(sensor_pos[:, i] - sensor_pos[:, j], axis=1)
        raw_sq, filt_sq = [], []
        for k in range(ranging.times.shape[0]):
            frame = int(round(ranging.times[k] * rate))
            if not (0 <= frame < frames and ranging.valid[k, i, j]):
                continue
            d_true = truth_all[frame]
            raw_sq.append((float(apply_calibration(ranging.distances[k, i, j], cal)) - d_true) ** 2)
            if mask_stream[frame, i, j]:
                filt_sq.append((d_stream[frame, i, j] - d_true) ** 2)
        raw_rmse.append(math.sqrt(np.mean(raw_sq)) if raw_sq else None)
        filt_rmse.append(math.sqrt(np.mean(filt_sq)) if filt_sq else None)
    present = [v for v in filt_rmse if v is not None]
    present_raw = [v for v in raw_rmse if v is not None]
    return {
        "raw_rmse_m": raw_rmse,
        "filtered_rmse_m": filt_rmse,
        "mean_raw_m": float(np.mean(present_raw)) if present_raw else None,
        "mean_filtered_m": float(np.mean(present)) if present else None,
    }


def load_windows(
    filtered_dirs: list[str | Path],
    window_frames: int,
    window_stride: int,
    no_distances: bool = False,
) -> list[TrainingWindow]:
    """Cut every clip of every filtered directory into training windows."""
    windows: list[TrainingWindow] = []
    for d in filtered_dirs:
        fdir = Path(d)
        verify_manifest(fdir)
        for entry in read_clip_meta(fdir):
            name = entry["name"]
            mi = read_model_input(fdir / name / "model_input.jsonl")
            tg = read_targets(fdir / name / "targets.jsonl")
            frames = mi["times"].shape[0]
            if tg["times"].shape[0] != frames:
                raise DataError(f"{name}: target stream length differs from model input")
            mask = np.zeros_like(mi["mask"]) if no_distances else mi["mask"]
            for start in range(0, frames - window_frames + 1, window_stride):
                stop = start + window_frames
                windows.append(
                    TrainingWindow(
                        r=mi["r"][start:stop],
                        a=mi["a"][start:stop],
                        d=mi["d"][start:stop],
                        valid=mask[start:stop],
                        positions=tg["positions"][start:stop],
                        rotations=tg["rotations"][start:stop],
                        contacts=tg["contacts"][start:stop],
                    )
                )
    if not windows:
        raise DataError(
            f"no training windows: streams shorter than window_frames={window_frames}"
        )
    return windows


def _net_config(cfg: RunConfig) -> PoseNetConfig:
    m = cfg.model
    return PoseNetConfig(
        lstm_hidden=m.lstm_hidden,
        lstm_layers=m.lstm_layers,
        gcn_width=m.gcn_width,
        gcn_layers=m.gcn_layers,
        decoder_hidden=m.decoder_hidden,
        accel_low=m.accel_low,
        accel_high=m.accel_high,
        lambda_distance=m.lambda_distance,
    )


def train_model(
    filtered_dirs: list[str | Path],
    out_dir: str | Path,
    cfg: RunConfig,
    no_distances: bool = False,
) -> tuple[PoseNetParams, list[dict]]:
    """Train on every window of the filtered directories; write a checkpoint."""
    windows = load_windows(
        filtered_dirs, cfg.model.window_frames, cfg.model.window_stride, no_distances
    )
    t = cfg.train
    train_cfg = TrainConfig(
        epochs=t.epochs,
        batch_size=t.batch_size,
        learning_rate=t.learning_rate,
        lr_decay=t.lr_decay,
        lr_decay_every=t.lr_decay_every,
        val_fraction=t.val_fraction,
        seed=cfg.seed,
    )
    params, log = train(windows, _net_config(cfg), train_cfg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    params.save(out / "checkpoint.json")
    (out / "train_log.json").write_text(json.dumps(log, indent=2) + "\n")
    (out / "run.json").write_text(
        json.dumps({"no_distances": no_distances, "n_windows": len(windows)}, indent=2) + "\n"
    )
    cfg.save(out / CONFIG_FILE)
    write_manifest(out, ["checkpoint.json", "train_log.json", "run.json", CONFIG_FILE])
    return params, log


def evaluate_model(
    checkpoint: str | Path,
    filtered_dir: str | Path,
    truth_dir: str | Path,
    out_dir: str | Path,
    no_distances: bool = False,
) -> dict:
    """Run inference over each clip and score it against ground truth."""
    params = PoseNetParams.load(checkpoint)
    fdir = Path(filtered_dir)
    tdir = Path(truth_dir)
    verify_manifest(fdir)
    verify_manifest(tdir)
    cfg = load_config(tdir / CONFIG_FILE)
    skel, _ = _setup(cfg)
    sip_index = {name: skel.joint_index(name) for name in SIP_JOINTS}
    per_clip: list[ClipMetrics] = []
    for entry in read_clip_meta(fdir):
        name = entry["name"]
        rate = float(entry["rate_hz"])
        mi = read_model_input(fdir / name / "model_input.jsonl")
        truth = read_truth(tdir / name / "truth.jsonl")
        frames = mi["times"].shape[0]
        mask = np.zeros_like(mi["mask"]) if no_distances else mi["mask"]
        inputs = [
            ModelInput(mi["r"][k], mi["a"][k], mi["d"][k], mask[k]) for k in range(frames)
        ]
        outs = infer(params, inputs)

        pred_pos = np.zeros((frames, skel.n_joints, 3))
        pred_rot: list[list[Quaternion]] = []
        for k, o in enumerate(outs):
            local = [quat_from_rot6d(o.rotations[j]) for j in range(skel.n_joints)]
            jp, jr = fk_pose(skel, local, Vec3.zero())
            pred_rot.append(jr)
            for j, p in enumerate(jp):
                pred_pos[k, j] = p.to_array()

        sip = sip_error(
            {n: [pred_rot[k][i] for k in range(frames)] for n, i in sip_index.items()},
            {n: [truth.joint_rot[k][i] for k in range(frames)] for n, i in sip_index.items()},
        )
        pos = position_error(
            pred_pos,
            [pred_rot[k][0] for k in range(frames)],
            truth.joint_pos,
            [truth.joint_rot[k][0] for k in range(frames)],
        )
        jit = jitter(pred_pos, rate)
        rmse = _filtered_pair_rmse(mi, truth.sensor_pos)
        per_clip.append(
            ClipMetrics(
                name=name,
                mean_accel=float(entry["mean_accel_ms2"]),
                frames=frames,
                sip_error_deg=sip,
                pos_error_cm=pos,
                jitter_km_s3=jit,
                distance_rmse_m=rmse,
            )
        )

    reports = split_by_acceleration(per_clip)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_report_json(out / "report.json", reports)
    write_report_csv(out / "report.csv", reports)
    clip_doc = [
        {
            "name": c.name,
            "mean_accel_ms2": c.mean_accel,
            "frames": c.frames,
            "sip_error_deg": c.sip_error_deg,
            "pos_error_cm": c.pos_error_cm,
            "jitter_km_s3": c.jitter_km_s3,
        }
        for c in per_clip
    ]
    (out / "clip_metrics.json").write_text(json.dumps(clip_doc, indent=2) + "\n")
    (out / "run.json").write_text(json.dumps({"no_distances": no_distances}, indent=2) + "\n")
    write_manifest(out, ["report.json", "report.csv", "clip_metrics.json", "run.json"])
    return {"reports": reports, "clips": per_clip}


def _filtered_pair_rmse(mi: dict, sensor_pos: np.ndarray) -> tuple[float, ...] | None:
    """Per-pair RMSE of the filtered distances against truth, if any."""
    frames = min(mi["times"].shape[0], sensor_pos.shape[0])
    out = []
    for i, j in PAIRS:
        truth_d = np.linalg.norm(sensor_pos[:frames, i] - sensor_pos[:frames, j], axis=1)
        picked = mi["mask"][:frames, i, j]
        if not picked.any():
            return None
        err = mi["d"][:frames, i, j][picked] - truth_d[picked]
        out.append(float(np.sqrt(np.mean(err**2))))
    return tuple(out)


def summarize_runs(run_dirs: list[str | Path]) -> str:
    """Text table over eval directories: one row per run and split."""
    header = f"{'run':<28} {'split':<8} {'sip_deg':>9} {'pos_cm':>9} {'jitter':>9}"
    lines = [header, "-" * len(header)]
    for d in run_dirs:
        reports = read_report_json(Path(d) / "report.json")
        for tag in ("overall", "slow", "fast"):
            if tag not in reports:
                continue
            r = reports[tag]
            lines.append(
                f"{Path(d).name:<28} {tag:<8} {r.sip_error_deg:>9.3f} "
                f"{r.pos_error_cm:>9.3f} {r.jitter_km_s3:>9.4f}"
            )
    return "\n".join(lines)
