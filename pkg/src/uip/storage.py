"""On-disk formats: JSONL streams, CSV sensor logs, hashed manifests.

Everything is text so fixtures diff cleanly, and every float is written
with repr so a read-back is bit-exact. A directory of outputs always
carries a manifest.json mapping relative file names to SHA-256 digests;
consumers verify it before trusting the data.
"""
from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError
from .geometry import Quaternion
from .imu import ImuStream
from .metrics import MetricReport
from .skeleton import N_SENSORS
from .uwb import CalibrationResult, RawDistanceStream

MANIFEST_NAME = "manifest.json"


# -- primitives --------------------------------------------------------------


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _require(path: Path) -> Path:
    if not path.is_file():
        raise DataError(f"missing file {path}")
    return path


def write_jsonl(path: str | Path, records) -> None:
    with open(path, "w") as f:
        for rec in records:
            f.write(json.dumps(rec))
            f.write("\n")


def read_jsonl(path: str | Path) -> list[dict]:
    p = _require(Path(path))
    out = []
    with open(p) as f:
        for line_no, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise DataError(f"{p}:{line_no}: bad JSON record: {exc}") from exc
    return out


# -- manifests ---------------------------------------------------------------


def write_manifest(directory: str | Path, names: list[str]) -> dict[str, str]:
    """Hash the named files (relative to directory) and write manifest.json."""
    d = Path(directory)
    files = {name: sha256_file(d / name) for name in sorted(names)}
    (d / MANIFEST_NAME).write_text(json.dumps({"files": files}, indent=2, sort_keys=True) + "\n")
    return files


def read_manifest(directory: str | Path) -> dict[str, str]:
    p = _require(Path(directory) / MANIFEST_NAME)
    try:
        doc = json.loads(p.read_text())
        files = doc["files"]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise DataError(f"manifest {p} is malformed: {exc}") from exc
    return dict(files)


def verify_manifest(directory: str | Path) -> dict[str, str]:
    """Recompute every hash; raise DataError on any missing or stale file."""
    d = Path(directory)
    files = read_manifest(d)
    for name, digest in files.items():
        path = d / name
        if not path.is_file():
            raise DataError(f"manifest lists missing file {path}")
        actual = sha256_file(path)
        if actual != digest:
            raise DataError(
                f"hash mismatch for {path}: manifest {digest[:12]}…, "
                f"file {actual[:12]}… (stale or modified data)"
            )
    return files


# -- ground truth ------------------------------------------------------------


@dataclass(frozen=True)
class TruthData:
    """Ground-truth trajectories read back from a truth stream."""

    times: np.ndarray  # (T,)
    joint_pos: np.ndarray  # (T, J, 3)
    joint_rot: list[list[Quaternion]]  # [frame][joint], global
    sensor_pos: np.ndarray  # (T, 6, 3)
    sensor_rot: list[list[Quaternion]]  # [frame][sensor]


def _pose_entry(p, q: Quaternion) -> dict:
    return {"p": [float(p[0]), float(p[1]), float(p[2])], "q": [q.w, q.x, q.y, q.z]}


def write_truth(
    path: str | Path,
    times: np.ndarray,
    joint_pos: np.ndarray,
    joint_rot: list[list[Quaternion]],
    sensor_pos: np.ndarray,
    sensor_rot: list[list[Quaternion]],
) -> None:
    records = []
    for k in range(len(times)):
        records.append(
            {
                "t": float(times[k]),
                "joints": [
                    _pose_entry(joint_pos[k, j], joint_rot[k][j])
                    for j in range(joint_pos.shape[1])
                ],
                "sensors": [
                    _pose_entry(sensor_pos[k, s], sensor_rot[k][s])
                    for s in range(sensor_pos.shape[1])
                ],
            }
        )
    write_jsonl(path, records)


def _read_poses(entries, path, frame) -> tuple[np.ndarray, list[Quaternion]]:
    pos = np.zeros((len(entries), 3))
    rot = []
    for i, e in enumerate(entries):
        try:
            pos[i] = e["p"]
            rot.append(Quaternion(*e["q"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{path}: frame {frame}: bad pose entry: {exc}") from exc
    return pos, rot


def read_truth(path: str | Path) -> TruthData:
    records = read_jsonl(path)
    if not records:
        raise DataError(f"{path}: empty truth stream")
    times = np.array([r["t"] for r in records])
    jp, jr, sp, sr = [], [], [], []
    for k, rec in enumerate(records):
        p, q = _read_poses(rec["joints"], path, k)
        jp.append(p)
        jr.append(q)
        p, q = _read_poses(rec["sensors"], path, k)
        sp.append(p)
        sr.append(q)
    return TruthData(times, np.stack(jp), jr, np.stack(sp), sr)


# -- raw sensor logs ---------------------------------------------------------

IMU_HEADER = ["t", "ax", "ay", "az", "gx", "gy", "gz"]
RANGING_HEADER = ["round", "t", "i", "j", "d_raw", "valid"]


def write_imu_csv(path: str | Path, stream: ImuStream) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(IMU_HEADER)
        for k in range(len(stream)):
            row = [stream.t[k], *stream.accel[k], *stream.gyro[k]]
            w.writerow([repr(float(v)) for v in row])


def read_imu_csv(path: str | Path) -> ImuStream:
    p = _require(Path(path))
    with open(p, newline="") as f:
        rows = list(csv.reader(f))
    if not rows or rows[0] != IMU_HEADER:
        raise DataError(f"{p}: expected header {','.join(IMU_HEADER)}")
    try:
        data = np.array([[float(v) for v in row] for row in rows[1:]])
    except ValueError as exc:
        raise DataError(f"{p}: bad numeric field: {exc}") from exc
    if data.size == 0:
        raise DataError(f"{p}: empty IMU stream")
    return ImuStream(t=data[:, 0], accel=data[:, 1:4], gyro=data[:, 4:7])


def write_ranging_csv(path: str | Path, stream: RawDistanceStream) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(RANGING_HEADER)
        for k in range(stream.times.shape[0]):
            for i in range(N_SENSORS):
                for j in range(i + 1, N_SENSORS):
                    w.writerow(
                        [
                            k,
                            repr(float(stream.times[k])),
                            i,
                            j,
                            repr(float(stream.distances[k, i, j])),
                            int(stream.valid[k, i, j]),
                        ]
                    )


def read_ranging_csv(path: str | Path) -> RawDistanceStream:
    p = _require(Path(path))
    with open(p, newline="") as f:
        rows = list(csv.reader(f))
    if not rows or rows[0] != RANGING_HEADER:
        raise DataError(f"{p}: expected header {','.join(RANGING_HEADER)}")
    body = rows[1:]
    if not body:
        raise DataError(f"{p}: empty ranging stream")
    n_rounds = int(body[-1][0]) + 1
    times = np.zeros(n_rounds)
    dists = np.zeros((n_rounds, N_SENSORS, N_SENSORS))
    valid = np.zeros((n_rounds, N_SENSORS, N_SENSORS), dtype=bool)
    try:
        for row in body:
            k, t, i, j, d, ok = int(row[0]), float(row[1]), int(row[2]), int(row[3]), float(row[4]), row[5]
            times[k] = t
            dists[k, i, j] = dists[k, j, i] = d
            valid[k, i, j] = valid[k, j, i] = ok == "1"
    except (ValueError, IndexError) as exc:
        raise DataError(f"{p}: bad ranging row: {exc}") from exc
    return RawDistanceStream(times=times, distances=dists, valid=valid)


# -- calibration -------------------------------------------------------------


def write_calibration(path: str | Path, cal: CalibrationResult) -> None:
    Path(path).write_text(
        json.dumps({"scale": cal.scale, "bias": cal.bias, "inliers": cal.inliers}, indent=2)
        + "\n"
    )


def read_calibration(path: str | Path) -> CalibrationResult:
    p = _require(Path(path))
    try:
        doc = json.loads(p.read_text())
        return CalibrationResult(
            scale=float(doc["scale"]), bias=float(doc["bias"]), inliers=int(doc["inliers"])
        )
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise DataError(f"calibration file {p} is malformed: {exc}") from exc


# -- filtered streams --------------------------------------------------------


def _matrix(rec: dict, key: str, path, frame: int, shape: tuple) -> np.ndarray:
    try:
        arr = np.array(rec[key], dtype=float)
    except (KeyError, ValueError) as exc:
        raise DataError(f"{path}: frame {frame}: bad field {key!r}: {exc}") from exc
    if arr.shape != shape:
        raise DataError(f"{path}: frame {frame}: {key} has shape {arr.shape}, expected {shape}")
    return arr


def write_distances(path: str | Path, times, d: np.ndarray, mask: np.ndarray) -> None:
    """Filtered distance stream: one {"t", "D", "mask"} record per frame."""
    records = [
        {"t": float(times[k]), "D": d[k].tolist(), "mask": mask[k].astype(int).tolist()}
        for k in range(len(times))
    ]
    write_jsonl(path, records)


def read_distances(path: str | Path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    records = read_jsonl(path)
    if not records:
        raise DataError(f"{path}: empty distance stream")
    times = np.array([r["t"] for r in records])
    shape = (N_SENSORS, N_SENSORS)
    d = np.stack([_matrix(r, "D", path, k, shape) for k, r in enumerate(records)])
    mask = np.stack([_matrix(r, "mask", path, k, shape) for k, r in enumerate(records)])
    return times, d, mask.astype(bool)


def write_model_input(path: str | Path, times, r, a, d, mask) -> None:
    """Per-frame network inputs: orientations, accelerations, distances."""
    records = [
        {
            "t": float(times[k]),
            "r": r[k].tolist(),
            "a": a[k].tolist(),
            "D": d[k].tolist(),
            "mask": mask[k].astype(int).tolist(),
        }
        for k in range(len(times))
    ]
    write_jsonl(path, records)


def read_model_input(path: str | Path) -> dict[str, np.ndarray]:
    records = read_jsonl(path)
    if not records:
        raise DataError(f"{path}: empty model-input stream")
    out = {
        "times": np.array([r["t"] for r in records]),
        "r": np.stack([_matrix(r, "r", path, k, (N_SENSORS, 6)) for k, r in enumerate(records)]),
        "a": np.stack([_matrix(r, "a", path, k, (N_SENSORS, 3)) for k, r in enumerate(records)]),
        "d": np.stack(
            [_matrix(r, "D", path, k, (N_SENSORS, N_SENSORS)) for k, r in enumerate(records)]
        ),
        "mask": np.stack(
            [_matrix(r, "mask", path, k, (N_SENSORS, N_SENSORS)) for k, r in enumerate(records)]
        ).astype(bool),
    }
    return out


def write_targets(path: str | Path, times, positions, rotations, contacts) -> None:
    """Supervision targets aligned with the model-input stream."""
    records = [
        {
            "t": float(times[k]),
            "positions": positions[k].tolist(),
            "rotations": rotations[k].tolist(),
            "contacts": contacts[k].tolist(),
        }
        for k in range(len(times))
    ]
    write_jsonl(path, records)


def read_targets(path: str | Path) -> dict[str, np.ndarray]:
    records = read_jsonl(path)
    if not records:
        raise DataError(f"{path}: empty target stream")
    return {
        "times": np.array([r["t"] for r in records]),
        "positions": np.stack(
            [_matrix(r, "positions", path, k, (N_SENSORS, 3)) for k, r in enumerate(records)]
        ),
        "rotations": np.stack(
            [_matrix(r, "rotations", path, k, (15, 6)) for k, r in enumerate(records)]
        ),
        "contacts": np.stack(
            [_matrix(r, "contacts", path, k, (2,)) for k, r in enumerate(records)]
        ),
    }


# -- metric reports ----------------------------------------------------------


def write_report_json(path: str | Path, reports: dict[str, MetricReport]) -> None:
    doc = {tag: rep.to_dict() for tag, rep in reports.items()}
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def read_report_json(path: str | Path) -> dict[str, MetricReport]:
    p = _require(Path(path))
    try:
        doc = json.loads(p.read_text())
        out = {}
        for tag, rec in doc.items():
            rmse = rec.get("distance_rmse_m")
            out[tag] = MetricReport(
                split=rec["split"],
                sip_error_deg=float(rec["sip_error_deg"]),
                pos_error_cm=float(rec["pos_error_cm"]),
                jitter_km_s3=float(rec["jitter_km_s3"]),
                distance_rmse_m=None if rmse is None else tuple(rmse),
            )
        return out
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise DataError(f"report {p} is malformed: {exc}") from exc


def write_report_csv(path: str | Path, reports: dict[str, MetricReport]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["split", "sip_error_deg", "pos_error_cm", "jitter_km_s3", "mean_distance_rmse_m"])
        for tag in ("overall", "slow", "fast"):
            if tag not in reports:
                continue
            rep = reports[tag]
            rmse = "" if rep.distance_rmse_m is None else repr(float(np.mean(rep.distance_rmse_m)))
            w.writerow(
                [tag, repr(rep.sip_error_deg), repr(rep.pos_error_cm), repr(rep.jitter_km_s3), rmse]
            )
