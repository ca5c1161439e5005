"""
Episode Log Module
Binary 4 Hz observation logs.

Header: magic "DPL2", u32 version, u32 sample count, u32 route point count,
route points (f64 lat, f64 lon). Per sample: f64 timestamp, u32 point count,
points (3×f32 + u8 class), GNSS f64×2, IMU f32×9, wheel speeds f32×2,
steering f32, throttle f32, ground-truth waypoints f32×6, command u8.
All little-endian.
"""
import os
import struct
import warnings
from dataclasses import dataclass, field
from typing import Iterator, List, Tuple

import numpy as np

from core.errors import LogFormatError
from navigation.geo import GeoPoint
from navigation.heading_filter import ImuSample
from perception.projection import LabeledPointCloud

MAGIC = b"DPL2"
VERSION = 1
_HEADER = struct.Struct("<4sIII")
_ROUTE_POINT = struct.Struct("<dd")
_SAMPLE_HEAD = struct.Struct("<dI")
_POINT = np.dtype([("xyz", "<f4", (3,)), ("cls", "u1")])
_SAMPLE_TAIL = struct.Struct("<dd9f2fff6fB")


@dataclass
class ObservationSample:
    timestamp: float
    cloud: LabeledPointCloud
    gnss: GeoPoint
    imu: ImuSample
    omega_l: float
    omega_r: float
    steering: float
    throttle: float
    waypoints: np.ndarray
    command: int


@dataclass
class EpisodeLog:
    route: List[GeoPoint]
    samples: List[ObservationSample] = field(default_factory=list)
    version: int = VERSION

    def __len__(self) -> int:
        return len(self.samples)


def _encode_sample(sample: ObservationSample) -> bytes:
    points = np.empty(len(sample.cloud), dtype=_POINT)
    points["xyz"] = sample.cloud.xyz.astype(np.float32)
    points["cls"] = sample.cloud.classes
    wps = np.asarray(sample.waypoints, dtype=np.float64).reshape(6)
    return b"".join([
        _SAMPLE_HEAD.pack(sample.timestamp, len(points)),
        points.tobytes(),
        _SAMPLE_TAIL.pack(
            sample.gnss.lat, sample.gnss.lon,
            *sample.imu.to_array().tolist(),
            sample.omega_l, sample.omega_r,
            sample.steering, sample.throttle,
            *wps.tolist(),
            int(sample.command),
        ),
    ])


def write_log(path: str, log: EpisodeLog) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, log.version, len(log.samples), len(log.route)))
        for p in log.route:
            f.write(_ROUTE_POINT.pack(p.lat, p.lon))
        for sample in log.samples:
            f.write(_encode_sample(sample))


def _decode_samples(blob: bytes, offset: int, count: int, path: str) -> Iterator[Tuple["ObservationSample", int]]:
    previous = None
    for index in range(count):
        try:
            timestamp, n_points = _SAMPLE_HEAD.unpack_from(blob, offset)
            offset += _SAMPLE_HEAD.size
            end = offset + n_points * _POINT.itemsize
            if end + _SAMPLE_TAIL.size > len(blob):
                raise LogFormatError(f"{path}: sample {index} truncated")
            points = np.frombuffer(blob, dtype=_POINT, count=n_points, offset=offset)
            offset = end
            tail = _SAMPLE_TAIL.unpack_from(blob, offset)
            offset += _SAMPLE_TAIL.size
        except struct.error as e:
            raise LogFormatError(f"{path}: sample {index} malformed: {e}") from e

        if previous is not None and not timestamp > previous:
            raise LogFormatError(f"{path}: sample {index} timestamp {timestamp} not increasing")
        command = int(tail[21])
        if command not in (0, 1, 2):
            raise LogFormatError(f"{path}: sample {index} has invalid command {command}")
        values = np.asarray(tail[:21], dtype=np.float64)
        if not np.all(np.isfinite(values)) or not np.all(np.isfinite(points["xyz"])):
            raise LogFormatError(f"{path}: sample {index} contains non-finite values")
        try:
            cloud = LabeledPointCloud(points["xyz"].astype(np.float64), points["cls"], timestamp)
            gnss = GeoPoint(tail[0], tail[1])
        except ValueError as e:
            raise LogFormatError(f"{path}: sample {index} invalid: {e}") from e
        previous = timestamp
        yield ObservationSample(
            timestamp=timestamp,
            cloud=cloud,
            gnss=gnss,
            imu=ImuSample.from_array(tail[2:11]),
            omega_l=tail[11],
            omega_r=tail[12],
            steering=tail[13],
            throttle=tail[14],
            waypoints=np.asarray(tail[15:21], dtype=np.float64),
            command=command,
        ), offset


def read_log(path: str, strict: bool = True) -> EpisodeLog:
    """
    Read an episode log.

    Args:
        path: Log file
        strict: Raise on the first corrupt record; otherwise warn and keep the
            samples decoded before it

    Raises:
        LogFormatError: unreadable header, or a corrupt record in strict mode
    """
    try:
        with open(path, "rb") as f:
            blob = f.read()
    except OSError as e:
        raise LogFormatError(f"cannot read log {path}: {e}") from e
    if len(blob) < _HEADER.size:
        raise LogFormatError(f"{path}: truncated header")
    magic, version, count, n_route = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise LogFormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise LogFormatError(f"{path}: unsupported version {version}")
    offset = _HEADER.size
    if offset + n_route * _ROUTE_POINT.size > len(blob):
        raise LogFormatError(f"{path}: truncated route")
    route = []
    for _ in range(n_route):
        lat, lon = _ROUTE_POINT.unpack_from(blob, offset)
        offset += _ROUTE_POINT.size
        route.append(GeoPoint(lat, lon))

    log = EpisodeLog(route=route, version=version)
    decoder = _decode_samples(blob, offset, count, path)
    while True:
        try:
            sample, offset = next(decoder)
        except StopIteration:
            break
        except LogFormatError as e:
            if strict:
                raise
            warnings.warn(f"{e}; keeping {len(log.samples)} samples")
            break
        log.samples.append(sample)
    if strict and offset != len(blob):
        raise LogFormatError(f"{path}: {len(blob) - offset} trailing bytes")
    return log
