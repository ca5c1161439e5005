import struct

import numpy as np
import pytest

from core.errors import LogFormatError
from simulation.episode_log import read_log, write_log


def test_log_round_trip(tmp_path, make_log):
    log = make_log(n=5)
    path = str(tmp_path / "logs" / "episode.dpl")
    write_log(path, log)
    back = read_log(path)
    assert back.route == log.route
    assert len(back) == 5
    for a, b in zip(log.samples, back.samples):
        assert a.timestamp == b.timestamp
        assert a.gnss == b.gnss
        np.testing.assert_allclose(b.cloud.xyz, a.cloud.xyz, atol=1e-6)
        np.testing.assert_array_equal(b.cloud.classes, a.cloud.classes)
        np.testing.assert_allclose(b.imu.to_array(), a.imu.to_array(), atol=1e-6)
        assert b.omega_l == pytest.approx(a.omega_l, rel=1e-6)
        assert b.steering == pytest.approx(a.steering, rel=1e-6)
        assert b.throttle == pytest.approx(a.throttle, rel=1e-6)
        np.testing.assert_allclose(b.waypoints, a.waypoints, atol=1e-6)
        assert b.command == a.command


def test_empty_cloud_sample(tmp_path, make_log):
    from perception.projection import LabeledPointCloud
    log = make_log(n=2)
    log.samples[1].cloud = LabeledPointCloud.empty(log.samples[1].timestamp)
    path = str(tmp_path / "e.dpl")
    write_log(path, log)
    assert len(read_log(path).samples[1].cloud) == 0


def test_corrupt_tail_strict_and_lenient(tmp_path, make_log):
    path = tmp_path / "cut.dpl"
    write_log(str(path), make_log(n=6))
    blob = path.read_bytes()
    path.write_bytes(blob[:-40])
    with pytest.raises(LogFormatError):
        read_log(str(path), strict=True)
    with pytest.warns(UserWarning):
        log = read_log(str(path), strict=False)
    assert len(log) == 5


def test_bad_magic_and_version(tmp_path, make_log):
    path = tmp_path / "bad.dpl"
    write_log(str(path), make_log(n=1))
    blob = path.read_bytes()
    path.write_bytes(b"XXXX" + blob[4:])
    with pytest.raises(LogFormatError):
        read_log(str(path), strict=False)
    path.write_bytes(blob[:4] + struct.pack("<I", 7) + blob[8:])
    with pytest.raises(LogFormatError):
        read_log(str(path))
    with pytest.raises(LogFormatError):
        read_log(str(tmp_path / "absent.dpl"))


def test_non_increasing_timestamps_rejected(tmp_path, make_log):
    log = make_log(n=3)
    log.samples[2].timestamp = log.samples[1].timestamp
    path = str(tmp_path / "t.dpl")
    write_log(path, log)
    with pytest.raises(LogFormatError):
        read_log(path)


def test_invalid_command_rejected(tmp_path, make_log):
    log = make_log(n=2)
    log.samples[0].command = 5
    path = str(tmp_path / "c.dpl")
    write_log(path, log)
    with pytest.raises(LogFormatError):
        read_log(path)
    with pytest.warns(UserWarning):
        assert len(read_log(path, strict=False)) == 0


def test_trailing_bytes_rejected_in_strict_mode(tmp_path, make_log):
    path = tmp_path / "extra.dpl"
    write_log(str(path), make_log(n=2))
    path.write_bytes(path.read_bytes() + b"\x00\x01")
    with pytest.raises(LogFormatError):
        read_log(str(path))
    assert len(read_log(str(path), strict=False)) == 2
