import numpy as np
import pytest

from eventpose.events import make_events
from eventpose.features import ModelCloud
from eventpose.geometry import Pose, Twist, exp_se3
from eventpose.io import (read_cloud, read_cloud_ply, read_cloud_xyz,
                          read_events, read_events_binary, read_events_text,
                          read_keyframes, read_pose, read_trajectory,
                          write_cloud_xyz, write_events, write_events_binary,
                          write_events_text, write_keyframes, write_pose,
                          write_trajectory)
from eventpose.tracker import TrackedPose


def random_events(n=200, seed=0):
    rng = np.random.default_rng(seed)
    t = np.sort(rng.integers(0, 1_000_000, n))
    return make_events(t, rng.integers(0, 346, n), rng.integers(0, 260, n),
                       rng.choice([-1, 1], n))


def random_pose(seed=0):
    rng = np.random.default_rng(seed)
    return exp_se3(Twist(rng.uniform(-1, 1, 3), rng.uniform(-1, 1, 3)))


def test_events_text_round_trip(tmp_path):
    events = random_events()
    path = tmp_path / "ev.txt"
    write_events_text(path, events)
    back = read_events_text(path)
    assert np.array_equal(back, events)
    # on disk the polarity column is 0/1
    cols = np.loadtxt(path, dtype=np.int64, ndmin=2)
    assert set(np.unique(cols[:, 3])) <= {0, 1}
    assert np.array_equal(cols[:, 3] == 1, events["p"] == 1)


def test_events_binary_round_trip_byte_exact(tmp_path):
    events = random_events(seed=1)
    path = tmp_path / "ev.bin"
    write_events_binary(path, events)
    assert path.stat().st_size == 13 * len(events)
    back = read_events_binary(path)
    assert back.tobytes() == events.tobytes()


def test_events_dispatch_on_extension(tmp_path):
    events = random_events(seed=2)
    for name in ("a.bin", "b.txt"):
        path = tmp_path / name
        write_events(path, events)
        assert np.array_equal(read_events(path), events)
    # .bin really is binary, not text
    assert (tmp_path / "a.bin").stat().st_size != (tmp_path / "b.txt").stat().st_size


def test_events_text_rejects_bad_polarity(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("0 1 2 3\n")
    with pytest.raises(ValueError):
        read_events_text(path)
    path.write_text("0 1 2\n")
    with pytest.raises(ValueError):
        read_events_text(path)


def test_events_binary_rejects_bad_stream(tmp_path):
    path = tmp_path / "bad.bin"
    events = random_events(seed=3)
    events["p"][5] = 0
    events.tofile(path)
    with pytest.raises(ValueError):
        read_events_binary(path)
    events = random_events(seed=3)
    events["t"][0] = 2_000_000     # out of order
    events.tofile(path)
    with pytest.raises(ValueError):
        read_events_binary(path)


def test_cloud_xyz_round_trip(tmp_path):
    rng = np.random.default_rng(4)
    cloud = ModelCloud(rng.uniform(-0.2, 0.2, (50, 3)))
    path = tmp_path / "c.xyz"
    write_cloud_xyz(path, cloud)
    back = read_cloud_xyz(path)
    assert np.allclose(back.points, cloud.points, atol=1e-9)
    assert back.source == str(path)


def test_cloud_ply_reads_shuffled_properties(tmp_path):
    path = tmp_path / "c.ply"
    path.write_text("\n".join([
        "ply", "format ascii 1.0",
        "comment something",
        "element vertex 3",
        "property float z", "property float y", "property float x",
        "element face 1",
        "property list uchar int vertex_indices",
        "end_header",
        "0.3 0.2 0.1",
        "0.6 0.5 0.4",
        "0.9 0.8 0.7",
        "3 0 1 2",
    ]) + "\n")
    cloud = read_cloud_ply(path)
    assert np.allclose(cloud.points, [[0.1, 0.2, 0.3],
                                      [0.4, 0.5, 0.6],
                                      [0.7, 0.8, 0.9]], atol=1e-12)


def test_cloud_ply_rejects_malformed(tmp_path):
    path = tmp_path / "c.ply"
    path.write_text("ply\nformat binary_little_endian 1.0\nend_header\n")
    with pytest.raises(ValueError):
        read_cloud_ply(path)
    path.write_text("ply\nformat ascii 1.0\nelement vertex 1\n"
                    "property float x\nproperty float y\nproperty float z\n")
    with pytest.raises(ValueError):     # header never ends
        read_cloud_ply(path)
    path.write_text("ply\nformat ascii 1.0\nend_header\n")
    with pytest.raises(ValueError):     # no vertex element
        read_cloud_ply(path)
    path.write_text("not a ply\n")
    with pytest.raises(ValueError):
        read_cloud_ply(path)


def test_cloud_dispatch(tmp_path):
    path = tmp_path / "c.ply"
    path.write_text("\n".join([
        "ply", "format ascii 1.0", "element vertex 1",
        "property float x", "property float y", "property float z",
        "end_header", "1.0 2.0 3.0"]) + "\n")
    assert np.allclose(read_cloud(path).points, [[1.0, 2.0, 3.0]])
    path = tmp_path / "c.xyz"
    path.write_text("1.0 2.0 3.0\n")
    assert np.allclose(read_cloud(path).points, [[1.0, 2.0, 3.0]])


def test_trajectory_round_trip(tmp_path):
    rows = [TrackedPose(1000 * (i + 1), random_pose(i), 10 + i,
                        0.5 * i, "ok") for i in range(4)]
    rows.append(TrackedPose(9000, random_pose(9), 0, float("nan"), "coasted"))
    path = tmp_path / "traj.txt"
    write_trajectory(path, rows)
    back = read_trajectory(path)
    assert len(back) == len(rows)
    for a, b in zip(back, rows):
        assert a.t == b.t
        assert a.status == b.status
        assert a.n_matches == b.n_matches
        assert np.allclose(a.pose.matrix(), b.pose.matrix(), atol=1e-9)
        if np.isnan(b.final_cost):
            assert np.isnan(a.final_cost)
        else:
            assert a.final_cost == pytest.approx(b.final_cost, abs=1e-6)


def test_trajectory_rejects_short_rows(tmp_path):
    path = tmp_path / "traj.txt"
    path.write_text("1000 1 0 0 0\n")
    with pytest.raises(ValueError):
        read_trajectory(path)


def test_keyframes_round_trip(tmp_path):
    frames = [(0, random_pose(20)), (50_000, random_pose(21)),
              (100_000, random_pose(22))]
    path = tmp_path / "kf.txt"
    write_keyframes(path, frames)
    path.write_text("# a comment\n" + path.read_text())
    back = read_keyframes(path)
    assert len(back) == 3
    for (ta, pa), (tb, pb) in zip(back, frames):
        assert ta == tb
        assert np.allclose(pa.rotation, pb.rotation, atol=1e-8)
        assert np.allclose(pa.translation, pb.translation, atol=1e-9)


def test_pose_round_trip(tmp_path):
    pose = random_pose(30)
    path = tmp_path / "pose.txt"
    write_pose(path, pose)
    back = read_pose(path)
    assert np.allclose(back.rotation, pose.rotation, atol=1e-8)
    assert np.allclose(back.translation, pose.translation, atol=1e-9)
    path.write_text("1 0 0 0\n")
    with pytest.raises(ValueError):
        read_pose(path)
