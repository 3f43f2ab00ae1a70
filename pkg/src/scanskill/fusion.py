"""Place both sensor streams on one uniform time grid.

The fused timeline is an arithmetic grid ``origin + k·delta_t_us``.  Pose is
interpolated between its bracketing samples (SLERP or nearest); each grid
instant is associated with the frame chosen by the frame policy, provided
that frame lies within ``max_frame_staleness_us``.

Grid placement: the origin is the first pose timestamp at or after the
instant both streams have started; the grid then runs to the end of the pose
stream (pose orientation is never extrapolated).  Frames that stop early
simply leave later grid instants frame-less once staleness is exceeded.
Disjoint streams are an error.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Literal, NamedTuple

import numpy as np

from .core import q_normalize
from .ingest import PoseSample, Session

__all__ = [
    "FusedSample",
    "ResampleConfig",
    "StreamingFuser",
    "fuse_streams",
    "hemisphere_align",
    "resample_poses",
    "slerp",
    "write_fused_csv",
]

FUSED_HEADER = "t_us,w,x,y,z,frame_idx,staleness_us"

# Below this quaternion-space angle SLERP degrades to normalized lerp;
# the two agree to O(angle^2) there and lerp avoids the 0/0.
_SLERP_MIN_ANGLE = 1e-7

PosePolicy = Literal["slerp", "nearest"]
FramePolicy = Literal["nearest", "latest_not_after"]


@dataclass(frozen=True)
class ResampleConfig:
    """Fusion grid parameters. ``delta_t_us`` is the grid step."""

    delta_t_us: int = 10_000
    pose_policy: PosePolicy = "slerp"
    frame_policy: FramePolicy = "nearest"
    max_frame_staleness_us: int = 100_000

    def __post_init__(self) -> None:
        if self.delta_t_us < 1:
            raise ValueError("delta_t_us must be >= 1")
        if self.pose_policy not in ("slerp", "nearest"):
            raise ValueError(f"unknown pose_policy {self.pose_policy!r}")
        if self.frame_policy not in ("nearest", "latest_not_after"):
            raise ValueError(f"unknown frame_policy {self.frame_policy!r}")
        if self.max_frame_staleness_us < self.delta_t_us:
            raise ValueError("max_frame_staleness_us must be >= delta_t_us")


class FusedSample(NamedTuple):
    """One record on the fused grid."""

    t_us: int
    q: np.ndarray  # (4,), unit
    frame_idx: int | None
    frame_staleness_us: int | None


def hemisphere_align(poses: list[PoseSample]) -> list[PoseSample]:
    """Flip quaternion signs so consecutive dot products are >= 0.

    ``q`` and ``-q`` encode the same rotation, so the represented motion is
    unchanged; the output is safe to interpolate continuously.  Idempotent.
    """
    if not poses:
        return []
    out = [poses[0]]
    prev = poses[0].q
    for p in poses[1:]:
        q = p.q
        if float(np.dot(prev, q)) < 0.0:
            q = -q
            p = PoseSample(p.t_us, q)
        out.append(p)
        prev = q
    return out


def slerp(a: np.ndarray, b: np.ndarray, u: float) -> np.ndarray:
    """Interpolate along the great-circle arc from ``a`` (u=0) to ``b`` (u=1).

    Inputs must be unit and hemisphere-aligned (dot >= 0).  For angles below
    ``1e-7`` rad the normalized-lerp fallback is used.
    """
    if not 0.0 <= u <= 1.0:
        raise ValueError(f"interpolation parameter u={u} outside [0, 1]")
    result = _slerp_pairs(
        np.asarray(a, dtype=np.float64)[None, :],
        np.asarray(b, dtype=np.float64)[None, :],
        np.array([float(u)]),
    )
    return result[0]


def _slerp_pairs(a: np.ndarray, b: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Row-wise slerp over (n, 4) arrays; returns unit (n, 4)."""
    diff = np.linalg.norm(a - b, axis=-1)
    summ = np.linalg.norm(a + b, axis=-1)
    omega = 2.0 * np.arctan2(diff, summ)  # 4-vector angle; <= pi/2 when aligned
    out = np.empty_like(a)
    small = omega < _SLERP_MIN_ANGLE
    if np.any(small):
        us = u[small, None]
        out[small] = (1.0 - us) * a[small] + us * b[small]
    big = ~small
    if np.any(big):
        om = omega[big]
        sin_om = np.sin(om)
        w_a = np.sin((1.0 - u[big]) * om) / sin_om
        w_b = np.sin(u[big] * om) / sin_om
        out[big] = w_a[:, None] * a[big] + w_b[:, None] * b[big]
    return q_normalize(out)


def _interpolate_on_grid(
    t_us: np.ndarray, quats: np.ndarray, grid: np.ndarray, pose_policy: str
) -> np.ndarray:
    """Pose at each grid instant from its bracketing input pair."""
    idx = np.searchsorted(t_us, grid, side="right") - 1
    idx = np.clip(idx, 0, len(t_us) - 2)
    t0 = t_us[idx]
    t1 = t_us[idx + 1]
    u = (grid - t0) / (t1 - t0)
    if pose_policy == "nearest":
        pick = np.where(u <= 0.5, idx, idx + 1)  # tie -> earlier sample
        return quats[pick].copy()
    return _slerp_pairs(quats[idx], quats[idx + 1], u.astype(np.float64))


def resample_poses(poses: list[PoseSample], cfg: ResampleConfig) -> list[PoseSample]:
    """Resample a pose stream onto the uniform grid anchored at its first sample.

    The grid covers ``t0, t0+dt, ...`` up to the last input timestamp; no
    extrapolation happens beyond the input span.  Inputs must be
    hemisphere-aligned and strictly increasing in time.
    """
    if len(poses) < 2:
        raise ValueError("cannot interpolate")
    t_us = np.array([p.t_us for p in poses], dtype=np.int64)
    quats = np.stack([p.q for p in poses])
    dt = cfg.delta_t_us
    n = int((t_us[-1] - t_us[0]) // dt) + 1
    grid = t_us[0] + dt * np.arange(n, dtype=np.int64)
    out_q = _interpolate_on_grid(t_us, quats, grid, cfg.pose_policy)
    return [PoseSample(int(t), q) for t, q in zip(grid, out_q)]


def _associate_frames(
    frame_t: np.ndarray, grid: np.ndarray, cfg: ResampleConfig
) -> tuple[np.ndarray, np.ndarray]:
    """Frame index and staleness per grid instant; index -1 means none."""
    if cfg.frame_policy == "latest_not_after":
        idx = np.searchsorted(frame_t, grid, side="right") - 1
        staleness = np.where(idx >= 0, grid - frame_t.take(idx, mode="clip"), 0)
        valid = (idx >= 0) & (staleness <= cfg.max_frame_staleness_us)
    else:  # nearest
        pos = np.searchsorted(frame_t, grid)
        left = np.clip(pos - 1, 0, len(frame_t) - 1)
        right = np.clip(pos, 0, len(frame_t) - 1)
        d_left = np.abs(grid - frame_t[left])
        d_right = np.abs(frame_t[right] - grid)
        take_left = d_left <= d_right  # tie -> earlier frame
        idx = np.where(take_left, left, right)
        staleness = np.minimum(d_left, d_right)
        valid = staleness <= cfg.max_frame_staleness_us
    idx = np.where(valid, idx, -1)
    staleness = np.where(valid, staleness, 0)
    return idx, staleness


def fuse_streams(session: Session, cfg: ResampleConfig) -> list[FusedSample]:
    """Fuse a session's pose and frame streams onto the uniform grid."""
    if len(session.poses) < 2:
        raise ValueError("cannot interpolate")
    if not session.frames:
        raise ValueError("streams do not overlap in time")
    aligned = hemisphere_align(session.poses)
    pose_t = np.array([p.t_us for p in aligned], dtype=np.int64)
    quats = np.stack([p.q for p in aligned])
    frame_t = np.array([f.t_us for f in session.frames], dtype=np.int64)

    if frame_t[0] > pose_t[-1] or pose_t[0] > frame_t[-1]:
        raise ValueError("streams do not overlap in time")

    start = max(int(pose_t[0]), int(frame_t[0]))
    origin_idx = int(np.searchsorted(pose_t, start, side="left"))
    origin = int(pose_t[origin_idx])
    dt = cfg.delta_t_us
    n = int((int(pose_t[-1]) - origin) // dt) + 1
    grid = origin + dt * np.arange(n, dtype=np.int64)

    out_q = _interpolate_on_grid(pose_t, quats, grid, cfg.pose_policy)
    f_idx, f_stale = _associate_frames(frame_t, grid, cfg)
    return [
        FusedSample(int(t), q, int(i) if i >= 0 else None, int(s) if i >= 0 else None)
        for t, q, i, s in zip(grid, out_q, f_idx, f_stale)
    ]


def write_fused_csv(dest, fused: Iterable[FusedSample]) -> None:
    """Write fused samples as CSV (``frame_idx``/staleness empty when none)."""
    if isinstance(dest, (str, Path)):
        with open(dest, "w", encoding="utf-8", newline="\n") as fh:
            write_fused_csv(fh, fused)
        return
    dest.write(FUSED_HEADER + "\n")
    for s in fused:
        w, x, y, z = (repr(float(v)) for v in s.q)
        idx = "" if s.frame_idx is None else str(s.frame_idx)
        stale = "" if s.frame_staleness_us is None else str(s.frame_staleness_us)
        dest.write(f"{s.t_us},{w},{x},{y},{z},{idx},{stale}\n")


class StreamingFuser:
    """Incremental fuser producing exactly the :func:`fuse_streams` output.

    Feed each stream in timestamp order through :meth:`push_pose` /
    :meth:`push_frame`; every call returns the fused samples that became
    final.  Call :meth:`finish` after both streams end to flush the tail.

    A grid instant becomes final once the pose stream has reached it and the
    frame stream has advanced past its staleness window, so the internal
    buffers are bounded by ``max_frame_staleness_us`` (one reorder window),
    not by session length.
    """

    def __init__(self, cfg: ResampleConfig) -> None:
        self._cfg = cfg
        self._poses: deque[PoseSample] = deque()
        self._frames: deque[tuple[int, int]] = deque()  # (t_us, session frame index)
        self._n_poses = 0
        self._n_frames = 0
        self._prev_q: np.ndarray | None = None
        self._first_pose_t: int | None = None
        self._first_frame_t: int | None = None
        self._last_pose_t: int | None = None
        self._last_frame_t: int | None = None
        self._next_t: int | None = None  # next grid instant to emit
        self._finished = False

    def push_pose(self, pose: PoseSample) -> list[FusedSample]:
        if self._last_pose_t is not None and pose.t_us <= self._last_pose_t:
            raise ValueError("pose timestamps must be strictly increasing")
        q = pose.q
        if self._prev_q is not None and float(np.dot(self._prev_q, q)) < 0.0:
            q = -q
        self._prev_q = q
        self._poses.append(PoseSample(pose.t_us, q))
        self._n_poses += 1
        if self._first_pose_t is None:
            self._first_pose_t = pose.t_us
        self._last_pose_t = pose.t_us
        self._maybe_set_origin()
        return self._emit(flush=False)

    def push_frame(self, t_us: int) -> list[FusedSample]:
        if self._last_frame_t is not None and t_us <= self._last_frame_t:
            raise ValueError("frame timestamps must be strictly increasing")
        self._frames.append((t_us, self._n_frames))
        self._n_frames += 1
        if self._first_frame_t is None:
            self._first_frame_t = t_us
        self._last_frame_t = t_us
        self._maybe_set_origin()
        return self._emit(flush=False)

    def finish(self) -> list[FusedSample]:
        if self._finished:
            return []
        self._finished = True
        if self._n_poses < 2:
            raise ValueError("cannot interpolate")
        if self._n_frames == 0 or self._next_t is None:
            raise ValueError("streams do not overlap in time")
        return self._emit(flush=True)

    def _maybe_set_origin(self) -> None:
        if self._next_t is not None:
            return
        if self._first_pose_t is None or self._first_frame_t is None:
            return
        start = max(self._first_pose_t, self._first_frame_t)
        for p in self._poses:
            if p.t_us >= start:
                self._next_t = p.t_us
                return
        # No buffered pose at/after the joint start yet; wait for more poses.

    def _emit(self, flush: bool) -> list[FusedSample]:
        out: list[FusedSample] = []
        if self._next_t is None:
            return out
        stale_max = self._cfg.max_frame_staleness_us
        while len(self._poses) >= 2:
            t = self._next_t
            if t > self._last_pose_t:
                break  # grid ends at the last pose timestamp
            frames_final = flush or (
                self._last_frame_t is not None and self._last_frame_t >= t + stale_max
            )
            if not frames_final:
                break
            out.append(self._fuse_one(t))
            self._next_t = t + self._cfg.delta_t_us
            self._prune()
        return out

    def _fuse_one(self, t: int) -> FusedSample:
        poses = self._poses
        i = 0
        while i + 2 < len(poses) and poses[i + 1].t_us <= t:
            i += 1
        a, b = poses[i], poses[i + 1]
        u = (t - a.t_us) / (b.t_us - a.t_us)
        if self._cfg.pose_policy == "nearest":
            q = (a.q if u <= 0.5 else b.q).copy()
        else:
            q = _slerp_pairs(a.q[None, :], b.q[None, :], np.array([float(u)]))[0]
        frame_idx, stale = self._pick_frame(t)
        return FusedSample(t, q, frame_idx, stale)

    def _pick_frame(self, t: int) -> tuple[int | None, int | None]:
        policy = self._cfg.frame_policy
        best_idx: int | None = None
        best_d: int | None = None
        for ft, idx in self._frames:
            if policy == "latest_not_after":
                if ft > t:
                    break
                best_idx, best_d = idx, t - ft
            else:  # nearest; tie -> earlier frame
                d = abs(ft - t)
                if best_d is None or d < best_d:
                    best_idx, best_d = idx, d
        if best_idx is None or best_d > self._cfg.max_frame_staleness_us:
            return None, None
        return best_idx, int(best_d)

    def _prune(self) -> None:
        t = self._next_t
        # Keep the bracketing pose pair for t and everything later.
        while len(self._poses) > 2 and self._poses[1].t_us <= t:
            self._poses.popleft()
        # Frames behind the staleness horizon can never be selected again.
        horizon = t - self._cfg.max_frame_staleness_us
        while self._frames and self._frames[0][0] < horizon:
            self._frames.popleft()
