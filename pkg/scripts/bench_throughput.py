#!/usr/bin/env python3
"""Throughput benchmark: fuse + feature extraction against the wall clock.

Builds a synthetic session of the requested duration and frame geometry,
then times the fuse -> features pipeline and reports the ratio to real time
(>= 1.0 means the pipeline keeps up with live acquisition).
"""

import argparse
import sys
import time

from scanskill.features import GlcmConfig, compute_feature_table
from scanskill.fusion import ResampleConfig, fuse_streams
from scanskill.synth import build_session, expert_profile


def main() -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--duration-s", type=float, default=60.0)
    p.add_argument("--frame-size", default="640x480")
    p.add_argument("--delta-t-us", type=int, default=10_000)
    p.add_argument("--levels", type=int, default=32, choices=(8, 16, 32, 64))
    args = p.parse_args()

    width, height = (int(v) for v in args.frame_size.lower().split("x"))
    n_samples = int(args.duration_s * 100) + 1
    profile = expert_profile(
        0, frame_width=width, frame_height=height, n_samples_range=(n_samples, n_samples)
    )
    print(f"generating {args.duration_s:.0f}s session at {width}x{height} ...")
    session = build_session(profile)
    print(f"  {len(session.poses)} poses, {len(session.frames)} frames")

    fuse_cfg = ResampleConfig(delta_t_us=args.delta_t_us)
    glcm_cfg = GlcmConfig(levels=args.levels)
    t0 = time.perf_counter()
    fused = fuse_streams(session, fuse_cfg)
    t1 = time.perf_counter()
    table = compute_feature_table(session, fused, glcm_cfg)
    t2 = time.perf_counter()

    span_s = (fused[-1].t_us - fused[0].t_us) / 1e6
    total = t2 - t0
    print(f"fuse:     {t1 - t0:8.3f} s   ({len(fused)} grid samples)")
    print(f"features: {t2 - t1:8.3f} s   ({len(table)} records)")
    print(f"total:    {total:8.3f} s for {span_s:.1f} s of data "
          f"-> {span_s / total:.1f}x real time")
    return 0 if span_s / total >= 1.0 else 1


if __name__ == "__main__":
    sys.exit(main())
