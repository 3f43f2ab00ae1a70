"""Aggregate fused and feature series into per-session skill reports.

A report reduces one session to the quantities that separate practiced from
unpracticed scanning: how many fused grid samples the search took, how far
the probe orientation travelled, how smooth the angular-speed profile was
(SPARC, LDLJ), and how stable the image texture stayed.  ``classify`` turns
a report into an expert-like / novice-like / indeterminate label against
calibrated thresholds; ``compare`` ranks two reports directly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .features import (
    GlcmConfig,
    SmoothnessConfig,
    angular_velocity,
    compute_feature_table,
    log_dimensionless_jerk,
    path_length,
    smooth_speed,
    sparc,
)
from .fusion import ResampleConfig, fuse_streams
from .ingest import Session

__all__ = [
    "ClassifierThresholds",
    "Comparison",
    "METRIC_ORDER",
    "SkillReport",
    "build_report",
    "calibrate_thresholds",
    "classify",
    "compare",
    "report_document",
]

# Fixed metric ordering for comparison/report output (stable for diffing).
METRIC_ORDER = (
    "n_samples",
    "duration_s",
    "path_length_rad",
    "ldlj",
    "sparc",
    "mean_asm",
    "mean_energy",
    "mean_homogeneity",
    "texture_stability",
)


@dataclass(frozen=True)
class SkillReport:
    session_id: str
    n_samples: int  # fused grid length; one sample = one grid instant
    duration_s: float
    delta_t_us: int
    path_length_rad: float
    ldlj: float | None
    sparc: float | None
    mean_asm: float | None
    mean_energy: float | None
    mean_homogeneity: float | None
    texture_stability: float | None  # std dev of homogeneity over time
    flags: tuple[str, ...] = ()


@dataclass(frozen=True)
class ClassifierThresholds:
    max_expert_samples: int
    min_expert_sparc: float


@dataclass(frozen=True)
class Comparison:
    a: SkillReport
    b: SkillReport
    deltas: dict  # metric -> a minus b (None when either side is absent)
    smoother: str  # session_id with greater sparc, or "tie"
    quicker: str  # session_id with fewer samples, or "tie"


def build_report(
    session: Session,
    fuse_cfg: ResampleConfig | None = None,
    glcm_cfg: GlcmConfig | None = None,
    smoothness: SmoothnessConfig | None = None,
) -> SkillReport:
    """Run fuse -> features -> metrics for one session.

    Deterministic: identical session content and configs give identical
    report fields.  Smoothness metrics that cannot be computed (e.g. a
    motionless session) become None plus a flag instead of an error.
    """
    fuse_cfg = fuse_cfg or ResampleConfig()
    glcm_cfg = glcm_cfg or GlcmConfig()
    smoothness = smoothness or SmoothnessConfig()

    fused = fuse_streams(session, fuse_cfg)
    table = compute_feature_table(session, fused, glcm_cfg)
    n = len(fused)
    duration_s = (n - 1) * fuse_cfg.delta_t_us / 1e6
    path = path_length(fused) if n >= 2 else 0.0

    flags: list[str] = []
    ldlj_val = sparc_val = None
    if n >= 2:
        motion = angular_velocity(fused, fuse_cfg.delta_t_us)
        speed = smooth_speed(motion.speed, smoothness.speed_smoothing_window)
        try:
            sparc_val = sparc(
                speed,
                1e6 / fuse_cfg.delta_t_us,
                smoothness.sparc_cutoff_hz,
                smoothness.sparc_amplitude_threshold,
            )
        except ValueError as exc:
            flags.append(f"sparc: {exc}")
        try:
            ldlj_val = log_dimensionless_jerk(speed, fuse_cfg.delta_t_us / 1e6)
        except ValueError as exc:
            flags.append(f"ldlj: {exc}")
    else:
        flags.append("session too short for motion metrics")

    homogeneity = [r.texture.homogeneity for r in table if r.texture is not None]
    mean_asm = mean_energy = mean_homogeneity = stability = None
    if homogeneity:
        mean_asm = float(np.mean([r.texture.asm for r in table if r.texture is not None]))
        mean_energy = float(np.mean([r.texture.energy for r in table if r.texture is not None]))
        mean_homogeneity = float(np.mean(homogeneity))
        stability = float(np.std(homogeneity))
    else:
        flags.append("no frames within staleness window")

    return SkillReport(
        session_id=session.meta.session_id,
        n_samples=n,
        duration_s=duration_s,
        delta_t_us=fuse_cfg.delta_t_us,
        path_length_rad=path,
        ldlj=ldlj_val,
        sparc=sparc_val,
        mean_asm=mean_asm,
        mean_energy=mean_energy,
        mean_homogeneity=mean_homogeneity,
        texture_stability=stability,
        flags=tuple(flags),
    )


def compare(a: SkillReport, b: SkillReport) -> Comparison:
    """Per-metric deltas (a - b) plus smoother/quicker designations."""
    if a.delta_t_us != b.delta_t_us:
        raise ValueError("incomparable grids")
    deltas = {}
    for metric in METRIC_ORDER:
        va, vb = getattr(a, metric), getattr(b, metric)
        deltas[metric] = None if va is None or vb is None else va - vb
    if a.sparc is None or b.sparc is None or a.sparc == b.sparc:
        smoother = "tie"
    else:
        smoother = a.session_id if a.sparc > b.sparc else b.session_id
    if a.n_samples == b.n_samples:
        quicker = "tie"
    else:
        quicker = a.session_id if a.n_samples < b.n_samples else b.session_id
    return Comparison(a=a, b=b, deltas=deltas, smoother=smoother, quicker=quicker)


def classify(report: SkillReport, thresholds: ClassifierThresholds) -> str:
    """Label a report expert_like / novice_like / indeterminate.

    expert_like needs both few samples and high SPARC; novice_like needs
    both strictly inverted; anything else (including missing SPARC) is
    indeterminate.
    """
    few_samples = report.n_samples <= thresholds.max_expert_samples
    smooth = report.sparc is not None and report.sparc >= thresholds.min_expert_sparc
    if few_samples and smooth:
        return "expert_like"
    many_samples = report.n_samples > thresholds.max_expert_samples
    jerky = report.sparc is not None and report.sparc < thresholds.min_expert_sparc
    if many_samples and jerky:
        return "novice_like"
    return "indeterminate"


def calibrate_thresholds(
    expert_reports: Iterable[SkillReport], novice_reports: Iterable[SkillReport]
) -> ClassifierThresholds:
    """Midpoints between the per-class extremes of calibration reports."""
    experts = list(expert_reports)
    novices = list(novice_reports)
    if not experts or not novices:
        raise ValueError("need calibration reports for both classes")
    if any(r.sparc is None for r in experts + novices):
        raise ValueError("calibration reports must have sparc values")
    max_e_n = max(r.n_samples for r in experts)
    min_n_n = min(r.n_samples for r in novices)
    min_e_s = min(r.sparc for r in experts)
    max_n_s = max(r.sparc for r in novices)
    return ClassifierThresholds(
        max_expert_samples=(max_e_n + min_n_n) // 2,
        min_expert_sparc=(min_e_s + max_n_s) / 2.0,
    )


def report_from_document(doc: dict) -> SkillReport:
    """Rebuild a SkillReport from a parsed ``report.json`` document."""
    try:
        values = {metric: doc[metric] for metric in METRIC_ORDER}
        return SkillReport(
            session_id=doc["session_id"],
            delta_t_us=int(doc["config"]["delta_t_us"]),
            flags=tuple(doc.get("flags", ())),
            **values,
        )
    except KeyError as exc:
        raise ValueError(f"report document missing key {exc}") from None


def report_document(
    report: SkillReport,
    fuse_cfg: ResampleConfig,
    glcm_cfg: GlcmConfig,
    smoothness: SmoothnessConfig,
) -> dict:
    """JSON-ready report with the producing configuration echoed in."""
    doc = {"session_id": report.session_id}
    for metric in METRIC_ORDER:
        doc[metric] = getattr(report, metric)
    doc["flags"] = list(report.flags)
    doc["config"] = {
        "delta_t_us": fuse_cfg.delta_t_us,
        "pose_policy": fuse_cfg.pose_policy,
        "frame_policy": fuse_cfg.frame_policy,
        "max_frame_staleness_us": fuse_cfg.max_frame_staleness_us,
        "glcm": {
            "levels": glcm_cfg.levels,
            "offsets": [list(o) for o in glcm_cfg.offsets],
            "symmetric": glcm_cfg.symmetric,
            "roi": list(glcm_cfg.roi) if glcm_cfg.roi else None,
        },
        "speed_smoothing_window": smoothness.speed_smoothing_window,
        "sparc_cutoff_hz": smoothness.sparc_cutoff_hz,
        "sparc_amplitude_threshold": smoothness.sparc_amplitude_threshold,
    }
    return doc
