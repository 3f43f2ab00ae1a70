import math

import numpy as np
import pytest
from scipy.ndimage import uniform_filter

from scanskill.core import q_from_axis_angle, q_multiply, q_normalize
from scanskill.features import (
    GlcmConfig,
    angular_velocity,
    frame_features,
    glcm,
    glcm_counts,
    histogram_stats,
    log_dimensionless_jerk,
    path_length,
    quantize,
    smooth_speed,
    sparc,
    texture_features,
)
from scanskill.ingest import PoseSample

from conftest import IDENTITY, random_unit_quat, smooth_pose_walk


# --- independent oracles -----------------------------------------------------

def naive_glcm_counts(img: np.ndarray, levels: int, offset: tuple[int, int]) -> np.ndarray:
    """Direct enumeration of co-occurring pixel pairs."""
    dx, dy = offset
    h, w = img.shape
    counts = np.zeros((levels, levels), dtype=np.int64)
    for y in range(h):
        for x in range(w):
            y2, x2 = y + dy, x + dx
            if 0 <= y2 < h and 0 <= x2 < w:
                counts[img[y, x], img[y2, x2]] += 1
    return counts


def naive_sparc(v, fs, fc=10.0, amp_th=0.05):
    """Direct-DFT spectral arc length (no FFT), mirroring the stated recipe."""
    v = np.asarray(v, dtype=np.float64)
    n = v.size
    nfft = 2 ** (math.ceil(math.log2(n)) + 4)
    n_bins = nfft // 2 + 1
    freq = np.arange(n_bins) * (fs / nfft)
    ks = np.nonzero(freq <= fc)[0]
    phases = np.exp(-2j * np.pi * np.outer(ks, np.arange(n)) / nfft)
    mag = np.abs(phases @ v)
    m = mag / mag[0]
    last = np.nonzero(m >= amp_th)[0][-1]
    f_sel = freq[ks][: last + 1]
    m_sel = m[: last + 1]
    if f_sel.size < 2:
        return 0.0
    span = f_sel[-1] - f_sel[0]
    return -float(np.sum(np.sqrt((np.diff(f_sel) / span) ** 2 + np.diff(m_sel) ** 2)))


def min_jerk_bell(n: int, dt: float, peak: float = 1.0) -> np.ndarray:
    tau = np.arange(n) / (n - 1)
    return peak * (30 * tau**2 * (1 - tau) ** 2) / 1.875


# --- quantize ----------------------------------------------------------------

class TestQuantize:
    def test_top_bin(self):
        img = np.full((3, 3), 255, dtype=np.uint8)
        assert np.all(quantize(img, 8) == 7)

    def test_bin_edges(self):
        img = np.array([[0, 32, 31]], dtype=np.uint8)
        assert quantize(img, 8).tolist() == [[0, 1, 0]]

    def test_matches_floor_formula_all_levels(self):
        p = np.arange(256, dtype=np.uint8).reshape(16, 16)
        for levels in (8, 16, 32, 64):
            expected = (p.astype(np.int64) * levels) // 256
            assert np.array_equal(quantize(p, levels), expected)

    def test_roi(self):
        img = np.arange(64, dtype=np.uint8).reshape(8, 8)
        out = quantize(img, 8, roi=(2, 1, 4, 3))
        assert out.shape == (3, 4)

    def test_roi_out_of_bounds(self):
        img = np.zeros((8, 8), dtype=np.uint8)
        with pytest.raises(ValueError, match="roi out of bounds"):
            quantize(img, 8, roi=(4, 4, 8, 2))

    def test_bad_levels(self):
        with pytest.raises(ValueError, match="levels"):
            quantize(np.zeros((2, 2), dtype=np.uint8), 10)


# --- glcm --------------------------------------------------------------------

class TestGlcm:
    def test_two_column_image(self):
        img = np.array([[0, 1], [0, 1]])
        P = glcm(img, 2, (1, 0), symmetric=False)
        expected = np.zeros((2, 2))
        expected[0, 1] = 1.0
        np.testing.assert_array_equal(P, expected)

    def test_checkerboard_symmetric(self):
        img = np.array([[0, 1], [1, 0]])
        P = glcm(img, 2, (1, 0), symmetric=True)
        np.testing.assert_array_equal(P, [[0.0, 0.5], [0.5, 0.0]])

    def test_constant_image_point_mass(self):
        img = np.full((5, 5), 3)
        for offset in ((1, 0), (0, 1), (-1, 1)):
            P = glcm(img, 8, offset)
            assert P[3, 3] == 1.0
            assert P.sum() == 1.0

    def test_offset_larger_than_image(self):
        with pytest.raises(ValueError, match="empty co-occurrence"):
            glcm(np.zeros((2, 2), dtype=int), 8, (5, 0))

    def test_normalization_and_symmetry_properties(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            img = rng.integers(0, 8, (9, 7))
            for offset in ((1, 0), (0, 1), (1, 1), (-1, 1)):
                P = glcm(img, 8, offset, symmetric=True)
                assert abs(P.sum() - 1.0) <= 1e-9
                assert np.array_equal(P, P.T)

    def test_oracle_equivalence(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            img = rng.integers(0, 8, (16, 16))
            for offset in ((1, 0), (0, 1), (1, 1), (-1, 1)):
                assert np.array_equal(
                    glcm_counts(img, 8, offset), naive_glcm_counts(img, 8, offset)
                )


class TestTextureFeatures:
    def test_point_mass(self):
        P = np.zeros((8, 8))
        P[2, 2] = 1.0
        f = texture_features(P)
        assert f.asm == 1.0 and f.energy == 1.0 and f.homogeneity == 1.0

    def test_checkerboard_values(self):
        P = np.array([[0.0, 0.5], [0.5, 0.0]])
        f = texture_features(P)
        assert abs(f.asm - 0.5) <= 1e-15
        assert abs(f.energy - math.sqrt(0.5)) <= 1e-15
        assert abs(f.homogeneity - 0.5) <= 1e-15

    @pytest.mark.parametrize("levels", [8, 16, 32, 64])
    def test_uniform_matrix(self, levels):
        P = np.full((levels, levels), 1.0 / levels**2)
        f = texture_features(P)
        assert abs(f.asm - 1.0 / levels**2) <= 1e-15
        assert abs(f.energy - 1.0 / levels) <= 1e-12

    def test_unnormalized_rejected(self):
        with pytest.raises(ValueError, match="unnormalized"):
            texture_features(np.full((4, 4), 1.0))

    def test_all_ones_iff_diagonal_point_mass(self):
        # Diagonal point mass -> all three exactly 1.
        for i in range(4):
            P = np.zeros((4, 4))
            P[i, i] = 1.0
            assert texture_features(P) == (1.0, 1.0, 1.0)
        # Off-diagonal point mass: asm/energy 1 but homogeneity < 1.
        P = np.zeros((4, 4))
        P[0, 3] = 1.0
        f = texture_features(P)
        assert f.asm == 1.0 and f.homogeneity < 1.0
        # Any spread-out P: not all three can be 1.
        rng = np.random.default_rng(2)
        for _ in range(20):
            raw = rng.random((4, 4)) + 1e-3
            f = texture_features(raw / raw.sum())
            assert not (f.asm == 1.0 and f.energy == 1.0 and f.homogeneity == 1.0)


class TestFrameFeatures:
    def test_constant_frame_degenerate(self):
        img = np.full((12, 10), 77, dtype=np.uint8)
        tex, hist = frame_features(img, GlcmConfig())
        assert tex.asm == 1.0 and tex.energy == 1.0 and tex.homogeneity == 1.0
        assert hist.entropy == 0.0
        assert hist.variance == 0.0
        assert hist.mean == 77.0

    def test_energy_asm_identity(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            img = rng.integers(0, 256, (16, 16), dtype=np.uint8)
            tex, _ = frame_features(img, GlcmConfig(levels=8))
            assert abs(tex.energy**2 - tex.asm) <= 1e-12

    def test_mirror_symmetry(self):
        rng = np.random.default_rng(4)
        cfg = GlcmConfig(levels=8)
        mirrored_cfg = GlcmConfig(
            levels=8, offsets=tuple((-dx, dy) for dx, dy in cfg.offsets)
        )
        for _ in range(10):
            img = rng.integers(0, 256, (16, 16), dtype=np.uint8)
            tex_a, hist_a = frame_features(img, cfg)
            tex_b, hist_b = frame_features(img[:, ::-1].copy(), mirrored_cfg)
            assert tex_a == tex_b
            assert hist_a.mean == hist_b.mean and hist_a.entropy == hist_b.entropy

    def test_smoothing_raises_homogeneity(self):
        rng = np.random.default_rng(5)
        noise = rng.integers(0, 256, (32, 32), dtype=np.uint8)
        smoothed = uniform_filter(noise.astype(np.float64), size=3)
        smoothed = np.clip(np.rint(smoothed), 0, 255).astype(np.uint8)
        tex_noise, _ = frame_features(noise, GlcmConfig())
        tex_smooth, _ = frame_features(smoothed, GlcmConfig())
        assert tex_smooth.homogeneity > tex_noise.homogeneity

    def test_oracle_equivalence_through_features(self):
        rng = np.random.default_rng(6)
        cfg = GlcmConfig(levels=8)
        for _ in range(10):
            img = rng.integers(0, 256, (16, 16), dtype=np.uint8)
            tex, _ = frame_features(img, cfg)
            quantized = (img.astype(np.int64) * 8) // 256
            asms, homs = [], []
            for offset in cfg.offsets:
                counts = naive_glcm_counts(quantized, 8, offset)
                counts = counts + counts.T
                P = counts / counts.sum()
                asms.append(float(np.sum(P * P)))
                idx = np.arange(8)
                weights = 1.0 / (1.0 + (idx[:, None] - idx[None, :]) ** 2)
                homs.append(float(np.sum(P * weights)))
            assert abs(tex.asm - np.mean(asms)) <= 1e-12
            assert abs(tex.energy - math.sqrt(np.mean(asms))) <= 1e-12
            assert abs(tex.homogeneity - np.mean(homs)) <= 1e-12


class TestHistogram:
    def test_bins_sum_to_one_and_entropy_bound(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            img = rng.integers(0, 256, (20, 20), dtype=np.uint8)
            h = histogram_stats(img)
            assert abs(h.bins.sum() - 1.0) <= 1e-9
            assert 0.0 <= h.entropy <= 8.0
            assert abs(h.mean - img.mean()) <= 1e-9
            assert abs(h.variance - img.astype(np.float64).var()) <= 1e-9


# --- motion ------------------------------------------------------------------

def _grid_poses(quats, dt_us=10_000):
    return [PoseSample(k * dt_us, q) for k, q in enumerate(quats)]


class TestAngularVelocity:
    def test_constant_pose(self):
        fused = _grid_poses([IDENTITY.copy() for _ in range(5)])
        motion = angular_velocity(fused, 10_000)
        assert np.all(motion.omega == 0.0)
        assert np.all(motion.speed == 0.0)
        assert motion.t_us.tolist() == [10_000, 20_000, 30_000, 40_000]

    def test_constant_rate_about_x(self):
        quats = [q_from_axis_angle([1, 0, 0], 0.01 * k) for k in range(10)]
        motion = angular_velocity(_grid_poses(quats), 10_000)
        np.testing.assert_allclose(motion.omega[:, 0], 1.0, atol=1e-9)
        np.testing.assert_allclose(motion.omega[:, 1:], 0.0, atol=1e-12)
        np.testing.assert_allclose(motion.speed, 1.0, atol=1e-9)

    def test_left_invariance(self):
        rng = np.random.default_rng(8)
        quats = [p.q for p in smooth_pose_walk(rng, list(range(0, 300_000, 10_000)))]
        g = random_unit_quat(rng)
        rotated = [q_normalize(q_multiply(g, q)) for q in quats]
        m1 = angular_velocity(_grid_poses(quats), 10_000)
        m2 = angular_velocity(_grid_poses(rotated), 10_000)
        assert np.max(np.abs(m1.omega - m2.omega)) <= 1e-9

    def test_time_reversal_negates(self):
        rng = np.random.default_rng(9)
        poses = smooth_pose_walk(rng, list(range(0, 300_000, 10_000)))
        quats = [p.q for p in poses]
        m_fwd = angular_velocity(_grid_poses(quats), 10_000)
        m_rev = angular_velocity(_grid_poses(quats[::-1]), 10_000)
        assert np.max(np.abs(m_rev.omega + m_fwd.omega[::-1])) <= 1e-9
        assert abs(path_length(poses) - path_length(poses[::-1])) <= 1e-9

    def test_non_uniform_grid_rejected(self):
        fused = [
            PoseSample(0, IDENTITY.copy()),
            PoseSample(10_000, IDENTITY.copy()),
            PoseSample(25_000, IDENTITY.copy()),
        ]
        with pytest.raises(ValueError, match="non-uniform grid"):
            angular_velocity(fused, 10_000)


class TestPathLength:
    def test_constant(self):
        assert path_length(_grid_poses([IDENTITY.copy()] * 4)) == 0.0

    def test_monotone_slew_sample_count_invariant(self):
        for n in (3, 10, 50):
            quats = [
                q_from_axis_angle([0, 0, 1], (math.pi / 2) * k / (n - 1)) for k in range(n)
            ]
            assert abs(path_length(_grid_poses(quats)) - math.pi / 2) <= 1e-9

    def test_there_and_back(self):
        up = [q_from_axis_angle([0, 0, 1], (math.pi / 2) * k / 10) for k in range(11)]
        quats = up + up[-2::-1]
        assert abs(path_length(_grid_poses(quats)) - math.pi) <= 1e-9


class TestSmoothSpeed:
    def test_window_one_is_identity(self):
        v = np.array([1.0, 2.0, 3.0])
        assert np.array_equal(smooth_speed(v, 1), v)

    def test_preserves_length_and_mean_of_constant(self):
        v = np.full(20, 3.5)
        out = smooth_speed(v, 5)
        assert out.shape == v.shape
        np.testing.assert_allclose(out, 3.5)

    def test_linear(self):
        rng = np.random.default_rng(10)
        v = rng.random(50)
        np.testing.assert_allclose(smooth_speed(2.5 * v, 5), 2.5 * smooth_speed(v, 5))


class TestLdlj:
    def test_amplitude_invariance(self):
        v = min_jerk_bell(200, 0.01)
        base = log_dimensionless_jerk(v, 0.01)
        for c in (0.5, 2.0, 10.0):
            assert abs(log_dimensionless_jerk(c * v, 0.01) - base) <= 1e-9

    def test_noise_lowers_ldlj(self):
        rng = np.random.default_rng(12)
        v = min_jerk_bell(200, 0.01)
        noisy = v + 0.05 * rng.standard_normal(v.size)
        assert log_dimensionless_jerk(noisy, 0.01) < log_dimensionless_jerk(v, 0.01)

    def test_zero_speed(self):
        with pytest.raises(ValueError, match="no motion"):
            log_dimensionless_jerk(np.zeros(10), 0.01)

    def test_too_short(self):
        with pytest.raises(ValueError, match="too short"):
            log_dimensionless_jerk(np.array([0.0, 1.0]), 0.01)

    def test_matches_stated_formula(self):
        v = min_jerk_bell(64, 0.02)
        dv = np.gradient(v, 0.02)
        duration = 63 * 0.02
        expected = -math.log(duration**3 / v.max() ** 2 * np.sum(dv * dv) * 0.02)
        assert abs(log_dimensionless_jerk(v, 0.02) - expected) <= 1e-12


class TestSparc:
    def test_oracle_agreement(self):
        rng = np.random.default_rng(13)
        profiles = [
            min_jerk_bell(100, 0.01),
            min_jerk_bell(150, 0.01) + 0.1 * np.abs(np.sin(np.arange(150) * 0.9)),
            np.abs(rng.standard_normal(120)) + 0.1,
        ]
        for v in profiles:
            got = sparc(v, 100.0)
            want = naive_sparc(v, 100.0)
            assert abs(got - want) <= 1e-9

    def test_amplitude_invariance(self):
        v = min_jerk_bell(200, 0.01)
        base = sparc(v, 100.0)
        for c in (0.5, 2.0, 10.0):
            assert abs(sparc(c * v, 100.0) - base) <= 1e-9

    def test_tremor_lowers_sparc(self):
        n = 400
        t = np.arange(n) / 100.0
        clean = min_jerk_bell(n, 0.01)
        trembling = clean * (1.0 + 0.25 * np.sin(2 * np.pi * 4.0 * t))
        assert sparc(clean, 100.0) > sparc(trembling, 100.0)

    def test_too_short(self):
        with pytest.raises(ValueError, match="too short"):
            sparc(np.ones(4), 100.0)

    def test_zero_speed(self):
        with pytest.raises(ValueError, match="no motion"):
            sparc(np.zeros(16), 100.0)
