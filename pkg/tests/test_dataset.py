import numpy as np
import pytest

from qlbm import lattice
from qlbm.dataset import (
    ArtificialSpec,
    Dataset,
    SOURCE_ARTIFICIAL,
    SOURCE_HARVESTED,
    build_artificial,
    harvest,
    sample_artificial,
    shuffle_batches,
    stats,
    stratify_by_speed,
)
from qlbm.lattice import Case, EqOrder, InvalidInputError, LatticeConfig, W, bgk_collide


def tgv_trajectory(n=16, T=10, u=0.05):
    cfg = LatticeConfig(n, n, tau=1.0, u_max=u)
    return lattice.run_reference(cfg, T, case=Case.TGV, record="fields")


class TestArtificialSampler:
    def test_zero_noise_zero_velocity_is_rest(self):
        spec = ArtificialSpec(u0_max=0.0, sigma_min=0.0, sigma_max=0.0, n=4, seed=1)
        ds = build_artificial(spec)
        assert ds.f_str == pytest.approx(np.tile(W, (4, 1)), abs=1e-15)
        assert ds.f_ref == pytest.approx(ds.f_str, abs=1e-15)

    def test_zero_noise_full_relaxation(self):
        spec = ArtificialSpec(u0_max=0.04, sigma_max=0.0, n=16, seed=2, tau=1.0)
        ds = build_artificial(spec)
        feq = lattice.equilibrium(np.ones(16), ds.u.T, EqOrder.QUADRATIC).T
        assert ds.f_ref == pytest.approx(feq, abs=1e-14)

    def test_velocity_correlation_envelope(self):
        spec = ArtificialSpec(u0_max=0.05, sigma_max=0.0, n=4000, seed=3)
        ds = build_artificial(spec)
        speed = np.sqrt((ds.u ** 2).sum(axis=1))
        assert speed.max() <= 0.05 + 1e-12
        # the angle correlation populates the full ellipse-like envelope
        assert np.abs(ds.u[:, 0]).max() > 0.04
        assert np.abs(ds.u[:, 1]).max() > 0.04

    def test_cross_consistency_invariant(self):
        spec = ArtificialSpec(u0_max=0.05, sigma_max=2e-4, n=256, seed=4, tau=0.8)
        ds = build_artificial(spec)
        assert ds.validate() < 1e-12

    def test_single_draw(self):
        spec = ArtificialSpec(u0_max=0.03, sigma_max=1e-4, n=1, seed=5)
        s = sample_artificial(spec, np.random.default_rng(0))
        assert s.source == SOURCE_ARTIFICIAL
        assert s.f_lin == pytest.approx(bgk_collide(s.f_str, 1.0, EqOrder.LINEAR))

    def test_rejection_exhaustion(self):
        spec = ArtificialSpec(u0_max=0.0, sigma_min=10.0, sigma_max=10.0, n=1, seed=6)
        with pytest.raises(InvalidInputError):
            sample_artificial(spec, np.random.default_rng(0), max_retries=5)

    def test_sigma_validation(self):
        with pytest.raises(InvalidInputError):
            ArtificialSpec(u0_max=0.05, sigma_min=1e-3, sigma_max=1e-4)

    def test_noise_level_matches_sigma(self):
        sigma = 5e-4
        spec = ArtificialSpec(u0_max=0.0, sigma_min=sigma, sigma_max=sigma,
                              n=20000, seed=7)
        ds = build_artificial(spec)
        report = stats(ds)
        assert report.neq_std == pytest.approx(np.full(9, sigma), rel=0.05)


class TestHarvest:
    def test_counting(self):
        ds = harvest(tgv_trajectory(n=16, T=10))
        assert len(ds) == 16 * 16 * 10

    def test_equilibrium_trajectory_gives_trivial_samples(self):
        cfg = LatticeConfig(8, 8, tau=1.0, u_max=0.0)
        traj = lattice.run_reference(cfg, 1, case=Case.TGV, record="fields")
        ds = harvest(traj)
        assert ds.f_lin == pytest.approx(ds.f_str, abs=1e-14)
        assert ds.f_ref == pytest.approx(ds.f_str, abs=1e-14)

    def test_recomputation_oracle(self):
        ds = harvest(tgv_trajectory())
        i = 321
        assert ds.f_ref[i] == pytest.approx(
            bgk_collide(ds.f_str[i], 1.0, EqOrder.QUADRATIC), abs=1e-12)
        assert ds.validate() < 1e-12

    def test_requires_fields(self):
        cfg = LatticeConfig(8, 8, u_max=0.02)
        traj = lattice.run_reference(cfg, 2, case=Case.TGV, record="macro")
        with pytest.raises(InvalidInputError):
            harvest(traj)

    def test_requires_quadratic_reference(self):
        cfg = LatticeConfig(8, 8, u_max=0.02, order=EqOrder.LINEAR)
        traj = lattice.run_reference(cfg, 2, case=Case.TGV, record="fields")
        with pytest.raises(InvalidInputError):
            harvest(traj)

    def test_source_tag(self):
        assert harvest(tgv_trajectory()).source == SOURCE_HARVESTED


class TestBatching:
    def test_exact_split(self):
        batches = shuffle_batches(64, 32, seed=0)
        assert len(batches) == 2
        assert all(len(b) == 32 for b in batches)

    def test_partial_batch_retained(self):
        batches = shuffle_batches(65, 32, seed=0)
        assert [len(b) for b in batches] == [32, 32, 1]

    def test_deterministic_and_complete(self):
        a = shuffle_batches(100, 7, seed=(3, 5))
        b = shuffle_batches(100, 7, seed=(3, 5))
        assert all(np.array_equal(x, y) for x, y in zip(a, b))
        assert sorted(np.concatenate(a).tolist()) == list(range(100))

    def test_batch_size_validated(self):
        with pytest.raises(InvalidInputError):
            shuffle_batches(10, 0, seed=0)


class TestPersistence:
    def test_round_trip(self, tmp_path):
        ds = build_artificial(ArtificialSpec(u0_max=0.05, sigma_max=1e-4, n=50, seed=8))
        path = tmp_path / "corpus.qds"
        ds.save(path)
        back = Dataset.load(path)
        assert back.f_str == pytest.approx(ds.f_str, abs=0)
        assert back.f_ref == pytest.approx(ds.f_ref, abs=0)
        assert back.u == pytest.approx(ds.u, abs=0)
        assert back.tau == ds.tau
        assert back.source == SOURCE_ARTIFICIAL

    def test_empty_file_valid_header(self, tmp_path):
        ds = Dataset(np.zeros((0, 9)), np.zeros((0, 9)), np.zeros((0, 9)),
                     np.zeros(0), np.zeros((0, 2)), 1.0, SOURCE_ARTIFICIAL)
        path = tmp_path / "empty.qds"
        ds.save(path)
        assert len(path.read_bytes()) == 16
        assert len(Dataset.load(path)) == 0

    def test_csv_export(self, tmp_path):
        ds = build_artificial(ArtificialSpec(u0_max=0.02, sigma_max=0.0, n=3, seed=9))
        ds.to_csv(tmp_path / "c.csv")
        lines = (tmp_path / "c.csv").read_text().strip().split("\n")
        assert len(lines) == 4
        assert lines[0].split(",")[:2] == ["f_str0", "f_str1"]


class TestStats:
    def test_equilibrium_dataset_point_mass(self):
        spec = ArtificialSpec(u0_max=0.05, sigma_max=0.0, n=500, seed=10)
        report = stats(build_artificial(spec))
        assert report.neq_std == pytest.approx(np.zeros(9), abs=1e-12)
        # every sample sits in the central histogram bin
        center = report.neq_hist.shape[1] // 2
        assert (report.neq_hist.sum(axis=1) == 500).all()
        assert (report.neq_hist[:, center] == 500).all()

    def test_empty_rejected(self):
        ds = Dataset(np.zeros((0, 9)), np.zeros((0, 9)), np.zeros((0, 9)),
                     np.zeros(0), np.zeros((0, 2)), 1.0, SOURCE_ARTIFICIAL)
        with pytest.raises(InvalidInputError):
            stats(ds)

    def test_report_csv(self, tmp_path):
        ds = build_artificial(ArtificialSpec(u0_max=0.05, sigma_max=1e-4, n=200, seed=11))
        stats(ds).to_csv(tmp_path / "stats.csv")
        text = (tmp_path / "stats.csv").read_text()
        assert "neq_hist" in text and "u_quantile" in text

    def test_harvest_noneq_spread_positive(self):
        # a real trajectory produces genuinely out-of-equilibrium populations
        report = stats(harvest(tgv_trajectory(n=16, T=10, u=0.05)))
        assert report.neq_std.max() > 1e-7


class TestStratify:
    def test_equalizes_bins(self):
        ds = build_artificial(ArtificialSpec(u0_max=0.08, sigma_max=0.0, n=4000, seed=12))
        out = stratify_by_speed(ds, n_bins=4, seed=0)
        speed = np.sqrt((out.u ** 2).sum(axis=1))
        lo = max(speed[speed > 0].min(), 1e-12)
        edges = np.geomspace(lo, speed.max() * (1 + 1e-12), 5)
        counts = np.histogram(speed, bins=edges)[0]
        assert counts.std() / counts.mean() < 0.35
