import numpy as np
import pytest

from pinball.metrics import mesh_convergence_report, psd_peak


class TestPsdPeak:
    def test_sinusoid_frequency_recovered(self):
        dt = 0.01
        t = np.arange(6000) * dt
        f0 = 1.0 / 6.0
        sig = 3.0 + 0.2 * np.sin(2 * np.pi * f0 * t)
        assert abs(psd_peak(sig, dt) - f0) < 2.0 / (len(t) * dt)

    def test_two_tone_picks_dominant(self):
        dt = 0.02
        t = np.arange(4096) * dt
        sig = 1.0 * np.sin(2 * np.pi * 0.5 * t) \
            + 0.1 * np.sin(2 * np.pi * 2.0 * t)
        assert abs(psd_peak(sig, dt) - 0.5) < 0.02

    def test_too_few_samples(self):
        with pytest.raises(ValueError, match="64"):
            psd_peak(np.sin(np.arange(63)), 0.1)

    def test_constant_signal(self):
        with pytest.raises(ValueError, match="constant"):
            psd_peak(np.full(128, 5.0), 0.1)


class TestMeshConvergence:
    def test_requires_two_meshes(self, coarse_space):
        with pytest.raises(ValueError, match="two meshes"):
            mesh_convergence_report([coarse_space.mesh], 30.0)

    def test_report_structure(self, coarse_space, desk_space):
        rows = mesh_convergence_report(
            [coarse_space.mesh, desk_space.mesh], 30.0,
            window_T=1.0, spinup_T=1.0)
        assert len(rows) == 2
        finest = max(rows, key=lambda r: r["vertices"])
        assert finest["vertices"] == desk_space.mesh.num_vertices
        for row in rows:
            for key in ("E_mean", "E_rms", "f_peak", "eps_E_mean",
                        "eps_E_rms", "eps_f_peak"):
                assert key in row
            assert row["E_mean"] > 0
        assert finest["eps_E_mean"] == 0.0
