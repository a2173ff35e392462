"""Acceptance suite: one test per exit criterion, each printing a PASS line
with its measured numbers (run with -s or -rA to see them).

The heavyweight pieces (reference-transducer PSF on the desk-scale grid,
wire-phantom line-spread pathway) are computed once per session.
"""

import math
import os
import subprocess
import sys
import time

import numpy as np
import numpy.testing as npt
import pytest

from vaimg import (
    DESK_GRID,
    ComplexVolume,
    Grid3D,
    Medium,
    NoiseSpec,
    PhantomSpec,
    RealVolume,
    TransducerSpec,
    WireSpec,
    add_noise,
    builtin_phantom,
    cls,
    compose_lsf,
    compute_pressure_field,
    convolve,
    estimate_lsf,
    evaluate,
    gm,
    hilbert,
    isnr,
    magnitude_width_db,
    make_psf,
    make_theoretical_lsf,
    mse,
    render_phantom,
    synthesize_sequences,
    target_transfer_nsr,
    uiqi,
    wiener,
    wrap_phase,
)
from vaimg.phase import SequenceSet, build_phase_map, reconstruct_image

from conftest import gaussian_kernel, oneil_on_axis

SPEC = TransducerSpec()
MED = Medium()


def report(criterion, ok, detail):
    print(f"ACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, detail


class TestCriterion1FilterReductions:
    def test_criterion_1(self):
        grid = Grid3D((64, 64, 64), (1e-3,) * 3, (0, 0, 0))
        rng = np.random.default_rng(1)
        fv = np.zeros(grid.dims)
        fv[16:-16, 16:-16, 16:-16] = rng.random((32, 32, 32))
        f = RealVolume(grid, fv)
        h = gaussian_kernel((17, 17, 17), 1.2)
        g = add_noise(convolve(f, h), NoiseSpec(20.0, 1))

        t0 = time.time()
        w = wiener(g, h, 0.05)
        a0 = gm(g, h, 0.0, 1.0, 0.05)
        inv_gm = gm(g, h, 1.0, 1.0, 0.05)
        inv_cls = cls(g, h, 0.0)
        runtime = time.time() - t0

        bit_exact = np.array_equal(a0.restored_real.values, w.restored_real.values)
        rel = lambda a, b: np.linalg.norm(a - b) / np.linalg.norm(b)
        e_gm = rel(inv_gm.restored_real.values, inv_cls.restored_real.values)
        # both endpoints must match the plain inverse filter (wiener, nsr=0)
        inv = wiener(g, h, 0.0)
        e1 = rel(inv_gm.restored_real.values, inv.restored_real.values)
        e2 = rel(inv_cls.restored_real.values, inv.restored_real.values)
        ok = bit_exact and e1 < 1e-6 and e2 < 1e-6 and e_gm < 1e-6 and runtime < 10.0
        report(
            1,
            ok,
            f"GM(0,1)==Wiener bit-exact: {bit_exact}; GM(1) vs inverse {e1:.2e}; "
            f"CLS(0) vs inverse {e2:.2e}; runtime {runtime:.2f}s on 64^3",
        )


class TestCriterion2RoundTrip:
    def test_criterion_2(self):
        grid = Grid3D((48, 48, 48), (1e-3,) * 3, (0, 0, 0))
        rng = np.random.default_rng(2)
        fv = np.zeros(grid.dims)
        fv[12:-12, 12:-12, 12:-12] = rng.random((24, 24, 24))
        f = RealVolume(grid, fv)
        errs = []
        for mode in ("linear", "circular"):
            h = gaussian_kernel((15, 15, 15), 1.3)
            g = convolve(f, h, mode=mode)
            res = wiener(g, h, 0.0, mode=mode)
            errs.append(
                np.linalg.norm(res.restored_real.values - f.values) / np.linalg.norm(f.values)
            )
        ok = all(e < 1e-6 for e in errs)
        report(2, ok, f"noiseless round-trip rel L2: linear {errs[0]:.2e}, circular {errs[1]:.2e}")


class TestCriterion3TableOrdinal:
    def test_criterion_3(self, desk_psf):
        h = desk_psf.volume
        seeds = range(5)
        uiqis = {}
        isnrs = {}
        times = {"wiener": 0.0, "cls": 0.0, "gm": 0.0}
        for pname in ("phantom1", "phantom2"):
            f = render_phantom(builtin_phantom(pname))
            g0 = convolve(f, h, mode="circular")
            nsr = target_transfer_nsr(g0, h, mode="circular")
            scores = {"wiener": [], "cls": [], "gm": []}
            s_isnr = {"wiener": [], "cls": [], "gm": []}
            for seed in seeds:
                g = add_noise(g0, NoiseSpec(20.0, seed))
                runs = {}
                t0 = time.time()
                runs["wiener"] = wiener(g, h, nsr, mode="circular")
                times["wiener"] += time.time() - t0
                t0 = time.time()
                runs["cls"] = cls(g, h, 1.0e4, mode="circular")
                times["cls"] += time.time() - t0
                t0 = time.time()
                runs["gm"] = gm(g, h, 0.5, 1.0, nsr, mode="circular")
                times["gm"] += time.time() - t0
                for kind, res in runs.items():
                    rep = evaluate(f, g.real_part(), res.restored_real)
                    scores[kind].append(rep.uiqi)
                    s_isnr[kind].append(rep.isnr)
            uiqis[pname] = {k: float(np.mean(v)) for k, v in scores.items()}
            isnrs[pname] = {k: float(np.mean(v)) for k, v in s_isnr.items()}

        ok = True
        for pname in uiqis:
            u = uiqis[pname]
            ok &= u["wiener"] > u["gm"] and u["wiener"] > u["cls"]
            ok &= u["wiener"] >= 0.80
            ok &= all(v >= 40.0 for v in isnrs[pname].values())
        ok &= all(t <= 600.0 for t in times.values())
        detail = "; ".join(
            f"{p}: UIQI w={uiqis[p]['wiener']:.3f} gm={uiqis[p]['gm']:.3f} "
            f"cls={uiqis[p]['cls']:.3f}, ISNR w={isnrs[p]['wiener']:.1f} "
            f"gm={isnrs[p]['gm']:.1f} cls={isnrs[p]['cls']:.1f} dB"
            for p in uiqis
        )
        detail += "; per-filter runtime " + ", ".join(
            f"{k}={v:.0f}s" for k, v in times.items()
        )
        report(3, ok, detail)


class TestCriterion4PsfGeometry:
    def test_criterion_4(self, desk_psf):
        h = desk_psf.volume
        mag = np.abs(h.values)
        pk = h.peak_index()
        lateral = magnitude_width_db(mag[:, pk[1], pk[2]], h.grid.axis(0))
        lateral_y = magnitude_width_db(mag[pk[0], :, pk[2]], h.grid.axis(1))
        axial = magnitude_width_db(mag[pk[0], pk[1], :], h.grid.axis(2))
        # rotational symmetry: same radius sampled on four meridians
        r = 8  # voxels, 2 mm
        samples = np.array(
            [
                mag[pk[0] + r, pk[1], pk[2]],
                mag[pk[0] - r, pk[1], pk[2]],
                mag[pk[0], pk[1] + r, pk[2]],
                mag[pk[0], pk[1] - r, pk[2]],
            ]
        )
        sym = (samples.max() - samples.min()) / samples.mean()
        ok = (
            0.75 * 0.8e-3 <= lateral <= 1.25 * 0.8e-3
            and 0.75 * 0.8e-3 <= lateral_y <= 1.25 * 0.8e-3
            and 0.75 * 16e-3 <= axial <= 1.25 * 16e-3
            and sym < 0.01
        )
        report(
            4,
            ok,
            f"-6dB widths: lateral {lateral * 1e3:.3f}/{lateral_y * 1e3:.3f} mm "
            f"(target 0.8 +/- 25%), axial {axial * 1e3:.2f} mm (target 16 +/- 25%), "
            f"azimuthal spread {sym:.2e}",
        )


class TestCriterion5FieldOracle:
    @pytest.mark.parametrize("method", ["direct", "spectral"])
    def test_criterion_5(self, method):
        n = 50
        worst = 0.0
        for element in ("inner", "outer"):
            if method == "direct":
                grid = Grid3D((1, 1, n), (1e-3, 1e-3, 60e-3 / (n - 1)), (0.0, 0.0, 40e-3))
                sl = (0, 0)
            else:
                grid = Grid3D((3, 3, n), (0.5e-3, 0.5e-3, 60e-3 / (n - 1)), (-0.5e-3, -0.5e-3, 40e-3))
                sl = (1, 1)
            field = compute_pressure_field(SPEC, element, MED, grid, method=method)
            ref = oneil_on_axis(SPEC, MED, element, grid.axis(2))
            rel = np.abs(np.abs(field.values[sl]) - np.abs(ref)) / np.abs(ref)
            worst = max(worst, float(rel.max()))
        ok = worst < 0.01
        report(5, ok, f"{method} on-axis vs closed form at {n} depths: worst rel {worst:.2e}")


class TestCriterion6PhaseRecovery:
    def test_criterion_6(self):
        # Hilbert tone oracle
        n = np.arange(512)
        x = np.cos(2 * math.pi * 25 * n / 512)
        tone_err = float(np.abs(hilbert(x) - np.sin(2 * math.pi * 25 * n / 512)).max())

        # noiseless recovery over 1000 pixels (integer cycles in the window)
        rng = np.random.default_rng(6)
        n_pix, n_s = 1000, 520
        phi = rng.uniform(-math.pi, math.pi, n_pix)
        amp = 0.5 + rng.random(n_pix)
        grid = Grid3D((n_pix, 1, 1), (1e-3,) * 3, (0, 0, 0))
        img = ComplexVolume(grid, (amp * np.exp(1j * phi)).reshape(-1, 1, 1))
        pm = build_phase_map(synthesize_sequences(img, n_samples=n_s), (0, 0, 0))
        clean_err = wrap_phase(pm.phases.values[:, 0, 0] - (phi - phi[0]))
        clean_max = float(np.abs(clean_err).max())

        # 20 dB per-sample SNR, wrapped RMS error over 1000 pixels
        t = np.arange(n_s)
        base = amp[:, None] * np.cos(2 * math.pi * 50e3 * t / 1e6 + phi[:, None])
        sigma = amp[:, None] * 10.0 ** (-20.0 / 20.0) / math.sqrt(2.0)
        noisy = base + sigma * rng.standard_normal(base.shape)
        noisy[0] = base[0]
        pm2 = build_phase_map(SequenceSet(grid, noisy[:, None, None, :]), (0, 0, 0))
        err2 = wrap_phase(pm2.phases.values[:, 0, 0] - (phi - phi[0]))
        rms = float(np.sqrt(np.mean(err2[1:] ** 2)))

        ok = tone_err < 1e-10 and clean_max < 1e-6 and rms < 0.05
        report(
            6,
            ok,
            f"hilbert tone err {tone_err:.2e} (<1e-10); noiseless phase err "
            f"{clean_max:.2e} rad (<1e-6); 20 dB RMS {rms:.3f} rad (<0.05)",
        )


class TestCriterion7MetricProperties:
    def test_criterion_7(self):
        rng = np.random.default_rng(7)
        grid = Grid3D((16, 16, 8), (1e-3,) * 3, (0, 0, 0))
        x = RealVolume(grid, rng.random(grid.dims))
        u_self = uiqi(x, x, window=4)
        bound_ok = True
        for _ in range(100):
            a = RealVolume(grid, rng.standard_normal(grid.dims))
            b = RealVolume(grid, rng.standard_normal(grid.dims))
            q = uiqi(a, b, window=4)
            bound_ok &= -1.0 - 1e-12 <= q <= 1.0 + 1e-12
        f, g = x, RealVolume(grid, rng.random(grid.dims))
        mse_zero = mse(f, f) == 0.0
        isnr_zero = abs(isnr(f, g, g)) < 1e-12
        fhat = RealVolume(grid, f.values + (f.values - g.values) / 10.0)
        isnr_20 = abs(isnr(f, g, fhat) - 20.0) < 1e-9
        ok = abs(u_self - 1.0) < 1e-12 and bound_ok and mse_zero and isnr_zero and isnr_20
        report(
            7,
            ok,
            f"UIQI(x,x)={u_self:.12f}; |UIQI|<=1 over 100 pairs: {bound_ok}; "
            f"MSE(x,x)=0: {mse_zero}; ISNR identities: {isnr_zero and isnr_20}",
        )


@pytest.fixture(scope="module")
def wire_pathway():
    """Wire-scan LSF pathway: PSF on the 0.1 mm grid, theoretical 2D LSF
    kernel, synthetic noisy wire image."""
    grid = Grid3D((48, 48, 320), (0.1e-3,) * 3, (-2.4e-3, -2.4e-3, 54e-3))
    p1 = compute_pressure_field(SPEC, "inner", MED, grid, method="spectral")
    p2 = compute_pressure_field(SPEC, "outer", MED, grid, method="spectral")
    psf = make_psf(p1, p2)

    wire3d = PhantomSpec(
        grid=grid, wires=[WireSpec(0.5e-3, (0.0, 0.0, 70e-3), (0.0, 1.0, 0.0))]
    )
    lsf3d = make_theoretical_lsf(psf, render_phantom(wire3d))
    mid = grid.dims[1] // 2
    kgrid = Grid3D((48, 1, 320), grid.spacing, (grid.origin[0], 0.0, grid.origin[2]))
    theo = lsf3d.values[:, mid : mid + 1, :]
    theo = theo / theo.flat[np.argmax(np.abs(theo))]
    theoretical = ComplexVolume(kgrid, theo)

    f2d = render_phantom(builtin_phantom("wire3"))
    g0 = convolve(f2d, theoretical)
    g = add_noise(g0, NoiseSpec(20.0, 8))
    return psf, theoretical, f2d, g


class TestCriterion8LsfPathway:
    WIRES = ((-10e-3, 56e-3), (0.0, 70e-3), (10e-3, 84e-3))

    def _centroid_errors(self, restored, grid):
        vals = np.abs(restored.values[:, 0, :])
        errs = []
        for wx, wz in self.WIRES:
            ix = int(round((wx - grid.origin[0]) / grid.spacing[0]))
            iz = int(round((wz - grid.origin[2]) / grid.spacing[2]))
            win = vals[ix - 30 : ix + 31, iz - 60 : iz + 61]
            peak = np.unravel_index(np.argmax(win), win.shape)
            errs.append(math.hypot(peak[0] - 30, peak[1] - 60))
        return errs

    def test_criterion_8(self, wire_pathway):
        psf, theoretical, f2d, g = wire_pathway
        grid = f2d.grid

        # LSF estimated from the image around the central wire
        region = (slice(126, 174), slice(0, 1), slice(190, 510))
        est = estimate_lsf(g, region, lowpass_cutoff=1.0 / (10.0 * 0.5e-3))

        res_est = cls(g, est, 0.01)
        errs = self._centroid_errors(res_est.restored_real, grid)
        centroids_ok = all(e <= 2.0 for e in errs)

        # composed kernel: theoretical magnitude, synthetic-experimental phase
        # recovered through the per-pixel time-sequence machinery
        roi = g.values[region]
        roi_img = ComplexVolume(Grid3D(roi.shape, grid.spacing, (0, 0, 0)), roi)
        seqs = synthesize_sequences(roi_img, n_samples=520)
        ref_pix = np.unravel_index(np.argmax(np.abs(roi)), roi.shape)
        pm = build_phase_map(seqs, tuple(int(i) for i in ref_pix))
        recovered = reconstruct_image(pm)
        est_seq = estimate_lsf(
            recovered,
            tuple(slice(0, n) for n in roi.shape),
            lowpass_cutoff=1.0 / (10.0 * 0.5e-3),
        )
        theo_crop = ComplexVolume(est_seq.grid, theoretical.values)
        composed = compose_lsf(theo_crop, est_seq)

        res_comp = cls(g, composed, 0.01)
        rep_est = evaluate(f2d, g.real_part(), res_est.restored_real)
        rep_comp = evaluate(f2d, g.real_part(), res_comp.restored_real)
        ratio = rep_comp.uiqi / rep_est.uiqi
        comp_errs = self._centroid_errors(res_comp.restored_real, grid)

        ok = centroids_ok and ratio >= 0.9 and all(e <= 2.0 for e in comp_errs)
        report(
            8,
            ok,
            f"estimated-LSF centroid errors {[f'{e:.1f}' for e in errs]} vox (<=2); "
            f"composed-LSF errors {[f'{e:.1f}' for e in comp_errs]}; "
            f"UIQI composed/estimated = {rep_comp.uiqi:.3f}/{rep_est.uiqi:.3f} "
            f"= {ratio:.3f} (>=0.9)",
        )


class TestCriterion9Determinism:
    CFG = """
[grid]
nx = 16
ny = 16
nz = 24
dx_mm = 1
dy_mm = 1
dz_mm = 1
origin_x_mm = -8
origin_y_mm = -8
origin_z_mm = 15

[transducer]
inner_radius_mm = 3
ring_inner_radius_mm = 3.5
ring_outer_radius_mm = 5
focal_distance_mm = 25
freq_inner_mhz = 1.0
freq_outer_mhz = 1.05

[phantom]
sphere1 = 0, 0, 25, 2, 0

[noise]
snr_db = 20
seed = 11

[filter]
kind = wiener
nsr = auto
"""

    def _run(self, tmp_path, tag, threads):
        outdir = tmp_path / tag
        cfg = tmp_path / f"{tag}.cfg"
        cfg.write_text(self.CFG)
        env = dict(os.environ, NUMBA_NUM_THREADS=str(threads))
        proc = subprocess.run(
            [
                sys.executable, "-m", "vaimg.cli", "pipeline",
                "--config", str(cfg), "--outdir", str(outdir), "--run-id", "d",
            ],
            env=env,
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0, proc.stderr
        return {
            p.name: p.read_bytes() for p in sorted(outdir.iterdir())
        }

    def test_criterion_9(self, tmp_path):
        a = self._run(tmp_path, "a", threads=1)
        b = self._run(tmp_path, "b", threads=1)
        c = self._run(tmp_path, "c", threads=2)
        same_run = all(a[k] == b[k] for k in a)
        same_threads = all(a[k] == c[k] for k in a)
        ok = same_run and same_threads and len(a) == 6
        report(
            9,
            ok,
            f"{len(a)} outputs byte-identical across repeat runs: {same_run}, "
            f"across 1 vs 2 threads: {same_threads}",
        )
