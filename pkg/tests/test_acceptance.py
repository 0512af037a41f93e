"""Acceptance criteria, one test each, with the tolerances pinned below."""
import subprocess
import sys
import time

import numpy as np
import pytest

from srl import bench, verify

CANON_DEV_TOL = 1e-9  # times (1 + kappa)
CANON_RATIO_TOL = 3 + 1e-12
RESCALE_IDENTITY_TOL = 1e-12
RESCALE_FUNCTION_TOL = 1e-9
ZERO_TOL = 1e-9
PERTURB_VISIBLE = 1e-4
FIXED_POINT_RTOL = 1e-9
VARIATION_SLOPE_MAX, VARIATION_SE_MAX = -0.45, 0.15
HOLDER_SLOPE_MAX = -0.40
ORACLE_Z = 3.0


def timed(fn, *args, **kwargs):
    t = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - t


def test_criterion_1_canonicalization(criterion):
    m, secs = timed(verify.check_canonicalization, seed=0, count=200, points=10_000)
    ok = (m["max_normalized_deviation"] <= CANON_DEV_TOL and m["max_kappa_ratio"] <= CANON_RATIO_TOL
          and secs < 10)
    assert criterion(1, "canonicalization soundness", ok,
                     f"{m['networks']} nets, max dev/(1+kappa)={m['max_normalized_deviation']:.2e}, "
                     f"max ratio={m['max_kappa_ratio']:.4f}, {secs:.1f}s")


def test_criterion_2_rescaling(criterion):
    m, secs = timed(verify.check_rescaling, seed=0, count=1000)
    ok = (m["max_kappa_change"] <= RESCALE_IDENTITY_TOL and m["max_half_sq_norm_gap"] <= RESCALE_IDENTITY_TOL
          and m["max_function_change"] <= RESCALE_FUNCTION_TOL and m["max_sq_norm_growth"] <= 0
          and secs < 5)
    assert criterion(2, "rescaling identities", ok,
                     f"{m['networks']} thetas, |dkappa|={m['max_kappa_change']:.1e}, "
                     f"|norm^2/2-kappa|={m['max_half_sq_norm_gap']:.1e}, |df|={m['max_function_change']:.1e}, "
                     f"max growth={m['max_sq_norm_growth']:.1e}, {secs:.2f}s")


def test_criterion_3_zero_function(criterion):
    m, secs = timed(verify.check_zero_characterization, seed=0, count=50, points=1000, bump=1e-2)
    ok = m["max_abs_zero_measure"] <= ZERO_TOL and m["min_max_abs_perturbed"] > PERTURB_VISIBLE and secs < 10
    assert criterion(3, "zero-function characterization", ok,
                     f"{m['measures']} measures, max|f|={m['max_abs_zero_measure']:.1e}, "
                     f"weakest perturbation max|f|={m['min_max_abs_perturbed']:.2e}, {secs:.2f}s")


def test_criterion_4_complexity_shape(criterion):
    table, secs = timed(verify.complexity_grid, seed=0, replicates=100)
    shape = verify.complexity_shape_checks(table)
    keys = ("monotone_in_delta", "normalized_non_increasing", "root_n_scaling", "below_calibrated_shape")
    ok = all(shape[k] for k in keys) and secs < 180
    grid = " ".join(f"({n},{d})={v:.4f}+-{s:.4f}" for (n, d), (v, s) in sorted(table.items()))
    parts = ", ".join(f"{k}={'ok' if shape[k] else 'FAILED'}" for k in keys)
    assert criterion(4, "complexity shape", ok, f"{parts}, C={shape['calibrated_C']:.4f}, {secs:.0f}s; {grid}")


def test_criterion_5_fixed_point(criterion):
    m, secs = timed(verify.check_fixed_points)
    ok = m["cases"] == 20 and m["max_relative_error"] <= FIXED_POINT_RTOL and secs < 1
    assert criterion(5, "fixed-point solver", ok,
                     f"{m['cases']} cases, max rel err={m['max_relative_error']:.1e}, {secs:.3f}s")


def test_criterion_6_schedule_exponents(criterion):
    ok, secs = timed(verify.check_exponents)
    ok = ok and secs < 1
    assert criterion(6, "schedule exponents", ok,
                     f"(d,alpha) in {sorted((d, str(a)) for d, a in verify.EXPONENT_TABLE)}, {secs:.3f}s")


@pytest.mark.slow
def test_criterion_7_rate_trend(criterion, default_rate_reports):
    var, hol = default_rate_reports["variation"], default_rate_reports["holder"]
    ok_var = var.fitted_slope <= VARIATION_SLOPE_MAX and var.slope_stderr <= VARIATION_SE_MAX
    ok_hol = hol.fitted_slope <= HOLDER_SLOPE_MAX
    detail = (f"variation slope {var.fitted_slope:.4f}+-{var.slope_stderr:.4f} (theory {var.theory_slope:.3f}), "
              f"holder slope {hol.fitted_slope:.4f}+-{hol.slope_stderr:.4f} (theory {hol.theory_slope:.3f})")
    print("variation regime\n" + var.diagnostics())
    print("holder regime\n" + hol.diagnostics())
    assert criterion(7, "rate trend", ok_var and ok_hol, detail), (
        "variation\n" + var.diagnostics() + "\nholder\n" + hol.diagnostics())


def test_criterion_8_oracle_risk(criterion):
    m, secs = timed(verify.check_oracle_risk, seed=0, m=20000)
    ok = m["z"] <= ORACLE_Z and secs < 1
    assert criterion(8, "oracle risk", ok,
                     f"risk={m['risk']:.5f}+-{m['stderr']:.5f} vs 1/3, z={m['z']:.2f}, {secs:.3f}s")


@pytest.mark.slow
def test_criterion_9_determinism(criterion, tmp_path):
    outs = []
    for k in range(2):
        path = tmp_path / f"run{k}.csv"
        proc = subprocess.run([sys.executable, "-m", "srl.cli", "bench", "--seed", "0", "--threads", "1",
                               "--csv", str(path)], capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        outs.append(path.read_bytes())
    ok = outs[0] == outs[1] and len(outs[0]) > 0
    rows = outs[0].decode().count("\n") - 2
    assert criterion(9, "bench determinism", ok, f"two default bench runs, {rows} trial rows, "
                     f"{len(outs[0])} bytes, identical={outs[0] == outs[1]}")
