import io
import json
import math
from contextlib import redirect_stderr, redirect_stdout

import numpy as np
import pytest

from fbmfp.cli import main
from fbmfp.oracles import feller_v_half_density
from fbmfp.params import FpkParams

MODEL = ["--a", "1", "--b", "0.5", "--c", "0.5", "--v", "0.5"]


def run(argv):
    out, err = io.StringIO(), io.StringIO()
    with redirect_stdout(out), redirect_stderr(err):
        code = main(argv)
    return code, out.getvalue(), err.getvalue()


def parse_csv(text):
    meta, trailer, rows, header = {}, {}, [], None
    for line in text.splitlines():
        if line.startswith("# "):
            key, _, value = line[2:].partition("=")
            (trailer if header and rows else meta)[key] = value
        elif header is None:
            header = line.split(",")
        else:
            rows.append(line.split(","))
    return meta, header, rows, trailer


def test_omega_time_zero_prints_initial_transform():
    code, out, _ = run(["omega", *MODEL, "--t", "0", "--s-re", "2"])
    assert code == 0
    _, header, rows, _ = parse_csv(out)
    values = dict(zip(header, rows[0]))
    assert float(values["omega_re"]) == pytest.approx(math.exp(-2.0), rel=1e-15)


def test_omega_small_s_is_mass_and_residual_reported():
    code, out, _ = run(["omega", "--a", "1", "--b", "0.5", "--c", "0.3", "--v", "0.7",
                        "--t", "1", "--s-re", "1e-8", "--format", "json"])
    assert code == 0
    result = json.loads(out)["result"]
    assert abs(result["omega_re"] - 1.0) <= 1e-6
    code, out, _ = run(["omega", "--a", "1", "--b", "0.5", "--c", "0.3", "--v", "0.7",
                        "--t", "1", "--s-re", "2", "--format", "json"])
    assert json.loads(out)["result"]["pde_residual"] <= 1e-5


def test_density_matches_closed_form_and_records_metadata():
    argv = ["density", *MODEL, "--t", "1", "--x-min", "0.2", "--x-max", "4", "--n", "20",
            "--seed", "5"]
    code, out, _ = run(argv)
    assert code == 0
    meta, header, rows, trailer = parse_csv(out)
    assert header == ["x", "u", "discrepancy", "flags"]
    assert meta["seed"] == "5" and meta["command"] == "density"
    for key in ("a", "b", "c", "v", "t", "xi", "tol", "method", "version", "threads"):
        assert key in meta
    x = np.array([float(r[0]) for r in rows])
    u = np.array([float(r[1]) for r in rows])
    ref = feller_v_half_density(1.0, x, 1.0, FpkParams(1, 0.5, 0.5, 0.5))
    keep = ref > 1e-2 * ref.max()
    assert np.max(np.abs(u[keep] - ref[keep]) / ref[keep]) <= 1e-3
    assert "normalization" in trailer


def test_normalization_trailer_on_default_grid():
    code, out, _ = run(["density", *MODEL, "--t", "1", "--n", "200"])
    assert code == 0
    assert out.splitlines()[-1].startswith("# normalization=")
    assert abs(float(out.splitlines()[-1].split("=")[1]) - 1.0) <= 5e-3


def test_single_point_grid():
    code, out, _ = run(["density", *MODEL, "--t", "1", "--x-min", "1", "--x-max", "1",
                        "--n", "1"])
    assert code == 0
    _, _, rows, _ = parse_csv(out)
    assert len(rows) == 1


def test_output_is_deterministic(tmp_path):
    argv = ["density", *MODEL, "--t", "1", "--x-min", "0.5", "--x-max", "2", "--n", "7",
            "--method", "both"]
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(argv + ["-o", str(first)])[0] == 0
    assert run(argv + ["-o", str(second)])[0] == 0
    assert first.read_bytes() == second.read_bytes()


def test_json_density_output():
    code, out, _ = run(["density", *MODEL, "--t", "1", "--x-min", "0.5", "--x-max", "2",
                        "--n", "3", "--format", "json"])
    assert code == 0
    doc = json.loads(out)
    assert len(doc["rows"]) == 3
    assert doc["metadata"]["n"] == 3


def test_bad_input_exit_code():
    code, _, err = run(["density", "--a", "-1", "--b", "0.5", "--c", "0.5", "--v", "0.5",
                        "--t", "1"])
    assert code == 2
    assert json.loads(err)["error"] == "DomainError"


def test_unsupported_cir_regime_exit_code():
    code, _, err = run(["cir", "--hurst", "0.7", "--sigma", "0.5", "--rate", "0.05",
                        "--dividend-h", "0", "--s-t", "1", "--delta-t", "1"])
    assert code == 2
    assert json.loads(err)["error"] == "UnsupportedRegimeError"


def test_non_integrable_flux_exit_code():
    code, _, err = run(["flux", "--a", "1", "--b", "0.5", "--c", "0.6", "--v", "0.7",
                        "--t-max", "1", "--n", "6"])
    assert code == 3
    assert json.loads(err)["error"] == "NonIntegrableKernelError"


def test_flux_output_columns():
    code, out, _ = run(["flux", "--a", "1", "--b", "0.5", "--c", "0.2", "--v", "0.7",
                        "--t-max", "1", "--n", "17"])
    assert code == 0
    _, header, rows, _ = parse_csv(out)
    assert header == ["t", "f", "residual"]
    t0 = rows[0]
    assert float(t0[0]) == 0.0 and math.isfinite(float(t0[1])) and float(t0[2]) == 0.0
    # residual <= 1e-6 (1 + |g|) with 0 <= g <= 1
    assert max(float(r[2]) for r in rows) <= 2e-6


def test_cir_output_records_mapping():
    code, out, _ = run(["cir", "--hurst", "0.7", "--sigma", "0.1", "--rate", "0.05",
                        "--dividend-h", "-0.01", "--s-t", "1", "--delta-t", "1", "--n", "40"])
    assert code == 0
    meta, _, rows, trailer = parse_csv(out)
    assert json.loads(meta["mapped"]) == pytest.approx(
        {"a": 0.007, "b": 0.043, "c": 0.01, "v": 0.7})
    assert abs(float(trailer["normalization"]) - 1.0) <= 5e-3


def test_plot_written(tmp_path):
    png = tmp_path / "u.png"
    code, _, _ = run(["density", *MODEL, "--t", "1", "--n", "20", "--plot", str(png)])
    assert code == 0
    assert png.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_validate_laplace_suite_passes():
    code, out, err = run(["validate", "--suite", "laplace", "--fast", "--no-timing"])
    assert code == 0
    report = json.loads(out)
    assert report["all_passed"] and len(report["checks"]) == 3
    assert err.count("[PASS]") == 3


def test_validate_inversion_reports_failure_of_stehfest_only():
    code, out, _ = run(["validate", "--suite", "inversion", "--fast", "--no-timing"])
    assert code == 1
    parts = json.loads(out)["checks"][0]["parts"]
    assert parts == {"talbot": True, "stehfest": False}


def test_validate_report_reproducible():
    argv = ["validate", "--suite", "laplace", "--fast", "--no-timing"]
    assert run(argv)[1] == run(argv)[1]
