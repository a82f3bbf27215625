import numpy as np
import pytest

from vicontrol.cli import main


def read_csv(path):
    lines = [ln for ln in path.read_text().splitlines() if not ln.startswith("#")]
    header = lines[0].split(",")
    rows = [ln.split(",") for ln in lines[1:]]
    return header, rows


def test_constant_preset_state_is_one(tmp_path):
    out = tmp_path / "run"
    assert main(["state", "--preset", "constant-v1", "--out", str(out)]) == 0
    header, rows = read_csv(out / "state.csv")
    assert header == ["x", "y", "u"]
    u = np.array([float(r[2]) for r in rows])
    np.testing.assert_allclose(u, 1.0, atol=1e-9)
    report = (out / "report.txt").read_text()
    assert "active_set_size: 0" in report


def test_contact_preset_has_active_nodes(tmp_path):
    out = tmp_path / "run"
    assert main(["state", "--preset", "contact-v1", "--set", "n=16",
                 "--out", str(out)]) == 0
    report = (out / "report.txt").read_text()
    size = int(report.split("active_set_size: ")[1].split()[0])
    assert size > 0


def test_unknown_key_exits_2(tmp_path):
    code = main(["state", "--preset", "constant-v1", "--set", "bogus=1",
                 "--out", str(tmp_path / "x")])
    assert code == 2


def test_invalid_cost_weight_exits_2(tmp_path):
    code = main(["optimize", "--preset", "constant-v1", "--set", "M=-1",
                 "--out", str(tmp_path / "x")])
    assert code == 2


def test_unknown_preset_exits_2(tmp_path):
    assert main(["state", "--preset", "nope", "--out", str(tmp_path / "x")]) == 2


def test_config_file_roundtrip(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("n = 4\nalpha = 3.5\nb = 2.0\n# comment\nq = 0\n")
    out = tmp_path / "run"
    assert main(["state", "--config", str(cfg), "--out", str(out)]) == 0
    _, rows = read_csv(out / "state.csv")
    u = np.array([float(r[2]) for r in rows])
    np.testing.assert_allclose(u, 2.0, atol=1e-9)  # u == b when data is quiet


def test_malformed_config_file_exits_2(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("n 4\n")
    assert main(["state", "--config", str(cfg), "--out", str(tmp_path / "x")]) == 2


def test_nonconvergence_exits_3(tmp_path):
    code = main(["state", "--preset", "contact-v1",
                 "--set", "solver=psor", "--set", "max_iter=2", "--set", "n=16",
                 "--out", str(tmp_path / "x")])
    assert code == 3


def test_dump_mesh_flag(tmp_path):
    out = tmp_path / "run"
    assert main(["state", "--preset", "constant-v1", "--set", "n=2",
                 "--out", str(out), "--dump-mesh"]) == 0
    lines = (out / "mesh.txt").read_text().splitlines()
    assert lines[0] == "nodes 9 triangles 8"


def test_optimize_writes_reports(tmp_path):
    out = tmp_path / "run"
    assert main(["optimize", "--preset", "contact-v1", "--set", "n=4",
                 "--out", str(out)]) == 0
    _, rows = read_csv(out / "g_opt.csv")
    assert len(rows) == 25
    hist_header, hist = read_csv(out / "history.csv")
    js = [float(r[1]) for r in hist]
    assert all(b <= a for a, b in zip(js, js[1:]))


def test_optimize_huge_weight_gives_tiny_control(tmp_path):
    out = tmp_path / "run"
    assert main(["optimize", "--preset", "contact-v1", "--set", "n=4",
                 "--set", "M=1000000", "--set", "opt_tol=1e-5",
                 "--out", str(out)]) == 0
    report = (out / "report.txt").read_text()
    gnorm = float(report.split("g_norm_H: ")[1].split()[0])
    assert gnorm <= 1e-6


def test_sweep_h_zero_case_notes_and_passes(tmp_path):
    out = tmp_path / "run"
    assert main(["sweep-h", "--preset", "constant-v1",
                 "--set", "levels=2,4,8,16", "--out", str(out)]) == 0
    text = (out / "rate_h_state.csv").read_text()
    assert "zero errors excluded from fit" in text or "usable rows" in text
    summary = (out / "summary.txt").read_text()
    assert "PASS" in summary


def test_sweep_h_contact_passes_floor(tmp_path):
    out = tmp_path / "run"
    assert main(["sweep-h", "--preset", "contact-v1",
                 "--set", "levels=4,8,16,32", "--out", str(out)]) == 0
    summary = (out / "summary.txt").read_text()
    assert "FAIL" not in summary


def test_sweep_alpha_insufficient_rows_exits_4(tmp_path):
    out = tmp_path / "run"
    code = main(["sweep-alpha", "--preset", "contact-v1", "--set", "n=4",
                 "--set", "alphas=2,4", "--out", str(out)])
    assert code == 4


def test_sweep_alpha_contact_passes(tmp_path):
    out = tmp_path / "run"
    alphas = ",".join(str(2 ** k) for k in range(1, 9))
    assert main(["sweep-alpha", "--preset", "contact-v1", "--set", "n=8",
                 "--set", f"alphas={alphas}", "--out", str(out)]) == 0
    header, rows = read_csv(out / "rate_alpha_trace.csv")
    assert header == ["param", "value", "error", "norm"]
    assert rows[0][0] == "alpha_minus_1"


def test_conjecture_rerun_is_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    args = ["conjecture", "--preset", "contact-v1", "--set", "n=3",
            "--set", "trials=20", "--seed", "5"]
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    assert (a / "conjecture.csv").read_bytes() == (b / "conjecture.csv").read_bytes()
    assert (a / "witnesses.csv").read_bytes() == (b / "witnesses.csv").read_bytes()


def test_state_rerun_is_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    args = ["state", "--preset", "contact-v1", "--set", "n=8"]
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    assert (a / "state.csv").read_bytes() == (b / "state.csv").read_bytes()


def test_interp_check_passes(tmp_path):
    out = tmp_path / "run"
    assert main(["interp-check", "--out", str(out)]) == 0
    summary = (out / "summary.txt").read_text()
    assert summary.count("PASS") == 2


def test_control_from_file(tmp_path):
    vals = np.linspace(-3.0, 1.0, 9)
    path = tmp_path / "g.txt"
    path.write_text("\n".join(str(v) for v in vals) + "\n")
    out = tmp_path / "run"
    assert main(["state", "--preset", "constant-v1", "--set", "n=2",
                 "--set", f"g=file:{path}", "--out", str(out)]) == 0
    short = tmp_path / "short.txt"
    short.write_text("1.0\n2.0\n")
    assert main(["state", "--preset", "constant-v1", "--set", "n=2",
                 "--set", f"g=file:{short}", "--out", str(out)]) == 2


def test_cli_optimize_methods_agree(tmp_path):
    js = {}
    for method, tol in (("proj_grad_adjoint", "1e-9"), ("coord_search", "1e-6")):
        out = tmp_path / method
        assert main(["optimize", "--preset", "contact-v1", "--set", "n=2",
                     "--set", f"opt_method={method}", "--set", f"opt_tol={tol}",
                     "--set", "opt_max_iter=20000", "--out", str(out)]) == 0
        report = (out / "report.txt").read_text()
        js[method] = float(report.split("J_opt: ")[1].split()[0])
    assert js["proj_grad_adjoint"] == pytest.approx(js["coord_search"], abs=1e-6)


def test_headers_record_hash_and_preset(tmp_path):
    out = tmp_path / "run"
    main(["state", "--preset", "contact-v1", "--out", str(out)])
    head = (out / "state.csv").read_text().splitlines()[:4]
    assert head[0] == "# vicontrol state"
    assert head[1].startswith("# config-hash: ")
    assert head[2] == "# preset: contact-v1"
    assert "control-space" in head[3]
