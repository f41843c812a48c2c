import json
import math
from pathlib import Path

import pytest

from icvx.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, out


def test_list(capsys):
    code, out = run(capsys, "list")
    assert code == 0
    assert out.splitlines() == ["karney", "padded_finite_qp", "onedim_tail",
                                "minimax_abs"]


def test_gap_karney(capsys, tmp_path):
    out_file = tmp_path / "report.json"
    code, _ = run(capsys, "gap", "builtin:karney", "--no-meta",
                  "--out", str(out_file))
    assert code == 0
    report = json.loads(out_file.read_text())
    assert report["instance"] == "karney"
    assert report["values"]["haar"] == pytest.approx(-1.0, abs=1e-4)
    assert report["values"]["d"] == pytest.approx(0.0, abs=1e-4)
    assert report["values"]["dm_0"] == pytest.approx(0.0, abs=1e-3)
    assert report["values"]["dm_3"] == pytest.approx(0.0, abs=1e-3)
    assert report["values"]["primal"] == pytest.approx(0.0, abs=1e-6)
    assert report["flags"] == []
    assert "meta" not in report


def test_solve_primal_karney(capsys):
    code, out = run(capsys, "solve", "builtin:karney", "--form", "primal",
                    "--no-meta")
    assert code == 0
    report = json.loads(out)
    assert report["values"]["primal"] == pytest.approx(0.0, abs=1e-6)


def test_solve_haar_karney(capsys):
    code, out = run(capsys, "solve", "builtin:karney", "--form", "haar",
                    "--no-meta")
    assert code == 0
    report = json.loads(out)
    assert report["values"]["haar"] == pytest.approx(-1.0, abs=1e-4)
    assert report["multipliers"][0]["support"]["1"] == pytest.approx(1.0, abs=1e-3)


def test_kkt_onedim_tail_passes(capsys):
    code, out = run(capsys, "kkt", "builtin:onedim_tail", "--form", "d",
                    "--eps", "1e-6", "--no-meta")
    assert code == 0
    report = json.loads(out)
    assert report["residuals"]["minnorm"] <= 1e-10
    assert report["residuals"]["slackness"] <= 1e-9


def test_kkt_karney_dm_at_origin(capsys):
    code, out = run(capsys, "kkt", "builtin:karney", "--form", "dm", "--m", "3",
                    "--eps", "1e-3", "--point", "0,0", "--no-meta")
    assert code == 0
    report = json.loads(out)
    assert report["residuals"]["minnorm"] <= 1e-3


def test_kkt_karney_dm_far_solution_fails_honestly(capsys):
    # at a solution far from the origin every tail constraint is strictly
    # slack, the positive-part subdifferentials vanish, and the bounded-form
    # certificate cannot close; the run reports the failure and exits 2
    code, out = run(capsys, "kkt", "builtin:karney", "--form", "dm", "--m", "3",
                    "--eps", "1e-3", "--point=-50,0", "--no-meta")
    assert code == 2
    report = json.loads(out)
    assert "verification_failed" in report["flags"]


def test_slater_exit_codes(capsys):
    code, out = run(capsys, "slater", "builtin:karney", "--no-meta")
    assert code == 0 and json.loads(out)["values"]["slater"] is True
    code, out = run(capsys, "slater", "builtin:minimax_abs", "--no-meta")
    assert code == 2  # verification failure: no strictly feasible point
    assert json.loads(out)["values"]["slater"] is False


def test_scan_v(capsys):
    code, out = run(capsys, "scan-v", "builtin:karney",
                    "--eps-list", "1,0.5,0.1,0.01", "--no-meta")
    assert code == 0
    report = json.loads(out)
    assert report["values"]["limit"] == pytest.approx(0.0, abs=1e-3)
    points = report["certificates"][0]["points"]
    assert points[0][1] == pytest.approx(-1.0, abs=1e-6)


def test_minimax_cli(capsys):
    code, out = run(capsys, "minimax", "builtin:minimax_abs", "--no-meta")
    assert code == 0
    report = json.loads(out)
    assert report["values"]["lhs"] == pytest.approx(0.0, abs=1e-9)
    assert report["residuals"]["gap"] <= 1e-4


def test_uls_cli(capsys):
    code, out = run(capsys, "uls", "builtin:minimax_abs", "--fns", "1,2",
                    "--no-meta")
    assert code == 0
    report = json.loads(out)
    assert report["values"]["uniform_infimum"] <= report["values"]["grid_inf_sum"] + 1e-9


def test_usage_error_exit_code(capsys):
    assert main(["solve", "/nonexistent/file.json"]) == 1
    assert main(["nonsense"]) == 1
    assert main([]) == 1


def test_parse_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"name": "x"}')
    assert main(["solve", str(bad)]) == 1


def test_instance_file_and_determinism(tmp_path, capsys):
    from icvx.instances import builtin, serialize

    f = tmp_path / "karney.json"
    f.write_text(serialize(builtin("karney")))
    out1 = tmp_path / "r1.json"
    out2 = tmp_path / "r2.json"
    assert main(["solve", str(f), "--form", "primal", "--no-meta",
                 "--out", str(out1)]) == 0
    assert main(["solve", str(f), "--form", "primal", "--no-meta",
                 "--out", str(out2)]) == 0
    assert out1.read_text() == out2.read_text()  # byte-identical reports


def test_report_written_on_verification_failure(tmp_path, capsys):
    out = tmp_path / "fail.json"
    code = main(["slater", "builtin:minimax_abs", "--no-meta", "--out", str(out)])
    assert code == 2
    assert out.exists()  # post-mortem report persists on failure
    report = json.loads(out.read_text())
    assert report["values"]["slater"] is False


def test_report_schema_top_level(capsys):
    code, out = run(capsys, "solve", "builtin:onedim_tail", "--form", "d",
                    "--no-meta")
    assert code == 0
    report = json.loads(out)
    for key in ("instance", "command", "values", "multipliers", "certificates",
                "residuals", "flags"):
        assert key in report
