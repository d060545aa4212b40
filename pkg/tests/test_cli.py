import json
import subprocess
import sys

import numpy as np
import pytest

import _oracles as orc
from qvn.cli import EXIT_ABORT, EXIT_INVALID, EXIT_OK, main
from qvn.scenarios import ScenarioError, budget_check, builtin_scenario, list_scenarios, \
    load_scenario, run_scenario, validate_report

T = np.diag([1, np.exp(1j * np.pi / 4)])


def run_cli(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def without_wall_time(text):
    data = json.loads(text)
    data.pop("wall_time")
    return data


def test_list_scenarios_sorted_and_complete(capsys):
    code, out, _ = run_cli(["list-scenarios"], capsys)
    names = out.split()
    assert code == EXIT_OK and names == sorted(names) and len(names) >= 8
    required = {"compose-HT", "switch-demo", "control-unknown", "lcu-demo",
                "superchannel-demo", "download-ebit-qubit", "download-bb84", "verify-demo"}
    assert required <= set(names)


def test_compose_demo_report(capsys):
    code, out, _ = run_cli(["demo", "compose-HT"], capsys)
    report = json.loads(out)
    assert code == EXIT_OK and report["status"] == "success"
    assert report["fidelities"]["0"] >= 1 - 1e-9
    assert report["qubit_budget"]["peak"] == 5
    th0 = T @ orc.HAD @ [1, 0]
    ref = np.abs(orc.HAD.conj().T @ th0) ** 2
    assert np.abs(np.array(report["probabilities"]["1"]) - ref).max() < 1e-9
    validate_report(report)


def test_download_demo_budget(capsys):
    code, out, _ = run_cli(["demo", "download-ebit-qubit"], capsys)
    assert code == EXIT_OK and json.loads(out)["qubit_budget"]["peak"] == 9


def test_same_seed_gives_identical_reports(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for path in (a, b):
        assert main(["demo", "switch-demo", "--seed", "7", "--out", str(path)]) == EXIT_OK
    assert without_wall_time(a.read_text()) == without_wall_time(b.read_text())
    c = tmp_path / "c.json"
    main(["demo", "verify-demo", "--seed", "8", "--trials", "3", "--out", str(c)])
    report = json.loads(c.read_text())
    assert [t["trial"] for t in report["trials"]] == [0, 1, 2] and report["seed"] == 8


def test_run_file_and_verify(tmp_path, capsys):
    src = tmp_path / "s.json"
    src.write_text(json.dumps(builtin_scenario("superchannel-reduced")))
    out = tmp_path / "r.json"
    assert main(["run", str(src), "--out", str(out)]) == EXIT_OK
    code, text, _ = run_cli(["verify", str(out)], capsys)
    assert code == EXIT_OK
    assert json.loads(text)["superchannel-reduced"] == {"peak": 4, "expected": 4, "pass": True}


def test_verify_flags_budget_violation(tmp_path, capsys):
    report = run_scenario(builtin_scenario("compose-HT"))
    report["qubit_budget"]["per_step"][0] = 7
    report["qubit_budget"]["peak"] = 7
    path = tmp_path / "r.json"
    path.write_text(json.dumps(report))
    code, text, _ = run_cli(["verify", str(path)], capsys)
    assert code == EXIT_INVALID and not json.loads(text)["compose-HT"]["pass"]


def test_malformed_json_reports_line(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "version": 1,\n  "name": \n}')
    code, _, err = run_cli(["run", str(path)], capsys)
    assert code == EXIT_INVALID and "line 4" in err


def test_schema_violation_names_field(tmp_path, capsys):
    data = builtin_scenario("compose-HT")
    data["steps"][0]["mode"] = "sideways"
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(data))
    code, _, err = run_cli(["run", str(path)], capsys)
    assert code == EXIT_INVALID and "steps/0/mode" in err


def test_undefined_label_rejected(tmp_path):
    data = builtin_scenario("compose-HT")
    data["steps"][1]["label"] = "nowhere"
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(data))
    with pytest.raises(ScenarioError, match="undefined label"):
        load_scenario(path)


def test_unknown_demo_and_missing_file(tmp_path, capsys):
    assert run_cli(["demo", "nope"], capsys)[0] == EXIT_INVALID
    assert run_cli(["run", str(tmp_path / "missing.json")], capsys)[0] == EXIT_INVALID


def test_eavesdropped_download_exits_with_abort(tmp_path, capsys):
    data = builtin_scenario("download-bb84")
    data["channel"] = {"kind": "eavesdropper", "f": 1.0}
    path = tmp_path / "eve.json"
    path.write_text(json.dumps(data))
    code, out, _ = run_cli(["run", str(path)], capsys)
    report = json.loads(out)
    assert code == EXIT_ABORT and report["status"] == "abort" and "abort_reason" in report


def test_mode_override_reaches_compose(capsys):
    code, out, _ = run_cli(["demo", "compose-HT", "--mode", "deterministic"], capsys)
    step = json.loads(out)["trials"][0]["steps"][0]
    assert code == EXIT_OK and step["mode"] == "deterministic"


def test_bad_flags_exit_with_usage_error(capsys):
    with pytest.raises(SystemExit) as err:
        main(["demo", "compose-HT", "--seed", "-1"])
    assert err.value.code == 2
    with pytest.raises(SystemExit):
        main(["demo", "compose-HT", "--trials", "0"])


def test_superchannel_budgets_and_limit():
    reports = [run_scenario(builtin_scenario(n)) for n in
               ("superchannel-demo", "superchannel-reduced", "control-unknown-2q")]
    checked = budget_check(reports)
    assert [checked[r["scenario"]]["peak"] for r in reports] == [6, 4, 9]
    assert all(v["pass"] for v in checked.values())


def test_every_demo_is_fast_and_small():
    for name in list_scenarios():
        report = run_scenario(builtin_scenario(name))
        assert report["qubit_budget"]["peak"] <= 19
        assert report["wall_time"] < 10
        validate_report(report)


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "qvn", "list-scenarios"], capture_output=True,
                          text=True, check=False)
    assert proc.returncode == 0 and "compose-HT" in proc.stdout
