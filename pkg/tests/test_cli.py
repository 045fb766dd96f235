#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Tests for the command-line surface: exit statuses, JSON emission and per-command payloads
"""
import io
import json
import logging
import os
import sys

import numpy as np
import pytest

# Add parent directory to path for imports
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from cli import CommandResult, emit_report, run, to_jsonable
from settings import MagicConfig, setup_logging

X_CIRCUIT = json.dumps({
    "qubits": 1,
    "elements": [{"channel": {"name": "X-gate"}, "targets": [0]}],
    "observable": "Z",
})


def invoke(*argv, cache_dir=None):
    """Run the CLI and return (exit status, parsed JSON or raw text)"""
    args = list(argv)
    if cache_dir is not None:
        args += ["--cache-dir", str(cache_dir)]
    out = io.StringIO()
    status = run(args, stream=out)
    text = out.getvalue()
    try:
        return status, json.loads(text)
    except json.JSONDecodeError:
        return status, text


def test_to_jsonable_rounding_and_types():
    assert to_jsonable(1 / 3) == 0.333333333333
    assert to_jsonable(np.float64(2.0)) == 2.0
    assert to_jsonable(np.bool_(True)) is True
    assert to_jsonable(complex(1, 0)) == 1.0
    assert to_jsonable(complex(0.5, -0.25)) == [0.5, -0.25]
    assert to_jsonable({"a": np.arange(3)}) == {"a": [0, 1, 2]}
    with pytest.raises(TypeError):
        to_jsonable(object())


def test_emit_report():
    out = io.StringIO()
    emit_report(CommandResult({}), stream=out)
    assert out.getvalue() == "{}\n"

    out = io.StringIO()
    emit_report(CommandResult({"count": 6, "inner": {"ok": True}}), as_text=True, stream=out)
    assert out.getvalue().splitlines() == ["count: 6", "inner:", "  ok: true"]


def test_enumerate(tmp_path):
    status, payload = invoke("enumerate", "--n", "2", cache_dir=tmp_path)
    assert status == 0
    assert payload["count"] == 60
    assert payload["entangled"] == 24

    status, payload = invoke("enumerate", "--n", "1", "--emit-states", cache_dir=tmp_path)
    assert status == 0
    assert len(payload["states"]) == 6


def test_enumerate_rejects_four_qubits(tmp_path):
    status, payload = invoke("enumerate", "--n", "4", cache_dir=tmp_path)
    assert status == 1
    assert payload["error"] == "unsupported-dimension"


def test_monotone_on_named_and_json_states(tmp_path):
    status, payload = invoke("monotone", "dmin", "--state", '{"name": "T"}', cache_dir=tmp_path)
    assert status == 0
    assert payload["value"] == pytest.approx(0.2284, abs=1e-4)

    status, payload = invoke("monotone", "robustness", "--state", "H", cache_dir=tmp_path)
    assert status == 0
    assert payload["conventions"]["R_HC"] == pytest.approx(np.sqrt(3), abs=1e-7)


def test_monotone_on_channels(tmp_path):
    status, payload = invoke("monotone", "dmin", "--channel", "H-gate", cache_dir=tmp_path)
    assert status == 0
    assert payload == {"lower": 0.0, "upperEstimate": 0.0, "certified": True}

    status, payload = invoke("monotone", "geometric", "--channel", "X-gate", cache_dir=tmp_path)
    assert status == 1
    assert payload["error"] == "schema-error"


def test_check_stab_exit_statuses(tmp_path):
    assert invoke("check-stab", "--state", "zero", cache_dir=tmp_path)[0] == 0
    status, payload = invoke("check-stab", "--state", "T", cache_dir=tmp_path)
    assert status == 1
    assert "witness" in payload


def test_check_cspo(tmp_path):
    assert invoke("check-cspo", "--channel", "H-gate", cache_dir=tmp_path)[0] == 0
    assert invoke("check-cspo", "--channel", "T-gate", cache_dir=tmp_path)[0] == 1


def test_check_superchannel(tmp_path):
    identity = json.dumps({"kind": "identity", "dims": [1, 2]})
    status, _ = invoke("check-superchannel", "--superchannel", identity, "--complete",
                       cache_dir=tmp_path)
    assert status == 0

    magic = json.dumps({"kind": "post-composition", "gate": {"name": "T-gate"}})
    status, payload = invoke("check-superchannel", "--superchannel", magic, "--preserving",
                             cache_dir=tmp_path)
    assert status == 1
    assert payload["preserving"] is False


def test_convert_infeasible_with_certificate(tmp_path):
    status, payload = invoke("convert", "--from", "T", "--to", "H", cache_dir=tmp_path)
    assert status == 1
    assert payload["feasible"] is False
    assert len(payload["certificate"]) == 4
    assert payload["hullAgrees"] is True


def test_convert_feasible_and_distance(tmp_path):
    status, payload = invoke("convert", "--from", "H", "--to", "mixed", cache_dir=tmp_path)
    assert status == 0
    assert payload["feasible"] is True

    status, payload = invoke("distance", "--from", "zero", "--to", "H", cache_dir=tmp_path)
    assert status == 0
    assert payload["distance"] == pytest.approx(0.21132, abs=1e-5)


def test_bad_json_is_a_schema_error(tmp_path):
    status, payload = invoke("check-stab", "--state", "{not json", cache_dir=tmp_path)
    assert status == 1
    assert payload["error"] == "schema-error"
    assert payload["position"] == "/state"


def test_failures_are_also_logged(tmp_path, caplog):
    caplog.set_level(logging.WARNING, logger="cli")
    status, payload = invoke("check-stab", "--state", "{not json", cache_dir=tmp_path)
    assert status == 1 and payload["error"] == "schema-error"
    assert any(r.levelno == logging.ERROR and "check-stab failed" in r.getMessage()
               for r in caplog.records)

    caplog.clear()
    status, payload = invoke("convert", "--from", "T", "--to", "H", cache_dir=tmp_path)
    assert status == 1 and payload["feasible"] is False
    assert any("exit status 1" in r.getMessage() for r in caplog.records)


def test_diagnostics_stay_off_stdout(tmp_path, capsys):
    setup_logging(MagicConfig())
    try:
        status = run(["check-stab", "--state", "{not json", "--cache-dir", str(tmp_path)])
    finally:
        logging.basicConfig(handlers=[logging.StreamHandler(sys.stderr)], force=True)
    captured = capsys.readouterr()
    assert status == 1
    assert json.loads(captured.out)["error"] == "schema-error"
    assert "check-stab failed" in captured.err


def test_json_from_file(tmp_path):
    path = tmp_path / "state.json"
    path.write_text(json.dumps({"bloch": [0, 0, 1]}))
    assert invoke("check-stab", "--state", f"@{path}", cache_dir=tmp_path)[0] == 0


def test_usage_errors_exit_with_two():
    assert invoke("teleport")[0] == 2
    assert invoke("monotone", "no-such-kind", "--state", "T")[0] == 2


def test_bounds_cost(tmp_path):
    status, payload = invoke("bounds", "cost", "--channel", "T-gate", cache_dir=tmp_path)
    assert status == 0
    assert payload["costUpper"]["value"] >= 1
    assert payload["costLower"]["value"] <= payload["costUpper"]["value"] + 1e-9

    status, payload = invoke("bounds", "cost", cache_dir=tmp_path)
    assert status == 1


def test_simulate_is_byte_identical_across_runs(tmp_path):
    outputs = []
    for _ in range(2):
        out = io.StringIO()
        status = run(["simulate", "static", "--circuit", X_CIRCUIT, "--seed", "3",
                      "--cache-dir", str(tmp_path)], stream=out)
        assert status == 0
        outputs.append(out.getvalue())
    assert outputs[0] == outputs[1]
    payload = json.loads(outputs[0])
    assert payload["estimate"] == -1.0
    assert payload["sampleCount"] == 738
    assert "wallTime" not in payload["runLog"]


def test_simulate_rejects_bad_parameters(tmp_path):
    status, payload = invoke("simulate", "static", "--circuit", X_CIRCUIT, "--p-fail", "2",
                             cache_dir=tmp_path)
    assert status == 1
    assert payload["position"] == "/p_fail"


def test_text_output(tmp_path):
    status, text = invoke("enumerate", "--n", "1", "--text", cache_dir=tmp_path)
    assert status == 0
    assert "count: 6" in text.splitlines()
