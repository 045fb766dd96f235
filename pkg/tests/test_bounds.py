#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Tests for cost and distillation bounds, their superchannel constructions and the T-count table
"""
import os
import sys

import numpy as np
import pytest

# Add parent directory to path for imports
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from bounds import (
    _guarded_ceil,
    _guarded_floor,
    cost_dimension_sufficient,
    cost_lower_bound,
    cost_superchannel,
    cost_upper_bound,
    distill_lower_bound,
    distill_upper_bound,
    distillation_superchannel,
    evaluate_cost,
    evaluate_distill,
    howard_campbell_cost,
    render_table1,
    row_gate_channel_lr,
    table1_report,
)
from channels import (
    choi_from_unitary,
    is_cspo_preserving,
    preparation_channel,
    validate_superchannel,
)
from errors import DimensionMismatch, FixtureRejected, FreeResourceState
from fixtures import named_state, preparing_unitary, table1_rows
from monotones import dmin_eps_state, dmin_state, robustness_channel, robustness_state
from stabilizer import H, T, from_bloch

T_STATE = from_bloch(np.array([1, 1, 0]) / np.sqrt(2))
H_STATE = from_bloch(np.array([1, 1, 1]) / np.sqrt(3))
T_GATE = choi_from_unitary(T)


@pytest.mark.parametrize("x, ceil, floor", [
    (2.0000000000001, 2, 2),
    (1.9999999999999, 2, 2),
    (2.1, 3, 2),
    (0.0, 0, 0),
])
def test_guarded_rounding(x, ceil, floor):
    assert _guarded_ceil(x) == ceil
    assert _guarded_floor(x) == floor


def test_bound_formulas():
    assert cost_upper_bound(0.45, 0.2284).value == 2
    assert cost_upper_bound(0.0, 0.2284).value == 0
    assert cost_lower_bound(0.5, 0.25).value == pytest.approx(2.0)
    assert distill_lower_bound(1.0, 0.5).value == 2
    assert distill_lower_bound(-0.1, 0.5).value == 0

    report = distill_upper_bound(0.6, 0.3)
    assert report.value == pytest.approx(2.0)
    assert report.notes == []
    assert report.to_dict()["quantity"] == "distillUpper"


def test_free_reference_state_is_rejected():
    with pytest.raises(FreeResourceState):
        cost_upper_bound(0.3, 0.0)
    with pytest.raises(FreeResourceState):
        cost_lower_bound(0.3, 1e-15)
    with pytest.raises(FreeResourceState):
        distill_lower_bound(0.3, 0.0)


def test_bracketed_distillation_bound_is_marked():
    loose = distill_upper_bound({"lower": 0.2, "upperEstimate": 0.3, "certified": False}, 0.2)
    assert loose.value == pytest.approx(1.0)
    assert "bound-on-bound" in loose.notes

    tight = distill_upper_bound({"lower": 0.2, "upperEstimate": 0.2, "certified": True}, 0.2)
    assert tight.notes == []


def test_dimension_sufficiency():
    assert cost_dimension_sufficient(0.3, 0.3)
    assert not cost_dimension_sufficient(0.5, 0.3)


def test_howard_campbell_counts():
    assert howard_campbell_cost(1.4, t_max=2) == 1
    assert howard_campbell_cost(np.sqrt(3), t_max=2) == 2
    assert howard_campbell_cost(100.0, t_max=2) is None


def test_face_state_cost_is_two():
    dmin_t = dmin_state(T_STATE).value
    lr_h = robustness_state(H_STATE).conventions["LR"]
    assert cost_upper_bound(lr_h, dmin_t).value == 2


def test_channel_level_evaluation():
    upper, lower = evaluate_cost(T_GATE, T_STATE)
    assert upper.quantity == "costUpper" and lower.quantity == "costLower"
    assert upper.value >= 1
    assert lower.value <= upper.value + 1e-9

    free_upper, _ = evaluate_cost(choi_from_unitary(H), T_STATE)
    assert free_upper.value == 0

    upper, lower = evaluate_distill(preparation_channel(H_STATE), T_STATE, 0.0)
    assert upper.quantity == "distillUpper" and lower.quantity == "distillLower"
    assert upper.notes == []
    assert upper.value >= 1.0


def test_cost_superchannel_is_cspo_preserving():
    decomposition = robustness_state(T_STATE).optimizer
    channel = preparation_channel(T_STATE)
    negative = preparation_channel(decomposition["negative_state"])
    theta = cost_superchannel(H_STATE, channel, negative)
    assert theta.dims == (1, 2, 1, 2)
    assert validate_superchannel(theta) == []
    assert is_cspo_preserving(theta).preserving

    with pytest.raises(DimensionMismatch):
        cost_superchannel(H_STATE, channel, T_GATE)


def test_distillation_superchannel_is_cspo_preserving():
    E = dmin_eps_state(T_GATE.normalized, 0.3).optimizer["E"]
    sigma = robustness_state(T_STATE).optimizer["negative_state"]
    theta = distillation_superchannel(E, T_STATE, sigma, 2, 2)
    assert theta.dims == (2, 2, 1, 2)
    result = is_cspo_preserving(theta)
    assert result.preserving and result.checked == 120

    with pytest.raises(DimensionMismatch):
        distillation_superchannel(np.eye(2), T_STATE, sigma, 2, 2)


@pytest.mark.slow
def test_table_for_one_and_two_qubit_states():
    try:
        report = table1_report()
    except FixtureRejected as e:
        pytest.xfail(f"chi fixture not regenerated: {e}")
    rows = {row.label: row for row in report.rows}
    assert report.psi == "T"
    assert report.dmin_psi == pytest.approx(0.2284, abs=1e-4)
    assert rows["H"].computed == 2
    assert rows["H"].r_hc == pytest.approx(np.sqrt(3), abs=1e-7)
    assert rows["H"].howard_campbell_computed == 2
    assert rows["chi"].r_hc == pytest.approx(np.sqrt(5), abs=1e-3)
    assert rows["chi"].computed == rows["chi"].published
    assert rows["H"].channel_computed is not None
    assert rows["CS_{1,2}"].channel_computed is None
    assert "channel-over-cap" in rows["CS_{1,2}"].flags
    assert "channel-unavailable" in rows["chi"].flags
    assert any(row.channel_computed != row.computed for row in report.rows)

    text = render_table1(report)
    assert text.splitlines()[0].split()[:3] == ["State", "computed", "published"]
    assert len(text.splitlines()) == len(report.rows) + 1
    assert report.to_dict()["rows"][0]["label"] == "H"


def test_channel_column_uses_the_row_gate():
    rows = {row["label"]: row for row in table1_rows(include_three_qubit=True)}
    lr = row_gate_channel_lr(rows["H"])
    U = preparing_unitary(named_state("H"))
    assert lr == pytest.approx(robustness_channel(choi_from_unitary(U)).conventions["LR"],
                               abs=1e-9)
    # U|+> = |H> with |+> free
    assert lr >= robustness_state(named_state("H")).conventions["LR"] - 1e-7

    assert row_gate_channel_lr(rows["CS_{1,2}"]) is None
    assert row_gate_channel_lr(rows["T_{1,2,3}"]) is None
    assert row_gate_channel_lr(rows["chi"]) is None


def test_gate_and_preparation_channel_lr():
    row = {"label": "T", "qubits": 1, "state": {"gates": [{"gate": "T-gate", "targets": [0]}]}}
    assert row_gate_channel_lr(row) == pytest.approx(np.log2(1 + (np.sqrt(2) - 1) / 2), abs=1e-4)
    prep_lr = robustness_channel(preparation_channel(named_state("H"))).conventions["LR"]
    assert prep_lr == pytest.approx(robustness_state(named_state("H")).conventions["LR"],
                                    abs=1e-7)
