#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Tests for circuit decompositions, static Monte Carlo and the constrained-path simulator
"""
import math
import os
import sys

import numpy as np
import pytest

# Add parent directory to path for imports
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from channels import ChoiOperator, choi_from_unitary
from errors import DimensionMismatch, SchemaError, UnsupportedDimension
from simulate import (
    CircuitElement,
    CircuitSpec,
    SimulationConfig,
    constrained_path,
    decompose_circuit,
    expectation_exact,
    is_clifford_channel,
    lambda_star,
    register_channel,
    sample_count,
    signed_mixtures,
    static_monte_carlo,
)
from stabilizer import H, S, T, X, PauliString, cnot

H_GATE = choi_from_unitary(H)
T_GATE = choi_from_unitary(T)


def hth_circuit():
    elements = [CircuitElement(g, (0,)) for g in (H_GATE, T_GATE, H_GATE)]
    return CircuitSpec(1, elements, PauliString.parse("Z"))


def test_sample_count():
    assert sample_count(0.1, 1.0, 0.05) == 738
    assert sample_count(0.1, 2.0, 0.05) == math.ceil(800 * math.log(40))
    assert sample_count(10.0, 1.0, 0.5) == 1


def test_lambda_star():
    assert lambda_star(3, 2, 0.01) == pytest.approx(1.99007, abs=1e-5)
    assert lambda_star(3, 2, 0.01, approximate=True) == pytest.approx(2.0)
    with pytest.raises(DimensionMismatch):
        lambda_star(1, 0)


@pytest.mark.parametrize("kwargs", [
    {"c": 0.0}, {"c": 1.0}, {"p_fail": 1.5}, {"epsilon": 0.0},
    {"delta_star": -1.0}, {"seed": -1}, {"workers": 0},
])
def test_simulation_config_validation(kwargs):
    with pytest.raises(SchemaError):
        SimulationConfig(**kwargs)


def test_circuit_validation():
    with pytest.raises(UnsupportedDimension):
        CircuitSpec(4, [], PauliString.parse("ZZZZ"))
    with pytest.raises(DimensionMismatch):
        CircuitSpec(1, [], PauliString.parse("ZZ"))
    with pytest.raises(DimensionMismatch):
        CircuitSpec(1, [CircuitElement(H_GATE, (1,))], PauliString.parse("Z"))
    with pytest.raises(DimensionMismatch):
        CircuitElement(H_GATE, (0, 1))


def test_exact_expectation():
    assert expectation_exact(hth_circuit()) == pytest.approx(1 / np.sqrt(2), abs=1e-12)

    bell = CircuitSpec(2, [CircuitElement(H_GATE, (0,)),
                           CircuitElement(choi_from_unitary(cnot(0, 1, 2)), (0, 1))],
                       PauliString.parse("ZZ"))
    assert expectation_exact(bell) == pytest.approx(1.0, abs=1e-12)


def test_clifford_detection():
    assert is_clifford_channel(H_GATE)
    assert is_clifford_channel(choi_from_unitary(S))
    assert is_clifford_channel(choi_from_unitary(cnot(0, 1, 2)))
    assert not is_clifford_channel(T_GATE)
    assert not is_clifford_channel(ChoiOperator(np.eye(4) / 2, 2, 2))


def test_circuit_decomposition_reconstructs_the_register_map():
    circuit = hth_circuit()
    decomposition = decompose_circuit(circuit)
    assert decomposition.lambdas[0] == 1.0 and decomposition.lambdas[2] == 1.0
    assert decomposition.lambdas[1] >= 1.0
    assert decomposition.lam == pytest.approx(decomposition.lambdas[1])
    exact = register_channel(circuit, [e.channel for e in circuit.elements])
    np.testing.assert_allclose(decomposition.reconstruct(), exact.J, atol=1e-6)


def test_clifford_circuit_is_estimated_exactly():
    circuit = CircuitSpec(1, [CircuitElement(choi_from_unitary(X), (0,))],
                          PauliString.parse("Z"))
    result = static_monte_carlo(circuit, SimulationConfig(seed=5))
    assert result.estimate == -1.0
    assert result.sample_count == 738
    data = result.to_dict()
    assert data["runLog"]["qNorm"] == 1.0
    assert data["runLog"]["seed"] == 5
    assert set(data) == {"estimate", "errorBound", "sampleCount", "replacedIndices", "lambda",
                         "runLog"}


def test_static_monte_carlo_estimate():
    result = static_monte_carlo(hth_circuit(), SimulationConfig(seed=0))
    assert result.error_bound == 0.1
    assert abs(result.estimate - 1 / np.sqrt(2)) <= 0.1
    assert result.run_log["qNorm"] > 1.0


def test_static_monte_carlo_ignores_the_worker_count():
    single = static_monte_carlo(hth_circuit(), SimulationConfig(seed=42, workers=1, chunk_size=64))
    pooled = static_monte_carlo(hth_circuit(), SimulationConfig(seed=42, workers=4, chunk_size=64))
    assert single.estimate == pooled.estimate
    assert single.sample_count == pooled.sample_count


def test_constrained_path_with_a_generous_error_budget():
    circuit = hth_circuit()
    result = constrained_path(circuit, SimulationConfig(delta_star=3.0, seed=1))
    assert 0 in result.replaced and 2 in result.replaced
    assert result.run_log["lambdaStar"] == pytest.approx((4 / 1.01) ** (1 / 3))
    if result.replaced == [0, 1, 2]:
        # every element runs as its free part, so the interval is exact
        assert abs(result.estimate - 1 / np.sqrt(2)) <= result.error_bound + 1e-7
        assert result.error_bound <= max(3.0, 0.01) + 1e-9


def test_constrained_path_coverage():
    circuit = hth_circuit()
    truth = 1 / np.sqrt(2)
    decomposition = decompose_circuit(circuit)
    covered = 0
    for seed in range(20):
        result = constrained_path(circuit, SimulationConfig(delta_star=0.5, seed=seed),
                                  decomposition=decomposition)
        assert result.error_bound <= 0.5 + 1e-9
        covered += abs(result.estimate - truth) <= result.error_bound + 1e-9
    assert covered >= 18


def test_constrained_path_warns_below_c(caplog):
    circuit = CircuitSpec(1, [CircuitElement(H_GATE, (0,))], PauliString.parse("X"))
    result = constrained_path(circuit, SimulationConfig(delta_star=0.0, c=0.05))
    assert "below c" in caplog.text
    assert result.error_bound <= 0.05 + 1e-9
    assert abs(result.estimate - 1.0) <= result.error_bound + 1e-9


def test_constrained_path_sample_count_with_a_large_budget():
    circuit = CircuitSpec(1, [CircuitElement(g, (0,)) for g in (T_GATE, T_GATE, H_GATE)],
                          PauliString.parse("X"))
    result = constrained_path(circuit, SimulationConfig(delta_star=10.0, seed=2))
    assert result.replaced == [0, 1, 2]
    assert result.sample_count == math.ceil(2 * math.log(2 / 0.05) / 0.01 ** 2)


def test_constrained_path_sample_count_is_nonincreasing_in_the_budget():
    circuit = hth_circuit()
    decomposition = decompose_circuit(circuit)
    counts = [
        constrained_path(circuit, SimulationConfig(delta_star=d, seed=0),
                         decomposition=decomposition).sample_count
        for d in (0.0, 0.1, 0.5, 2.0, 10.0)
    ]
    assert all(a >= b for a, b in zip(counts, counts[1:]))


def test_static_monte_carlo_failure_rate():
    circuit = CircuitSpec(1, [CircuitElement(T_GATE, (0,))], PauliString.parse("X"))
    truth = expectation_exact(circuit)
    mixtures = signed_mixtures(circuit)
    failures = 0
    for seed in range(200):
        result = static_monte_carlo(circuit, SimulationConfig(seed=seed), mixtures=mixtures)
        failures += abs(result.estimate - truth) > result.error_bound
    assert failures / 200 <= 0.05 + 0.02
