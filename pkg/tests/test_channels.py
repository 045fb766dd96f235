#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Tests for Choi operators, CSPO membership, the qubit CSPO generators and superchannels
"""
import os
import sys

import numpy as np
import pytest

# Add parent directory to path for imports
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from channels import (
    ChoiOperator,
    SuperchannelChoi,
    apply_channel,
    apply_local_channel,
    apply_superchannel,
    choi_from_kraus,
    choi_from_unitary,
    compose_channels,
    constant_superchannel,
    cspo_vertices_qubit,
    embed_unitary,
    identity_superchannel,
    is_completely_cspo_preserving,
    is_cspo,
    is_cspo_preserving,
    is_cspo_preserving_qubit,
    measure_prepare_channel,
    mix_channels,
    post_composition_superchannel,
    preparation_channel,
    prepared_channel_library,
    sample_cspo_qubit,
    superchannel_from_pre_post,
    tensor_channels,
    validate_superchannel,
)
from errors import (
    DimensionMismatch,
    InvalidSuperchannel,
    NotTracePreserving,
    UnsupportedDimension,
)
from numerics import projector
from stabilizer import (
    H,
    T,
    X,
    Z,
    clifford_unitaries_single_qubit,
    cnot,
    from_bloch,
    stabilizer_set,
)

ZERO = projector(np.array([1, 0], dtype=complex))
PLUS = projector(np.array([1, 1], dtype=complex) / np.sqrt(2))
T_STATE = from_bloch(np.array([1, 1, 0]) / np.sqrt(2))


def test_unitary_choi_is_cptp_and_acts_by_conjugation():
    identity = choi_from_unitary(np.eye(2))
    bell = projector(np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2))
    np.testing.assert_allclose(identity.normalized, bell, atol=1e-12)
    assert identity.is_cptp()

    hadamard = choi_from_unitary(H)
    np.testing.assert_allclose(apply_channel(hadamard, ZERO), PLUS, atol=1e-12)
    np.testing.assert_allclose(apply_channel(choi_from_unitary(T), PLUS), T_STATE, atol=1e-12)


def test_choi_validation():
    with pytest.raises(NotTracePreserving):
        choi_from_kraus([np.diag([1, 0.5])])
    with pytest.raises(DimensionMismatch):
        ChoiOperator(np.eye(3), 2, 2)
    broken = ChoiOperator(np.eye(4), 2, 2)
    assert "not-trace-preserving" in broken.violations()
    with pytest.raises(DimensionMismatch):
        apply_channel(choi_from_unitary(H), np.eye(4) / 4)


def test_amplitude_damping_from_kraus():
    g = 0.3
    kraus = [np.array([[1, 0], [0, np.sqrt(1 - g)]]), np.array([[0, np.sqrt(g)], [0, 0]])]
    channel = choi_from_kraus(kraus)
    assert channel.is_cptp()
    out = apply_channel(channel, projector(np.array([0, 1], dtype=complex)))
    np.testing.assert_allclose(np.diag(out).real, [g, 1 - g], atol=1e-12)


def test_composition_and_tensor_products():
    hh = compose_channels(choi_from_unitary(H), choi_from_unitary(H))
    np.testing.assert_allclose(hh.J, choi_from_unitary(np.eye(2)).J, atol=1e-12)

    xz = tensor_channels(choi_from_unitary(X), choi_from_unitary(Z))
    np.testing.assert_allclose(xz.J, choi_from_unitary(np.kron(X, Z)).J, atol=1e-12)

    prep = preparation_channel(T_STATE)
    joint = tensor_channels(choi_from_unitary(H), prep)
    assert (joint.dim_in, joint.dim_out) == (2, 4)
    np.testing.assert_allclose(apply_channel(joint, ZERO), np.kron(PLUS, T_STATE), atol=1e-12)


def test_local_channels_and_embedding():
    rho = np.zeros((4, 4), dtype=complex)
    rho[0, 0] = 1
    flipped = apply_local_channel(choi_from_unitary(X), rho, [1], 2)
    assert flipped[1, 1] == pytest.approx(1.0)

    np.testing.assert_allclose(embed_unitary(X, [1], 2), np.kron(np.eye(2), X), atol=1e-12)
    swap = cnot(0, 1, 2) @ cnot(1, 0, 2) @ cnot(0, 1, 2)
    np.testing.assert_allclose(embed_unitary(cnot(0, 1, 2), [1, 0], 2), cnot(1, 0, 2), atol=1e-12)
    np.testing.assert_allclose(swap @ cnot(0, 1, 2) @ swap, cnot(1, 0, 2), atol=1e-12)
    with pytest.raises(DimensionMismatch):
        embed_unitary(X, [2], 2)


def test_cspo_membership():
    assert is_cspo(choi_from_unitary(H)).is_inside
    assert is_cspo(mix_channels([1.0], [measure_prepare_channel("Z", ("0", "1"))])).is_inside
    depolarizing = ChoiOperator(np.eye(4) / 2, 2, 2)
    assert depolarizing.is_cptp()
    assert is_cspo(depolarizing).is_inside

    outside = is_cspo(choi_from_unitary(T))
    assert not outside.is_inside
    assert outside.witness.violation < 0


def test_cspo_membership_size_limits():
    with pytest.raises(UnsupportedDimension):
        is_cspo(choi_from_unitary(np.eye(4)))


def test_qubit_cspo_generators():
    vertices = cspo_vertices_qubit()
    assert len(vertices) == 120
    names = [name for name, _ in vertices]
    assert sum(name.startswith("U:") for name in names) == 24
    assert all(ch.is_cptp() for _, ch in vertices)
    assert prepared_channel_library().verify() == []


def test_sampled_cspos_are_free():
    rng = np.random.default_rng(11)
    for _ in range(5):
        channel = sample_cspo_qubit(rng)
        assert channel.is_cptp()
        assert is_cspo(channel).is_inside


def test_identity_superchannel_is_valid_and_acts_trivially():
    theta = identity_superchannel(2, 2)
    assert validate_superchannel(theta) == []
    t_gate = choi_from_unitary(T)
    np.testing.assert_allclose(apply_superchannel(theta, t_gate).J, t_gate.J, atol=1e-12)


def test_pre_post_construction_matches_post_composition():
    theta = post_composition_superchannel(choi_from_unitary(H), 2)
    assert validate_superchannel(theta) == []
    image = apply_superchannel(theta, choi_from_unitary(X))
    np.testing.assert_allclose(image.J, choi_from_unitary(H @ X).J, atol=1e-10)

    pre = choi_from_unitary(np.eye(2))
    direct = superchannel_from_pre_post(pre, choi_from_unitary(H), (2, 2, 2, 2))
    np.testing.assert_allclose(direct.J, theta.J, atol=1e-12)
    with pytest.raises(DimensionMismatch):
        superchannel_from_pre_post(pre, choi_from_unitary(H), (2, 2, 4, 2))


def test_complete_cspo_preservation_for_state_inputs():
    assert is_completely_cspo_preserving(identity_superchannel(1, 2)).is_inside
    magic_constant = constant_superchannel(preparation_channel(T_STATE), 1, 2)
    assert validate_superchannel(magic_constant) == []
    assert not is_completely_cspo_preserving(magic_constant).is_inside


def test_complete_preservation_rejects_invalid_and_oversized_inputs():
    with pytest.raises(InvalidSuperchannel):
        is_completely_cspo_preserving(SuperchannelChoi(np.zeros((4, 4)), (1, 2, 1, 2)))
    with pytest.raises(UnsupportedDimension):
        is_completely_cspo_preserving(identity_superchannel(2, 2))


def test_cspo_preservation_checks():
    assert is_cspo_preserving(identity_superchannel(1, 2)).preserving
    result = is_cspo_preserving_qubit(identity_superchannel(2, 2))
    assert result.preserving and result.checked == 120

    magic = is_cspo_preserving_qubit(post_composition_superchannel(choi_from_unitary(T), 2))
    assert not magic.preserving
    assert magic.counterexample_name is not None
    assert magic.to_dict()["preserving"] is False

    with pytest.raises(UnsupportedDimension):
        is_cspo_preserving_qubit(identity_superchannel(1, 2))


def test_random_completely_preserving_superchannels_pass():
    rng = np.random.default_rng(17)
    cliffords = [choi_from_unitary(u) for u in clifford_unitaries_single_qubit()]
    stab_preps = [preparation_channel(p) for p in stabilizer_set(1).projectors]
    generators = [post_composition_superchannel(c, 1) for c in cliffords]
    generators += [constant_superchannel(p, 1, 2) for p in stab_preps]
    for _ in range(20):
        idx = rng.choice(len(generators), size=3, replace=False)
        weights = rng.dirichlet(np.ones(3))
        J = sum(w * generators[i].J for w, i in zip(weights, idx))
        theta = SuperchannelChoi(J, (1, 2, 1, 2))
        assert validate_superchannel(theta) == []
        assert is_completely_cspo_preserving(theta).is_inside


def test_t_post_composition_fails_with_a_witness():
    theta = post_composition_superchannel(choi_from_unitary(T), 1)
    result = is_completely_cspo_preserving(theta)
    assert not result.is_inside
    W = result.witness.W
    assert stabilizer_set(2).overlaps(W).min() >= -1e-9
    assert np.real(np.trace(W @ theta.normalized)) < 0
