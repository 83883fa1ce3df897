"""Domain types, validation and both file formats."""

import json

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from pomdp_geometry import fixtures
from pomdp_geometry.model import (
    Frequency,
    ModelFormatError,
    PomdpModel,
    Policy,
    compile_graph_source,
    effective_policy,
    load_model_text,
    parse_graph_model,
    parse_model,
    serialize_model,
    transition_kernels,
    validate,
)


def test_two_state_fixture_shapes():
    m = fixtures.two_state_model()
    assert m.states == ("s1", "s2")
    assert m.alpha.shape == (2, 2, 2)
    assert validate(m).ok


def test_round_trip_is_bit_exact():
    m = fixtures.three_state_model()
    again = parse_model(serialize_model(m))
    assert again.states == m.states
    assert again.gamma == m.gamma
    for name in ("alpha", "beta", "reward", "mu"):
        assert_array_equal(getattr(again, name), getattr(m, name))


def test_parse_rejects_bad_shapes_with_path():
    doc = fixtures.two_state_model().to_dict()
    doc["alpha"][1][0] = [0.5, 0.25, 0.25]
    with pytest.raises(ModelFormatError, match=r"alpha\[1\]\[0\]"):
        parse_model(json.dumps(doc))


def test_parse_rejects_missing_key():
    doc = fixtures.two_state_model().to_dict()
    del doc["beta"]
    with pytest.raises(ModelFormatError, match="beta"):
        parse_model(json.dumps(doc))


def test_parse_rejects_non_numeric_entry():
    doc = fixtures.two_state_model().to_dict()
    doc["mu"][1] = "almost half"
    with pytest.raises(ModelFormatError, match=r"mu\[1\]"):
        parse_model(json.dumps(doc))


def test_parse_accepts_but_validate_flags_bad_rows():
    doc = fixtures.two_state_model().to_dict()
    doc["alpha"][0][0] = [0.45, 0.45]  # sums to 0.9
    m = parse_model(json.dumps(doc))  # parse succeeds: structure is fine
    report = validate(m)
    assert not report.ok
    assert any(v.path == "alpha[0][0]" for v in report.violations)
    assert report.worst().magnitude == pytest.approx(0.1)


def test_validate_flags_gamma_and_negative_mu():
    m = fixtures.two_state_model()
    bad = m.replace(gamma=1.5)
    assert any(v.path == "gamma" for v in validate(bad).violations)
    bad = m.replace(mu=np.array([1.5, -0.5]))
    paths = {v.path for v in validate(bad).violations}
    assert "mu" in paths or "mu[1]" in paths


def test_validate_never_throws_on_nan():
    m = fixtures.two_state_model()
    bad = m.replace(reward=np.array([[np.nan, 0.0], [0.0, 1.0]]))
    report = validate(bad)
    assert not report.ok
    assert any(v.path == "reward[0][0]" for v in report.violations)


def test_policy_constructors_and_row_checks():
    u = Policy.uniform(2, 3)
    assert_allclose(u.matrix.sum(axis=1), 1.0)
    d = Policy.deterministic([2, 0], 3)
    assert_array_equal(d.matrix, [[0, 0, 1], [1, 0, 0]])
    with pytest.raises(ValueError, match="sum to 1"):
        Policy("observation", np.array([[0.5, 0.4]]))
    with pytest.raises(ValueError, match="negative"):
        Policy("observation", np.array([[1.5, -0.5]]))
    with pytest.raises(ValueError, match="kind"):
        Policy("belief", np.array([[1.0]]))


def test_frequency_invariants():
    f = Frequency.from_eta(np.array([[0.75, 0.0], [0.25, 0.0]]))
    assert_allclose(f.rho, [0.75, 0.25])
    with pytest.raises(ValueError, match="sum to 1"):
        Frequency.from_eta(np.array([[0.5, 0.0], [0.25, 0.0]]))
    with pytest.raises(ValueError, match="negative"):
        Frequency.from_eta(np.array([[1.1, -0.1], [0.0, 0.0]]))


def test_effective_policy_on_two_state_model():
    m = fixtures.two_state_model()
    # observe o1 -> play a1, observe o2 -> play a2
    pi = Policy.deterministic([0, 1], 2)
    tau = effective_policy(pi, m.beta)
    assert tau.kind == "state"
    # s1 always sees o1; s2 sees o1/o2 with probability 1/2 each
    assert_allclose(tau.matrix, [[1.0, 0.0], [0.5, 0.5]])
    with pytest.raises(ValueError, match="observation policy"):
        effective_policy(tau, m.beta)


def test_transition_kernels_are_row_stochastic():
    m = fixtures.three_state_model()
    pi = Policy.uniform(m.n_observations, m.n_actions)
    big, small = transition_kernels(m, pi)
    assert big.shape == (6, 6)
    assert small.shape == (3, 3)
    assert np.max(np.abs(big.sum(axis=1) - 1.0)) < 1e-12
    assert np.max(np.abs(small.sum(axis=1) - 1.0)) < 1e-12


def test_transition_kernel_entries_two_state():
    m = fixtures.two_state_model()
    pi = Policy.deterministic([0, 0], 2)  # always a1
    big, small = transition_kernels(m, pi)
    # tau: s1 plays a1 surely; s2 plays a1 with prob 1 as well (both rows of
    # pi are a1); alpha moves every state to s1 under a1.
    assert_allclose(small, [[1.0, 0.0], [1.0, 0.0]])
    # state-action row (s2, a1): lands in s1, then plays tau(.|s1) = (1, 0)
    assert_allclose(big[2], [1.0, 0.0, 0.0, 0.0])


def test_graph_format_compiles_to_canonical():
    text = fixtures.GRAPH_BLIND_THREE_STATE
    compiled = compile_graph_source(text)
    m = parse_model(compiled)
    expected = fixtures.blind_three_state_model()
    assert m.states == expected.states
    assert_array_equal(m.alpha, expected.alpha)
    assert_array_equal(m.reward, expected.reward)
    assert_array_equal(m.beta, expected.beta)
    assert m.gamma == expected.gamma
    assert_allclose(m.mu, expected.mu)
    # same document through the sniffing loader
    again = load_model_text(text)
    assert_array_equal(again.alpha, m.alpha)


def test_graph_format_identity_beta_and_mu_label():
    text = """
    gamma: 0.5
    beta: identity
    mu: s2
    s1 a1 -> s2 1
    s1 a2 -> s1 0
    s2 a1 -> s1 -1
    s2 a2 -> s2 0
    """
    m = parse_graph_model(text)
    assert m.observations == ("s1", "s2")
    assert_array_equal(m.beta, np.eye(2))
    assert_allclose(m.mu, [0.0, 1.0])
    assert m.reward[0, 0] == 1.0 and m.reward[1, 0] == -1.0


def test_graph_format_explicit_beta_rows():
    text = """
    gamma: 0.5
    states: s1 s2
    actions: a1 a2
    beta: 1 0; 0.5 0.5
    s1 a1 -> s1 1
    s1 a2 -> s2
    s2 a1 -> s1
    s2 a2 -> s2 1
    """
    m = parse_graph_model(text)
    assert m.observations == ("o1", "o2")
    assert_allclose(m.beta, [[1.0, 0.0], [0.5, 0.5]])


def test_graph_format_errors():
    with pytest.raises(ModelFormatError, match="gamma"):
        parse_graph_model("s1 a1 -> s1 1\ns1 a2 -> s1 0\n")
    with pytest.raises(ModelFormatError, match="missing edge"):
        parse_graph_model("gamma: 0.5\ns1 a1 -> s1 1\ns1 a2 -> s1\ns2 a1 -> s1\n")  # no (s2, a2)
    with pytest.raises(ModelFormatError, match="duplicate edge"):
        parse_graph_model("gamma: 0.5\ns1 a1 -> s1 1\ns1 a1 -> s1 2\n")
    with pytest.raises(ModelFormatError, match="line 2"):
        parse_graph_model("gamma: 0.5\nwhat is this\n")


def test_model_replace_and_indexing():
    m = fixtures.two_state_model()
    assert m.state_index("s2") == 1
    assert m.observation_index("o1") == 0
    assert m.action_index("a2") == 1
    with pytest.raises(KeyError, match="unknown state"):
        m.state_index("nope")
    changed = m.replace(gamma=0.25)
    assert changed.gamma == 0.25 and m.gamma == 0.5


def test_shape_mismatch_raises_at_construction():
    with pytest.raises(ValueError, match="beta"):
        PomdpModel(("s1",), ("o1", "o2"), ("a1",),
                   np.ones((1, 1, 1)), np.ones((1, 1)), np.zeros((1, 1)), 0.5, np.ones(1))
