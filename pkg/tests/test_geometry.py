"""Flow polytope, effective polytope, polynomial constraints, face lattice."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from pomdp_geometry import fixtures
from pomdp_geometry.freq import eta_for_tau, state_action_frequency, state_conditionals
from pomdp_geometry.geometry import (
    CertificationError,
    FeasibilityReport,
    HalfspaceSystem,
    RankError,
    SizeCapError,
    constraint_polynomials,
    effective_polytope,
    face_lattice,
    feasibility_report,
    kirchhoff_image,
    kirchhoff_residual,
    mdp_polytope,
    model_constraint_polynomials,
    pseudoinverse,
    transfer_inequality,
)
from pomdp_geometry.model import Policy

# --------------------------------------------------------------------------
# flow polytope


def test_mdp_polytope_rows_sum_to_constant():
    for m in (fixtures.two_state_model(), fixtures.three_state_model()):
        system = mdp_polytope(m)
        assert_allclose(
            system.rows.sum(axis=0),
            (1 - m.gamma) * np.ones((m.n_states, m.n_actions)),
            atol=1e-14,
        )
        assert_allclose(system.rhs.sum(), 1 - m.gamma, atol=1e-14)


def test_frequencies_satisfy_flow_equalities():
    m = fixtures.three_state_model()
    system = mdp_polytope(m)
    rng = np.random.default_rng(3)
    for _ in range(10):
        pi = Policy("observation", rng.dirichlet(np.ones(2), size=3))
        freq = state_action_frequency(m, pi)
        assert system.max_violation(freq.eta) <= 1e-10
    # a generic point of the simplex is not a frequency of this model
    bad = np.full((3, 2), 1 / 6)
    assert system.max_violation(bad) > 1e-3


def test_halfspace_system_validation():
    with pytest.raises(ValueError, match="matching rhs"):
        HalfspaceSystem(
            rows=np.zeros((2, 2, 2)), rhs=np.zeros(3), nonnegative=True,
            labels=("a", "b"),
        )
    with pytest.raises(ValueError, match="label"):
        HalfspaceSystem(
            rows=np.zeros((2, 2, 2)), rhs=np.zeros(2), nonnegative=True,
            labels=("a",),
        )


def test_max_violation_counts_negative_entries():
    system = HalfspaceSystem(
        rows=np.zeros((1, 2, 2)), rhs=np.zeros(1), nonnegative=True, labels=("z",)
    )
    eta = np.array([[0.5, -0.02], [0.3, 0.22]])
    assert system.max_violation(eta) == pytest.approx(0.02)


# --------------------------------------------------------------------------
# edge measure and flow conservation


def test_kirchhoff_image_hand_value():
    m = fixtures.two_state_model()
    pi = Policy("observation", np.array([[1.0, 0.0], [1.0, 0.0]]))
    freq = state_action_frequency(m, pi)
    nu = kirchhoff_image(m, freq.eta)
    assert_allclose(nu, [[0.75, 0.0], [0.25, 0.0]], atol=1e-12)
    assert kirchhoff_residual(m, freq.eta) <= 1e-12


def test_kirchhoff_orientation_is_out_equals_discounted_in():
    # swapping rows and columns in the balance equation does NOT hold;
    # this pins the orientation of the conservation law
    m = fixtures.two_state_model()
    pi = Policy("observation", np.array([[1.0, 0.0], [1.0, 0.0]]))
    freq = state_action_frequency(m, pi)
    nu = kirchhoff_image(m, freq.eta)
    flipped = nu.sum(axis=0) - m.gamma * nu.sum(axis=1) - (1 - m.gamma) * m.mu
    assert np.max(np.abs(flipped)) > 0.3


def test_kirchhoff_residual_random_policies():
    m = fixtures.three_state_model()
    rng = np.random.default_rng(11)
    for _ in range(10):
        pi = Policy("observation", rng.dirichlet(np.ones(2), size=3))
        freq = state_action_frequency(m, pi)
        assert kirchhoff_residual(m, freq.eta) <= 1e-12


# --------------------------------------------------------------------------
# pseudo-inverse and effective polytope


def test_pseudoinverse_two_state():
    m = fixtures.two_state_model()
    assert_allclose(pseudoinverse(m.beta), [[1, 0], [-1, 2]], atol=1e-12)


def test_pseudoinverse_blind_is_averaging():
    m = fixtures.blind_three_state_model()
    assert_allclose(pseudoinverse(m.beta), [[1 / 3, 1 / 3, 1 / 3]], atol=1e-12)


def test_pseudoinverse_rejects_dependent_columns():
    with pytest.raises(RankError, match="dependent"):
        pseudoinverse(np.array([[0.5, 0.5], [0.5, 0.5]]))


def test_effective_polytope_membership():
    m = fixtures.two_state_model()
    ep = effective_polytope(m.beta)
    pi = Policy("observation", np.array([[0.3, 0.7], [0.6, 0.4]]))
    tau = state_conditionals(m, pi)
    resid = ep.membership(tau)
    assert max(resid.values()) <= 1e-12
    assert ep.contains(tau)
    assert_allclose(ep.policy_of(tau), pi.matrix, atol=1e-12)
    # a state policy outside the image: recovered policy goes negative
    off = np.array([[1.0, 0.0], [0.0, 1.0]])
    resid = ep.membership(off)
    assert resid["C"] > 0.5
    assert not ep.contains(off)


def test_effective_polytope_rectangular_kernel():
    beta = np.array([[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]])
    ep = effective_polytope(beta)
    assert ep.kernel_basis.shape == (3, 1)
    # image columns are annihilated by the kernel basis
    assert_allclose(ep.kernel_basis.T @ beta, 0.0, atol=1e-12)
    pi = np.array([[0.2, 0.8], [0.9, 0.1]])
    tau = beta @ pi
    resid = ep.membership(tau)
    assert max(resid.values()) <= 1e-12
    # push tau out of the column space
    tau_bad = tau.copy()
    tau_bad[2, 0] += 0.1
    tau_bad[2, 1] -= 0.1
    assert ep.membership(tau_bad)["U"] > 0.01


# --------------------------------------------------------------------------
# polynomial constraints


def test_constraint_polynomials_two_state_terms():
    m = fixtures.two_state_model()
    polys = model_constraint_polynomials(m)
    assert len(polys) == 4
    by_pair = {(p.action, p.observation): p for p in polys}
    # observation o1 is identified with state s1: linear constraints
    p = by_pair[("a1", "o1")]
    assert p.support_states == (0,)
    assert p.degree == 1
    assert p.terms == {(0,): pytest.approx(1.0)}
    # observation o2 mixes both states through the pseudo-inverse row (-1, 2)
    p = by_pair[("a1", "o2")]
    assert p.support_states == (0, 1)
    assert p.degree == 2
    assert p.coefficient((0, 0)) == pytest.approx(1.0)   # -1 + 2
    assert p.coefficient((0, 1)) == pytest.approx(-1.0)  # -1 + 0
    assert p.coefficient((1, 0)) == pytest.approx(2.0)   # 0 + 2
    assert p.coefficient((1, 1)) == 0.0                  # exact zero, dropped
    assert len(p.terms) == 3


def test_constraint_polynomial_exponent_matrices():
    m = fixtures.two_state_model()
    p = {(q.action, q.observation): q for q in model_constraint_polynomials(m)}[
        ("a1", "o2")
    ]
    assert p.exponent_matrix((0, 1)).tolist() == [[1, 0], [0, 1]]
    d = p.to_dict()
    assert d["degree"] == 2
    assert len(d["terms"]) == 3
    assert str(p).startswith("pi[a1|o2] >= 0:")


def test_on_image_identity():
    # at the frequency of a policy, each polynomial equals the policy entry
    # times the product of support-state marginals
    for m in (fixtures.two_state_model(), fixtures.three_state_model()):
        polys = model_constraint_polynomials(m)
        rng = np.random.default_rng(7)
        for _ in range(5):
            pi = Policy(
                "observation", rng.dirichlet(np.ones(m.n_actions), size=m.n_observations)
            )
            freq = state_action_frequency(m, pi)
            for p in polys:
                a = m.action_index(p.action)
                o = m.observation_index(p.observation)
                expected = pi.matrix[o, a] * np.prod(
                    [freq.rho[s] for s in p.support_states]
                )
                assert float(p.evaluate(freq.eta)) == pytest.approx(
                    expected, abs=1e-12
                )


def test_evaluate_matches_monomial_expansion():
    m = fixtures.three_state_model()
    polys = model_constraint_polynomials(m)
    rng = np.random.default_rng(19)
    for _ in range(5):
        eta = rng.normal(size=(3, 2))  # arbitrary, not a frequency
        for p in polys:
            assert float(p.evaluate(eta)) == pytest.approx(
                p.evaluate_monomials(eta), abs=1e-10
            )


def test_evaluate_broadcasts():
    m = fixtures.two_state_model()
    p = model_constraint_polynomials(m)[2]
    rng = np.random.default_rng(23)
    stack = rng.dirichlet(np.ones(4), size=6).reshape(6, 2, 2)
    values = p.evaluate(stack)
    assert values.shape == (6,)
    for i in range(6):
        assert values[i] == pytest.approx(float(p.evaluate(stack[i])), abs=1e-14)


def test_transfer_inequality_general_linear_form():
    # clearing denominators of <b, tau> >= c multiplies the slack by the
    # product of support-state marginals
    rng = np.random.default_rng(29)
    b = rng.normal(size=(3, 2))
    b[1] = 0.0  # s2 outside the support
    c = 0.37
    poly = transfer_inequality(b, c)
    assert poly.support_states == (0, 2)
    assert poly.offset == pytest.approx(c)
    for _ in range(5):
        tau = rng.dirichlet(np.ones(2), size=3)
        rho = rng.dirichlet(np.ones(3))
        eta = rho[:, None] * tau
        slack = float(np.sum(b * tau)) - c
        assert float(poly.evaluate(eta)) == pytest.approx(
            slack * rho[0] * rho[2], abs=1e-12
        )


def test_transfer_inequality_merged_coefficients():
    b = np.array([[1.0, 2.0], [10.0, 20.0]])
    poly = transfer_inequality(b, 3.0)
    assert poly.coefficient((0, 0)) == pytest.approx(1 + 10 - 3)
    assert poly.coefficient((1, 1)) == pytest.approx(2 + 20 - 3)
    assert poly.coefficient((0, 1)) == pytest.approx(1 + 20 - 3)


def test_constraint_polynomials_accepts_counts_and_labels():
    m = fixtures.two_state_model()
    a = constraint_polynomials(m.beta, 2)
    b = constraint_polynomials(m.beta, ["a1", "a2"], obs_names=["o1", "o2"])
    assert [p.terms for p in a] == [p.terms for p in b]
    assert a[0].action == "a1" and b[3].observation == "o2"


def test_near_threshold_entries_warn():
    eps = 5e-11
    beta = np.array([[1.0, 0.0], [eps, 1.0 - eps]])
    with pytest.warns(RuntimeWarning, match="support cutoff"):
        constraint_polynomials(beta, 2)


# --------------------------------------------------------------------------
# feasibility verdicts


def test_feasibility_report_on_image():
    m = fixtures.two_state_model()
    pi = Policy("observation", np.array([[0.4, 0.6], [0.2, 0.8]]))
    freq = state_action_frequency(m, pi)
    rep = feasibility_report(m, freq.eta)
    assert isinstance(rep, FeasibilityReport)
    assert rep.feasible
    assert rep.equality_residual <= 1e-10
    assert rep.min_polynomial > 0


def test_feasibility_report_flags_linear_violation():
    m = fixtures.three_state_model()
    rep = feasibility_report(m, np.full((3, 2), 1 / 6))
    assert not rep.feasible
    assert rep.equality_residual > 1e-3


def test_feasibility_report_flags_polynomial_violation():
    # the frequency of an unobservable state policy satisfies the linear
    # layer but fails the polynomial layer
    m = fixtures.two_state_model()
    tau = np.array([[1.0, 0.0], [0.0, 1.0]])
    eta = eta_for_tau(m, tau)
    rep = feasibility_report(m, eta)
    assert rep.equality_residual <= 1e-10
    assert rep.min_polynomial < -0.2
    assert not rep.feasible


# --------------------------------------------------------------------------
# face lattice


def test_face_lattice_square():
    m = fixtures.two_state_model()
    lattice = face_lattice(m, samples=2, seed=0)
    assert lattice.f_vector == (4, 4, 1)
    assert lattice.n_faces == 9
    assert lattice.certified
    top = lattice.faces[-1]
    assert top.dimension == 2
    assert len(top.subfaces) == 4
    assert top.active_zeros == frozenset()
    for idx in top.subfaces:
        edge = lattice.faces[idx]
        assert edge.dimension == 1
        assert len(edge.subfaces) == 2
        assert len(edge.active_zeros) == 1
    vertex = lattice.faces[0]
    assert vertex.dimension == 0
    assert vertex.subfaces == ()
    assert len(vertex.active_zeros) == 2


def test_face_lattice_cube():
    rng = np.random.default_rng(5)
    m = fixtures.random_model(rng, 3, 3, 2, 0.8)
    lattice = face_lattice(m, samples=2, seed=2)
    assert lattice.f_vector == (8, 12, 6, 1)
    assert lattice.n_faces == 27


def test_face_lattice_max_dim():
    m = fixtures.two_state_model()
    lattice = face_lattice(m, max_dim=1, samples=1, seed=0)
    assert lattice.f_vector == (4, 4)
    assert lattice.n_faces == 8


def test_face_lattice_size_cap():
    rng = np.random.default_rng(1)
    m = fixtures.random_model(rng, 2, 9, 2, 0.5)
    with pytest.raises(SizeCapError, match="cap"):
        face_lattice(m)


def test_face_lattice_requires_positivity():
    m = fixtures.two_state_model(mu=np.array([1.0, 0.0]))
    with pytest.raises(ValueError, match="visit every state"):
        face_lattice(m)


def test_certification_error_names_the_face():
    # certify against a model whose beta is swapped relative to the
    # constraints by monkeypatching the sampled policies is intrusive;
    # instead drive the certifier with an absurd tolerance so a genuine
    # interior point "fails" the strict-positivity requirement
    m = fixtures.two_state_model()
    with pytest.raises(CertificationError, match="free constraint"):
        face_lattice(m, samples=1, seed=0, tol=10.0)
