"""Polyhedral and polynomial descriptions of feasible state-action frequencies.

For a fully observable controller the feasible frequencies form a polytope
cut out by one linear equality per state (plus nonnegativity).  Partial
observability restricts the admissible conditionals to an affine slice of
the simplex product, and eliminating the visitation denominators turns the
slice conditions into polynomial inequalities in the frequency entries.
This module builds both descriptions, checks membership, and enumerates the
combinatorial face lattice of the constraint system together with a
numerical certificate that the polynomial description carves out each face.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field

import numpy as np

from .freq import state_action_frequency
from .model import Policy, PomdpModel

# support cutoff for pseudo-inverse entries when building polynomial
# constraints; entries within NEAR_ZERO_FACTOR of the cutoff trigger a
# conditioning warning because the support set is then numerically fragile
SUPPORT_TOL = 1e-12
NEAR_ZERO_FACTOR = 100.0

# rank decision for the observation kernel, relative to the largest
# singular value
RANK_TOL = 1e-10

# default certification tolerance: active polynomials must vanish to this
# accuracy, inactive ones must clear it
CERT_TOL = 1e-8

# refuse to enumerate face lattices beyond this many policy coordinates
FACE_COORD_CAP = 16


class RankError(ValueError):
    """Observation kernel does not have linearly independent columns."""


class SizeCapError(ValueError):
    """Requested enumeration exceeds the hard-coded size cap."""


class CertificationError(ArithmeticError):
    """A sampled interior point contradicts the claimed face structure."""


# ---------------------------------------------------------------------------
# linear description (fully observable case)


@dataclass(frozen=True)
class HalfspaceSystem:
    """Equality system ``<rows[i], eta> = rhs[i]`` plus optional ``eta >= 0``.

    ``rows`` is stacked as ``(m, n_states, n_actions)`` so each row is a
    weight matrix over state-action pairs.
    """

    rows: np.ndarray
    rhs: np.ndarray
    nonnegative: bool
    labels: tuple[str, ...]

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=float)
        rhs = np.asarray(self.rhs, dtype=float)
        if rows.ndim != 3 or rhs.ndim != 1 or rows.shape[0] != rhs.shape[0]:
            raise ValueError("rows must be (m, S, A) with matching rhs (m,)")
        if len(self.labels) != rows.shape[0]:
            raise ValueError("one label per row required")
        rows.flags.writeable = False
        rhs.flags.writeable = False
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "rhs", rhs)

    @property
    def n_rows(self) -> int:
        return self.rows.shape[0]

    def residuals(self, eta: np.ndarray) -> np.ndarray:
        """Signed residuals ``<row, eta> - rhs``, broadcastable over eta."""
        eta = np.asarray(eta, dtype=float)
        return np.einsum("msa,...sa->...m", self.rows, eta) - self.rhs

    def max_violation(self, eta: np.ndarray) -> float:
        """Worst constraint violation: equality residual or negative entry."""
        eta = np.asarray(eta, dtype=float)
        worst = float(np.max(np.abs(self.residuals(eta))))
        if self.nonnegative:
            worst = max(worst, float(np.max(np.maximum(-eta, 0.0))))
        return worst


def mdp_polytope(model: PomdpModel) -> HalfspaceSystem:
    """Linear equalities satisfied by every discounted state-action frequency.

    Row ``s`` pairs the indicator of state ``s`` against the discounted
    inflow into ``s``; the offsets are the scaled initial distribution.  The
    rows sum to the constant matrix ``(1 - gamma) * ones``, which forces the
    total mass of any solution to one.
    """
    ns, na = model.n_states, model.n_actions
    rows = np.zeros((ns, ns, na))
    for s in range(ns):
        rows[s, s, :] = 1.0
        rows[s] -= model.gamma * model.alpha[:, :, s]
    rhs = (1.0 - model.gamma) * model.mu
    labels = tuple(f"flow[{name}]" for name in model.states)
    return HalfspaceSystem(rows=rows, rhs=rhs, nonnegative=True, labels=labels)


def kirchhoff_image(model: PomdpModel, eta: np.ndarray) -> np.ndarray:
    """Edge measure ``nu[s, t] = sum_a eta[s, a] * alpha(t | s, a)``."""
    eta = np.asarray(eta, dtype=float)
    return np.einsum("sa,sat->st", eta, model.alpha)

def kirchhoff_residual(model: PomdpModel, eta: np.ndarray) -> float:
    """Max-norm violation of discounted flow conservation for the edge measure.

    At every state the outgoing mass equals the discounted incoming mass plus
    the injected initial mass: ``nu @ 1 = gamma * nu.T @ 1 + (1-gamma) mu``.
    """
    nu = kirchhoff_image(model, eta)
    out_mass = nu.sum(axis=1)
    in_mass = nu.sum(axis=0)
    resid = out_mass - model.gamma * in_mass - (1.0 - model.gamma) * model.mu
    return float(np.max(np.abs(resid)))


# ---------------------------------------------------------------------------
# effective polytope of state conditionals


def pseudoinverse(beta: np.ndarray, tol: float = RANK_TOL) -> np.ndarray:
    """Moore-Penrose inverse of the observation kernel, shape ``(O, S)``.

    Raises :class:`RankError` when the kernel columns are linearly
    dependent (rank decided at ``tol`` relative to the top singular value),
    since then observation policies cannot be recovered from their state
    conditionals.
    """
    beta = np.asarray(beta, dtype=float)
    if beta.ndim != 2:
        raise ValueError("beta must be a (states, observations) matrix")
    u, sigma, vt = np.linalg.svd(beta, full_matrices=False)
    if sigma[0] == 0.0 or np.min(sigma) <= tol * sigma[0]:
        raise RankError(
            "observation kernel has linearly dependent columns "
            f"(singular values {np.array2string(sigma, precision=3)}); "
            "state conditionals do not determine the policy"
        )
    return (vt.T / sigma) @ u.T


@dataclass(frozen=True)
class EffectivePolytope:
    """The set of state conditionals realizable by observation policies.

    A matrix ``tau`` is realizable iff its columns lie in the column space
    of ``beta`` (checked against an orthonormal basis of the cokernel), the
    recovered policy ``pinv @ tau`` is entrywise nonnegative, and its rows
    sum to one.  With row-stochastic ``beta`` the row-sum condition is
    implied by the other two, but it is reported separately for diagnosis.
    """

    beta: np.ndarray
    pinv: np.ndarray
    kernel_basis: np.ndarray  # (S, S - O), orthonormal, spans coker(beta)

    def policy_of(self, tau: np.ndarray) -> np.ndarray:
        return self.pinv @ np.asarray(tau, dtype=float)

    def membership(self, tau: np.ndarray) -> dict[str, float]:
        """Residuals of the three membership conditions, keyed U / C / D.

        ``U``: distance of the columns from the admissible subspace;
        ``C``: worst negative entry of the recovered policy;
        ``D``: worst row-sum defect of the recovered policy.
        """
        tau = np.asarray(tau, dtype=float)
        pi = self.pinv @ tau
        if self.kernel_basis.shape[1]:
            u_resid = float(np.max(np.abs(self.kernel_basis.T @ tau)))
        else:
            u_resid = 0.0
        c_resid = float(np.max(np.maximum(-pi, 0.0)))
        d_resid = float(np.max(np.abs(pi.sum(axis=1) - 1.0)))
        return {"U": u_resid, "C": c_resid, "D": d_resid}

    def contains(self, tau: np.ndarray, tol: float = 1e-8) -> bool:
        return max(self.membership(tau).values()) <= tol


def effective_polytope(beta: np.ndarray, tol: float = RANK_TOL) -> EffectivePolytope:
    beta = np.asarray(beta, dtype=float)
    pinv = pseudoinverse(beta, tol=tol)
    _, sigma, vt = np.linalg.svd(beta.T, full_matrices=True)
    rank = beta.shape[1]  # full column rank guaranteed by pseudoinverse()
    kernel = vt[rank:].T.copy()
    beta = beta.copy()
    for arr in (beta, pinv, kernel):
        arr.flags.writeable = False
    return EffectivePolytope(beta=beta, pinv=pinv, kernel_basis=kernel)


# ---------------------------------------------------------------------------
# polynomial constraints on frequencies


@dataclass(frozen=True)
class PolynomialConstraint:
    """A cleared-denominator inequality ``p(eta) >= 0`` on frequencies.

    The inequality starts life as a linear condition
    ``sum_{s,a} coeff[s, a] tau[s, a] >= offset`` on state conditionals.
    Multiplying by the product of state marginals ``rho_s`` over the support
    states clears every denominator of ``tau = eta / rho`` and yields a
    multihomogeneous polynomial of degree ``len(support_states)`` in the
    frequency entries.  ``terms`` stores its monomial expansion: the key
    assigns one action per support state, the value is the merged
    coefficient of the corresponding product of frequency entries.
    """

    label: str
    n_states: int
    n_actions: int
    support_states: tuple[int, ...]
    coeff: np.ndarray  # (len(support_states), n_actions)
    offset: float
    terms: dict[tuple[int, ...], float] = field(repr=False)
    observation: str | None = None
    action: str | None = None

    def __post_init__(self):
        coeff = np.asarray(self.coeff, dtype=float)
        if coeff.shape != (len(self.support_states), self.n_actions):
            raise ValueError("coeff must be (len(support_states), n_actions)")
        coeff.flags.writeable = False
        object.__setattr__(self, "coeff", coeff)

    @property
    def degree(self) -> int:
        return len(self.support_states)

    def coefficient(self, assignment) -> float:
        """Monomial coefficient for an action assignment (0.0 if absent)."""
        return self.terms.get(tuple(int(a) for a in assignment), 0.0)

    def evaluate(self, eta: np.ndarray) -> np.ndarray:
        """Evaluate via marginals; broadcastable over leading axes of eta."""
        eta = np.asarray(eta, dtype=float)
        support = list(self.support_states)
        k = len(support)
        rho = eta[..., support, :].sum(axis=-1)  # (..., k)
        total = np.prod(rho, axis=-1)
        value = -self.offset * total
        for i, s in enumerate(support):
            others = [j for j in range(k) if j != i]
            loo = np.prod(rho[..., others], axis=-1)
            linear = np.einsum("a,...a->...", self.coeff[i], eta[..., s, :])
            value = value + linear * loo
        return value

    def evaluate_monomials(self, eta: np.ndarray) -> float:
        """Evaluate from the stored monomial expansion (slow, exact form)."""
        eta = np.asarray(eta, dtype=float)
        total = 0.0
        for assignment, c in self.terms.items():
            mono = 1.0
            for s, a in zip(self.support_states, assignment):
                mono *= eta[s, a]
            total += c * mono
        return total

    def exponent_matrix(self, assignment) -> np.ndarray:
        """Dense (n_states, n_actions) exponent matrix of one monomial."""
        exps = np.zeros((self.n_states, self.n_actions), dtype=int)
        for s, a in zip(self.support_states, assignment):
            exps[s, a] += 1
        return exps

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "observation": self.observation,
            "action": self.action,
            "support_states": list(self.support_states),
            "degree": self.degree,
            "terms": [
                {
                    "exponents": self.exponent_matrix(assignment).tolist(),
                    "coefficient": c,
                }
                for assignment, c in sorted(self.terms.items())
            ],
        }

    def __str__(self) -> str:
        parts = []
        for i, s in enumerate(self.support_states):
            others = [t for t in self.support_states if t != s]
            rho_factors = "".join(f"*rho[{t}]" for t in others)
            for a in range(self.n_actions):
                w = self.coeff[i, a]
                if w != 0.0:
                    parts.append(f"{w:+.6g}*eta[{s},{a}]{rho_factors}")
        if self.offset != 0.0:
            all_rho = "*".join(f"rho[{t}]" for t in self.support_states)
            parts.append(f"{-self.offset:+.6g}*{all_rho}")
        body = " ".join(parts) if parts else "0"
        return f"{self.label}: {body} >= 0"


def transfer_inequality(
    b: np.ndarray,
    c: float,
    *,
    support_tol: float = SUPPORT_TOL,
    label: str | None = None,
    observation: str | None = None,
    action: str | None = None,
) -> PolynomialConstraint:
    """Clear denominators in ``sum_{s,a} b[s,a] tau[s,a] >= c``.

    The support is the set of states where ``b`` has any entry above
    ``support_tol`` in magnitude.  The monomial expansion assigns one action
    ``f(s)`` to each support state; its merged coefficient is
    ``sum_s b[s, f(s)] - c``.  Coefficients below ``1e-14`` relative to the
    data scale are dropped.
    """
    b = np.asarray(b, dtype=float)
    if b.ndim != 2:
        raise ValueError("b must be a (states, actions) matrix")
    ns, na = b.shape
    support = tuple(int(s) for s in range(ns) if np.max(np.abs(b[s])) > support_tol)
    scale = max(1.0, float(np.max(np.abs(b))), abs(c))
    drop = 1e-14 * scale
    terms: dict[tuple[int, ...], float] = {}
    for assignment in itertools.product(range(na), repeat=len(support)):
        value = sum(b[s, a] for s, a in zip(support, assignment)) - c
        if abs(value) > drop:
            terms[assignment] = float(value)
    if label is None:
        label = f"transfer(c={c:g})"
    return PolynomialConstraint(
        label=label,
        n_states=ns,
        n_actions=na,
        support_states=support,
        coeff=b[list(support), :] if support else np.zeros((0, na)),
        offset=float(c),
        terms=terms,
        observation=observation,
        action=action,
    )


def constraint_polynomials(
    beta: np.ndarray,
    actions,
    state_names=None,
    obs_names=None,
    support_tol: float = SUPPORT_TOL,
) -> list[PolynomialConstraint]:
    """Polynomial inequalities equivalent to recoverability of the policy.

    One polynomial per (action, observation) pair: nonnegativity of the
    entry ``(pinv @ tau)[o, a]`` of the recovered policy, with denominators
    cleared over the support states of the corresponding pseudo-inverse
    row.  On the image of a policy ``pi`` the polynomial evaluates to
    ``pi[o, a]`` times the product of support-state marginals, so interior
    policies make every polynomial strictly positive.

    ``actions`` is the action count or a sequence of action labels; ``beta``
    alone does not determine how many frequency columns the polynomials act
    on.
    """
    beta = np.asarray(beta, dtype=float)
    ns, no = beta.shape
    if isinstance(actions, (int, np.integer)):
        action_labels = [f"a{i + 1}" for i in range(int(actions))]
    else:
        action_labels = [str(a) for a in actions]
    na = len(action_labels)
    if state_names is None:
        state_names = [f"s{i + 1}" for i in range(ns)]
    if obs_names is None:
        obs_names = [f"o{i + 1}" for i in range(no)]
    pinv = pseudoinverse(beta)

    fragile = (np.abs(pinv) > support_tol) & (
        np.abs(pinv) <= NEAR_ZERO_FACTOR * support_tol
    )
    if np.any(fragile):
        warnings.warn(
            f"{int(np.count_nonzero(fragile))} pseudo-inverse entries sit "
            f"within {NEAR_ZERO_FACTOR:g}x of the support cutoff "
            f"{support_tol:g}; the constraint supports are numerically "
            "fragile",
            RuntimeWarning,
            stacklevel=2,
        )

    polys = []
    for o in range(no):
        for a in range(na):
            b = np.zeros((ns, na))
            b[:, a] = pinv[o]
            polys.append(
                transfer_inequality(
                    b,
                    0.0,
                    support_tol=support_tol,
                    label=f"pi[{action_labels[a]}|{obs_names[o]}] >= 0",
                    observation=obs_names[o],
                    action=action_labels[a],
                )
            )
    return polys


def model_constraint_polynomials(model: PomdpModel, support_tol: float = SUPPORT_TOL):
    return constraint_polynomials(
        model.beta,
        model.actions,
        state_names=model.states,
        obs_names=model.observations,
        support_tol=support_tol,
    )


# ---------------------------------------------------------------------------
# feasibility verdicts


@dataclass(frozen=True)
class FeasibilityReport:
    """Joint verdict of the linear and polynomial feasibility conditions."""

    equality_residual: float
    min_entry: float
    min_polynomial: float
    feasible: bool
    equality_tol: float
    entry_tol: float
    polynomial_tol: float

    def to_dict(self) -> dict:
        return {
            "equality_residual": self.equality_residual,
            "min_entry": self.min_entry,
            "min_polynomial": self.min_polynomial,
            "feasible": self.feasible,
        }


def feasibility_report(
    model: PomdpModel,
    eta: np.ndarray,
    *,
    equality_tol: float = 1e-8,
    entry_tol: float = 1e-10,
    polynomial_tol: float = 1e-8,
    polys: list[PolynomialConstraint] | None = None,
) -> FeasibilityReport:
    """Check a candidate frequency against both constraint layers.

    The linear layer is the flow polytope (equalities within
    ``equality_tol``, entries above ``-entry_tol``); the polynomial layer
    requires every cleared-denominator constraint to clear
    ``-polynomial_tol``.
    """
    eta = np.asarray(eta, dtype=float)
    system = mdp_polytope(model)
    eq_resid = float(np.max(np.abs(system.residuals(eta))))
    min_entry = float(np.min(eta))
    if polys is None:
        polys = model_constraint_polynomials(model)
    min_poly = min(float(p.evaluate(eta)) for p in polys) if polys else 0.0
    ok = (
        eq_resid <= equality_tol
        and min_entry >= -entry_tol
        and min_poly >= -polynomial_tol
    )
    return FeasibilityReport(
        equality_residual=eq_resid,
        min_entry=min_entry,
        min_polynomial=min_poly,
        feasible=ok,
        equality_tol=equality_tol,
        entry_tol=entry_tol,
        polynomial_tol=polynomial_tol,
    )


# ---------------------------------------------------------------------------
# face lattice of the policy constraint system


@dataclass(frozen=True)
class FaceDescriptor:
    """One face of the product-of-simplices policy domain.

    ``free_actions`` lists, per observation, the actions allowed to carry
    probability; ``active_zeros`` is the complementary set of
    (action, observation) label pairs pinned to zero on the face.
    ``subfaces`` indexes the faces covered by this one (one dimension
    lower) inside the owning lattice.
    """

    free_actions: tuple[tuple[int, ...], ...]
    active_zeros: frozenset[tuple[str, str]]
    dimension: int
    subfaces: tuple[int, ...]


@dataclass(frozen=True)
class FaceLattice:
    faces: tuple[FaceDescriptor, ...]
    f_vector: tuple[int, ...]  # face counts by dimension, 0 .. dim
    certified: bool

    @property
    def n_faces(self) -> int:
        return len(self.faces)


def face_lattice(
    model: PomdpModel,
    max_dim: int | None = None,
    samples: int = 3,
    seed: int = 0,
    tol: float = CERT_TOL,
) -> FaceLattice:
    """Enumerate and certify the face lattice of the policy domain.

    Faces of the simplex product are in bijection with choices of a
    nonempty free-action set per observation; the dimension is the sum of
    the per-observation free counts minus one each.  For each face (up to
    ``max_dim`` when given) interior policies are sampled and the
    polynomial constraints are evaluated at the induced frequencies: the
    pinned entries must vanish within ``tol`` and the free entries must
    exceed it, otherwise a :class:`CertificationError` identifies the
    offending face and constraint.

    Requires every policy to visit every state (positive start and
    discounting, or a strictly positive transition kernel) and an
    observation kernel with independent columns.
    """
    ns, no, na = model.n_states, model.n_observations, model.n_actions
    if no * na > FACE_COORD_CAP:
        raise SizeCapError(
            f"face lattice over {no * na} policy coordinates exceeds the "
            f"cap of {FACE_COORD_CAP}"
        )
    positive_start = model.gamma < 1.0 and np.all(model.mu > 0.0)
    positive_kernel = np.all(model.alpha > 0.0)
    if not (positive_start or positive_kernel):
        raise ValueError(
            "certification requires every policy to visit every state: "
            "need gamma < 1 with positive mu, or a positive transition "
            "kernel"
        )
    polys = model_constraint_polynomials(model)
    poly_by_pair = {(p.action, p.observation): p for p in polys}

    subsets = [
        tuple(k for k in range(na) if mask >> k & 1) for mask in range(1, 1 << na)
    ]
    all_faces = []
    for combo in itertools.product(subsets, repeat=no):
        dim = sum(len(k) - 1 for k in combo)
        if max_dim is not None and dim > max_dim:
            continue
        all_faces.append((dim, combo))
    all_faces.sort(key=lambda t: (t[0], t[1]))
    index_of = {combo: i for i, (_, combo) in enumerate(all_faces)}

    rng = np.random.default_rng(seed)
    faces = []
    for dim, combo in all_faces:
        active = frozenset(
            (model.actions[a], model.observations[o])
            for o in range(no)
            for a in range(na)
            if a not in combo[o]
        )
        subfaces = []
        for o in range(no):
            if len(combo[o]) <= 1:
                continue
            for drop in combo[o]:
                child = list(combo)
                child[o] = tuple(k for k in combo[o] if k != drop)
                child_idx = index_of.get(tuple(child))
                if child_idx is not None:
                    subfaces.append(child_idx)
        _certify_face(model, combo, active, poly_by_pair, rng, samples, tol)
        faces.append(
            FaceDescriptor(
                free_actions=combo,
                active_zeros=active,
                dimension=dim,
                subfaces=tuple(sorted(subfaces)),
            )
        )

    top_dim = max(f.dimension for f in faces)
    f_vector = tuple(
        sum(1 for f in faces if f.dimension == d) for d in range(top_dim + 1)
    )
    return FaceLattice(faces=tuple(faces), f_vector=f_vector, certified=True)


def _interior_point(rng, free: tuple[int, ...], na: int) -> np.ndarray:
    """A point of the face's relative interior, bounded away from its edge."""
    row = np.zeros(na)
    raw = rng.dirichlet(np.ones(len(free)))
    row[list(free)] = 0.8 * raw + 0.2 / len(free)
    return row


def _certify_face(model, combo, active, poly_by_pair, rng, samples, tol):
    for _ in range(samples):
        matrix = np.vstack(
            [_interior_point(rng, free, model.n_actions) for free in combo]
        )
        pi = Policy("observation", matrix)
        freq = state_action_frequency(model, pi)
        for (a_label, o_label), poly in poly_by_pair.items():
            value = float(poly.evaluate(freq.eta))
            if (a_label, o_label) in active:
                if abs(value) > tol:
                    raise CertificationError(
                        f"face {combo}: pinned constraint {poly.label} "
                        f"evaluates to {value:.3e}, expected 0 within {tol:g}"
                    )
            elif value <= tol:
                raise CertificationError(
                    f"face {combo}: free constraint {poly.label} evaluates "
                    f"to {value:.3e}, expected to exceed {tol:g}"
                )
