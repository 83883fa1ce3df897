"""Rational structure of the reward along policy lines.

Along a line of policies that vary only on a set of observations O, every
state-action frequency coordinate (and hence the reward) is a rational
function whose degree is at most the number of states compatible with O
under the observation kernel.  This module provides that bound, a guarded
rational curve fitter, the closed-form reparametrization speed for lines
that vary a single state, one-observation vertex improvement, and monotone
improvement paths for fully observable models.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from numpy.polynomial import polynomial as pol

from .freq import conditioning_inverse, eta_for_tau, reward_of, state_action_frequency
from .model import Frequency, PomdpModel, Policy, state_conditionals

FIT_RESIDUAL_TOL = 1e-7   # a fitted degree is accepted when it explains f this well
COMMON_ROOT_TOL = 1e-6    # num/den roots closer than this in [0,1] flag a reducible fit


class DegreeFitError(ArithmeticError):
    """No rational function of the allowed degree explains the sampled curve."""


@dataclass(frozen=True)
class RationalCurve:
    """A univariate rational function num/den with ascending coefficients.

    Normalized so den(1/2) = 1; fit_residual is the worst absolute error on
    the held-out validation grid.
    """

    num: np.ndarray
    den: np.ndarray
    fit_residual: float

    def __post_init__(self):
        num = np.atleast_1d(np.asarray(self.num, dtype=float))
        den = np.atleast_1d(np.asarray(self.den, dtype=float))
        if not np.any(den != 0.0):
            raise ValueError("denominator must not be identically zero")
        num.setflags(write=False)
        den.setflags(write=False)
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)

    @property
    def degree(self) -> int:
        return max(len(self.num), len(self.den)) - 1

    def __call__(self, x):
        return pol.polyval(x, self.num) / pol.polyval(x, self.den)

    def derivative_numerator(self) -> np.ndarray:
        """Ascending coefficients of num' den - num den' (zero exactly at critical points)."""
        return pol.polysub(pol.polymul(pol.polyder(self.num), self.den),
                           pol.polymul(self.num, pol.polyder(self.den)))


@dataclass(frozen=True)
class DegreeCertificate:
    """A degree bound together with the degree a fit actually needed."""

    bound: int
    fitted_degree: int
    witness_grid: np.ndarray

    def __post_init__(self):
        if self.fitted_degree > self.bound:
            raise ValueError(
                f"fitted degree {self.fitted_degree} exceeds the bound {self.bound}")


def degree_bound(model: PomdpModel, varying_obs: Iterable) -> int:
    """Degree bound for the frequency curve along lines varying only these observations.

    The bound is the number of states compatible with the varying
    observations: |{s : beta(o|s) > 0 for some o in varying_obs}|.
    """
    indices = [o if isinstance(o, (int, np.integer)) else model.observation_index(o)
               for o in varying_obs]
    if not indices:
        return 0
    support = np.any(model.beta[:, indices] > 0.0, axis=1)
    return int(np.sum(support))


def chebyshev_grid(n: int) -> np.ndarray:
    """n Chebyshev points of the first kind mapped to [0, 1], ascending."""
    k = np.arange(n)
    return np.sort((np.cos((2 * k + 1) * np.pi / (2 * n)) + 1.0) / 2.0)


def fit_rational_curve(f: Callable[[float], float], max_degree: int) -> RationalCurve:
    """Fit the smallest-degree rational function matching f on [0, 1].

    For each candidate degree k the fit uses 4(k+1) Chebyshev points and is
    validated on the interleaved midpoints; the first k whose worst
    validation error is at most 1e-7 wins.  The denominator is pinned by
    den(1/2) = 1, must stay positive on the grid (curves with poles in
    [0, 1] are rejected), and accepted fits share no num/den root in [0, 1]
    within 1e-6.
    """
    if max_degree < 0:
        raise ValueError(f"max_degree must be >= 0, got {max_degree}")
    best_residual = np.inf
    for k in range(max_degree + 1):
        nodes = chebyshev_grid(4 * (k + 1))
        values = np.array([f(x) for x in nodes])
        num, den = _solve_rational_ls(nodes, values, k)
        midpoints = (nodes[:-1] + nodes[1:]) / 2.0
        den_grid = pol.polyval(np.concatenate([nodes, midpoints]), den)
        if np.min(den_grid) <= 1e-9:
            continue  # spurious pole inside [0, 1]
        check = np.array([f(x) for x in midpoints])
        approx = pol.polyval(midpoints, num) / pol.polyval(midpoints, den)
        residual = float(np.max(np.abs(approx - check)))
        best_residual = min(best_residual, residual)
        if residual <= FIT_RESIDUAL_TOL:
            curve = RationalCurve(num, den, residual)
            if _has_common_root(num, den):
                continue  # reducible: a smaller degree must explain f
            return curve
    raise DegreeFitError(
        f"no rational function of degree <= {max_degree} fits within "
        f"{FIT_RESIDUAL_TOL} (best validation residual {best_residual:.3e})")


def _solve_rational_ls(nodes: np.ndarray, values: np.ndarray, k: int):
    """Least squares for num/den of degree k with den(1/2) = 1.

    Eliminates den[0] via the normalization: unknowns are
    [num_0..num_k, den_1..den_k] and each node contributes the linear
    equation sum_j den_j f(x)(x^j - 2^-j) - sum_j num_j x^j = -f(x).
    """
    powers = np.vander(nodes, k + 1, increasing=True)          # x^0..x^k
    design = [-powers]
    if k > 0:
        shifted = powers[:, 1:] - np.power(0.5, np.arange(1, k + 1))[None, :]
        design.append(values[:, None] * shifted)
    design = np.hstack(design)
    sol, *_ = np.linalg.lstsq(design, -values, rcond=None)
    num = sol[:k + 1]
    den_tail = sol[k + 1:]
    den0 = 1.0 - float(np.sum(den_tail * np.power(0.5, np.arange(1, k + 1))))
    den = np.concatenate([[den0], den_tail])
    return num, den


def _has_common_root(num: np.ndarray, den: np.ndarray) -> bool:
    num = np.trim_zeros(num, "b")
    den = np.trim_zeros(den, "b")
    if len(num) <= 1 or len(den) <= 1:
        return False
    nroots = pol.polyroots(num)
    droots = pol.polyroots(den)
    for r in nroots:
        if abs(r.imag) > COMMON_ROOT_TOL or not (-0.05 <= r.real <= 1.05):
            continue
        if np.any(np.abs(droots - r) < COMMON_ROOT_TOL):
            return True
    return False


def reward_curve_on_line(model: PomdpModel, pi0: Policy, pi1: Policy) -> Callable[[float], float]:
    """R as a function of the interpolation parameter along pi0 -> pi1."""
    if pi0.kind != pi1.kind:
        raise ValueError(f"policies must share a kind, got {pi0.kind!r} and {pi1.kind!r}")
    tau0 = state_conditionals(model, pi0)
    tau1 = state_conditionals(model, pi1)

    def f(lam: float) -> float:
        tau = (1.0 - lam) * tau0 + lam * tau1
        return float(np.sum(model.reward * eta_for_tau(model, tau)))

    return f


def line_degree_certificate(model: PomdpModel, pi0: Policy, pi1: Policy) -> DegreeCertificate:
    """Certify the reward degree along the policy line from pi0 to pi1.

    Both must be observation policies; the varying observations are those
    where the two matrices differ.  Fits the reward curve and packages the
    degree bound with the degree the fit needed and the fit grid.
    """
    if pi0.kind != "observation" or pi1.kind != "observation":
        raise ValueError("line_degree_certificate needs observation policies")
    differing = [o for o in range(model.n_observations)
                 if np.max(np.abs(pi0.matrix[o] - pi1.matrix[o])) > 1e-12]
    bound = degree_bound(model, differing)
    curve = fit_rational_curve(reward_curve_on_line(model, pi0, pi1), bound)
    fitted = len(curve.num) - 1
    return DegreeCertificate(bound=bound, fitted_degree=fitted,
                             witness_grid=chebyshev_grid(4 * (fitted + 1)))


# --------------------------------------------------------------------------
# one-state lines


def interpolation_speed(model: PomdpModel, pi0: Policy, pi1: Policy, lam: float) -> float:
    """The frequency-space position c of the policy-space position lam.

    For state policies differing on at most one state, eta along the line
    moves as eta_lam = eta_0 + c(lam) (eta_1 - eta_0) with

        c(lam) = lam det(I - gamma p_1) / det(I - gamma p_lam),

    a degree-one rational reparametrization of [0, 1].
    """
    if pi0.kind != "state" or pi1.kind != "state":
        raise ValueError("interpolation_speed needs state policies")
    diff = np.max(np.abs(pi0.matrix - pi1.matrix), axis=1)
    differing = np.nonzero(diff > 1e-12)[0]
    if len(differing) > 1:
        raise ValueError(
            f"policies differ on {len(differing)} states ({differing.tolist()}); "
            "the closed form needs at most one")
    gamma = model.gamma
    small = lambda tau: np.einsum("sa,sat->st", tau, model.alpha)
    tau_lam = (1.0 - lam) * pi0.matrix + lam * pi1.matrix
    det1 = np.linalg.det(np.eye(model.n_states) - gamma * small(pi1.matrix))
    det_lam = np.linalg.det(np.eye(model.n_states) - gamma * small(tau_lam))
    return float(lam * det1 / det_lam)


# --------------------------------------------------------------------------
# deterministic policies, vertex improvement, improvement paths


def deterministic_policies(n_rows: int, n_actions: int,
                           kind: str = "state") -> Iterable[Policy]:
    """All |A|^rows deterministic policies, in lexicographic action order."""
    for assignment in itertools.product(range(n_actions), repeat=n_rows):
        yield Policy.deterministic(assignment, n_actions, kind)


def best_deterministic(model: PomdpModel, kind: str = "state") -> tuple[Policy, float]:
    """Exhaustive search over deterministic policies; returns (argmax, reward).

    Ties keep the lexicographically first assignment.
    """
    n_rows = model.n_states if kind == "state" else model.n_observations
    best_pi, best_r = None, -np.inf
    for pi in deterministic_policies(n_rows, model.n_actions, kind):
        r = reward_of(model, pi)
        if r > best_r:
            best_pi, best_r = pi, r
    return best_pi, best_r


def vertex_improvement(model: PomdpModel, pi: Policy, obs) -> Policy:
    """Push one observation's action distribution to its best vertex.

    Requires that the observation is compatible with at most one state
    (then the reward is degree <= 1 in that row, so some vertex is optimal).
    Returns pi with row obs replaced by the best deterministic action; ties
    take the lowest action index.
    """
    if model.gamma >= 1.0:
        raise ValueError("vertex_improvement requires gamma < 1")
    if pi.kind != "observation":
        raise ValueError("vertex_improvement needs an observation policy")
    o = obs if isinstance(obs, (int, np.integer)) else model.observation_index(obs)
    compatible = int(np.sum(model.beta[:, o] > 0.0))
    if compatible > 1:
        raise ValueError(
            f"observation {model.observations[o]!r} is compatible with {compatible} "
            "states; the vertex argument needs at most one")
    base = reward_of(model, pi)
    best_matrix, best_r = None, -np.inf
    for a in range(model.n_actions):
        matrix = pi.matrix.copy()
        matrix[o] = 0.0
        matrix[o, a] = 1.0
        r = reward_of(model, Policy("observation", matrix))
        if r > best_r:
            best_matrix, best_r = matrix, r
    assert best_r >= base - 1e-12, (
        f"no vertex beats the interior point: {best_r} < {base}")
    return Policy("observation", best_matrix)


def improvement_path(model: PomdpModel, pi: Policy,
                     steps: int) -> list[tuple[Policy, float]]:
    """A reward-monotone path from pi to a globally optimal policy.

    Fully observable models only (beta must be the identity), and every
    policy must visit every state (strictly positive mu with gamma < 1, or
    strictly positive transitions).  The path has two stages: first a
    policy-space straight line onto the conditioning of eta(pi) (the
    frequency, hence the reward, is constant there), then the conditioning
    pullback of the frequency-space straight line to a global optimum
    (where the reward is linear in the parameter).  Returns `steps`
    (policy, reward) samples along the concatenation.
    """
    ns, na = model.n_states, model.n_actions
    if model.n_observations != ns or np.max(np.abs(model.beta - np.eye(ns))) > 1e-12:
        raise ValueError("improvement_path needs a fully observable model (identity beta)")
    if not (np.all(model.mu > 0.0) and model.gamma < 1.0) and not np.all(model.alpha > 0.0):
        raise ValueError(
            "improvement_path needs every policy to visit every state "
            "(mu > 0 with gamma < 1, or alpha > 0)")
    if steps < 2:
        raise ValueError(f"steps must be >= 2, got {steps}")
    if pi.kind == "observation":
        pi = Policy("state", pi.matrix)  # identity beta: same matrix

    start = state_action_frequency(model, pi)
    anchor, flagged = conditioning_inverse(model, start)
    assert not flagged, "positivity check should preclude unvisited states"
    best_pi, _ = best_deterministic(model, kind="state")
    target = state_action_frequency(model, best_pi)

    stage1 = max(1, steps // 4)
    stage2 = steps - stage1
    path: list[tuple[Policy, float]] = []
    for t in np.linspace(0.0, 1.0, stage1 + 1)[:-1]:
        blend = Policy("state", (1.0 - t) * pi.matrix + t * anchor.matrix)
        path.append((blend, reward_of(model, blend)))
    for t in np.linspace(0.0, 1.0, stage2):
        eta_t = (1.0 - t) * start.eta + t * target.eta
        pol_t, _ = conditioning_inverse(model, Frequency.from_eta(eta_t))
        path.append((pol_t, reward_of(model, pol_t)))
    return path
