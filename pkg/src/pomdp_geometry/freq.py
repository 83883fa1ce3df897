"""Exact state-action frequencies, values, gradients.

For gamma < 1 the (normalized, discounted) state-action frequency of a
policy is the unique solution of the linear fixed-point equation

    eta = gamma P^T eta + (1 - gamma) (mu * tau),

where P is the state-action kernel and (mu * tau)(s,a) = mu(s) tau(a|s).
For gamma = 1 it is the unique stationary distribution of P, provided the
stationary eigenspace is one-dimensional.  Everything here is dense linear
algebra at desk scale: LU solves, no iterative methods.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import Frequency, PomdpModel, Policy, kernels_for_tau, state_conditionals

RESIDUAL_TOL = 1e-10    # fixed-point residual any returned frequency must meet
ERGODICITY_TOL = 1e-8   # singular-value threshold for stationary-space dimension
RHO_FLOOR = 1e-12       # below this a state marginal counts as unvisited


class ErgodicityError(RuntimeError):
    """gamma = 1 was requested but the stationary distribution is not unique."""


@dataclass(frozen=True)
class ValueBundle:
    """State values V, state-action values Q and the scalar reward R.

    R = sum_s mu(s) V(s) always; with the normalized convention
    V(s) = (1-gamma) sum_a tau(a|s) Q(s,a) so that R = <reward, eta>.
    For gamma = 1 only R (the mean reward) is defined and V, Q are None.
    """

    V: np.ndarray | None
    Q: np.ndarray | None
    R: float


@dataclass(frozen=True)
class GradientBundle:
    """Reward gradient over observation-policy coordinates plus the frequency Jacobian.

    grad[o,a] is the partial derivative of R in the ambient coordinate
    pi(a|o).  jacobian[:, (s,a)] is the derivative of the flattened eta with
    respect to the state-policy coordinate tau(a|s).
    """

    grad: np.ndarray      # (O, A)
    jacobian: np.ndarray  # (S*A, S*A)


# --------------------------------------------------------------------------
# solvers


def eta_for_tau(model: PomdpModel, tau: np.ndarray) -> np.ndarray:
    """Solve the fixed-point equation for raw conditionals tau; returns eta (S, A).

    No validation of tau: used internally for finite differences and grids.
    """
    ns, na = model.n_states, model.n_actions
    big, _ = kernels_for_tau(model.alpha, tau)
    source = (model.mu[:, None] * tau).reshape(-1)
    if model.gamma < 1.0:
        mat = np.eye(ns * na) - model.gamma * big.T
        eta = np.linalg.solve(mat, (1.0 - model.gamma) * source)
    else:
        eta = _stationary_distribution(big)
    return eta.reshape(ns, na)


def _stationary_distribution(big: np.ndarray) -> np.ndarray:
    """The unique stationary distribution of a row-stochastic matrix, or ErgodicityError."""
    n = big.shape[0]
    mat = big.T - np.eye(n)
    sing = np.linalg.svd(mat, compute_uv=False)
    dim = int(np.sum(sing < ERGODICITY_TOL))
    if dim != 1:
        raise ErgodicityError(
            f"stationary distribution is not unique: {dim} singular values of "
            f"(P^T - I) lie below {ERGODICITY_TOL}")
    bordered = np.vstack([mat, np.ones((1, n))])
    rhs = np.zeros(n + 1)
    rhs[-1] = 1.0
    eta, *_ = np.linalg.lstsq(bordered, rhs, rcond=None)
    return eta


def state_action_frequency(model: PomdpModel, pi: Policy) -> Frequency:
    """The exact state-action frequency of a policy.

    For gamma < 1 this solves the linear system directly; for gamma = 1 it
    returns the unique stationary distribution of the state-action kernel
    (raising ErgodicityError if the stationary eigenspace has dimension != 1).
    The fixed-point residual of the result is checked against 1e-10.
    """
    tau = state_conditionals(model, pi)
    eta = eta_for_tau(model, tau)
    residual = fixed_point_residual(model, tau, eta)
    if residual > RESIDUAL_TOL:
        raise ArithmeticError(
            f"frequency solve left fixed-point residual {residual:.3e} > {RESIDUAL_TOL}")
    # scrub solver noise: entries in (-1e-12, 0) are zeros
    eta = np.where(np.abs(eta) < 1e-15, 0.0, eta)
    return Frequency.from_eta(eta)


def fixed_point_residual(model: PomdpModel, tau: np.ndarray, eta: np.ndarray) -> float:
    """Max-norm defect of eta in the stationarity equation for conditionals tau."""
    big, _ = kernels_for_tau(model.alpha, tau)
    flat = np.asarray(eta, dtype=float).reshape(-1)
    if model.gamma < 1.0:
        source = (model.mu[:, None] * tau).reshape(-1)
        defect = flat - model.gamma * (big.T @ flat) - (1.0 - model.gamma) * source
    else:
        defect = flat - big.T @ flat
    return float(np.max(np.abs(defect)))


def truncation_length(gamma: float, tol: float) -> int:
    """Number of terms after which the tail of the discounted series is below tol."""
    if not (0.0 < gamma < 1.0):
        raise ValueError(f"truncation length needs gamma in (0,1), got {gamma}")
    if tol <= 0.0:
        raise ValueError(f"tol must be positive, got {tol}")
    return max(0, math.ceil(math.log(tol * (1.0 - gamma)) / math.log(gamma)))


def truncated_series_oracle(model: PomdpModel, pi: Policy, tol: float) -> Frequency:
    """Independent frequency computation by summing the defining series.

    gamma < 1: sums gamma^t (P^T)^t (mu * tau) for t <= T, with T chosen so
    the discarded tail has total-variation mass below tol, and divides by
    the exact mass of the kept terms (so the result is a distribution while
    staying within tol of the limit).
    gamma = 1: Cesaro averages with doubling horizon until two successive
    averages agree within tol (O(1/T) convergence -- use coarse tolerances).
    """
    if tol <= 0.0:
        raise ValueError(f"tol must be positive, got {tol}")
    tau = state_conditionals(model, pi)
    ns, na = model.n_states, model.n_actions
    big, _ = kernels_for_tau(model.alpha, tau)
    start = (model.mu[:, None] * tau).reshape(-1)
    if model.gamma < 1.0:
        horizon = truncation_length(model.gamma, tol)
        term = start.copy()
        acc = start.copy()
        for _ in range(horizon):
            term = model.gamma * (big.T @ term)
            acc += term
        # the kept terms have exact total mass sum_{t<=T} gamma^t; scaling by
        # it keeps the result a distribution and stays within tol of the limit
        eta = acc * (1.0 - model.gamma) / (1.0 - model.gamma ** (horizon + 1))
    else:
        eta = _cesaro_average(big, start, tol)
    eta = eta.reshape(ns, na)
    eta = np.where(np.abs(eta) < 1e-15, 0.0, eta)
    return Frequency.from_eta(eta)


def _cesaro_average(big: np.ndarray, start: np.ndarray, tol: float,
                    max_horizon: int = 1 << 22) -> np.ndarray:
    horizon = 64
    previous = None
    dist = start.copy()
    acc = np.zeros_like(start)
    steps = 0
    while horizon <= max_horizon:
        while steps < horizon:
            acc += dist
            dist = big.T @ dist
            steps += 1
        average = acc / steps
        if previous is not None and np.max(np.abs(average - previous)) <= 0.5 * tol:
            return average
        previous = average
        horizon *= 2
    raise ArithmeticError(
        f"Cesaro averaging did not stabilize within {max_horizon} steps at tol {tol}")


# --------------------------------------------------------------------------
# values and gradients


def value_bundle(model: PomdpModel, pi: Policy, normalized: bool = True) -> ValueBundle:
    """State/state-action values and the scalar reward of a policy.

    With the default normalized convention the reward and values carry the
    (1-gamma) prefactor, so R equals <reward, eta>.  normalized=False drops
    the prefactor from V and R (the plain expected discounted sum); Q never
    carries it.  For gamma = 1 returns the mean reward with V = Q = None.
    """
    tau = state_conditionals(model, pi)
    if model.gamma == 1.0:
        eta = eta_for_tau(model, tau)
        return ValueBundle(V=None, Q=None, R=float(np.sum(model.reward * eta)))
    big, _ = kernels_for_tau(model.alpha, tau)
    ns, na = model.n_states, model.n_actions
    q = np.linalg.solve(np.eye(ns * na) - model.gamma * big,
                        model.reward.reshape(-1)).reshape(ns, na)
    v = np.sum(tau * q, axis=1)
    if normalized:
        v = (1.0 - model.gamma) * v
    return ValueBundle(V=v, Q=q, R=float(model.mu @ v))


def policy_gradient(model: PomdpModel, pi: Policy) -> GradientBundle:
    """Gradient of the (normalized) reward in ambient observation-policy coordinates.

    grad[o,a] = sum_s rho(s) beta(o|s) Q(s,a), which is the partial
    derivative of R = <reward, eta> with respect to pi(a|o) holding the other
    coordinates fixed.  The Jacobian column for the state-policy coordinate
    tau(a|s) is rho(s) (I - gamma P^T)^{-1} e_{(s,a)}.
    """
    if model.gamma >= 1.0:
        raise ValueError("policy_gradient requires gamma < 1")
    if pi.kind != "observation":
        raise ValueError(f"policy_gradient needs an observation policy, got kind {pi.kind!r}")
    tau = state_conditionals(model, pi)
    ns, na = model.n_states, model.n_actions
    big, _ = kernels_for_tau(model.alpha, tau)
    eta = eta_for_tau(model, tau)
    rho = eta.sum(axis=1)
    q = np.linalg.solve(np.eye(ns * na) - model.gamma * big,
                        model.reward.reshape(-1)).reshape(ns, na)
    grad = (model.beta * rho[:, None]).T @ q
    inverse = np.linalg.solve(np.eye(ns * na) - model.gamma * big.T, np.eye(ns * na))
    jacobian = inverse * np.repeat(rho, na)[None, :]
    return GradientBundle(grad=grad, jacobian=jacobian)


def conditioning_inverse(model: PomdpModel, freq: Frequency,
                         tol: float = RHO_FLOOR) -> tuple[Policy, tuple[int, ...]]:
    """Recover a state policy from a frequency by conditioning.

    pi(a|s) = eta(s,a)/rho(s) wherever rho(s) > tol; rows of unvisited
    states are set to the uniform distribution and their indices returned as
    the second element.
    """
    eta = np.clip(freq.eta, 0.0, None)
    rho = eta.sum(axis=1)
    na = eta.shape[1]
    matrix = np.full_like(eta, 1.0 / na)
    visited = rho > tol
    matrix[visited] = eta[visited] / rho[visited, None]
    flagged = tuple(int(i) for i in np.nonzero(~visited)[0])
    return Policy("state", matrix), flagged


# --------------------------------------------------------------------------
# batched evaluation (grids, scans, Monte Carlo style sweeps)


def batch_eta(model: PomdpModel, taus: np.ndarray) -> np.ndarray:
    """Frequencies for a batch of conditionals: taus (N, S, A) -> etas (N, S, A).

    gamma < 1 only (stacked LU solves).
    """
    if model.gamma >= 1.0:
        raise ValueError("batch_eta requires gamma < 1")
    n, ns, na = taus.shape
    flat = model.alpha.reshape(ns * na, ns)
    big = (flat[None, :, :, None] * taus[:, None, :, :]).reshape(n, ns * na, ns * na)
    mats = np.eye(ns * na)[None] - model.gamma * np.swapaxes(big, 1, 2)
    sources = (model.mu[None, :, None] * taus).reshape(n, ns * na, 1)
    etas = np.linalg.solve(mats, (1.0 - model.gamma) * sources)
    return etas.reshape(n, ns, na)


def batch_rewards(model: PomdpModel, taus: np.ndarray) -> np.ndarray:
    """Normalized rewards for a batch of conditionals taus (N, S, A) -> (N,).

    Solves the S x S marginal system per point (cheaper than the full
    state-action system).  gamma < 1 only.
    """
    if model.gamma >= 1.0:
        raise ValueError("batch_rewards requires gamma < 1")
    n, ns, _ = taus.shape
    small = np.einsum("nsa,sat->nst", taus, model.alpha)
    mats = np.eye(ns)[None] - model.gamma * np.swapaxes(small, 1, 2)
    rhs = np.broadcast_to((1.0 - model.gamma) * model.mu, (n, ns))[..., None]
    rho = np.linalg.solve(mats, rhs)[..., 0]
    r_tau = np.einsum("nsa,sa->ns", taus, model.reward)
    return np.einsum("ns,ns->n", rho, r_tau)


def reward_of(model: PomdpModel, pi: Policy) -> float:
    """The normalized reward <reward, eta> of a policy (any gamma in (0, 1])."""
    tau = state_conditionals(model, pi)
    eta = eta_for_tau(model, tau)
    return float(np.sum(model.reward * eta))
