"""Critical-point enumeration and counting bounds for the reward landscape.

Partial observability can create several smooth local optimizers in the
interior of the policy polytope plus non-smooth ones on its boundary.  This
module locates and classifies them exactly for single-observation
two-action controllers (where the policy polytope is an interval and the
reward is a low-degree rational function), and computes combinatorial upper
bounds on the number of critical points per face of the policy polytope for
the general case.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as pol

from .freq import batch_rewards, policy_gradient, reward_of
from .geometry import RankError, pseudoinverse
from .model import Policy, PomdpModel
from .rational import fit_rational_curve

SUPPORT_TOL = 1e-12

# interior roots closer than this are reported once
MERGE_TOL = 1e-8

# reward ranges below 1e-12 of scale mean the landscape is flat
DEGENERATE_TOL = 1e-12

# finite-difference step for derivative sign queries during polishing
FD_STEP = 1e-7

# offset at which function values classify a polished root
CLASSIFY_STEP = 1e-4
CLASSIFY_MARGIN = 1e-10

# one-sided slope threshold for boundary classification, relative to scale
BOUNDARY_SLOPE_TOL = 1e-7

BOUNDARY_MAX = "strict local max"
BOUNDARY_MIN = "strict local min"
BOUNDARY_NEITHER = "neither"


# ---------------------------------------------------------------------------
# exact critical points of blind two-action controllers


@dataclass(frozen=True)
class CriticalSet:
    """Classified critical points of a reward curve over [0, 1].

    ``interior_roots`` holds (parameter, kind) pairs sorted by parameter,
    with kind one of ``"max"``, ``"min"``, ``"saddle/flat"``.  ``boundary``
    classifies the endpoints 0.0 and 1.0 by their one-sided slopes.
    ``degenerate`` flags an (up to tolerance) constant landscape, in which
    case no roots are reported.
    """

    interior_roots: tuple[tuple[float, str], ...]
    boundary: dict[float, str]
    degenerate: bool
    duplicates_merged: bool

    @property
    def n_interior(self) -> int:
        return len(self.interior_roots)

    def kinds(self) -> tuple[str, ...]:
        return tuple(kind for _, kind in self.interior_roots)

    def to_dict(self) -> dict:
        return {
            "roots": [
                {"p": p, "kind": kind} for p, kind in self.interior_roots
            ],
            "boundary": {str(key): val for key, val in sorted(self.boundary.items())},
            "degenerate": self.degenerate,
            "duplicates_merged": self.duplicates_merged,
        }


def _blind_reward_function(model: PomdpModel):
    """Reward as a function of p = probability of the first action."""

    def f(p: float) -> float:
        matrix = np.array([[p, 1.0 - p]])
        return reward_of(model, Policy("observation", matrix))

    return f


def _blind_grid_rewards(model: PomdpModel, ps: np.ndarray) -> np.ndarray:
    pis = np.stack([ps, 1.0 - ps], axis=1)[:, None, :]  # (N, 1, 2)
    taus = np.einsum("so,noa->nsa", model.beta, pis)
    return batch_rewards(model, taus)


def blind_critical_points(model: PomdpModel, grid: int = 10_000) -> CriticalSet:
    """Locate all critical points of a blind two-action reward curve.

    The reward is a rational function of degree at most the number of
    states; its derivative numerator is expanded from a fitted rational
    curve and solved by companion matrix, then every candidate root is
    polished by bisecting the finite-difference derivative and classified
    by comparing nearby function values.  A dense grid cross-validates the
    result: every sign change of the grid increments must lie within two
    cells of a reported extremum and vice versa, otherwise an
    :class:`ArithmeticError` is raised rather than returning a suspect
    answer.
    """
    if model.n_observations != 1 or model.n_actions != 2:
        raise ValueError(
            "exact enumeration needs a single observation and two actions; "
            f"got {model.n_observations} observations, {model.n_actions} actions"
        )
    if not model.gamma < 1.0:
        raise ValueError("exact enumeration requires gamma < 1")
    if grid < 100:
        raise ValueError("grid must have at least 100 cells")

    f = _blind_reward_function(model)
    ps = np.linspace(0.0, 1.0, grid + 1)
    rewards = _blind_grid_rewards(model, ps)
    scale = max(1.0, float(np.max(np.abs(rewards))))
    spread = float(np.max(rewards) - np.min(rewards))
    if spread <= DEGENERATE_TOL * scale:
        return CriticalSet(
            interior_roots=(),
            boundary={0.0: BOUNDARY_NEITHER, 1.0: BOUNDARY_NEITHER},
            degenerate=True,
            duplicates_merged=False,
        )

    curve = fit_rational_curve(f, max_degree=model.n_states)
    dnum = curve.derivative_numerator()
    # trailing coefficients that are pure cancellation noise would poison
    # the companion matrix, pushing genuine roots off to infinity
    tiny = 1e-12 * max(float(np.max(np.abs(dnum))), 1e-300)
    while len(dnum) > 1 and abs(dnum[-1]) <= tiny:
        dnum = dnum[:-1]
    candidates = []
    if len(dnum) > 1:
        for root in pol.polyroots(dnum):
            if abs(root.imag) <= 1e-8 and 1e-10 < root.real < 1.0 - 1e-10:
                candidates.append(float(root.real))

    def fd_slope(x: float) -> float:
        lo = max(0.0, x - FD_STEP)
        hi = min(1.0, x + FD_STEP)
        return (f(hi) - f(lo)) / (hi - lo)

    polished = []
    for x0 in sorted(candidates):
        x = _polish_root(fd_slope, x0, scale)
        if x is not None:
            polished.append(x)

    merged, duplicates_merged = _merge_close(polished, MERGE_TOL)

    roots = []
    margin = CLASSIFY_MARGIN * scale
    for x in merged:
        lo = max(0.0, x - CLASSIFY_STEP)
        hi = min(1.0, x + CLASSIFY_STEP)
        f_lo, f_mid, f_hi = f(lo), f(x), f(hi)
        if f_mid >= max(f_lo, f_hi) + margin:
            kind = "max"
        elif f_mid <= min(f_lo, f_hi) - margin:
            kind = "min"
        else:
            kind = "saddle/flat"
        roots.append((x, kind))

    _cross_validate(ps, rewards, roots, scale, grid)

    boundary = _classify_boundary(f, scale)
    return CriticalSet(
        interior_roots=tuple(roots),
        boundary=boundary,
        degenerate=False,
        duplicates_merged=duplicates_merged,
    )


def _polish_root(slope, x0: float, scale: float) -> float | None:
    """Bisect the finite-difference slope around x0 down to width 1e-12.

    When no sign change brackets the candidate, it is kept only if the
    slope there is numerically zero (a flat critical point); otherwise it
    is a spurious root of the fitted numerator and dropped.
    """
    for width in (1e-5, 1e-4, 1e-3):
        a = max(1e-9, x0 - width)
        b = min(1.0 - 1e-9, x0 + width)
        sa, sb = slope(a), slope(b)
        if sa == 0.0:
            return a
        if sb == 0.0:
            return b
        if np.sign(sa) != np.sign(sb):
            while b - a > 1e-12:
                mid = 0.5 * (a + b)
                sm = slope(mid)
                if sm == 0.0:
                    return mid
                if np.sign(sm) == np.sign(sa):
                    a, sa = mid, sm
                else:
                    b = mid
            return 0.5 * (a + b)
    if abs(slope(x0)) <= 1e-9 * scale:
        return x0
    return None


def _merge_close(points: list[float], tol: float) -> tuple[list[float], bool]:
    if not points:
        return [], False
    points = sorted(points)
    clusters = [[points[0]]]
    for x in points[1:]:
        if x - clusters[-1][-1] <= tol:
            clusters[-1].append(x)
        else:
            clusters.append([x])
    merged = [float(np.mean(c)) for c in clusters]
    return merged, any(len(c) > 1 for c in clusters)


def _cross_validate(ps, rewards, roots, scale, grid):
    """Require agreement between reported extrema and grid sign changes."""
    diffs = np.diff(rewards)
    signs = np.sign(np.where(np.abs(diffs) <= 1e-13 * scale, 0.0, diffs))
    changes = []
    last_sign, last_idx = 0.0, -1
    for i, s in enumerate(signs):
        if s == 0.0:
            continue
        if last_sign != 0.0 and s != last_sign:
            changes.append(0.5 * (ps[last_idx + 1] + ps[i]))
        last_sign, last_idx = s, i
    cell = 1.0 / grid
    window = 2.0 * cell + 1e-12

    extrema = [p for p, kind in roots if kind in ("max", "min")]
    for p in extrema:
        if not any(abs(p - c) <= window for c in changes):
            raise ArithmeticError(
                f"reported extremum at p={p:.12g} has no matching sign "
                "change of the grid increments within two cells"
            )
    reported = [p for p, _ in roots]
    for c in changes:
        if not any(abs(p - c) <= window for p in reported):
            raise ArithmeticError(
                f"grid increments change sign near p={c:.6g} but no "
                "critical point was reported there"
            )


def _classify_boundary(f, scale: float) -> dict[float, str]:
    h = 1e-6
    thr = BOUNDARY_SLOPE_TOL * scale
    slope0 = (f(h) - f(0.0)) / h
    slope1 = (f(1.0) - f(1.0 - h)) / h
    if slope0 < -thr:
        at0 = BOUNDARY_MAX
    elif slope0 > thr:
        at0 = BOUNDARY_MIN
    else:
        at0 = BOUNDARY_NEITHER
    if slope1 > thr:
        at1 = BOUNDARY_MAX
    elif slope1 < -thr:
        at1 = BOUNDARY_MIN
    else:
        at1 = BOUNDARY_NEITHER
    return {0.0: at0, 1.0: at1}


# ---------------------------------------------------------------------------
# combinatorial upper bounds per face


@dataclass(frozen=True)
class BoundInput:
    """Inputs of the per-face critical-point bound.

    ``active_set`` lists the (action, observation) pairs pinned to zero on
    the face.  ``degrees`` holds, per active observation, the support size
    of the corresponding pseudo-inverse row (the degree of the matching
    constraint polynomial); ``multiplicities`` counts the pinned actions
    per active observation; ``m`` is the face codimension budget: ambient
    policy dimension minus the number of pinned entries.
    """

    active_set: tuple[tuple[str, str], ...]
    degrees: tuple[int, ...]
    multiplicities: tuple[int, ...]
    m: int

    @classmethod
    def from_model(
        cls,
        model: PomdpModel,
        active_set,
        support_tol: float = SUPPORT_TOL,
    ) -> "BoundInput":
        if model.n_states != model.n_observations:
            raise RankError(
                "the per-face bound needs a square invertible observation "
                f"kernel; got {model.n_states} states and "
                f"{model.n_observations} observations"
            )
        pinv = pseudoinverse(model.beta)
        pairs = []
        for a, o in active_set:
            a_idx = a if isinstance(a, (int, np.integer)) else model.action_index(a)
            o_idx = (
                o if isinstance(o, (int, np.integer)) else model.observation_index(o)
            )
            pairs.append((int(a_idx), int(o_idx)))
        if len(set(pairs)) != len(pairs):
            raise ValueError("active set contains repeated pairs")
        per_obs: dict[int, int] = {}
        for _, o_idx in pairs:
            per_obs[o_idx] = per_obs.get(o_idx, 0) + 1
        for o_idx, count in per_obs.items():
            if count >= model.n_actions:
                raise ValueError(
                    f"all actions pinned to zero for observation "
                    f"{model.observations[o_idx]}: the face is empty"
                )
        m = model.n_states * (model.n_actions - 1) - len(pairs)
        if m < 0:
            raise ValueError("more pinned entries than policy dimensions")
        active_obs = sorted(per_obs)
        degrees = tuple(
            int(np.count_nonzero(np.abs(pinv[o]) > support_tol)) for o in active_obs
        )
        multiplicities = tuple(per_obs[o] for o in active_obs)
        labels = tuple(
            (model.actions[a_idx], model.observations[o_idx])
            for a_idx, o_idx in sorted(pairs, key=lambda t: (t[1], t[0]))
        )
        return cls(
            active_set=labels,
            degrees=degrees,
            multiplicities=multiplicities,
            m=m,
        )


def _convolve_int(a: list[int], b: list[int], cap: int) -> list[int]:
    out = [0] * min(len(a) + len(b) - 1, cap + 1)
    for i, ai in enumerate(a):
        if ai == 0 or i > cap:
            continue
        for j, bj in enumerate(b):
            if i + j > cap:
                break
            out[i + j] += ai * bj
    return out


def critical_point_bound(inputs: BoundInput) -> int:
    """Upper bound on the critical points in the face interior.

    The bound is the product of constraint degrees raised to their
    multiplicities, times the sum over all ways of distributing the
    codimension budget ``m`` among the active observations of the products
    of (degree - 1) powers.  The sum is the coefficient of ``x^m`` in a
    product of truncated geometric series, accumulated in exact integer
    arithmetic.  An empty active set leaves no observations to absorb the
    budget: the bound is 1 when ``m`` is zero and 0 otherwise — no interior
    critical points exist.
    """
    if inputs.m < 0:
        return 0
    if not inputs.degrees:
        return 1 if inputs.m == 0 else 0
    prefactor = 1
    for d, k in zip(inputs.degrees, inputs.multiplicities):
        prefactor *= d**k
    poly = [1]
    for d in inputs.degrees:
        series = [(d - 1) ** i for i in range(inputs.m + 1)]
        poly = _convolve_int(poly, series, inputs.m)
    coeff = poly[inputs.m] if inputs.m < len(poly) else 0
    return prefactor * coeff


def face_critical_bound(model: PomdpModel, active_set) -> int:
    """Bound for a concrete model face given by pinned (action, obs) pairs."""
    return critical_point_bound(BoundInput.from_model(model, active_set))


def polar_degree_terms(k: int) -> tuple[int, int, int]:
    """The three alternating summands of the rank-one polar degree.

    Evaluated in closed polynomial form, which stays valid down to k = 1
    where the intermediate factorial expressions would be undefined.
    """
    if k < 1:
        raise ValueError("k must be a positive integer")
    t0 = (k + 1) * k * k // 2
    t1 = k * k * (k - 1) + 2 * k
    t2 = 2 * k + k * (k - 1) * (k - 2) // 2
    return t0, t1, t2


def polar_degree_rank_one(k: int) -> int:
    """Polar degree of the rank-one locus of k x 2 matrices: equals k.

    This is the sharp count behind the interior bound for blind two-action
    controllers with k states.
    """
    t0, t1, t2 = polar_degree_terms(k)
    return t0 - t1 + t2


# ---------------------------------------------------------------------------
# reward landscape scans and stationarity diagnostics


@dataclass(frozen=True)
class ScanGrid:
    """Rewards tabulated over a 1- or 2-axis slice of the policy polytope."""

    axes: tuple[tuple[str, str], ...]  # (observation, action) label pairs
    coordinates: np.ndarray  # (N, len(axes))
    rewards: np.ndarray  # (N,)
    shape: tuple[int, ...]

    def to_csv(self) -> str:
        headers = [f"pi[{a}|{o}]" for o, a in self.axes] + ["reward"]
        lines = [",".join(headers)]
        for coord, reward in zip(self.coordinates, self.rewards):
            cells = [f"{x:.17g}" for x in coord] + [f"{reward:.17g}"]
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"


def _axis_indices(model: PomdpModel, axes) -> list[tuple[int, int]]:
    out = []
    for o, a in axes:
        o_idx = o if isinstance(o, (int, np.integer)) else model.observation_index(o)
        a_idx = a if isinstance(a, (int, np.integer)) else model.action_index(a)
        out.append((int(o_idx), int(a_idx)))
    return out


def _pinned_row(base_row: np.ndarray, a_idx: int, value: float) -> np.ndarray:
    """Set one entry of a policy row and rescale the rest to fill 1 - value."""
    row = np.zeros_like(base_row)
    row[a_idx] = value
    rest = np.delete(base_row, a_idx)
    total = rest.sum()
    others = [i for i in range(base_row.size) if i != a_idx]
    if total <= 1e-15:
        row[others] = (1.0 - value) / len(others)
    else:
        row[others] = (1.0 - value) * rest / total
    return row


def landscape_scan(
    model: PomdpModel,
    axes,
    resolution: int = 101,
    base_policy: Policy | None = None,
) -> ScanGrid:
    """Tabulate rewards while sweeping one or two policy entries over [0, 1].

    Each axis is an (observation, action) pair; the swept entry is set to
    the grid value and the remaining entries of its row are rescaled
    proportionally to the base policy (uniform by default).  Two axes must
    address distinct observations so the sweeps do not fight over a row.
    """
    pairs = _axis_indices(model, axes)
    if not 1 <= len(pairs) <= 2:
        raise ValueError("axes must contain one or two (observation, action) pairs")
    if len({o for o, _ in pairs}) != len(pairs):
        raise ValueError("axes must address distinct observations")
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    if base_policy is None:
        base_policy = Policy.uniform(model.n_observations, model.n_actions)
    elif base_policy.kind != "observation" or base_policy.matrix.shape != (
        model.n_observations,
        model.n_actions,
    ):
        raise ValueError("base_policy must be an observation policy for this model")

    ticks = np.linspace(0.0, 1.0, resolution)
    grids = np.meshgrid(*([ticks] * len(pairs)), indexing="ij")
    coords = np.stack([g.ravel() for g in grids], axis=1)
    n = coords.shape[0]

    pis = np.broadcast_to(base_policy.matrix, (n,) + base_policy.matrix.shape).copy()
    for axis, (o_idx, a_idx) in enumerate(pairs):
        for i in range(n):
            pis[i, o_idx] = _pinned_row(base_policy.matrix[o_idx], a_idx, coords[i, axis])
    taus = np.einsum("so,noa->nsa", model.beta, pis)
    rewards = batch_rewards(model, taus)
    labels = tuple(
        (model.observations[o_idx], model.actions[a_idx]) for o_idx, a_idx in pairs
    )
    return ScanGrid(
        axes=labels,
        coordinates=coords,
        rewards=rewards,
        shape=(resolution,) * len(pairs),
    )


def kkt_residual(model: PomdpModel, pi: Policy, active_tol: float = 1e-9) -> float:
    """First-order stationarity residual of a policy for reward maximization.

    Within each observation row the gradient is centered over the
    coordinates carrying probability (a common multiplier makes them
    stationary); entries at the simplex boundary only contribute when the
    gradient pushes into the feasible region.  Returns the Frobenius norm
    of the assembled residual, which vanishes exactly at KKT points.
    """
    grad = policy_gradient(model, pi).grad
    resid = np.zeros_like(grad)
    for o in range(grad.shape[0]):
        free = pi.matrix[o] > active_tol
        lam = grad[o][free].mean()
        centered = grad[o] - lam
        resid[o, free] = centered[free]
        resid[o, ~free] = np.maximum(centered[~free], 0.0)
    return float(np.linalg.norm(resid))
