"""Robustness values: worst-case t statistics over bounded confounding.

The direct and indirect effects are affine/bilinear in two low-dimensional
nuisance vectors (phi pairs) whose feasible ranges under a common strength
bound rho have closed forms; minimizing the t statistic over those ranges is
a small box-constrained global optimization. The bootstrap standard error is
recomputed per candidate from per-resample moments on common random numbers,
so one objective evaluation costs a few vector operations per resample and
no new regressions.

The direct-effect range does not depend on whether the confounder is scalar
or vector, so both modes share one code path. The indirect-effect range does:
scalar mode ties the two phi vectors to a shared direction, vector mode
searches two independent balls.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import Bounds, minimize

from .errors import DimensionMismatch
from .inference import BootstrapPlan
from .mediation import MediationMoments, observed_indirect
from .optimize import direct_optimize

DEFAULT_RHO_GRID = tuple(np.round(np.arange(1, 100) / 100.0, 2))
DEFAULT_BUDGET = 4000
BALL_SHRINK = 1.0 - 1e-9
RV_NOT_ATTAINED = 1.0


def _sphere_from_angles(angles: np.ndarray) -> np.ndarray:
    """Map (k, q-1) spherical angles to (k, q) unit vectors."""
    k, qm1 = angles.shape
    out = np.empty((k, qm1 + 1))
    sin_prod = np.ones(k)
    for i in range(qm1):
        out[:, i] = sin_prod * np.cos(angles[:, i])
        sin_prod = sin_prod * np.sin(angles[:, i])
    out[:, qm1] = sin_prod
    return out


def _angle_bounds(q: int) -> tuple[list[float], list[float]]:
    lo = [0.0] * (q - 1)
    hi = [np.pi] * max(q - 2, 0) + ([2.0 * np.pi] if q >= 2 else [])
    return lo, hi


# ---------------------------------------------------------------------------
# Per-resample arrays: estimates are affine (direct) or bilinear (indirect)
# in the phi parameters with data-dependent coefficients.
# ---------------------------------------------------------------------------

def _direct_coeffs(m: MediationMoments):
    nr2 = float(m.r_m_a_c @ m.r_m_a_c)
    scale = np.sqrt(m.var_y_res_amc / m.var_a_res_mc)
    t1 = -np.sqrt(1.0 - nr2) * scale
    t2 = scale * (m.mix_c_ac.T @ m.r_m_a_c) / np.sqrt(1.0 - nr2)
    return m.theta1_obs, t1, t2


def _indirect_coeffs(m: MediationMoments):
    v1 = -(m.cov_m_res_ac_sqrt @ m.theta3_obs) / np.sqrt(m.var_a_res_c)
    v2 = -np.sqrt(m.var_y_res_amc) * (m.cov_m_res_ac_inv_sqrt @ m.beta1_obs)
    cross = np.sqrt(m.var_y_res_amc / m.var_a_res_c)
    return observed_indirect(m), v1, v2, cross


@dataclass
class EffectObjective:
    """Worst-case t (or estimate) evaluator for one effect on one plan.

    ``phis`` arguments are (k, .) candidate batches; estimates come from the
    full-sample coefficients and standard errors from the per-resample ones.
    """

    kind: str                      # "direct" | "indirect"
    q: int
    flip: float
    full: tuple
    boot: tuple | None

    @classmethod
    def for_direct(cls, mm: MediationMoments, plan: BootstrapPlan | None):
        full = _direct_coeffs(mm)
        boot = None
        if plan is not None:
            parts = [_direct_coeffs(m) for m in plan.moments]
            boot = (np.array([p[0] for p in parts]),
                    np.array([p[1] for p in parts]),
                    np.vstack([p[2] for p in parts]))
        flip = -1.0 if mm.theta1_obs < 0 else 1.0
        return cls(kind="direct", q=mm.q, flip=flip, full=full, boot=boot)

    @classmethod
    def for_indirect(cls, mm: MediationMoments, plan: BootstrapPlan | None):
        full = _indirect_coeffs(mm)
        boot = None
        if plan is not None:
            parts = [_indirect_coeffs(m) for m in plan.moments]
            boot = (np.array([p[0] for p in parts]),
                    np.vstack([p[1] for p in parts]),
                    np.vstack([p[2] for p in parts]),
                    np.array([p[3] for p in parts]))
        flip = -1.0 if observed_indirect(mm) < 0 else 1.0
        return cls(kind="indirect", q=mm.q, flip=flip, full=full, boot=boot)

    def point_estimates(self, phi_a, phi_b) -> np.ndarray:
        if self.kind == "direct":
            base, t1, t2 = self.full
            return base + phi_a[:, 0] * t1 + phi_b @ t2
        s0, v1, v2, cross = self.full
        return (s0 + phi_a @ v1 + phi_b @ v2
                + np.einsum("ki,ki->k", phi_a, phi_b) * cross)

    def boot_matrix(self, phi_a, phi_b) -> np.ndarray:
        """(k, B) estimates across resamples."""
        if self.kind == "direct":
            base, t1, t2 = self.boot
            return base[None, :] + phi_a[:, [0]] * t1[None, :] + phi_b @ t2.T
        s0, v1, v2, cross = self.boot
        inner = np.einsum("ki,ki->k", phi_a, phi_b)
        return (s0[None, :] + phi_a @ v1.T + phi_b @ v2.T
                + inner[:, None] * cross[None, :])

    def t_values(self, phi_a, phi_b) -> np.ndarray:
        if self.boot is None:
            raise DimensionMismatch("t statistics need a bootstrap plan")
        est = self.point_estimates(phi_a, phi_b)
        se = self.boot_matrix(phi_a, phi_b).std(axis=1, ddof=1)
        return self.flip * est / se

    def estimate_values(self, phi_a, phi_b) -> np.ndarray:
        return self.flip * self.point_estimates(phi_a, phi_b)

    def observed_t(self) -> float:
        zero = np.zeros((1, 1 if self.kind == "direct" else self.q))
        zq = np.zeros((1, self.q))
        return float(self.t_values(zero, zq)[0])


# ---------------------------------------------------------------------------
# Feasible-range parameterizations under the strength bounds.
# ---------------------------------------------------------------------------

@dataclass
class _PhiBox:
    lower: np.ndarray
    upper: np.ndarray
    to_phi: callable = None       # X (k, dims) -> (phi_a (k, da), phi_b (k, q))
    corner_phis: list = field(default_factory=list)

    @property
    def dims(self) -> int:
        return self.lower.size


def _direct_box(q: int, rho_y: float, rho_m: float, rho_a: float,
                full_coeffs) -> _PhiBox | None:
    rho_y *= BALL_SHRINK
    rho_m *= BALL_SHRINK
    rho_a *= BALL_SHRINK
    if rho_y <= 0.0 or (rho_a <= 0.0 and rho_m <= 0.0):
        return None
    r1 = np.sqrt(rho_y * rho_a / (1.0 - rho_a)) if rho_a > 0 else 0.0
    t3max = np.arctan(np.sqrt(rho_m / (1.0 - rho_m))) if rho_m > 0 else 0.0

    lo, hi, kinds = [], [], []
    if rho_a > 0:
        lo.append(-1.0); hi.append(1.0); kinds.append("t1")
    if rho_m > 0:
        if q == 1:
            lo.append(-t3max); hi.append(t3max); kinds.append("t3")
        else:
            lo.append(0.0); hi.append(t3max); kinds.append("t3")
            alo, ahi = _angle_bounds(q)
            lo += alo; hi += ahi; kinds += ["ang"] * (q - 1)

    def to_phi(x: np.ndarray):
        x = np.atleast_2d(x)
        k = x.shape[0]
        col = 0
        t1 = np.zeros(k)
        if "t1" in kinds:
            t1 = x[:, col]; col += 1
        t3 = np.zeros(k)
        t2 = np.zeros((k, q))
        t2[:, 0] = 1.0
        if "t3" in kinds:
            t3 = x[:, col]; col += 1
            if q > 1:
                t2 = _sphere_from_angles(x[:, col:col + q - 1])
        phi1 = (r1 * t1 / np.cos(t3))[:, None]
        phi2 = np.sqrt(rho_y) * np.tan(t3)[:, None] * t2
        return phi1, phi2

    # deterministic corner candidates: estimate-minimizing directions
    _, t1c, t2c = full_coeffs
    corners = []
    d2 = t2c / np.linalg.norm(t2c) if np.linalg.norm(t2c) > 0 else None
    for s1 in (-1.0, 0.0, 1.0):
        phi1 = np.array([[s1 * r1 / np.cos(t3max)]]) if rho_a > 0 else np.zeros((1, 1))
        if rho_m > 0 and d2 is not None:
            for s2 in (-1.0, 1.0):
                phi2 = s2 * np.sqrt(rho_y) * np.tan(t3max) * d2[None, :]
                corners.append((phi1, phi2))
        corners.append((np.array([[s1 * r1]]) if rho_a > 0 else np.zeros((1, 1)),
                        np.zeros((1, q))))
    return _PhiBox(lower=np.array(lo), upper=np.array(hi), to_phi=to_phi,
                   corner_phis=corners)


def _indirect_box(q: int, rho_y: float, rho_m: float, rho_a: float,
                  confounder_mode: str, full_coeffs) -> _PhiBox | None:
    rho_y *= BALL_SHRINK
    rho_m *= BALL_SHRINK
    rho_a *= BALL_SHRINK
    if rho_m <= 0.0:
        return None
    r3 = np.sqrt(rho_m * rho_a / (1.0 - rho_a)) if rho_a > 0 else 0.0
    r4 = np.sqrt(rho_y * rho_m / (1.0 - rho_m)) if rho_y > 0 else 0.0
    if r3 == 0.0 and r4 == 0.0:
        return None

    lo, hi = [], []
    if confounder_mode == "scalar_u":
        has_t2 = r3 > 0
        has_t3 = r4 > 0
        if has_t2:
            lo.append(-1.0); hi.append(1.0)
        if has_t3:
            lo.append(-1.0); hi.append(1.0)
        n_ang = q - 1
        alo, ahi = _angle_bounds(q)
        lo += alo; hi += ahi

        def to_phi(x: np.ndarray):
            x = np.atleast_2d(x)
            k = x.shape[0]
            col = 0
            t2 = np.zeros(k)
            t3 = np.zeros(k)
            if has_t2:
                t2 = x[:, col]; col += 1
            if has_t3:
                t3 = x[:, col]; col += 1
            if q == 1:
                t1 = np.ones((k, 1))
            else:
                t1 = _sphere_from_angles(x[:, col:col + n_ang])
            return r3 * t2[:, None] * t1, r4 * t3[:, None] * t1
    elif confounder_mode == "vector_u":
        def ball_cols(r):
            if r <= 0:
                return 0
            return 1 if q == 1 else q

        n3, n4 = ball_cols(r3), ball_cols(r4)
        if q == 1:
            lo += [-1.0] * n3 + [-1.0] * n4
            hi += [1.0] * n3 + [1.0] * n4
        else:
            for present in (r3 > 0, r4 > 0):
                if present:
                    lo.append(0.0); hi.append(1.0)
                    alo, ahi = _angle_bounds(q)
                    lo += alo; hi += ahi

        def ball(x, r):
            k = x.shape[0]
            if r <= 0:
                return np.zeros((k, q)), 0
            if q == 1:
                return r * x[:, :1], 1
            radius = x[:, 0]
            direction = _sphere_from_angles(x[:, 1:q])
            return r * radius[:, None] * direction, q

        def to_phi(x: np.ndarray):
            x = np.atleast_2d(x)
            phi3, used = ball(x, r3)
            phi4, _ = ball(x[:, used:], r4)
            return phi3, phi4
    else:
        raise ValueError(f"unknown confounder_mode {confounder_mode!r}")

    # shared-direction corner candidates (feasible in both modes)
    _, v1, v2, _ = full_coeffs
    dirs = []
    for v in (v1, v2):
        nv = np.linalg.norm(v)
        if nv > 0:
            dirs.append(v / nv)
    if not dirs:
        dirs = [np.eye(q)[0]]
    corners = []
    for d in dirs:
        for s3 in (-1.0, 0.0, 1.0):
            for s4 in (-1.0, 0.0, 1.0):
                corners.append((s3 * r3 * d[None, :], s4 * r4 * d[None, :]))
    return _PhiBox(lower=np.array(lo), upper=np.array(hi), to_phi=to_phi,
                   corner_phis=corners)


# ---------------------------------------------------------------------------
# Minimization over a phi box.
# ---------------------------------------------------------------------------

def _minimize_over_box(box: _PhiBox | None, value_fn, q: int, kind: str,
                       budget: int, polish: bool, seed_phis=()):
    """Minimum of value_fn over the box plus candidate phis; returns
    (value, phi pair)."""
    da = 1 if kind == "direct" else q
    zero = (np.zeros((1, da)), np.zeros((1, q)))
    candidates = [zero] + list(box.corner_phis if box is not None else []) \
        + [(np.atleast_2d(a), np.atleast_2d(b)) for a, b in seed_phis]

    best_val = np.inf
    best_phi = zero
    if box is not None and box.dims > 0:
        def objective(x):
            phi_a, phi_b = box.to_phi(x)
            return value_fn(phi_a, phi_b)

        res = direct_optimize(objective, box.lower, box.upper, budget=budget,
                              vectorized=True)
        x_best = res.x
        if polish:
            def scalar_obj(x):
                return float(objective(x[None, :])[0])

            pol = minimize(scalar_obj, x_best, method="Nelder-Mead",
                           bounds=Bounds(box.lower, box.upper),
                           options={"maxfev": 150 * box.dims, "xatol": 1e-7,
                                    "fatol": 1e-12})
            if pol.fun < res.fun:
                x_best = np.clip(pol.x, box.lower, box.upper)
        phi_a, phi_b = box.to_phi(x_best[None, :])
        val = float(value_fn(phi_a, phi_b)[0])
        best_val, best_phi = val, (phi_a, phi_b)

    for phi_a, phi_b in candidates:
        val = float(value_fn(phi_a, phi_b)[0])
        if val < best_val:
            best_val, best_phi = val, (phi_a, phi_b)
    return best_val, best_phi


def _resolve_rhos(rho, rho_y, rho_m, rho_a, randomized):
    rho_y = rho if rho_y is None else rho_y
    rho_m = rho if rho_m is None else rho_m
    rho_a = rho if rho_a is None else rho_a
    if randomized:
        rho_a = 0.0
    for name, val in (("rho_y", rho_y), ("rho_m", rho_m), ("rho_a", rho_a)):
        if not 0.0 <= val < 1.0:
            raise ValueError(f"{name} must lie in [0, 1)")
    return rho_y, rho_m, rho_a


def min_t_direct(mm: MediationMoments, plan: BootstrapPlan, rho: float,
                 confounder_mode: str = "scalar_u", *, rho_y=None, rho_m=None,
                 rho_a=None, randomized: bool = False,
                 budget: int = DEFAULT_BUDGET, polish: bool = True) -> float:
    """Worst (minimum) t statistic for the direct effect under the strength
    bound rho. Scalar and vector confounders share the same feasible range,
    so ``confounder_mode`` does not change the result."""
    if confounder_mode not in ("scalar_u", "vector_u"):
        raise ValueError(f"unknown confounder_mode {confounder_mode!r}")
    obj = EffectObjective.for_direct(mm, plan)
    rho_y, rho_m, rho_a = _resolve_rhos(rho, rho_y, rho_m, rho_a, randomized)
    box = _direct_box(mm.q, rho_y, rho_m, rho_a, obj.full)
    val, _ = _minimize_over_box(box, obj.t_values, mm.q, "direct", budget, polish)
    return val


def min_t_indirect(mm: MediationMoments, plan: BootstrapPlan, rho: float,
                   confounder_mode: str = "scalar_u", *, rho_y=None, rho_m=None,
                   rho_a=None, randomized: bool = False,
                   budget: int = DEFAULT_BUDGET, polish: bool = True) -> float:
    """Worst (minimum) t statistic for the indirect effect under the strength
    bound rho, for a scalar or vector confounder."""
    obj = EffectObjective.for_indirect(mm, plan)
    rho_y, rho_m, rho_a = _resolve_rhos(rho, rho_y, rho_m, rho_a, randomized)
    box = _indirect_box(mm.q, rho_y, rho_m, rho_a, confounder_mode, obj.full)
    val, _ = _minimize_over_box(box, obj.t_values, mm.q, "indirect", budget, polish)
    return val


@dataclass(frozen=True)
class RVReport:
    """Robustness values plus the strength-to-worst-t curve behind them."""

    rv_estimate: float
    rv_ci: float
    curve: list               # [(rho, min_t)]
    confounder_mode: str
    effect_kind: str
    sign_flip: bool
    observed_t: float
    argmins: dict = field(repr=False, default_factory=dict)  # rho -> phi pair


def _build_objective(mm, plan, effect_kind):
    if effect_kind == "direct":
        return EffectObjective.for_direct(mm, plan)
    if effect_kind == "indirect":
        return EffectObjective.for_indirect(mm, plan)
    raise ValueError(f"unknown effect_kind {effect_kind!r}")


def _box_for(obj, q, rho, confounder_mode, randomized):
    rho_y, rho_m, rho_a = _resolve_rhos(rho, None, None, None, randomized)
    if obj.kind == "direct":
        return _direct_box(q, rho_y, rho_m, rho_a, obj.full)
    return _indirect_box(q, rho_y, rho_m, rho_a, confounder_mode, obj.full)


def robustness_value(mm: MediationMoments, plan: BootstrapPlan,
                     effect_kind: str, rho_grid=None,
                     confounder_mode: str = "scalar_u",
                     randomized: bool = False, budget: int = DEFAULT_BUDGET,
                     ci_threshold: float = 1.96, polish: bool = True,
                     full_curve: bool = False, seed_curve=None) -> RVReport:
    """Robustness values for the point estimate (t hits 0) and the CI
    (t hits ``ci_threshold``), by grid search over the strength bound.

    The curve is swept in increasing rho with the previous argmin reused as a
    candidate, which makes the reported curve exactly non-increasing. The
    sweep stops once both robustness values are resolved unless
    ``full_curve`` is set. A robustness value of 1.0 means the grid never
    brought the worst t below the threshold.
    """
    grid = [float(r) for r in (DEFAULT_RHO_GRID if rho_grid is None else rho_grid)]
    if any(not 0.0 < r < 1.0 for r in grid) or any(
            b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("rho_grid must be strictly increasing inside (0, 1)")
    obj = _build_objective(mm, plan, effect_kind)
    t_obs = obj.observed_t()

    curve = []
    argmins = {}
    seeds = []
    rv_estimate = 0.0 if t_obs <= 0.0 else None
    rv_ci = 0.0 if t_obs <= ci_threshold else None
    last = t_obs
    for rho in grid:
        if rv_estimate is not None and rv_ci is not None and not full_curve:
            break
        extra = []
        if seed_curve is not None and rho in seed_curve:
            extra.append(seed_curve[rho])
        box = _box_for(obj, mm.q, rho, confounder_mode, randomized)
        val, phi = _minimize_over_box(box, obj.t_values, mm.q, obj.kind,
                                      budget, polish, seed_phis=seeds + extra)
        val = min(val, last)
        last = val
        seeds = [phi]
        argmins[rho] = phi
        curve.append((rho, val))
        if rv_ci is None and val <= ci_threshold:
            rv_ci = rho
        if rv_estimate is None and val <= 0.0:
            rv_estimate = rho
    if rv_estimate is None:
        rv_estimate = RV_NOT_ATTAINED
    if rv_ci is None:
        rv_ci = RV_NOT_ATTAINED
    return RVReport(rv_estimate=float(rv_estimate), rv_ci=float(rv_ci),
                    curve=curve, confounder_mode=confounder_mode,
                    effect_kind=effect_kind, sign_flip=obj.flip < 0,
                    observed_t=t_obs, argmins=argmins)


def rv_estimate_only(mm: MediationMoments, effect_kind: str, rho_grid=None,
                     confounder_mode: str = "scalar_u",
                     randomized: bool = False, budget: int = 1500,
                     polish: bool = True) -> float:
    """Robustness value for the point estimate alone (threshold 0), without
    a bootstrap plan: the worst estimate is minimized directly. Uses
    bisection over the grid, which the monotone worst-estimate curve allows."""
    grid = [float(r) for r in (DEFAULT_RHO_GRID if rho_grid is None else rho_grid)]
    obj = _build_objective(mm, None, effect_kind)
    zero = (np.zeros((1, 1 if obj.kind == "direct" else mm.q)), np.zeros((1, mm.q)))
    if float(obj.estimate_values(*zero)[0]) <= 0.0:
        return 0.0

    def min_est(rho) -> float:
        box = _box_for(obj, mm.q, rho, confounder_mode, randomized)
        val, _ = _minimize_over_box(box, obj.estimate_values, mm.q, obj.kind,
                                    budget, polish)
        return val

    lo, hi = 0, len(grid) - 1
    if min_est(grid[hi]) > 0.0:
        return RV_NOT_ATTAINED
    while lo < hi:
        mid = (lo + hi) // 2
        if min_est(grid[mid]) <= 0.0:
            hi = mid
        else:
            lo = mid + 1
    return grid[lo]
