"""Formal benchmarking: bound the confounder against an observed covariate.

The confounder's strengths are capped at multiples (k ratios) of the observed
strengths of one covariate, measured after leaving that covariate out. The
leave-one-out parameters convert exactly to the natural sensitivity
parameters given observed moments, so worst-case estimates and t statistics
are global minimizations over a small box, sharing the optimizer and the
common-random-numbers bootstrap with the robustness-value machinery.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BoundaryR, DegenerateAnchor, DimensionMismatch, RankDeficient
from .inference import BootstrapPlan
from .linalg import r_matrix, sym_inv_sqrt, sym_sqrt, residualize, sample_cov
from .mediation import MediationData, NaturalSensitivity, fit_observed, observed_indirect
from .optimize import direct_optimize
from .robustness import _angle_bounds, _sphere_from_angles

ANCHOR_TOL = 1e-12
R_CLAMP = 1.0 - 1e-9


@dataclass(frozen=True)
class BenchmarkSpec:
    """Caps on the confounder-to-covariate strength ratios."""

    j: int                     # index into the user covariates (0-based)
    k_a_bound: float = 1.0
    k_m_bound: float = 1.0
    k_y_bound: float = 1.0

    def __post_init__(self):
        if min(self.k_a_bound, self.k_m_bound, self.k_y_bound) < 0:
            raise ValueError("k bounds must be nonnegative")


@dataclass(frozen=True)
class BenchmarkMoments:
    """Observed anchors for one covariate: its partial correlations with
    exposure, mediators and outcome, plus the covariance mixing block."""

    j: int
    r_a_cj: float             # R of a ~ c_j given c_-j
    r_m_cj: np.ndarray        # (q,) R of m ~ c_j given (a, c_-j)
    r_y_cj: float             # R of y ~ c_j given (a, m, c_-j)
    mix_leave_j: np.ndarray   # cov(m|a,c)^{-1/2} cov(m|a,c_-j)^{1/2}
    reference_r2: dict


def _leave_j_design(data: MediationData, j: int):
    if not 0 <= j < data.p_user:
        raise DimensionMismatch(f"covariate index {j} out of range (p={data.p_user})")
    cj = data.c[:, j + 1]
    c_minus = np.delete(data.c, j + 1, axis=1)  # keeps the intercept
    return cj, c_minus


def benchmark_moments(data: MediationData, j: int) -> BenchmarkMoments:
    """Observed anchors for covariate ``j`` computed from the data."""
    design = np.column_stack([data.a, data.m, data.c])
    sv = np.linalg.svd(design, compute_uv=False)
    if sv[-1] <= 1e-10 * sv[0]:
        raise RankDeficient("the (exposure, mediators, covariates) design is "
                            "rank deficient; drop redundant covariates first")
    cj, c_minus = _leave_j_design(data, j)
    ac_minus = np.column_stack([data.a, c_minus])
    amc_minus = np.column_stack([data.a, data.m, c_minus])
    r_a_cj = float(r_matrix(data.a, cj, c_minus)[0, 0])
    r_m_cj = r_matrix(data.m, cj, ac_minus)[:, 0]
    r_y_cj = float(r_matrix(data.y, cj, amc_minus)[0, 0])
    ac_full = np.column_stack([data.a, data.c])
    cov_m_ac = sample_cov(residualize(data.m, ac_full))
    cov_m_ac_minus = sample_cov(residualize(data.m, ac_minus))
    mix = sym_inv_sqrt(cov_m_ac) @ sym_sqrt(cov_m_ac_minus)
    return BenchmarkMoments(
        j=j, r_a_cj=r_a_cj, r_m_cj=r_m_cj, r_y_cj=r_y_cj, mix_leave_j=mix,
        reference_r2={
            "r2_a_cj": r_a_cj ** 2,
            "r2_m_cj": float(r_m_cj @ r_m_cj),
            "r2_y_cj": r_y_cj ** 2,
        },
    )


def _convert_leave_j(r_a_cj, r_m_cj, r_y_cj, mix, r_a_lj, r_m_lj, r_y_lj):
    """Leave-one-covariate-out parameters -> natural parameters.

    All anchor arguments may carry a leading resample axis; returns
    (r_y, r_m, r_a) with matching shapes, or None when any intermediate
    quantity leaves its open ball.
    """
    den_a2 = 1.0 - r_a_cj ** 2
    nm_cj2 = np.sum(r_m_cj * r_m_cj, axis=-1)
    den_y2 = 1.0 - r_y_cj ** 2
    if np.any(den_a2 <= ANCHOR_TOL) or np.any(1.0 - nm_cj2 <= ANCHOR_TOL) \
            or np.any(den_y2 <= ANCHOR_TOL):
        raise DegenerateAnchor("an observed anchor is numerically on the unit sphere")

    if abs(r_a_lj) >= 1.0 or abs(r_y_lj) >= 1.0 or np.linalg.norm(r_m_lj) >= 1.0:
        return None
    r_cj_u_ac = -(r_a_cj * r_a_lj) / np.sqrt((1.0 - r_a_lj ** 2) * den_a2)
    if np.any(np.abs(r_cj_u_ac) >= R_CLAMP):
        return None
    r_a_nat = r_a_lj / np.sqrt(den_a2)
    if np.any(np.abs(r_a_nat) >= R_CLAMP):
        return None

    num_m = r_m_lj - r_m_cj * r_cj_u_ac[..., None]
    r_m_nat = np.einsum("...ij,...j->...i", mix, num_m) \
        / np.sqrt(1.0 - r_cj_u_ac ** 2)[..., None]
    if np.any(np.sum(r_m_nat * r_m_nat, axis=-1) >= R_CLAMP ** 2):
        return None

    nm_lj2 = float(r_m_lj @ r_m_lj)
    r_cj_u_amc = (r_cj_u_ac - r_m_cj @ r_m_lj) / np.sqrt(
        (1.0 - nm_cj2) * (1.0 - nm_lj2))
    if np.any(np.abs(r_cj_u_amc) >= R_CLAMP):
        return None
    r_y_nat = (r_y_lj - r_y_cj * r_cj_u_amc) / np.sqrt(
        den_y2 * (1.0 - r_cj_u_amc ** 2))
    if np.any(np.abs(r_y_nat) >= R_CLAMP):
        return None
    return r_y_nat, r_m_nat, r_a_nat


def natural_from_benchmark(bm: BenchmarkMoments, r_a_leave_j: float,
                           r_m_leave_j, r_y_leave_j: float) -> NaturalSensitivity:
    """Map prescribed leave-one-out parameters to the natural triple."""
    r_m_leave_j = np.atleast_1d(np.asarray(r_m_leave_j, dtype=float))
    out = _convert_leave_j(bm.r_a_cj, bm.r_m_cj, bm.r_y_cj, bm.mix_leave_j,
                           float(r_a_leave_j), r_m_leave_j, float(r_y_leave_j))
    if out is None:
        raise BoundaryR("leave-one-out parameters map outside the feasible region")
    r_y, r_m, r_a = out
    return NaturalSensitivity(r_y=float(r_y), r_m=np.asarray(r_m, dtype=float),
                              r_a=float(r_a))


# ---------------------------------------------------------------------------
# Vectorized natural-parameter estimators over resamples.
# ---------------------------------------------------------------------------

@dataclass
class _ResampleStacks:
    """Per-resample moments and anchors used inside the worst-case search."""

    theta1: np.ndarray        # (B,)
    scale_direct: np.ndarray  # (B,)
    rhat: np.ndarray          # (B, q)
    mix_c_ac: np.ndarray      # (B, q, q)
    beta1: np.ndarray         # (B, q)
    theta3: np.ndarray        # (B, q)
    cmac_sqrt: np.ndarray     # (B, q, q)
    cmac_inv_sqrt: np.ndarray  # (B, q, q)
    sd_ac: np.ndarray         # (B,)
    sd_y_amc: np.ndarray      # (B,)
    anchor_a: np.ndarray      # (B,)
    anchor_m: np.ndarray      # (B, q)
    anchor_y: np.ndarray      # (B,)
    anchor_mix: np.ndarray    # (B, q, q)


def _stack_for(data: MediationData, j: int, moments, indices) -> _ResampleStacks:
    rows = []
    for mm, idx in zip(moments, indices):
        sub = data.subset(idx) if idx is not None else data
        bm = benchmark_moments(sub, j)
        rows.append((mm, bm))
    return _ResampleStacks(
        theta1=np.array([m.theta1_obs for m, _ in rows]),
        scale_direct=np.array([np.sqrt(m.var_y_res_amc / m.var_a_res_mc)
                               for m, _ in rows]),
        rhat=np.vstack([m.r_m_a_c for m, _ in rows]),
        mix_c_ac=np.stack([m.mix_c_ac for m, _ in rows]),
        beta1=np.vstack([m.beta1_obs for m, _ in rows]),
        theta3=np.vstack([m.theta3_obs for m, _ in rows]),
        cmac_sqrt=np.stack([m.cov_m_res_ac_sqrt for m, _ in rows]),
        cmac_inv_sqrt=np.stack([m.cov_m_res_ac_inv_sqrt for m, _ in rows]),
        sd_ac=np.array([np.sqrt(m.var_a_res_c) for m, _ in rows]),
        sd_y_amc=np.array([np.sqrt(m.var_y_res_amc) for m, _ in rows]),
        anchor_a=np.array([b.r_a_cj for _, b in rows]),
        anchor_m=np.vstack([b.r_m_cj for _, b in rows]),
        anchor_y=np.array([b.r_y_cj for _, b in rows]),
        anchor_mix=np.stack([b.mix_leave_j for _, b in rows]),
    )


def _direct_estimates(st: _ResampleStacks, r_y, r_m, r_a) -> np.ndarray:
    nr_hat2 = np.sum(st.rhat * st.rhat, axis=-1)
    nrm2 = np.sum(r_m * r_m, axis=-1)
    term1 = r_a * np.sqrt(1.0 - nr_hat2) / np.sqrt((1.0 - r_a ** 2) * (1.0 - nrm2))
    inner = np.einsum("bi,bij,bj->b", st.rhat, st.mix_c_ac, r_m)
    term2 = inner / np.sqrt((1.0 - nr_hat2) * (1.0 - nrm2))
    return st.theta1 - r_y * (term1 - term2) * st.scale_direct


def _indirect_estimates(st: _ResampleStacks, r_y, r_m, r_a) -> np.ndarray:
    nrm2 = np.sum(r_m * r_m, axis=-1)
    odds_a = r_a / np.sqrt(1.0 - r_a ** 2)
    beta_u = st.beta1 - odds_a[:, None] * np.einsum(
        "bij,bj->bi", st.cmac_sqrt, r_m) / st.sd_ac[:, None]
    theta_u = st.theta3 - (r_y * st.sd_y_amc / np.sqrt(1.0 - nrm2))[:, None] \
        * np.einsum("bij,bj->bi", st.cmac_inv_sqrt, r_m)
    return np.einsum("bi,bi->b", theta_u, beta_u)


@dataclass(frozen=True)
class WorstCase:
    value: float
    t_stat: float | None
    leave_j: dict
    natural: NaturalSensitivity
    k_ratios: dict


@dataclass(frozen=True)
class BenchmarkResult:
    worst_estimate: WorstCase
    worst_t: WorstCase | None
    observed_estimate: float
    observed_t: float | None
    spec: BenchmarkSpec


def _radii(bm: BenchmarkMoments, spec: BenchmarkSpec) -> tuple[float, float, float]:
    ra = min(np.sqrt(spec.k_a_bound) * abs(bm.r_a_cj), 0.999)
    rm = min(np.sqrt(spec.k_m_bound) * float(np.linalg.norm(bm.r_m_cj)), 0.999)
    ry = min(np.sqrt(spec.k_y_bound) * abs(bm.r_y_cj), 0.999)
    return ra, rm, ry


def _worst_search(data, mm, bm, spec, effect_kind, stacks, flip, budget):
    """Minimize flip * estimate (or t when stacks carry resamples) over the
    capped leave-one-out box; returns (value, argmin leave-j triple)."""
    q = mm.q
    ra_rad, rm_rad, ry_rad = _radii(bm, spec)
    full_stack = _stack_for(data, spec.j, [mm], [None])
    estimates = _direct_estimates if effect_kind == "direct" else _indirect_estimates

    def value_of(r_a_lj, r_m_lj, r_y_lj):
        conv0 = _convert_leave_j(full_stack.anchor_a, full_stack.anchor_m,
                                 full_stack.anchor_y, full_stack.anchor_mix,
                                 r_a_lj, r_m_lj, r_y_lj)
        if conv0 is None:
            return np.inf
        e0 = float(estimates(full_stack, *conv0)[0])
        if stacks is None:
            return flip * e0
        conv = _convert_leave_j(stacks.anchor_a, stacks.anchor_m, stacks.anchor_y,
                                stacks.anchor_mix, r_a_lj, r_m_lj, r_y_lj)
        if conv is None:
            return np.inf
        se = float(estimates(stacks, *conv).std(ddof=1))
        return flip * e0 / se

    # box: scalar leave-j parameters plus a ball for the mediator block
    lo, hi = [], []
    has_a, has_m, has_y = ra_rad > 0, rm_rad > 0, ry_rad > 0
    if has_a:
        lo.append(-ra_rad); hi.append(ra_rad)
    if has_m:
        if q == 1:
            lo.append(-rm_rad); hi.append(rm_rad)
        else:
            lo.append(0.0); hi.append(rm_rad)
            alo, ahi = _angle_bounds(q)
            lo += alo; hi += ahi
    if has_y:
        lo.append(-ry_rad); hi.append(ry_rad)

    def unpack(x):
        col = 0
        r_a_lj = 0.0
        if has_a:
            r_a_lj = float(x[col]); col += 1
        r_m_lj = np.zeros(q)
        if has_m:
            if q == 1:
                r_m_lj = np.array([x[col]]); col += 1
            else:
                radius = x[col]; col += 1
                direction = _sphere_from_angles(np.asarray(x[col:col + q - 1])[None, :])[0]
                r_m_lj = radius * direction
                col += q - 1
        r_y_lj = 0.0
        if has_y:
            r_y_lj = float(x[col]); col += 1
        return r_a_lj, r_m_lj, r_y_lj

    best_val, best_params = value_of(0.0, np.zeros(q), 0.0), (0.0, np.zeros(q), 0.0)
    if lo:
        def objective(x):
            return value_of(*unpack(x))

        res = direct_optimize(objective, np.array(lo), np.array(hi), budget=budget)
        params = unpack(res.x)
        val = value_of(*params)
        if val < best_val:
            best_val, best_params = val, params
        # deterministic corner sweep over the scalar channels
        m_dirs = [np.zeros(q)]
        if has_m:
            nv = np.linalg.norm(bm.r_m_cj)
            base_dir = bm.r_m_cj / nv if nv > 0 else np.eye(q)[0]
            m_dirs += [rm_rad * base_dir, -rm_rad * base_dir]
        for sa in ((-ra_rad, 0.0, ra_rad) if has_a else (0.0,)):
            for sy in ((-ry_rad, 0.0, ry_rad) if has_y else (0.0,)):
                for dm in m_dirs:
                    val = value_of(sa, dm, sy)
                    if val < best_val:
                        best_val, best_params = val, (sa, dm.copy(), sy)
    return best_val, best_params


def _k_ratios(bm: BenchmarkMoments, params) -> dict:
    r_a_lj, r_m_lj, r_y_lj = params

    def ratio(num, den):
        return float(num / den) if den > 0 else 0.0

    return {
        "k_a": ratio(r_a_lj ** 2, bm.r_a_cj ** 2),
        "k_m": ratio(float(r_m_lj @ r_m_lj), float(bm.r_m_cj @ bm.r_m_cj)),
        "k_y": ratio(r_y_lj ** 2, bm.r_y_cj ** 2),
    }


def prepare_benchmark_stacks(data: MediationData, j: int,
                             plan: BootstrapPlan) -> _ResampleStacks:
    """Per-resample anchors and moments for covariate ``j``; reusable across
    worst-case searches on the same plan (delta sweeps in particular)."""
    return _stack_for(data, j, plan.moments, plan.indices)


def benchmark_worst(data: MediationData, spec: BenchmarkSpec,
                    plan: BootstrapPlan | None = None,
                    effect_kind: str = "direct",
                    budget: int = 1500, stacks=None) -> BenchmarkResult:
    """Worst point estimate (and worst t, when a plan is given) under the
    benchmark caps for one covariate."""
    if effect_kind not in ("direct", "indirect"):
        raise ValueError(f"unknown effect_kind {effect_kind!r}")
    mm = fit_observed(data)
    bm = benchmark_moments(data, spec.j)
    observed = mm.theta1_obs if effect_kind == "direct" else observed_indirect(mm)
    flip = -1.0 if observed < 0 else 1.0

    val_e, params_e = _worst_search(data, mm, bm, spec, effect_kind, None, flip,
                                    budget)
    worst_est = WorstCase(
        value=flip * val_e, t_stat=None, natural=natural_from_benchmark(bm, params_e[0], params_e[1], params_e[2]),
        leave_j={"r_a": params_e[0], "r_m": params_e[1].tolist(), "r_y": params_e[2]},
        k_ratios=_k_ratios(bm, params_e))

    worst_t = None
    observed_t = None
    if plan is not None:
        if stacks is None:
            stacks = prepare_benchmark_stacks(data, spec.j, plan)
        estimates = _direct_estimates if effect_kind == "direct" else _indirect_estimates
        zeros = (np.zeros(plan.n_resamples), np.zeros((plan.n_resamples, mm.q)),
                 np.zeros(plan.n_resamples))
        se0 = float(estimates(stacks, *zeros).std(ddof=1))
        observed_t = observed / se0
        val_t, params_t = _worst_search(data, mm, bm, spec, effect_kind, stacks,
                                        flip, budget)
        nat_t = natural_from_benchmark(bm, params_t[0], params_t[1], params_t[2])
        full_stack = _stack_for(data, spec.j, [mm], [None])
        conv = _convert_leave_j(full_stack.anchor_a, full_stack.anchor_m,
                                full_stack.anchor_y, full_stack.anchor_mix,
                                *params_t)
        est_at_t = float(estimates(full_stack, *conv)[0])
        worst_t = WorstCase(
            value=est_at_t, t_stat=flip * val_t, natural=nat_t,
            leave_j={"r_a": params_t[0], "r_m": params_t[1].tolist(),
                     "r_y": params_t[2]},
            k_ratios=_k_ratios(bm, params_t))
    return BenchmarkResult(worst_estimate=worst_est, worst_t=worst_t,
                           observed_estimate=observed, observed_t=observed_t,
                           spec=spec)


def critical_delta(data: MediationData, j: int, effect_kind: str,
                   threshold: float, delta_grid, k_a_bound: float = 0.0,
                   plan: BootstrapPlan | None = None,
                   budget: int = 1200):
    """Smallest multiplier on the covariate's strength that drags the effect
    past the threshold (0 for the estimate, 1.96 for the CI).

    Returns (delta, curve) where curve lists (delta, worst value); delta is
    ``math.inf`` when no grid point attains the threshold. The mediator and
    outcome caps scale with delta; the exposure cap stays at ``k_a_bound``.
    """
    grid = [float(d) for d in delta_grid]
    if any(d <= 0 for d in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("delta_grid must be positive and strictly increasing")
    use_t = threshold > 0
    if use_t and plan is None:
        raise ValueError("a bootstrap plan is required for a t-based threshold")
    mm = fit_observed(data)
    observed = mm.theta1_obs if effect_kind == "direct" else observed_indirect(mm)
    flip = -1.0 if observed < 0 else 1.0
    stacks = prepare_benchmark_stacks(data, j, plan) if use_t else None
    if use_t:
        zero_spec = BenchmarkSpec(j=j, k_a_bound=0.0, k_m_bound=0.0, k_y_bound=0.0)
        res0 = benchmark_worst(data, zero_spec, plan=plan,
                               effect_kind=effect_kind, budget=budget,
                               stacks=stacks)
        if flip * res0.observed_t <= threshold:
            return 0.0, [(0.0, res0.observed_t)]
    elif flip * observed <= threshold:
        return 0.0, [(0.0, observed)]

    curve = []
    hit = math.inf
    for delta in grid:
        spec = BenchmarkSpec(j=j, k_a_bound=k_a_bound, k_m_bound=delta,
                             k_y_bound=delta)
        res = benchmark_worst(data, spec, plan=plan if use_t else None,
                              effect_kind=effect_kind, budget=budget,
                              stacks=stacks)
        if use_t:
            value = res.worst_t.t_stat
        else:
            value = flip * res.worst_estimate.value
        curve.append((delta, value))
        if value <= threshold:
            hit = delta
            break
    return hit, curve
