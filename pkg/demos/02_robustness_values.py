"""Robustness values: how much confounding would overturn the conclusions?

For each strength bound rho we minimize the t statistic of each effect over
every confounder whose three partial-correlation channels are bounded by
sqrt(rho). The robustness value is the smallest rho that drags the estimate
to zero (or the 95% interval onto zero).
"""

import numpy as np

from bksens import MediationData, bootstrap_moments, fit_observed, robustness_value

rng = np.random.default_rng(11)
n = 400
covariate = rng.normal(size=n)
exposure = 0.5 * covariate + rng.normal(size=n)
mediator = 0.8 * exposure + rng.normal(size=n)
outcome = 0.4 * exposure + 0.6 * mediator + 0.5 * covariate + rng.normal(size=n)

data = MediationData.from_arrays(y=outcome, a=exposure, m=mediator[:, None],
                                 c=covariate[:, None])
mm = fit_observed(data)
plan = bootstrap_moments(data, n_resamples=500, seed=3)

print("=" * 72)
print(f"{'':12s}{'Est.':>9s}{'t':>8s}{'RV for Est.':>14s}{'RV for 95% CI':>16s}")
print("=" * 72)
reports = {}
for kind in ("direct", "indirect"):
    rep = robustness_value(mm, plan, kind, budget=2000)
    reports[kind] = rep
    est = mm.theta1_obs if kind == "direct" else float(mm.theta3_obs @ mm.beta1_obs)
    print(f"{kind:12s}{est:9.3f}{rep.observed_t:8.2f}"
          f"{rep.rv_estimate:14.2f}{rep.rv_ci:16.2f}")

print("\nReading: overturning the direct-effect point estimate needs a "
      "confounder that")
print(f"explains at least {100 * reports['direct'].rv_estimate:.0f}% of the "
      "residual variability in every channel;")
print(f"moving its CI onto zero already happens at "
      f"{100 * reports['direct'].rv_ci:.0f}%.")

print("\nstrength -> worst t curve (first rows)")
print(f"{'rho':>6s} {'min_t_direct':>14s} {'min_t_indirect':>16s}")
direct_curve = dict(reports["direct"].curve)
indirect_curve = dict(reports["indirect"].curve)
for rho in sorted(set(direct_curve) | set(indirect_curve))[:12]:
    d = direct_curve.get(rho)
    i = indirect_curve.get(rho)
    print(f"{rho:6.2f} {d if d is None else f'{d:14.3f}'} "
          f"{i if i is None else f'{i:16.3f}'}")
print("(use the CLI `bksens rv --data ... --out report.json` to export the "
      "full curve as CSV)")
