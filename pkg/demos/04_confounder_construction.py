"""The construction engine behind the formula guarantees.

Every sensitivity statement in this package is backed by an explicit column:
for any requested strengths strictly inside the unit balls, we can build a
confounder achieving them exactly on the sample, and a regression including
that column reproduces the adjusted estimators to machine precision. This
script makes that concrete.
"""

import numpy as np

from bksens import (
    ConfounderTarget,
    MediationData,
    NaturalSensitivity,
    construct_confounder,
    direct_adjusted,
    fit_observed,
    indirect_adjusted_product,
)
from bksens.linalg import r_matrix

rng = np.random.default_rng(33)
n = 250
covariate = rng.normal(size=n)
exposure = 0.4 * covariate + rng.normal(size=n)
mediators = np.column_stack([
    0.6 * exposure + rng.normal(size=n),
    -0.3 * exposure + rng.normal(size=n),
])
outcome = (0.5 * exposure + mediators @ [0.7, 0.4] + 0.3 * covariate
           + rng.normal(size=n))
data = MediationData.from_arrays(y=outcome, a=exposure, m=mediators,
                                 c=covariate[:, None])

target = ConfounderTarget(r_y=0.35, r_m=np.array([0.25, -0.15]), r_a=-0.4)
u = construct_confounder(data, target)

c_int = data.c
amc = np.column_stack([data.a, data.m, c_int])
ac = np.column_stack([data.a, c_int])
achieved_y = float(r_matrix(data.y, u, amc)[0, 0])
achieved_m = r_matrix(data.m, u, ac)[:, 0]
achieved_a = float(r_matrix(data.a, u, c_int)[0, 0])

print("=" * 70)
print("Requested vs achieved sample strengths")
print("=" * 70)
print(f"outcome  channel: requested {target.r_y:+.6f}  achieved {achieved_y:+.6f}")
print(f"mediator channel: requested {target.r_m[0]:+.6f}, {target.r_m[1]:+.6f}"
      f"  achieved {achieved_m[0]:+.6f}, {achieved_m[1]:+.6f}")
print(f"exposure channel: requested {target.r_a:+.6f}  achieved {achieved_a:+.6f}")

print("\n" + "=" * 70)
print("Adjusted estimators vs regressions that include the constructed column")
print("=" * 70)
mm = fit_observed(data)
s = NaturalSensitivity(r_y=target.r_y, r_m=target.r_m, r_a=target.r_a)
coef_y = np.linalg.lstsq(np.column_stack([data.a, data.m, c_int, u]),
                         data.y, rcond=None)[0]
coef_m = np.linalg.lstsq(np.column_stack([data.a, c_int, u]),
                         data.m, rcond=None)[0]
long_direct = float(coef_y[0])
long_indirect = float(coef_y[1:3] @ coef_m[0])
print(f"direct  : formula {direct_adjusted(mm, s):+.10f}")
print(f"          refit   {long_direct:+.10f}")
print(f"indirect: formula {indirect_adjusted_product(mm, s):+.10f}")
print(f"          refit   {long_indirect:+.10f}")

print("\nBecause the whole feasible region is attainable this way, the "
      "sensitivity bounds are sharp:")
print("no bound reported by the package can be improved without extra "
      "assumptions.")
