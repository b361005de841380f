"""Kernel |p - p'|^2: the closed even-moment hierarchy.

Integrates M_0, M_2, M_4, M_6 in dimension 1, compares them with the closed
forms and shows the t^(3/2) growth of M_6 with its leading coefficient.
"""

import numpy as np

from agglab.moment_lab import Gamma2State, gamma2_closed_form, integrate_gamma2, m6_closed_form

# moments of a centred Gaussian with variance 1/2 and unit number
M0, M2, M4, M6 = 1.0, 0.5, 0.75, 1.875
series = integrate_gamma2(Gamma2State(1, [M0, M2, M4, M6]), 50.0, 0.005, record_every=1000)
t = series.t_grid
cf = gamma2_closed_form(M0, M2, M4, 1.0, t)

print(f"{'t':>5} {'M0':>10} {'M2':>10} {'M4':>10} {'M6':>12} {'M6 exact':>12}")
m6 = m6_closed_form(M2, M4, M6, t)
for i in range(0, len(t), 2):
    print(f"{t[i]:5.0f} {series[(0, 0)][i]:10.6f} {series[(0, 2)][i]:10.6f} "
          f"{series[(0, 4)][i]:10.6f} {series[(0, 6)][i]:12.4f} {m6[i]:12.4f}")

err = max(np.max(np.abs(series[(0, 0)] / cf["M0"] - 1)),
          np.max(np.abs(series[(0, 4)] / cf["M4"] - 1)))
print(f"max relative gap to closed forms (M0, M4): {err:.1e}")

# M6 / t^(3/2) approaches (M6 - M4^2/M2) (2 M2)^(3/2)
coef = (M6 - M4 * M4 / M2) * (2 * M2) ** 1.5
print(f"M6/t^1.5 at t=50: {series[(0, 6)][-1] / 50 ** 1.5:.4f}, limit {coef:.4f}")
