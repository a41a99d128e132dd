"""The two-state worked example: one proxy is harmless, the other Goodharts.

A tiny two-state, two-action MDP is enough to watch proxy optimisation go
wrong.  We take a fixed true reward R0 and two proxies: R1 sits close to R0
in the occupancy-projected angle, R2 sits further away.  Sweeping the
optimisation pressure from gentle to near-greedy and plotting the *true*
return of each solved policy shows the signature effect: the close proxy
tracks the true objective all the way up, while the distant proxy rises,
peaks, and then collapses as the last pressure steps trade true reward for
proxy reward.

Run with:  python3 demos/two_state_worked_example.py
"""

import numpy as np

from goodhart import (
    PressureSchedule,
    SolverConfig,
    build_polytope,
    compute_metrics,
    make_m22,
    projected_angle,
    training_curve,
)
from goodhart.envs import M22_R0, M22_R1, M22_R2

env = make_m22()
poly = build_polytope(env.mdp)

# The projected angle is the distance notion that matters: reward components
# invisible to the occupancy polytope are projected away first.
for name, proxy in (("R1", M22_R1), ("R2", M22_R2)):
    angle = projected_angle(poly, M22_R0, proxy)
    print(f"projected angle R0 -> {name}: {angle:.4f} rad")
print()

schedule = PressureSchedule.linspace(0.01, 0.99, 30)
config = SolverConfig(vi_threshold=1e-4)

curves = {}
for name, proxy in (("R0", M22_R0), ("R1", M22_R1), ("R2", M22_R2)):
    curves[name] = training_curve(poly, M22_R0, proxy, schedule, config)

# True return (normalised to [0, 1]) at a few pressures along each sweep.
picks = [0, 9, 19, 25, 28, 29]
header = "  ".join(f"lam={schedule.pressures[i]:.3f}" for i in picks)
print(f"true return under proxy optimisation\n          {header}")
for name, curve in curves.items():
    row = "  ".join(f"{curve.true_returns[i]:9.4f}" for i in picks)
    print(f"proxy {name}  {row}")
print()

# The drop height (peak minus final) separates the two proxies cleanly.
baseline = curves["R0"]
for name in ("R1", "R2"):
    report = compute_metrics(curves[name], baseline)
    peak = float(np.max(curves[name].true_returns))
    print(
        f"proxy {name}: peak true return {peak:.4f} at lam* = "
        f"{report.lambda_star:.4f}, drop height {report.ndh:.4f}"
    )
print()
print("R1 keeps the true return at its maximum; R2 gives back about a fifth")
print("of it once the pressure passes the peak. Same MDP, same true reward,")
print("same optimiser; the only difference is the projected angle.")
