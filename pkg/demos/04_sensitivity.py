"""Parameter derivatives from one Krylov run on a block operator."""

# %%
import numpy as np

from krylovperf import MeasureSpec, build_model, direction_matrix, evaluate, measure_sensitivity
from krylovperf.models import with_params

case = build_model("queue", n=256)
spec = MeasureSpec("InstReward", case.pi0, 1.0, None, case.reward)
E = direction_matrix(case.model, "rho2")
res = measure_sensitivity(case.generator, spec, E)
print("E[clients]        ", res.value)
print("d/d rho2          ", res.derivative)

# %%
# central differences converge to it at rate h^2
def value(rho2):
    c = build_model("queue", n=256, rho2=rho2)
    return evaluate(c.generator, MeasureSpec("InstReward", c.pi0, 1.0, None, c.reward)).value


for h in (1e-2, 1e-3, 1e-4):
    fd = (value(1 + h) - value(1 - h)) / (2 * h)
    print(f"h = {h:.0e}  fd = {fd:.12f}  rel err {abs(fd - res.derivative) / res.derivative:.1e}")

# %%
# attack model: how the mean time to security failure reacts to the compromise rate
att = build_model("attack", N=20)
mttf = MeasureSpec("MTTF_Infinite", att.pi0, None, att.partitions["absorbing"])
for p in ("lambda_c", "lambda_f", "P_fn"):
    d = measure_sensitivity(att.generator, mttf, direction_matrix(att.model, p))
    print(f"dMTTF/d{p:8s} = {d.derivative: .6f}   (MTTF {d.value:.6f})")
