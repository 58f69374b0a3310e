"""Cost of evaluating the mean queue length as the state space grows."""

# %%
import time

import numpy as np

from krylovperf import MeasureSpec, build_model, evaluate
from krylovperf.cli import fit_loglog_slope

ns, times = [], []
for k in range(10, 19):
    case = build_model("queue", n=2**k)
    spec = MeasureSpec("InstReward", case.pi0, 1.0, None, case.reward)
    t0 = time.perf_counter()
    value = evaluate(case.generator, spec).value
    times.append(time.perf_counter() - t0)
    ns.append(case.n)
    print(f"n = 2^{k:2d}  E[clients at t=1] = {value:.10f}  {times[-1] * 1e3:7.1f} ms")

# %%
# the value does not depend on n once the queue cannot reach its capacity by t
print("log-log slope of time vs n:", round(fit_loglog_slope(ns, times), 2))
print("time per state (us):", np.round(np.array(times) / ns * 1e6, 3))
