"""Restarted Krylov against uniformization on the telecom switching model."""

# %%
import time

from krylovperf import MeasureSpec, build_model, evaluate
from krylovperf.measures import Kind

case = build_model("telecom", n=2047)
print(case.n, "states, ||Q||_1 =", case.generator.norm1())

# %%
# expected time spent in the detected (switching) states over [0, t]
for t in (1.0, 20.0):
    spec = MeasureSpec(Kind.CUMULATIVE_REWARD, case.pi0, t, None, case.reward)
    for method in ("krylov", "uniformization"):
        t0 = time.perf_counter()
        res = evaluate(case.generator, spec, method=method)
        dt = time.perf_counter() - t0
        print(f"t={t:4g} {method:15s} {res.value:.10f}  {dt:.3f} s")

# %%
# uniformization needs about q t steps with q ~ max |Q_ii|; Krylov only needs a few cycles
spec = MeasureSpec(Kind.CUMULATIVE_REWARD, case.pi0, 20.0, None, case.reward)
res = evaluate(case.generator, spec)
print("Krylov cycles:", res.diagnostics.restarts_used, "update norms:",
      ["%.1e" % x for x in res.diagnostics.update_norms])
