"""Measures on chains small enough to solve by hand."""

# %%
import math

import numpy as np

from krylovperf import MeasureSpec, StatePartition, build_generator, evaluate

# two states: up (0) fails at rate 1, down (1) is repaired at rate 2
Q = build_generator(2, [(0, 1, 1.0), (1, 0, 2.0)])
up = StatePartition.from_up(Q, [0])
pi0 = np.array([1.0, 0.0])
print(Q.toarray())

# %%
# point availability A(t) = 2/3 + e^{-3t}/3
for t in (0.1, 1.0, 5.0):
    a = evaluate(Q, MeasureSpec("InstAvailability", pi0, t, up)).value
    print(f"A({t}) = {a:.12f}   closed form {2 / 3 + math.exp(-3 * t) / 3:.12f}")

# %%
# expected up time over [0, 1]: 2/3 + (1 - e^{-3})/9
u = evaluate(Q, MeasureSpec("Uptime", pi0, 1.0, up)).value
print(f"uptime(1) = {u:.12f}   closed form {2 / 3 + (1 - math.exp(-3)) / 9:.12f}")

# %%
# a single up state failing at rate lam into an absorbing down state
lam = 2.0
Q1 = build_generator(2, [(0, 1, lam)])
part = StatePartition.from_up(Q1, [0])
print("MTTF            ", evaluate(Q1, MeasureSpec("MTTF_Infinite", pi0, None, part)).value, 1 / lam)
print("R(1)            ", evaluate(Q1, MeasureSpec("InstReliability", pi0, 1.0, part)).value,
      math.exp(-lam))
print("failures in [0,1]", evaluate(Q1, MeasureSpec("ExpectedFailures", pi0, 1.0, part)).value,
      1 - math.exp(-lam))
