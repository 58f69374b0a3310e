"""The attack/intrusion-detection model and its reachable state space."""

# %%
from krylovperf import MeasureSpec, build_model, evaluate
from krylovperf.models import attack_state_count

small = build_model("attack", N=3)
print(small.n, "states at N=3")
for i, lab in enumerate(small.labels):
    print(i, lab, "reward", small.reward[i])

# %%
for N in (3, 10, 50, 100):
    print(f"N = {N:3d}: {build_model('attack', N=N).n} states (formula {attack_state_count(N)})")

# %%
case = build_model("attack", N=50)
absorbing, failed = case.partitions["absorbing"], case.partitions["failed"]
print("mean time to absorption:", evaluate(case.generator, MeasureSpec("MTTF_Infinite", case.pi0, None, absorbing)).value)
for t in (1.0, 5.0, 10.0, 20.0):
    R = evaluate(case.generator, MeasureSpec("InstReliability", case.pi0, t, failed)).value
    B = evaluate(case.generator, MeasureSpec("CumulativeReward", case.pi0, t, None, case.reward)).value
    print(f"t = {t:4g}: P(no security failure) = {R:.6f}, secure time = {B:.6f}")
