"""Compare the numba-compiled kernels with the plain Python/numpy fallback.

Each mode runs in its own interpreter because the switch
(``ROBUST_MPC_NO_JIT``) is read at import time::

    python3 benchmarks/bench_kernels.py [--repeat 3]
"""

import argparse
import json
import os
import subprocess
import sys

WORKLOAD = r"""
import json, time
import numpy as np
from robust_mpc import _accel, kernels
from robust_mpc.servo import perturbed_params
from robust_mpc.sim import Scenario, run_scenario

repeat = int(REPEAT)
prm = perturbed_params().packed()
volts = np.clip(np.random.default_rng(0).uniform(-300, 300, 200), -220, 220)
lams = np.random.default_rng(1).uniform(0.01, 3.0, (2000, 4))

def best(fn):
    fn()  # warm-up (includes compilation on the JIT path)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)

out = {
    "jit": _accel.JIT_ENABLED,
    "servo_rk4: 20 s trajectory, 100 substeps": best(
        lambda: kernels.servo_trajectory(np.zeros(5), volts, prm, 0.1, 100)),
    "theta_bisect: 2000 solves": best(
        lambda: [kernels.theta_bisect(l, 0.5, 1e-10, 256) for l in lams]),
    "closed loop: 20 s, nonlinear plant, c=1": best(
        lambda: run_scenario(Scenario(plant_kind="nonlinear-perturbed", robust=True, c=1.0, duration=20.0))),
}
print(json.dumps(out))
"""


def run_mode(no_jit: bool, repeat: int) -> dict:
    env = dict(os.environ)
    env.pop("ROBUST_MPC_NO_JIT", None)
    if no_jit:
        env["ROBUST_MPC_NO_JIT"] = "1"
    code = WORKLOAD.replace("REPEAT", str(repeat))
    proc = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    return json.loads(proc.stdout)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3, help="timed repetitions per case (best is reported)")
    args = parser.parse_args(argv)

    fast = run_mode(False, args.repeat)
    plain = run_mode(True, args.repeat)
    if not fast.pop("jit"):
        print("warning: numba is unavailable, both columns use the fallback", file=sys.stderr)
    plain.pop("jit")

    width = max(len(k) for k in fast)
    print(f"{'case'.ljust(width)}  {'numba [s]':>10}  {'numpy [s]':>10}  {'speedup':>8}")
    for case, t_fast in fast.items():
        t_plain = plain[case]
        print(f"{case.ljust(width)}  {t_fast:10.4f}  {t_plain:10.4f}  {t_plain / t_fast:7.1f}x")


if __name__ == "__main__":
    main()
