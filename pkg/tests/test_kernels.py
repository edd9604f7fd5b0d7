import json
import os
import subprocess
import sys

import numpy as np
import pytest

from robust_mpc import kernels
from robust_mpc.servo import perturbed_params

PROBE = r"""
import json, numpy as np
from robust_mpc import _accel, kernels
from robust_mpc.servo import perturbed_params
rng = np.random.default_rng(5)
volts = np.clip(rng.uniform(-300, 300, 50), -220, 220)
traj = kernels.servo_trajectory(np.zeros(5), volts, perturbed_params().packed(), 0.1, 100)
thetas = []
for _ in range(20):
    lam = rng.uniform(0.01, 3.0, 4)
    thetas.append(kernels.theta_bisect(lam, 0.5, 1e-10, 256)[0])
print(json.dumps({"jit": _accel.JIT_ENABLED, "traj": traj.tolist(), "theta": thetas}))
"""


def probe(no_jit):
    env = dict(os.environ)
    env.pop("ROBUST_MPC_NO_JIT", None)
    if no_jit:
        env["ROBUST_MPC_NO_JIT"] = "1"
    out = subprocess.run([sys.executable, "-c", PROBE], capture_output=True, text=True, env=env, check=True)
    return json.loads(out.stdout)


@pytest.mark.slow
def test_jit_and_fallback_agree():
    fast, plain = probe(False), probe(True)
    assert plain["jit"] is False
    np.testing.assert_allclose(fast["traj"], plain["traj"], rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(fast["theta"], plain["theta"], rtol=1e-12)


def test_theta_bisect_statuses():
    theta, resid, status = kernels.theta_bisect(np.array([1.0]), np.log(0.5) + 1.0, 1e-12, 256)
    assert status == kernels.THETA_OK
    assert abs(theta - 0.5) <= 1e-15
    _, _, status = kernels.theta_bisect(np.zeros(3), 0.1, 1e-12, 256)
    assert status == kernels.THETA_NO_BRACKET
    _, _, status = kernels.theta_bisect(np.array([1.0]), 0.3, 1e-12, 3)
    assert status == kernels.THETA_NO_CONVERGENCE


def test_gamma_outside_domain():
    assert kernels.gamma_eig(np.array([2.0]), 0.5) == np.inf


def test_trajectory_rows():
    prm = perturbed_params().packed()
    volts = np.array([100.0, -50.0, 0.0])
    traj = kernels.servo_trajectory(np.zeros(5), volts, prm, 0.1, 100)
    s = np.zeros(5)
    for k, v in enumerate(volts):
        s = kernels.servo_rk4(s, v, prm, 0.1, 100)
        np.testing.assert_array_equal(traj[k + 1], s)
