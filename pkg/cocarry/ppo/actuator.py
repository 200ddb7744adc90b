"""Joint-level PD actuator law and a one-joint test rig."""

from typing import Dict, Union

import numpy as np

from cocarry.exceptions import SimulationError

Scalar = Union[float, np.ndarray]


def pd_torque(a: Scalar, a_0: Scalar, a_dot: Scalar, kp: Scalar, kd: Scalar) -> Scalar:
    """``tau = Kp*(a - a_0) - Kd*a_dot``, elementwise over joints."""
    return kp * (np.asarray(a, dtype=np.float64) - a_0) - kd * np.asarray(a_dot, dtype=np.float64)


def simulate_pd_joint(
    target: float,
    kp: float,
    kd: float,
    inertia: float = 0.1,
    dt: float = 1e-3,
    steps: int = 2000,
    position: float = 0.0,
    velocity: float = 0.0,
) -> Dict[str, np.ndarray]:
    """Drive a frictionless joint of the given inertia to ``target`` with ``pd_torque``.

    Semi-implicit Euler; returns time, position, velocity and torque histories.
    """
    if inertia <= 0 or dt <= 0:
        raise SimulationError("Inertia and time step must be positive", context={"inertia": inertia, "dt": dt})
    times = np.arange(steps) * dt
    q = np.zeros(steps)
    q_dot = np.zeros(steps)
    tau = np.zeros(steps)
    for k in range(steps):
        q[k], q_dot[k] = position, velocity
        tau[k] = pd_torque(target, position, velocity, kp, kd)
        velocity = velocity + tau[k] / inertia * dt
        position = position + velocity * dt
        if not np.isfinite(position):
            raise SimulationError("PD joint diverged", time=float(times[k]), suggestions=["Lower kp or dt"])
    return {"t": times, "position": q, "velocity": q_dot, "torque": tau}
