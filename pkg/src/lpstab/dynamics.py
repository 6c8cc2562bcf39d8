"""
Fixed-step time integration with monitor series.

Fields have the signature ``f(t, z) -> dz/dt`` on flat state vectors.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Sequence

import numpy as np

Array = np.ndarray
Field = Callable[[float, Array], Array]

RK4 = "rk4"
MIDPOINT = "implicit-midpoint"
MIDPOINT_TOL = 1e-12
MIDPOINT_MAXITER = 50
BLOWUP = 1e6


class SolverError(RuntimeError):
    def __init__(self, step: int, msg: str):
        super().__init__(f"step {step}: {msg}")
        self.step = step


@dataclass(frozen=True)
class IntegratorConfig:
    method: str = RK4
    step: float = 1e-3
    horizon: float = 1.0
    monitor_stride: int = 1

    def __post_init__(self):
        if self.method not in (RK4, MIDPOINT):
            raise ValueError(f"unknown method {self.method!r}")
        if not 0 < self.step < self.horizon:
            raise ValueError("need 0 < step < horizon")
        if self.monitor_stride < 1:
            raise ValueError("monitor_stride must be positive")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.step))


@dataclass
class Trajectory:
    times: Array
    states: Array
    monitors: Dict[str, Array] = field(default_factory=dict)
    chart: str = ""
    blew_up: bool = False

    @property
    def final(self) -> Array:
        return self.states[-1]


def rk4_step(f: Field, t: float, z: Array, h: float) -> Array:
    k1 = f(t, z)
    k2 = f(t + 0.5 * h, z + 0.5 * h * k1)
    k3 = f(t + 0.5 * h, z + 0.5 * h * k2)
    k4 = f(t + h, z + h * k3)
    return z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def midpoint_step(f: Field, t: float, z: Array, h: float, step_index: int = 0) -> Array:
    """Implicit midpoint rule solved by fixed-point iteration."""
    tm = t + 0.5 * h
    z1 = z + h * f(t, z)
    for _ in range(MIDPOINT_MAXITER):
        z2 = z + h * f(tm, 0.5 * (z + z1))
        err = float(np.max(np.abs(z2 - z1)))
        z1 = z2
        if not np.isfinite(err):
            break
        if err <= MIDPOINT_TOL * max(1.0, float(np.max(np.abs(z1)))):
            return z1
    raise SolverError(step_index, "implicit midpoint iteration did not converge")


def integrate(f: Field, z0: Array, config: IntegratorConfig,
              monitors: Optional[Dict[str, Callable[[Array], float]]] = None,
              chart: str = "", record_states: bool = True) -> Trajectory:
    """
    Integrate ``f`` from ``z0`` over ``config.horizon``.

    States and monitors are sampled every ``monitor_stride`` steps, always
    including the initial and final time.  Integration stops early if the
    state norm exceeds 1e6.
    """
    monitors = monitors or {}
    z = np.array(z0, dtype=float)
    h = config.step
    n = config.n_steps
    stride = config.monitor_stride
    step = rk4_step if config.method == RK4 else None
    times, states = [0.0], [z.copy()]
    series = {k: [m(z)] for k, m in monitors.items()}
    blew_up = False
    t = 0.0
    for i in range(1, n + 1):
        if step is not None:
            z = step(f, t, z, h)
        else:
            z = midpoint_step(f, t, z, h, i)
        t = i * h
        bad = not np.all(np.isfinite(z)) or float(np.max(np.abs(z))) > BLOWUP
        if i % stride == 0 or i == n or bad:
            times.append(t)
            if record_states:
                states.append(z.copy())
            for k, m in monitors.items():
                series[k].append(m(z))
        if bad:
            blew_up = True
            break
    if not record_states:
        states.append(z.copy())
    return Trajectory(
        times=np.array(times),
        states=np.array(states),
        monitors={k: np.array(v) for k, v in series.items()},
        chart=chart,
        blew_up=blew_up,
    )


def final_state(f: Field, z0: Array, step: float, horizon: float, method: str = RK4) -> Array:
    cfg = IntegratorConfig(method, step, horizon, monitor_stride=10 ** 9)
    return integrate(f, z0, cfg, record_states=False).final


def convergence_order(f: Field, z0: Array, steps: Sequence[float], horizon: float,
                      method: str = RK4) -> float:
    """
    Observed order from a Richardson triplet h, h/r, h/r^2.

    order = log(|z_h - z_{h/r}| / |z_{h/r} - z_{h/r^2}|) / log(r)
    """
    if len(steps) != 3:
        raise ValueError("need three step sizes")
    h0, h1, h2 = steps
    r = h0 / h1
    if not np.isclose(h1 / h2, r):
        raise ValueError("step sizes must form a geometric sequence")
    a, b, c = (final_state(f, z0, h, horizon, method) for h in steps)
    return float(np.log(np.linalg.norm(a - b) / np.linalg.norm(b - c)) / np.log(r))


@dataclass
class ScenarioReport:
    """Outcome of a scenario run: named verdicts, scalar metrics and trajectories."""

    name: str
    params: Dict[str, object] = field(default_factory=dict)
    verdicts: Dict[str, bool] = field(default_factory=dict)
    metrics: Dict[str, float] = field(default_factory=dict)
    notes: Dict[str, str] = field(default_factory=dict)
    trajectories: Dict[str, Trajectory] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.verdicts.values())

    def first_failure(self) -> Optional[str]:
        for k, v in self.verdicts.items():
            if not v:
                return k
        return None

    def to_dict(self) -> Dict[str, object]:
        return {
            "scenario": self.name,
            "params": self.params,
            "passed": self.passed,
            "verdicts": self.verdicts,
            "metrics": self.metrics,
            "notes": self.notes,
        }
