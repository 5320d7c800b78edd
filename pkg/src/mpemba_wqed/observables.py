"""Trace distance, decay fits, delay estimates and Mpemba-crossing detection."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .model import ModelParams
from .propagate import ExcitationState, Trajectory

__all__ = [
    "MpembaReport",
    "DecayFit",
    "trace_distance",
    "reduced_density",
    "initial_slope",
    "fit_decay_rate",
    "detect_mpemba_crossing",
    "estimate_delay",
    "is_contractive",
]

MPEMBA = "mpemba"
NO_MPEMBA = "no-mpemba"
INCONCLUSIVE = "inconclusive-at-horizon"
NOT_APPLICABLE = "not-applicable"
HORIZON_GUARD_SAMPLES = 5


@dataclass
class MpembaReport:
    """Outcome of comparing a hot (farther) and a cold (closer) relaxation curve.

    ``hot`` is 1 or 2 and names the input trajectory that started farther
    from equilibrium; ``d1_initial``/``d2_initial`` always refer to the
    inputs in call order.
    """

    d1_initial: float
    d2_initial: float
    crossing_times: list[float] = field(default_factory=list)
    persistent_crossing: float | None = None
    verdict: str = NOT_APPLICABLE
    hot: int | None = None

    @property
    def is_mpemba(self) -> bool:
        return self.verdict == MPEMBA

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class DecayFit:
    gamma_fit: float
    window: tuple[float, float]
    residual: float
    n_samples: int

    def to_dict(self) -> dict:
        return asdict(self)


def trace_distance(state: ExcitationState) -> float:
    """Distance to the ground state, ``|c_a|^2``."""
    return min(1.0, abs(state.atom_amp) ** 2)


def reduced_density(state: ExcitationState) -> tuple[float, float]:
    """Diagonal ``(p_e, p_g)`` of the atom's reduced density matrix."""
    p_e = trace_distance(state)
    return p_e, 1.0 - p_e


def initial_slope(state: ExcitationState, params: ModelParams) -> float:
    """``dD/dt`` at ``t = 0``: ``2 Im(conj(c_a) g0 q_0)``.

    A positive value means the distance grows at first, i.e. the contractive
    bound ``D(t) <= D(0)`` is violated.
    """
    return 2.0 * float(np.imag(np.conj(state.atom_amp) * params.g0 * state.site(0)))


def is_contractive(traj: Trajectory, atol: float = 0.0) -> bool:
    """True when ``D(t) <= D(0)`` at every sample."""
    return bool(np.all(traj.distances <= traj.distances[0] + atol))


def fit_decay_rate(traj: Trajectory, window: tuple[float, float]) -> DecayFit:
    """Least-squares slope of ``ln D`` against ``t`` over ``window``, negated."""
    t_a, t_b = window
    if t_a < traj.times[0] or t_b > traj.times[-1] + 1e-9 or t_b <= t_a:
        raise ValueError(f"window {window} outside trajectory [0, {traj.times[-1]:g}]")
    sel = (traj.times >= t_a - 1e-9) & (traj.times <= t_b + 1e-9)
    t, d = traj.times[sel], traj.distances[sel]
    if t.size < 10:
        raise ValueError(f"window {window} holds only {t.size} samples; need >= 10")
    if np.any(d <= 0):
        raise ValueError("non-positive distance inside fit window")
    y = np.log(d)
    slope, intercept = np.polyfit(t, y, 1)
    resid = y - (slope * t + intercept)
    return DecayFit(gamma_fit=float(-slope), window=(float(t_a), float(t_b)),
                    residual=float(np.sqrt(np.mean(resid ** 2))), n_samples=int(t.size))


def _crossings(times: np.ndarray, diff: np.ndarray) -> list[float]:
    """Sign changes of ``diff``; zeros pin the crossing to the earliest zero sample."""
    out = []
    last_sign, last_idx, first_zero = 0, None, None
    for i, d in enumerate(diff):
        s = int(np.sign(d))
        if s == 0:
            if first_zero is None:
                first_zero = i
            continue
        if last_sign and s != last_sign:
            if first_zero is not None:
                out.append(float(times[first_zero]))
            else:
                j = last_idx
                frac = diff[j] / (diff[j] - diff[i])
                out.append(float(times[j] + frac * (times[i] - times[j])))
        last_sign, last_idx, first_zero = s, i, None
    return out


def detect_mpemba_crossing(traj1: Trajectory, traj2: Trajectory, eps: float = 1e-6) -> MpembaReport:
    """Look for a persistent reversal in the ordering of two distance curves.

    The trajectory that starts farther from equilibrium is the hot one. A
    crossing is persistent when afterwards ``D_hot - D_cold`` stays below
    ``-eps * max(D_hot, D_cold, eps)`` at every later sample. A last sign
    change within five samples of the horizon makes the verdict inconclusive.
    Swapping the arguments gives the mirrored report.
    """
    if traj1.times.shape != traj2.times.shape or not np.allclose(traj1.times, traj2.times, rtol=0, atol=1e-12):
        raise ValueError("trajectories must share the same time grid")
    d1, d2 = traj1.distances, traj2.distances
    report = MpembaReport(d1_initial=float(d1[0]), d2_initial=float(d2[0]))
    if d1[0] > d2[0] + eps:
        hot, cold, report.hot = d1, d2, 1
    elif d2[0] > d1[0] + eps:
        hot, cold, report.hot = d2, d1, 2
    else:
        return report

    times = traj1.times
    diff = hot - cold
    report.crossing_times = _crossings(times, diff)
    below = diff < -eps * np.maximum(np.maximum(hot, cold), eps)
    # ok_after[i]: ordering holds at every sample from i to the horizon
    ok_after = np.logical_and.accumulate(below[::-1])[::-1]
    for tc in report.crossing_times:
        later = np.nonzero(times > tc)[0]
        if later.size and ok_after[later[0]]:
            report.persistent_crossing = tc
            break

    if report.crossing_times:
        last = report.crossing_times[-1]
        if np.count_nonzero(times > last) <= HORIZON_GUARD_SAMPLES:
            report.verdict = INCONCLUSIVE
            return report
    report.verdict = MPEMBA if report.persistent_crossing is not None else NO_MPEMBA
    return report


def estimate_delay(reference: Trajectory, delayed: Trajectory,
                   search_range: tuple[float, float]) -> float:
    """Shift ``s`` minimizing the mean of ``(D_delayed(t) - D_reference(t - s))^2``.

    The mean runs over the overlap ``t - s`` in the reference grid. Shifts
    are scanned on the sample grid, then refined with a parabola through the
    best point and its neighbours.
    """
    step = reference.sample_step
    if not np.isclose(delayed.sample_step, step, rtol=1e-9):
        raise ValueError("trajectories must share the sample step")
    lo, hi = search_range
    shifts = np.arange(int(np.ceil(lo / step - 1e-9)), int(np.floor(hi / step + 1e-9)) + 1)
    if shifts.size == 0:
        raise ValueError(f"search range {search_range} holds no grid shift")
    dr, dd = reference.distances, delayed.distances

    def cost(n: int) -> float:
        # compare dd[i] with dr[i - n]
        if n >= 0:
            m = min(dd.size - n, dr.size)
            a, b = dd[n:n + m], dr[:m]
        else:
            m = min(dd.size, dr.size + n)
            a, b = dd[:m], dr[-n:-n + m]
        if m <= 0:
            return np.inf
        return float(np.mean((a - b) ** 2))

    costs = np.array([cost(int(n)) for n in shifts])
    if not np.isfinite(costs).any():
        raise ValueError("no overlap between trajectories for any shift in range")
    best = int(np.argmin(costs))
    s = shifts[best] * step
    if 0 < best < shifts.size - 1:
        c_m, c_0, c_p = costs[best - 1], costs[best], costs[best + 1]
        denom = c_m - 2.0 * c_0 + c_p
        if denom > 0:
            s += 0.5 * step * (c_m - c_p) / denom
    return float(s)
