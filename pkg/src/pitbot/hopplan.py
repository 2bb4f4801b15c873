"""Fuel-minimal impulsive fly-hops under constant gravity.

A hop is a launch burn, a ballistic arc in the vertical plane through origin
and target, and a landing burn that cancels the touchdown velocity. The
planner searches launch angle for the lowest total delta-v subject to the
corridor floor and ceiling.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from pitbot import terrain
from pitbot.propulsion import EngineSpec, MassBudget, dv_capacity, propellant_for_dv

GRID_STEP_DEG = 0.1
ANGLE_TOL_DEG = 1e-4
MAX_ANGLE_DEG = 89.0
DEFAULT_MARGIN_M = 0.5

_INV_PHI = (math.sqrt(5) - 1) / 2
_INV_PHI2 = (3 - math.sqrt(5)) / 2
_TOL = 1e-9


class HopInfeasible(ValueError):
    """No launch angle satisfies the constraints.

    ``binding`` names the constraint that rejected the most candidate
    angles: ``"kinematic"``, ``"ceiling"`` or ``"floor"``.
    """

    def __init__(self, message: str, binding: str):
        super().__init__(message)
        self.binding = binding


@dataclass(frozen=True)
class BodyConstants:
    g: float
    name: str = "custom"

    def __post_init__(self):
        if not self.g > 0:
            raise ValueError("surface gravity must be positive")


MOON = BodyConstants(1.62, "moon")
MARS = BodyConstants(3.71, "mars")
BODIES = {"moon": MOON, "mars": MARS}


def body_from(value) -> BodyConstants:
    """Accept a body name, a gravity value, or a BodyConstants."""
    if isinstance(value, BodyConstants):
        return value
    if isinstance(value, str):
        key = value.lower()
        if key in BODIES:
            return BODIES[key]
        try:
            return BodyConstants(float(value))
        except ValueError:
            raise ValueError(f"unknown body {value!r}; use one of {sorted(BODIES)} or a gravity in m/s^2") from None
    return BodyConstants(float(value))


@dataclass(frozen=True)
class HopPlan:
    origin: tuple[float, float]
    target: tuple[float, float]
    launch_speed: float
    launch_angle: float
    flight_time: float
    apex_z: float
    dv_launch: float
    dv_land: float
    dv_total: float
    propellant_kg: float
    g: float
    lateral_m: float = 0.0

    @property
    def range_m(self) -> float:
        return math.hypot(self.target[0] - self.origin[0], self.lateral_m)


def ballistic_solve(range_m: float, dz: float, g: float, theta_deg: float) -> tuple[float, float]:
    """Launch speed and flight time for an arc at ``theta_deg`` covering ``range_m`` and rising ``dz``."""
    if not range_m > 0:
        raise ValueError("range must be positive")
    if not 0 < theta_deg < 90:
        raise ValueError("launch angle must be in (0, 90) degrees")
    th = math.radians(theta_deg)
    c = math.cos(th)
    rise = range_m * math.tan(th) - dz
    if rise <= 0:
        raise HopInfeasible(
            f"angle {theta_deg} deg too shallow to gain {dz} m over {range_m} m", "kinematic"
        )
    v = math.sqrt(g * range_m * range_m / (2 * c * c * rise))
    return v, range_m / (v * c)


class _Arc:
    """Arc geometry for one candidate angle, in horizontal distance x along the ground track."""

    def __init__(self, origin, target, lateral, g, theta_deg):
        self.s0, self.z0 = origin
        self.s1, self.z1 = target
        self.R = math.hypot(self.s1 - self.s0, lateral)
        self.dir = (self.s1 - self.s0) / self.R
        self.theta = theta_deg
        self.v, self.t = ballistic_solve(self.R, self.z1 - self.z0, g, theta_deg)
        th = math.radians(theta_deg)
        self.tan = math.tan(th)
        self.kappa = g / (2 * (self.v * math.cos(th)) ** 2)

    def z(self, x):
        return self.z0 + x * self.tan - self.kappa * x * x

    def s(self, x):
        return self.s0 + self.dir * x

    def apex(self) -> float:
        xa = self.tan / (2 * self.kappa)
        if 0 <= xa <= self.R:
            return float(self.z(xa))
        return max(self.z0, self.z1)


def _violation(arc: _Arc, profile: terrain.TubeProfile | None, margin: float) -> str | None:
    if profile is None:
        return None
    lo, hi = sorted((arc.s0, arc.s1))
    st = profile.s
    interior = st[(st > lo) & (st < hi)]
    if arc.dir != 0:
        xs = np.concatenate(([0.0], (interior - arc.s0) / arc.dir, [arc.R]))
        xs.sort()
    else:
        xs = np.array([0.0, arc.R])
    ss = np.clip(arc.s(xs), 0.0, profile.length)
    zs = arc.z(xs)
    floor = np.interp(ss, st, profile.floor_z)
    ceil = np.interp(ss, st, profile.ceiling_z) - margin
    # arc minus floor is concave per sub-interval: interior breakpoints decide it
    if np.any(zs[1:-1] - floor[1:-1] <= _TOL):
        return "floor"
    if zs[0] < floor[0] - _TOL or zs[-1] < floor[-1] - _TOL:
        return "floor"
    # ceiling minus arc is convex per sub-interval: check its stationary point
    for a, b, ca, cb in zip(xs[:-1], xs[1:], ceil[:-1], ceil[1:]):
        slope = (cb - ca) / (b - a) if b > a else 0.0
        x = min(max((arc.tan - slope) / (2 * arc.kappa), a), b)
        if ca + slope * (x - a) - arc.z(x) < -_TOL:
            return "ceiling"
    return None


def _golden_section_min(f, a: float, b: float, tol: float):
    """Minimize a unimodal f on [a, b]; returns the bracket left after shrinking below tol."""
    h = b - a
    if h <= tol:
        return a, b
    n = int(math.ceil(math.log(tol / h) / math.log(_INV_PHI)))
    c = a + _INV_PHI2 * h
    d = a + _INV_PHI * h
    yc, yd = f(c), f(d)
    for _ in range(n - 1):
        if yc < yd:
            b, d, yd = d, c, yc
            h *= _INV_PHI
            c = a + _INV_PHI2 * h
            yc = f(c)
        else:
            a, c, yc = c, d, yd
            h *= _INV_PHI
            d = a + _INV_PHI * h
            yd = f(d)
    return (a, d) if yc < yd else (c, b)


def _dv_total(arc: _Arc, g: float) -> float:
    land_sq = arc.v * arc.v - 2 * g * (arc.z1 - arc.z0)
    return arc.v + math.sqrt(max(land_sq, 0.0))


def plan_min_fuel_hop(
    origin: tuple[float, float],
    target: tuple[float, float],
    body: BodyConstants,
    profile: terrain.TubeProfile | None = None,
    margin: float = DEFAULT_MARGIN_M,
    *,
    lateral_m: float = 0.0,
    m0: float | None = None,
    engine: EngineSpec | None = None,
) -> HopPlan:
    """Lowest-delta-v hop from ``origin`` to ``target`` (both ``(s, z)``).

    Launch angle is scanned on a 0.1 degree grid and the best feasible point
    is refined by golden-section search to 1e-4 degrees. ``profile=None``
    plans in free space. ``lateral_m`` is the cross-corridor offset covered
    by the hop; it lengthens the ground track but not the ``s`` span.
    """
    body = body_from(body)
    g = body.g
    origin = (float(origin[0]), float(origin[1]))
    target = (float(target[0]), float(target[1]))
    R = math.hypot(target[0] - origin[0], lateral_m)
    if not R > 0:
        raise ValueError("origin and target must be horizontally separated")
    if profile is not None:
        for p, label in ((origin, "origin"), (target, "target")):
            if not terrain.inside(profile, p):
                raise ValueError(f"hop {label} {p} is outside the corridor")
    dz = target[1] - origin[1]
    theta_lo = max(0.0, math.degrees(math.atan2(dz, R)))

    rejected = {"kinematic": 0, "ceiling": 0, "floor": 0}
    cache: dict[float, tuple[float, _Arc] | None] = {}

    def evaluate(theta):
        if theta in cache:
            return cache[theta]
        out = None
        if 0 < theta < 90:
            try:
                arc = _Arc(origin, target, lateral_m, g, theta)
            except HopInfeasible:
                rejected["kinematic"] += 1
            else:
                why = _violation(arc, profile, margin)
                if why is None:
                    out = (_dv_total(arc, g), arc)
                else:
                    rejected[why] += 1
        cache[theta] = out
        return out

    def cost(theta):
        r = evaluate(theta)
        return math.inf if r is None else r[0]

    best = None
    for step in (GRID_STEP_DEG, GRID_STEP_DEG / 10):
        k0 = math.floor(theta_lo / step + 1e-9) + 1
        k1 = math.floor(MAX_ANGLE_DEG / step + 1e-9)
        for k in range(k0, k1 + 1):
            theta = round(k * step, 10)
            r = evaluate(theta)
            if r is not None and (best is None or r[0] < best[0]):
                best = r
        if best is not None:
            break
    if best is None:
        binding = max(rejected, key=lambda key: (rejected[key], key))
        raise HopInfeasible(
            f"no feasible launch angle for hop {origin} -> {target} (binding: {binding})", binding
        )

    centre = best[1].theta
    lo = max(centre - GRID_STEP_DEG, theta_lo + 1e-9)
    hi = min(centre + GRID_STEP_DEG, MAX_ANGLE_DEG)
    a, b = _golden_section_min(cost, lo, hi, ANGLE_TOL_DEG)
    for theta in (a, b, 0.5 * (a + b)):
        cost(theta)
    for r in cache.values():
        if r is not None and r[0] < best[0]:
            best = r
    return _make_plan(best[1], g, lateral_m, m0, engine)


def _make_plan(arc: _Arc, g, lateral_m, m0, engine) -> HopPlan:
    dv_launch = arc.v
    dv_land = math.sqrt(max(arc.v * arc.v - 2 * g * (arc.z1 - arc.z0), 0.0))
    dv_total = dv_launch + dv_land
    if m0 is None:
        m0 = MassBudget().total_kg
    propellant = propellant_for_dv(engine or EngineSpec(), m0, dv_total)
    return HopPlan(
        origin=(arc.s0, arc.z0),
        target=(arc.s1, arc.z1),
        launch_speed=arc.v,
        launch_angle=arc.theta,
        flight_time=arc.t,
        apex_z=arc.apex(),
        dv_launch=dv_launch,
        dv_land=dv_land,
        dv_total=dv_total,
        propellant_kg=propellant,
        g=g,
        lateral_m=lateral_m,
    )


def plan_at_angle(origin, target, body, theta_deg: float, *, lateral_m=0.0, m0=None, engine=None) -> HopPlan:
    """Unconstrained plan at a fixed launch angle."""
    body = body_from(body)
    arc = _Arc(tuple(map(float, origin)), tuple(map(float, target)), lateral_m, body.g, theta_deg)
    return _make_plan(arc, body.g, lateral_m, m0, engine)


def arc_clear(plan: HopPlan, profile: terrain.TubeProfile, margin: float = 0.0) -> bool:
    arc = _Arc(plan.origin, plan.target, plan.lateral_m, plan.g, plan.launch_angle)
    return _violation(arc, profile, margin) is None


def sample_trajectory(plan: HopPlan, dt: float) -> list[tuple[float, float, float, float, float]]:
    """(t, s, z, vs, vz) samples from launch to touchdown; the last one lands exactly at flight_time."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    th = math.radians(plan.launch_angle)
    vh = plan.launch_speed * math.cos(th)
    v0z = plan.launch_speed * math.sin(th)
    ds_dir = (plan.target[0] - plan.origin[0]) / plan.range_m
    vs = vh * ds_dir
    n = int(math.floor(plan.flight_time / dt + 1e-9))
    times = [k * dt for k in range(n + 1)]
    if plan.flight_time - times[-1] > 1e-12:
        times.append(plan.flight_time)
    else:
        times[-1] = plan.flight_time
    s0, z0 = plan.origin
    return [(t, s0 + vs * t, z0 + v0z * t - 0.5 * plan.g * t * t, vs, v0z - plan.g * t) for t in times]


def flat_hop_dv(hop_length_m: float, body) -> float:
    return plan_min_fuel_hop((0.0, 0.0), (hop_length_m, 0.0), body_from(body)).dv_total


def hop_sequence_range(dv_budget: float, hop_length_m: float, body) -> float:
    """Ground covered by repeating identical flat hops until the delta-v budget runs out."""
    if not hop_length_m > 0:
        raise ValueError("hop length must be positive")
    if dv_budget <= 0:
        return 0.0
    return math.floor(dv_budget / flat_hop_dv(hop_length_m, body)) * hop_length_m


@dataclass(frozen=True)
class ModeRow:
    hop_length_m: float
    dv_per_hop_mps: float
    propellant_per_hop_kg: float
    flight_time_s: float
    total_range_m: float

    @property
    def dv_per_meter(self) -> float:
        return self.dv_per_hop_mps / self.hop_length_m


CSV_COLUMNS = ("hop_length_m", "dv_per_hop_mps", "propellant_per_hop_kg", "flight_time_s", "total_range_m")


def compare_modes(body, hop_lengths, budget: MassBudget | None = None, engine: EngineSpec | None = None) -> list[ModeRow]:
    """Fuel-versus-range table for a family of flat hop lengths."""
    hop_lengths = list(hop_lengths)
    if not hop_lengths:
        raise ValueError("need at least one hop length")
    body = body_from(body)
    budget = budget or MassBudget()
    engine = engine or EngineSpec()
    capacity = dv_capacity(engine, budget)
    rows = []
    for length in hop_lengths:
        plan = plan_min_fuel_hop((0.0, 0.0), (float(length), 0.0), body, m0=budget.total_kg, engine=engine)
        rows.append(
            ModeRow(
                hop_length_m=float(length),
                dv_per_hop_mps=plan.dv_total,
                propellant_per_hop_kg=plan.propellant_kg,
                flight_time_s=plan.flight_time,
                total_range_m=hop_sequence_range(capacity, float(length), body),
            )
        )
    return rows


def modes_csv(rows: list[ModeRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([repr(getattr(r, c)) for c in CSV_COLUMNS])
    return buf.getvalue()
