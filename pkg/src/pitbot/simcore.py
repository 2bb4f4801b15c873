"""Deterministic mission simulation for a pit-bot formation.

One ``step`` is one formation leg: the rear robot hops (or rolls) to the
next vertex, is re-localized from the others, scans, and everyone waits out
a fixed ground dwell. All randomness comes from the scenario seed.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from pitbot import hopplan, navloc, propulsion, terrain
from pitbot.hopplan import BodyConstants, HopInfeasible
from pitbot.navloc import PoseEstimate, SensorSpec
from pitbot.propulsion import EngineSpec, MassBudget, PowerSpec

DWELL_S = 30.0
SCAN_WH = 0.5
ACS_DV_MPS = 1.0
RESERVE_FRACTION = 0.05
ROLL_SPEED_MPS = 0.1
COVERAGE_STEP_M = 1.0
TRAJECTORY_DT_S = 0.5
MAX_SPLITS = 2

MODES = ("Grounded", "Airborne", "Rolling", "Depleted", "Blocked", "Lost")


class ScenarioError(ValueError):
    """Invalid scenario; raised before any stepping."""


@dataclass(frozen=True)
class RobotSpec:
    id: str
    engine: EngineSpec = field(default_factory=EngineSpec)
    power: PowerSpec = field(default_factory=PowerSpec)
    budget: MassBudget = field(default_factory=MassBudget)


@dataclass(frozen=True)
class Toggles:
    noise: bool = True
    laser: bool = True
    stereo: bool = True
    scan: bool = True
    rolling: bool = True


@dataclass(frozen=True)
class Scenario:
    profile: terrain.TubeProfile
    target_s: float
    seed: int
    robots: tuple = ()
    leg_length_m: float = 7.0
    reserve_propellant_kg: float | None = None
    body: BodyConstants = hopplan.MOON
    sensor: SensorSpec = field(default_factory=SensorSpec)
    toggles: Toggles = field(default_factory=Toggles)
    dwell_s: float = DWELL_S
    scan_wh: float = SCAN_WH
    acs_dv_mps: float = ACS_DV_MPS
    margin_m: float = hopplan.DEFAULT_MARGIN_M
    roll_speed_mps: float = ROLL_SPEED_MPS
    coverage_step_m: float = COVERAGE_STEP_M
    losses: tuple = ()  # (leg_index, robot_id): robot lost before that leg starts
    max_legs: int = 5000
    name: str = "scenario"

    def __post_init__(self):
        if not self.robots:
            object.__setattr__(self, "robots", tuple(RobotSpec(r) for r in navloc.ROBOT_IDS))
        if self.sensor.leg_length_m != self.leg_length_m:
            object.__setattr__(self, "sensor", replace(self.sensor, leg_length_m=self.leg_length_m))

    def reserve_for(self, spec: RobotSpec) -> float:
        if self.reserve_propellant_kg is not None:
            return self.reserve_propellant_kg
        return RESERVE_FRACTION * spec.budget.propellant_kg

    def validate(self) -> None:
        if not 1 <= len(self.robots) <= 3:
            raise ScenarioError("a scenario needs 1 to 3 robots")
        ids = [r.id for r in self.robots]
        if len(set(ids)) != len(ids):
            raise ScenarioError("robot ids must be unique")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or not 0 <= self.seed < 2**64:
            raise ScenarioError("seed must be an integer in [0, 2^64)")
        if not 0 <= self.target_s <= self.profile.length:
            raise ScenarioError(f"target_s {self.target_s} outside profile [0, {self.profile.length}]")
        if not 5.0 <= self.leg_length_m <= 9.0:
            raise ScenarioError("leg_length_m must lie in [5, 9]")
        if self.reserve_propellant_kg is not None and self.reserve_propellant_kg < 0:
            raise ScenarioError("reserve_propellant_kg must be >= 0")
        for name in ("dwell_s", "scan_wh", "acs_dv_mps", "margin_m"):
            if getattr(self, name) < 0:
                raise ScenarioError(f"{name} must be >= 0")
        for name in ("roll_speed_mps", "coverage_step_m"):
            if not getattr(self, name) > 0:
                raise ScenarioError(f"{name} must be positive")
        for leg, rid in self.losses:
            if rid not in ids:
                raise ScenarioError(f"loss schedule names unknown robot {rid!r}")
        span = (len(self.robots) - 1) * navloc.strip_step(self.sensor)
        if span > self.profile.length:
            raise ScenarioError(f"profile is too short ({self.profile.length} m) for the starting formation ({span:.2f} m)")


@dataclass
class RobotState:
    id: str
    true_pos: tuple  # (s, lateral, z)
    estimate: PoseEstimate
    propellant_kg: float
    battery_wh: float
    mode: str = "Grounded"
    odometer_m: float = 0.0
    hops_made: int = 0
    vertex: int = 0
    propellant_initial_kg: float = 0.0
    battery_initial_wh: float = 0.0
    propellant_used_kg: float = 0.0
    battery_used_wh: float = 0.0


@dataclass
class Event:
    t_s: float
    robot_id: str
    kind: str
    payload: dict

    def to_json(self) -> str:
        return json.dumps(
            {"t_s": self.t_s, "robot": self.robot_id, "kind": self.kind, "payload": self.payload},
            sort_keys=True,
        )


@dataclass
class CoverageMap:
    station_s: np.ndarray
    observed: np.ndarray
    t_first: np.ndarray

    @classmethod
    def for_profile(cls, profile: terrain.TubeProfile, step: float = COVERAGE_STEP_M) -> "CoverageMap":
        n = int(math.floor(profile.length / step + 1e-9)) + 1
        s = np.minimum(np.arange(n) * step, profile.length)
        return cls(s, np.zeros(n, dtype=bool), np.full(n, np.nan))

    @property
    def fraction(self) -> float:
        return float(self.observed.mean())

    def copy(self) -> "CoverageMap":
        return CoverageMap(self.station_s, self.observed.copy(), self.t_first.copy())


def scan(robot: RobotState, profile: terrain.TubeProfile, coverage: CoverageMap, t_s: float = 0.0,
         sensor: SensorSpec | None = None) -> CoverageMap:
    """Mark floor stations within laser reach and in line of sight of a grounded robot."""
    sensor = sensor or SensorSpec()
    s0 = robot.true_pos[0]
    eye = (s0, robot.true_pos[2] + sensor.sensor_height_m)
    out = coverage.copy()
    near = np.flatnonzero(np.abs(coverage.station_s - s0) <= sensor.laser_max_range_m)
    floor = np.interp(coverage.station_s[near], profile.s, profile.floor_z)
    for i, fz in zip(near, floor):
        s = float(coverage.station_s[i])
        if math.hypot(s - s0, float(fz) - robot.true_pos[2]) > sensor.laser_max_range_m:
            continue
        if out.observed[i]:
            continue
        if terrain.line_of_sight(profile, eye, (s, float(fz))):
            out.observed[i] = True
            out.t_first[i] = t_s
    return out


@dataclass
class MissionReport:
    scenario: str
    seed: int
    arrived: bool
    end_reason: str
    legs: int
    duration_s: float
    distance_covered_m: float
    hops: int
    final_radial_error_m: float
    final_relative_error_pct: float
    coverage_fraction: float
    wheeled_infeasible: bool
    max_traversed_slope_deg: float
    robots: dict

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2) + "\n"


TRAJECTORY_COLUMNS = ("t_s", "robot", "true_s", "true_z", "est_x", "est_y", "propellant_kg", "battery_wh")


class Simulation:
    """Mutable mission state; drive it with :meth:`step` or :func:`run`."""

    def __init__(self, scenario: Scenario):
        scenario.validate()
        self.scenario = scenario
        self.profile = scenario.profile
        self.sensor = scenario.sensor
        self.rng = np.random.default_rng(scenario.seed)
        self.t = 0.0
        self.events: list[Event] = []
        self.trajectory: list[tuple] = []
        self.coverage = CoverageMap.for_profile(self.profile, scenario.coverage_step_m)
        self.robots: dict[str, RobotState] = {}
        self.specs = {r.id: r for r in scenario.robots}
        for k, spec in enumerate(scenario.robots):
            s, y = navloc.vertex(k, self.sensor)
            self.robots[spec.id] = RobotState(
                id=spec.id,
                true_pos=(s, y, terrain.floor_at(self.profile, s)),
                estimate=PoseEstimate.exact(s, y),
                propellant_kg=spec.budget.propellant_kg,
                battery_wh=spec.power.capacity_wh,
                vertex=k,
                propellant_initial_kg=spec.budget.propellant_kg,
                battery_initial_wh=spec.power.capacity_wh,
            )
        ids = tuple(r.id for r in scenario.robots)
        self.state = navloc.FormationState(order=ids, active=ids[0])
        self.next_vertex = len(ids)
        self.legs = 0
        self.finished = False
        self.arrived = False
        self.end_reason = ""
        self.max_slope = 0.0
        for r in self.robots.values():
            self._record(r)
        self._check_done()

    def vertex_pos(self, k: int) -> tuple[float, float]:
        """Strip vertex ``k``, held at the tube end once the strip runs past it."""
        s, y = navloc.vertex(k, self.sensor)
        return min(s, self.profile.length), y

    # ------------------------------------------------------------ bookkeeping

    def _log(self, robot_id, kind, **payload):
        self.events.append(Event(self.t, robot_id, kind, payload))

    def _record(self, r: RobotState, t=None, s=None, z=None):
        self.trajectory.append(
            (
                self.t if t is None else t,
                r.id,
                r.true_pos[0] if s is None else s,
                r.true_pos[2] if z is None else z,
                float(r.estimate.mean[0]),
                float(r.estimate.mean[1]),
                r.propellant_kg,
                r.battery_wh,
            )
        )

    def alive(self) -> list[RobotState]:
        return [self.robots[i] for i in self.state.order]

    def _spend_propellant(self, r: RobotState, kg: float):
        r.propellant_kg -= kg
        r.propellant_used_kg += kg

    def _drain(self, r: RobotState, wh: float) -> float:
        used = min(wh, r.battery_wh)
        r.battery_wh -= used
        r.battery_used_wh += used
        return used

    def _advance_time(self, dt: float, reason: str):
        """Move the clock and charge every active robot's continuous draw."""
        if dt <= 0:
            return
        self.t += dt
        drained = {}
        for r in self.alive():
            drained[r.id] = self._drain(r, self.specs[r.id].power.total_draw_w * dt / 3600.0)
        self._log("*", "Elapsed", reason=reason, dt_s=dt, drain_wh=drained)
        for r in list(self.alive()):
            if r.battery_wh <= 0:
                self._log(r.id, "Depleted", resource="battery")
                self._lose(r.id, "battery exhausted", "Depleted")

    def _lose(self, robot_id: str, reason: str, mode: str = "Lost"):
        r = self.robots[robot_id]
        if robot_id not in self.state.order:
            return
        r.mode = mode
        order = tuple(i for i in self.state.order if i != robot_id)
        self._log(robot_id, "Dropped", reason=reason, mode=mode, remaining=list(order))
        active = self.state.active
        if order and active == robot_id:
            active = order[0]
        self.state = replace(self.state, order=order, active=active if order else "")
        if not order:
            self.finished = True
            self.arrived = False
            self.end_reason = "all robots lost, depleted or blocked"

    def _check_done(self):
        if self.finished:
            return
        alive = self.alive()
        if not alive:
            self.finished = True
            self.end_reason = "all robots lost, depleted or blocked"
            return
        goal = self.scenario.target_s - self.scenario.leg_length_m
        if all(r.true_pos[0] >= goal - 1e-9 for r in alive):
            self.finished = True
            self.arrived = True
            self.end_reason = "arrived"
            self._log("*", "Arrived", target_s=self.scenario.target_s, legs=self.legs)
        elif self.legs >= self.scenario.max_legs:
            self.finished = True
            self.end_reason = "leg limit reached"

    # ------------------------------------------------------------ movement

    def _plan_chain(self, r: RobotState, target, lateral, pieces):
        """Plan ``pieces`` equal sub-hops; returns (plans, acs) or raises HopInfeasible."""
        spec = self.specs[r.id]
        s0, _, _ = r.true_pos
        s1 = target
        mass = spec.budget.dry_mass_kg + r.propellant_kg
        plans, acs = [], []
        prev = (s0, terrain.floor_at(self.profile, s0))
        for j in range(1, pieces + 1):
            s = s0 + (s1 - s0) * j / pieces
            nxt = (s, terrain.floor_at(self.profile, s))
            plan = hopplan.plan_min_fuel_hop(
                prev, nxt, self.scenario.body, self.profile, self.scenario.margin_m,
                lateral_m=lateral / pieces, m0=mass, engine=spec.engine,
            )
            a = propulsion.acs_allowance(spec.engine, mass - plan.propellant_kg, self.scenario.acs_dv_mps)
            mass -= plan.propellant_kg + a
            plans.append(plan)
            acs.append(a)
            prev = nxt
        return plans, acs

    def _try_hop(self, r: RobotState, s1: float, y1: float) -> bool:
        spec = self.specs[r.id]
        reserve = self.scenario.reserve_for(spec)
        lateral = y1 - r.true_pos[1]
        last_error = None
        for split in range(MAX_SPLITS + 1):
            pieces = 2**split
            try:
                plans, acs = self._plan_chain(r, s1, lateral, pieces)
            except HopInfeasible as exc:
                last_error = exc
                if split < MAX_SPLITS:
                    self._log(r.id, "Replan", pieces=pieces * 2, binding=exc.binding)
                continue
            need = sum(p.propellant_kg for p in plans) + sum(acs)
            if r.propellant_kg - need < reserve:
                r.mode = "Depleted"
                self._log(r.id, "Depleted", resource="propellant", remaining_kg=r.propellant_kg,
                          required_kg=need, reserve_kg=reserve)
                return False
            for plan, a in zip(plans, acs):
                self._fly(r, plan, a)
            return True
        self._log(r.id, "Blocked", binding=last_error.binding, target_s=s1)
        return False

    def _fly(self, r: RobotState, plan: hopplan.HopPlan, acs_kg: float):
        self.max_slope = max(self.max_slope, terrain.max_slope_between(self.profile, plan.origin[0], plan.target[0]))
        self._log(
            r.id, "Hop",
            from_s=plan.origin[0], to_s=plan.target[0], from_z=plan.origin[1], to_z=plan.target[1],
            lateral_m=plan.lateral_m, launch_angle_deg=plan.launch_angle, launch_speed_mps=plan.launch_speed,
            flight_time_s=plan.flight_time, apex_z=plan.apex_z, dv_launch_mps=plan.dv_launch,
            dv_land_mps=plan.dv_land, dv_total_mps=plan.dv_total, propellant_kg=plan.propellant_kg,
            acs_kg=acs_kg,
        )
        r.mode = "Airborne"
        self._spend_propellant(r, plan.propellant_kg)
        self._spend_propellant(r, acs_kg)
        t0 = self.t
        for t, s, z, _, _ in hopplan.sample_trajectory(plan, TRAJECTORY_DT_S)[1:-1]:
            self._record(r, t=t0 + t, s=s, z=z)
        self._advance_time(plan.flight_time, "flight")
        r.true_pos = (plan.target[0], r.true_pos[1] + plan.lateral_m, plan.target[1])
        r.odometer_m += plan.range_m
        r.hops_made += 1
        if r.id in self.state.order:
            r.mode = "Grounded"
        self._log(r.id, "Land", s=plan.target[0], z=plan.target[1], lateral=r.true_pos[1])

    def _try_roll(self, r: RobotState, s1: float, y1: float) -> bool:
        if not self.scenario.toggles.rolling:
            return False
        s0 = r.true_pos[0]
        slope = terrain.max_slope_between(self.profile, s0, s1)
        if slope > terrain.WHEELED_SLOPE_LIMIT_DEG:
            self._log(r.id, "Blocked", binding="slope", slope_deg=slope, target_s=s1)
            return False
        dist = math.hypot(s1 - s0, y1 - r.true_pos[1])
        prev = r.mode
        r.mode = "Rolling"
        self._log(r.id, "Roll", from_s=s0, to_s=s1, distance_m=dist, duration_s=dist / self.scenario.roll_speed_mps)
        self._advance_time(dist / self.scenario.roll_speed_mps, "rolling")
        if r.id not in self.state.order:
            return False
        self.max_slope = max(self.max_slope, slope)
        r.true_pos = (s1, y1, terrain.floor_at(self.profile, s1))
        r.odometer_m += dist
        r.mode = "Depleted" if prev == "Depleted" else "Grounded"
        return True

    # ------------------------------------------------------------ protocol

    def step(self) -> "Simulation":
        if self.finished:
            raise RuntimeError("mission already finished")
        for leg, rid in self.scenario.losses:
            if leg == self.legs and rid in self.state.order:
                degrade_network(self, rid)
        if self.finished:
            return self
        r = min(self.alive(), key=lambda x: (x.vertex, self.state.order.index(x.id)))
        self.state = replace(self.state, active=r.id, phase="Airborne")
        k = self.next_vertex
        s1, y1 = self.vertex_pos(k)
        old = r.true_pos
        moved = False
        if r.mode != "Depleted":
            moved = self._try_hop(r, s1, y1)
        if not moved and r.id in self.state.order:
            moved = self._try_roll(r, s1, y1)
        if not moved:
            if r.id in self.state.order:
                self._lose(r.id, "unable to advance", "Depleted" if r.mode == "Depleted" else "Blocked")
            self.legs += 1
            self._check_done()
            return self
        self.next_vertex += 1
        r.vertex = k

        self.state = replace(self.state, phase="Grounded-Measuring")
        truth = {x.id: x.true_pos for x in self.alive()}
        chain = navloc.ChainEstimate({x.id: x.estimate for x in self.alive()}, legs_completed=self.legs)
        toggles = self.scenario.toggles
        self.state, chain, measurements, outcome = navloc.advance_formation(
            self.state, chain, truth, (s1 - old[0], y1 - old[1]), self.sensor, self.profile,
            self.rng if toggles.noise else None, use_laser=toggles.laser, use_stereo=toggles.stereo,
        )
        for m in measurements:
            self._log(r.id, "Measure", channel=m.kind, observer=m.observer_id, target=m.target_id,
                      range_m=m.range_m, sigma=m.sigma, bearing_rad=m.bearing_rad)
        r.estimate = chain.estimates[r.id]
        err = math.hypot(r.estimate.mean[0] - r.true_pos[0], r.estimate.mean[1] - r.true_pos[1])
        for w in outcome.warnings:
            self._log(r.id, w, references=list(outcome.references))
        if outcome.method == "dead_reckoned":
            self._log(r.id, "DeadReckoned", cov_trace=r.estimate.trace, radial_error_m=err)
        else:
            self._log(r.id, "Trilaterated", method=outcome.method, references=list(outcome.references),
                      est=[float(v) for v in r.estimate.mean], cov_trace=r.estimate.trace, radial_error_m=err)

        if toggles.scan:
            before = int(self.coverage.observed.sum())
            self.coverage = scan(r, self.profile, self.coverage, self.t, self.sensor)
            used = self._drain(r, self.scenario.scan_wh)
            new = int(self.coverage.observed.sum()) - before
            self._log(r.id, "Scan", s=r.true_pos[0], z=r.true_pos[2], new_stations=new, drain_wh=used)
            if r.battery_wh <= 0:
                self._log(r.id, "Depleted", resource="battery")
                self._lose(r.id, "battery exhausted", "Depleted")

        self._advance_time(self.scenario.dwell_s, "dwell")
        self.legs += 1
        for x in self.robots.values():
            self._record(x)
        self._check_done()
        return self

    # ------------------------------------------------------------ results

    def report(self) -> MissionReport:
        robots = {}
        for r in self.robots.values():
            robots[r.id] = {
                "mode": r.mode,
                "hops": r.hops_made,
                "odometer_m": r.odometer_m,
                "true_s": r.true_pos[0],
                "propellant_initial_kg": r.propellant_initial_kg,
                "propellant_used_kg": r.propellant_used_kg,
                "propellant_remaining_kg": r.propellant_kg,
                "battery_initial_wh": r.battery_initial_wh,
                "battery_used_wh": r.battery_used_wh,
                "battery_remaining_wh": r.battery_wh,
                "radial_error_m": math.hypot(r.estimate.mean[0] - r.true_pos[0], r.estimate.mean[1] - r.true_pos[1]),
            }
        front = max(self.robots.values(), key=lambda x: (x.true_pos[0], x.id))
        err = robots[front.id]["radial_error_m"]
        dist = math.hypot(front.true_pos[0], front.true_pos[1])
        return MissionReport(
            scenario=self.scenario.name,
            seed=self.scenario.seed,
            arrived=self.arrived,
            end_reason=self.end_reason,
            legs=self.legs,
            duration_s=self.t,
            distance_covered_m=front.true_pos[0],
            hops=sum(r.hops_made for r in self.robots.values()),
            final_radial_error_m=err,
            final_relative_error_pct=100.0 * err / dist if dist > 0 else 0.0,
            coverage_fraction=self.coverage.fraction,
            wheeled_infeasible=self.max_slope > terrain.WHEELED_SLOPE_LIMIT_DEG,
            max_traversed_slope_deg=self.max_slope,
            robots=robots,
        )


def step(sim: Simulation) -> Simulation:
    return sim.step()


def degrade_network(sim: Simulation, lost_robot_id: str) -> Simulation:
    """Drop a robot; the survivors carry on with whatever fixes their number allows."""
    if lost_robot_id not in sim.robots:
        raise KeyError(f"unknown robot {lost_robot_id!r}")
    sim._lose(lost_robot_id, "lost")
    return sim


@dataclass
class MissionResult:
    report: MissionReport
    events: list
    coverage: CoverageMap
    trajectory: list

    def events_jsonl(self) -> str:
        return "".join(e.to_json() + "\n" for e in self.events)

    def trajectory_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRAJECTORY_COLUMNS)
        for row in self.trajectory:
            w.writerow([repr(row[0]), row[1]] + [repr(float(v)) for v in row[2:]])
        return buf.getvalue()

    def coverage_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("station_s", "observed", "t_first"))
        for s, obs, t in zip(self.coverage.station_s, self.coverage.observed, self.coverage.t_first):
            w.writerow([repr(float(s)), int(obs), "" if math.isnan(t) else repr(float(t))])
        return buf.getvalue()

    def files(self) -> dict[str, str]:
        return {
            "report.json": self.report.to_json(),
            "events.jsonl": self.events_jsonl(),
            "trajectory.csv": self.trajectory_csv(),
            "coverage.csv": self.coverage_csv(),
        }


def run(scenario: Scenario) -> MissionResult:
    sim = Simulation(scenario)
    while not sim.finished:
        sim.step()
    return MissionResult(sim.report(), sim.events, sim.coverage, sim.trajectory)


def atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_outputs(result: MissionResult, outdir) -> list[Path]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    for name, text in result.files().items():
        atomic_write(outdir / name, text)
        written.append(outdir / name)
    return written


# ---------------------------------------------------------------- budget


@dataclass
class BudgetRow:
    quantity: str
    unit: str
    computed: float | bool
    claimed: float | None = None
    delta: float | None = None
    flag: str = ""
    note: str = ""


CLAIMED_RANGE_KM = 5.0
CLAIMED_FLY_TIME_HR = 0.7
DISCREPANCY_THRESHOLD = 0.10


def _compare(quantity, unit, computed, claimed=None, note=""):
    row = BudgetRow(quantity, unit, computed, claimed, note=note)
    if claimed is not None:
        row.delta = computed - claimed
        rel = abs(row.delta) / abs(claimed) if claimed else math.inf
        row.flag = "DISCREPANCY" if rel > DISCREPANCY_THRESHOLD else "consistent"
    return row


def budget_report(scenario: Scenario | None = None, *, body=hopplan.MOON) -> list[BudgetRow]:
    """Computed capability of the first robot beside the published system figures.

    Without a scenario the nominal robot is used on ``body``.
    """
    if scenario is None:
        engine, power, budget = EngineSpec(), PowerSpec(), MassBudget()
        body, leg = hopplan.body_from(body), 7.0
    else:
        spec = scenario.robots[0]
        engine, power, budget, body, leg = spec.engine, spec.power, spec.budget, scenario.body, scenario.leg_length_m
    dv = propulsion.dv_capacity(engine, budget)
    endurance_s, rate = propulsion.hover_budget(engine, budget, body.g)
    need = propulsion.hover_propellant_required(engine, budget.total_kg, CLAIMED_FLY_TIME_HR * 3600, body.g)
    volume, fits = propulsion.tank_fit_check(engine, budget.propellant_kg)
    lights_off = propulsion.battery_endurance(replace(power, lights_draw_w=0.0))
    lights_on = propulsion.battery_endurance(power)
    rows = [
        _compare("dv_capacity", "m/s", dv, note=f"Isp {engine.isp_main_s:g} s, {budget.total_kg:g} kg wet, "
                 f"{budget.propellant_kg:g} kg propellant"),
        _compare("range_100m_hops", "km", hopplan.hop_sequence_range(dv, 100.0, body) / 1000, CLAIMED_RANGE_KM),
        _compare(f"range_{leg:g}m_hops", "km", hopplan.hop_sequence_range(dv, leg, body) / 1000, CLAIMED_RANGE_KM),
        _compare("hover_endurance", "hr", endurance_s / 3600, CLAIMED_FLY_TIME_HR,
                 note=f"{endurance_s:.1f} s; initial fuel rate {rate:.4e} kg/s"),
        _compare("propellant_for_claimed_fly_time", "kg", need, budget.propellant_kg,
                 note=f"propellant needed to hover {CLAIMED_FLY_TIME_HR} hr vs propellant carried"),
        _compare("battery_endurance_lights_off", "hr", lights_off),
        _compare("battery_endurance_lights_on", "hr", lights_on),
        _compare("tank_volume", "m^3", volume, note=f"lower hemisphere holds {propulsion.half_sphere_volume():.4e} m^3"),
        _compare("tank_fits", "bool", fits),
    ]
    return rows


def budget_text(rows: list[BudgetRow]) -> str:
    def fmt(v):
        if v is None:
            return "-"
        if isinstance(v, bool):
            return str(v).lower()
        return f"{v:.6g}"

    head = f"{'quantity':<34}{'unit':<6}{'computed':>14}{'claimed':>12}{'delta':>12}  flag"
    lines = [head, "-" * len(head)]
    for r in rows:
        lines.append(
            f"{r.quantity:<34}{r.unit:<6}{fmt(r.computed):>14}{fmt(r.claimed):>12}{fmt(r.delta):>12}  {r.flag}"
            + (f"  ({r.note})" if r.note else "")
        )
    flagged = [r.quantity for r in rows if r.flag == "DISCREPANCY"]
    if flagged:
        lines.append("")
        lines.append("discrepancies with the published figures: " + ", ".join(flagged))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- scenario files


_TOP_KEYS = {
    "name", "profile", "target_s", "seed", "leg_length_m", "reserve_propellant_kg", "gravity", "robots",
    "engine", "power", "mass", "sensor", "toggles", "dwell_s", "scan_wh", "acs_dv_mps", "margin_m",
    "roll_speed_mps", "coverage_step_m", "losses", "max_legs",
}
_ENGINE_KEYS = {"isp_main_s", "isp_acs_s", "g0", "of_ratio", "rho_fuel", "rho_oxidizer"}
_POWER_KEYS = {"battery_mass_kg", "specific_energy_wh_per_kg", "avionics_draw_w", "lights_draw_w"}
_MASS_KEYS = {"dry_mass_kg", "propellant_kg"}
_SENSOR_KEYS = {
    "laser_rel_sigma", "laser_max_range_m", "blob_detect_range_m", "stereo_fix_sigma_m", "dr_sigma_m",
    "sensor_height_m", "lateral_offset_m", "imu_heading",
}
_TOGGLE_KEYS = {"noise", "laser", "stereo", "scan", "rolling"}
_PROFILE_KEYS = {"name", "stations", "width_m", "entrance_slope_deg"}
_ROBOT_KEYS = {"id", "engine", "power", "mass"}


def _check_keys(obj, allowed, where):
    if not isinstance(obj, dict):
        raise ScenarioError(f"{where} must be an object")
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise ScenarioError(f"unknown field(s) in {where}: {', '.join(unknown)}")


def _numbers(obj, where):
    for k, v in obj.items():
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ScenarioError(f"{where}.{k} must be a number")
    return {k: float(v) for k, v in obj.items()}


def scenario_from_dict(data: dict) -> Scenario:
    _check_keys(data, _TOP_KEYS, "scenario")
    for key in ("profile", "target_s", "seed"):
        if key not in data:
            raise ScenarioError(f"scenario is missing required field {key!r}")
    prof = data["profile"]
    try:
        if isinstance(prof, str):
            profile = terrain.preset(prof)
        else:
            _check_keys(prof, _PROFILE_KEYS, "profile")
            profile = terrain.TubeProfile.from_stations(
                prof.get("name", "custom"), prof["stations"], prof["width_m"], prof.get("entrance_slope_deg", 0.0)
            )
    except (terrain.TerrainError, KeyError, TypeError) as exc:
        raise ScenarioError(f"bad profile: {exc}") from None

    def section(key, allowed, base=None):
        raw = data.get(key, {}) if base is None else base
        _check_keys(raw, allowed, key)
        return raw

    try:
        engine = EngineSpec(**_numbers(section("engine", _ENGINE_KEYS), "engine"))
        power = PowerSpec(**_numbers(section("power", _POWER_KEYS), "power"))
        mass = MassBudget(**_numbers(section("mass", _MASS_KEYS), "mass"))
    except propulsion.PropulsionError as exc:
        raise ScenarioError(str(exc)) from None

    robots_raw = data.get("robots", 3)
    robots = []
    if isinstance(robots_raw, int) and not isinstance(robots_raw, bool):
        if not 1 <= robots_raw <= 3:
            raise ScenarioError("robots must be 1, 2 or 3")
        robots = [RobotSpec(navloc.ROBOT_IDS[i], engine, power, mass) for i in range(robots_raw)]
    elif isinstance(robots_raw, list):
        for i, entry in enumerate(robots_raw):
            _check_keys(entry, _ROBOT_KEYS, f"robots[{i}]")
            try:
                robots.append(
                    RobotSpec(
                        str(entry.get("id", navloc.ROBOT_IDS[i] if i < 3 else str(i))),
                        replace(engine, **_numbers(section("engine", _ENGINE_KEYS, entry.get("engine", {})), "engine")),
                        replace(power, **_numbers(section("power", _POWER_KEYS, entry.get("power", {})), "power")),
                        replace(mass, **_numbers(section("mass", _MASS_KEYS, entry.get("mass", {})), "mass")),
                    )
                )
            except propulsion.PropulsionError as exc:
                raise ScenarioError(str(exc)) from None
    else:
        raise ScenarioError("robots must be a count or a list of robot objects")

    sensor_raw = section("sensor", _SENSOR_KEYS)
    sensor_kw = {k: v for k, v in sensor_raw.items() if k != "imu_heading"}
    sensor_kw = _numbers(sensor_kw, "sensor")
    if "imu_heading" in sensor_raw:
        if not isinstance(sensor_raw["imu_heading"], bool):
            raise ScenarioError("sensor.imu_heading must be true or false")
        sensor_kw["imu_heading"] = sensor_raw["imu_heading"]
    leg = data.get("leg_length_m", 7.0)
    try:
        sensor = SensorSpec(leg_length_m=float(leg), **sensor_kw)
    except ValueError as exc:
        raise ScenarioError(str(exc)) from None

    toggles_raw = section("toggles", _TOGGLE_KEYS)
    for k, v in toggles_raw.items():
        if not isinstance(v, bool):
            raise ScenarioError(f"toggles.{k} must be true or false")
    toggles = Toggles(**toggles_raw)

    try:
        body = hopplan.body_from(data.get("gravity", "moon"))
    except ValueError as exc:
        raise ScenarioError(str(exc)) from None

    seed = data["seed"]
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ScenarioError("seed must be an integer")
    losses = []
    for entry in data.get("losses", []):
        _check_keys(entry, {"robot", "at_leg"}, "losses[]")
        losses.append((int(entry["at_leg"]), str(entry["robot"])))

    kwargs = {}
    for key in ("dwell_s", "scan_wh", "acs_dv_mps", "margin_m", "roll_speed_mps", "coverage_step_m"):
        if key in data:
            kwargs[key] = float(data[key])
    if "max_legs" in data:
        kwargs["max_legs"] = int(data["max_legs"])
    reserve = data.get("reserve_propellant_kg")
    scenario = Scenario(
        profile=profile,
        target_s=float(data["target_s"]),
        seed=seed,
        robots=tuple(robots),
        leg_length_m=float(leg),
        reserve_propellant_kg=None if reserve is None else float(reserve),
        body=body,
        sensor=sensor,
        toggles=toggles,
        losses=tuple(losses),
        name=str(data.get("name", profile.name)),
        **kwargs,
    )
    scenario.validate()
    return scenario


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file {path}: {exc.strerror or exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: invalid JSON ({exc})") from None
    return scenario_from_dict(data)
