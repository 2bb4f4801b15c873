"""Bucket-brigade localization for a small robot formation.

Robots sit on the vertices of a triangle strip laid along the tube. Each leg
the rear robot hops to the next vertex and is fixed from the robots that
stayed put: laser ranges to both (trilateration), a laser range plus a
stereo bearing to one, a stereo range/bearing fix, or dead reckoning when
nothing is visible.

With ``imu_heading`` on (the default) the fix is solved in a local frame
whose orientation comes from the IMU, then placed on the nearest anchor's
estimate. Error then accumulates leg by leg as a random walk. With it off,
the mover is trilaterated directly from both anchor estimates, which also
propagates heading error along the chain and grows much faster.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace

import numpy as np

from pitbot import terrain

ROBOT_IDS = ("A", "B", "C")
PHASES = ("Planning", "Airborne", "Grounded-Measuring")

_RANGE_TOL = 1e-9
COLLINEAR_RATIO = 0.05
MAX_INFLATION = 1e3

CALIBRATION_NOTE = (
    "The published 0.3-0.5 % error at 1 km is reproduced by calibrating stereo_fix_sigma_m "
    "(0.25 m per fix); it is not derived from the laser range specification, whose noise "
    "alone gives errors orders of magnitude smaller."
)


class MeasurementUnavailable(Exception):
    pass


class OutOfRange(MeasurementUnavailable):
    pass


class Occluded(MeasurementUnavailable):
    pass


class NotVisible(MeasurementUnavailable):
    pass


@dataclass(frozen=True)
class SensorSpec:
    laser_rel_sigma: float = 2.5e-5
    laser_max_range_m: float = 70.0
    blob_detect_range_m: float = 7.0
    stereo_fix_sigma_m: float = 0.25
    leg_length_m: float = 7.0
    dr_sigma_m: float = 0.5
    sensor_height_m: float = 0.3
    lateral_offset_m: float = 0.25
    imu_heading: bool = True

    def __post_init__(self):
        for name in (
            "laser_rel_sigma",
            "laser_max_range_m",
            "blob_detect_range_m",
            "stereo_fix_sigma_m",
            "leg_length_m",
            "dr_sigma_m",
        ):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.sensor_height_m < 0 or self.lateral_offset_m < 0:
            raise ValueError("sensor_height_m and lateral_offset_m must be >= 0")
        if 2 * self.lateral_offset_m >= self.leg_length_m:
            raise ValueError("lateral_offset_m must be below half the leg length")


@dataclass(frozen=True, eq=False)
class PoseEstimate:
    mean: np.ndarray
    cov: np.ndarray
    flags: frozenset = frozenset()

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float).reshape(2)
        cov = np.array(self.cov, dtype=float).reshape(2, 2)
        cov = 0.5 * (cov + cov.T)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @classmethod
    def exact(cls, x: float, y: float) -> "PoseEstimate":
        return cls(np.array([x, y]), np.zeros((2, 2)))

    @property
    def trace(self) -> float:
        return float(self.cov[0, 0] + self.cov[1, 1])

    def __eq__(self, other):
        if not isinstance(other, PoseEstimate):
            return NotImplemented
        return (
            np.array_equal(self.mean, other.mean)
            and np.array_equal(self.cov, other.cov)
            and self.flags == other.flags
        )


@dataclass(frozen=True)
class Measurement:
    kind: str  # "LaserRange" or "StereoFix"
    observer_id: str
    target_id: str
    range_m: float
    sigma: float
    bearing_rad: float | None = None


@dataclass(frozen=True)
class FormationState:
    order: tuple[str, ...] = ROBOT_IDS
    active: str = "A"
    phase: str = "Planning"
    leg_index: int = 0

    def next_active(self) -> str:
        i = self.order.index(self.active)
        return self.order[(i + 1) % len(self.order)]


@dataclass(frozen=True)
class ChainEstimate:
    estimates: dict
    anchor: tuple[float, float] = (0.0, 0.0)
    legs_completed: int = 0


@dataclass(frozen=True)
class FixOutcome:
    method: str  # laser_trilateration | laser_range_stereo_bearing | stereo_fix | dead_reckoned
    references: tuple[str, ...] = ()
    warnings: tuple[str, ...] = ()


# ---------------------------------------------------------------- geometry


def strip_step(spec: SensorSpec) -> float:
    """Along-tube advance per vertex so consecutive vertices are one leg length apart."""
    return math.sqrt(spec.leg_length_m**2 - (2 * spec.lateral_offset_m) ** 2)


def vertex(k: int, spec: SensorSpec) -> tuple[float, float]:
    """Floor-plane position (s, lateral) of formation vertex ``k``."""
    y = spec.lateral_offset_m if k % 2 == 0 else -spec.lateral_offset_m
    return k * strip_step(spec), y


def _sensor_point(p, spec: SensorSpec):
    return (p[0], p[2] + spec.sensor_height_m)


def _visible(a, b, spec, profile) -> bool:
    if profile is None:
        return True
    return terrain.line_of_sight(profile, _sensor_point(a, spec), _sensor_point(b, spec))


def _distance3(a, b) -> float:
    return math.sqrt((a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2 + (a[2] - b[2]) ** 2)


# ---------------------------------------------------------------- sensing


def measure_laser(truth_a, truth_b, spec: SensorSpec, profile=None, rng=None, *, ids=("?", "?")) -> Measurement:
    """Laser range from ``truth_a`` to ``truth_b`` (both ``(s, y, z)``, z at the floor).

    ``rng=None`` disables noise.
    """
    d = _distance3(truth_a, truth_b)
    if d > spec.laser_max_range_m + _RANGE_TOL:
        raise OutOfRange(f"{d:.3f} m exceeds laser range {spec.laser_max_range_m} m")
    if not _visible(truth_a, truth_b, spec, profile):
        raise Occluded("no line of sight")
    sigma = spec.laser_rel_sigma * d
    r = d + (rng.normal(0.0, sigma) if rng is not None else 0.0)
    return Measurement("LaserRange", ids[0], ids[1], max(r, 0.0), sigma if sigma > 0 else 1e-12)


def measure_stereo(observer_truth, target_truth, spec: SensorSpec, profile=None, rng=None, *, ids=("?", "?")) -> Measurement:
    """Blob-detected range and bearing to a lit robot within stereo reach.

    Noise is applied to the floor-plane offset, ``stereo_fix_sigma_m`` per
    axis; bearing is in the IMU-referenced frame.
    """
    d = _distance3(observer_truth, target_truth)
    if d > spec.blob_detect_range_m + _RANGE_TOL:
        raise NotVisible(f"{d:.3f} m exceeds blob detection range {spec.blob_detect_range_m} m")
    if not _visible(observer_truth, target_truth, spec, profile):
        raise NotVisible("target occluded")
    dx = target_truth[0] - observer_truth[0]
    dy = target_truth[1] - observer_truth[1]
    if rng is not None:
        nx, ny = rng.normal(0.0, spec.stereo_fix_sigma_m, size=2)
        dx, dy = dx + nx, dy + ny
    return Measurement(
        "StereoFix", ids[0], ids[1], math.hypot(dx, dy), spec.stereo_fix_sigma_m, math.atan2(dy, dx)
    )


# ---------------------------------------------------------------- estimation


def trilaterate(
    anchor1: PoseEstimate,
    anchor2: PoseEstimate,
    r1: float,
    r2: float,
    side_hint: int = 1,
    sigma_r1: float = 0.0,
    sigma_r2: float = 0.0,
) -> PoseEstimate:
    """Circle-circle intersection with first-order covariance.

    The covariance is J diag(P1, P2, s1^2, s2^2) J^T with J taken from the
    implicit equations |p - a_i|^2 = r_i^2. Non-intersecting circles give
    a point on the line of centres flagged ``Degraded``; near-collinear
    geometry is flagged ``GeometryWarning`` and its covariance inflated.
    """
    p1, p2 = anchor1.mean, anchor2.mean
    delta = p2 - p1
    d = float(math.hypot(delta[0], delta[1]))
    if d <= 1e-9:
        raise ValueError("anchors must be distinct")
    if not (r1 > 0 and r2 > 0):
        raise ValueError("ranges must be positive")
    ex = delta / d
    ey = np.array([-ex[1], ex[0]])
    a = (r1 * r1 - r2 * r2 + d * d) / (2 * d)
    h_sq = r1 * r1 - a * a
    flags = set()
    residual = 0.0
    if h_sq < 0:
        flags.add("Degraded")
        residual = math.sqrt(-h_sq)
        h = 0.0
    else:
        h = math.sqrt(h_sq)
    side = 1.0 if side_hint >= 0 else -1.0
    p = p1 + a * ex + side * h * ey

    u1 = p - p1
    u2 = p - p2
    A = np.vstack((u1, u2))
    ratio = h / d
    if ratio < COLLINEAR_RATIO:
        flags.add("GeometryWarning")
    if h > 1e-9 * d:
        det = u1[0] * u2[1] - u1[1] * u2[0]
        Ainv = np.array([[u2[1], -u1[1]], [-u2[0], u1[0]]]) / det
    else:
        Ainv = np.linalg.pinv(A)
    c1, c2 = Ainv[:, 0], Ainv[:, 1]
    # J = [c1 u1^T, c2 u2^T, r1 c1, r2 c2] against (anchor1, anchor2, r1, r2)
    cov = (
        float(u1 @ anchor1.cov @ u1) * np.outer(c1, c1)
        + float(u2 @ anchor2.cov @ u2) * np.outer(c2, c2)
        + (r1 * sigma_r1) ** 2 * np.outer(c1, c1)
        + (r2 * sigma_r2) ** 2 * np.outer(c2, c2)
    )
    if "GeometryWarning" in flags:
        cov = cov * min(1.0 / ratio if ratio > 0 else MAX_INFLATION, MAX_INFLATION)
    if residual:
        cov = cov + residual**2 * np.eye(2)
    return PoseEstimate(p, cov, frozenset(flags))


def polar_fix(reference: PoseEstimate, range_m, bearing_rad, sigma_range, sigma_cross) -> PoseEstimate:
    """Place a robot from a reference estimate by range and IMU-frame bearing."""
    c, s = math.cos(bearing_rad), math.sin(bearing_rad)
    along = np.array([c, s])
    cross = np.array([-s, c])
    local = sigma_range**2 * np.outer(along, along) + sigma_cross**2 * np.outer(cross, cross)
    return PoseEstimate(reference.mean + range_m * along, reference.cov + local)


def _horizontal(r: float, dz: float) -> float:
    return math.sqrt(max(r * r - dz * dz, 0.0))


def _side(anchor1, anchor2, point) -> int:
    c = (anchor2[0] - anchor1[0]) * (point[1] - anchor1[1]) - (anchor2[1] - anchor1[1]) * (point[0] - anchor1[0])
    return 1 if c >= 0 else -1


def fix_mover(
    mover: str,
    truth: dict,
    estimates: dict,
    anchors: list[str],
    displacement: tuple[float, float],
    spec: SensorSpec,
    profile=None,
    rng=None,
    *,
    use_laser: bool = True,
    use_stereo: bool = True,
    mover_prior: PoseEstimate | None = None,
):
    """Best available fix for a robot that just landed.

    ``truth`` maps id -> (s, y, z_floor); ``estimates`` holds the anchors'
    estimates. Anchors are tried nearest first. Returns the new estimate,
    the measurements taken and a FixOutcome.
    """
    pm = truth[mover]
    ordered = sorted(anchors, key=lambda a: (_distance3(pm, truth[a]), a))
    measurements = []
    lasers = {}
    stereo = {}
    for a in ordered:
        if use_laser:
            try:
                m = measure_laser(truth[a], pm, spec, profile, rng, ids=(a, mover))
            except MeasurementUnavailable:
                pass
            else:
                lasers[a] = m
                measurements.append(m)
        if use_stereo:
            try:
                m = measure_stereo(truth[a], pm, spec, profile, rng, ids=(a, mover))
            except MeasurementUnavailable:
                pass
            else:
                stereo[a] = m
                measurements.append(m)

    laser_refs = [a for a in ordered if a in lasers]
    if len(laser_refs) >= 2:
        a1, a2 = laser_refs[:2]
        est, outcome = _laser_trilateration(
            mover, a1, a2, truth, estimates, lasers, spec, profile, rng, measurements
        )
        return est, measurements, outcome

    both = [a for a in ordered if a in lasers and a in stereo]
    if both:
        a = both[0]
        r = _horizontal(lasers[a].range_m, pm[2] - truth[a][2])
        est = polar_fix(estimates[a], r, stereo[a].bearing_rad, lasers[a].sigma, spec.stereo_fix_sigma_m)
        return est, measurements, FixOutcome("laser_range_stereo_bearing", (a,))

    stereo_refs = [a for a in ordered if a in stereo]
    if stereo_refs:
        a = stereo_refs[0]
        m = stereo[a]
        est = polar_fix(estimates[a], m.range_m, m.bearing_rad, spec.stereo_fix_sigma_m, spec.stereo_fix_sigma_m)
        return est, measurements, FixOutcome("stereo_fix", (a,))

    prior = mover_prior if mover_prior is not None else estimates[mover]
    est = PoseEstimate(
        prior.mean + np.asarray(displacement, dtype=float), prior.cov + spec.dr_sigma_m**2 * np.eye(2)
    )
    return est, measurements, FixOutcome("dead_reckoned")


def _laser_trilateration(mover, a1, a2, truth, estimates, lasers, spec, profile, rng, measurements):
    pm, t1, t2 = truth[mover], truth[a1], truth[a2]
    r1 = _horizontal(lasers[a1].range_m, pm[2] - t1[2])
    r2 = _horizontal(lasers[a2].range_m, pm[2] - t2[2])
    s1, s2 = lasers[a1].sigma, lasers[a2].sigma
    side = _side(t1, t2, pm)
    if spec.imu_heading:
        try:
            base = measure_laser(t1, t2, spec, profile, rng, ids=(a1, a2))
        except MeasurementUnavailable:
            base = None
        if base is not None:
            measurements.append(base)
            ux, uy = t2[0] - t1[0], t2[1] - t1[1]
            n = math.hypot(ux, uy)
            u = np.array([ux / n, uy / n])
            d12 = _horizontal(base.range_m, t2[2] - t1[2])
            local = trilaterate(
                PoseEstimate.exact(0.0, 0.0),
                PoseEstimate(d12 * u, base.sigma**2 * np.outer(u, u)),
                r1,
                r2,
                side,
                s1,
                s2,
            )
            ref = estimates[a1]
            est = PoseEstimate(ref.mean + local.mean, ref.cov + local.cov, local.flags)
            return est, FixOutcome("laser_trilateration", (a1, a2), tuple(sorted(local.flags)))
    est = trilaterate(estimates[a1], estimates[a2], r1, r2, side, s1, s2)
    return est, FixOutcome("laser_trilateration", (a1, a2), tuple(sorted(est.flags)))


def advance_formation(
    state: FormationState,
    chain: ChainEstimate,
    truth: dict,
    displacement: tuple[float, float],
    spec: SensorSpec,
    profile=None,
    rng=None,
    *,
    use_laser: bool = True,
    use_stereo: bool = True,
):
    """Close out one leg for ``state.active``, whose truth already sits at the new vertex.

    ``displacement`` is the planned floor-plane move, used when no fix is
    possible. Returns the next state, updated chain, measurements and the
    FixOutcome.
    """
    mover = state.active
    anchors = [r for r in state.order if r != mover]
    est, measurements, outcome = fix_mover(
        mover,
        truth,
        chain.estimates,
        anchors,
        displacement,
        spec,
        profile,
        rng,
        use_laser=use_laser,
        use_stereo=use_stereo,
    )
    estimates = dict(chain.estimates)
    estimates[mover] = est
    new_chain = replace(chain, estimates=estimates, legs_completed=chain.legs_completed + 1)
    new_state = replace(state, active=state.next_active(), phase="Planning", leg_index=state.leg_index + 1)
    return new_state, new_chain, measurements, outcome


def initial_formation(spec: SensorSpec, ids=ROBOT_IDS, z_of=None):
    """Robots on vertices 0..n-1 with exact estimates; vertex 0 is the base anchor."""
    truth = {}
    estimates = {}
    for k, rid in enumerate(ids):
        s, y = vertex(k, spec)
        z = z_of(s) if z_of else 0.0
        truth[rid] = (s, y, z)
        estimates[rid] = PoseEstimate.exact(s, y)
    state = FormationState(order=tuple(ids), active=ids[0])
    chain = ChainEstimate(estimates=estimates, anchor=vertex(0, spec))
    return state, chain, truth


# ---------------------------------------------------------------- Monte Carlo


@dataclass
class ErrorStats:
    legs: int
    trials: int
    seed: int
    robots: int
    leg_length_m: float
    use_laser: bool
    use_stereo: bool
    noise: bool
    imu_heading: bool
    checkpoint_distance_m: list = field(default_factory=list)
    checkpoint_leg: list = field(default_factory=list)
    checkpoint_mean_m: list = field(default_factory=list)
    checkpoint_median_m: list = field(default_factory=list)
    checkpoint_p95_m: list = field(default_factory=list)
    per_leg_mean_m: list = field(default_factory=list)
    final_distance_m: float = 0.0
    final_mean_m: float = 0.0
    final_median_m: float = 0.0
    final_p95_m: float = 0.0
    relative_error_pct: float = 0.0
    growth_exponent: float | None = None
    methods: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["note"] = CALIBRATION_NOTE
        return d

    def to_text(self) -> str:
        lines = [
            f"legs: {self.legs}",
            f"leg_length_m: {self.leg_length_m}",
            f"trials: {self.trials}",
            f"seed: {self.seed}",
            f"robots: {self.robots}",
            f"channels: laser={'on' if self.use_laser else 'off'} stereo={'on' if self.use_stereo else 'off'} noise={'on' if self.noise else 'off'}",
            f"imu_heading: {self.imu_heading}",
        ]
        for dist, leg, mean, med, p95 in zip(
            self.checkpoint_distance_m,
            self.checkpoint_leg,
            self.checkpoint_mean_m,
            self.checkpoint_median_m,
            self.checkpoint_p95_m,
        ):
            lines.append(f"checkpoint_{int(dist)}m: leg={leg} mean={mean:.6g} median={med:.6g} p95={p95:.6g}")
        growth = "n/a" if self.growth_exponent is None else f"{self.growth_exponent:.4f}"
        lines += [
            f"final_distance_m: {self.final_distance_m:.3f}",
            f"final_mean_radial_error_m: {self.final_mean_m:.6g}",
            f"final_median_radial_error_m: {self.final_median_m:.6g}",
            f"final_p95_radial_error_m: {self.final_p95_m:.6g}",
            f"mean_relative_error_pct: {self.relative_error_pct:.6g}",
            f"growth_exponent: {growth}",
            "fix_methods: " + ", ".join(f"{k}={v}" for k, v in sorted(self.methods.items())),
            f"note: {CALIBRATION_NOTE}",
        ]
        return "\n".join(lines) + "\n"


def growth_exponent(legs: np.ndarray, errors: np.ndarray) -> float | None:
    """Least-squares slope of log(error) against log(leg)."""
    mask = errors > 0
    if mask.sum() < 2:
        return None
    slope, _ = np.polyfit(np.log(legs[mask]), np.log(errors[mask]), 1)
    return float(slope)


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(trial)])


def run_trial(legs: int, spec: SensorSpec, rng, *, robots=3, use_laser=True, use_stereo=True, noise=True):
    """One chain of ``legs`` legs; returns per-leg (truth, estimate, radial error) and fix methods."""
    ids = ROBOT_IDS[:robots]
    state, chain, truth = initial_formation(spec, ids)
    next_vertex = len(ids)
    rows = []
    methods = {}
    for _ in range(legs):
        mover = state.active
        old = truth[mover]
        s, y = vertex(next_vertex, spec)
        next_vertex += 1
        truth[mover] = (s, y, 0.0)
        state, chain, _, outcome = advance_formation(
            state,
            chain,
            truth,
            (s - old[0], y - old[1]),
            spec,
            None,
            rng if noise else None,
            use_laser=use_laser,
            use_stereo=use_stereo,
        )
        methods[outcome.method] = methods.get(outcome.method, 0) + 1
        est = chain.estimates[mover].mean
        rows.append((s, y, float(est[0]), float(est[1]), math.hypot(est[0] - s, est[1] - y)))
    return rows, methods


def run_localization_mc(
    legs: int,
    trials: int,
    seed: int,
    spec: SensorSpec | None = None,
    *,
    robots: int = 3,
    use_laser: bool = True,
    use_stereo: bool = True,
    noise: bool = True,
    checkpoint_every_m: float = 100.0,
    trace: list | None = None,
) -> ErrorStats:
    """Error growth of the localization chain over independent seeded trials.

    Trial ``i`` draws from its own stream seeded by ``(seed, i)``; results
    are reduced in trial order. Pass a list as ``trace`` to collect
    per-leg rows ``(trial, leg, true_x, true_y, est_x, est_y, radial_error_m)``.
    """
    if trials < 1 or legs < 1:
        raise ValueError("need at least one trial and one leg")
    if not 1 <= robots <= 3:
        raise ValueError("robots must be 1, 2 or 3")
    spec = spec or SensorSpec()
    errors = np.zeros((trials, legs))
    methods: dict[str, int] = {}
    truth_xy = None
    for t in range(trials):
        rows, m = run_trial(
            legs, spec, trial_rng(seed, t), robots=robots, use_laser=use_laser, use_stereo=use_stereo, noise=noise
        )
        for k, v in m.items():
            methods[k] = methods.get(k, 0) + v
        errors[t] = [r[4] for r in rows]
        if truth_xy is None:
            truth_xy = np.array([(r[0], r[1]) for r in rows])
        if trace is not None:
            trace.extend((t, leg + 1) + r for leg, r in enumerate(rows))

    dist = np.hypot(truth_xy[:, 0], truth_xy[:, 1])
    mean = errors.mean(axis=0)
    stats = ErrorStats(
        legs=legs,
        trials=trials,
        seed=seed,
        robots=robots,
        leg_length_m=spec.leg_length_m,
        use_laser=use_laser,
        use_stereo=use_stereo,
        noise=noise,
        imu_heading=spec.imu_heading,
        per_leg_mean_m=[float(v) for v in mean],
        methods=dict(sorted(methods.items())),
    )
    mark = checkpoint_every_m
    for k in range(legs):
        while dist[k] >= mark:
            col = errors[:, k]
            stats.checkpoint_distance_m.append(float(mark))
            stats.checkpoint_leg.append(k + 1)
            stats.checkpoint_mean_m.append(float(col.mean()))
            stats.checkpoint_median_m.append(float(np.median(col)))
            stats.checkpoint_p95_m.append(float(np.percentile(col, 95)))
            mark += checkpoint_every_m
    final = errors[:, -1]
    stats.final_distance_m = float(dist[-1])
    stats.final_mean_m = float(final.mean())
    stats.final_median_m = float(np.median(final))
    stats.final_p95_m = float(np.percentile(final, 95))
    stats.relative_error_pct = 100.0 * stats.final_mean_m / stats.final_distance_m
    if noise:
        stats.growth_exponent = growth_exponent(np.arange(1, legs + 1, dtype=float), mean)
    return stats


TRACE_COLUMNS = ("trial", "leg", "true_x", "true_y", "est_x", "est_y", "radial_error_m")


def trace_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_COLUMNS)
    for r in rows:
        w.writerow([r[0], r[1]] + [repr(float(v)) for v in r[2:]])
    return buf.getvalue()
