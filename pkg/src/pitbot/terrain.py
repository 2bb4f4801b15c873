"""Lava-tube corridor geometry.

A tube is a vertical profile (floor and ceiling polylines over arc length
``s``) extruded to a constant width. All queries are exact on the
piecewise-linear polylines.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources

import numpy as np

WHEELED_SLOPE_LIMIT_DEG = 30.0

_EPS = 1e-12


class TerrainError(ValueError):
    """Raised for malformed profiles and out-of-range queries."""


@dataclass(frozen=True, eq=False)
class TubeProfile:
    name: str
    s: np.ndarray
    floor_z: np.ndarray
    ceiling_z: np.ndarray
    width_m: float
    entrance_slope_deg: float = 0.0

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float)
        f = np.asarray(self.floor_z, dtype=float)
        c = np.asarray(self.ceiling_z, dtype=float)
        if s.ndim != 1 or len(s) < 2 or not (len(s) == len(f) == len(c)):
            raise TerrainError("profile needs at least two stations of (s, floor_z, ceiling_z)")
        if s[0] != 0.0:
            raise TerrainError("first station must be at s = 0")
        if np.any(np.diff(s) <= 0):
            raise TerrainError("station s values must be strictly increasing")
        if np.any(c <= f):
            raise TerrainError("ceiling_z must exceed floor_z at every station")
        if not self.width_m > 0:
            raise TerrainError("width_m must be positive")
        for arr in (s, f, c):
            arr.setflags(write=False)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "floor_z", f)
        object.__setattr__(self, "ceiling_z", c)

    @classmethod
    def from_stations(cls, name, stations, width_m, entrance_slope_deg=0.0):
        arr = np.asarray(stations, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 3:
            raise TerrainError("stations must be a list of [s, floor_z, ceiling_z] triples")
        return cls(name, arr[:, 0], arr[:, 1], arr[:, 2], float(width_m), float(entrance_slope_deg))

    @property
    def length(self) -> float:
        return float(self.s[-1])

    def stations(self) -> list[tuple[float, float, float]]:
        return [(float(a), float(b), float(c)) for a, b, c in zip(self.s, self.floor_z, self.ceiling_z)]

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "stations": [list(t) for t in self.stations()],
            "width_m": self.width_m,
            "entrance_slope_deg": self.entrance_slope_deg,
        }

    def _check_s(self, s: float) -> None:
        if not (0.0 <= s <= self.s[-1]) or math.isnan(s):
            raise TerrainError(f"s = {s} outside profile range [0, {self.s[-1]}]")


def floor_at(profile: TubeProfile, s: float) -> float:
    profile._check_s(s)
    return float(np.interp(s, profile.s, profile.floor_z))


def ceiling_at(profile: TubeProfile, s: float) -> float:
    profile._check_s(s)
    return float(np.interp(s, profile.s, profile.ceiling_z))


def clearance_at(profile: TubeProfile, s: float) -> float:
    return ceiling_at(profile, s) - floor_at(profile, s)


def _segment_index(profile: TubeProfile, s: float) -> int:
    # segment to the right of a station; the last station uses the final segment
    i = int(np.searchsorted(profile.s, s, side="right")) - 1
    return min(max(i, 0), len(profile.s) - 2)


def slope_at(profile: TubeProfile, s: float) -> float:
    """Floor slope magnitude in degrees of the segment containing ``s``."""
    profile._check_s(s)
    i = _segment_index(profile, s)
    ds = profile.s[i + 1] - profile.s[i]
    dz = profile.floor_z[i + 1] - profile.floor_z[i]
    return math.degrees(math.atan(abs(dz / ds)))


def max_slope_between(profile: TubeProfile, s0: float, s1: float) -> float:
    """Steepest floor slope (degrees) over every segment the span s0..s1 touches."""
    lo, hi = min(s0, s1), max(s0, s1)
    if hi - lo < _EPS:
        return slope_at(profile, lo)
    profile._check_s(lo)
    profile._check_s(hi)
    touched = (profile.s[:-1] < hi) & (profile.s[1:] > lo)
    grades = np.abs(np.diff(profile.floor_z) / np.diff(profile.s))[touched]
    return float(np.degrees(np.arctan(grades.max())))


def inside(profile: TubeProfile, p: tuple[float, float], tol: float = 1e-9) -> bool:
    s, z = p
    if not (-tol <= s <= profile.s[-1] + tol):
        return False
    s = min(max(s, 0.0), profile.length)
    return floor_at(profile, s) - tol <= z <= ceiling_at(profile, s) + tol


def line_of_sight(profile: TubeProfile, p1: tuple[float, float], p2: tuple[float, float]) -> bool:
    """True iff the segment p1-p2 stays strictly between floor and ceiling.

    Endpoints may touch a boundary. Between consecutive breakpoints (the
    endpoints plus every station crossed) both gaps are linear in ``s``, so
    checking the breakpoints is exact.
    """
    for p in (p1, p2):
        if not inside(profile, p):
            raise TerrainError(f"point {p} lies outside the corridor")
    (s1, z1), (s2, z2) = p1, p2
    if s1 > s2:
        (s1, z1), (s2, z2) = (s2, z2), (s1, z1)
    if s2 - s1 < _EPS:
        return True
    s1 = min(max(s1, 0.0), profile.length)
    s2 = min(max(s2, 0.0), profile.length)
    interior = profile.s[(profile.s > s1) & (profile.s < s2)]
    bs = np.concatenate(([s1], interior, [s2]))
    zs = z1 + (z2 - z1) * (bs - s1) / (s2 - s1)
    below = zs - np.interp(bs, profile.s, profile.floor_z)
    above = np.interp(bs, profile.s, profile.ceiling_z) - zs
    for gap in (below, above):
        if np.any(gap[1:-1] <= _EPS):
            return False
        # a sub-interval with both ends on the boundary runs along it
        touching = gap <= _EPS
        if np.any(touching[:-1] & touching[1:]):
            return False
    return True


def _load_presets() -> dict:
    text = resources.files("pitbot.data").joinpath("terrain_presets.json").read_text(encoding="utf-8")
    return json.loads(text)


PRESET_NAMES = ("flat_tube", "mare_ingenii_pit", "zigzag_tube")


def preset(name: str) -> TubeProfile:
    data = _load_presets()
    if name not in data:
        raise TerrainError(f"unknown terrain preset {name!r}; valid presets: {', '.join(sorted(data))}")
    entry = data[name]
    if "zigzag" in entry:
        z = entry["zigzag"]
        n = int(z["length_m"] // z["period_m"])
        stations = [
            [i * z["period_m"], z["ridge_z"] if i % 2 else 0.0, z["ceiling_z"]] for i in range(n + 1)
        ]
    else:
        stations = entry["stations"]
    return TubeProfile.from_stations(name, stations, entry["width_m"], entry.get("entrance_slope_deg", 0.0))
