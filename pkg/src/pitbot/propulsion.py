"""Mass, propellant and energy bookkeeping for a pit-bot.

Maneuvers are impulsive; the rocket equation converts delta-v to propellant
and back. Everything here is a pure function of immutable specs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources

G0 = 9.80665

# Subsystem masses of the nominal 3 kg robot, kg.
TABLE1_MASS_BUDGET = {  # rows add to 3.2 kg; the listed total is 3 kg
    "Propulsion": 1.2,
    "Computer, Comms, Electronics": 0.2,
    "Power": 0.3,
    "Stereo Camera, Laser Ranger": 0.3,
    "Payload": 1.2,
}
NOMINAL_TOTAL_KG = 3.0
NOMINAL_PROPELLANT_KG = 1.0  # of the 1.2 kg propulsion line; the other 0.2 kg is engine and tanks
SPHERE_DIAMETER_M = 0.30


class PropulsionError(ValueError):
    pass


@dataclass(frozen=True)
class EngineSpec:
    isp_main_s: float = 330.0
    isp_acs_s: float = 180.0
    g0: float = G0
    of_ratio: float = 7.0
    rho_fuel: float = 700.0
    rho_oxidizer: float = 1190.0  # 50 wt% H2O2 solution

    def __post_init__(self):
        for name in ("isp_main_s", "isp_acs_s", "g0", "of_ratio", "rho_fuel", "rho_oxidizer"):
            if not getattr(self, name) > 0:
                raise PropulsionError(f"{name} must be positive")
        if self.isp_acs_s > self.isp_main_s:
            raise PropulsionError("isp_acs_s must not exceed isp_main_s")

    @property
    def ve_main(self) -> float:
        return self.isp_main_s * self.g0

    @property
    def ve_acs(self) -> float:
        return self.isp_acs_s * self.g0


@dataclass(frozen=True)
class MassBudget:
    dry_mass_kg: float = NOMINAL_TOTAL_KG - NOMINAL_PROPELLANT_KG
    propellant_kg: float = NOMINAL_PROPELLANT_KG

    def __post_init__(self):
        if self.propellant_kg < 0:
            raise PropulsionError("propellant_kg must be >= 0")
        if self.dry_mass_kg < 0:
            raise PropulsionError("dry_mass_kg must be >= 0")

    @property
    def total_kg(self) -> float:
        return self.dry_mass_kg + self.propellant_kg

    @classmethod
    def from_total(cls, total_kg: float, propellant_kg: float) -> "MassBudget":
        return cls(total_kg - propellant_kg, propellant_kg)


@dataclass(frozen=True)
class PowerSpec:
    battery_mass_kg: float = 0.3
    specific_energy_wh_per_kg: float = 700.0
    avionics_draw_w: float = 10.0
    lights_draw_w: float = 5.0

    def __post_init__(self):
        for name in ("battery_mass_kg", "specific_energy_wh_per_kg", "avionics_draw_w", "lights_draw_w"):
            if getattr(self, name) < 0:
                raise PropulsionError(f"{name} must be >= 0")

    @property
    def capacity_wh(self) -> float:
        return self.battery_mass_kg * self.specific_energy_wh_per_kg

    @property
    def total_draw_w(self) -> float:
        return self.avionics_draw_w + self.lights_draw_w


@dataclass(frozen=True)
class TechnologyPreset:
    name: str
    key: str
    specific_energy_wh_per_kg: float
    specific_energy_label: str
    mass_kg: float
    waste_heat_w: float
    paper_fly_time_hr: float
    paper_range_km: float
    paper_range_label: str
    propulsive: bool = False


def dv_capacity(engine: EngineSpec, budget: MassBudget) -> float:
    total, prop = budget.total_kg, budget.propellant_kg
    if prop >= total:
        raise PropulsionError("propellant mass must be below total mass")
    return engine.ve_main * math.log(total / (total - prop))


def propellant_for_dv(engine: EngineSpec, m0: float, dv: float, use_acs: bool = False) -> float:
    if dv < 0:
        raise PropulsionError(f"delta-v must be >= 0, got {dv}")
    if not m0 > 0:
        raise PropulsionError("initial mass must be positive")
    ve = engine.ve_acs if use_acs else engine.ve_main
    return -m0 * math.expm1(-dv / ve)


def hover_budget(engine: EngineSpec, budget: MassBudget, g: float) -> tuple[float, float]:
    """Hover endurance (s) burning the whole budget, and the initial fuel rate (kg/s).

    Thrust equals weight throughout, so mass decays as exp(-g t / ve).
    """
    if not g > 0:
        raise PropulsionError("gravity must be positive")
    m0 = budget.total_kg
    mf = m0 - budget.propellant_kg
    if mf <= 0:
        raise PropulsionError("propellant mass must be below total mass")
    endurance = engine.ve_main / g * math.log(m0 / mf)
    return endurance, m0 * g / engine.ve_main


def hover_propellant_required(engine: EngineSpec, m0: float, duration_s: float, g: float) -> float:
    return -m0 * math.expm1(-duration_s * g / engine.ve_main)


def acs_allowance(engine: EngineSpec, m: float, dv_per_hop: float) -> float:
    """Warm-gas attitude-control propellant charged once per hop."""
    return propellant_for_dv(engine, m, dv_per_hop, use_acs=True)


def battery_endurance(power: PowerSpec) -> float:
    """Hours of operation on the primary battery at the configured draw."""
    draw = power.total_draw_w
    if draw <= 0:
        raise PropulsionError("total power draw must be positive")
    return power.capacity_wh / draw


def tank_fit_check(engine: EngineSpec, propellant_kg: float, sphere_diameter_m: float = SPHERE_DIAMETER_M):
    """Tank volume (m^3) for a propellant load and whether it fits in the lower hemisphere."""
    if propellant_kg < 0 or not sphere_diameter_m > 0:
        raise PropulsionError("propellant must be >= 0 and diameter > 0")
    of = engine.of_ratio
    volume = propellant_kg * of / (1 + of) / engine.rho_oxidizer + propellant_kg / (1 + of) / engine.rho_fuel
    r = sphere_diameter_m / 2
    return volume, volume <= 2.0 / 3.0 * math.pi * r**3


def half_sphere_volume(sphere_diameter_m: float = SPHERE_DIAMETER_M) -> float:
    return 2.0 / 3.0 * math.pi * (sphere_diameter_m / 2) ** 3


def load_technology_presets() -> list[TechnologyPreset]:
    text = resources.files("pitbot.data").joinpath("technology_presets.json").read_text(encoding="utf-8")
    return [TechnologyPreset(**row) for row in json.loads(text)]


@dataclass
class TechnologyRow:
    name: str
    specific_energy_label: str
    mass_kg: float
    waste_heat_w: float
    computed_range_km: float
    claimed_range_km: float
    claimed_range_label: str
    computed_hover_hr: float
    claimed_fly_time_hr: float
    notes: list[str] = field(default_factory=list)


def technology_report(
    presets: list[TechnologyPreset],
    hop_length_m: float,
    g: float,
    engine: EngineSpec | None = None,
    budget: MassBudget | None = None,
) -> list[TechnologyRow]:
    """Computed fly range and hover time beside each row's claimed figures.

    Only propulsive rows fly; the others report zero computed range so the
    claimed rolling ranges stand out.
    """
    from pitbot.hopplan import hop_sequence_range

    if not hop_length_m > 0:
        raise PropulsionError("hop length must be positive")
    engine = engine or EngineSpec()
    budget = budget or MassBudget()
    rows = []
    for p in presets:
        notes = []
        if p.propulsive:
            range_km = hop_sequence_range(dv_capacity(engine, budget), hop_length_m, g) / 1000.0
            hover_hr = hover_budget(engine, budget, g)[0] / 3600.0
        else:
            range_km = 0.0
            hover_hr = 0.0
            if p.paper_range_km > 0:
                notes.append("claimed range is non-flying mobility")
        if p.paper_range_label.endswith("*"):
            notes.append("claimed range footnoted")
        rows.append(
            TechnologyRow(
                name=p.name,
                specific_energy_label=p.specific_energy_label,
                mass_kg=p.mass_kg,
                waste_heat_w=p.waste_heat_w,
                computed_range_km=range_km,
                claimed_range_km=p.paper_range_km,
                claimed_range_label=p.paper_range_label,
                computed_hover_hr=hover_hr,
                claimed_fly_time_hr=p.paper_fly_time_hr,
                notes=notes,
            )
        )
    return rows
