"""Atomic measure types and their JSON round-trip.

Two kinds of measures appear throughout: trait measures (positive real
weights at distinct locations, the latent object) and observation measures
(positive integer counts at distinct locations, the data). Locations live on
the unit interval ``[0, 1)``; only their identity matters, the geometry never
enters any formula.

Serialization writes every float as a 17-significant-digit decimal string, so
a dump/load cycle reproduces the exact same doubles and byte-identical files
can be diffed across runs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, DomainError


def _check_float(name: str, value, *, positive: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float, np.floating, np.integer)):
        raise DomainError(f"{name} must be a real number, got {value!r}")
    x = float(value)
    if not np.isfinite(x):
        raise DomainError(f"{name} must be finite, got {x}")
    if positive and x <= 0.0:
        raise DomainError(f"{name} must be positive, got {x}")
    return x


@dataclass(frozen=True, slots=True)
class Location:
    """A point of the unit interval, compared by exact float value."""

    value: float

    def __post_init__(self):
        v = _check_float("location", self.value)
        if not 0.0 <= v < 1.0:
            raise DomainError(f"location must lie in [0, 1), got {v}")
        object.__setattr__(self, "value", v)


@dataclass(frozen=True, slots=True)
class Atom:
    """A single weighted atom of a trait measure."""

    weight: float
    location: Location

    def __post_init__(self):
        object.__setattr__(self, "weight", _check_float("weight", self.weight, positive=True))
        if not isinstance(self.location, Location):
            object.__setattr__(self, "location", Location(self.location))


@dataclass(frozen=True, slots=True)
class ObservationAtom:
    """A positive integer count attached to a location."""

    count: int
    location: Location

    def __post_init__(self):
        c = self.count
        if isinstance(c, bool) or not isinstance(c, (int, np.integer)):
            raise DomainError(f"count must be an integer, got {c!r}")
        if int(c) < 1:
            raise DomainError(f"count must be >= 1, got {c}")
        object.__setattr__(self, "count", int(c))
        if not isinstance(self.location, Location):
            object.__setattr__(self, "location", Location(self.location))


@dataclass(frozen=True, slots=True)
class TruncationMeta:
    """How a finite trait-measure realization relates to the infinite model.

    ``kind`` is ``"truncated"`` when the ordinary component was cut after
    ``rounds`` size-biased rounds and counts above ``count_cap``, or
    ``"exact-finite"`` when the realization is exact (no ordinary component
    was discarded).
    """

    kind: str
    rounds: int | None = None
    count_cap: int | None = None

    def __post_init__(self):
        if self.kind not in ("truncated", "exact-finite"):
            raise DomainError(f"truncation kind must be 'truncated' or 'exact-finite', got {self.kind!r}")
        if self.kind == "truncated":
            if self.rounds is None or int(self.rounds) < 1:
                raise DomainError(f"truncated measures need rounds >= 1, got {self.rounds}")
            if self.count_cap is None or int(self.count_cap) < 1:
                raise DomainError(f"truncated measures need count_cap >= 1, got {self.count_cap}")
            object.__setattr__(self, "rounds", int(self.rounds))
            object.__setattr__(self, "count_cap", int(self.count_cap))
        elif self.rounds is not None or self.count_cap is not None:
            raise DomainError("exact-finite measures carry no rounds/count_cap")


EXACT_FINITE = TruncationMeta("exact-finite")


def _require_distinct(locations: Iterable[Location], what: str) -> None:
    values = [loc.value for loc in locations]
    if len(set(values)) != len(values):
        raise DomainError(f"{what} must sit at pairwise distinct locations")


@dataclass(frozen=True, slots=True)
class TraitMeasure:
    """A finite discrete measure with positive real weights.

    ``fixed_atoms`` are the atoms at the model's fixed locations (kept apart
    because their weights follow different laws than ordinary atoms);
    ``ordinary_atoms`` come from the ordinary component. All locations,
    across both groups, are pairwise distinct.
    """

    fixed_atoms: tuple[Atom, ...]
    ordinary_atoms: tuple[Atom, ...]
    truncation: TruncationMeta = EXACT_FINITE

    def __post_init__(self):
        object.__setattr__(self, "fixed_atoms", tuple(self.fixed_atoms))
        object.__setattr__(self, "ordinary_atoms", tuple(self.ordinary_atoms))
        for a in self.fixed_atoms + self.ordinary_atoms:
            if not isinstance(a, Atom):
                raise DomainError(f"atoms must be Atom instances, got {type(a).__name__}")
        _require_distinct(
            [a.location for a in self.fixed_atoms + self.ordinary_atoms], "trait measure atoms"
        )
        if not isinstance(self.truncation, TruncationMeta):
            raise DomainError("truncation must be a TruncationMeta")

    @property
    def atoms(self) -> tuple[Atom, ...]:
        return self.fixed_atoms + self.ordinary_atoms

    def total_mass(self) -> float:
        return float(sum(a.weight for a in self.atoms))


@dataclass(frozen=True, slots=True)
class ObservationMeasure:
    """Integer-count data: one count >= 1 per touched location."""

    atoms: tuple[ObservationAtom, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "atoms", tuple(self.atoms))
        for a in self.atoms:
            if not isinstance(a, ObservationAtom):
                raise DomainError(
                    f"observation atoms must be ObservationAtom instances, got {type(a).__name__}"
                )
        _require_distinct([a.location for a in self.atoms], "observation atoms")

    def count_at(self, location: Location) -> int:
        """Count at ``location``; zero when the location is untouched."""
        return count_at(self, location)

    def total_count(self) -> int:
        return sum(a.count for a in self.atoms)


def count_at(observation: ObservationMeasure, location: Location) -> int:
    """Count of ``observation`` at ``location`` (0 when absent)."""
    if not isinstance(location, Location):
        location = Location(location)
    for a in observation.atoms:
        if a.location.value == location.value:
            return a.count
    return 0


def merge_locations(observations: Sequence[ObservationMeasure]) -> tuple[Location, ...]:
    """Sorted union of the locations touched by the given observations.

    Sorted ascending by float value; a location shared by several
    observations appears once.
    """
    values = sorted({a.location.value for obs in observations for a in obs.atoms})
    return tuple(Location(v) for v in values)


# --- JSON round-trip -------------------------------------------------------
#
# Floats travel as repr-exact decimal strings: 17 significant digits are
# enough to reconstruct any double bit-for-bit.


def float_repr(x: float) -> str:
    return format(float(x), ".17g")


def _parse_float(s, name: str) -> float:
    if isinstance(s, str):
        try:
            return float(s)
        except ValueError as exc:
            raise ConfigError(f"{name}: cannot parse float from {s!r}") from exc
    if isinstance(s, bool) or not isinstance(s, (int, float)):
        raise ConfigError(f"{name}: expected a number or numeric string, got {s!r}")
    return float(s)


def trait_to_jsonable(measure: TraitMeasure) -> dict:
    trunc: dict = {"kind": measure.truncation.kind}
    if measure.truncation.kind == "truncated":
        trunc["rounds"] = measure.truncation.rounds
        trunc["count_cap"] = measure.truncation.count_cap
    return {
        "fixed": [
            {"w": float_repr(a.weight), "loc": float_repr(a.location.value)}
            for a in measure.fixed_atoms
        ],
        "ordinary": [
            {"w": float_repr(a.weight), "loc": float_repr(a.location.value)}
            for a in measure.ordinary_atoms
        ],
        "trunc": trunc,
    }


def trait_from_jsonable(data: dict) -> TraitMeasure:
    try:
        trunc_data = data["trunc"]
        fixed = data["fixed"]
        ordinary = data["ordinary"]
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"trait measure record missing field: {exc}") from exc
    trunc = TruncationMeta(
        trunc_data.get("kind", "exact-finite"),
        trunc_data.get("rounds"),
        trunc_data.get("count_cap"),
    )

    def atoms(rows, name):
        out = []
        for i, row in enumerate(rows):
            try:
                w = _parse_float(row["w"], f"{name}[{i}].w")
                loc = _parse_float(row["loc"], f"{name}[{i}].loc")
            except (KeyError, TypeError) as exc:
                raise ConfigError(f"{name}[{i}]: malformed atom record") from exc
            out.append(Atom(w, Location(loc)))
        return tuple(out)

    return TraitMeasure(atoms(fixed, "fixed"), atoms(ordinary, "ordinary"), trunc)


def observation_to_jsonable(observation: ObservationMeasure) -> dict:
    return {
        "atoms": [
            {"x": a.count, "loc": float_repr(a.location.value)} for a in observation.atoms
        ]
    }


def observation_from_jsonable(data: dict) -> ObservationMeasure:
    try:
        rows = data["atoms"]
    except (KeyError, TypeError) as exc:
        raise ConfigError("observation record must carry an 'atoms' list") from exc
    atoms = []
    for i, row in enumerate(rows):
        try:
            x = row["x"]
            loc = _parse_float(row["loc"], f"atoms[{i}].loc")
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"atoms[{i}]: malformed observation atom") from exc
        if isinstance(x, bool) or not isinstance(x, int):
            raise ConfigError(f"atoms[{i}].x: count must be an integer, got {x!r}")
        atoms.append(ObservationAtom(x, Location(loc)))
    return ObservationMeasure(tuple(atoms))


def write_jsonl(path, records: Iterable[dict]) -> None:
    """Write one JSON object per line. Key order is the insertion order."""
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, separators=(",", ":")))
            fh.write("\n")


def read_jsonl(path) -> list[dict]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}:{lineno}: malformed JSON: {exc}") from exc
    return records
