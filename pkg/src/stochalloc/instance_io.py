"""JSON instance files.

Layout (``schema_version`` 1)::

    {
      "schema_version": 1,
      "quantum": 0.1,                      # hours per integer time unit
      "catalog": {
        "cyber":    [{"id", "reserve_cost", "ondemand_cost"}],      # $/hr
        "physical": [{"id", "reserve_cost", "ondemand_cost"}],      # $/hr
        "edge":     [{"id", "capacity_gb", "reserve_cost", "ondemand_cost"}],  # $/use
        "people":   [{"id", "capacity_hours", "reserve_cost", "ondemand_cost"}],
        "outsource_rate": 19.6                                      # $/hr
      },
      "scenarios": [
        {"probability": 0.6,
         "users": [{"cyber_hours": {"<id>": h}, "physical_hours": {...},
                    "people_hours": {...}, "availability": {"<id>": 0|1},
                    "data_gb": 0.5}]}
      ],
      "experiment": {...}                  # optional CLI defaults
    }

Omitted hours default to 0 and omitted availability to 1.  Unknown fields
are rejected.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from .model import (
    CyberResource,
    DemandScenario,
    EdgeServer,
    Instance,
    PeopleResource,
    PhysicalResource,
    ResourceCatalog,
    ScenarioSet,
    TimeQuantum,
    ValidationError,
    validate,
)

SCHEMA_VERSION = 1

_NUM = {"type": "number", "minimum": 0}
_HOURS_MAP = {"type": "object", "additionalProperties": _NUM}


def _resource(*extra: str) -> dict:
    props = {"id": {"type": "string", "minLength": 1}, "reserve_cost": _NUM, "ondemand_cost": _NUM}
    props.update({name: _NUM for name in extra})
    return {
        "type": "object",
        "properties": props,
        "required": list(props),
        "additionalProperties": False,
    }


INSTANCE_SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema_version", "catalog", "scenarios"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "quantum": {"type": "number", "exclusiveMinimum": 0},
        "catalog": {
            "type": "object",
            "additionalProperties": False,
            "required": ["cyber", "physical", "edge", "people", "outsource_rate"],
            "properties": {
                "cyber": {"type": "array", "items": _resource()},
                "physical": {"type": "array", "items": _resource()},
                "edge": {"type": "array", "items": _resource("capacity_gb")},
                "people": {"type": "array", "items": _resource("capacity_hours")},
                "outsource_rate": _NUM,
            },
        },
        "scenarios": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["probability", "users"],
                "properties": {
                    "probability": {"type": "number", "minimum": 0, "maximum": 1},
                    "users": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "additionalProperties": False,
                            "properties": {
                                "cyber_hours": _HOURS_MAP,
                                "physical_hours": _HOURS_MAP,
                                "people_hours": _HOURS_MAP,
                                "availability": {
                                    "type": "object",
                                    "additionalProperties": {"enum": [0, 1]},
                                },
                                "data_gb": _NUM,
                            },
                        },
                    },
                },
            },
        },
        "experiment": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["cost-structure", "prob-sweep", "threshold", "compare"]},
                "target": {"type": "string"},
                "step": {"type": "number", "exclusiveMinimum": 0},
                "grid": {"type": "array", "items": {"type": "number"}},
                "multipliers": {"type": "array", "items": {"type": "number", "minimum": 0}},
                "seed": {"type": "integer"},
                "num_seeds": {"type": "integer", "minimum": 0},
            },
        },
    },
}


class InstanceFormatError(ValueError):
    """The file is not valid JSON or does not follow the instance layout."""


def _user_row(user: dict, field: str, ids: list[str], default: float, where: str) -> list[float]:
    values = user.get(field, {})
    unknown = sorted(set(values) - set(ids))
    if unknown:
        raise InstanceFormatError(f"{where}.{field}: unknown resource id(s) {unknown}")
    return [values.get(i, default) for i in ids]


def instance_from_dict(data: dict) -> tuple[Instance, dict]:
    """Build a validated :class:`Instance`; returns it with the optional experiment section."""
    if not isinstance(data, dict) or "schema_version" not in data:
        raise InstanceFormatError("missing mandatory field 'schema_version'")
    try:
        jsonschema.validate(data, INSTANCE_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise InstanceFormatError(f"field {path}: {exc.message}") from None

    cat = data["catalog"]
    catalog = ResourceCatalog(
        cyber=tuple(CyberResource(r["id"], r["reserve_cost"], r["ondemand_cost"]) for r in cat["cyber"]),
        physical=tuple(PhysicalResource(r["id"], r["reserve_cost"], r["ondemand_cost"]) for r in cat["physical"]),
        edge=tuple(EdgeServer(r["id"], r["capacity_gb"], r["reserve_cost"], r["ondemand_cost"]) for r in cat["edge"]),
        people=tuple(
            PeopleResource(r["id"], r["capacity_hours"], r["reserve_cost"], r["ondemand_cost"]) for r in cat["people"]
        ),
        outsource_rate=cat["outsource_rate"],
    )
    cyber_ids = [r.id for r in catalog.cyber]
    physical_ids = [r.id for r in catalog.physical]
    people_ids = [r.id for r in catalog.people]

    scenarios, probs = [], []
    for i, sc in enumerate(data["scenarios"]):
        users = sc["users"]
        where = f"scenarios/{i}/users"
        scenarios.append(
            DemandScenario(
                np.array([_user_row(u, "cyber_hours", cyber_ids, 0.0, f"{where}/{w}") for w, u in enumerate(users)]).reshape(len(users), len(cyber_ids)),
                np.array([_user_row(u, "physical_hours", physical_ids, 0.0, f"{where}/{w}") for w, u in enumerate(users)]).reshape(len(users), len(physical_ids)),
                np.array([_user_row(u, "people_hours", people_ids, 0.0, f"{where}/{w}") for w, u in enumerate(users)]).reshape(len(users), len(people_ids)),
                np.array([_user_row(u, "availability", people_ids, 1, f"{where}/{w}") for w, u in enumerate(users)], dtype=np.int64).reshape(len(users), len(people_ids)),
                np.array([u.get("data_gb", 0.0) for u in users], dtype=float),
            )
        )
        probs.append(sc["probability"])
    instance = validate(catalog, ScenarioSet(tuple(scenarios), tuple(probs)), TimeQuantum(data.get("quantum", 0.1)))
    return instance, dict(data.get("experiment", {}))


def load_instance(path: str | Path) -> tuple[Instance, dict]:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceFormatError(f"malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return instance_from_dict(data)


def instance_to_dict(instance: Instance, experiment: dict | None = None) -> dict:
    cat = instance.catalog
    out: dict[str, Any] = {
        "schema_version": SCHEMA_VERSION,
        "quantum": instance.quantum.hours,
        "catalog": {
            "cyber": [{"id": r.id, "reserve_cost": r.reserve_cost, "ondemand_cost": r.ondemand_cost} for r in cat.cyber],
            "physical": [{"id": r.id, "reserve_cost": r.reserve_cost, "ondemand_cost": r.ondemand_cost} for r in cat.physical],
            "edge": [
                {"id": r.id, "capacity_gb": r.capacity_gb, "reserve_cost": r.reserve_cost, "ondemand_cost": r.ondemand_cost}
                for r in cat.edge
            ],
            "people": [
                {"id": r.id, "capacity_hours": r.capacity_hours, "reserve_cost": r.reserve_cost, "ondemand_cost": r.ondemand_cost}
                for r in cat.people
            ],
            "outsource_rate": cat.outsource_rate,
        },
        "scenarios": [],
    }
    for s, p in zip(instance.scenarios.scenarios, instance.scenarios.probabilities):
        users = []
        for w in range(s.num_users):
            users.append(
                {
                    "cyber_hours": {r.id: float(s.cyber_hours[w, v]) for v, r in enumerate(cat.cyber)},
                    "physical_hours": {r.id: float(s.physical_hours[w, x]) for x, r in enumerate(cat.physical)},
                    "people_hours": {r.id: float(s.people_hours[w, y]) for y, r in enumerate(cat.people)},
                    "availability": {r.id: int(s.availability[w, y]) for y, r in enumerate(cat.people)},
                    "data_gb": float(s.data_gb[w]),
                }
            )
        out["scenarios"].append({"probability": p, "users": users})
    if experiment:
        out["experiment"] = dict(experiment)
    return out


def dump_instance(instance: Instance, experiment: dict | None = None) -> str:
    return json.dumps(instance_to_dict(instance, experiment), indent=2) + "\n"


__all__ = [
    "INSTANCE_SCHEMA",
    "InstanceFormatError",
    "SCHEMA_VERSION",
    "ValidationError",
    "dump_instance",
    "instance_from_dict",
    "instance_to_dict",
    "load_instance",
]
