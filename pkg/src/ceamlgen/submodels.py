"""Orchestrator-facing submodels: matchmaking, actions, workflows.

Each submodel is a pure projection of the parsed model, keyed to one
instance id. Serialization is deterministic YAML with a top-level
``instance`` key and a ``kind`` discriminator so a generic reader can
round-trip any of the three.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal
from typing import List, Tuple, Union

import yaml

from .identity import InstanceId
from .model import (
    ActionSpec,
    ActionVerb,
    CeamlModel,
    ComponentKind,
    ConditionExpr,
    HardwareReq,
    WorkflowStep,
    validate,
)
from .parser import NodeList


class SubmodelError(Exception):
    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code
        self.message = message


@dataclass(frozen=True)
class MatchmakingEntry:
    component: str
    kind: ComponentKind
    hardware: HardwareReq


@dataclass(frozen=True)
class MatchmakingModel:
    instance: InstanceId
    entries: Tuple[MatchmakingEntry, ...]


@dataclass(frozen=True)
class ActionEntry:
    component: str
    actions: Tuple[ActionSpec, ...]


@dataclass(frozen=True)
class ActionModel:
    instance: InstanceId
    entries: Tuple[ActionEntry, ...]


@dataclass(frozen=True)
class WorkflowEntry:
    name: str
    condition: ConditionExpr
    steps: Tuple[WorkflowStep, ...]


@dataclass(frozen=True)
class WorkflowModel:
    instance: InstanceId
    workflows: Tuple[WorkflowEntry, ...]


@dataclass(frozen=True)
class OrchestrationSubmodels:
    matchmaking: MatchmakingModel
    actions: ActionModel
    workflows: WorkflowModel


Submodel = Union[MatchmakingModel, ActionModel, WorkflowModel]


def _check_valid(model: CeamlModel) -> None:
    report = validate(model)
    if not report.ok:
        raise SubmodelError(
            "InvalidModel", "; ".join(f"{v.code} at {v.path}" for v in report)
        )


def matchmaking_model(nodes: NodeList, instance: InstanceId) -> MatchmakingModel:
    """Components with their hardware requirements, for host selection."""
    _check_valid(nodes.model)
    entries = tuple(
        MatchmakingEntry(component=c.name, kind=c.kind, hardware=c.hardware)
        for c in nodes.components()
    )
    return MatchmakingModel(instance=instance, entries=entries)


def action_model(nodes: NodeList, instance: InstanceId) -> ActionModel:
    """Components with their declared actions, params preserved."""
    _check_valid(nodes.model)
    entries = tuple(
        ActionEntry(component=c.name, actions=tuple(c.actions))
        for c in nodes.components()
    )
    return ActionModel(instance=instance, entries=entries)


def _normalize_threshold(threshold: str) -> str:
    try:
        return str(Decimal(threshold))
    except ArithmeticError:
        return threshold


def workflow_model(nodes: NodeList, instance: InstanceId) -> WorkflowModel:
    """Condition-triggered adaptation workflows, operators canonicalized."""
    _check_valid(nodes.model)
    actions = action_model(nodes, instance)
    declared = {
        (entry.component, act.name) for entry in actions.entries for act in entry.actions
    }
    workflows: List[WorkflowEntry] = []
    for wf in nodes.workflows():
        for step in wf.steps:
            if (step.component, step.action) not in declared:
                raise SubmodelError(
                    "DanglingReference",
                    f"workflow {wf.name!r} step ({step.component}, {step.action}) resolves to nothing",
                )
        condition = ConditionExpr(
            metric=wf.condition.metric,
            operator=wf.condition.operator,
            threshold=_normalize_threshold(wf.condition.threshold),
        )
        workflows.append(WorkflowEntry(name=wf.name, condition=condition, steps=tuple(wf.steps)))
    return WorkflowModel(instance=instance, workflows=tuple(workflows))


def serialize_submodel(submodel: Submodel) -> str:
    """Deterministic YAML; parse back with read_submodel."""
    if isinstance(submodel, MatchmakingModel):
        doc = {
            "kind": "matchmaking",
            "instance": submodel.instance.rendered,
            "entries": [
                {
                    "component": e.component,
                    "execution": e.kind.value,
                    "hardware": _hardware_dict(e.hardware),
                }
                for e in submodel.entries
            ],
        }
    elif isinstance(submodel, ActionModel):
        doc = {
            "kind": "actions",
            "instance": submodel.instance.rendered,
            "entries": [
                {
                    "component": e.component,
                    "actions": [
                        {"name": a.name, "verb": a.verb.value, "params": dict(a.params)}
                        for a in e.actions
                    ],
                }
                for e in submodel.entries
            ],
        }
    elif isinstance(submodel, WorkflowModel):
        doc = {
            "kind": "workflows",
            "instance": submodel.instance.rendered,
            "workflows": [
                {
                    "name": w.name,
                    "condition": {
                        "metric": w.condition.metric,
                        "operator": w.condition.operator,
                        "threshold": w.condition.threshold,
                    },
                    "steps": [
                        {"component": s.component, "action": s.action} for s in w.steps
                    ],
                }
                for w in submodel.workflows
            ],
        }
    else:
        raise SubmodelError("UnknownSubmodel", f"cannot serialize {type(submodel).__name__}")
    return yaml.safe_dump(doc, sort_keys=True, default_flow_style=False)


def _hardware_dict(hw: HardwareReq) -> dict:
    out = {"cpu_cores": str(hw.cpu_cores), "memory_mib": hw.memory_mib, "gpu_count": hw.gpu_count}
    if hw.disk_gib is not None:
        out["disk_gib"] = hw.disk_gib
    return out


def _hardware_from_dict(raw: dict) -> HardwareReq:
    return HardwareReq(
        cpu_cores=Decimal(raw["cpu_cores"]),
        memory_mib=raw["memory_mib"],
        disk_gib=raw.get("disk_gib"),
        gpu_count=raw["gpu_count"],
    )


def _instance_from_rendered(rendered: str) -> InstanceId:
    # Reader-side reconstruction: nonce is the fixed-length tail segment.
    head, nonce = rendered.rsplit("-", 1)
    app, slug = head.split("-", 1)
    return InstanceId(app_name=app, version_slug=slug, nonce=nonce, rendered=rendered)


def read_submodel(text: str) -> Submodel:
    """Inverse of serialize_submodel, dispatching on the kind discriminator.

    Only faithful for instance ids whose app name has no hyphen; callers
    needing full fidelity should match instances by the rendered string.
    """
    raw = yaml.safe_load(text)
    if not isinstance(raw, dict) or "kind" not in raw:
        raise SubmodelError("UnknownSubmodel", "missing kind discriminator")
    instance = _instance_from_rendered(raw["instance"])
    kind = raw["kind"]
    if kind == "matchmaking":
        return MatchmakingModel(
            instance=instance,
            entries=tuple(
                MatchmakingEntry(
                    component=e["component"],
                    kind=ComponentKind(e["execution"]),
                    hardware=_hardware_from_dict(e["hardware"]),
                )
                for e in raw["entries"]
            ),
        )
    if kind == "actions":
        return ActionModel(
            instance=instance,
            entries=tuple(
                ActionEntry(
                    component=e["component"],
                    actions=tuple(
                        ActionSpec(name=a["name"], verb=ActionVerb(a["verb"]), params=a["params"])
                        for a in e["actions"]
                    ),
                )
                for e in raw["entries"]
            ),
        )
    if kind == "workflows":
        return WorkflowModel(
            instance=instance,
            workflows=tuple(
                WorkflowEntry(
                    name=w["name"],
                    condition=ConditionExpr(
                        metric=w["condition"]["metric"],
                        operator=w["condition"]["operator"],
                        threshold=str(w["condition"]["threshold"]),
                    ),
                    steps=tuple(
                        WorkflowStep(component=s["component"], action=s["action"])
                        for s in w["steps"]
                    ),
                )
                for w in raw["workflows"]
            ),
        )
    raise SubmodelError("UnknownSubmodel", f"unknown kind {kind!r}")
