"""Domain types for CEAML application models and their semantic validation.

All types are frozen dataclasses: once constructed they never change, so
values can be shared freely between threads. Structural well-formedness
(correct keys and value types) is the parser's job; everything that can be
wrong in a structurally well-formed model is reported by :func:`validate`
as data, never as an exception.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from decimal import Decimal
from enum import Enum
from typing import Iterator, Mapping, Optional, Sequence, Tuple

APP_NAME_RE = re.compile(r"^[a-z0-9]([a-z0-9-]*[a-z0-9])?$")
APP_NAME_MAX = 32
VERSION_RE = re.compile(r"^[0-9]+(\.[0-9]+)*$")
IDENT_RE = re.compile(r"^[a-z0-9]([a-z0-9-]*[a-z0-9])?$")

#: Comparison operators a workflow condition may use (canonical ASCII forms).
CONDITION_OPERATORS = ("<", "<=", ">", ">=", "==")

#: Accepted spellings, mapped to their canonical form.
OPERATOR_ALIASES = {
    "<": "<",
    "<=": "<=",
    "≤": "<=",
    ">": ">",
    ">=": ">=",
    "≥": ">=",
    "==": "==",
}


class ComponentKind(Enum):
    POD = "pod"
    VIRTUAL_MACHINE = "vm"


class PortProtocol(Enum):
    TCP = "TCP"
    UDP = "UDP"


class ActionVerb(Enum):
    DEPLOY = "deploy"
    TERMINATE = "terminate"
    SCALE_OUT = "scale_out"
    RESTART = "restart"


@dataclass(frozen=True)
class RegistryRef:
    host: str
    credential: Optional[str] = None


@dataclass(frozen=True)
class HardwareReq:
    """Hardware demands of one component.

    cpu_cores is a Decimal so fractional cores (0.5) survive the trip to
    Kubernetes milli-CPU form and back without floating-point drift.
    """

    cpu_cores: Decimal
    memory_mib: int
    disk_gib: Optional[int] = None
    gpu_count: int = 0


@dataclass(frozen=True)
class StorageReq:
    size_gib: int
    mount_path: str


@dataclass(frozen=True)
class PortSpec:
    port: int
    protocol: PortProtocol = PortProtocol.TCP


@dataclass(frozen=True)
class ActionSpec:
    name: str
    verb: ActionVerb
    params: Mapping[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class ComponentSpec:
    name: str
    kind: ComponentKind
    image: str
    hardware: HardwareReq
    ports: Sequence[PortSpec] = ()
    needs_external_ip: bool = False
    storage: Optional[StorageReq] = None
    env: Mapping[str, str] = field(default_factory=dict)
    actions: Sequence[ActionSpec] = ()


@dataclass(frozen=True)
class ConditionExpr:
    metric: str
    operator: str
    threshold: str


@dataclass(frozen=True)
class WorkflowStep:
    component: str
    action: str


@dataclass(frozen=True)
class WorkflowSpec:
    name: str
    condition: ConditionExpr
    steps: Sequence[WorkflowStep] = ()


@dataclass(frozen=True)
class CeamlModel:
    app_name: str
    app_version: str
    registry: RegistryRef
    components: Sequence[ComponentSpec] = ()
    workflows: Sequence[WorkflowSpec] = ()

    def component(self, name: str) -> Optional[ComponentSpec]:
        for comp in self.components:
            if comp.name == name:
                return comp
        return None


@dataclass(frozen=True)
class Violation:
    """One broken invariant: a machine-readable code plus the offending path."""

    code: str
    path: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    violations: Tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __iter__(self) -> Iterator[Violation]:
        return iter(self.violations)

    def __len__(self) -> int:
        return len(self.violations)


def _cpu_milli_representable(cores: Decimal) -> bool:
    return (cores * 1000) == int(cores * 1000)


def validate(model: CeamlModel) -> ValidationReport:
    """Check every semantic invariant of a structurally parsed model.

    Deterministic and order-stable: violations are reported in document
    order (model metadata, then components, then workflows).
    """
    out: list[Violation] = []

    if not APP_NAME_RE.match(model.app_name) or len(model.app_name) > APP_NAME_MAX:
        out.append(Violation(
            "InvalidAppName", "metadata.name",
            f"app name {model.app_name!r} must be lowercase alphanumeric/hyphen, <= {APP_NAME_MAX} chars",
        ))
    if not VERSION_RE.match(model.app_version):
        out.append(Violation(
            "InvalidVersion", "metadata.version",
            f"version {model.app_version!r} must be dotted decimal segments",
        ))
    if not model.registry.host:
        out.append(Violation("EmptyRegistryHost", "registry.host", "registry host is empty"))

    seen: set[str] = set()
    for comp in model.components:
        base = f"components.{comp.name}"
        if comp.name in seen:
            out.append(Violation(
                "DuplicateComponentName", base,
                f"component name {comp.name!r} is declared more than once",
            ))
        seen.add(comp.name)
        if not IDENT_RE.match(comp.name):
            out.append(Violation(
                "InvalidComponentName", base,
                f"component name {comp.name!r} is not a valid identifier",
            ))
        if not comp.image:
            out.append(Violation("EmptyImage", f"{base}.image", "image reference is empty"))

        hw = comp.hardware
        if hw.cpu_cores <= 0:
            out.append(Violation(
                "NonPositiveQuantity", f"{base}.hardware.cpu_cores",
                f"cpu_cores must be > 0, got {hw.cpu_cores}",
            ))
        elif not _cpu_milli_representable(hw.cpu_cores):
            out.append(Violation(
                "CpuNotMilliRepresentable", f"{base}.hardware.cpu_cores",
                f"cpu_cores {hw.cpu_cores} is not a whole number of milli-cores",
            ))
        if hw.memory_mib <= 0:
            out.append(Violation(
                "NonPositiveQuantity", f"{base}.hardware.memory_mib",
                f"memory_mib must be > 0, got {hw.memory_mib}",
            ))
        if hw.disk_gib is not None and hw.disk_gib <= 0:
            out.append(Violation(
                "NonPositiveQuantity", f"{base}.hardware.disk_gib",
                f"disk_gib must be > 0, got {hw.disk_gib}",
            ))
        if hw.gpu_count < 0:
            out.append(Violation(
                "NegativeGpuCount", f"{base}.hardware.gpu_count",
                f"gpu_count must be >= 0, got {hw.gpu_count}",
            ))

        for i, port in enumerate(comp.ports):
            if not 1 <= port.port <= 65535:
                out.append(Violation(
                    "InvalidPort", f"{base}.ports[{i}]",
                    f"port {port.port} outside 1-65535",
                ))
        if comp.needs_external_ip and not comp.ports:
            out.append(Violation(
                "ExternalIpWithoutPort", base,
                "needs_external_ip requires at least one declared port",
            ))

        if comp.storage is not None:
            if comp.storage.size_gib <= 0:
                out.append(Violation(
                    "NonPositiveQuantity", f"{base}.storage.size_gib",
                    f"size_gib must be > 0, got {comp.storage.size_gib}",
                ))
            if not comp.storage.mount_path.startswith("/"):
                out.append(Violation(
                    "RelativeMountPath", f"{base}.storage.mount_path",
                    f"mount_path {comp.storage.mount_path!r} must be absolute",
                ))

        action_names: set[str] = set()
        for act in comp.actions:
            if act.name in action_names:
                out.append(Violation(
                    "DuplicateActionName", f"{base}.actions.{act.name}",
                    f"action {act.name!r} declared more than once on {comp.name!r}",
                ))
            action_names.add(act.name)

    by_name = {c.name: c for c in model.components}
    for wf in model.workflows:
        base = f"workflows.{wf.name}"
        if wf.condition.operator not in CONDITION_OPERATORS:
            out.append(Violation(
                "InvalidConditionOperator", f"{base}.condition",
                f"operator {wf.condition.operator!r} not one of {CONDITION_OPERATORS}",
            ))
        if not wf.steps:
            out.append(Violation("EmptyWorkflowSteps", f"{base}.steps", "workflow has no steps"))
        for i, step in enumerate(wf.steps):
            comp = by_name.get(step.component)
            if comp is None:
                out.append(Violation(
                    "DanglingWorkflowReference", f"{base}.steps[{i}]",
                    f"step references unknown component {step.component!r}",
                ))
            elif all(a.name != step.action for a in comp.actions):
                out.append(Violation(
                    "DanglingWorkflowReference", f"{base}.steps[{i}]",
                    f"component {step.component!r} declares no action {step.action!r}",
                ))

    return ValidationReport(tuple(out))
