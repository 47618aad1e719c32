"""Reading and writing CEAML documents.

Concrete syntax is strict YAML: top-level ``metadata``, ``registry``,
``components`` and optional ``workflows`` keys, components keyed by name
with a TOSCA-style ``type`` selecting pod vs. virtual machine. Unknown
keys and duplicate mapping keys are rejected rather than ignored; a
reasoner that silently drops orchestration directives is worse than one
that fails loudly.
"""

from __future__ import annotations

import decimal
from dataclasses import dataclass
from decimal import Decimal
from enum import Enum
from pathlib import Path
from typing import Any, Optional, Sequence, Tuple, Union

import yaml

from .model import (
    OPERATOR_ALIASES,
    ActionSpec,
    ActionVerb,
    CeamlModel,
    ComponentKind,
    ComponentSpec,
    ConditionExpr,
    HardwareReq,
    PortProtocol,
    PortSpec,
    RegistryRef,
    StorageReq,
    ValidationReport,
    WorkflowSpec,
    WorkflowStep,
    validate,
)

KIND_TYPES = {
    "ceaml.nodes.Container": ComponentKind.POD,
    "ceaml.nodes.VM": ComponentKind.VIRTUAL_MACHINE,
}
TYPE_FOR_KIND = {v: k for k, v in KIND_TYPES.items()}


class ParseErrorKind(Enum):
    IO = "Io"
    SYNTAX = "Syntax"
    SCHEMA = "Schema"
    VALIDATION = "Validation"


class ParseError(Exception):
    """Raised for any failure turning bytes into a valid CeamlModel.

    Syntax errors carry a (line, column) location; Validation errors embed
    the full ValidationReport.
    """

    def __init__(
        self,
        kind: ParseErrorKind,
        message: str,
        location: Optional[Tuple[int, int]] = None,
        report: Optional[ValidationReport] = None,
    ):
        super().__init__(f"{kind.value}: {message}")
        self.kind = kind
        self.message = message
        self.location = location
        self.report = report


class _StrictLoader(yaml.SafeLoader):
    """SafeLoader that treats duplicate mapping keys as a syntax error."""


def _strict_mapping(loader: _StrictLoader, node: yaml.MappingNode, deep: bool = False):
    seen = set()
    for key_node, _ in node.value:
        key = loader.construct_object(key_node, deep=deep)
        if key in seen:
            raise yaml.constructor.ConstructorError(
                None, None,
                f"duplicate mapping key {key!r}",
                key_node.start_mark,
            )
        seen.add(key)
    return yaml.SafeLoader.construct_mapping(loader, node, deep=deep)


_StrictLoader.add_constructor(
    yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG,
    lambda loader, node: _strict_mapping(loader, node),
)


def _schema_error(path: str, message: str) -> ParseError:
    return ParseError(ParseErrorKind.SCHEMA, f"{path}: {message}")


def _require_mapping(value: Any, path: str) -> dict:
    if not isinstance(value, dict):
        raise _schema_error(path, f"expected a mapping, got {type(value).__name__}")
    return value


def _check_keys(mapping: dict, path: str, required: Sequence[str], optional: Sequence[str] = ()):
    for key in required:
        if key not in mapping:
            raise _schema_error(path, f"missing required key {key!r}")
    allowed = set(required) | set(optional)
    for key in mapping:
        if key not in allowed:
            raise _schema_error(path, f"unknown key {key!r}")


def _require_str(value: Any, path: str) -> str:
    if not isinstance(value, str):
        raise _schema_error(path, f"expected a string, got {type(value).__name__}")
    return value


def _require_int(value: Any, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise _schema_error(path, f"expected an integer, got {type(value).__name__}")
    return value


def _require_bool(value: Any, path: str) -> bool:
    if not isinstance(value, bool):
        raise _schema_error(path, f"expected a boolean, got {type(value).__name__}")
    return value


def _require_decimal(value: Any, path: str) -> Decimal:
    if isinstance(value, bool) or not isinstance(value, (int, float, str)):
        raise _schema_error(path, f"expected a number, got {type(value).__name__}")
    try:
        return Decimal(str(value))
    except decimal.InvalidOperation:
        raise _schema_error(path, f"not a decimal number: {value!r}") from None


def _str_mapping(value: Any, path: str) -> dict:
    mapping = _require_mapping(value, path)
    out = {}
    for k, v in mapping.items():
        key = _require_str(k, path)
        out[key] = _require_str(v, f"{path}.{key}")
    return out


def _parse_hardware(raw: Any, path: str) -> HardwareReq:
    mapping = _require_mapping(raw, path)
    _check_keys(mapping, path, ["cpu_cores", "memory_mib"], ["disk_gib", "gpu_count"])
    return HardwareReq(
        cpu_cores=_require_decimal(mapping["cpu_cores"], f"{path}.cpu_cores"),
        memory_mib=_require_int(mapping["memory_mib"], f"{path}.memory_mib"),
        disk_gib=(
            _require_int(mapping["disk_gib"], f"{path}.disk_gib")
            if "disk_gib" in mapping else None
        ),
        gpu_count=(
            _require_int(mapping["gpu_count"], f"{path}.gpu_count")
            if "gpu_count" in mapping else 0
        ),
    )


def _parse_ports(raw: Any, path: str) -> Tuple[PortSpec, ...]:
    if not isinstance(raw, list):
        raise _schema_error(path, "expected a list of port entries")
    out = []
    for i, entry in enumerate(raw):
        epath = f"{path}[{i}]"
        mapping = _require_mapping(entry, epath)
        _check_keys(mapping, epath, ["port"], ["protocol"])
        proto = PortProtocol.TCP
        if "protocol" in mapping:
            name = _require_str(mapping["protocol"], f"{epath}.protocol")
            try:
                proto = PortProtocol(name)
            except ValueError:
                raise _schema_error(f"{epath}.protocol", f"unknown protocol {name!r}") from None
        out.append(PortSpec(port=_require_int(mapping["port"], f"{epath}.port"), protocol=proto))
    return tuple(out)


def _parse_actions(raw: Any, path: str) -> Tuple[ActionSpec, ...]:
    if not isinstance(raw, list):
        raise _schema_error(path, "expected a list of actions")
    out = []
    for i, entry in enumerate(raw):
        epath = f"{path}[{i}]"
        mapping = _require_mapping(entry, epath)
        _check_keys(mapping, epath, ["name", "verb"], ["params"])
        verb_name = _require_str(mapping["verb"], f"{epath}.verb")
        try:
            verb = ActionVerb(verb_name)
        except ValueError:
            raise _schema_error(f"{epath}.verb", f"unknown verb {verb_name!r}") from None
        out.append(ActionSpec(
            name=_require_str(mapping["name"], f"{epath}.name"),
            verb=verb,
            params=_str_mapping(mapping.get("params", {}), f"{epath}.params"),
        ))
    return tuple(out)


def _parse_component(name: Any, raw: Any) -> ComponentSpec:
    cname = _require_str(name, "components")
    path = f"components.{cname}"
    mapping = _require_mapping(raw, path)
    _check_keys(
        mapping, path,
        ["type", "image", "hardware"],
        ["ports", "external_ip", "storage", "env", "actions"],
    )
    type_name = _require_str(mapping["type"], f"{path}.type")
    kind = KIND_TYPES.get(type_name)
    if kind is None:
        raise _schema_error(f"{path}.type", f"unknown component type {type_name!r}")

    storage = None
    if "storage" in mapping:
        spath = f"{path}.storage"
        smap = _require_mapping(mapping["storage"], spath)
        _check_keys(smap, spath, ["size_gib", "mount_path"])
        storage = StorageReq(
            size_gib=_require_int(smap["size_gib"], f"{spath}.size_gib"),
            mount_path=_require_str(smap["mount_path"], f"{spath}.mount_path"),
        )

    return ComponentSpec(
        name=cname,
        kind=kind,
        image=_require_str(mapping["image"], f"{path}.image"),
        hardware=_parse_hardware(mapping["hardware"], f"{path}.hardware"),
        ports=_parse_ports(mapping["ports"], f"{path}.ports") if "ports" in mapping else (),
        needs_external_ip=(
            _require_bool(mapping["external_ip"], f"{path}.external_ip")
            if "external_ip" in mapping else False
        ),
        storage=storage,
        env=_str_mapping(mapping.get("env", {}), f"{path}.env"),
        actions=_parse_actions(mapping["actions"], f"{path}.actions") if "actions" in mapping else (),
    )


def _parse_workflow(name: Any, raw: Any) -> WorkflowSpec:
    wname = _require_str(name, "workflows")
    path = f"workflows.{wname}"
    mapping = _require_mapping(raw, path)
    _check_keys(mapping, path, ["condition", "steps"])

    cpath = f"{path}.condition"
    cmap = _require_mapping(mapping["condition"], cpath)
    _check_keys(cmap, cpath, ["metric", "operator", "threshold"])
    operator = _require_str(cmap["operator"], f"{cpath}.operator")
    threshold = cmap["threshold"]
    if isinstance(threshold, bool) or not isinstance(threshold, (int, float, str)):
        raise _schema_error(f"{cpath}.threshold", "expected a number or string")
    condition = ConditionExpr(
        metric=_require_str(cmap["metric"], f"{cpath}.metric"),
        # Unknown spellings pass through so validation can report them.
        operator=OPERATOR_ALIASES.get(operator, operator),
        threshold=str(threshold),
    )

    if not isinstance(mapping["steps"], list):
        raise _schema_error(f"{path}.steps", "expected a list of steps")
    steps = []
    for i, entry in enumerate(mapping["steps"]):
        epath = f"{path}.steps[{i}]"
        smap = _require_mapping(entry, epath)
        _check_keys(smap, epath, ["component", "action"])
        steps.append(WorkflowStep(
            component=_require_str(smap["component"], f"{epath}.component"),
            action=_require_str(smap["action"], f"{epath}.action"),
        ))
    return WorkflowSpec(name=wname, condition=condition, steps=tuple(steps))


def parse_text(text: Union[str, bytes]) -> CeamlModel:
    """Parse a CEAML document from text; parsing, then validation, in that order."""
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(ParseErrorKind.SYNTAX, f"not valid UTF-8: {exc}") from exc
    try:
        raw = yaml.load(text, Loader=_StrictLoader)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        location = (mark.line + 1, mark.column + 1) if mark else (1, 1)
        raise ParseError(
            ParseErrorKind.SYNTAX, exc.problem or str(exc), location=location
        ) from exc
    except yaml.YAMLError as exc:
        raise ParseError(ParseErrorKind.SYNTAX, str(exc), location=(1, 1)) from exc
    except RecursionError as exc:
        # Pathologically nested input; refuse rather than crash.
        raise ParseError(ParseErrorKind.SYNTAX, "nesting too deep", location=(1, 1)) from exc

    if raw is None:
        raise _schema_error("$", "document is empty")
    top = _require_mapping(raw, "$")
    _check_keys(top, "$", ["metadata", "registry", "components"], ["workflows"])

    meta = _require_mapping(top["metadata"], "metadata")
    _check_keys(meta, "metadata", ["name", "version"])
    reg = _require_mapping(top["registry"], "registry")
    _check_keys(reg, "registry", ["host"], ["credential"])

    comps_raw = _require_mapping(top["components"], "components")
    components = tuple(_parse_component(k, v) for k, v in comps_raw.items())

    workflows: Tuple[WorkflowSpec, ...] = ()
    if "workflows" in top:
        wf_raw = _require_mapping(top["workflows"], "workflows")
        workflows = tuple(_parse_workflow(k, v) for k, v in wf_raw.items())

    version = top["metadata"]["version"]
    if isinstance(version, (int, float)):
        version = str(version)
    model = CeamlModel(
        app_name=_require_str(meta["name"], "metadata.name"),
        app_version=_require_str(version, "metadata.version"),
        registry=RegistryRef(
            host=_require_str(reg["host"], "registry.host"),
            credential=(
                _require_str(reg["credential"], "registry.credential")
                if "credential" in reg else None
            ),
        ),
        components=components,
        workflows=workflows,
    )

    report = validate(model)
    if not report.ok:
        raise ParseError(
            ParseErrorKind.VALIDATION,
            "; ".join(f"{v.code} at {v.path}" for v in report),
            report=report,
        )
    return model


def parse_file(path: Union[str, Path]) -> CeamlModel:
    """Read and parse a CEAML file; Io errors cover unreadable paths."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ParseError(ParseErrorKind.IO, f"cannot read {path}: {exc}") from exc
    return parse_text(text)


def serialize_model(model: CeamlModel) -> str:
    """Render a model back to its concrete YAML syntax (parse_text inverse)."""
    comps = {}
    for comp in model.components:
        entry: dict = {
            "type": TYPE_FOR_KIND[comp.kind],
            "image": comp.image,
            "hardware": {
                "cpu_cores": float(comp.hardware.cpu_cores)
                if comp.hardware.cpu_cores != int(comp.hardware.cpu_cores)
                else int(comp.hardware.cpu_cores),
                "memory_mib": comp.hardware.memory_mib,
            },
        }
        if comp.hardware.disk_gib is not None:
            entry["hardware"]["disk_gib"] = comp.hardware.disk_gib
        if comp.hardware.gpu_count:
            entry["hardware"]["gpu_count"] = comp.hardware.gpu_count
        if comp.ports:
            entry["ports"] = [
                {"port": p.port, "protocol": p.protocol.value} for p in comp.ports
            ]
        if comp.needs_external_ip:
            entry["external_ip"] = True
        if comp.storage is not None:
            entry["storage"] = {
                "size_gib": comp.storage.size_gib,
                "mount_path": comp.storage.mount_path,
            }
        if comp.env:
            entry["env"] = dict(comp.env)
        if comp.actions:
            entry["actions"] = [
                {"name": a.name, "verb": a.verb.value, **({"params": dict(a.params)} if a.params else {})}
                for a in comp.actions
            ]
        comps[comp.name] = entry

    doc: dict = {
        "metadata": {"name": model.app_name, "version": model.app_version},
        "registry": (
            {"host": model.registry.host, "credential": model.registry.credential}
            if model.registry.credential is not None
            else {"host": model.registry.host}
        ),
        "components": comps,
    }
    if model.workflows:
        doc["workflows"] = {
            wf.name: {
                "condition": {
                    "metric": wf.condition.metric,
                    "operator": wf.condition.operator,
                    "threshold": wf.condition.threshold,
                },
                "steps": [{"component": s.component, "action": s.action} for s in wf.steps],
            }
            for wf in model.workflows
        }
    return yaml.safe_dump(doc, sort_keys=False, default_flow_style=False)


@dataclass(frozen=True)
class NodeEntity:
    """Uniform view over one CEAML entity (component or workflow)."""

    name: str
    category: str  # "component" | "workflow"
    spec: Union[ComponentSpec, WorkflowSpec]


class NodeList(Sequence[NodeEntity]):
    """Ordered view over all entities of a model, document order preserved."""

    def __init__(self, model: CeamlModel):
        self.model = model
        self._entities = tuple(
            [NodeEntity(c.name, "component", c) for c in model.components]
            + [NodeEntity(w.name, "workflow", w) for w in model.workflows]
        )

    def __getitem__(self, index):
        return self._entities[index]

    def __len__(self) -> int:
        return len(self._entities)

    def components(self) -> Tuple[ComponentSpec, ...]:
        return tuple(e.spec for e in self._entities if e.category == "component")

    def workflows(self) -> Tuple[WorkflowSpec, ...]:
        return tuple(e.spec for e in self._entities if e.category == "workflow")


def node_list(model: CeamlModel) -> NodeList:
    """All CEAML entity instances of a model, components before workflows."""
    return NodeList(model)
