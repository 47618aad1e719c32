"""Manifest document containers and their deterministic YAML serialization."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Mapping, Optional, Sequence, TYPE_CHECKING

import yaml

if TYPE_CHECKING:
    from .identity import InstanceId

MANIFEST_KINDS = (
    "Namespace",
    "Secret",
    "Deployment",
    "Service",
    "PersistentVolume",
    "PersistentVolumeClaim",
    "VirtualMachine",
)

#: Kinds in bundle apply order; termination reverses this.
APPLY_ORDER = (
    "Namespace",
    "Secret",
    "PersistentVolume",
    "PersistentVolumeClaim",
    "Deployment",
    "VirtualMachine",
    "Service",
)


@dataclass(frozen=True)
class ManifestDoc:
    """One Kubernetes/Kubevirt resource document.

    ``body`` is the full document tree; api_version, kind, name and
    namespace are duplicated out of it for convenient access.
    """

    api_version: str
    kind: str
    name: str
    body: Mapping[str, Any]
    namespace: Optional[str] = None

    def serialize(self) -> str:
        return yaml.safe_dump(_plain(self.body), sort_keys=True, default_flow_style=False)


@dataclass(frozen=True)
class ManifestBundle:
    """Ordered manifest collection for one application instance on one cluster."""

    instance: "InstanceId"
    cluster_id: str
    docs: Sequence[ManifestDoc]


def _plain(value: Any) -> Any:
    if isinstance(value, Mapping):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def serialize_bundle(bundle: ManifestBundle) -> str:
    """Multi-document YAML in apply order, byte-deterministic.

    Keys are sorted alphabetically within every mapping so two runs over
    the same bundle are byte-identical.
    """
    parts = [doc.serialize() for doc in bundle.docs]
    return "---\n".join(parts)
