"""Deployment, termination, and scale-out plan synthesis.

These compose the parser, identity, manifest, and submodel layers into
the three orchestration operations. Every call is all-or-nothing: a
failing stage raises before any artifact is visible to the caller.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

from .documents import ManifestBundle, ManifestDoc
from .identity import (
    InstanceId,
    generate_instance_id,
    parse_running_instance,
)
from .manifests import (
    DeployInputs,
    GpuDevice,
    pv_name,
    pvc_name,
    secret_name,
    service_name,
    tosca_to_k8s,
)
from .parser import node_list, parse_file
from .submodels import (
    OrchestrationSubmodels,
    action_model,
    matchmaking_model,
    workflow_model,
)


class PlanError(Exception):
    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code
        self.message = message


@dataclass(frozen=True)
class DeploymentPlan:
    bundle: ManifestBundle
    submodels: OrchestrationSubmodels

    @property
    def instance(self) -> InstanceId:
        return self.bundle.instance


@dataclass(frozen=True)
class DeletionTarget:
    kind: str
    name: str
    namespace: Optional[str]


@dataclass(frozen=True)
class TerminationPlan:
    instance: InstanceId
    component: str
    targets: Tuple[DeletionTarget, ...]


@dataclass(frozen=True)
class ScaleOutPlan:
    instance: InstanceId
    component: str
    target_cluster: str
    bundle: ManifestBundle


def _seeded_rng(nonce: Optional[str]) -> Optional[random.Random]:
    # Deterministic replica tags when the caller pins the nonce, so
    # repeated runs with identical flags are byte-identical.
    return random.Random(f"replica:{nonce}") if nonce is not None else None


def plan_deployment(
    model_path: Union[str, Path],
    token_b64: str,
    version: str,
    external_ips: Sequence[str],
    cluster_id: str,
    gpus: Sequence[GpuDevice],
    nonce: Optional[str] = None,
    rng: Optional[random.Random] = None,
) -> DeploymentPlan:
    """Full pipeline: ID mint, namespace, secrets, manifests, submodels.

    The submodels are always computed; they are pure projections and
    callers that only want the bundle can ignore them.
    """
    model = parse_file(model_path)
    if version != model.app_version:
        raise PlanError(
            "VersionMismatch",
            f"input version {version!r} does not match model version {model.app_version!r}",
        )
    if rng is None:
        rng = _seeded_rng(nonce)
    instance = generate_instance_id(model.app_name, version, nonce=nonce, rng=rng)
    nodes = node_list(model)
    inputs = DeployInputs(
        registry_token_b64=token_b64,
        version=version,
        external_ips=tuple(external_ips),
        cluster_id=cluster_id,
        gpus=tuple(gpus),
    )
    bundle = tosca_to_k8s(nodes, instance, cluster_id, inputs, rng=rng)
    submodels = OrchestrationSubmodels(
        matchmaking=matchmaking_model(nodes, instance),
        actions=action_model(nodes, instance),
        workflows=workflow_model(nodes, instance),
    )
    return DeploymentPlan(bundle=bundle, submodels=submodels)


#: Deletion order: exact reverse of bundle apply order.
_DELETE_ORDER = (
    "Service",
    "Deployment",
    "VirtualMachine",
    "PersistentVolumeClaim",
    "PersistentVolume",
    "Secret",
)


def component_docs(bundle: ManifestBundle, component: str) -> List[ManifestDoc]:
    """The docs of one component within a bundle, apply order, Namespace excluded."""
    out = []
    for doc in bundle.docs:
        if doc.kind == "Namespace":
            continue
        labels = doc.body.get("metadata", {}).get("labels", {})
        if labels.get("component") == component:
            out.append(doc)
    return out


def plan_termination(
    running_name: str,
    model_path: Union[str, Path],
    last_component: bool = False,
) -> TerminationPlan:
    """Targets exactly what deployment emitted for the named component,
    in reverse apply order.

    The shared Namespace is only targeted when the caller flags this as
    the last remaining component of the instance.
    """
    model = parse_file(model_path)
    instance, component, _replica = parse_running_instance(running_name, model)
    comp = model.component(component)
    assert comp is not None  # parse_running_instance matched against the model

    by_kind = {}
    if comp.needs_external_ip:
        by_kind["Service"] = (service_name(component), instance.rendered)
    workload_kind = "Deployment" if comp.kind.value == "pod" else "VirtualMachine"
    by_kind[workload_kind] = (component, instance.rendered)
    if comp.storage is not None:
        by_kind["PersistentVolumeClaim"] = (pvc_name(component), instance.rendered)
        by_kind["PersistentVolume"] = (pv_name(instance, component), None)
    by_kind["Secret"] = (secret_name(component), instance.rendered)

    targets = [
        DeletionTarget(kind=kind, name=by_kind[kind][0], namespace=by_kind[kind][1])
        for kind in _DELETE_ORDER
        if kind in by_kind
    ]
    if last_component:
        targets.append(DeletionTarget(kind="Namespace", name=instance.rendered, namespace=None))
    return TerminationPlan(instance=instance, component=component, targets=tuple(targets))


def plan_scale_out(
    running_name: str,
    model_path: Union[str, Path],
    target_cluster: str,
    inputs: DeployInputs,
    rng: Optional[random.Random] = None,
) -> ScaleOutPlan:
    """Component-scoped bundle for a second cluster, same instance id.

    The instance id is preserved verbatim; only the cluster label and the
    replica random segment differ from the original deployment docs.
    """
    model = parse_file(model_path)
    instance, component, _replica = parse_running_instance(running_name, model)
    nodes = node_list(model)
    bundle = tosca_to_k8s(
        nodes, instance, target_cluster, inputs, rng=rng, only_component=component
    )
    return ScaleOutPlan(
        instance=instance,
        component=component,
        target_cluster=target_cluster,
        bundle=bundle,
    )
