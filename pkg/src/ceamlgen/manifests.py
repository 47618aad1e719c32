"""Kubernetes/Kubevirt manifest generation from a validated model.

One pod component becomes exactly one Deployment, one VM component exactly
one kubevirt.io/v1 VirtualMachine (runStrategy Always). Storage needs
become a hostPath PersistentVolume plus a namespaced Claim; external-IP
needs become a LoadBalancer Service. Every workload references its
component's image-pull Secret.

GPU devices and external IPs are handed out first-fit in component
document order; a shortage is an error, never a partial bundle.
"""

from __future__ import annotations

import base64
import binascii
import ipaddress
import json
import random
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

from .documents import ManifestBundle, ManifestDoc, serialize_bundle
from .identity import InstanceId, generate_namespace, running_instance_name
from .model import CeamlModel, ComponentKind, ComponentSpec, validate
from .parser import NodeList

__all__ = [
    "GpuDevice",
    "DeployInputs",
    "ManifestError",
    "generate_secrets",
    "tosca_to_k8s",
    "serialize_bundle",
    "secret_name",
    "service_name",
    "pv_name",
    "pvc_name",
]


class ManifestError(Exception):
    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code
        self.message = message


@dataclass(frozen=True)
class GpuDevice:
    """One schedulable GPU: vendor resource key plus the device's own id."""

    resource_key: str  # e.g. nvidia.com/gpu
    device_id: str


@dataclass(frozen=True)
class DeployInputs:
    registry_token_b64: str
    version: str
    external_ips: Sequence[str] = ()
    cluster_id: str = ""
    gpus: Sequence[GpuDevice] = ()


def _decode_token(token_b64: str) -> bytes:
    try:
        return base64.b64decode(token_b64, validate=True)
    except (binascii.Error, ValueError) as exc:
        raise ManifestError("BadToken", f"registry token is not valid base64: {exc}") from exc


def _check_inputs(inputs: DeployInputs) -> None:
    _decode_token(inputs.registry_token_b64)
    for ip in inputs.external_ips:
        try:
            ipaddress.IPv4Address(ip)
        except ipaddress.AddressValueError as exc:
            raise ManifestError("InvalidExternalIp", f"{ip!r} is not an IPv4 address") from exc


def secret_name(component: str) -> str:
    return f"{component}-regcred"


def service_name(component: str) -> str:
    return f"{component}-svc"


def pv_name(instance: InstanceId, component: str) -> str:
    # PersistentVolumes are cluster-scoped, so the instance id keeps them unique.
    return f"{instance.rendered}-{component}-pv"


def pvc_name(component: str) -> str:
    return f"{component}-pvc"


def _labels(instance: InstanceId, cluster_id: str, component: Optional[str] = None) -> Dict[str, str]:
    labels = {
        "app-instance": instance.rendered,
        "app-name": instance.app_name,
        "cluster-id": cluster_id,
    }
    if component is not None:
        labels["component"] = component
    return labels


def _cpu_quantity(hw) -> str:
    return f"{int(hw.cpu_cores * 1000)}m"


def _resource_block(hw) -> Dict[str, str]:
    block = {"cpu": _cpu_quantity(hw), "memory": f"{hw.memory_mib}Mi"}
    if hw.disk_gib is not None:
        block["ephemeral-storage"] = f"{hw.disk_gib}Gi"
    return block


def generate_secrets(token_b64: str, instance: InstanceId, model: CeamlModel) -> List[ManifestDoc]:
    """One image-pull Secret per component, docker-config style, for the
    model's registry. Covers both container and VM images."""
    _decode_token(token_b64)
    docs = []
    for comp in model.components:
        payload = json.dumps(
            {"auths": {model.registry.host: {"auth": token_b64}}},
            sort_keys=True,
        )
        name = secret_name(comp.name)
        body = {
            "apiVersion": "v1",
            "kind": "Secret",
            "metadata": {
                "name": name,
                "namespace": instance.rendered,
                "labels": {
                    "app-instance": instance.rendered,
                    "app-name": instance.app_name,
                    "component": comp.name,
                },
            },
            "type": "kubernetes.io/dockerconfigjson",
            "data": {
                ".dockerconfigjson": base64.b64encode(payload.encode("utf-8")).decode("ascii"),
            },
        }
        docs.append(ManifestDoc(
            api_version="v1", kind="Secret", name=name,
            namespace=instance.rendered, body=body,
        ))
    return docs


def _with_cluster_label(doc: ManifestDoc, cluster_id: str) -> ManifestDoc:
    body = dict(doc.body)
    metadata = dict(body["metadata"])
    labels = dict(metadata.get("labels", {}))
    labels["cluster-id"] = cluster_id
    metadata["labels"] = labels
    body["metadata"] = metadata
    return ManifestDoc(
        api_version=doc.api_version, kind=doc.kind, name=doc.name,
        namespace=doc.namespace, body=body,
    )


def _pv_doc(instance: InstanceId, comp: ComponentSpec, cluster_id: str) -> ManifestDoc:
    name = pv_name(instance, comp.name)
    body = {
        "apiVersion": "v1",
        "kind": "PersistentVolume",
        "metadata": {
            "name": name,
            "labels": _labels(instance, cluster_id, comp.name),
        },
        "spec": {
            "capacity": {"storage": f"{comp.storage.size_gib}Gi"},
            "accessModes": ["ReadWriteOnce"],
            "persistentVolumeReclaimPolicy": "Delete",
            "storageClassName": "manual",
            "hostPath": {"path": f"/var/lib/ceamlgen/{instance.rendered}/{comp.name}"},
        },
    }
    return ManifestDoc(api_version="v1", kind="PersistentVolume", name=name, body=body)


def _pvc_doc(instance: InstanceId, comp: ComponentSpec, cluster_id: str) -> ManifestDoc:
    name = pvc_name(comp.name)
    body = {
        "apiVersion": "v1",
        "kind": "PersistentVolumeClaim",
        "metadata": {
            "name": name,
            "namespace": instance.rendered,
            "labels": _labels(instance, cluster_id, comp.name),
        },
        "spec": {
            "accessModes": ["ReadWriteOnce"],
            "storageClassName": "manual",
            "volumeName": pv_name(instance, comp.name),
            "resources": {"requests": {"storage": f"{comp.storage.size_gib}Gi"}},
        },
    }
    return ManifestDoc(
        api_version="v1", kind="PersistentVolumeClaim", name=name,
        namespace=instance.rendered, body=body,
    )


def _deployment_doc(
    instance: InstanceId,
    comp: ComponentSpec,
    cluster_id: str,
    running_name: str,
    gpu_devices: Sequence[GpuDevice],
) -> ManifestDoc:
    labels = _labels(instance, cluster_id, comp.name)
    labels["running-instance"] = running_name

    requests = _resource_block(comp.hardware)
    limits = dict(requests)
    gpu_counts: Dict[str, int] = {}
    for dev in gpu_devices:
        gpu_counts[dev.resource_key] = gpu_counts.get(dev.resource_key, 0) + 1
    for key, count in gpu_counts.items():
        limits[key] = str(count)

    container = {
        "name": comp.name,
        "image": comp.image,
        "resources": {"requests": requests, "limits": limits},
    }
    if comp.env:
        container["env"] = [{"name": k, "value": v} for k, v in comp.env.items()]
    if comp.ports:
        container["ports"] = [
            {"containerPort": p.port, "protocol": p.protocol.value} for p in comp.ports
        ]
    if comp.storage is not None:
        container["volumeMounts"] = [{"name": "data", "mountPath": comp.storage.mount_path}]

    pod_spec = {
        "imagePullSecrets": [{"name": secret_name(comp.name)}],
        "containers": [container],
    }
    if comp.storage is not None:
        pod_spec["volumes"] = [
            {"name": "data", "persistentVolumeClaim": {"claimName": pvc_name(comp.name)}}
        ]

    metadata = {
        "name": comp.name,
        "namespace": instance.rendered,
        "labels": labels,
    }
    if gpu_devices:
        metadata["annotations"] = {
            "gpu-devices": ",".join(d.device_id for d in gpu_devices),
        }

    body = {
        "apiVersion": "apps/v1",
        "kind": "Deployment",
        "metadata": metadata,
        "spec": {
            # Replica scaling belongs to the orchestrator's scale-out plan.
            "replicas": 1,
            "selector": {"matchLabels": {
                "app-instance": instance.rendered, "component": comp.name,
            }},
            "template": {
                "metadata": {"labels": dict(labels)},
                "spec": pod_spec,
            },
        },
    }
    return ManifestDoc(
        api_version="apps/v1", kind="Deployment", name=comp.name,
        namespace=instance.rendered, body=body,
    )


def _virtual_machine_doc(
    instance: InstanceId,
    comp: ComponentSpec,
    cluster_id: str,
    running_name: str,
    gpu_devices: Sequence[GpuDevice],
) -> ManifestDoc:
    labels = _labels(instance, cluster_id, comp.name)
    labels["running-instance"] = running_name

    disks = [{"name": "rootdisk", "disk": {"bus": "virtio"}}]
    volumes: List[dict] = [{
        "name": "rootdisk",
        "containerDisk": {
            "image": comp.image,
            "imagePullSecret": secret_name(comp.name),
        },
    }]
    if comp.storage is not None:
        disks.append({"name": "datadisk", "disk": {"bus": "virtio"}})
        volumes.append({
            "name": "datadisk",
            "persistentVolumeClaim": {"claimName": pvc_name(comp.name)},
        })

    devices: dict = {"disks": disks}
    if gpu_devices:
        devices["gpus"] = [
            {"name": f"gpu{i}", "deviceName": dev.resource_key}
            for i, dev in enumerate(gpu_devices)
        ]

    domain = {
        "devices": devices,
        "resources": {"requests": _resource_block(comp.hardware)},
    }

    vmi_spec = {"domain": domain, "volumes": volumes}
    metadata = {
        "name": comp.name,
        "namespace": instance.rendered,
        "labels": labels,
    }
    if gpu_devices:
        metadata["annotations"] = {
            "gpu-devices": ",".join(d.device_id for d in gpu_devices),
        }

    body = {
        "apiVersion": "kubevirt.io/v1",
        "kind": "VirtualMachine",
        "metadata": metadata,
        "spec": {
            "runStrategy": "Always",
            "template": {
                "metadata": {"labels": dict(labels)},
                "spec": vmi_spec,
            },
        },
    }
    return ManifestDoc(
        api_version="kubevirt.io/v1", kind="VirtualMachine", name=comp.name,
        namespace=instance.rendered, body=body,
    )


def _service_doc(
    instance: InstanceId, comp: ComponentSpec, cluster_id: str, external_ip: str
) -> ManifestDoc:
    name = service_name(comp.name)
    body = {
        "apiVersion": "v1",
        "kind": "Service",
        "metadata": {
            "name": name,
            "namespace": instance.rendered,
            "labels": _labels(instance, cluster_id, comp.name),
        },
        "spec": {
            "type": "LoadBalancer",
            "externalIPs": [external_ip],
            "selector": {"app-instance": instance.rendered, "component": comp.name},
            "ports": [
                {
                    "name": f"port-{p.port}",
                    "port": p.port,
                    "targetPort": p.port,
                    "protocol": p.protocol.value,
                }
                for p in comp.ports
            ],
        },
    }
    return ManifestDoc(
        api_version="v1", kind="Service", name=name,
        namespace=instance.rendered, body=body,
    )


def _namespace_doc(instance: InstanceId, cluster_id: str) -> ManifestDoc:
    base = generate_namespace(instance)
    body = {k: v for k, v in base.body.items()}
    metadata = dict(body["metadata"])
    labels = dict(metadata["labels"])
    labels["cluster-id"] = cluster_id
    metadata["labels"] = labels
    body["metadata"] = metadata
    return ManifestDoc(api_version="v1", kind="Namespace", name=base.name, body=body)


def tosca_to_k8s(
    nodes: NodeList,
    instance: InstanceId,
    cluster_id: str,
    inputs: DeployInputs,
    rng: Optional[random.Random] = None,
    only_component: Optional[str] = None,
) -> ManifestBundle:
    """Build the full manifest bundle for one instance on one cluster.

    ``only_component`` restricts the bundle to the named component plus
    the shared Namespace and that component's Secret (used by scale-out).
    """
    model = nodes.model
    report = validate(model)
    if not report.ok:
        raise ManifestError(
            "InvalidModel",
            "; ".join(f"{v.code} at {v.path}" for v in report),
        )
    _check_inputs(inputs)

    components = list(nodes.components())
    if only_component is not None:
        components = [c for c in components if c.name == only_component]
        if not components:
            raise ManifestError("UnknownComponent", f"no component named {only_component!r}")

    ip_demand = sum(1 for c in components if c.needs_external_ip)
    if ip_demand > len(inputs.external_ips):
        raise ManifestError(
            "InsufficientExternalIps",
            f"need {ip_demand} external IPs, have {len(inputs.external_ips)}",
        )
    gpu_demand = sum(c.hardware.gpu_count for c in components)
    if gpu_demand > len(inputs.gpus):
        raise ManifestError(
            "InsufficientGpus",
            f"need {gpu_demand} GPU devices, have {len(inputs.gpus)}",
        )

    secret_docs = [
        _with_cluster_label(doc, cluster_id)
        for doc in generate_secrets(inputs.registry_token_b64, instance, model)
    ]
    if only_component is not None:
        secret_docs = [d for d in secret_docs if d.name == secret_name(only_component)]

    pv_docs: List[ManifestDoc] = []
    pvc_docs: List[ManifestDoc] = []
    workload_docs: List[ManifestDoc] = []
    service_docs: List[ManifestDoc] = []

    next_ip = 0
    next_gpu = 0
    for comp in components:
        assigned = list(inputs.gpus[next_gpu:next_gpu + comp.hardware.gpu_count])
        next_gpu += comp.hardware.gpu_count

        running = running_instance_name(instance, comp.name, 0, rng=rng).rendered

        if comp.storage is not None:
            pv_docs.append(_pv_doc(instance, comp, cluster_id))
            pvc_docs.append(_pvc_doc(instance, comp, cluster_id))
        if comp.kind is ComponentKind.POD:
            workload_docs.append(
                _deployment_doc(instance, comp, cluster_id, running, assigned)
            )
        else:
            workload_docs.append(
                _virtual_machine_doc(instance, comp, cluster_id, running, assigned)
            )
        if comp.needs_external_ip:
            service_docs.append(
                _service_doc(instance, comp, cluster_id, inputs.external_ips[next_ip])
            )
            next_ip += 1

    docs: List[ManifestDoc] = [_namespace_doc(instance, cluster_id)]
    docs.extend(secret_docs)
    docs.extend(pv_docs)
    docs.extend(pvc_docs)
    docs.extend(workload_docs)
    docs.extend(service_docs)
    return ManifestBundle(instance=instance, cluster_id=cluster_id, docs=tuple(docs))
