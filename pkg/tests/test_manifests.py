import base64
import json
from decimal import Decimal

import pytest
import yaml

from ceamlgen.documents import serialize_bundle
from ceamlgen.identity import generate_instance_id
from ceamlgen.manifests import (
    DeployInputs,
    ManifestError,
    generate_secrets,
    tosca_to_k8s,
)
from ceamlgen.model import ComponentKind
from ceamlgen.parser import node_list

from model_corpus import corpus, inputs_for

CORPUS = corpus(60)


def _instance_for(model):
    return generate_instance_id(model.app_name, model.app_version, "abc12")


def _bundle_for(model, cluster="edge-1"):
    return tosca_to_k8s(
        node_list(model), _instance_for(model), cluster, inputs_for(model, cluster)
    )


# --- secrets ---------------------------------------------------------------


def test_one_secret_per_component(reference_model, reference_instance, token_b64):
    docs = generate_secrets(token_b64, reference_instance, reference_model)
    assert [d.name for d in docs] == ["gameserver-regcred", "vmcomp-regcred"]
    assert all(d.kind == "Secret" for d in docs)
    assert all(d.namespace == reference_instance.rendered for d in docs)


def test_no_components_no_secrets(reference_model, reference_instance, token_b64):
    empty = type(reference_model)(
        app_name=reference_model.app_name,
        app_version=reference_model.app_version,
        registry=reference_model.registry,
        components=(),
        workflows=(),
    )
    assert generate_secrets(token_b64, reference_instance, empty) == []


@pytest.mark.parametrize("model", CORPUS[:20], ids=lambda m: m.app_name)
def test_secret_payload_contains_registry_host(model, token_b64):
    # Decode-and-inspect oracle: the auth payload must name the registry.
    docs = generate_secrets(token_b64, _instance_for(model), model)
    for doc in docs:
        payload = json.loads(base64.b64decode(doc.body["data"][".dockerconfigjson"]))
        assert model.registry.host in payload["auths"]
        assert payload["auths"][model.registry.host]["auth"] == token_b64


def test_bad_token_rejected(reference_model, reference_instance):
    with pytest.raises(ManifestError) as excinfo:
        generate_secrets("not base64!!", reference_instance, reference_model)
    assert excinfo.value.code == "BadToken"


# --- bundle shape ----------------------------------------------------------


def expected_doc_count(model) -> int:
    # Brute-force doc-count law: 1 + 2*C_storage + C + C_pod + C_vm + C_extip.
    c = len(model.components)
    c_storage = sum(1 for x in model.components if x.storage is not None)
    c_pod = sum(1 for x in model.components if x.kind is ComponentKind.POD)
    c_vm = sum(1 for x in model.components if x.kind is ComponentKind.VIRTUAL_MACHINE)
    c_extip = sum(1 for x in model.components if x.needs_external_ip)
    return 1 + 2 * c_storage + c + c_pod + c_vm + c_extip


def test_reference_bundle_is_eight_docs(reference_plan):
    bundle = reference_plan.bundle
    assert len(bundle.docs) == 8
    kinds = [d.kind for d in bundle.docs]
    assert kinds == [
        "Namespace", "Secret", "Secret", "PersistentVolume",
        "PersistentVolumeClaim", "Deployment", "VirtualMachine", "Service",
    ]


@pytest.mark.parametrize("model", CORPUS, ids=lambda m: m.app_name)
def test_doc_count_law(model):
    bundle = _bundle_for(model)
    assert len(bundle.docs) == expected_doc_count(model)


@pytest.mark.parametrize("model", CORPUS[:30], ids=lambda m: m.app_name)
def test_namespace_consistency(model):
    bundle = _bundle_for(model)
    namespaces = [d for d in bundle.docs if d.kind == "Namespace"]
    assert len(namespaces) == 1
    for doc in bundle.docs:
        if doc.kind in ("Namespace", "PersistentVolume"):
            assert doc.namespace is None
            assert "namespace" not in doc.body["metadata"]
        else:
            assert doc.namespace == bundle.instance.rendered
            assert doc.body["metadata"]["namespace"] == bundle.instance.rendered


def _parse_quantity(value: str) -> Decimal:
    for suffix, factor in (("m", Decimal("0.001")), ("Mi", 1), ("Gi", 1)):
        if value.endswith(suffix):
            return Decimal(value[: -len(suffix)]) * factor
    return Decimal(value)


@pytest.mark.parametrize("model", CORPUS[:30], ids=lambda m: m.app_name)
def test_resource_fidelity(model):
    bundle = _bundle_for(model)
    for comp in model.components:
        doc = next(d for d in bundle.docs if d.kind in ("Deployment", "VirtualMachine")
                   and d.name == comp.name)
        if doc.kind == "Deployment":
            requests = doc.body["spec"]["template"]["spec"]["containers"][0]["resources"]["requests"]
            limits = doc.body["spec"]["template"]["spec"]["containers"][0]["resources"]["limits"]
        else:
            requests = doc.body["spec"]["template"]["spec"]["domain"]["resources"]["requests"]
            limits = {}
        assert _parse_quantity(requests["cpu"]) == comp.hardware.cpu_cores
        assert requests["memory"] == f"{comp.hardware.memory_mib}Mi"
        if comp.hardware.disk_gib is not None:
            assert requests["ephemeral-storage"] == f"{comp.hardware.disk_gib}Gi"
        if doc.kind == "Deployment":
            gpu_total = sum(
                int(v) for k, v in limits.items()
                if k not in ("cpu", "memory", "ephemeral-storage")
            )
            assert gpu_total == comp.hardware.gpu_count
        else:
            gpus = doc.body["spec"]["template"]["spec"]["domain"]["devices"].get("gpus", [])
            assert len(gpus) == comp.hardware.gpu_count
        if comp.storage is not None:
            pvc = next(d for d in bundle.docs if d.kind == "PersistentVolumeClaim"
                       and d.name == f"{comp.name}-pvc")
            assert pvc.body["spec"]["resources"]["requests"]["storage"] == f"{comp.storage.size_gib}Gi"


@pytest.mark.parametrize("model", CORPUS[:30], ids=lambda m: m.app_name)
def test_gpu_assignment_is_first_fit_prefix(model):
    inputs = inputs_for(model, "edge-1")
    bundle = tosca_to_k8s(node_list(model), _instance_for(model), "edge-1", inputs)
    assigned = []
    for comp in model.components:
        doc = next(d for d in bundle.docs if d.name == comp.name
                   and d.kind in ("Deployment", "VirtualMachine"))
        annotation = doc.body["metadata"].get("annotations", {}).get("gpu-devices", "")
        ids = [x for x in annotation.split(",") if x]
        assert len(ids) == comp.hardware.gpu_count
        assigned.extend(ids)
    expected_prefix = [g.device_id for g in inputs.gpus[: len(assigned)]]
    assert assigned == expected_prefix
    assert len(set(assigned)) == len(assigned)  # no device handed out twice


@pytest.mark.parametrize("model", CORPUS[:30], ids=lambda m: m.app_name)
def test_external_ip_assignment_is_prefix(model):
    inputs = inputs_for(model, "edge-1")
    bundle = tosca_to_k8s(node_list(model), _instance_for(model), "edge-1", inputs)
    used = []
    for comp in model.components:
        if not comp.needs_external_ip:
            continue
        svc = next(d for d in bundle.docs if d.kind == "Service"
                   and d.name == f"{comp.name}-svc")
        ips = svc.body["spec"]["externalIPs"]
        assert len(ips) == 1
        used.append(ips[0])
    assert used == list(inputs.external_ips[: len(used)])
    assert len(set(used)) == len(used)


def test_no_gpu_keys_when_no_gpus(reference_plan):
    text = serialize_bundle(reference_plan.bundle)
    assert "gpu" not in text.lower()


def test_insufficient_gpus(reference_model_path, token_b64):
    import ceamlgen as cg

    model = cg.parse_file(reference_model_path)
    gpu_model = type(model)(
        app_name=model.app_name,
        app_version=model.app_version,
        registry=model.registry,
        components=tuple(
            type(c)(
                name=c.name, kind=c.kind, image=c.image,
                hardware=type(c.hardware)(
                    cpu_cores=c.hardware.cpu_cores,
                    memory_mib=c.hardware.memory_mib,
                    disk_gib=c.hardware.disk_gib,
                    gpu_count=1,
                ),
                ports=c.ports, needs_external_ip=c.needs_external_ip,
                storage=c.storage, env=c.env, actions=c.actions,
            )
            for c in model.components
        ),
        workflows=model.workflows,
    )
    inputs = DeployInputs(token_b64, "0.0.4", ("10.0.0.7",), "edge-1", ())
    with pytest.raises(ManifestError) as excinfo:
        tosca_to_k8s(node_list(gpu_model), _instance_for(gpu_model), "edge-1", inputs)
    assert excinfo.value.code == "InsufficientGpus"


def test_insufficient_external_ips(reference_model, token_b64):
    inputs = DeployInputs(token_b64, "0.0.4", (), "edge-1", ())
    with pytest.raises(ManifestError) as excinfo:
        tosca_to_k8s(
            node_list(reference_model), _instance_for(reference_model), "edge-1", inputs
        )
    assert excinfo.value.code == "InsufficientExternalIps"


def test_invalid_external_ip_rejected(reference_model, token_b64):
    inputs = DeployInputs(token_b64, "0.0.4", ("10.0.0.999",), "edge-1", ())
    with pytest.raises(ManifestError) as excinfo:
        tosca_to_k8s(
            node_list(reference_model), _instance_for(reference_model), "edge-1", inputs
        )
    assert excinfo.value.code == "InvalidExternalIp"


def test_workloads_reference_pull_secrets(reference_plan):
    for doc in reference_plan.bundle.docs:
        if doc.kind == "Deployment":
            secrets = doc.body["spec"]["template"]["spec"]["imagePullSecrets"]
            assert secrets == [{"name": f"{doc.name}-regcred"}]
        if doc.kind == "VirtualMachine":
            volumes = doc.body["spec"]["template"]["spec"]["volumes"]
            root = next(v for v in volumes if v["name"] == "rootdisk")
            assert root["containerDisk"]["imagePullSecret"] == f"{doc.name}-regcred"


def test_cluster_and_instance_labels_everywhere(reference_plan):
    for doc in reference_plan.bundle.docs:
        labels = doc.body["metadata"]["labels"]
        assert labels["cluster-id"] == "edge-1"
        assert labels["app-instance"] == reference_plan.bundle.instance.rendered


# --- serialization ---------------------------------------------------------


def test_serialize_bundle_deterministic(reference_plan):
    first = serialize_bundle(reference_plan.bundle)
    second = serialize_bundle(reference_plan.bundle)
    assert first == second
    assert first.endswith("\n")


def test_serialize_bundle_document_count(reference_plan):
    text = serialize_bundle(reference_plan.bundle)
    docs = list(yaml.safe_load_all(text))
    assert len(docs) == len(reference_plan.bundle.docs)


def test_reference_bundle_passes_pinned_schemas(reference_plan, schema_oracle):
    assert schema_oracle.check_bundle(reference_plan.bundle) == []
