import copy
from pathlib import Path

import pytest

import ceamlgen as cg
from ceamlgen.plans import component_docs

from model_corpus import corpus, inputs_for

CORPUS = corpus(60)
GOLDEN_DIR = Path(__file__).resolve().parent / "fixtures" / "golden"


def _write_model(tmp_path, model) -> Path:
    path = tmp_path / f"{model.app_name}.yaml"
    path.write_text(cg.serialize_model(model), encoding="utf-8")
    return path


def _deploy(model, path, cluster="edge-1", nonce="abc12"):
    inputs = inputs_for(model, cluster)
    return cg.plan_deployment(
        model_path=path,
        token_b64=inputs.registry_token_b64,
        version=model.app_version,
        external_ips=inputs.external_ips,
        cluster_id=cluster,
        gpus=inputs.gpus,
        nonce=nonce,
    )


# --- deployment ------------------------------------------------------------


def test_reference_plan_matches_golden_files(reference_plan):
    for order, doc in enumerate(reference_plan.bundle.docs, start=1):
        golden = GOLDEN_DIR / f"{order:02d}-{doc.kind}-{doc.name}.yaml"
        assert doc.serialize() == golden.read_text(encoding="utf-8"), golden.name
    submodels = reference_plan.submodels
    for name, submodel in (
        ("matchmaking.yaml", submodels.matchmaking),
        ("actions.yaml", submodels.actions),
        ("workflows.yaml", submodels.workflows),
    ):
        golden = GOLDEN_DIR / name
        assert cg.serialize_submodel(submodel) == golden.read_text(encoding="utf-8"), name


def test_all_plan_artifacts_share_one_instance(reference_plan):
    rendered = reference_plan.bundle.instance.rendered
    assert reference_plan.submodels.matchmaking.instance.rendered == rendered
    assert reference_plan.submodels.actions.instance.rendered == rendered
    assert reference_plan.submodels.workflows.instance.rendered == rendered


def test_version_mismatch_rejected(reference_model_path, token_b64):
    with pytest.raises(cg.PlanError) as excinfo:
        cg.plan_deployment(
            model_path=reference_model_path,
            token_b64=token_b64,
            version="9.9.9",
            external_ips=["10.0.0.7"],
            cluster_id="edge-1",
            gpus=[],
        )
    assert excinfo.value.code == "VersionMismatch"


def test_zero_external_ips_shortage(reference_model_path, token_b64):
    with pytest.raises(cg.ManifestError) as excinfo:
        cg.plan_deployment(
            model_path=reference_model_path,
            token_b64=token_b64,
            version="0.0.4",
            external_ips=[],
            cluster_id="edge-1",
            gpus=[],
        )
    assert excinfo.value.code == "InsufficientExternalIps"


# --- termination -----------------------------------------------------------


def test_reference_termination_targets(reference_model_path):
    plan = cg.plan_termination(
        "acc-uc2orbk-0-0-4-00036-gameserver-7reio-min1", reference_model_path
    )
    assert plan.instance.rendered == "acc-uc2orbk-0-0-4-00036"
    assert plan.component == "gameserver"
    assert [(t.kind, t.name) for t in plan.targets] == [
        ("Service", "gameserver-svc"),
        ("Deployment", "gameserver"),
        ("Secret", "gameserver-regcred"),
    ]
    for target in plan.targets:
        assert target.namespace == "acc-uc2orbk-0-0-4-00036"


def test_termination_unknown_component(reference_model_path):
    with pytest.raises(cg.IdentityError) as excinfo:
        cg.plan_termination(
            "acc-uc2orbk-0-0-4-00036-cache-7reio-min1", reference_model_path
        )
    assert excinfo.value.code == "Unparseable"


def test_last_component_appends_namespace(reference_model_path):
    plan = cg.plan_termination(
        "acc-uc2orbk-0-0-4-00036-gameserver-7reio-min1",
        reference_model_path,
        last_component=True,
    )
    assert plan.targets[-1].kind == "Namespace"
    assert plan.targets[-1].name == "acc-uc2orbk-0-0-4-00036"


@pytest.mark.parametrize("model", CORPUS[:30], ids=lambda m: m.app_name)
def test_deploy_terminate_duality(model, tmp_path):
    # Set-difference oracle: termination targets exactly the component's
    # deployment docs, in reverse apply order.
    path = _write_model(tmp_path, model)
    plan = _deploy(model, path)
    for comp in model.components:
        running = cg.running_instance_name(
            plan.bundle.instance, comp.name, 0, "zzzz0"
        ).rendered
        termination = cg.plan_termination(running, path)
        deployed = [(d.kind, d.name) for d in component_docs(plan.bundle, comp.name)]
        targets = [(t.kind, t.name) for t in termination.targets]
        assert targets == list(reversed(deployed))
        assert set(targets) == set(deployed)
        assert len(set(targets)) == len(targets)


# --- scale-out -------------------------------------------------------------


def _strip_whitelisted(doc_body):
    body = copy.deepcopy(doc_body)

    def scrub(node):
        if isinstance(node, dict):
            if "labels" in node and isinstance(node["labels"], dict):
                node["labels"].pop("cluster-id", None)
                node["labels"].pop("running-instance", None)
            if "matchLabels" in node and isinstance(node["matchLabels"], dict):
                node["matchLabels"].pop("cluster-id", None)
                node["matchLabels"].pop("running-instance", None)
            for value in node.values():
                scrub(value)
        elif isinstance(node, list):
            for value in node:
                scrub(value)

    scrub(body)
    return body


def test_reference_scale_out(reference_model_path, token_b64):
    inputs = cg.DeployInputs(token_b64, "0.0.4", ("10.0.0.7",), "edge-2", ())
    plan = cg.plan_scale_out(
        "acc-uc2orbk-0-0-4-00036-gameserver-7reio-min1",
        reference_model_path,
        "edge-2",
        inputs,
    )
    assert plan.instance.rendered == "acc-uc2orbk-0-0-4-00036"
    assert plan.target_cluster == "edge-2"
    kinds = [(d.kind, d.name) for d in plan.bundle.docs]
    assert kinds == [
        ("Namespace", "acc-uc2orbk-0-0-4-00036"),
        ("Secret", "gameserver-regcred"),
        ("Deployment", "gameserver"),
        ("Service", "gameserver-svc"),
    ]
    for doc in plan.bundle.docs:
        assert doc.body["metadata"]["labels"]["cluster-id"] == "edge-2"
    # Namespace preserved: ID conservation corollary.
    assert plan.bundle.docs[0].name == plan.instance.rendered


@pytest.mark.parametrize("model", CORPUS[:30], ids=lambda m: m.app_name)
def test_scale_out_structural_diff(model, tmp_path):
    path = _write_model(tmp_path, model)
    plan = _deploy(model, path)
    base_inputs = inputs_for(model, "edge-1")
    for comp in model.components:
        running = cg.running_instance_name(
            plan.bundle.instance, comp.name, 0, "zzzz0"
        ).rendered
        original = component_docs(plan.bundle, comp.name)
        # Hand the target cluster exactly the resources the component already
        # uses, so only the whitelisted fields can differ.
        svc = [d for d in original if d.kind == "Service"]
        ips = tuple(d.body["spec"]["externalIPs"][0] for d in svc)
        gpu_ids = []
        workload = next(d for d in original if d.kind in ("Deployment", "VirtualMachine"))
        annotation = workload.body["metadata"].get("annotations", {}).get("gpu-devices", "")
        gpu_ids = [x for x in annotation.split(",") if x]
        gpus = tuple(g for g in base_inputs.gpus if g.device_id in gpu_ids)
        inputs = cg.DeployInputs(
            base_inputs.registry_token_b64, model.app_version, ips, "edge-2", gpus
        )
        scale = cg.plan_scale_out(running, path, "edge-2", inputs)

        assert scale.instance == plan.bundle.instance  # ID conservation
        scaled = [d for d in scale.bundle.docs if d.kind != "Namespace"]
        assert [(d.kind, d.name) for d in scaled] == [(d.kind, d.name) for d in original]
        for before, after in zip(original, scaled):
            assert _strip_whitelisted(before.body) == _strip_whitelisted(after.body)
            after_labels = after.body["metadata"]["labels"]
            assert after_labels["cluster-id"] == "edge-2"
