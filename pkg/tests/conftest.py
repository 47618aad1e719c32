from __future__ import annotations

import base64
import json
from pathlib import Path

import pytest
import yaml
from jsonschema import Draft202012Validator

import ceamlgen as cg

REPO_ROOT = Path(__file__).resolve().parent.parent
REFERENCE_MODEL = REPO_ROOT / "docs" / "reference-model.yaml"
SCHEMA_DIR = Path(__file__).resolve().parent / "fixtures" / "schemas"
GOLDEN_DIR = Path(__file__).resolve().parent / "fixtures" / "golden"

TOKEN_B64 = base64.b64encode(b"user:s3cret").decode("ascii")


@pytest.fixture(scope="session")
def reference_model_path() -> Path:
    return REFERENCE_MODEL


@pytest.fixture(scope="session")
def reference_model() -> cg.CeamlModel:
    return cg.parse_file(REFERENCE_MODEL)


@pytest.fixture(scope="session")
def reference_instance() -> cg.InstanceId:
    return cg.generate_instance_id("acc-uc2orbk", "0.0.4", "00036")


@pytest.fixture(scope="session")
def token_b64() -> str:
    return TOKEN_B64


class SchemaOracle:
    """Validates manifest documents against the pinned structural schemas."""

    def __init__(self, schema_dir: Path):
        self._validators = {}
        for path in schema_dir.glob("*.json"):
            schema = json.loads(path.read_text(encoding="utf-8"))
            kind = schema["properties"]["kind"]["const"]
            self._validators[kind] = Draft202012Validator(schema)

    def errors(self, doc: cg.ManifestDoc) -> list[str]:
        validator = self._validators.get(doc.kind)
        if validator is None:
            return [f"no pinned schema for kind {doc.kind!r}"]
        body = yaml.safe_load(doc.serialize())
        return [
            f"{doc.kind}/{doc.name}: {err.json_path}: {err.message}"
            for err in validator.iter_errors(body)
        ]

    def check_bundle(self, bundle: cg.ManifestBundle) -> list[str]:
        out = []
        for doc in bundle.docs:
            out.extend(self.errors(doc))
        return out


@pytest.fixture(scope="session")
def schema_oracle() -> SchemaOracle:
    return SchemaOracle(SCHEMA_DIR)


@pytest.fixture(scope="session")
def reference_plan(reference_model_path, token_b64) -> cg.DeploymentPlan:
    return cg.plan_deployment(
        model_path=reference_model_path,
        token_b64=token_b64,
        version="0.0.4",
        external_ips=["10.0.0.7"],
        cluster_id="edge-1",
        gpus=[],
        nonce="00036",
    )
