"""Command-line front end: deploy, terminate, scale-out, validate.

Exit codes: 0 success, 1 model/plan errors, 2 flag errors. Diagnostics go
to stderr; with --stdout, standard output carries exactly the serialized
plan and nothing else, so it can be piped straight into other tools.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import yaml

from .documents import ManifestBundle
from .identity import IdentityError
from .manifests import DeployInputs, GpuDevice, ManifestError
from .parser import ParseError, parse_file
from .plans import (
    DeploymentPlan,
    PlanError,
    TerminationPlan,
    plan_deployment,
    plan_scale_out,
    plan_termination,
)
from .submodels import SubmodelError, serialize_submodel

TOKEN_ENV_VAR = "REGISTRY_TOKEN_B64"


def _gpu_flag(value: str) -> GpuDevice:
    if "=" not in value:
        raise argparse.ArgumentTypeError(
            f"GPU must be <resource-key>=<device-id>, got {value!r}"
        )
    key, device = value.split("=", 1)
    return GpuDevice(resource_key=key, device_id=device)


def _add_output_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_mutually_exclusive_group()
    group.add_argument("--out", metavar="DIR", help="write artifacts as files into DIR")
    group.add_argument(
        "--stdout", action="store_true",
        help="write a single multi-document YAML stream to stdout (default)",
    )


def _add_token_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_mutually_exclusive_group()
    group.add_argument("--token-b64", help="base64-encoded registry access token")
    group.add_argument(
        "--token-file", help=f"file holding the base64 token (fallback: ${TOKEN_ENV_VAR})"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ceamlgen",
        description="Generate Kubernetes/Kubevirt plans from CEAML application models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    deploy = sub.add_parser("deploy", help="generate a deployment plan")
    deploy.add_argument("--model", required=True, help="path to the CEAML model file")
    deploy.add_argument("--version", required=True, help="application version (must match the model)")
    deploy.add_argument("--cluster", required=True, help="target cluster id")
    deploy.add_argument(
        "--external-ip", action="append", default=[], metavar="IP",
        help="available external IPv4 address (repeatable)",
    )
    deploy.add_argument(
        "--gpu", action="append", default=[], type=_gpu_flag, metavar="KEY=ID",
        help="available GPU as <resource-key>=<device-id> (repeatable)",
    )
    deploy.add_argument("--nonce", help="pin the 5-char instance nonce for reproducible output")
    _add_token_flags(deploy)
    _add_output_flags(deploy)

    term = sub.add_parser("terminate", help="generate a termination plan")
    term.add_argument("--instance", required=True, help="running instance name")
    term.add_argument("--model", required=True)
    term.add_argument(
        "--last-component", action="store_true",
        help="also delete the shared namespace (instance has no other components left)",
    )
    _add_output_flags(term)

    scale = sub.add_parser("scale-out", help="generate a scale-out plan for another cluster")
    scale.add_argument("--instance", required=True, help="running instance name")
    scale.add_argument("--model", required=True)
    scale.add_argument("--target-cluster", required=True)
    scale.add_argument("--external-ip", action="append", default=[], metavar="IP")
    scale.add_argument("--gpu", action="append", default=[], type=_gpu_flag, metavar="KEY=ID")
    _add_token_flags(scale)
    _add_output_flags(scale)

    val = sub.add_parser("validate", help="parse and validate a model, emit nothing")
    val.add_argument("--model", required=True)

    return parser


def _resolve_token(args: argparse.Namespace, parser: argparse.ArgumentParser) -> str:
    if args.token_b64:
        return args.token_b64
    if args.token_file:
        try:
            return Path(args.token_file).read_text(encoding="utf-8").strip()
        except OSError as exc:
            parser.error(f"cannot read --token-file: {exc}")
    env = os.environ.get(TOKEN_ENV_VAR)
    if env:
        return env
    parser.error(f"no registry token: pass --token-b64, --token-file, or set ${TOKEN_ENV_VAR}")
    raise AssertionError("unreachable")


def _write_bundle_files(bundle: ManifestBundle, out_dir: Path) -> List[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for order, doc in enumerate(bundle.docs, start=1):
        path = out_dir / f"{order:02d}-{doc.kind}-{doc.name}.yaml"
        path.write_text(doc.serialize(), encoding="utf-8")
        written.append(path)
    return written


def _emit_deployment(plan: DeploymentPlan, out_dir: Optional[str]) -> None:
    submodel_texts = {
        "matchmaking.yaml": serialize_submodel(plan.submodels.matchmaking),
        "actions.yaml": serialize_submodel(plan.submodels.actions),
        "workflows.yaml": serialize_submodel(plan.submodels.workflows),
    }
    if out_dir is None:
        parts = [doc.serialize() for doc in plan.bundle.docs]
        parts.extend(submodel_texts.values())
        sys.stdout.write("---\n".join(parts))
        return
    target = Path(out_dir)
    written = _write_bundle_files(plan.bundle, target)
    for name, text in submodel_texts.items():
        path = target / name
        path.write_text(text, encoding="utf-8")
        written.append(path)
    for path in written:
        print(f"wrote {path}", file=sys.stderr)


def _serialize_termination(plan: TerminationPlan) -> str:
    doc = {
        "kind": "termination-plan",
        "instance": plan.instance.rendered,
        "component": plan.component,
        "targets": [
            {"kind": t.kind, "name": t.name, **({"namespace": t.namespace} if t.namespace else {})}
            for t in plan.targets
        ],
    }
    return yaml.safe_dump(doc, sort_keys=True, default_flow_style=False)


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        if args.command == "deploy":
            token = _resolve_token(args, parser)
            plan = plan_deployment(
                model_path=args.model,
                token_b64=token,
                version=args.version,
                external_ips=args.external_ip,
                cluster_id=args.cluster,
                gpus=args.gpu,
                nonce=args.nonce,
            )
            _emit_deployment(plan, args.out)
            return 0

        if args.command == "terminate":
            plan = plan_termination(
                args.instance, args.model, last_component=args.last_component
            )
            text = _serialize_termination(plan)
            if args.out is None:
                sys.stdout.write(text)
            else:
                target = Path(args.out)
                target.mkdir(parents=True, exist_ok=True)
                path = target / "termination-plan.yaml"
                path.write_text(text, encoding="utf-8")
                print(f"wrote {path}", file=sys.stderr)
            return 0

        if args.command == "scale-out":
            token = _resolve_token(args, parser)
            model = parse_file(args.model)
            inputs = DeployInputs(
                registry_token_b64=token,
                version=model.app_version,
                external_ips=tuple(args.external_ip),
                cluster_id=args.target_cluster,
                gpus=tuple(args.gpu),
            )
            plan = plan_scale_out(args.instance, args.model, args.target_cluster, inputs)
            if args.out is None:
                sys.stdout.write("---\n".join(doc.serialize() for doc in plan.bundle.docs))
            else:
                for path in _write_bundle_files(plan.bundle, Path(args.out)):
                    print(f"wrote {path}", file=sys.stderr)
            return 0

        if args.command == "validate":
            parse_file(args.model)
            print("model is valid", file=sys.stderr)
            return 0

        raise AssertionError(f"unknown command {args.command!r}")

    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if exc.report is not None:
            for violation in exc.report:
                print(f"  {violation.code} at {violation.path}: {violation.message}", file=sys.stderr)
        return 1
    except (IdentityError, ManifestError, SubmodelError, PlanError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
