"""Instance identity: unique application-instance IDs, per-component
running-instance names, and the namespace object derived from them.

Every rendered name must be a valid DNS-1123 label (lowercase
alphanumeric plus hyphen, starts/ends alphanumeric, at most 63 chars)
because it ends up in Kubernetes metadata.

Name anatomy, fixed here and documented in the README:

    <app>-<version with . as ->-<nonce5>-<component>-<random5>-min<replica>

``min<replica>`` is treated as the replica ordinal. Randomness is
caller-injected; callers sharing one generator across threads must
serialize mint calls or hand each thread its own generator.
"""

from __future__ import annotations

import random
import re
import string
from dataclasses import dataclass
from typing import Optional, Tuple

from .documents import ManifestDoc
from .model import APP_NAME_RE, VERSION_RE, CeamlModel

DNS1123_LABEL_RE = re.compile(r"^[a-z0-9]([a-z0-9-]*[a-z0-9])?$")
DNS1123_MAX = 63

NONCE_LENGTH = 5
NONCE_ALPHABET = string.ascii_lowercase + string.digits
_NONCE_RE = re.compile(r"^[a-z0-9]{%d}$" % NONCE_LENGTH)
_REPLICA_RE = re.compile(r"^(?P<head>.+)-(?P<random>[a-z0-9]{5})-min(?P<index>[0-9]+)$")


class IdentityError(Exception):
    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code
        self.message = message


@dataclass(frozen=True)
class InstanceId:
    app_name: str
    version_slug: str
    nonce: str
    rendered: str


@dataclass(frozen=True)
class RunningInstanceName:
    instance: InstanceId
    component: str
    replica_tag: str
    rendered: str


def is_dns1123_label(value: str) -> bool:
    return bool(DNS1123_LABEL_RE.match(value)) and len(value) <= DNS1123_MAX


def version_slug(version: str) -> str:
    return version.replace(".", "-")


def _draw_random(rng: Optional[random.Random], length: int) -> str:
    source = rng if rng is not None else random
    return "".join(source.choice(NONCE_ALPHABET) for _ in range(length))


def generate_instance_id(
    app_name: str,
    version: str,
    nonce: Optional[str] = None,
    rng: Optional[random.Random] = None,
) -> InstanceId:
    """Mint the unique application-instance ID from name, version and nonce.

    Deterministic when the nonce is supplied; otherwise a fresh random
    5-char lowercase alphanumeric nonce is drawn from ``rng``.
    """
    if not APP_NAME_RE.match(app_name):
        raise IdentityError("InvalidAppName", f"app name {app_name!r} is not a valid identifier")
    if not VERSION_RE.match(version):
        raise IdentityError("InvalidVersion", f"version {version!r} is not dotted decimal")
    if nonce is None:
        nonce = _draw_random(rng, NONCE_LENGTH)
    elif not _NONCE_RE.match(nonce):
        raise IdentityError(
            "InvalidNonce",
            f"nonce {nonce!r} must be {NONCE_LENGTH} lowercase alphanumeric chars",
        )
    rendered = f"{app_name}-{version_slug(version)}-{nonce}"
    if not is_dns1123_label(rendered):
        raise IdentityError(
            "InvalidInstanceId",
            f"rendered id {rendered!r} violates DNS-1123 label rules",
        )
    return InstanceId(
        app_name=app_name, version_slug=version_slug(version), nonce=nonce, rendered=rendered
    )


def running_instance_name(
    instance: InstanceId,
    component: str,
    replica_index: int,
    random_tag: Optional[str] = None,
    rng: Optional[random.Random] = None,
) -> RunningInstanceName:
    """Compose the per-replica running-instance name for one component."""
    if replica_index < 0:
        raise IdentityError("InvalidReplicaIndex", f"replica index {replica_index} is negative")
    if random_tag is None:
        random_tag = _draw_random(rng, NONCE_LENGTH)
    elif not _NONCE_RE.match(random_tag):
        raise IdentityError(
            "InvalidRandomTag",
            f"random tag {random_tag!r} must be {NONCE_LENGTH} lowercase alphanumeric chars",
        )
    replica_tag = f"{random_tag}-min{replica_index}"
    rendered = f"{instance.rendered}-{component}-{replica_tag}"
    if not is_dns1123_label(rendered):
        raise IdentityError(
            "InvalidRunningInstanceName",
            f"rendered name {rendered!r} violates DNS-1123 label rules or length",
        )
    return RunningInstanceName(
        instance=instance, component=component, replica_tag=replica_tag, rendered=rendered
    )


def parse_running_instance(name: str, model: CeamlModel) -> Tuple[InstanceId, str, int]:
    """Inverse of running_instance_name, disambiguated against a model.

    Component names may themselves contain hyphens, so the component
    boundary is found by longest-match against the model's component
    names; the match is total, so ambiguity cannot arise.
    """
    match = _REPLICA_RE.match(name)
    if not match:
        raise IdentityError(
            "Unparseable", f"{name!r} does not end in <random5>-min<replica>"
        )
    head = match.group("head")
    replica_index = int(match.group("index"))

    component = None
    for comp in model.components:
        if head.endswith("-" + comp.name):
            if component is None or len(comp.name) > len(component):
                component = comp.name
    if component is None:
        raise IdentityError(
            "Unparseable", f"no component of {model.app_name!r} matches {name!r}"
        )

    instance_rendered = head[: -(len(component) + 1)]
    prefix = model.app_name + "-"
    if not instance_rendered.startswith(prefix):
        raise IdentityError(
            "Unparseable",
            f"instance id {instance_rendered!r} does not begin with app name {model.app_name!r}",
        )
    rest = instance_rendered[len(prefix):]
    segments = rest.rsplit("-", 1)
    if len(segments) != 2 or not _NONCE_RE.match(segments[1]):
        raise IdentityError(
            "Unparseable", f"instance id {instance_rendered!r} lacks a trailing 5-char nonce"
        )
    vslug, nonce = segments
    instance = InstanceId(
        app_name=model.app_name, version_slug=vslug, nonce=nonce, rendered=instance_rendered
    )
    return instance, component, replica_index


def generate_namespace(instance: InstanceId) -> ManifestDoc:
    """The v1 Namespace holding every resource of one application instance."""
    body = {
        "apiVersion": "v1",
        "kind": "Namespace",
        "metadata": {
            "name": instance.rendered,
            "labels": {
                "app-name": instance.app_name,
                "app-version": instance.version_slug,
                "app-instance": instance.rendered,
            },
        },
    }
    return ManifestDoc(api_version="v1", kind="Namespace", name=instance.rendered, body=body)
