"""ceamlgen: a CEAML reasoner producing Kubernetes and Kubevirt plans."""

from .documents import ManifestBundle, ManifestDoc, serialize_bundle
from .identity import (
    IdentityError,
    InstanceId,
    RunningInstanceName,
    generate_instance_id,
    generate_namespace,
    parse_running_instance,
    running_instance_name,
)
from .manifests import (
    DeployInputs,
    GpuDevice,
    ManifestError,
    generate_secrets,
    tosca_to_k8s,
)
from .model import CeamlModel, ComponentSpec, ValidationReport, validate
from .parser import NodeEntity, NodeList, ParseError, node_list, parse_file, parse_text, serialize_model
from .plans import (
    DeploymentPlan,
    PlanError,
    ScaleOutPlan,
    TerminationPlan,
    plan_deployment,
    plan_scale_out,
    plan_termination,
)
from .submodels import (
    ActionModel,
    MatchmakingModel,
    OrchestrationSubmodels,
    SubmodelError,
    WorkflowModel,
    action_model,
    matchmaking_model,
    read_submodel,
    serialize_submodel,
    workflow_model,
)

__version__ = "0.1.0"
