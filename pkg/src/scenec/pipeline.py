"""Single-object pipeline: route, propose, verify, build."""

from __future__ import annotations

import logging
from dataclasses import dataclass

from scenec.core import AssetRequest
from scenec.errors import BackendError, BuildFailure, PlanRejected
from scenec.plan import ObjectPlan
from scenec.program import LoopBudgets, ObjectAsset, build_with_repair
from scenec.router import CategoryOntology, Strategy, route
from scenec.verifier import VerificationReport, verify

log = logging.getLogger(__name__)


@dataclass
class BuildResult:
    request: AssetRequest
    route: Strategy
    report: VerificationReport
    asset: ObjectAsset

    @property
    def plan(self) -> ObjectPlan:
        return self.asset.plan


def canonical(plan: ObjectPlan) -> ObjectPlan:
    """The plan exactly as it reads back from its own JSON; building from this
    form makes a rebuild from ``plan.json`` bit-identical to the first build."""
    return ObjectPlan.from_json(plan.to_json())


def verified(plan: ObjectPlan, ont: CategoryOntology) -> tuple[VerificationReport, ObjectPlan]:
    report = verify(canonical(plan), ont)
    if report.verified_plan is None:
        raise PlanRejected(report)
    return report, canonical(report.verified_plan)


def _bound(backend, req: AssetRequest):
    """Backends that key their calls by request get a view bound to this one."""
    if hasattr(backend, "bind") and getattr(backend, "request_id", None) != req.id:
        return backend.bind(req.id)
    return backend


def build_plan(
    plan: ObjectPlan,
    req: AssetRequest,
    strategy: Strategy,
    backend,
    ont: CategoryOntology,
    budgets: LoopBudgets = LoopBudgets(),
) -> BuildResult:
    backend = _bound(backend, req)
    report, plan = verified(plan, ont)
    asset = build_with_repair(plan, backend, budgets, req.id, reverify=lambda p: verified(p, ont)[1])
    return BuildResult(req, strategy, report, asset)


def build_request(
    req: AssetRequest,
    backend,
    ont: CategoryOntology,
    budgets: LoopBudgets = LoopBudgets(),
    allow_default: bool = False,
) -> BuildResult:
    strategy = route(req, ont, allow_default=allow_default)
    backend = _bound(backend, req)
    try:
        plan = backend.propose_plan(req, strategy)
    except BackendError as exc:
        raise BuildFailure("propose", 1, str(exc)) from exc
    return build_plan(plan, req, strategy, backend, ont, budgets)


def request_for_plan(plan: ObjectPlan, obj_id: str, description: str = "") -> AssetRequest:
    """A ground-supported request matching a bare plan file."""
    return AssetRequest(obj_id, plan.category, description, plan.target_dims, plan.style)
