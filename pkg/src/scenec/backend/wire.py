"""JSON wire contract shared by the remote client and the planner service."""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field

API_PREFIX = "/v1"
TOKEN_ENV = "SCENEC_BACKEND_TOKEN"
IDEMPOTENCY_HEADER = "Idempotency-Key"


class _Envelope(BaseModel):
    model_config = ConfigDict(extra="forbid")

    request_id: str = Field(min_length=1)
    attempt: int = Field(ge=1)


class ProposeBody(_Envelope):
    request: dict
    strategy: str


class RepairBody(_Envelope):
    program: dict
    error: dict


class ReviseBody(_Envelope):
    plan: dict
    reasons: list[str]


class CritiqueBody(_Envelope):
    plan: dict
    object_aabb: dict
    part_aabbs: dict


class PlanReply(BaseModel):
    plan: dict


class ProgramReply(BaseModel):
    program: dict


class VerdictReply(BaseModel):
    passed: bool
    reasons: list[str] = []


class CapabilitiesReply(BaseModel):
    can_propose: bool
    can_repair: bool
    can_revise: bool
    can_critique: bool
    deterministic: bool


class ErrorReply(BaseModel):
    error: str
    detail: str = ""
