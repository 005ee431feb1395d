"""Planner backend reached over HTTP."""

from __future__ import annotations

import logging
import os
import time
from collections import Counter

import httpx
from pydantic import ValidationError

from scenec.backend.base import Capabilities, PlannerBackend
from scenec.backend.wire import (
    API_PREFIX,
    IDEMPOTENCY_HEADER,
    TOKEN_ENV,
    CapabilitiesReply,
    ErrorReply,
    PlanReply,
    ProgramReply,
    VerdictReply,
)
from scenec.errors import BackendError, BackendTimeout, SchemaViolation, ScenecError, TransportError, Unsupported
from scenec.plan import ObjectPlan
from scenec.program import PartProgram, Verdict

log = logging.getLogger(__name__)

RETRY_STATUS = frozenset({429, 502, 503, 504})


class RemoteBackend(PlannerBackend):
    """Every call is one budgeted attempt. Transient failures are retried under the
    same idempotency key, so the server can answer a retry from its cache."""

    name = "remote"

    def __init__(
        self,
        endpoint: str,
        timeout: float = 30.0,
        retries: int = 2,
        backoff: float = 0.2,
        client: httpx.Client | None = None,
        capabilities: Capabilities | None = None,
        request_id: str = "anonymous",
    ):
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff
        self._client = client
        self._caps = capabilities
        self.request_id = request_id
        self._attempts: Counter = Counter()
        self._token = os.environ.get(TOKEN_ENV)

    def __repr__(self):
        return f"RemoteBackend(endpoint={self.endpoint!r}, request_id={self.request_id!r})"

    def bind(self, request_id: str) -> "RemoteBackend":
        """A view of this backend whose idempotency keys belong to ``request_id``."""
        other = RemoteBackend(
            self.endpoint, self.timeout, self.retries, self.backoff, self._client, self._caps, request_id
        )
        other._token = self._token
        return other

    @property
    def client(self) -> httpx.Client:
        if self._client is None:
            self._client = httpx.Client(timeout=self.timeout)
        return self._client

    @property
    def capabilities(self) -> Capabilities:
        if self._caps is None:
            try:
                data = self._send("GET", "capabilities", None, None)
                self._caps = Capabilities(**CapabilitiesReply.model_validate(data).model_dump())
            except (BackendError, ValidationError) as exc:
                log.warning("capability query failed (%s); assuming propose/repair/revise only", type(exc).__name__)
                self._caps = Capabilities()
        return self._caps

    def _headers(self, key: str | None) -> dict:
        headers = {"Accept": "application/json"}
        if key:
            headers[IDEMPOTENCY_HEADER] = key
        if self._token:
            headers["Authorization"] = f"Bearer {self._token}"
        return headers

    def _send(self, method: str, op: str, body: dict | None, key: str | None) -> dict:
        url = f"{self.endpoint}{API_PREFIX}/{op}"
        last: BackendError | None = None
        for retry in range(self.retries + 1):
            if retry:
                time.sleep(self.backoff * 2 ** (retry - 1))
            try:
                resp = self.client.request(method, url, json=body, headers=self._headers(key))
            except httpx.TimeoutException:
                last = BackendTimeout(f"{op}: no reply within {self.timeout} s")
                continue
            except httpx.HTTPError as exc:
                last = TransportError(f"{op}: {type(exc).__name__}")
                continue
            if resp.status_code in RETRY_STATUS or (resp.status_code >= 500 and resp.status_code != 501):
                last = TransportError(f"{op}: server answered {resp.status_code}")
                continue
            return self._decode(op, resp)
        raise last

    def _decode(self, op: str, resp: httpx.Response) -> dict:
        try:
            data = resp.json()
        except ValueError:
            raise SchemaViolation(f"{op}: reply is not JSON") from None
        if resp.status_code in (401, 403):
            raise TransportError(f"{op}: credentials rejected ({resp.status_code})")
        if resp.status_code == 501:
            raise Unsupported(f"{op}: {ErrorReply.model_validate(data).detail if isinstance(data, dict) else ''}")
        if resp.status_code >= 400:
            try:
                err = ErrorReply.model_validate(data)
                raise BackendError(f"{op}: {err.error}: {err.detail}")
            except ValidationError:
                raise BackendError(f"{op}: server answered {resp.status_code}") from None
        if not isinstance(data, dict):
            raise SchemaViolation(f"{op}: reply must be a JSON object")
        return data

    def _call(self, op: str, payload: dict) -> dict:
        self._attempts[op] += 1
        attempt = self._attempts[op]
        key = f"{self.request_id}:{op}:{attempt}"
        body = {"request_id": self.request_id, "attempt": attempt, **payload}
        return self._send("POST", op, body, key)

    @staticmethod
    def _parse(op: str, model, data: dict, build):
        try:
            return build(model.model_validate(data))
        except ValidationError as exc:
            raise SchemaViolation(f"{op}: {exc.error_count()} schema errors in reply") from None
        except (ScenecError, KeyError, TypeError, ValueError) as exc:
            raise SchemaViolation(f"{op}: invalid payload: {exc}") from None

    def propose_plan(self, req, strategy):
        data = self._call("propose_plan", {"request": req.to_dict(), "strategy": strategy.value})
        return self._parse("propose_plan", PlanReply, data, lambda r: ObjectPlan.from_dict(r.plan))

    def repair_program(self, program, error):
        data = self._call("repair_program", {"program": program.to_dict(), "error": error.to_dict()})
        return self._parse("repair_program", ProgramReply, data, lambda r: PartProgram.from_dict(r.program))

    def revise_plan(self, plan, reasons):
        data = self._call("revise_plan", {"plan": plan.to_dict(), "reasons": list(reasons)})
        return self._parse("revise_plan", PlanReply, data, lambda r: ObjectPlan.from_dict(r.plan))

    def critique(self, asset):
        payload = {
            "plan": asset.plan.to_dict(),
            "object_aabb": asset.object_aabb.to_dict(),
            "part_aabbs": {m.part_name: m.aabb().to_dict() for m in asset.parts},
        }
        data = self._call("critique", payload)
        return self._parse("critique", VerdictReply, data, lambda r: Verdict(r.passed, tuple(r.reasons)))
