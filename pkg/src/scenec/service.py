"""HTTP planner service speaking the remote backend's wire contract.

It fronts any in-process backend (the template library by default), which makes
it both a deployable planner and a loopback stub for exercising the remote client.
"""

from __future__ import annotations

import hmac
import os
from collections import OrderedDict
from threading import Lock

from fastapi import FastAPI, Header, Request
from fastapi.responses import JSONResponse

from scenec.backend.template import TemplateBackend
from scenec.backend.wire import (
    API_PREFIX,
    TOKEN_ENV,
    CapabilitiesReply,
    CritiqueBody,
    ErrorReply,
    PlanReply,
    ProgramReply,
    ProposeBody,
    RepairBody,
    ReviseBody,
    VerdictReply,
)
from scenec.core import Aabb, AssetRequest
from scenec.errors import ExecError, ScenecError, Unsupported
from scenec.plan import ObjectPlan
from scenec.program import PartProgram
from scenec.router import Strategy


class _ReplyCache:
    """Replies by idempotency key, so a retried attempt gets the original answer."""

    def __init__(self, size: int):
        self.size = size
        self._data: OrderedDict = OrderedDict()
        self._lock = Lock()

    def get(self, key):
        with self._lock:
            if key in self._data:
                self._data.move_to_end(key)
                return self._data[key]
        return None

    def put(self, key, value):
        with self._lock:
            self._data[key] = value
            while len(self._data) > self.size:
                self._data.popitem(last=False)


def create_app(backend=None, token: str | None = None, cache_size: int = 1024) -> FastAPI:
    backend = backend or TemplateBackend()
    token = token if token is not None else os.environ.get(TOKEN_ENV)
    cache = _ReplyCache(cache_size)
    app = FastAPI(title="scenec planner")
    app.state.backend = backend
    app.state.calls = []

    def authorized(header: str | None) -> bool:
        if not token:
            return True
        return header is not None and hmac.compare_digest(header, f"Bearer {token}")

    def run(op: str, key: str | None, auth: str | None, fn):
        if not authorized(auth):
            return JSONResponse(ErrorReply(error="Unauthorized").model_dump(), status_code=401)
        if key:
            hit = cache.get(key)
            if hit is not None:
                return JSONResponse(hit[1], status_code=hit[0])
        app.state.calls.append((op, key))
        try:
            reply = (200, fn().model_dump())
        except Unsupported as exc:
            reply = (501, ErrorReply(error="Unsupported", detail=str(exc)).model_dump())
        except ScenecError as exc:
            reply = (422, ErrorReply(error=type(exc).__name__, detail=str(exc)).model_dump())
        if key:
            cache.put(key, reply)
        return JSONResponse(reply[1], status_code=reply[0])

    @app.get(f"{API_PREFIX}/capabilities")
    def capabilities(authorization: str | None = Header(default=None)):
        return run("capabilities", None, authorization, lambda: CapabilitiesReply(**backend.capabilities.to_dict()))

    @app.post(f"{API_PREFIX}/propose_plan")
    def propose(body: ProposeBody, idempotency_key: str | None = Header(default=None), authorization: str | None = Header(default=None)):
        def go():
            plan = backend.propose_plan(AssetRequest.from_dict(body.request), Strategy(body.strategy))
            return PlanReply(plan=plan.to_dict())

        return run("propose_plan", idempotency_key, authorization, go)

    @app.post(f"{API_PREFIX}/repair_program")
    def repair(body: RepairBody, idempotency_key: str | None = Header(default=None), authorization: str | None = Header(default=None)):
        def go():
            prog = backend.repair_program(PartProgram.from_dict(body.program), ExecError.from_dict(body.error))
            return ProgramReply(program=prog.to_dict())

        return run("repair_program", idempotency_key, authorization, go)

    @app.post(f"{API_PREFIX}/revise_plan")
    def revise(body: ReviseBody, idempotency_key: str | None = Header(default=None), authorization: str | None = Header(default=None)):
        def go():
            plan = backend.revise_plan(ObjectPlan.from_dict(body.plan), list(body.reasons))
            return PlanReply(plan=plan.to_dict())

        return run("revise_plan", idempotency_key, authorization, go)

    @app.post(f"{API_PREFIX}/critique")
    def critique(body: CritiqueBody, idempotency_key: str | None = Header(default=None), authorization: str | None = Header(default=None)):
        def go():
            judge = getattr(backend, "critique_summary", None)
            if judge is None or not backend.capabilities.can_critique:
                raise Unsupported("this planner does not critique")
            verdict = judge(ObjectPlan.from_dict(body.plan), Aabb.from_dict(body.object_aabb), body.part_aabbs)
            return VerdictReply(passed=verdict.passed, reasons=list(verdict.reasons))

        return run("critique", idempotency_key, authorization, go)

    @app.exception_handler(ValueError)
    async def bad_value(request: Request, exc: ValueError):
        return JSONResponse(ErrorReply(error="InvalidValue", detail=str(exc)).model_dump(), status_code=422)

    return app


def main(argv=None) -> int:
    import argparse

    import uvicorn

    parser = argparse.ArgumentParser(prog="scenec-planner", description="Serve the template planner over HTTP.")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8765)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    uvicorn.run(create_app(TemplateBackend(args.seed)), host=args.host, port=args.port)
    return 0
