"""REST surface over the platform: one route family per module.

Every route except /iam/login and the health probes requires a bearer
token. Mutations run through the platform command journal and echo the
journaled request id in the X-Request-Id header; module errors map to a
single (HTTP status, code) pair each, returned as an ApiError body.
"""

from __future__ import annotations

import itertools
from typing import Any

from fastapi import Depends, FastAPI, Header, Query, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from miniorc.core import Platform
from miniorc.errors import MiniorcError
from miniorc.iam import Introspection

STATUS_BY_CODE = {
    "AUTH_INVALID": 401,
    "UNKNOWN_AUDIENCE": 401,
    "UNKNOWN_IDENTITY": 401,
    "FORBIDDEN": 403,
    "ACCOUNT_DISABLED": 403,
    "ALREADY_LINKED": 409,
    "ILLEGAL_TRANSITION": 409,
    "SCENARIO_MISMATCH": 409,
    "STALE_SAMPLE": 409,
    "NODE_BUSY": 409,
    "SLA_VIOLATION": 409,
    "NO_ELIGIBLE_SITE": 409,
    "CAPACITY_EXHAUSTED": 409,
    "SOURCE_INCOMPLETE": 409,
    "PROVISIONING_FAILED": 409,
    "ADVANCE_IN_REALTIME": 409,
    "PARSE_ERROR": 422,
    "RULE_ERROR": 422,
    "CYCLE": 422,
    "CYCLIC_DEPENDENCY": 422,
    "EMPTY_TEMPLATE": 422,
    "TEMPLATE_TOO_LARGE": 422,
    "EMPTY_DATASET": 422,
    "INVALID_DESCRIPTOR": 422,
    "INVALID_SAMPLE": 422,
    "INVALID_CAPS": 422,
    "UNSUPPORTED_CLASS": 422,
    "UNKNOWN_TARGET_SERVICE": 422,
    "CONFIG_ERROR": 500,
    "JOURNAL_CORRUPT": 500,
    "INTERNAL": 500,
}


def status_for(code: str) -> int:
    if code in STATUS_BY_CODE:
        return STATUS_BY_CODE[code]
    if code.startswith("UNKNOWN_"):
        return 404
    if code.startswith("DUPLICATE_"):
        return 409
    if code.startswith("BAD_"):
        return 422
    return 400


def api_error(code: str, message: str, request_id: str, detail: Any = None) -> JSONResponse:
    body = {
        "error": {
            "code": code,
            "message": message,
            "detail": detail,
            "request_id": request_id,
        }
    }
    return JSONResponse(status_code=status_for(code), content=body)


class LoginBody(BaseModel):
    issuer: str
    subject: str
    audience: str


class LinkBody(BaseModel):
    issuer: str
    subject: str
    groups: list[str] = []
    account_id: str | None = None


class ClientBody(BaseModel):
    audience: str


class TranslateBody(BaseModel):
    target: str


class RevokeBody(BaseModel):
    token_id: str


class DeploymentBody(BaseModel):
    template: str


class ScaleBody(BaseModel):
    node: str
    replicas: int


class SiteBody(BaseModel):
    site_id: str
    capacity: dict
    storage_capacity: float = 0.0
    capabilities: list[str] = []
    base_cost: float = 1.0
    on_demand_quota: dict | None = None
    backend: dict | None = None
    slas: list[dict] = []


class MetricsBody(BaseModel):
    site_id: str
    timestamp: float
    free: dict
    error_rate: float = 0.0
    latency_ms: float = 0.0


class SlaBody(BaseModel):
    site: str
    sla_class: str = "Silver"
    max_cores: float = 10_000
    max_storage: float = 10_000


class RulesBody(BaseModel):
    owner: str
    text: str


class SpaceBody(BaseModel):
    name: str


class DatasetBody(BaseModel):
    space: str
    files: list[dict]


class ReplicaBody(BaseModel):
    dataset: str
    site: str
    completeness: float | str | int = 1


class TransferBody(BaseModel):
    dataset: str
    src: str
    dst: str


class AdvanceBody(BaseModel):
    dt: float


def create_app(platform: Platform) -> FastAPI:
    app = FastAPI(title="miniorc", docs_url=None, redoc_url=None)
    read_ids = itertools.count(1)

    def read_request_id() -> str:
        return f"ro-{next(read_ids):06d}"

    def bearer(authorization: str | None = Header(default=None)) -> str:
        if not authorization or not authorization.startswith("Bearer "):
            raise MiniorcError("missing bearer token", code="AUTH_INVALID")
        return authorization.removeprefix("Bearer ")

    def caller(token: str = Depends(bearer)) -> Introspection:
        with platform._lock:
            return platform.iam.require(token, now=platform.clock.now())

    def admin(claims: Introspection = Depends(caller)) -> Introspection:
        if platform.iam._admin_group not in claims.groups:
            raise MiniorcError("administrator group required", code="FORBIDDEN")
        return claims

    @app.exception_handler(MiniorcError)
    async def on_module_error(request: Request, exc: MiniorcError):
        return api_error(exc.code, exc.message, read_request_id(), detail=exc.detail)

    @app.exception_handler(RequestValidationError)
    async def on_validation_error(request: Request, exc: RequestValidationError):
        return api_error("BAD_REQUEST", "request body does not match the schema",
                         read_request_id(), detail=exc.errors())

    @app.exception_handler(Exception)
    async def on_internal_error(request: Request, exc: Exception):
        return api_error("INTERNAL", "unexpected server error", read_request_id())

    def run(response: Response, entity: str, op: str, payload: dict):
        result, record = platform.command_with_record(entity, op, payload)
        response.headers["X-Request-Id"] = record["request"]
        return result

    # -- health ------------------------------------------------------------

    @app.get("/healthz")
    def healthz():
        return {"ok": True}

    @app.get("/readyz")
    def readyz():
        return {"ok": True, "sequence": platform.journal.sequence}

    @app.get("/clock")
    def clock_info(_: Introspection = Depends(caller)):
        return {"mode": platform.clock.mode, "now": platform.clock.now()}

    @app.post("/clock/advance")
    def clock_advance(body: AdvanceBody, response: Response,
                      _: Introspection = Depends(caller)):
        return run(response, "clock", "advance", {"dt": body.dt})

    # -- iam -----------------------------------------------------------------

    @app.post("/iam/login")
    def login(body: LoginBody, response: Response):
        return run(response, "account", "login", body.model_dump())

    @app.post("/iam/link", status_code=201)
    def link(body: LinkBody, response: Response, _: Introspection = Depends(admin)):
        return run(response, "account", "link", body.model_dump())

    @app.post("/iam/clients", status_code=201)
    def register_client(body: ClientBody, response: Response,
                        _: Introspection = Depends(admin)):
        return run(response, "account", "register_client", body.model_dump())

    @app.get("/iam/introspect")
    def introspect(token: str = Query(...), _: Introspection = Depends(caller)):
        with platform._lock:
            result = platform.iam.introspect(token, now=platform.clock.now())
            payload = result.to_payload()
            if result.active:
                # Lets clients gate operator controls without knowing the
                # configured admin group name.
                payload["admin"] = platform.iam._admin_group in result.groups
            return payload

    @app.post("/iam/translate")
    def translate(body: TranslateBody, response: Response,
                  token: str = Depends(bearer)):
        return run(response, "account", "translate",
                   {"token": token, "target": body.target})

    @app.post("/iam/revoke")
    def revoke(body: RevokeBody, response: Response,
               _: Introspection = Depends(admin)):
        return run(response, "account", "revoke", body.model_dump())

    @app.get("/iam/users")
    def list_users(token: str = Depends(bearer), contains: str | None = None,
                   page: int = 1, page_size: int = 50):
        with platform._lock:
            return platform.iam.list_users(
                token, now=platform.clock.now(),
                contains=contains, page=page, page_size=page_size,
            )

    @app.get("/iam/groups")
    def list_groups(token: str = Depends(bearer)):
        with platform._lock:
            return platform.iam.list_groups(token, now=platform.clock.now())

    # -- deployments ---------------------------------------------------------

    @app.post("/deployments", status_code=201)
    def submit(body: DeploymentBody, response: Response,
               token: str = Depends(bearer)):
        return run(response, "deployment", "submit",
                   {"template": body.template, "token": token})

    def with_age(payload: dict) -> dict:
        payload["age"] = platform.clock.now() - payload["created_at"]
        return payload

    @app.get("/deployments")
    def list_deployments(_: Introspection = Depends(caller)):
        return {"deployments": [with_age(d) for d in platform.list_deployments()]}

    @app.get("/deployments/{deployment_id}")
    def get_deployment(deployment_id: str, _: Introspection = Depends(caller)):
        return with_age(platform.deployment_payload(deployment_id))

    @app.delete("/deployments/{deployment_id}")
    def delete_deployment(deployment_id: str, response: Response,
                          _: Introspection = Depends(caller)):
        return run(response, "deployment", "delete", {"deployment": deployment_id})

    @app.post("/deployments/{deployment_id}/scale")
    def scale_deployment(deployment_id: str, body: ScaleBody, response: Response,
                         _: Introspection = Depends(caller)):
        return run(response, "deployment", "scale",
                   {"deployment": deployment_id, "node": body.node,
                    "replicas": body.replicas})

    @app.get("/deployments/{deployment_id}/events")
    def deployment_events(deployment_id: str, after: int = 0,
                          wait: float = Query(default=0.0, ge=0.0),
                          _: Introspection = Depends(caller)):
        platform.deployment_payload(deployment_id)  # 404 for unknown ids
        cap = platform.config.get("gateway.long_poll_max", 30.0)
        events = platform.events_since(after, deployment_id=deployment_id,
                                       wait=min(wait, cap))
        return {"events": events}

    @app.get("/events")
    def global_events(after: int = 0, wait: float = Query(default=0.0, ge=0.0),
                      _: Introspection = Depends(caller)):
        cap = platform.config.get("gateway.long_poll_max", 30.0)
        return {"events": platform.events_since(after, wait=min(wait, cap))}

    # -- sites, ranking, slas ---------------------------------------------------

    @app.get("/sites")
    def sites(_: Introspection = Depends(caller)):
        return {"sites": platform.sites_payload()}

    @app.post("/sites", status_code=201)
    def register_site(body: SiteBody, response: Response,
                      _: Introspection = Depends(admin)):
        payload = body.model_dump()
        if payload.get("on_demand_quota") is None:
            payload.pop("on_demand_quota", None)
        if payload.get("backend") is None:
            payload.pop("backend", None)
        return run(response, "site", "register", payload)

    @app.post("/metrics/ingest")
    def ingest_metrics(body: MetricsBody, response: Response,
                       _: Introspection = Depends(caller)):
        return run(response, "site", "metrics", body.model_dump())

    @app.get("/rank")
    def rank_sites(claims: Introspection = Depends(caller),
                   data_sites: str | None = None, user: str | None = None):
        account, groups = claims.account_id, claims.groups
        if user is not None and user != account:
            # Inspecting someone else's ranking is an operator action.
            if platform.iam._admin_group not in claims.groups:
                raise MiniorcError("ranking for another user needs the admin group",
                                   code="FORBIDDEN")
            account, groups = user, ()
        sites_arg = tuple(s for s in (data_sites or "").split(",") if s)
        return platform.rank_payload(account, groups, sites_arg)

    @app.put("/rules")
    def put_rules(body: RulesBody, response: Response,
                  _: Introspection = Depends(admin)):
        return run(response, "rules", "put", body.model_dump())

    @app.get("/slas")
    def list_slas(claims: Introspection = Depends(caller)):
        return {"slas": platform.slas_payload(claims.account_id)}

    @app.post("/slas", status_code=201)
    def negotiate_sla(body: SlaBody, response: Response,
                      claims: Introspection = Depends(caller)):
        payload = {"account": claims.account_id, **body.model_dump()}
        return run(response, "sla", "negotiate", payload)

    # -- data ----------------------------------------------------------------

    @app.get("/namespace")
    def namespace(_: Introspection = Depends(caller)):
        return {"files": platform.namespace_payload()}

    @app.get("/namespace/datasets")
    def datasets(_: Introspection = Depends(caller)):
        return {"datasets": platform.datasets_payload()}

    @app.post("/namespace/spaces", status_code=201)
    def create_space(body: SpaceBody, response: Response,
                     claims: Introspection = Depends(caller)):
        return run(response, "dataset", "create_space",
                   {"name": body.name, "owner": claims.account_id})

    @app.post("/namespace/datasets", status_code=201)
    def add_dataset(body: DatasetBody, response: Response,
                    claims: Introspection = Depends(caller)):
        payload = {**body.model_dump(), "owner": claims.account_id}
        return run(response, "dataset", "add", payload)

    @app.post("/namespace/replicas", status_code=201)
    def add_replica(body: ReplicaBody, response: Response,
                    _: Introspection = Depends(caller)):
        return run(response, "dataset", "replicate", body.model_dump())

    @app.get("/transfers")
    def transfers(_: Introspection = Depends(caller)):
        return {"transfers": platform.transfers_payload()}

    @app.post("/transfers", status_code=201)
    def schedule_transfer(body: TransferBody, response: Response,
                          _: Introspection = Depends(caller)):
        return run(response, "transfer", "schedule", body.model_dump())

    @app.delete("/transfers/{job_id}")
    def cancel_transfer(job_id: str, response: Response,
                        _: Introspection = Depends(caller)):
        return run(response, "transfer", "cancel", {"job": job_id})

    # -- cluster -----------------------------------------------------------------

    @app.get("/cluster")
    def cluster(_: Introspection = Depends(caller)):
        return platform.cluster_payload()

    return app


def serve(config_path: str | None = None, host: str = "127.0.0.1", port: int = 8040):
    """Build a platform from config and serve it; blocks until stopped."""
    import uvicorn

    from miniorc.config import load_config

    platform = Platform(load_config(config_path))
    app = create_app(platform)
    uvicorn.run(app, host=host, port=port, log_level="warning")
