"""Command-line client for the gateway.

Thin wrappers over the HTTP routes: every command prints either a short
human-readable table or, with --json, the raw response body. Exit codes:
0 success, 2 usage or rejected input, 3 authentication, 4 not found,
5 server error.
"""

from __future__ import annotations

import json
import os
import sys

import click
import httpx

EXIT_USAGE = 2
EXIT_AUTH = 3
EXIT_MISSING = 4
EXIT_SERVER = 5


def default_client_factory(url: str) -> httpx.Client:
    return httpx.Client(base_url=url, timeout=60.0)


# Tests swap this for an in-process ASGI client.
client_factory = default_client_factory


def exit_code_for(status: int) -> int:
    if status in (401, 403):
        return EXIT_AUTH
    if status == 404:
        return EXIT_MISSING
    if status >= 500:
        return EXIT_SERVER
    return EXIT_USAGE


class Session:
    def __init__(self, url: str, token: str | None, as_json: bool):
        self.client = client_factory(url)
        self.token = token
        self.as_json = as_json

    def call(self, method: str, path: str, body: dict | None = None,
             params: dict | None = None) -> dict:
        headers = {}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        response = self.client.request(
            method, path, json=body, params=params, headers=headers
        )
        payload = response.json()
        if response.status_code >= 400:
            error = payload.get("error", {})
            click.echo(
                f"{error.get('code', 'ERROR')}: {error.get('message', '')}", err=True
            )
            sys.exit(exit_code_for(response.status_code))
        return payload

    def emit(self, payload: dict, human) -> None:
        if self.as_json:
            click.echo(json.dumps(payload, indent=2, sort_keys=True))
        else:
            human(payload)


pass_session = click.make_pass_decorator(Session)


@click.group()
@click.option("--url", default=lambda: os.environ.get("MINIORC_URL", "http://127.0.0.1:8040"),
              help="Gateway base URL.")
@click.option("--token", default=lambda: os.environ.get("MINIORC_TOKEN"),
              help="Bearer token; defaults to $MINIORC_TOKEN.")
@click.option("--json", "as_json", is_flag=True, help="Print raw response bodies.")
@click.pass_context
def main(ctx, url: str, token: str | None, as_json: bool):
    """Client for the orchestration gateway."""
    ctx.obj = Session(url, token, as_json)


@main.command()
@click.option("--issuer", required=True)
@click.option("--subject", required=True)
@click.option("--audience", default="portal", show_default=True)
@pass_session
def login(session: Session, issuer: str, subject: str, audience: str):
    """Exchange an external identity for a bearer token."""
    out = session.call("POST", "/iam/login",
                       {"issuer": issuer, "subject": subject, "audience": audience})
    session.emit(out, lambda p: click.echo(p["token"]))


@main.command()
@click.argument("template_file", type=click.Path(exists=True, dir_okay=False))
@pass_session
def submit(session: Session, template_file: str):
    """Submit a deployment template file."""
    with open(template_file, "r", encoding="utf-8") as fh:
        text = fh.read()
    out = session.call("POST", "/deployments", {"template": text})
    session.emit(out, lambda p: click.echo(p["deployment_id"]))


@main.command()
@click.argument("deployment_id")
@pass_session
def status(session: Session, deployment_id: str):
    """Show one deployment's state."""
    out = session.call("GET", f"/deployments/{deployment_id}")

    def human(p):
        click.echo(f"{p['deployment_id']}  {p['state']}"
                   + (f"  ({p['failure']})" if p.get("failure") else ""))
        placement = p.get("placement")
        if placement:
            click.echo(f"  site: {placement['site_id']}  plan: {placement['data_plan']}")
        for endpoint in p.get("endpoints", []):
            click.echo(f"  endpoint: {endpoint['name']} {endpoint['address']}")

    session.emit(out, human)


@main.command()
@click.argument("deployment_id")
@pass_session
def delete(session: Session, deployment_id: str):
    """Tear a deployment down."""
    out = session.call("DELETE", f"/deployments/{deployment_id}")
    session.emit(out, lambda p: click.echo(f"{p['deployment_id']}  {p['state']}"))


@main.command()
@pass_session
def sites(session: Session):
    """List registered sites with health and free capacity."""
    out = session.call("GET", "/sites")

    def human(p):
        for site in p["sites"]:
            desc = site["descriptor"]
            sample = site.get("last_sample") or {}
            free = sample.get("free", {})
            click.echo(f"{desc['site_id']:12s} {site['health']:10s} "
                       f"free cpu={free.get('cpu', '?')} mem={free.get('mem', '?')}")

    session.emit(out, human)


@main.command()
@click.option("--user", default=None, help="Rank as another account (admin only).")
@click.option("--data-sites", default=None, help="Comma-separated replica holders.")
@pass_session
def rank(session: Session, user: str | None, data_sites: str | None):
    """Print the broker's current site ordering."""
    params = {}
    if user:
        params["user"] = user
    if data_sites:
        params["data_sites"] = data_sites
    out = session.call("GET", "/rank", params=params)

    def human(p):
        for site_id, score in p["ordered"]:
            click.echo(f"{site_id:12s} {score}")
        for site_id, _pred in p["rejected"]:
            click.echo(f"{site_id:12s} rejected")

    session.emit(out, human)


@main.command()
@click.argument("dataset")
@click.argument("dst")
@click.option("--src", default=None, help="Source site; defaults to any complete replica.")
@pass_session
def transfer(session: Session, dataset: str, dst: str, src: str | None):
    """Copy a dataset replica to a destination site."""
    if src is None:
        listing = session.call("GET", "/namespace/datasets")["datasets"]
        for ds in listing:
            if ds["dataset_id"] != dataset:
                continue
            complete = [r["site_id"] for r in ds.get("replicas", []) if r.get("complete")]
            if complete:
                src = sorted(complete)[0]
        if src is None:
            click.echo(f"SOURCE_INCOMPLETE: no complete replica of {dataset}", err=True)
            sys.exit(EXIT_USAGE)
    out = session.call("POST", "/transfers",
                       {"dataset": dataset, "src": src, "dst": dst})
    session.emit(out, lambda p: click.echo(f"{p['job_id']}  {p['state']}"))


@main.command()
@click.argument("deployment_id")
@click.argument("replicas", type=int)
@click.option("--node", default=None, help="Service node name; inferred when unique.")
@pass_session
def scale(session: Session, deployment_id: str, replicas: int, node: str | None):
    """Change a long-running service's replica target."""
    if node is None:
        dep = session.call("GET", f"/deployments/{deployment_id}")
        services = sorted(dep.get("services", {}))
        if len(services) != 1:
            click.echo("SCENARIO_MISMATCH: --node required unless the deployment "
                       "has exactly one service", err=True)
            sys.exit(EXIT_USAGE)
        node = services[0]
    out = session.call("POST", f"/deployments/{deployment_id}/scale",
                       {"node": node, "replicas": replicas})
    session.emit(out, lambda p: click.echo(f"{p['deployment_id']}  {p['state']}"))


@main.command()
@click.argument("dt", type=float)
@pass_session
def advance(session: Session, dt: float):
    """Move the manual clock forward by DT seconds."""
    out = session.call("POST", "/clock/advance", {"dt": dt})
    session.emit(out, lambda p: click.echo(f"now={p['now']}"))


@main.command()
@click.option("--config", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8040, show_default=True, type=int)
def serve(config: str | None, host: str, port: int):
    """Run the gateway service in the foreground."""
    from miniorc.gateway import serve as run_server

    run_server(config, host=host, port=port)


if __name__ == "__main__":
    main()
