/**
 * Thin typed client for the gateway. Every response is either the route's
 * documented shape or an error envelope; envelopes become thrown ApiError
 * instances so views can render code and message uniformly.
 */

import { BASE_URL } from "./config.js";
import type {
  Claims,
  ClockInfo,
  ClusterView,
  DatasetEntry,
  Deployment,
  PlatformEvent,
  RankResult,
  SiteState,
  SlaRecord,
  TransferJob,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
    readonly detail: unknown = null,
    readonly requestId: string = "",
  ) {
    super(message);
    this.name = "ApiError";
  }
}

/** Fetch indirection so tests can splice in recorded responses. */
export const http = {
  fetch: (input: string, init?: RequestInit): Promise<Response> => globalThis.fetch(input, init),
};

export class Api {
  token: string | null = null;

  constructor(readonly base: string = BASE_URL) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = {};
    if (this.token) headers["Authorization"] = `Bearer ${this.token}`;
    if (body !== undefined) headers["Content-Type"] = "application/json";
    let response: Response;
    try {
      response = await http.fetch(this.base + path, {
        method,
        headers,
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch (err) {
      throw new ApiError(0, "UNREACHABLE", `gateway unreachable: ${String(err)}`);
    }
    const text = await response.text();
    let parsed: unknown = null;
    if (text !== "") {
      try {
        parsed = JSON.parse(text);
      } catch {
        throw new ApiError(response.status, "BAD_BODY", "gateway returned non-JSON body");
      }
    }
    if (!response.ok) {
      const envelope = (parsed ?? {}) as { error?: { code?: string; message?: string; detail?: unknown; request_id?: string } };
      const e = envelope.error ?? {};
      throw new ApiError(
        response.status,
        e.code ?? "HTTP_ERROR",
        e.message ?? `request failed with status ${response.status}`,
        e.detail ?? null,
        e.request_id ?? "",
      );
    }
    return parsed as T;
  }

  // -- session ----------------------------------------------------------

  login(issuer: string, subject: string, audience = "portal"): Promise<{ token: string }> {
    return this.request("POST", "/iam/login", { issuer, subject, audience });
  }

  introspect(token: string): Promise<Claims> {
    return this.request("GET", `/iam/introspect?token=${encodeURIComponent(token)}`);
  }

  // -- clock ------------------------------------------------------------

  clock(): Promise<ClockInfo> {
    return this.request("GET", "/clock");
  }

  advance(dt: number): Promise<{ now: number }> {
    return this.request("POST", "/clock/advance", { dt });
  }

  // -- deployments --------------------------------------------------------

  deployments(): Promise<{ deployments: Deployment[] }> {
    return this.request("GET", "/deployments");
  }

  deployment(id: string): Promise<Deployment> {
    return this.request("GET", `/deployments/${encodeURIComponent(id)}`);
  }

  submit(template: string): Promise<{ deployment_id: string; state: string }> {
    return this.request("POST", "/deployments", { template });
  }

  deleteDeployment(id: string): Promise<{ deployment_id: string; state: string }> {
    return this.request("DELETE", `/deployments/${encodeURIComponent(id)}`);
  }

  scale(id: string, node: string, replicas: number): Promise<{ deployment_id: string; state: string }> {
    return this.request("POST", `/deployments/${encodeURIComponent(id)}/scale`, { node, replicas });
  }

  events(after: number, wait: number): Promise<{ events: PlatformEvent[] }> {
    return this.request("GET", `/events?after=${after}&wait=${wait}`);
  }

  deploymentEvents(id: string, after: number, wait: number): Promise<{ events: PlatformEvent[] }> {
    return this.request(
      "GET",
      `/deployments/${encodeURIComponent(id)}/events?after=${after}&wait=${wait}`,
    );
  }

  // -- sites and cluster ----------------------------------------------------

  sites(): Promise<{ sites: SiteState[] }> {
    return this.request("GET", "/sites");
  }

  rank(): Promise<RankResult> {
    return this.request("GET", "/rank");
  }

  slas(): Promise<{ slas: SlaRecord[] }> {
    return this.request("GET", "/slas");
  }

  cluster(): Promise<ClusterView> {
    return this.request("GET", "/cluster");
  }

  // -- data -----------------------------------------------------------------

  datasets(): Promise<{ datasets: DatasetEntry[] }> {
    return this.request("GET", "/namespace/datasets");
  }

  transfers(): Promise<{ transfers: TransferJob[] }> {
    return this.request("GET", "/transfers");
  }

  scheduleTransfer(dataset: string, src: string, dst: string): Promise<TransferJob> {
    return this.request("POST", "/transfers", { dataset, src, dst });
  }

  cancelTransfer(jobId: string): Promise<TransferJob> {
    return this.request("DELETE", `/transfers/${encodeURIComponent(jobId)}`);
  }
}
