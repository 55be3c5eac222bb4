/**
 * Deployment detail: lifecycle timeline straight from the recorded
 * history, plus the decision-inspection section rendering the exact
 * matchmaking inputs persisted with the MATCHED (or FAILED) entry:
 * monitoring snapshot, broker ranking, SLA view, replica locations and
 * the per-site rejection trail.
 */

import { esc, fig, vec } from "../format.js";
import type { DecisionInputs, Deployment, HistoryEntry, Replica, SiteState } from "../types.js";
import { stateBadge } from "./board.js";

function scalarDetail(detail: Record<string, unknown>): string {
  const parts: string[] = [];
  for (const key of Object.keys(detail)) {
    const value = detail[key];
    if (value === null || ["string", "number", "boolean"].includes(typeof value)) {
      parts.push(`${esc(key)}=${fig(value)}`);
    }
  }
  return parts.join(" ");
}

export function renderTimeline(history: HistoryEntry[]): string {
  const rows = history
    .map(
      (h) => `<tr><td class="num">${fig(h.at)}</td><td>${stateBadge(h.state)}</td>
<td class="detail">${scalarDetail(h.detail)}</td></tr>`,
    )
    .join("\n");
  return `<table class="grid"><thead><tr><th>at</th><th>state</th><th>detail</th></tr></thead>
<tbody>${rows}</tbody></table>`;
}

/** Latest persisted matchmaking inputs, if the deployment got that far. */
export function latestDecision(dep: Deployment): DecisionInputs | null {
  for (let i = dep.history.length - 1; i >= 0; i--) {
    const inputs = dep.history[i].detail["inputs"];
    if (inputs !== undefined) return inputs as DecisionInputs;
  }
  return null;
}

function snapshotTable(snapshot: SiteState[]): string {
  const rows = snapshot
    .map((s) => {
      const sample = s.last_sample;
      return `<tr><td>${fig(s.descriptor.site_id)}</td><td>${fig(s.health)}</td>
<td>${sample ? vec(sample.free) : "—"}</td>
<td class="num">${sample ? fig(sample.error_rate) : "—"}</td>
<td class="num">${sample ? fig(sample.latency_ms) : "—"}</td>
<td class="num">${fig(s.descriptor.base_cost)}</td>
<td>${s.descriptor.capabilities.map((c) => fig(c)).join(" ")}</td></tr>`;
    })
    .join("\n");
  return `<table class="grid">
<thead><tr><th>site</th><th>health</th><th>free</th><th>err</th><th>lat ms</th><th>cost</th><th>caps</th></tr></thead>
<tbody>${rows}</tbody></table>`;
}

function rankingTable(inputs: DecisionInputs): string {
  const ordered = inputs.ranking.ordered
    .map(
      ([site, score], i) =>
        `<tr><td class="num">${i + 1}</td><td>${fig(site)}</td><td class="num">${fig(score)}</td></tr>`,
    )
    .join("\n");
  const rejected = inputs.ranking.rejected
    .map(
      ([site, pred]) =>
        `<tr><td>${fig(site)}</td><td>${fig(pred.attribute)} ${fig(pred.comparator)} ${fig(pred.value)}</td></tr>`,
    )
    .join("\n");
  const rejectedBlock = inputs.ranking.rejected.length
    ? `<h4>filtered out by rules</h4><table class="grid"><tbody>${rejected}</tbody></table>`
    : "";
  return `<table class="grid"><thead><tr><th>#</th><th>site</th><th>score</th></tr></thead>
<tbody>${ordered}</tbody></table>${rejectedBlock}`;
}

function replicaRows(datasetId: string, replicas: Replica[]): string {
  return replicas
    .map(
      (r) => `<tr><td>${fig(datasetId)}</td><td>${fig(r.site_id)}</td>
<td class="num">${fig(r.completeness)}</td><td>${fig(r.complete)}</td></tr>`,
    )
    .join("\n");
}

function rejectionsTable(rejections: [string, string][]): string {
  if (rejections.length === 0) return `<p class="empty">No site was rejected.</p>`;
  const rows = rejections
    .map(([site, reason]) => `<tr><td>${fig(site)}</td><td>${fig(reason)}</td></tr>`)
    .join("\n");
  return `<table class="grid"><thead><tr><th>site</th><th>rejected because</th></tr></thead>
<tbody>${rows}</tbody></table>`;
}

export function renderDecision(inputs: DecisionInputs): string {
  const slaClasses = Object.entries(inputs.sla.site_classes)
    .map(([site, cls]) => `<tr><td>${fig(site)}</td><td>${fig(cls)}</td></tr>`)
    .join("\n");
  const replicaBlock = Object.keys(inputs.replicas).length
    ? `<h4>replica locations</h4><table class="grid">
<thead><tr><th>dataset</th><th>site</th><th>completeness</th><th>complete</th></tr></thead>
<tbody>${Object.entries(inputs.replicas)
        .map(([ds, reps]) => replicaRows(ds, reps))
        .join("\n")}</tbody></table>`
    : "";
  const slaCheck = inputs.sla_check
    ? `<h4>accepted SLA check</h4>
<p>grant ${fig(inputs.sla_check.record.sla_id)} class ${fig(inputs.sla_check.record.sla_class)}
caps cores ${fig(inputs.sla_check.record.max_cores)} storage ${fig(inputs.sla_check.record.max_storage)};
asked cores ${fig(inputs.sla_check.cores)} storage ${fig(inputs.sla_check.storage_gib)} GiB</p>`
    : "";
  const fitFree = inputs.fit_free
    ? `<h4>class-aware free at chosen site</h4><p>${vec(inputs.fit_free)}</p>`
    : "";
  return `<div class="decision">
<h4>total ask</h4><p>${vec(inputs.total_ask)}
${inputs.required_capabilities.length ? " needs " + inputs.required_capabilities.map((c) => fig(c)).join(" ") : ""}</p>
<h4>monitoring snapshot</h4>${snapshotTable(inputs.snapshot)}
<h4>broker ranking</h4>${rankingTable(inputs)}
<h4>SLA classes by site</h4><table class="grid"><tbody>${slaClasses}</tbody></table>
${replicaBlock}
<h4>eligibility trail</h4>${rejectionsTable(inputs.rejections)}
${fitFree}
${slaCheck}
</div>`;
}

export function renderDetail(dep: Deployment): string {
  const placement = dep.placement
    ? `<p>site ${fig(dep.placement.site_id)} · class ${fig(dep.placement.sla_class)}
· data plan ${fig(dep.placement.data_plan)}</p>
<table class="grid"><thead><tr><th>node</th><th>ask</th></tr></thead>
<tbody>${dep.placement.asks
        .map(([name, v]) => `<tr><td>${fig(name)}</td><td>${vec(v)}</td></tr>`)
        .join("\n")}</tbody></table>
${dep.placement.transfers.length ? `<p>migrations: ${dep.placement.transfers.map((t) => fig(t)).join(" ")}</p>` : ""}`
    : `<p class="empty">Not placed yet.</p>`;

  const endpoints = dep.endpoints.length
    ? `<table class="grid"><thead><tr><th>name</th><th>address</th><th>credential</th></tr></thead>
<tbody>${dep.endpoints
        .map(
          (e) =>
            `<tr><td>${fig(e.name)}</td><td class="mono">${fig(e.address)}</td>
<td class="mono">${e.credential === undefined ? "—" : fig(e.credential)}</td></tr>`,
        )
        .join("\n")}</tbody></table>`
    : `<p class="empty">No endpoints published.</p>`;

  const validation = dep.validation
    ? `<p>deployable ${fig(dep.validation.deployable)}</p>
${dep.validation.errors.map((e) => `<p class="bad">${fig(e)}</p>`).join("\n")}
${dep.validation.warnings.map((w) => `<p class="warn">${fig(w)}</p>`).join("\n")}`
    : "";

  const decision = latestDecision(dep);
  const decisionBlock = decision
    ? `<section class="panel"><h2>Why this placement</h2>${renderDecision(decision)}</section>`
    : "";

  return `<section class="panel">
<h2>${fig(dep.deployment_id)} ${stateBadge(dep.state)}</h2>
<p>owner ${fig(dep.owner)} · scenario ${fig(dep.scenario)} · age ${fig(dep.age)}
· retries ${fig(dep.retry_attempts)} · rematches ${fig(dep.rematches)}
· reprovisions ${fig(dep.reprovisions)}</p>
${dep.failure === null ? "" : `<p class="bad">failure: ${fig(dep.failure)}</p>`}
<div class="row-actions">
<button class="danger" data-action="delete-deployment" data-id="${esc(dep.deployment_id)}">delete</button>
</div>
<h3>Validation</h3>${validation}
<h3>Placement</h3>${placement}
<h3>Endpoints</h3>${endpoints}
<h3>Timeline</h3>${renderTimeline(dep.history)}
</section>
${decisionBlock}`;
}
