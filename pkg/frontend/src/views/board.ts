/**
 * Deployments board: one row per deployment with state, placement site,
 * age and failure reason, all verbatim gateway values.
 */

import { esc, fig } from "../format.js";
import type { Deployment } from "../types.js";

const STATE_CLASS: Record<string, string> = {
  RUNNING: "ok",
  SCALING: "ok",
  FAILED: "bad",
  DELETED: "dim",
  DELETING: "dim",
};

export function stateBadge(state: string): string {
  const cls = STATE_CLASS[state] ?? "busy";
  return `<span class="badge ${cls}" data-fig>${esc(state)}</span>`;
}

export function renderBoard(deployments: Deployment[]): string {
  if (deployments.length === 0) {
    return `<section class="panel"><h2>Deployments</h2>
<p class="empty">Nothing deployed yet. Compose a template to get started.</p></section>`;
  }
  const rows = deployments
    .map((d) => {
      const site = d.placement ? fig(d.placement.site_id) : "—";
      return `<tr data-dep="${esc(d.deployment_id)}">
<td><a href="#/deployments/${esc(d.deployment_id)}">${fig(d.deployment_id)}</a></td>
<td>${fig(d.scenario)}</td>
<td>${stateBadge(d.state)}</td>
<td>${site}</td>
<td class="num">${fig(d.age)}</td>
<td>${d.failure === null ? "—" : fig(d.failure)}</td>
<td class="actions"><button class="danger" data-action="delete-deployment" data-id="${esc(d.deployment_id)}">delete</button></td>
</tr>`;
    })
    .join("\n");
  return `<section class="panel"><h2>Deployments</h2>
<table class="grid">
<thead><tr><th>id</th><th>scenario</th><th>state</th><th>site</th><th>age</th><th>failure</th><th></th></tr></thead>
<tbody>${rows}</tbody>
</table></section>`;
}
