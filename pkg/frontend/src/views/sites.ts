/** Sites page: catalog state with health, plus the caller's broker ranking and SLA grants. */

import { fig, vec } from "../format.js";
import type { RankResult, SiteState, SlaRecord } from "../types.js";

export function renderSites(sites: SiteState[], ranking: RankResult, slas: SlaRecord[]): string {
  const siteRows = sites
    .map((s) => {
      const sample = s.last_sample;
      return `<tr><td>${fig(s.descriptor.site_id)}</td>
<td><span class="badge ${s.health === "Healthy" ? "ok" : s.health === "Unknown" ? "dim" : "bad"}" data-fig>${s.health}</span></td>
<td>${vec(s.descriptor.capacity)}</td>
<td>${sample ? vec(sample.free) : "—"}</td>
<td class="num">${fig(s.descriptor.storage_capacity)}</td>
<td class="num">${fig(s.descriptor.base_cost)}</td>
<td>${s.descriptor.capabilities.map((c) => fig(c)).join(" ")}</td>
<td>${s.descriptor.supported_sla_classes.map((c) => fig(c)).join(" ")}</td></tr>`;
    })
    .join("\n");
  const rankRows = ranking.ordered
    .map(
      ([site, score], i) =>
        `<tr><td class="num">${i + 1}</td><td>${fig(site)}</td><td class="num">${fig(score)}</td></tr>`,
    )
    .join("\n");
  const slaRows = slas
    .map(
      (r) => `<tr><td>${fig(r.sla_id)}</td><td>${fig(r.site_id)}</td><td>${fig(r.sla_class)}</td>
<td class="num">${fig(r.max_cores)}</td><td class="num">${fig(r.max_storage)}</td>
<td class="num">${fig(r.valid_until)}</td></tr>`,
    )
    .join("\n");
  return `<section class="panel"><h2>Sites</h2>
<table class="grid">
<thead><tr><th>site</th><th>health</th><th>capacity</th><th>free</th><th>storage</th><th>cost</th><th>caps</th><th>classes</th></tr></thead>
<tbody>${siteRows}</tbody></table>
<h3>Your ranking</h3>
<table class="grid"><thead><tr><th>#</th><th>site</th><th>score</th></tr></thead>
<tbody>${rankRows}</tbody></table>
<h3>Your SLA grants</h3>
${slas.length ? `<table class="grid"><thead><tr><th>grant</th><th>site</th><th>class</th><th>cores</th><th>storage</th><th>until</th></tr></thead><tbody>${slaRows}</tbody></table>` : `<p class="empty">No grants negotiated.</p>`}
</section>`;
}
