/**
 * Application chrome: navigation, logical-clock readout, the admin-only
 * advance control, API error banner and the confirmation dialog that
 * gates every destructive action.
 */

import { esc, fig } from "../format.js";
import type { ClockInfo } from "../types.js";

export interface Banner {
  code: string;
  message: string;
}

export interface ConfirmPrompt {
  title: string;
  body: string;
  stale: boolean;
}

export interface ShellState {
  account: string | null;
  admin: boolean;
  clock: ClockInfo | null;
  route: string;
  error: Banner | null;
  confirm: ConfirmPrompt | null;
}

const NAV: [string, string][] = [
  ["#/", "board"],
  ["#/cluster", "cluster"],
  ["#/transfers", "transfers"],
  ["#/sites", "sites"],
  ["#/compose", "compose"],
];

function navLinks(route: string): string {
  return NAV.map(([href, label]) => {
    const active = route === href ? "active" : "";
    return `<a class="navlink ${active}" href="${href}">${label}</a>`;
  }).join("");
}

function clockBlock(clock: ClockInfo | null, admin: boolean): string {
  if (clock === null) return "";
  const advance =
    admin && clock.mode === "manual"
      ? `<form class="inline" data-form="advance">
<input name="dt" type="number" step="any" min="0" value="1" size="5">
<button type="submit">advance</button></form>`
      : "";
  return `<span class="stat">t=${fig(clock.now)} <b>${esc(clock.mode)}</b></span>${advance}`;
}

export function renderConfirm(confirm: ConfirmPrompt | null): string {
  if (confirm === null) return "";
  const staleNote = confirm.stale
    ? `<p class="warn">The entity changed since you first looked; review the fresh state and confirm again.</p>`
    : "";
  return `<div class="overlay" data-overlay>
<div class="modal" role="dialog">
<h3>${esc(confirm.title)}</h3>
<p>${confirm.body}</p>
${staleNote}
<div class="row-actions">
<button data-action="confirm">confirm</button>
<button data-action="dismiss">cancel</button>
</div>
</div>
</div>`;
}

export function renderBanner(error: Banner | null): string {
  if (error === null) return "";
  return `<div class="banner bad" data-banner>
<b>${esc(error.code)}</b> ${esc(error.message)}
<button data-action="clear-error">dismiss</button>
</div>`;
}

export function renderShell(state: ShellState, page: string): string {
  const session = state.account
    ? `<span class="stat">${fig(state.account)}</span><button data-action="logout">log out</button>`
    : "";
  return `<header class="topbar">
<h1>miniorc</h1>
<nav>${navLinks(state.route)}</nav>
<div class="spacer"></div>
${clockBlock(state.clock, state.admin)}
${session}
</header>
${renderBanner(state.error)}
<main id="page">${page}</main>
${renderConfirm(state.confirm)}`;
}
