/**
 * Destructive operations behind a confirmation gate. Nothing fires until
 * the user confirms; on confirm the entity is re-fetched first, and if it
 * changed since the dialog opened the dialog refreshes and asks again
 * instead of acting on a stale view.
 */

import type { Api } from "./api.js";
import { esc, fig } from "./format.js";
import type { ConfirmPrompt } from "./views/shell.js";

export type ActionKind = "delete-deployment" | "cancel-transfer";

interface Pending {
  kind: ActionKind;
  id: string;
  fingerprint: string;
  stale: boolean;
}

export type ConfirmOutcome = "done" | "stale" | "idle";

export class ActionGate {
  private pending: Pending | null = null;

  constructor(private readonly api: Api) {}

  get active(): boolean {
    return this.pending !== null;
  }

  /** Dialog contents for the shell, or null when nothing is pending. */
  prompt(): ConfirmPrompt | null {
    if (this.pending === null) return null;
    const { kind, id, fingerprint, stale } = this.pending;
    const verb = kind === "delete-deployment" ? "Delete deployment" : "Cancel transfer";
    return {
      title: `${verb} ${id}?`,
      body: `Current state: ${fig(fingerprint)}. This cannot be undone.`,
      stale,
    };
  }

  private async fingerprint(kind: ActionKind, id: string): Promise<string> {
    if (kind === "delete-deployment") {
      const dep = await this.api.deployment(id);
      return dep.state;
    }
    const jobs = (await this.api.transfers()).transfers;
    const job = jobs.find((j) => j.job_id === id);
    if (job === undefined) return "(gone)";
    return `${job.state} ${job.bytes_moved}/${esc(String(job.total_bytes))}`;
  }

  /** Open the dialog for an action; never performs the action itself. */
  async request(kind: ActionKind, id: string): Promise<void> {
    const fingerprint = await this.fingerprint(kind, id);
    this.pending = { kind, id, fingerprint, stale: false };
  }

  /**
   * Act on the pending confirmation. Re-checks the entity first: when the
   * state moved underneath the dialog the outcome is "stale" and a second
   * confirm is required; only a clean re-check performs the operation.
   */
  async confirm(): Promise<ConfirmOutcome> {
    if (this.pending === null) return "idle";
    const fresh = await this.fingerprint(this.pending.kind, this.pending.id);
    if (fresh !== this.pending.fingerprint) {
      this.pending = { ...this.pending, fingerprint: fresh, stale: true };
      return "stale";
    }
    const { kind, id } = this.pending;
    if (kind === "delete-deployment") {
      await this.api.deleteDeployment(id);
    } else {
      await this.api.cancelTransfer(id);
    }
    this.pending = null;
    return "done";
  }

  dismiss(): void {
    this.pending = null;
  }
}
