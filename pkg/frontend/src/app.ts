/**
 * Single-page app: hash routing, one global event feed, delegated DOM
 * events. Pages are pure HTML-string renderers fed exclusively from
 * gateway responses; this module only fetches, routes and re-renders.
 */

import { Api, ApiError } from "./api.js";
import { ActionGate, type ActionKind } from "./actions.js";
import { EventFeed } from "./events.js";
import { TEMPLATE_CATALOG } from "./templates.js";
import type { Claims, ClockInfo } from "./types.js";
import { renderBoard } from "./views/board.js";
import { renderCluster } from "./views/cluster.js";
import { renderComposer } from "./views/composer.js";
import { renderDetail } from "./views/detail.js";
import { renderLogin } from "./views/login.js";
import { renderShell, type Banner } from "./views/shell.js";
import { renderSites } from "./views/sites.js";
import { renderTransfers } from "./views/transfers.js";

export class App {
  readonly api: Api;
  readonly gate: ActionGate;
  feed: EventFeed | null = null;
  claims: Claims | null = null;
  clock: ClockInfo | null = null;
  error: Banner | null = null;
  composerIndex = 0;
  composerDraft = TEMPLATE_CATALOG[0].text;

  constructor(
    private readonly root: HTMLElement,
    api?: Api,
    private readonly feedOpts: { wait?: number; repollMs?: number } = {},
  ) {
    this.api = api ?? new Api();
    this.gate = new ActionGate(this.api);
  }

  start(): void {
    this.root.addEventListener("click", (e) => void this.onClick(e));
    this.root.addEventListener("submit", (e) => void this.onSubmit(e));
    this.root.addEventListener("change", (e) => this.onChange(e));
    window.addEventListener("hashchange", () => void this.refresh());
    void this.refresh();
  }

  get route(): string {
    const hash = window.location.hash;
    return hash === "" ? "#/" : hash;
  }

  private startFeed(): void {
    this.feed?.stop();
    this.feed = new EventFeed(this.api, () => void this.refresh(), this.feedOpts);
    this.feed.start();
  }

  logout(): void {
    this.feed?.stop();
    this.feed = null;
    this.api.token = null;
    this.claims = null;
    this.clock = null;
  }

  private fail(err: unknown): void {
    if (err instanceof ApiError) {
      this.error = { code: err.code, message: err.message };
      if (err.status === 401) this.logout();
    } else {
      this.error = { code: "CLIENT", message: String(err) };
    }
  }

  /** Fetch what the current route needs and redraw the whole shell. */
  async refresh(): Promise<void> {
    let page: string;
    if (this.api.token === null) {
      page = renderLogin();
    } else {
      try {
        this.clock = await this.api.clock();
        page = await this.renderRoute();
      } catch (err) {
        this.fail(err);
        page = this.api.token === null ? renderLogin() : `<section class="panel"></section>`;
      }
    }
    const shell = renderShell(
      {
        account: this.claims?.account_id ?? null,
        admin: this.claims?.admin ?? false,
        clock: this.api.token === null ? null : this.clock,
        route: this.route,
        error: this.error,
        confirm: this.gate.prompt(),
      },
      page,
    );
    this.root.innerHTML = shell;
  }

  private async renderRoute(): Promise<string> {
    const route = this.route;
    const detail = route.match(/^#\/deployments\/([^/]+)$/);
    if (detail) {
      return renderDetail(await this.api.deployment(detail[1]));
    }
    switch (route) {
      case "#/cluster":
        return renderCluster(await this.api.cluster());
      case "#/transfers": {
        const [jobs, datasets] = await Promise.all([this.api.transfers(), this.api.datasets()]);
        return renderTransfers(jobs.transfers, datasets.datasets);
      }
      case "#/sites": {
        const [sites, ranking, slas] = await Promise.all([
          this.api.sites(),
          this.api.rank(),
          this.api.slas(),
        ]);
        return renderSites(sites.sites, ranking, slas.slas);
      }
      case "#/compose":
        return renderComposer(this.composerIndex, this.composerDraft);
      default:
        return renderBoard((await this.api.deployments()).deployments);
    }
  }

  // -- delegated DOM events ------------------------------------------------

  private async onClick(e: Event): Promise<void> {
    const target = (e.target as HTMLElement).closest("[data-action]");
    if (!(target instanceof HTMLElement)) return;
    const action = target.dataset["action"];
    const id = target.dataset["id"] ?? "";
    try {
      switch (action) {
        case "delete-deployment":
        case "cancel-transfer":
          await this.gate.request(action as ActionKind, id);
          break;
        case "confirm":
          await this.gate.confirm();
          break;
        case "dismiss":
          this.gate.dismiss();
          break;
        case "logout":
          this.logout();
          break;
        case "clear-error":
          this.error = null;
          break;
        default:
          return;
      }
    } catch (err) {
      this.fail(err);
    }
    await this.refresh();
  }

  private async onSubmit(e: Event): Promise<void> {
    const form = e.target as HTMLFormElement;
    if (!form.dataset["form"]) return;
    e.preventDefault();
    const data = new FormData(form);
    const value = (name: string) => String(data.get(name) ?? "");
    try {
      switch (form.dataset["form"]) {
        case "login": {
          const { token } = await this.api.login(value("issuer"), value("subject"));
          this.api.token = token;
          this.claims = await this.api.introspect(token);
          this.error = null;
          this.startFeed();
          window.location.hash = "#/";
          break;
        }
        case "advance":
          await this.api.advance(Number(value("dt")));
          break;
        case "compose": {
          const created = await this.api.submit(value("template"));
          this.composerDraft = value("template");
          window.location.hash = `#/deployments/${created.deployment_id}`;
          break;
        }
        case "transfer":
          await this.api.scheduleTransfer(value("dataset"), value("src"), value("dst"));
          break;
        default:
          return;
      }
    } catch (err) {
      this.fail(err);
    }
    await this.refresh();
  }

  private onChange(e: Event): void {
    const select = e.target as HTMLSelectElement;
    if (select.name !== "catalog") return;
    const index = Number(select.value);
    if (TEMPLATE_CATALOG[index]) {
      this.composerIndex = index;
      this.composerDraft = TEMPLATE_CATALOG[index].text;
      void this.refresh();
    }
  }
}
