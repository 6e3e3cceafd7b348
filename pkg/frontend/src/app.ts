/**
 * View explorer application: DOM wiring between the controls, the service
 * client, and the charts.
 *
 * Request discipline, per endpoint: at most one request in flight (the
 * previous one is aborted, best effort) and a RenderGate ticket so a stale
 * response that slips through can never paint over a newer one. Slider and
 * text edits are debounced; structural edits ride the same timer.
 */

import {
  ApiClient,
  AssetsResponse,
  BlackLittermanRequest,
  BlackLittermanResponse,
  FrontierResponse,
  ServiceError,
} from "./api.js";
import {
  BoundsDraft,
  RenderGate,
  SessionState,
  ViewDraft,
  boundsProblem,
  decodeFragment,
  defaultState,
  encodeFragment,
  toViewSpec,
  validateDraft,
} from "./state.js";
import { allocationChart, frontierChart, priorPosteriorChart } from "./charts.js";

export interface UrlBox {
  /** Current fragment, without the leading '#'. */
  read(): string;
  write(fragment: string): void;
}

export interface AppOptions {
  root: HTMLElement;
  client: ApiClient;
  urlBox: UrlBox;
  /** Debounce for slider and text edits; the default mirrors production. */
  debounceMs?: number;
}

function describe(err: unknown): string {
  return err instanceof Error ? err.message : String(err);
}

function isAbort(err: unknown): boolean {
  return err instanceof Error && err.name === "AbortError";
}

export class ViewExplorerApp {
  private readonly root: HTMLElement;
  private readonly client: ApiClient;
  private readonly urlBox: UrlBox;
  private readonly debounceMs: number;

  private session: SessionState = defaultState();
  private pendingBounds: BoundsDraft = { minWeight: 0, maxWeight: 1 };
  private assets: AssetsResponse | null = null;

  private readonly blGate = new RenderGate();
  private readonly frontierGate = new RenderGate();
  private blAbort: AbortController | null = null;
  private frontierAbort: AbortController | null = null;
  private bootOp: Promise<void> | null = null;
  private blOp: Promise<void> | null = null;
  private frontierOp: Promise<void> | null = null;
  private debounceTimer: ReturnType<typeof setTimeout> | null = null;
  private bannerOwner: "boot" | "bl" | "frontier" | null = null;
  private retry: (() => void) | null = null;

  constructor(options: AppOptions) {
    this.root = options.root;
    this.client = options.client;
    this.urlBox = options.urlBox;
    this.debounceMs = options.debounceMs ?? 250;
  }

  /** Kick off the initial load; rendering happens as responses arrive. */
  startBoot(): void {
    const op = this.boot().finally(() => {
      if (this.bootOp === op) this.bootOp = null;
      this.updateBusy();
    });
    this.bootOp = op;
    this.updateBusy();
  }

  /** Current session state; exposed for tests and debugging. */
  state(): SessionState {
    return this.session;
  }

  /**
   * Resolve once every in-flight request has drained. Pending debounce
   * timers are not waited on; advance the clock first.
   */
  async settled(): Promise<void> {
    for (let i = 0; i < 25; i++) {
      const ops = [this.bootOp, this.blOp, this.frontierOp].filter(
        (p): p is Promise<void> => p !== null,
      );
      if (ops.length === 0) return;
      await Promise.all(ops).catch(() => undefined);
    }
  }

  // -------------------------------------------------------------------
  // boot

  private async boot(): Promise<void> {
    this.buildSkeleton();
    const restored = decodeFragment(this.urlBox.read());
    if (restored) this.session = restored;
    this.pendingBounds = { ...this.session.bounds };
    try {
      this.assets = await this.client.assets();
    } catch (err) {
      this.showBanner("boot", describe(err), () => this.startBoot());
      return;
    }
    this.renderControls();
    this.setStatus(this.assets.config_hash, this.assets.seed);
    this.syncUrl();
    this.issueBl();
    this.issueFrontier();
  }

  private buildSkeleton(): void {
    this.root.innerHTML = `
      <header class="app-header">
        <h1>view explorer</h1>
        <span class="status-line"></span>
        <span class="busy-note"></span>
      </header>
      <div class="banner" hidden>
        <span class="banner-message"></span>
        <button type="button" class="banner-retry">Retry</button>
      </div>
      <div class="columns">
        <section class="views-panel">
          <h2>Views</h2>
          <div class="views-list"></div>
          <button type="button" class="add-view">Add view</button>
          <label class="tau-label">tau
            <input class="tau-input" type="number" step="0.001" min="0" placeholder="server default">
          </label>
          <span class="tau-error inline-error"></span>
        </section>
        <section class="charts-panel">
          <h2>Expected excess returns</h2>
          <div class="posterior-chart chart"></div>
          <h2>Allocation</h2>
          <div class="allocation-chart chart"></div>
        </section>
      </div>
      <section class="frontier-panel">
        <h2>Frontier</h2>
        <div class="bounds-row">
          <label>min weight <input class="bound-min" type="number" step="0.01"></label>
          <label>max weight <input class="bound-max" type="number" step="0.01"></label>
          <button type="button" class="apply-bounds">Apply</button>
          <span class="bounds-note inline-error"></span>
        </div>
        <div class="frontier-chart chart"></div>
      </section>
    `;
    this.must<HTMLButtonElement>(".banner-retry").addEventListener("click", () => {
      const thunk = this.retry; // hideBanner clears it
      this.hideBanner();
      if (thunk) thunk();
    });
    this.must<HTMLButtonElement>(".add-view").addEventListener("click", () => this.addView());
    this.must<HTMLInputElement>(".tau-input").addEventListener("input", () => this.onTauEdit());
    const minInput = this.must<HTMLInputElement>(".bound-min");
    const maxInput = this.must<HTMLInputElement>(".bound-max");
    const onBoundsEdit = () => {
      this.pendingBounds = {
        minWeight: parseFloat(minInput.value),
        maxWeight: parseFloat(maxInput.value),
      };
      this.updateBoundsNote();
    };
    minInput.addEventListener("input", onBoundsEdit);
    maxInput.addEventListener("input", onBoundsEdit);
    this.must<HTMLButtonElement>(".apply-bounds").addEventListener("click", () => this.applyBounds());
  }

  // -------------------------------------------------------------------
  // controls

  private renderControls(): void {
    this.renderViewRows();
    const tauInput = this.must<HTMLInputElement>(".tau-input");
    tauInput.value = this.session.tau === null ? "" : String(this.session.tau);
    this.must<HTMLInputElement>(".bound-min").value = String(this.pendingBounds.minWeight);
    this.must<HTMLInputElement>(".bound-max").value = String(this.pendingBounds.maxWeight);
    this.updateBoundsNote();
  }

  private renderViewRows(): void {
    const list = this.must<HTMLDivElement>(".views-list");
    list.innerHTML = "";
    this.session.views.forEach((draft, index) => {
      list.appendChild(this.buildViewRow(draft, index));
    });
  }

  private buildViewRow(draft: ViewDraft, index: number): HTMLElement {
    const row = document.createElement("div");
    row.className = "view-row";
    row.dataset.index = String(index);

    const kind = document.createElement("select");
    kind.className = "view-kind";
    for (const value of ["relative", "absolute"]) {
      const opt = document.createElement("option");
      opt.value = value;
      opt.textContent = value;
      kind.appendChild(opt);
    }
    kind.value = draft.kind;

    const assetA = this.buildAssetSelect("view-asset-a", draft.assetA);
    const assetB = this.buildAssetSelect("view-asset-b", draft.assetB);
    const beats = document.createElement("span");
    beats.className = "beats";
    beats.textContent = draft.kind === "relative" ? "beats" : "=";
    assetB.hidden = draft.kind !== "relative";
    const byLabel = document.createElement("span");
    byLabel.className = "beats";
    byLabel.textContent = draft.kind === "relative" ? "by" : "";

    const magnitude = document.createElement("input");
    magnitude.className = "view-magnitude";
    magnitude.type = "number";
    magnitude.step = "0.01";
    magnitude.value = String(draft.magnitude);

    const confidence = document.createElement("input");
    confidence.className = "view-confidence";
    confidence.type = "range";
    confidence.min = "0";
    confidence.max = "1";
    confidence.step = "0.01";
    confidence.value = String(draft.confidence);

    const remove = document.createElement("button");
    remove.type = "button";
    remove.className = "view-remove";
    remove.textContent = "remove";

    const error = document.createElement("span");
    error.className = "view-error inline-error";

    kind.addEventListener("change", () => {
      draft.kind = kind.value as ViewDraft["kind"];
      this.renderViewRows();
      this.afterEdit();
    });
    assetA.addEventListener("change", () => {
      draft.assetA = assetA.value;
      this.refreshRowError(row, draft);
      this.afterEdit();
    });
    assetB.addEventListener("change", () => {
      draft.assetB = assetB.value;
      this.refreshRowError(row, draft);
      this.afterEdit();
    });
    magnitude.addEventListener("input", () => {
      draft.magnitude = parseFloat(magnitude.value);
      this.refreshRowError(row, draft);
      this.afterEdit();
    });
    confidence.addEventListener("input", () => {
      draft.confidence = Math.min(1, Math.max(0, parseFloat(confidence.value) || 0));
      this.afterEdit();
    });
    remove.addEventListener("click", () => {
      this.session.views.splice(index, 1);
      this.renderViewRows();
      this.afterEdit();
    });

    row.append(kind, assetA, beats, assetB, byLabel, magnitude, confidence, remove, error);
    this.refreshRowError(row, draft);
    return row;
  }

  private buildAssetSelect(className: string, selected: string): HTMLSelectElement {
    const select = document.createElement("select");
    select.className = className;
    const tickers = this.assets ? [...this.assets.tickers] : [];
    // a restored link may name an asset this dataset lacks; keep it visible
    // so the user sees what the link asked for and the server can say no
    if (selected && !tickers.includes(selected)) tickers.push(selected);
    for (const t of tickers) {
      const opt = document.createElement("option");
      opt.value = t;
      opt.textContent = t;
      select.appendChild(opt);
    }
    select.value = selected;
    return select;
  }

  private addView(): void {
    const tickers = this.assets?.tickers ?? [];
    this.session.views.push({
      kind: "relative",
      assetA: tickers[0] ?? "",
      assetB: tickers[1] ?? "",
      magnitude: 0.01,
      confidence: 0.5,
    });
    this.renderViewRows();
    this.afterEdit();
  }

  private onTauEdit(): void {
    const input = this.must<HTMLInputElement>(".tau-input");
    const note = this.must<HTMLSpanElement>(".tau-error");
    if (input.value.trim() === "") {
      this.session.tau = null;
      note.textContent = "";
      this.afterEdit();
      return;
    }
    const value = parseFloat(input.value);
    if (!Number.isFinite(value) || value <= 0) {
      note.textContent = "tau must be a positive number";
      return;
    }
    note.textContent = "";
    this.session.tau = value;
    this.afterEdit();
  }

  private afterEdit(): void {
    this.syncUrl();
    this.scheduleBl();
  }

  private refreshRowError(row: HTMLElement, draft: ViewDraft): void {
    const span = row.querySelector<HTMLSpanElement>(".view-error");
    if (span) span.textContent = validateDraft(draft) ?? "";
  }

  private refreshAllRowErrors(): void {
    const rows = this.root.querySelectorAll<HTMLElement>(".view-row");
    this.session.views.forEach((draft, i) => {
      const row = rows[i];
      if (row) this.refreshRowError(row, draft);
    });
  }

  // -------------------------------------------------------------------
  // bounds

  private updateBoundsNote(): void {
    const note = this.must<HTMLSpanElement>(".bounds-note");
    const apply = this.must<HTMLButtonElement>(".apply-bounds");
    const n = this.assets?.tickers.length ?? 0;
    const problem = n > 0 ? boundsProblem(this.pendingBounds, n) : null;
    note.textContent = problem ?? "";
    apply.disabled = problem !== null;
  }

  private applyBounds(): void {
    const n = this.assets?.tickers.length ?? 0;
    if (n === 0 || boundsProblem(this.pendingBounds, n) !== null) return;
    this.session.bounds = { ...this.pendingBounds };
    this.syncUrl();
    this.issueFrontier();
  }

  // -------------------------------------------------------------------
  // requests

  private scheduleBl(): void {
    if (this.debounceTimer !== null) clearTimeout(this.debounceTimer);
    this.debounceTimer = setTimeout(() => {
      this.debounceTimer = null;
      this.issueBl();
    }, this.debounceMs);
  }

  private issueBl(): void {
    const body: BlackLittermanRequest = {
      views: this.session.views.filter((d) => validateDraft(d) === null).map(toViewSpec),
    };
    if (this.session.tau !== null) body.tau = this.session.tau;

    if (this.blAbort) this.blAbort.abort();
    const controller = new AbortController();
    this.blAbort = controller;
    const ticket = this.blGate.next();
    const op = this.client
      .blackLitterman(body, controller.signal)
      .then((resp) => {
        if (!this.blGate.tryRender(ticket)) return;
        this.renderBl(resp);
      })
      .catch((err) => {
        if (isAbort(err) || !this.blGate.tryRender(ticket)) return;
        this.handleBlError(err);
      })
      .finally(() => {
        if (this.blOp === op) this.blOp = null;
        this.updateBusy();
      });
    this.blOp = op;
    this.updateBusy();
  }

  private issueFrontier(): void {
    if (this.frontierAbort) this.frontierAbort.abort();
    const controller = new AbortController();
    this.frontierAbort = controller;
    const ticket = this.frontierGate.next();
    const op = this.client
      .frontier(
        {
          bounds: { lower: this.session.bounds.minWeight, upper: this.session.bounds.maxWeight },
          include_unconstrained: true,
        },
        controller.signal,
      )
      .then((resp) => {
        if (!this.frontierGate.tryRender(ticket)) return;
        this.renderFrontier(resp);
      })
      .catch((err) => {
        if (isAbort(err) || !this.frontierGate.tryRender(ticket)) return;
        this.handleFrontierError(err);
      })
      .finally(() => {
        if (this.frontierOp === op) this.frontierOp = null;
        this.updateBusy();
      });
    this.frontierOp = op;
    this.updateBusy();
  }

  // -------------------------------------------------------------------
  // rendering

  private renderBl(resp: BlackLittermanResponse): void {
    const pairs = resp.tickers.map((label, i) => ({
      label,
      prior: resp.prior.pi[i] ?? 0,
      posterior: resp.posterior.mu_bl[i] ?? 0,
    }));
    this.must<HTMLDivElement>(".posterior-chart").innerHTML = priorPosteriorChart(pairs);
    this.must<HTMLDivElement>(".allocation-chart").innerHTML = allocationChart(
      resp.weights.tickers,
      resp.weights.w,
    );
    this.setStatus(resp.config_hash, resp.seed);
    this.refreshAllRowErrors();
    if (this.bannerOwner === "bl") this.hideBanner();
  }

  private renderFrontier(resp: FrontierResponse): void {
    const constrained = resp.points.map((p) => ({ volatility: p.volatility, targetReturn: p.target_return }));
    const unconstrained =
      resp.unconstrained?.map((p) => ({ volatility: p.volatility, targetReturn: p.target_return })) ?? null;
    this.must<HTMLDivElement>(".frontier-chart").innerHTML = frontierChart(constrained, unconstrained, {
      volatility: resp.gmv.volatility,
      targetReturn: resp.gmv.target_return,
    });
    this.setStatus(resp.config_hash, resp.seed);
    this.updateBoundsNote();
    if (this.bannerOwner === "frontier") this.hideBanner();
  }

  private handleBlError(err: unknown): void {
    if (err instanceof ServiceError && err.status < 500) {
      if (!this.attachViewError(err.message)) {
        this.showBanner("bl", err.message, null);
      }
      return;
    }
    this.showBanner("bl", describe(err), () => this.issueBl());
  }

  private handleFrontierError(err: unknown): void {
    if (err instanceof ServiceError && err.status < 500) {
      this.must<HTMLSpanElement>(".bounds-note").textContent = err.message;
      return;
    }
    this.showBanner("frontier", describe(err), () => this.issueFrontier());
  }

  /**
   * Pin a 4xx message to the view it complains about, matching on the asset
   * names the service quotes back. Later rows win the tie so a duplicate
   * view error lands on the newer copy.
   */
  private attachViewError(message: string): boolean {
    const rows = this.root.querySelectorAll<HTMLElement>(".view-row");
    for (let i = this.session.views.length - 1; i >= 0; i--) {
      const draft = this.session.views[i];
      const assets =
        draft.kind === "relative" ? [draft.assetA, draft.assetB] : [draft.assetA];
      const named = assets.some(
        (a) => a !== "" && (message.includes(`'${a}'`) || message.includes(` ${a} `)),
      );
      const row = rows[i];
      if (named && row) {
        const span = row.querySelector<HTMLSpanElement>(".view-error");
        if (span) span.textContent = message;
        return true;
      }
    }
    return false;
  }

  // -------------------------------------------------------------------
  // chrome

  private setStatus(configHash: string, seed: number): void {
    this.must<HTMLSpanElement>(".status-line").textContent =
      `config ${configHash.slice(0, 12)} seed ${seed}`;
  }

  private updateBusy(): void {
    const busy = this.bootOp !== null || this.blOp !== null || this.frontierOp !== null;
    this.must<HTMLSpanElement>(".busy-note").textContent = busy ? "updating..." : "";
  }

  private showBanner(owner: "boot" | "bl" | "frontier", message: string, retry: (() => void) | null): void {
    this.bannerOwner = owner;
    this.retry = retry;
    const banner = this.must<HTMLDivElement>(".banner");
    banner.hidden = false;
    this.must<HTMLSpanElement>(".banner-message").textContent = message;
    this.must<HTMLButtonElement>(".banner-retry").hidden = retry === null;
  }

  private hideBanner(): void {
    this.bannerOwner = null;
    this.retry = null;
    this.must<HTMLDivElement>(".banner").hidden = true;
  }

  private syncUrl(): void {
    this.urlBox.write(encodeFragment(this.session));
  }

  private must<T extends Element>(selector: string): T {
    const el = this.root.querySelector(selector);
    if (!el) throw new Error(`missing element ${selector}`);
    return el as T;
  }
}

export function createApp(options: AppOptions): ViewExplorerApp {
  const app = new ViewExplorerApp(options);
  app.startBoot();
  return app;
}
