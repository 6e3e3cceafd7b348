/**
 * Test doubles: a deterministic in-memory stand-in for the frontierlab
 * service, plus small DOM and timer helpers shared across the suites.
 *
 * The fake mirrors the service's wire contract (payload shapes, the error
 * envelope, which assets exist) but its numbers are made up; what matters
 * is that identical request bodies always produce identical payloads.
 */

import { vi } from "vitest";
import {
  ApiClient,
  AssetsResponse,
  BlackLittermanRequest,
  BlackLittermanResponse,
  FetchLike,
  FrontierRequest,
  FrontierResponse,
  HttpResponse,
} from "../src/api.js";
import { UrlBox, ViewExplorerApp, createApp } from "../src/app.js";

export const TICKERS = ["TSLA", "WMT", "BAC", "GS", "LLY", "MRK", "GOOG", "META", "AAPL", "XOM"];
export const BL_TICKERS = [...TICKERS, "REST"];
export const CONFIG_HASH = "0123456789abcdef".repeat(4);

function round8(x: number): number {
  return Math.round(x * 1e8) / 1e8;
}

export function assetsPayload(): AssetsResponse {
  return {
    tickers: [...TICKERS],
    n_obs: 500,
    start: "2023-09-01",
    end: "2025-06-30",
    mu: TICKERS.map((_, i) => round8(0.0002 + 0.00005 * i)),
    volatility: TICKERS.map((_, i) => round8(0.01 + 0.001 * i)),
    market_weights: TICKERS.map(() => 0.05),
    residual_symbol: "REST",
    residual_weight: 0.5,
    config_hash: CONFIG_HASH,
    seed: 7,
  };
}

class CannedFailure extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
  }
}

export function blPayload(body: BlackLittermanRequest): BlackLittermanResponse {
  const index = new Map(BL_TICKERS.map((t, i) => [t, i] as const));
  const pi = BL_TICKERS.map((_, i) => round8(0.0003 + 0.00004 * i));
  const mu = [...pi];
  const labels: string[] = [];
  const q: number[] = [];
  for (const view of body.views ?? []) {
    // the pull toward the view grows as omega shrinks, like the real posterior
    const pull = 1 / (1 + (view.omega_scale ?? 1));
    if (view.kind === "relative") {
      const a = index.get(view.asset_a);
      const b = index.get(view.asset_b);
      if (a === undefined) throw new CannedFailure(400, "data", `unknown asset '${view.asset_a}' in view`);
      if (b === undefined) throw new CannedFailure(400, "data", `unknown asset '${view.asset_b}' in view`);
      mu[a] = round8(mu[a] + view.magnitude * pull);
      mu[b] = round8(mu[b] - view.magnitude * pull);
      labels.push(`rel ${view.asset_a} > ${view.asset_b} by ${view.magnitude}`);
    } else {
      const a = index.get(view.asset);
      if (a === undefined) throw new CannedFailure(400, "data", `unknown asset '${view.asset}' in view`);
      mu[a] = round8(mu[a] + (view.magnitude - pi[a]) * pull);
      labels.push(`abs ${view.asset} = ${view.magnitude}`);
    }
    q.push(view.magnitude);
  }
  const baseW = BL_TICKERS.map((t) => (t === "REST" ? 0.5 : 0.05));
  const w = BL_TICKERS.map((_, i) => round8(Math.max(0, baseW[i] + (mu[i] - pi[i]) * 2)));
  return {
    tickers: [...BL_TICKERS],
    prior: { pi, delta: 5.1, tau: body.tau ?? 0.0016, risk_free: 0, market_weights: baseW },
    posterior: {
      mu_bl: mu,
      sigma_bl: BL_TICKERS.map((_, i) => BL_TICKERS.map((_, j) => (i === j ? 0.0001 : 0))),
    },
    views: { k: q.length, labels, q },
    omega_scale: body.omega_scale ?? 1,
    weights: { tickers: [...BL_TICKERS], w, objective_value: 0.0123, meta: {} },
    config_hash: CONFIG_HASH,
    seed: 7,
  };
}

export function frontierPayload(body: FrontierRequest): FrontierResponse {
  const lower = typeof body.bounds?.lower === "number" ? body.bounds.lower : 0;
  const upper = typeof body.bounds?.upper === "number" ? body.bounds.upper : 1;
  const uniform = TICKERS.map(() => round8(1 / TICKERS.length));
  const points: FrontierResponse["points"] = [];
  const unconstrained: { target_return: number; volatility: number }[] = [];
  for (let t = 0; t < 9; t++) {
    const ret = round8(0.0002 + 0.00005 * t);
    const volFree = round8(0.01 + 0.0004 * (t - 2) * (t - 2));
    // binding bounds push the constrained curve up; at the open box [0, 1]
    // the two curves coincide exactly
    const vol = round8(volFree + (1 - upper) * 0.002 + lower * 0.001);
    points.push({ target_return: ret, volatility: vol, w: uniform });
    unconstrained.push({ target_return: ret, volatility: volFree });
  }
  const payload: FrontierResponse = {
    points,
    gmv: { target_return: points[2].target_return, volatility: points[2].volatility, w: uniform },
    config_hash: CONFIG_HASH,
    seed: 7,
  };
  if (body.include_unconstrained) payload.unconstrained = unconstrained;
  return payload;
}

function okResponse(payload: unknown): HttpResponse {
  const frozen = JSON.stringify(payload);
  return { ok: true, status: 200, json: async () => JSON.parse(frozen) };
}

function errorResponse(status: number, code: string, message: string): HttpResponse {
  return { ok: false, status, json: async () => ({ error: { code, message } }) };
}

export interface PendingCall {
  path: string;
  body: any;
  respond(payload: unknown): void;
  fail(status: number, code: string, message: string): void;
  reject(err?: Error): void;
}

type QueuedFailure =
  | { path: string; network: true }
  | { path: string; network?: false; status: number; code: string; message: string };

export class FakeBackend {
  readonly calls: { path: string; method: string; body: any }[] = [];
  /** Paths whose requests are held open until the test resolves them. */
  readonly manualPaths = new Set<string>();
  readonly pending: PendingCall[] = [];
  private readonly failures: QueuedFailure[] = [];

  failNext(path: string, failure: "network" | { status: number; code: string; message: string }): void {
    if (failure === "network") {
      this.failures.push({ path, network: true });
    } else {
      this.failures.push({ path, ...failure });
    }
  }

  callsTo(path: string): { path: string; method: string; body: any }[] {
    return this.calls.filter((c) => c.path === path);
  }

  bodyOfLast(path: string): any {
    const matching = this.callsTo(path);
    if (matching.length === 0) throw new Error(`no calls to ${path}`);
    return matching[matching.length - 1].body;
  }

  readonly fetch: FetchLike = (url, options) => {
    const method = options?.method ?? "GET";
    const body = options?.body ? JSON.parse(options.body) : undefined;
    const path = url.startsWith("http") ? new URL(url).pathname : url;
    this.calls.push({ path, method, body });

    const queuedAt = this.failures.findIndex((f) => f.path === path);
    if (queuedAt >= 0) {
      const queued = this.failures.splice(queuedAt, 1)[0];
      if (queued.network) return Promise.reject(new TypeError("network failure (simulated)"));
      return Promise.resolve(errorResponse(queued.status, queued.code, queued.message));
    }

    if (this.manualPaths.has(path)) {
      let entry: PendingCall | undefined;
      const promise = new Promise<HttpResponse>((resolve, reject) => {
        entry = {
          path,
          body,
          respond: (payload) => resolve(okResponse(payload)),
          fail: (status, code, message) => resolve(errorResponse(status, code, message)),
          reject: (err) => reject(err ?? new TypeError("network failure (simulated)")),
        };
      });
      this.pending.push(entry as PendingCall);
      return promise;
    }

    try {
      return Promise.resolve(okResponse(this.canned(path, body)));
    } catch (err) {
      if (err instanceof CannedFailure) {
        return Promise.resolve(errorResponse(err.status, err.code, err.message));
      }
      throw err;
    }
  };

  private canned(path: string, body: any): unknown {
    if (path === "/assets") return assetsPayload();
    if (path === "/blacklitterman") return blPayload(body as BlackLittermanRequest);
    if (path === "/frontier") return frontierPayload(body as FrontierRequest);
    throw new CannedFailure(404, "internal", `no canned response for ${path}`);
  }
}

// ---------------------------------------------------------------------------
// harness

export function memoryUrlBox(initial = ""): UrlBox & { fragment: string } {
  const box = {
    fragment: initial,
    read: () => box.fragment,
    write: (fragment: string) => {
      box.fragment = fragment;
    },
  };
  return box;
}

export interface Harness {
  app: ViewExplorerApp;
  root: HTMLDivElement;
  backend: FakeBackend;
  box: UrlBox & { fragment: string };
}

export function newApp(
  options: { fragment?: string; backend?: FakeBackend; debounceMs?: number } = {},
): Harness {
  const backend = options.backend ?? new FakeBackend();
  const root = document.createElement("div");
  document.body.appendChild(root);
  const box = memoryUrlBox(options.fragment ?? "");
  const app = createApp({
    root,
    client: new ApiClient("", backend.fetch),
    urlBox: box,
    debounceMs: options.debounceMs ?? 250,
  });
  return { app, root, backend, box };
}

/** Fire pending debounce timers and wait for in-flight requests to drain. */
export async function drain(app: ViewExplorerApp): Promise<void> {
  for (let i = 0; i < 4; i++) {
    await vi.advanceTimersByTimeAsync(300);
    await app.settled();
  }
}

export function q<T extends Element>(root: ParentNode, selector: string): T {
  const el = root.querySelector(selector);
  if (!el) throw new Error(`missing element ${selector}`);
  return el as T;
}

export function setInput(el: HTMLInputElement, value: string): void {
  el.value = value;
  el.dispatchEvent(new Event("input", { bubbles: true }));
}

export function setSelect(el: HTMLSelectElement, value: string): void {
  el.value = value;
  el.dispatchEvent(new Event("change", { bubbles: true }));
}

export function click(el: Element): void {
  el.dispatchEvent(new MouseEvent("click", { bubbles: true }));
}
