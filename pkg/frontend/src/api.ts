/**
 * Typed client for the frontierlab HTTP service.
 *
 * The UI treats the service as the single source of numerical truth: every
 * figure on screen comes out of one of these responses. The client itself
 * does no arithmetic beyond JSON parsing.
 */

/** The slice of a fetch Response the client actually touches. */
export interface HttpResponse {
  ok: boolean;
  status: number;
  json(): Promise<unknown>;
}

export interface RequestOptions {
  method?: string;
  headers?: Record<string, string>;
  body?: string;
  signal?: AbortSignal;
}

export type FetchLike = (url: string, options?: RequestOptions) => Promise<HttpResponse>;

/** Non-2xx responses arrive as an envelope: {"error": {"code", "message"}}. */
export class ServiceError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ServiceError";
  }
}

/** Wire form of a single investor view, as /blacklitterman expects it. */
export type ViewSpec =
  | { kind: "relative"; asset_a: string; asset_b: string; magnitude: number; omega_scale?: number }
  | { kind: "absolute"; asset: string; magnitude: number; omega_scale?: number };

export interface BoundsBody {
  lower: number | number[];
  upper: number | number[];
}

export interface AssetsResponse {
  tickers: string[];
  n_obs: number;
  start: string;
  end: string;
  mu: number[];
  volatility: number[];
  market_weights: number[];
  residual_symbol: string;
  residual_weight: number;
  config_hash: string;
  seed: number;
}

export interface WeightsPayload {
  tickers: string[];
  w: number[];
  objective_value: number;
  meta: Record<string, unknown>;
}

export interface BlackLittermanRequest {
  views: ViewSpec[];
  tau?: number;
  omega_scale?: number;
  bounds?: BoundsBody;
}

export interface BlackLittermanResponse {
  tickers: string[];
  prior: {
    pi: number[];
    delta: number;
    tau: number;
    risk_free: number;
    market_weights: number[];
  };
  posterior: {
    mu_bl: number[];
    sigma_bl: number[][];
  };
  views: { k: number; labels: string[]; q: number[] };
  omega_scale: number;
  weights: WeightsPayload;
  config_hash: string;
  seed: number;
}

export interface FrontierRequest {
  bounds?: BoundsBody;
  points?: number;
  include_unconstrained?: boolean;
}

export interface FrontierPoint {
  target_return: number;
  volatility: number;
  w: number[];
}

export interface FrontierResponse {
  points: FrontierPoint[];
  gmv: FrontierPoint;
  unconstrained?: { target_return: number; volatility: number }[];
  config_hash: string;
  seed: number;
}

export class ApiClient {
  private readonly base: string;
  private readonly fetchImpl: FetchLike;

  constructor(baseUrl = "", fetchImpl: FetchLike = (url, options) => fetch(url, options)) {
    this.base = baseUrl.replace(/\/+$/, "");
    this.fetchImpl = fetchImpl;
  }

  assets(signal?: AbortSignal): Promise<AssetsResponse> {
    return this.request<AssetsResponse>("GET", "/assets", undefined, signal);
  }

  blackLitterman(body: BlackLittermanRequest, signal?: AbortSignal): Promise<BlackLittermanResponse> {
    return this.request<BlackLittermanResponse>("POST", "/blacklitterman", body, signal);
  }

  frontier(body: FrontierRequest, signal?: AbortSignal): Promise<FrontierResponse> {
    return this.request<FrontierResponse>("POST", "/frontier", body, signal);
  }

  private async request<T>(method: string, path: string, body?: unknown, signal?: AbortSignal): Promise<T> {
    const options: RequestOptions = { method, signal };
    if (body !== undefined) {
      options.headers = { "content-type": "application/json" };
      options.body = JSON.stringify(body);
    }
    const resp = await this.fetchImpl(this.base + path, options);
    if (!resp.ok) {
      throw await envelopeError(resp);
    }
    return (await resp.json()) as T;
  }
}

async function envelopeError(resp: HttpResponse): Promise<ServiceError> {
  let code = "internal";
  let message = `request failed with status ${resp.status}`;
  try {
    const payload = (await resp.json()) as { error?: { code?: unknown; message?: unknown } };
    if (payload && typeof payload === "object" && payload.error) {
      if (payload.error.code !== undefined) code = String(payload.error.code);
      if (payload.error.message !== undefined) message = String(payload.error.message);
    }
  } catch {
    // body was not JSON; keep the generic message
  }
  return new ServiceError(resp.status, code, message);
}
