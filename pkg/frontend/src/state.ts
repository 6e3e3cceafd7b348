/**
 * Session state for the view explorer: view drafts being edited, the tau
 * override, weight bounds for the frontier, plus the two pieces of plumbing
 * that keep the UI honest about ordering (RenderGate) and shareability
 * (the URL fragment codec).
 */

import { ViewSpec } from "./api.js";

export type ViewKind = "relative" | "absolute";

export interface ViewDraft {
  kind: ViewKind;
  /** The asset of an absolute view, or the favoured leg of a relative one. */
  assetA: string;
  /** The disfavoured leg of a relative view; ignored for absolute views. */
  assetB: string;
  magnitude: number;
  /** Slider position in [0, 1]; 0 means the view is nearly ignored. */
  confidence: number;
}

export interface BoundsDraft {
  minWeight: number;
  maxWeight: number;
}

export interface SessionState {
  views: ViewDraft[];
  tau: number | null;
  bounds: BoundsDraft;
}

export function defaultState(): SessionState {
  return { views: [], tau: null, bounds: { minWeight: 0, maxWeight: 1 } };
}

/**
 * Map a confidence slider position to the omega scale the service expects,
 * log-spaced across [1e-2, 1e2]. Zero confidence inflates view uncertainty
 * a hundredfold (the view barely registers); full confidence shrinks it a
 * hundredfold (the posterior hugs the view).
 */
export function omegaScaleFor(confidence: number): number {
  const c = Math.min(1, Math.max(0, confidence));
  return 10 ** (2 - 4 * c);
}

/** Human-readable reason a draft cannot be sent, or null if it is fine. */
export function validateDraft(draft: ViewDraft): string | null {
  if (!Number.isFinite(draft.magnitude)) {
    return "magnitude must be a finite number";
  }
  if (draft.kind === "relative") {
    if (!draft.assetA || !draft.assetB) {
      return "pick both assets for a relative view";
    }
    if (draft.assetA === draft.assetB) {
      return "a relative view needs two distinct assets";
    }
  } else if (!draft.assetA) {
    return "pick an asset";
  }
  return null;
}

/** Wire form of a draft; call only after validateDraft returned null. */
export function toViewSpec(draft: ViewDraft): ViewSpec {
  const omega_scale = omegaScaleFor(draft.confidence);
  if (draft.kind === "relative") {
    return {
      kind: "relative",
      asset_a: draft.assetA,
      asset_b: draft.assetB,
      magnitude: draft.magnitude,
      omega_scale,
    };
  }
  return { kind: "absolute", asset: draft.assetA, magnitude: draft.magnitude, omega_scale };
}

/**
 * Why a bounds box can never hold a fully invested portfolio, or null when
 * it can. Mirrors the service's feasibility check so the Apply button can
 * be disabled before a doomed request goes out.
 */
export function boundsProblem(bounds: BoundsDraft, nAssets: number): string | null {
  const { minWeight, maxWeight } = bounds;
  if (!Number.isFinite(minWeight) || !Number.isFinite(maxWeight)) {
    return "bounds must be numbers";
  }
  if (minWeight < 0 || maxWeight > 1) {
    return "weights live in [0, 1]";
  }
  if (minWeight > maxWeight) {
    return "the lower bound exceeds the upper bound";
  }
  if (maxWeight * nAssets < 1) {
    return `a ${maxWeight} cap across ${nAssets} assets cannot reach a total weight of 1`;
  }
  if (minWeight * nAssets > 1) {
    return `a ${minWeight} floor across ${nAssets} assets forces the total weight above 1`;
  }
  return null;
}

// ---------------------------------------------------------------------------
// URL fragment codec

export function encodeFragment(state: SessionState): string {
  return encodeURIComponent(JSON.stringify(state));
}

/**
 * Rebuild session state from a URL fragment. Anything malformed returns
 * null rather than a half-filled state; a stale or hand-edited link should
 * fall back to the defaults, not wedge the page.
 */
export function decodeFragment(fragment: string): SessionState | null {
  if (!fragment) return null;
  let raw: unknown;
  try {
    raw = JSON.parse(decodeURIComponent(fragment));
  } catch {
    return null;
  }
  if (typeof raw !== "object" || raw === null) return null;
  const obj = raw as Record<string, unknown>;
  if (!Array.isArray(obj.views)) return null;
  const views: ViewDraft[] = [];
  for (const item of obj.views) {
    const draft = readDraft(item);
    if (!draft) return null;
    views.push(draft);
  }
  let tau: number | null = null;
  if (obj.tau !== null && obj.tau !== undefined) {
    tau = Number(obj.tau);
    if (!Number.isFinite(tau) || tau <= 0) return null;
  }
  const bounds = readBounds(obj.bounds);
  if (!bounds) return null;
  return { views, tau, bounds };
}

function readDraft(item: unknown): ViewDraft | null {
  if (typeof item !== "object" || item === null) return null;
  const obj = item as Record<string, unknown>;
  if (obj.kind !== "relative" && obj.kind !== "absolute") return null;
  if (typeof obj.assetA !== "string") return null;
  const assetB = typeof obj.assetB === "string" ? obj.assetB : "";
  const magnitude = Number(obj.magnitude);
  const confidence = Number(obj.confidence);
  if (!Number.isFinite(magnitude) || !Number.isFinite(confidence)) return null;
  return {
    kind: obj.kind,
    assetA: obj.assetA,
    assetB,
    magnitude,
    confidence: Math.min(1, Math.max(0, confidence)),
  };
}

function readBounds(value: unknown): BoundsDraft | null {
  if (typeof value !== "object" || value === null) return null;
  const obj = value as Record<string, unknown>;
  const minWeight = Number(obj.minWeight);
  const maxWeight = Number(obj.maxWeight);
  if (!Number.isFinite(minWeight) || !Number.isFinite(maxWeight)) return null;
  return { minWeight, maxWeight };
}

// ---------------------------------------------------------------------------
// response ordering

/**
 * Monotone ticket counter for one endpoint. Each outgoing request takes a
 * ticket; a response may render only if nothing newer has rendered already.
 * Aborting the previous request is best effort, so this gate is what
 * actually guarantees a slow reply never overwrites a fresh one.
 */
export class RenderGate {
  private issued = 0;
  private rendered = 0;

  next(): number {
    this.issued += 1;
    return this.issued;
  }

  tryRender(ticket: number): boolean {
    if (ticket <= this.rendered) return false;
    this.rendered = ticket;
    return true;
  }
}
