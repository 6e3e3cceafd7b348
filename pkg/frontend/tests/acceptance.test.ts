/**
 * Release gate for the view explorer, one test per headline guarantee:
 *
 *   1. adding two views and removing them returns the rendered posterior
 *      (and allocation) to the prior state, byte for byte;
 *   2. under rapid slider input, a stale response never paints over a
 *      newer one, even when it arrives later;
 *   3. a shared URL fragment reproduces the identical render and controls
 *      in a fresh session.
 */

import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";
import { blPayload, click, drain, newApp, q, setInput, setSelect } from "./helpers.js";

beforeEach(() => {
  vi.useFakeTimers();
});

afterEach(() => {
  vi.useRealTimers();
  document.body.innerHTML = "";
});

function rows(root: ParentNode): HTMLElement[] {
  return [...root.querySelectorAll<HTMLElement>(".view-row")];
}

/** Two study views: AAPL beats GOOG by 0.02, and TSLA returns 0.10 outright. */
function addStudyViews(root: HTMLElement): void {
  click(q(root, ".add-view"));
  let first = rows(root)[0];
  setSelect(q<HTMLSelectElement>(first, ".view-asset-a"), "AAPL");
  setSelect(q<HTMLSelectElement>(first, ".view-asset-b"), "GOOG");
  setInput(q<HTMLInputElement>(first, ".view-magnitude"), "0.02");

  click(q(root, ".add-view"));
  setSelect(q<HTMLSelectElement>(rows(root)[1], ".view-kind"), "absolute");
  const second = rows(root)[1]; // the kind switch rebuilt the rows
  setSelect(q<HTMLSelectElement>(second, ".view-asset-a"), "TSLA");
  setInput(q<HTMLInputElement>(second, ".view-magnitude"), "0.10");
}

function chartsSnapshot(root: HTMLElement): { posterior: string; allocation: string } {
  return {
    posterior: q<HTMLDivElement>(root, ".posterior-chart").innerHTML,
    allocation: q<HTMLDivElement>(root, ".allocation-chart").innerHTML,
  };
}

describe("view round trip", () => {
  it("returns the rendered posterior to the prior state after the views are removed", async () => {
    const { app, root, backend } = newApp();
    await drain(app);
    const prior = chartsSnapshot(root);
    expect(prior.posterior).toContain("svg");

    addStudyViews(root);
    await drain(app);
    expect(backend.bodyOfLast("/blacklitterman")).toEqual({
      views: [
        { kind: "relative", asset_a: "AAPL", asset_b: "GOOG", magnitude: 0.02, omega_scale: 1 },
        { kind: "absolute", asset: "TSLA", magnitude: 0.1, omega_scale: 1 },
      ],
    });
    const withViews = chartsSnapshot(root);
    expect(withViews.posterior).not.toBe(prior.posterior);
    expect(withViews.allocation).not.toBe(prior.allocation);

    click(q(root, ".view-remove"));
    click(q(root, ".view-remove")); // the list reindexed after the first removal
    await drain(app);

    expect(backend.bodyOfLast("/blacklitterman")).toEqual({ views: [] });
    expect(chartsSnapshot(root)).toEqual(prior);
  });
});

describe("response ordering", () => {
  it("never renders a stale reply over a newer one during rapid slider input", async () => {
    const { app, root, backend } = newApp();
    await drain(app);
    click(q(root, ".add-view"));
    await drain(app);

    backend.manualPaths.add("/blacklitterman");
    const slider = q<HTMLInputElement>(root, ".view-confidence");

    setInput(slider, "0.9");
    await vi.advanceTimersByTimeAsync(260);
    expect(q<HTMLSpanElement>(root, ".busy-note").textContent).toBe("updating...");

    setInput(slider, "0.1");
    await vi.advanceTimersByTimeAsync(260);
    expect(backend.pending).toHaveLength(2);

    const [older, newer] = backend.pending;
    const newerPayload = blPayload(newer.body);
    newerPayload.posterior.mu_bl[0] = 0.099;
    const olderPayload = blPayload(older.body);
    olderPayload.posterior.mu_bl[0] = 0.042;

    newer.respond(newerPayload);
    await app.settled();
    expect(q<HTMLDivElement>(root, ".posterior-chart").innerHTML).toContain("0.0990");

    older.respond(olderPayload); // the stale reply lands after the fresh one
    await app.settled();
    await vi.advanceTimersByTimeAsync(50);

    const markup = q<HTMLDivElement>(root, ".posterior-chart").innerHTML;
    expect(markup).toContain("0.0990");
    expect(markup).not.toContain("0.0420");
    expect(q<HTMLSpanElement>(root, ".busy-note").textContent).toBe("");
  });
});

describe("shareable state", () => {
  it("reproduces the identical render and controls from the URL fragment", async () => {
    const first = newApp();
    await drain(first.app);
    addStudyViews(first.root);
    setInput(q<HTMLInputElement>(rows(first.root)[0], ".view-confidence"), "0.75");
    setInput(q<HTMLInputElement>(first.root, ".tau-input"), "0.05");
    setInput(q<HTMLInputElement>(first.root, ".bound-max"), "0.15");
    click(q(first.root, ".apply-bounds"));
    await drain(first.app);

    const fragment = first.box.fragment;
    expect(fragment.length).toBeGreaterThan(0);

    const second = newApp({ fragment });
    await drain(second.app);

    for (const chart of [".posterior-chart", ".allocation-chart", ".frontier-chart"]) {
      expect(q<HTMLDivElement>(second.root, chart).innerHTML).toBe(
        q<HTMLDivElement>(first.root, chart).innerHTML,
      );
    }
    expect(controlValues(second.root)).toEqual(controlValues(first.root));
    expect(q<HTMLSpanElement>(second.root, ".status-line").textContent).toBe(
      q<HTMLSpanElement>(first.root, ".status-line").textContent,
    );
    expect(second.box.fragment).toBe(fragment); // the fragment is canonical
    expect(second.app.state()).toEqual(first.app.state());
  });
});

function controlValues(root: ParentNode): string[] {
  const selector = ".view-row select, .view-row input, .tau-input, .bound-min, .bound-max";
  return [...root.querySelectorAll<HTMLInputElement | HTMLSelectElement>(selector)].map((el) => {
    // typed "0.10" and restored "0.1" are the same state; compare numerically
    const value =
      el instanceof HTMLInputElement && el.value !== "" && Number.isFinite(parseFloat(el.value))
        ? String(parseFloat(el.value))
        : el.value;
    return `${el.className}=${value}`;
  });
}
