import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";
import { CONFIG_HASH, FakeBackend, click, drain, newApp, q, setInput, setSelect } from "./helpers.js";

beforeEach(() => {
  vi.useFakeTimers();
});

afterEach(() => {
  vi.useRealTimers();
  document.body.innerHTML = "";
});

describe("boot", () => {
  it("renders all three charts and the service identity line", async () => {
    const { app, root } = newApp();
    await drain(app);
    expect(q<HTMLDivElement>(root, ".posterior-chart").innerHTML).toContain("REST");
    expect(q<HTMLDivElement>(root, ".allocation-chart").innerHTML).toContain("0.500");
    expect(q<HTMLDivElement>(root, ".frontier-chart").innerHTML).toContain("GMV vol");
    expect(q<HTMLSpanElement>(root, ".status-line").textContent).toBe(
      `config ${CONFIG_HASH.slice(0, 12)} seed 7`,
    );
    expect(q<HTMLDivElement>(root, ".banner").hidden).toBe(true);
  });

  it("shows a retry banner when the asset listing cannot be fetched, and recovers", async () => {
    const backend = new FakeBackend();
    backend.failNext("/assets", "network");
    const { app, root } = newApp({ backend });
    await drain(app);
    const banner = q<HTMLDivElement>(root, ".banner");
    expect(banner.hidden).toBe(false);
    expect(q<HTMLSpanElement>(root, ".banner-message").textContent).toMatch(/network failure/);

    click(q(root, ".banner-retry"));
    await drain(app);
    expect(q<HTMLDivElement>(root, ".banner").hidden).toBe(true);
    expect(q<HTMLDivElement>(root, ".posterior-chart").innerHTML).toContain("svg");
  });
});

describe("view editing", () => {
  it("coalesces rapid slider movement into a single request", async () => {
    const { app, root, backend } = newApp();
    await drain(app);
    click(q(root, ".add-view"));
    await drain(app);
    const before = backend.callsTo("/blacklitterman").length;

    const slider = q<HTMLInputElement>(root, ".view-confidence");
    setInput(slider, "0.9");
    setInput(slider, "0.2");
    setInput(slider, "0.7");
    await drain(app);

    expect(backend.callsTo("/blacklitterman").length).toBe(before + 1);
    const body = backend.bodyOfLast("/blacklitterman");
    expect(body.views[0].omega_scale).toBeCloseTo(10 ** (2 - 4 * 0.7), 12);
  });

  it("flags an incomplete draft inline and keeps it out of the request", async () => {
    const { app, root, backend } = newApp();
    await drain(app);
    click(q(root, ".add-view"));
    setSelect(q<HTMLSelectElement>(root, ".view-asset-b"), "TSLA"); // same as asset A
    await drain(app);

    expect(q<HTMLSpanElement>(root, ".view-error").textContent).toMatch(/distinct/);
    expect(backend.bodyOfLast("/blacklitterman")).toEqual({ views: [] });
  });

  it("pins a service 4xx next to the view it names", async () => {
    const { app, root, backend } = newApp();
    await drain(app);
    click(q(root, ".add-view"));
    setSelect(q<HTMLSelectElement>(root, ".view-asset-a"), "AAPL");
    backend.failNext("/blacklitterman", {
      status: 400,
      code: "data",
      message: "unknown asset 'AAPL' in view",
    });
    await drain(app);

    expect(q<HTMLSpanElement>(root, ".view-error").textContent).toBe("unknown asset 'AAPL' in view");
    expect(q<HTMLDivElement>(root, ".banner").hidden).toBe(true);
  });

  it("offers a retry after a network failure and recovers on click", async () => {
    const { app, root, backend } = newApp();
    await drain(app);
    backend.failNext("/blacklitterman", "network");
    setInput(q<HTMLInputElement>(root, ".tau-input"), "0.05");
    await drain(app);

    const banner = q<HTMLDivElement>(root, ".banner");
    expect(banner.hidden).toBe(false);
    expect(q<HTMLButtonElement>(root, ".banner-retry").hidden).toBe(false);
    const failedCalls = backend.callsTo("/blacklitterman").length;

    click(q(root, ".banner-retry"));
    await drain(app);
    expect(backend.callsTo("/blacklitterman").length).toBe(failedCalls + 1);
    expect(q<HTMLDivElement>(root, ".banner").hidden).toBe(true);
    expect(backend.bodyOfLast("/blacklitterman")).toEqual({ views: [], tau: 0.05 });
  });

  it("rejects a non-positive tau locally without touching the session", async () => {
    const { app, root, backend } = newApp();
    await drain(app);
    const before = backend.callsTo("/blacklitterman").length;
    setInput(q<HTMLInputElement>(root, ".tau-input"), "-2");
    await drain(app);

    expect(q<HTMLSpanElement>(root, ".tau-error").textContent).toMatch(/positive/);
    expect(app.state().tau).toBeNull();
    expect(backend.callsTo("/blacklitterman").length).toBe(before);
  });
});

describe("frontier bounds", () => {
  it("disables Apply with an explanation when the cap cannot reach full investment", async () => {
    const { app, root } = newApp();
    await drain(app);
    setInput(q<HTMLInputElement>(root, ".bound-max"), "0.05");

    expect(q<HTMLButtonElement>(root, ".apply-bounds").disabled).toBe(true);
    expect(q<HTMLSpanElement>(root, ".bounds-note").textContent).toMatch(
      /cannot reach a total weight of 1/,
    );

    setInput(q<HTMLInputElement>(root, ".bound-max"), "0.15");
    expect(q<HTMLButtonElement>(root, ".apply-bounds").disabled).toBe(false);
    expect(q<HTMLSpanElement>(root, ".bounds-note").textContent).toBe("");
  });

  it("explains floors that overshoot full investment", async () => {
    const { app, root } = newApp();
    await drain(app);
    setInput(q<HTMLInputElement>(root, ".bound-min"), "0.2");
    expect(q<HTMLButtonElement>(root, ".apply-bounds").disabled).toBe(true);
    expect(q<HTMLSpanElement>(root, ".bounds-note").textContent).toMatch(/above 1/);
  });

  it("applies feasible bounds and requests both curves", async () => {
    const { app, root, backend } = newApp();
    await drain(app);
    setInput(q<HTMLInputElement>(root, ".bound-max"), "0.15");
    click(q(root, ".apply-bounds"));
    await drain(app);

    expect(backend.bodyOfLast("/frontier")).toEqual({
      bounds: { lower: 0, upper: 0.15 },
      include_unconstrained: true,
    });
    expect(q<HTMLDivElement>(root, ".frontier-chart").innerHTML).toContain("frontier-unconstrained");
  });

  it("surfaces a server-side rejection in the bounds note", async () => {
    const { app, root, backend } = newApp();
    await drain(app);
    setInput(q<HTMLInputElement>(root, ".bound-max"), "0.1"); // passes the local check exactly
    backend.failNext("/frontier", {
      status: 422,
      code: "infeasible",
      message: "bounds leave no feasible portfolio",
    });
    click(q(root, ".apply-bounds"));
    await drain(app);

    expect(q<HTMLSpanElement>(root, ".bounds-note").textContent).toBe(
      "bounds leave no feasible portfolio",
    );
    expect(q<HTMLDivElement>(root, ".banner").hidden).toBe(true);
  });
});
