// @vitest-environment node
//
// Round trip against the real prediction service: spawn it on a local
// port, drive the mounted form with a real DOM implementation, and let
// actual HTTP flow between them.

import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { Window } from "happy-dom";

import { fetchHealth, predict, type FetchLike } from "../src/api";
import { mount } from "../src/app";
import { until } from "./helpers";
import { startService, type LiveService } from "./live";

const PORT = 8900 + (process.pid % 80);
let BASE = "";

const realFetch: FetchLike = (url, init) => fetch(url, init);

let service: LiveService | undefined;

beforeAll(async () => {
  service = await startService(PORT);
  BASE = service.base;
});

afterAll(async () => {
  await service?.stop();
});

function freshDom(): { root: HTMLElement; window: Window } {
  const window = new Window({ url: BASE });
  const document = window.document as unknown as Document;
  document.body.innerHTML = '<div id="app"></div>';
  return { root: document.getElementById("app") as HTMLElement, window };
}

function setValue(root: HTMLElement, selector: string, value: string): void {
  (root.querySelector(selector) as HTMLInputElement).value = value;
}

describe("api client against the live service", () => {
  it("reads health", async () => {
    const health = await fetchHealth(BASE, realFetch);
    expect(health.status).toBe("ok");
    expect(health.templateVersion).not.toBe("unavailable");
    expect(health.backendName).toBe("mock");
  });

  it("gets a verdict for a 2003 paper", async () => {
    const view = await predict(
      {
        title: "Adaptive thresholds for sparse signal recovery",
        abstract: "We study adaptive thresholding rules.",
        keywords: ["sparsity", "thresholding"],
        year: 2003,
        journal: "Journal of Synthetic Examples",
      },
      BASE,
      realFetch,
    );
    expect(["Positive", "Negative"]).toContain(view.verdict);
    expect(view.group).toBe("2001-2005");
    expect(view.disclaimer).toContain(
      "hiring, funding, or editorial decisions",
    );
  });
});

describe("form round trip against the live service", () => {
  it("renders a verdict with the disclaimer", async () => {
    const { root, handle } = mountLive();
    fill(root, "2003");
    (root.querySelector("#submit") as HTMLButtonElement).click();
    await until(() => root.dataset.status === "done", 15000);

    const verdict = root.querySelector("#verdict") as HTMLElement;
    expect([
      "Likely to become highly cited",
      "Unlikely to become highly cited",
    ]).toContain(verdict.textContent);
    expect(root.querySelector("#result-meta")?.textContent).toContain(
      "2001-2005",
    );
    const disclaimer = root.querySelector("#disclaimer")?.textContent ?? "";
    expect(disclaimer).toContain("publication-time text");
    expect(disclaimer).toContain("hiring, funding, or editorial decisions");
    await handle.healthChecked;
    expect(root.querySelector("#health-line")?.textContent).toContain(
      "service: ok",
    );
  });

  it("returns the same verdict for the same entries", async () => {
    const first = mountLive();
    fill(first.root, "2003");
    await first.handle.submit();
    const second = mountLive();
    fill(second.root, "2003");
    await second.handle.submit();
    const verdictOf = (root: HTMLElement) =>
      (root.querySelector("#verdict") as HTMLElement).dataset.verdict;
    expect(verdictOf(first.root)).toBe(verdictOf(second.root));
  });

  it("routes future years to the forecast window", async () => {
    const { root, handle } = mountLive();
    fill(root, "2077");
    await handle.submit();
    expect(root.dataset.status).toBe("done");
    expect(root.querySelector("#result-meta")?.textContent).toContain(
      "2021-2023",
    );
  });

  function mountLive() {
    const { root } = freshDom();
    const handle = mount(root, { baseUrl: BASE, fetchFn: realFetch });
    return { root, handle };
  }

  function fill(root: HTMLElement, year: string): void {
    setValue(root, "#title", "Adaptive thresholds for sparse signal recovery");
    setValue(
      root,
      "#abstract",
      "We study adaptive thresholding rules for sparse signals.",
    );
    setValue(root, "#keywords", "adaptive estimation; sparsity");
    setValue(root, "#year", year);
    setValue(root, "#journal", "Journal of Synthetic Examples");
  }
});
