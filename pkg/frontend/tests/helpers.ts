import type { FetchInitLike, FetchLike, FetchResponseLike } from "../src/api";

export interface RecordedCall {
  url: string;
  init?: FetchInitLike;
}

export const jsonResponse = (
  status: number,
  body: unknown,
): FetchResponseLike => ({
  status,
  json: async () => body,
});

export const healthBody = {
  status: "ok",
  backend: "mock",
  template_version: "v1",
  uptime_seconds: 0.1,
  version: "0.1.0",
};

export const verdictBody = {
  verdict: "Positive",
  group: "2001-2005",
  backend: "mock",
  template_version: "v1",
  disclaimer:
    "Automated estimate based only on publication-time text. It is not " +
    "a measure of scientific quality or validity, and it must not be " +
    "used as the basis for hiring, funding, or editorial decisions.",
};

export interface FakeService {
  fetchFn: FetchLike;
  calls: RecordedCall[];
  predictCalls: RecordedCall[];
}

// Routes /health to a canned body and serves /predict from a queue of
// step functions. Running out of steps is a test failure.
export function fakeService(
  predictSteps: Array<(call: RecordedCall) => Promise<FetchResponseLike>>,
  health: () => FetchResponseLike = () => jsonResponse(200, healthBody),
): FakeService {
  const calls: RecordedCall[] = [];
  const predictCalls: RecordedCall[] = [];
  const fetchFn: FetchLike = async (url, init) => {
    const call = { url, init };
    calls.push(call);
    if (url.endsWith("/health")) {
      return health();
    }
    if (url.endsWith("/predict")) {
      predictCalls.push(call);
      const step = predictSteps.shift();
      if (!step) {
        throw new Error(`no scripted response left for ${url}`);
      }
      return step(call);
    }
    throw new Error(`unexpected request to ${url}`);
  };
  return { fetchFn, calls, predictCalls };
}

export function deferred<T>() {
  let resolve!: (value: T) => void;
  let reject!: (reason?: unknown) => void;
  const promise = new Promise<T>((res, rej) => {
    resolve = res;
    reject = rej;
  });
  return { promise, resolve, reject };
}

export async function until(
  check: () => boolean,
  timeoutMs = 5000,
): Promise<void> {
  const start = Date.now();
  while (!check()) {
    if (Date.now() - start > timeoutMs) {
      throw new Error("condition not met in time");
    }
    await new Promise((resolve) => setTimeout(resolve, 10));
  }
}

export const validEntries = {
  title: "Adaptive thresholds for sparse signal recovery",
  abstract: "We study adaptive thresholding rules for sparse signals.",
  keywords: "adaptive estimation; sparsity; thresholding",
  year: "2003",
  journal: "Journal of Synthetic Examples",
};

export function fillForm(
  root: HTMLElement,
  entries: Partial<typeof validEntries> = {},
): void {
  const values = { ...validEntries, ...entries };
  (root.querySelector("#title") as HTMLInputElement).value = values.title;
  (root.querySelector("#abstract") as HTMLTextAreaElement).value =
    values.abstract;
  (root.querySelector("#keywords") as HTMLInputElement).value =
    values.keywords;
  (root.querySelector("#year") as HTMLInputElement).value = values.year;
  (root.querySelector("#journal") as HTMLInputElement).value = values.journal;
}
