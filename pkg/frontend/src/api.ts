// Thin client for the prediction service. The whole surface is two
// endpoints: POST /predict and GET /health.

export interface PredictRequestBody {
  title: string;
  abstract: string;
  keywords: string[];
  year: number;
  journal: string;
}

export interface VerdictView {
  verdict: string;
  group: string;
  backend: string;
  templateVersion: string;
  disclaimer: string;
}

export interface HealthView {
  status: string;
  backendName: string;
  templateVersion: string;
}

// Structural subset of fetch, so tests can script responses without a
// real Response object.
export interface FetchResponseLike {
  status: number;
  json(): Promise<unknown>;
}

export interface FetchInitLike {
  method?: string;
  headers?: Record<string, string>;
  body?: string;
}

export type FetchLike = (
  url: string,
  init?: FetchInitLike,
) => Promise<FetchResponseLike>;

export const defaultFetch: FetchLike = (url, init) => fetch(url, init);

export type ServiceErrorKind = "network" | "validation" | "backend";

export class ServiceError extends Error {
  readonly kind: ServiceErrorKind;
  readonly retryable: boolean;
  readonly status?: number;
  readonly fieldErrors: Record<string, string>;

  constructor(
    kind: ServiceErrorKind,
    message: string,
    options: {
      retryable: boolean;
      status?: number;
      fieldErrors?: Record<string, string>;
    },
  ) {
    super(message);
    this.name = "ServiceError";
    this.kind = kind;
    this.retryable = options.retryable;
    this.status = options.status;
    this.fieldErrors = options.fieldErrors ?? {};
  }
}

function joinUrl(baseUrl: string, path: string): string {
  return baseUrl.replace(/\/+$/, "") + path;
}

function asRecord(value: unknown): Record<string, unknown> {
  if (typeof value !== "object" || value === null || Array.isArray(value)) {
    throw new ServiceError("backend", "unexpected response from the service", {
      retryable: true,
    });
  }
  return value as Record<string, unknown>;
}

function readString(body: Record<string, unknown>, key: string): string {
  const value = body[key];
  if (typeof value !== "string") {
    throw new ServiceError(
      "backend",
      `unexpected response from the service (missing ${key})`,
      { retryable: true },
    );
  }
  return value;
}

async function readDetail(response: FetchResponseLike): Promise<unknown> {
  try {
    const body = await response.json();
    if (typeof body === "object" && body !== null && "detail" in body) {
      return (body as Record<string, unknown>).detail;
    }
  } catch {
    // non-JSON error body; fall through to a generic message
  }
  return undefined;
}

// Pydantic reports body errors as [{loc: ["body", "title"], msg, ...}].
// The string form covers the service's own range checks.
function fieldErrorsFrom(detail: unknown): Record<string, string> {
  const errors: Record<string, string> = {};
  if (typeof detail === "string") {
    if (detail.includes("year")) {
      errors.year = detail;
    }
    return errors;
  }
  if (!Array.isArray(detail)) {
    return errors;
  }
  for (const item of detail) {
    if (typeof item !== "object" || item === null) continue;
    const entry = item as Record<string, unknown>;
    const loc = Array.isArray(entry.loc) ? entry.loc : [];
    const names = loc.filter(
      (part): part is string => typeof part === "string" && part !== "body",
    );
    const field = names[names.length - 1];
    if (!field) continue;
    const raw = typeof entry.msg === "string" ? entry.msg : "invalid value";
    errors[field] = raw.replace(/^Value error,\s*/, "");
  }
  return errors;
}

export async function predict(
  request: PredictRequestBody,
  baseUrl: string,
  fetchFn: FetchLike = defaultFetch,
): Promise<VerdictView> {
  let response: FetchResponseLike;
  try {
    response = await fetchFn(joinUrl(baseUrl, "/predict"), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(request),
    });
  } catch {
    throw new ServiceError("network", "could not reach the prediction service", {
      retryable: true,
    });
  }

  if (response.status === 200) {
    const body = asRecord(await response.json());
    return {
      verdict: readString(body, "verdict"),
      group: readString(body, "group"),
      backend: readString(body, "backend"),
      templateVersion: readString(body, "template_version"),
      disclaimer: readString(body, "disclaimer"),
    };
  }

  const detail = await readDetail(response);
  if (response.status === 422) {
    const message =
      typeof detail === "string" ? detail : "the service rejected the submission";
    throw new ServiceError("validation", message, {
      retryable: false,
      status: 422,
      fieldErrors: fieldErrorsFrom(detail),
    });
  }
  const message =
    typeof detail === "string" && detail
      ? detail
      : `service error (HTTP ${response.status})`;
  throw new ServiceError("backend", message, {
    retryable: true,
    status: response.status,
  });
}

export async function fetchHealth(
  baseUrl: string,
  fetchFn: FetchLike = defaultFetch,
): Promise<HealthView> {
  let response: FetchResponseLike;
  try {
    response = await fetchFn(joinUrl(baseUrl, "/health"));
  } catch {
    throw new ServiceError("network", "could not reach the prediction service", {
      retryable: true,
    });
  }
  if (response.status !== 200) {
    throw new ServiceError("backend", `service error (HTTP ${response.status})`, {
      retryable: true,
      status: response.status,
    });
  }
  const body = asRecord(await response.json());
  return {
    status: readString(body, "status"),
    backendName: readString(body, "backend"),
    templateVersion: readString(body, "template_version"),
  };
}
