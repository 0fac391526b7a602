// Thin fetch client for the decorkit HTTP API. Errors from the service
// ({"error": {type, message}}) surface as ApiError with the message verbatim.

import type {
  EditOp,
  EditResponse,
  JobBody,
  JobResponse,
  MetricsResponse,
  SceneResponse,
} from "./types.js";

export class ApiError extends Error {
  readonly status: number;
  readonly kind: string;

  constructor(status: number, kind: string, message: string) {
    super(message);
    this.status = status;
    this.kind = kind;
  }
}

async function httpJson<T>(url: string, init?: RequestInit): Promise<T> {
  const res = await fetch(url, {
    headers: { "Content-Type": "application/json" },
    ...init,
  });
  const text = await res.text();
  let body: any = null;
  try {
    body = text ? JSON.parse(text) : null;
  } catch {
    body = null;
  }
  if (!res.ok) {
    const err = body?.error ?? body?.detail ?? null;
    const kind = typeof err === "object" && err ? err.type ?? "Error" : "Error";
    const message =
      typeof err === "object" && err
        ? err.message ?? JSON.stringify(err)
        : typeof err === "string"
          ? err
          : `HTTP ${res.status}`;
    throw new ApiError(res.status, kind, message);
  }
  return body as T;
}

function base(baseUrl: string): string {
  return baseUrl.replace(/\/$/, "");
}

export async function createJob(
  baseUrl: string,
  body: JobBody,
): Promise<JobResponse> {
  return httpJson<JobResponse>(`${base(baseUrl)}/jobs`, {
    method: "POST",
    body: JSON.stringify(body),
  });
}

export async function getJob(baseUrl: string, jobId: string) {
  return httpJson<SceneResponse & { job_id: string; status: string }>(
    `${base(baseUrl)}/jobs/${encodeURIComponent(jobId)}`,
  );
}

export async function getScene(
  baseUrl: string,
  sceneId: string,
  rev?: number,
): Promise<SceneResponse> {
  const q = rev === undefined ? "" : `?rev=${rev}`;
  return httpJson<SceneResponse>(
    `${base(baseUrl)}/scenes/${encodeURIComponent(sceneId)}${q}`,
  );
}

export async function submitInstruction(
  baseUrl: string,
  sceneId: string,
  instruction: string,
): Promise<EditResponse> {
  return httpJson<EditResponse>(
    `${base(baseUrl)}/scenes/${encodeURIComponent(sceneId)}/edits`,
    { method: "POST", body: JSON.stringify({ instruction }) },
  );
}

export async function submitOps(
  baseUrl: string,
  sceneId: string,
  ops: EditOp[],
): Promise<EditResponse> {
  return httpJson<EditResponse>(
    `${base(baseUrl)}/scenes/${encodeURIComponent(sceneId)}/edits`,
    { method: "POST", body: JSON.stringify({ ops }) },
  );
}

export async function getMetrics(
  baseUrl: string,
  sceneId: string,
  rev?: number,
): Promise<MetricsResponse> {
  const q = rev === undefined ? "" : `?rev=${rev}`;
  return httpJson<MetricsResponse>(
    `${base(baseUrl)}/scenes/${encodeURIComponent(sceneId)}/metrics${q}`,
  );
}

export function svgUrl(
  baseUrl: string,
  sceneId: string,
  surface: number,
  rev?: number,
): string {
  const revQ = rev === undefined ? "" : `&rev=${rev}`;
  return `${base(baseUrl)}/scenes/${encodeURIComponent(sceneId)}/svg?surface=${surface}${revQ}`;
}
