// Typed fetch wrappers over the annotation service HTTP API.

import type {
  AgreementResult,
  AnnotationBody,
  Progress,
  SubmitAck,
  Task
} from "./types";

/** Server-reported failure: carries the HTTP status and the error message. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string
  ) {
    super(message);
    this.name = "ApiError";
  }
}

async function errorFrom(response: Response): Promise<ApiError> {
  let message = `HTTP ${response.status}`;
  try {
    const body = (await response.json()) as { error?: unknown };
    if (typeof body.error === "string") message = body.error;
  } catch {
    // non-JSON error body: keep the status line
  }
  return new ApiError(response.status, message);
}

export class ApiClient {
  /** baseUrl is "" when the bundle is served by the backend itself. */
  constructor(private readonly baseUrl: string = "") {}

  url(path: string): string {
    return this.baseUrl + path;
  }

  private async getJson<T>(path: string): Promise<T> {
    const response = await fetch(this.url(path));
    if (!response.ok) throw await errorFrom(response);
    return (await response.json()) as T;
  }

  async nextTask(annotatorId: string): Promise<Task | null> {
    const body = await this.getJson<{ task: Task | null }>(
      `/api/annotators/${encodeURIComponent(annotatorId)}/next`
    );
    return body.task;
  }

  /** Raw clip bytes; the server serves a byte range of the recording. */
  async clip(clipUrl: string): Promise<ArrayBuffer> {
    const response = await fetch(this.url(clipUrl));
    if (!response.ok) throw await errorFrom(response);
    return await response.arrayBuffer();
  }

  async submit(record: AnnotationBody): Promise<SubmitAck> {
    const response = await fetch(this.url("/api/annotations"), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(record)
    });
    if (!response.ok) throw await errorFrom(response);
    return (await response.json()) as SubmitAck;
  }

  async agreement(
    a: string,
    b: string,
    field: "emotion" | "sentiment"
  ): Promise<AgreementResult> {
    const query = new URLSearchParams({ a, b, field });
    return await this.getJson<AgreementResult>(`/api/agreement?${query}`);
  }

  async progress(): Promise<Progress> {
    return await this.getJson<Progress>("/api/progress");
  }
}
