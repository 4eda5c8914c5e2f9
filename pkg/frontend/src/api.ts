/** Thin HTTP client: exactly one endpoint per user-visible action. */

import type { Envelope, FieldRef, TreeDoc } from "./types.js";

export type StepActionKind = "execute" | "refine" | "edit" | "regenerate";

export class ApiError extends Error {
  readonly code: string;
  readonly status: number;

  constructor(status: number, code: string, message: string) {
    super(message);
    this.code = code;
    this.status = status;
  }
}

async function parse<T>(response: Response): Promise<T> {
  const body = (await response.json()) as T & {
    error?: { status: number; code: string; message: string };
  };
  if (!response.ok) {
    const err = body.error ?? {
      status: response.status,
      code: "internal_error",
      message: response.statusText,
    };
    throw new ApiError(err.status, err.code, err.message);
  }
  return body;
}

export class ApiClient {
  constructor(private readonly base: string = "") {}

  private post<T>(path: string, body?: unknown): Promise<T> {
    return fetch(`${this.base}${path}`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: body === undefined ? "{}" : JSON.stringify(body),
    }).then((r) => parse<T>(r));
  }

  private get<T>(path: string): Promise<T> {
    return fetch(`${this.base}${path}`).then((r) => parse<T>(r));
  }

  createSession(tables: string[], knowledge: string): Promise<Envelope> {
    return this.post("/sessions", { tables, knowledge });
  }

  getSession(id: string): Promise<Envelope> {
    return this.get(`/sessions/${id}`);
  }

  submitQuestion(id: string, question: string): Promise<Envelope> {
    return this.post(`/sessions/${id}/question`, { question });
  }

  correctMapping(id: string, mentionId: string, fields: FieldRef[]): Promise<Envelope> {
    return this.post(`/sessions/${id}/mappings/${mentionId}`, { fields });
  }

  confirmIntent(id: string): Promise<Envelope> {
    return this.post(`/sessions/${id}/confirm`);
  }

  stepAction(
    id: string,
    stepId: string,
    kind: StepActionKind,
    body?: { explanation?: string | null; sql?: string | null },
  ): Promise<Envelope> {
    return this.post(`/sessions/${id}/steps/${stepId}/${kind}`, body);
  }

  finalize(id: string): Promise<Envelope> {
    return this.post(`/sessions/${id}/finalize`);
  }

  reopen(id: string): Promise<Envelope> {
    return this.post(`/sessions/${id}/reopen`);
  }

  tree(id: string): Promise<{ session: unknown; action_result: { tree: TreeDoc } }> {
    return this.get(`/sessions/${id}/tree`);
  }

  schemaPanel(id: string, keyword: string): Promise<Envelope> {
    const suffix = keyword ? `?keyword=${encodeURIComponent(keyword)}` : "";
    return this.get(`/sessions/${id}/schema${suffix}`);
  }
}
