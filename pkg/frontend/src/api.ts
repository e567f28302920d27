/** Thin typed client for the analysis HTTP API. */
import type { ChartPayload, OverrideScoreBody, TreeDict } from "./types.js";
import type { OverrideDialogState } from "./overrideDialog.js";
import { buildOverrideBody } from "./overrideDialog.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
  ) {
    super(message);
  }
}

export class ApiClient {
  constructor(
    private baseUrl: string,
    private fetchImpl: FetchLike = fetch,
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method, headers: { "content-type": "application/json" } };
    if (body !== undefined) init.body = JSON.stringify(body);
    const resp = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    const data = (await resp.json()) as Record<string, unknown>;
    if (!resp.ok) {
      throw new ApiError(resp.status, String(data["error"] ?? resp.status));
    }
    return data as T;
  }

  createSession(goal: string, corpus: unknown[], config?: Record<string, unknown>) {
    return this.request<{ id: string }>("POST", "/sessions", { goal, corpus, config });
  }

  getSession(id: string) {
    return this.request<{ tree: TreeDict | null }>("GET", `/sessions/${id}`);
  }

  searchAction(id: string, action: "start" | "run" | "pause" | "step") {
    return this.request<Record<string, unknown>>("POST", `/sessions/${id}/search/${action}`);
  }

  /** Submit the score-override dialog. Posts the exact documented body. */
  overrideScore(id: string, dialog: OverrideDialogState) {
    const body: OverrideScoreBody = buildOverrideBody(dialog);
    return this.request<{ updated: string[] }>("POST", `/sessions/${id}/tree/override_score`, body);
  }

  selectPlan(id: string, leafId: string) {
    return this.request<{ plan: string[] }>("POST", `/sessions/${id}/tree/select_plan`, {
      leaf_id: leafId,
    });
  }

  deleteSubtree(id: string, nodeId: string) {
    return this.request<{ removed: string[] }>("POST", `/sessions/${id}/tree/delete`, {
      node_id: nodeId,
    });
  }

  convert(id: string) {
    return this.request<{ tasks: { id: string }[] }>("POST", `/sessions/${id}/pipeline/convert`);
  }

  compile(id: string, taskId: string) {
    return this.request<Record<string, unknown>>("POST", `/sessions/${id}/pipeline/${taskId}/compile`);
  }

  execute(id: string, taskId: string) {
    return this.request<Record<string, unknown>>("POST", `/sessions/${id}/pipeline/${taskId}/execute`);
  }

  createEvaluator(id: string, taskId: string, description: string) {
    return this.request<{ id: string }>("POST", `/sessions/${id}/evaluators`, {
      task_id: taskId,
      description,
    });
  }

  runEvaluator(id: string, evaluatorId: string) {
    return this.request<Record<string, unknown>>("POST", `/sessions/${id}/evaluators/${evaluatorId}/run`);
  }

  assignTopics(id: string) {
    return this.request<Record<string, unknown>>("POST", `/sessions/${id}/topics`, {});
  }

  topicsChart(id: string) {
    return this.request<ChartPayload>("GET", `/sessions/${id}/charts/topics`);
  }

  evaluationChart(id: string, evaluatorId: string) {
    return this.request<ChartPayload>(
      "GET",
      `/sessions/${id}/charts/evaluation?evaluator=${encodeURIComponent(evaluatorId)}`,
    );
  }
}

export interface SseEvent {
  id: number;
  event: string;
  data: unknown;
}

/** Parse complete text/event-stream blocks (separated by blank lines). */
export function parseSseBlocks(text: string): SseEvent[] {
  const events: SseEvent[] = [];
  const blocks = text.split("\n\n");
  blocks.pop(); // the remainder after the last separator is incomplete
  for (const block of blocks) {
    if (!block.trim()) continue;
    let id = -1;
    let event = "message";
    let data = "";
    for (const line of block.split("\n")) {
      if (line.startsWith("id: ")) id = Number(line.slice(4));
      else if (line.startsWith("event: ")) event = line.slice(7);
      else if (line.startsWith("data: ")) data += line.slice(6);
    }
    if (id >= 0) events.push({ id, event, data: data ? JSON.parse(data) : null });
  }
  return events;
}
