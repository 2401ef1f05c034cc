// HTTP client for the session service, plus a revision-tracking controller.

import type {
  ActionPayload,
  QuestionnaireResult,
  QuestionnaireSubmission,
  SessionKind,
  SessionState,
  TaskInfo,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

export class StaleRevisionError extends ApiError {
  constructor(detail: string) {
    super(409, detail);
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

async function parseError(response: Response): Promise<string> {
  try {
    const body = await response.json();
    return typeof body.detail === "string" ? body.detail : JSON.stringify(body.detail);
  } catch {
    return response.statusText;
  }
}

export class SegGaugeClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
      headers: { "Content-Type": "application/json" },
      ...init,
    });
    if (!response.ok) {
      const detail = await parseError(response);
      if (response.status === 409) throw new StaleRevisionError(detail);
      throw new ApiError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  listTasks(): Promise<TaskInfo[]> {
    return this.request<TaskInfo[]>("/tasks");
  }

  taskImageUrl(taskId: string): string {
    return `${this.baseUrl}/tasks/${taskId}/image`;
  }

  createSession(taskId: string, kind: SessionKind, userId: string): Promise<SessionState> {
    return this.request<SessionState>("/sessions", {
      method: "POST",
      body: JSON.stringify({ task_id: taskId, kind, user_id: userId }),
    });
  }

  getState(sessionId: string, includeMask = false): Promise<SessionState> {
    const query = includeMask ? "?include_mask=true" : "";
    return this.request<SessionState>(`/sessions/${sessionId}/state${query}`);
  }

  applyAction(
    sessionId: string,
    revision: number,
    action: ActionPayload,
    interactionMs = 0,
  ): Promise<SessionState> {
    return this.request<SessionState>(`/sessions/${sessionId}/actions`, {
      method: "POST",
      body: JSON.stringify({ revision, action, interaction_ms: interactionMs }),
    });
  }

  finish(sessionId: string, revision: number, interactionMs = 0): Promise<SessionState> {
    return this.request<SessionState>(`/sessions/${sessionId}/finish`, {
      method: "POST",
      body: JSON.stringify({ revision, interaction_ms: interactionMs }),
    });
  }

  submitQuestionnaire(payload: QuestionnaireSubmission): Promise<QuestionnaireResult> {
    return this.request<QuestionnaireResult>("/questionnaires", {
      method: "POST",
      body: JSON.stringify(payload),
    });
  }
}

/**
 * Tracks the server revision for one session and resolves optimistic
 * concurrency conflicts by refetching state and replaying the action once.
 */
export class SessionController {
  private state_: SessionState;

  constructor(
    private readonly client: SegGaugeClient,
    initial: SessionState,
  ) {
    this.state_ = initial;
  }

  get state(): SessionState {
    return this.state_;
  }

  get finished(): boolean {
    return this.state_.finished;
  }

  async refresh(): Promise<SessionState> {
    this.state_ = await this.client.getState(this.state_.session_id);
    return this.state_;
  }

  async apply(action: ActionPayload, interactionMs = 0): Promise<SessionState> {
    try {
      this.state_ = await this.client.applyAction(
        this.state_.session_id,
        this.state_.revision,
        action,
        interactionMs,
      );
    } catch (error) {
      if (!(error instanceof StaleRevisionError)) throw error;
      await this.refresh();
      this.state_ = await this.client.applyAction(
        this.state_.session_id,
        this.state_.revision,
        action,
        interactionMs,
      );
    }
    return this.state_;
  }

  async finish(interactionMs = 0): Promise<SessionState> {
    this.state_ = await this.client.finish(
      this.state_.session_id,
      this.state_.revision,
      interactionMs,
    );
    return this.state_;
  }
}
