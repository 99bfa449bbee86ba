import type {
  CostSummary,
  EventsSlice,
  InstanceSnapshot,
  InstanceSummary,
  WorklistItem,
} from "./types.js";

/** Error body the API guarantees: every failure carries a stable code. */
export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly baseUrl = "",
    private readonly fetchImpl: FetchLike = (input, init) => globalThis.fetch(input, init),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    let response: Response;
    try {
      response = await this.fetchImpl(this.baseUrl + path, init);
    } catch (err) {
      throw new ApiError(0, "ConnectionError", String(err));
    }
    const text = await response.text();
    const data = text ? JSON.parse(text) : null;
    if (!response.ok) {
      throw new ApiError(response.status, data?.code ?? "HttpError", data?.error ?? text);
    }
    return data as T;
  }

  listInstances(): Promise<{ instances: InstanceSummary[] }> {
    return this.request("GET", "/instances");
  }

  getInstance(instanceId: string): Promise<InstanceSnapshot> {
    return this.request("GET", `/instances/${encodeURIComponent(instanceId)}`);
  }

  getWorklist(role?: string, instanceId?: string): Promise<{ tasks: WorklistItem[] }> {
    const params = new URLSearchParams();
    if (role) params.set("role", role);
    if (instanceId) params.set("instance", instanceId);
    const query = params.toString();
    return this.request("GET", "/tasks" + (query ? `?${query}` : ""));
  }

  completeTask(taskId: string, role: string, decisionLabel?: string): Promise<unknown> {
    const body: Record<string, string> = { role };
    if (decisionLabel !== undefined) body.decision_label = decisionLabel;
    return this.request("POST", `/tasks/${encodeURIComponent(taskId)}/complete`, body);
  }

  getEvents(instanceId: string, fromSeq: number): Promise<EventsSlice> {
    return this.request(
      "GET",
      `/instances/${encodeURIComponent(instanceId)}/events?from_seq=${fromSeq}`,
    );
  }

  getCosts(): Promise<CostSummary> {
    return this.request("GET", "/costs");
  }

  advanceClock(seconds: number): Promise<{ now_s: number; fired: number }> {
    return this.request("POST", "/clock/advance", { seconds });
  }
}
