/** Thin typed client for the session API. All failures surface as ApiError
 * with the server's {code, message, field} body when one exists, or code
 * "network" when the request itself failed.
 */
import {
  BeliefPayload,
  CreatedPayload,
  QueryPayload,
  ResponseDoc,
  SummaryPayload,
  isQueryView,
  isSummary,
  isSupportedVersion,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
    public field?: string,
  ) {
    super(message);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

async function parseError(status: number, response: Response): Promise<ApiError> {
  try {
    const body = await response.json();
    return new ApiError(status, body.code ?? "unknown", body.message ?? "", body.field);
  } catch {
    return new ApiError(status, "unknown", `HTTP ${status}`);
  }
}

export class SessionApi {
  constructor(
    private baseUrl: string,
    private fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request(path: string, init?: RequestInit): Promise<unknown> {
    let response: Response;
    try {
      response = await this.fetchImpl(this.baseUrl + path, init);
    } catch (err) {
      throw new ApiError(0, "network", String(err));
    }
    if (!response.ok) {
      throw await parseError(response.status, response);
    }
    return response.json();
  }

  async createSession(config: unknown): Promise<CreatedPayload> {
    const body = await this.request("/sessions", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ v: 1, config }),
    });
    if (!isSupportedVersion(body) || !isSummary((body as CreatedPayload).summary)) {
      throw new ApiError(0, "unsupported_schema", "unsupported payload version");
    }
    return body as CreatedPayload;
  }

  async nextQuery(sessionId: string): Promise<QueryPayload> {
    const body = await this.request(`/sessions/${sessionId}/query`);
    if (!isSupportedVersion(body) || !isQueryView((body as QueryPayload).query)) {
      throw new ApiError(0, "unsupported_schema", "unsupported payload version");
    }
    return body as QueryPayload;
  }

  async postResponse(sessionId: string, response: ResponseDoc): Promise<SummaryPayload> {
    const body = await this.request(`/sessions/${sessionId}/response`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ v: 1, response }),
    });
    if (!isSupportedVersion(body) || !isSummary((body as SummaryPayload).summary)) {
      throw new ApiError(0, "unsupported_schema", "unsupported payload version");
    }
    return body as SummaryPayload;
  }

  async getBelief(sessionId: string): Promise<BeliefPayload> {
    const body = await this.request(`/sessions/${sessionId}/belief`);
    if (!isSupportedVersion(body)) {
      throw new ApiError(0, "unsupported_schema", "unsupported payload version");
    }
    return body as BeliefPayload;
  }

  async getTranscript(sessionId: string): Promise<string> {
    let response: Response;
    try {
      response = await this.fetchImpl(`${this.baseUrl}/sessions/${sessionId}/transcript`);
    } catch (err) {
      throw new ApiError(0, "network", String(err));
    }
    if (!response.ok) throw await parseError(response.status, response);
    return response.text();
  }
}
