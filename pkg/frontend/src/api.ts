// Typed access to the rating service. The client never sees model ids:
// the server hands out opaque response ids and we keep it that way.

export interface ResponseView {
  response_id: string;
  text: string;
}

export interface TaskItem {
  done: false;
  campaign_id: string;
  item_id: string;
  question: string;
  image: string | null;
  position: number;
  total: number;
  responses: ResponseView[];
  criteria: string[];
  score_min: number;
  score_max: number;
}

export interface CampaignDone {
  done: true;
  campaign_id: string;
  total: number;
}

export type NextItem = TaskItem | CampaignDone;

export type Ratings = Record<string, Record<string, number>>;

export interface RatingBody {
  campaign_id: string;
  annotator_id: string;
  item_id: string;
  ratings: Ratings;
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** Server rejected the request (bad input, unknown item, roster...). */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    detail: string,
  ) {
    super(detail);
    this.name = "ApiError";
  }
}

async function errorDetail(response: Response): Promise<string> {
  try {
    const body = (await response.json()) as { detail?: unknown };
    if (typeof body.detail === "string") return body.detail;
  } catch {
    // non-JSON error body; fall through to the status line
  }
  return `request failed with status ${response.status}`;
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike,
  ) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/+$/, "") + path;
  }

  private async getJson<T>(path: string): Promise<T> {
    const response = await this.fetchFn(this.url(path));
    if (!response.ok) throw new ApiError(response.status, await errorDetail(response));
    return (await response.json()) as T;
  }

  health(): Promise<{ ok: boolean }> {
    return this.getJson("/healthz");
  }

  nextItem(campaignId: string, annotatorId: string): Promise<NextItem> {
    const query = new URLSearchParams({ annotator: annotatorId });
    return this.getJson(
      `/campaigns/${encodeURIComponent(campaignId)}/next?${query.toString()}`,
    );
  }

  async submitRating(body: RatingBody): Promise<void> {
    const response = await this.fetchFn(this.url("/ratings"), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!response.ok) throw new ApiError(response.status, await errorDetail(response));
    await response.json();
  }
}
