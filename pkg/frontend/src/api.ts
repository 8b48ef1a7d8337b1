// Typed client for the litmine HTTP API. View models mirror the JSON
// payloads one-to-one; nothing numeric is recomputed on the client.

export interface PaperHit {
  identifier: string;
  title: string;
  year: number | null;
  venue: string;
  subtype: string;
  doi: string | null;
  url: string | null;
  citedby_count: number;
  clusters: number[];
  score: number;
}

export interface SearchPayload {
  query: string;
  r: number;
  tau: number;
  predicted_cluster: number | null;
  results: PaperHit[];
}

export interface ClusterSummary {
  id: number;
  label: string;
  keyword_count: number;
  paper_count: number;
}

export interface ClusterListPayload {
  k: number;
  clusters: ClusterSummary[];
}

export interface ClusterDetailPayload extends ClusterSummary {
  wordcloud: Record<string, number>;
  members: string[];
  coords?: [number, number];
}

export interface RuleRecord {
  antecedents: string;
  consequents: string;
  "antecedent support": number;
  "consequent support": number;
  support: number;
  confidence: number;
  lift: number;
}

export interface RulesPayload {
  rules: RuleRecord[];
}

export interface ProjectionEdge {
  lhs: number[];
  rhs: number[];
  support: number;
  confidence: number;
  lift: number;
}

export interface ProjectionPayload {
  coords: Record<string, [number, number]>;
  node_sizes: Record<string, number>;
  edges: ProjectionEdge[];
}

export interface TrendSeries {
  cluster?: number;
  label?: string;
  query?: string;
  points: [number, number][];
}

export interface TrendsPayload {
  series: TrendSeries[];
}

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

async function getJson<T>(url: string, signal?: AbortSignal): Promise<T> {
  const response = await fetch(url, { signal });
  if (!response.ok) {
    let message = `${response.status}`;
    try {
      const body = await response.json();
      if (body && typeof body.message === "string") message = body.message;
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new ApiError(response.status, message);
  }
  return (await response.json()) as T;
}

export class ApiClient {
  constructor(readonly baseUrl: string = "") {}

  search(query: string, r = 10, signal?: AbortSignal): Promise<SearchPayload> {
    const params = new URLSearchParams({ q: query, r: String(r) });
    return getJson(`${this.baseUrl}/api/search?${params}`, signal);
  }

  clusters(signal?: AbortSignal): Promise<ClusterListPayload> {
    return getJson(`${this.baseUrl}/api/clusters`, signal);
  }

  clusterDetail(id: number, signal?: AbortSignal): Promise<ClusterDetailPayload> {
    return getJson(`${this.baseUrl}/api/clusters/${id}`, signal);
  }

  rules(signal?: AbortSignal): Promise<RulesPayload> {
    return getJson(`${this.baseUrl}/api/rules`, signal);
  }

  projection(signal?: AbortSignal): Promise<ProjectionPayload> {
    return getJson(`${this.baseUrl}/api/projection`, signal);
  }

  trendsForQuery(query: string, r = 10, signal?: AbortSignal): Promise<TrendsPayload> {
    const params = new URLSearchParams({ q: query, r: String(r) });
    return getJson(`${this.baseUrl}/api/trends?${params}`, signal);
  }

  trendsForClusters(ids: number[], signal?: AbortSignal): Promise<TrendsPayload> {
    const params = new URLSearchParams();
    for (const id of ids) params.append("cluster", String(id));
    return getJson(`${this.baseUrl}/api/trends?${params}`, signal);
  }
}
