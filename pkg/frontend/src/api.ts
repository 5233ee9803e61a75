// Typed client for the runvar JSON API. Every number the UI displays comes
// out of these payloads; nothing is recomputed client-side.

export type ClusterStats = {
  outlier_pct: number;
  iqr_25_75: number;
  p95: number;
  std: number;
  job_share: number;
};

export type ClustersPayload = {
  k: number;
  mode: string;
  spec: { mode: string; lo: number; hi: number; n_interior: number };
  cluster_order: number[];
  stats: ClusterStats[];
  centroids: number[][];
};

export type GroupSummary = {
  key: string;
  support: number;
  cluster: number;
  n_samples: number;
};

export type GroupListPayload = { groups: GroupSummary[]; total: number };

export type GroupDetailPayload = {
  key: string;
  support: number;
  pmf: { mode: string; lo: number; hi: number; n_interior: number; probs: number[]; n_samples: number };
  membership: { cluster_id: number; log_likelihoods: number[] };
  stats: { outlier_pct?: number; iqr_25_75?: number; p95?: number; std?: number };
  cluster_stats: ClusterStats;
  centroid: number[];
  features: Record<string, number>;
};

export type Prediction = {
  cluster: number;
  probabilities: number[];
  stats: ClusterStats;
};

export type WhatifPayload = {
  before: Prediction;
  after: Prediction;
  changed: boolean;
  intervention: unknown;
};

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

async function request<T>(path: string, init?: RequestInit): Promise<T> {
  const res = await fetch(path, {
    headers: { Accept: "application/json", ...(init?.body ? { "Content-Type": "application/json" } : {}) },
    ...init,
  });
  if (!res.ok) {
    let detail = `HTTP ${res.status}`;
    try {
      const body = (await res.json()) as { error?: string };
      if (body.error) detail = body.error;
    } catch {
      // keep the generic detail
    }
    throw new ApiError(res.status, detail);
  }
  return (await res.json()) as T;
}

export function fetchHealth(): Promise<{ status: string }> {
  return request("/api/health");
}

export function fetchClusters(): Promise<ClustersPayload> {
  return request("/api/clusters");
}

export function fetchGroups(limit = 200): Promise<GroupListPayload> {
  return request(`/api/groups?limit=${encodeURIComponent(limit)}`);
}

export function fetchGroup(key: string): Promise<GroupDetailPayload> {
  return request(`/api/groups/${encodeURIComponent(key)}`);
}

export function postWhatif(body: string): Promise<WhatifPayload> {
  // body is pre-serialized canonical JSON so tests can pin exact bytes
  return request("/api/whatif", { method: "POST", body });
}
