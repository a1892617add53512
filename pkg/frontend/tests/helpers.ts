import type { FetchLike } from "../src/api.js";
import type { ExplainResponse, Schema } from "../src/types.js";

export function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

export type Handler = (
  path: string,
  init?: RequestInit,
) => Response | Promise<Response>;

export function mockFetch(handler: Handler): FetchLike {
  return (input, init) => Promise.resolve(handler(input, init));
}

export function requestBody(init?: RequestInit): unknown {
  return JSON.parse(String(init?.body));
}

export const SCHEMA: Schema = {
  feature_dim: 3,
  n_drugs: 6,
  k_max: 6,
  default_alpha: 0.5,
};

/** 5 nodes / 6 edges, mixed signs, drugs 0-2 suggested. */
export const EXPLAIN_PAYLOAD: ExplainResponse = {
  nodes: [
    { id: 0, name: "drug-0", suggested: true },
    { id: 1, name: "drug-1", suggested: true },
    { id: 2, name: "drug-2", suggested: true },
    { id: 3, name: "drug-3", suggested: false },
    { id: 4, name: "drug-4", suggested: false },
  ],
  edges: [
    { u: 0, v: 1, sign: 1, truss: 4 },
    { u: 0, v: 2, sign: 1, truss: 4 },
    { u: 1, v: 2, sign: 1, truss: 4 },
    { u: 0, v: 3, sign: -1, truss: 3 },
    { u: 2, v: 4, sign: -1, truss: 2 },
    { u: 3, v: 4, sign: 1, truss: 2 },
  ],
  p: 3,
  diameter: 2,
  ss: 0.4123456789,
  multi_component: false,
};
