/** Payload shapes served by the medrec HTTP API. */

export interface Schema {
  feature_dim: number;
  n_drugs: number;
  k_max: number;
  default_alpha: number;
}

export interface DrugInfo {
  id: number;
  name: string;
  degree: number;
}

export interface Suggestion {
  drug_id: number;
  name: string;
  score: number;
}

export interface SuggestResponse {
  suggestions: Suggestion[];
}

export interface SubgraphNode {
  id: number;
  name: string;
  suggested: boolean;
}

export interface SubgraphEdge {
  u: number;
  v: number;
  /** -1 antagonism, +1 synergy (0 never appears in explanations). */
  sign: number;
  truss: number;
}

export interface ExplainResponse {
  nodes: SubgraphNode[];
  edges: SubgraphEdge[];
  p: number;
  diameter: number;
  ss: number | null;
  multi_component: boolean;
}

export interface SsResponse {
  ss: number;
  alpha: number;
  drug_ids: number[];
}
