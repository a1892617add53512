import { ApiClient } from "./api.js";
import { App } from "./app.js";

export { ApiClient, ApiError } from "./api.js";
export type { FetchLike } from "./api.js";
export { App } from "./app.js";
export { PatientForm } from "./form.js";
export { SubgraphView, edgeClass } from "./subgraph.js";
export { SuggestionList } from "./suggestions.js";
export { WhatIfPanel } from "./whatif.js";
export type * from "./types.js";

/** Browser bootstrap: mount on a host element against the service URL. */
export async function mount(root: HTMLElement, baseUrl = ""): Promise<App> {
  const app = new App(root, new ApiClient(baseUrl));
  await app.init();
  return app;
}
