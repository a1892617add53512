import { ApiClient, ApiError } from "./api.js";
import { PatientForm } from "./form.js";
import { SubgraphView } from "./subgraph.js";
import { SuggestionList } from "./suggestions.js";
import { WhatIfPanel } from "./whatif.js";
import type { Schema } from "./types.js";

/**
 * Wires the widgets together: submit the feature form, render the
 * ranked suggestions, explain the suggested set, and hand the set to
 * the what-if panel.  Service errors land in an inline banner and the
 * form keeps its values.
 */
export class App {
  form!: PatientForm;
  readonly suggestions: SuggestionList;
  readonly subgraph: SubgraphView;
  readonly whatif: WhatIfPanel;
  private readonly banner: HTMLElement;
  private latestSuggest = 0;

  constructor(
    private readonly root: HTMLElement,
    private readonly client: ApiClient,
  ) {
    const doc = root.ownerDocument;
    this.banner = doc.createElement("div");
    this.banner.className = "error-banner";
    this.banner.hidden = true;
    root.appendChild(this.banner);

    const listHost = doc.createElement("div");
    listHost.className = "suggestions-host";
    const graphHost = doc.createElement("div");
    graphHost.className = "subgraph-host";
    const whatifHost = doc.createElement("div");
    whatifHost.className = "whatif-host";
    root.append(listHost, graphHost, whatifHost);

    this.suggestions = new SuggestionList(listHost);
    this.subgraph = new SubgraphView(graphHost);
    this.whatif = new WhatIfPanel(client, whatifHost);
  }

  /** Fetch the schema and build the feature form from it. */
  async init(): Promise<Schema> {
    const schema = await this.client.getSchema();
    this.form = new PatientForm(
      this.root.ownerDocument,
      schema,
      (data) => void this.fetchSuggestions(data.features, data.k),
    );
    this.root.insertBefore(this.form.element, this.banner.nextSibling);
    return schema;
  }

  private showError(err: unknown): void {
    this.banner.hidden = false;
    this.banner.textContent =
      err instanceof ApiError
        ? err.detail
        : err instanceof Error
          ? err.message
          : String(err);
  }

  /**
   * Suggest then explain.  A request token guards against out-of-order
   * responses when the clinician re-submits quickly.
   */
  async fetchSuggestions(features: number[], k: number): Promise<void> {
    const token = ++this.latestSuggest;
    try {
      const resp = await this.client.suggest(features, k);
      if (token !== this.latestSuggest) return;
      this.banner.hidden = true;
      this.suggestions.render(resp.suggestions);

      const drugIds = resp.suggestions.map((s) => s.drug_id);
      if (drugIds.length >= 2) {
        const explained = await this.client.explain(drugIds);
        if (token !== this.latestSuggest) return;
        this.subgraph.render(explained);
        this.whatif.setInitial(drugIds, explained.ss);
      }
    } catch (err) {
      if (token !== this.latestSuggest) return;
      this.showError(err);
    }
  }
}
