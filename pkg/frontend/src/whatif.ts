import type { ApiClient } from "./api.js";

export interface WhatIfState {
  selected: number[];
  ss: number | null;
  blockedMessage: string | null;
  history: Array<{ drugIds: number[]; ss: number }>;
}

/**
 * What-if drug-set explorer.  Toggling a drug re-requests the
 * satisfaction score from the service; the client does no SS
 * arithmetic.  Requests carry a token and only the latest response is
 * rendered, so rapid toggles can never show a stale score.
 */
export class WhatIfPanel {
  private selected = new Set<number>();
  private latestRequest = 0;
  private ssValue: number | null = null;
  private previousSs: number | null = null;
  private blocked: string | null = null;
  private readonly history: Array<{ drugIds: number[]; ss: number }> = [];

  constructor(
    private readonly client: ApiClient,
    private readonly container: HTMLElement,
    private readonly alpha?: number,
  ) {}

  /** Seed the panel from an explanation payload (suggested set + its SS). */
  setInitial(drugIds: number[], ss: number | null): void {
    this.selected = new Set(drugIds);
    this.ssValue = ss;
    this.previousSs = null;
    this.blocked = null;
    this.render();
  }

  state(): WhatIfState {
    return {
      selected: [...this.selected].sort((a, b) => a - b),
      ss: this.ssValue,
      blockedMessage: this.blocked,
      history: this.history.map((h) => ({ ...h, drugIds: [...h.drugIds] })),
    };
  }

  /**
   * Toggle one drug in or out of the set.  Resolves when the rendered
   * state is final for this call (either blocked, discarded as stale,
   * or updated from the response).
   */
  async toggle(drugId: number): Promise<void> {
    const next = new Set(this.selected);
    if (next.has(drugId)) next.delete(drugId);
    else next.add(drugId);

    if (next.size < 2) {
      this.blocked = "keep at least two drugs selected";
      this.render();
      return;
    }
    this.blocked = null;
    this.selected = next;
    const token = ++this.latestRequest;
    const drugIds = [...next].sort((a, b) => a - b);
    try {
      const resp = await this.client.ss(drugIds, this.alpha);
      if (token !== this.latestRequest) return; // stale; a newer toggle won
      this.previousSs = this.ssValue;
      this.ssValue = resp.ss;
      this.history.push({ drugIds, ss: resp.ss });
    } catch (err) {
      if (token !== this.latestRequest) return;
      this.blocked = err instanceof Error ? err.message : String(err);
    }
    this.render();
  }

  private render(): void {
    this.container.textContent = "";
    const doc = this.container.ownerDocument;

    const readout = doc.createElement("div");
    readout.className = "whatif-ss";
    readout.textContent = this.ssValue === null ? "—" : String(this.ssValue);
    this.container.appendChild(readout);

    const delta = doc.createElement("div");
    delta.className = "whatif-delta";
    if (this.previousSs !== null && this.ssValue !== null) {
      if (this.ssValue > this.previousSs) delta.textContent = "▲";
      else if (this.ssValue < this.previousSs) delta.textContent = "▼";
      else delta.textContent = "=";
    }
    this.container.appendChild(delta);

    const sel = doc.createElement("div");
    sel.className = "whatif-selected";
    sel.textContent = [...this.selected].sort((a, b) => a - b).join(",");
    this.container.appendChild(sel);

    if (this.blocked) {
      const tip = doc.createElement("div");
      tip.className = "whatif-blocked";
      tip.setAttribute("role", "tooltip");
      tip.textContent = this.blocked;
      this.container.appendChild(tip);
    }

    const historyList = doc.createElement("ul");
    historyList.className = "whatif-history";
    for (const entry of this.history) {
      const item = doc.createElement("li");
      item.textContent = `${entry.drugIds.join(",")} → ${entry.ss}`;
      historyList.appendChild(item);
    }
    this.container.appendChild(historyList);
  }
}
