import type { Suggestion } from "./types.js";

/**
 * Ranked suggestion list.  Rows appear in payload order, verbatim — the
 * client never re-sorts, and every displayed number comes straight from
 * the payload.
 */
export class SuggestionList {
  constructor(private readonly container: HTMLElement) {}

  render(suggestions: Suggestion[]): void {
    this.container.textContent = "";
    const doc = this.container.ownerDocument;
    const list = doc.createElement("ol");
    list.className = "suggestions";
    for (const s of suggestions) {
      const row = doc.createElement("li");
      row.className = "suggestion-row";
      row.setAttribute("data-drug-id", String(s.drug_id));

      const name = doc.createElement("span");
      name.className = "drug-name";
      name.textContent = s.name;
      row.appendChild(name);

      const score = doc.createElement("span");
      score.className = "drug-score";
      score.textContent = String(s.score);
      row.appendChild(score);

      list.appendChild(row);
    }
    this.container.appendChild(list);
  }
}
