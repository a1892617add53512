import type { ExplainResponse, SubgraphEdge } from "./types.js";

const SVG_NS = "http://www.w3.org/2000/svg";
const SIZE = 400;
const RADIUS = 160;

export function edgeClass(edge: SubgraphEdge): string {
  // colour is a pure function of the sign: blue synergy, red antagonism
  return edge.sign >= 0 ? "edge edge-synergy" : "edge edge-antagonism";
}

/**
 * Signed explanation subgraph view.  Every payload node and edge is
 * drawn exactly once; positions are client-side layout only (a circle —
 * deterministic, but semantically meaningless), all content is
 * payload-driven.
 */
export class SubgraphView {
  constructor(private readonly container: HTMLElement) {}

  render(payload: ExplainResponse): void {
    this.container.textContent = "";
    const doc = this.container.ownerDocument;

    const positions = new Map<number, { x: number; y: number }>();
    payload.nodes.forEach((node, idx) => {
      const angle = (2 * Math.PI * idx) / payload.nodes.length;
      positions.set(node.id, {
        x: SIZE / 2 + RADIUS * Math.cos(angle),
        y: SIZE / 2 + RADIUS * Math.sin(angle),
      });
    });

    const svg = doc.createElementNS(SVG_NS, "svg");
    svg.setAttribute("viewBox", `0 0 ${SIZE} ${SIZE}`);
    svg.setAttribute("class", "subgraph");

    for (const edge of payload.edges) {
      const a = positions.get(edge.u);
      const b = positions.get(edge.v);
      if (!a || !b) continue;
      const line = doc.createElementNS(SVG_NS, "line");
      line.setAttribute("x1", String(a.x));
      line.setAttribute("y1", String(a.y));
      line.setAttribute("x2", String(b.x));
      line.setAttribute("y2", String(b.y));
      line.setAttribute("class", edgeClass(edge));
      line.setAttribute("data-u", String(edge.u));
      line.setAttribute("data-v", String(edge.v));
      const title = doc.createElementNS(SVG_NS, "title");
      title.textContent = `truss ${edge.truss}, ${
        edge.sign >= 0 ? "synergy" : "antagonism"
      }`;
      line.appendChild(title);
      svg.appendChild(line);
    }

    for (const node of payload.nodes) {
      const pos = positions.get(node.id);
      if (!pos) continue;
      const circle = doc.createElementNS(SVG_NS, "circle");
      circle.setAttribute("cx", String(pos.x));
      circle.setAttribute("cy", String(pos.y));
      circle.setAttribute("r", "12");
      circle.setAttribute(
        "class",
        node.suggested ? "node node-suggested" : "node",
      );
      circle.setAttribute("data-drug-id", String(node.id));
      const title = doc.createElementNS(SVG_NS, "title");
      title.textContent = node.name;
      circle.appendChild(title);
      svg.appendChild(circle);
    }
    this.container.appendChild(svg);

    const readout = doc.createElement("div");
    readout.className = "subgraph-readout";
    const facts: Array<[string, string]> = [
      ["p", String(payload.p)],
      ["diameter", String(payload.diameter)],
      ["ss", payload.ss === null ? "—" : String(payload.ss)],
    ];
    for (const [label, value] of facts) {
      const span = doc.createElement("span");
      span.className = `readout-${label}`;
      span.textContent = `${label}: ${value}`;
      readout.appendChild(span);
    }
    if (payload.multi_component) {
      const warn = doc.createElement("span");
      warn.className = "readout-warning";
      warn.textContent = "selected drugs span disconnected interaction groups";
      readout.appendChild(warn);
    }
    this.container.appendChild(readout);
  }
}
