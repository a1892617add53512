import { describe, expect, it } from "vitest";

import { SubgraphView, edgeClass } from "../src/subgraph.js";
import { EXPLAIN_PAYLOAD } from "./helpers.js";

function view() {
  const host = document.createElement("div");
  document.body.appendChild(host);
  return { host, view: new SubgraphView(host) };
}

describe("SubgraphView", () => {
  it("draws exactly the payload's nodes and edges", () => {
    const { host, view: v } = view();
    v.render(EXPLAIN_PAYLOAD);
    expect(host.querySelectorAll("circle.node")).toHaveLength(5);
    expect(host.querySelectorAll("line.edge")).toHaveLength(6);
    // re-render replaces, never accumulates
    v.render(EXPLAIN_PAYLOAD);
    expect(host.querySelectorAll("circle.node")).toHaveLength(5);
    expect(host.querySelectorAll("line.edge")).toHaveLength(6);
  });

  it("styles edges solely by sign", () => {
    const { host, view: v } = view();
    v.render(EXPLAIN_PAYLOAD);
    for (const line of host.querySelectorAll("line.edge")) {
      const u = Number(line.getAttribute("data-u"));
      const vId = Number(line.getAttribute("data-v"));
      const edge = EXPLAIN_PAYLOAD.edges.find(
        (e) => e.u === u && e.v === vId,
      )!;
      expect(line.getAttribute("class")).toBe(edgeClass(edge));
      expect(line.classList.contains("edge-synergy")).toBe(edge.sign === 1);
      expect(line.classList.contains("edge-antagonism")).toBe(
        edge.sign === -1,
      );
    }
  });

  it("highlights the suggested drugs", () => {
    const { host, view: v } = view();
    v.render(EXPLAIN_PAYLOAD);
    const suggested = [...host.querySelectorAll("circle.node-suggested")].map(
      (c) => Number(c.getAttribute("data-drug-id")),
    );
    expect(suggested.sort((a, b) => a - b)).toEqual([0, 1, 2]);
  });

  it("passes the ss value through verbatim", () => {
    const { host, view: v } = view();
    v.render(EXPLAIN_PAYLOAD);
    expect(host.querySelector(".readout-ss")?.textContent).toBe(
      `ss: ${String(EXPLAIN_PAYLOAD.ss)}`,
    );
    expect(host.querySelector(".readout-p")?.textContent).toBe("p: 3");
    expect(host.querySelector(".readout-diameter")?.textContent).toBe(
      "diameter: 2",
    );
  });

  it("renders a minimal two-drug synergy payload", () => {
    const { host, view: v } = view();
    v.render({
      nodes: [
        { id: 7, name: "drug-7", suggested: true },
        { id: 9, name: "drug-9", suggested: true },
      ],
      edges: [{ u: 7, v: 9, sign: 1, truss: 2 }],
      p: 2,
      diameter: 1,
      ss: 0.5,
      multi_component: false,
    });
    expect(host.querySelectorAll("circle.node-suggested")).toHaveLength(2);
    const line = host.querySelector("line.edge")!;
    expect(line.classList.contains("edge-synergy")).toBe(true);
    expect(line.querySelector("title")?.textContent).toBe("truss 2, synergy");
  });

  it("flags multi-component payloads", () => {
    const { host, view: v } = view();
    v.render({ ...EXPLAIN_PAYLOAD, multi_component: true });
    expect(host.querySelector(".readout-warning")).not.toBeNull();
  });
});
