/** Layered tree layout for the search view.
 *
 * Leaves get consecutive horizontal slots; every parent is centered over its
 * children; vertical position is the node depth. Slots are wider than the
 * node box, so boxes can never overlap regardless of tree shape.
 */
import type { TreeDict } from "./types.js";

export interface LayoutNode {
  id: string;
  label: string;
  x: number; // box center
  y: number; // box center
  width: number;
  height: number;
  depth: number;
  onBestPath: boolean;
  isEnd: boolean;
}

export interface LayoutEdge {
  from: string;
  to: string;
  onBestPath: boolean;
}

export interface Layout {
  nodes: LayoutNode[];
  edges: LayoutEdge[];
  width: number;
  height: number;
}

export interface LayoutOptions {
  nodeWidth?: number;
  nodeHeight?: number;
  hGap?: number;
  vGap?: number;
}

export function layoutTree(tree: TreeDict, opts: LayoutOptions = {}): Layout {
  const nodeWidth = opts.nodeWidth ?? 120;
  const nodeHeight = opts.nodeHeight ?? 48;
  const hGap = opts.hGap ?? 24;
  const vGap = opts.vGap ?? 40;
  const slot = nodeWidth + hGap;
  const row = nodeHeight + vGap;

  const centers = new Map<string, number>();
  let nextLeafSlot = 0;

  const place = (id: string): number => {
    const node = tree.nodes[id];
    if (!node) throw new Error(`unknown node ${id}`);
    if (node.children.length === 0) {
      const x = nextLeafSlot * slot + slot / 2;
      nextLeafSlot += 1;
      centers.set(id, x);
      return x;
    }
    const xs = node.children.map(place);
    const x = (Math.min(...xs) + Math.max(...xs)) / 2;
    centers.set(id, x);
    return x;
  };
  place(tree.root_id);

  const nodes: LayoutNode[] = [];
  const edges: LayoutEdge[] = [];
  for (const [id, node] of Object.entries(tree.nodes)) {
    const x = centers.get(id);
    if (x === undefined) continue; // unreachable from the root
    nodes.push({
      id,
      label: node.task.label,
      x,
      y: node.depth * row + row / 2,
      width: nodeWidth,
      height: nodeHeight,
      depth: node.depth,
      onBestPath: node.flags.on_best_path,
      isEnd: node.flags.is_end,
    });
    for (const child of node.children) {
      const childNode = tree.nodes[child];
      edges.push({
        from: id,
        to: child,
        onBestPath:
          node.flags.on_best_path && (childNode?.flags.on_best_path ?? false),
      });
    }
  }
  return {
    nodes,
    edges,
    width: nextLeafSlot * slot,
    height: (Math.max(...nodes.map((n) => n.depth)) + 1) * row,
  };
}

/** Axis-aligned box intersection test used by the layout tests. */
export function boxesOverlap(a: LayoutNode, b: LayoutNode): boolean {
  return (
    Math.abs(a.x - b.x) < (a.width + b.width) / 2 &&
    Math.abs(a.y - b.y) < (a.height + b.height) / 2
  );
}

/** Render the layout as a standalone SVG string. */
export function renderTreeSvg(layout: Layout): string {
  const parts: string[] = [
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${layout.width} ${layout.height}">`,
  ];
  const byId = new Map(layout.nodes.map((n) => [n.id, n]));
  for (const edge of layout.edges) {
    const a = byId.get(edge.from);
    const b = byId.get(edge.to);
    if (!a || !b) continue;
    const cls = edge.onBestPath ? "edge best-path" : "edge";
    parts.push(
      `<line class="${cls}" x1="${a.x}" y1="${a.y + a.height / 2}" ` +
        `x2="${b.x}" y2="${b.y - b.height / 2}"/>`,
    );
  }
  for (const n of layout.nodes) {
    const cls = n.onBestPath ? "node best-path" : "node";
    parts.push(
      `<g class="${cls}" data-id="${n.id}">` +
        `<rect x="${n.x - n.width / 2}" y="${n.y - n.height / 2}" ` +
        `width="${n.width}" height="${n.height}" rx="6"/>` +
        `<text x="${n.x}" y="${n.y}" text-anchor="middle">${escapeXml(n.label)}</text>` +
        `</g>`,
    );
  }
  parts.push("</svg>");
  return parts.join("");
}

function escapeXml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}
