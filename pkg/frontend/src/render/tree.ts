/** Dependency view of the plan: nested lists following the server's tree edges. */

import type { TreeDoc } from "../types.js";

export function renderTreeView(
  tree: TreeDoc,
  onSelect: (stepId: string) => void,
): HTMLElement {
  const container = document.createElement("div");
  container.className = "tree-view";
  if (tree.roots.length === 0) {
    const empty = document.createElement("p");
    empty.className = "tree-placeholder";
    empty.textContent = "No plan yet.";
    container.appendChild(empty);
    return container;
  }

  const visited = new Set<string>();

  const renderNode = (id: string): HTMLElement => {
    const node = tree.nodes[id];
    const item = document.createElement("li");
    const label = document.createElement("button");
    label.type = "button";
    label.className = "tree-node";
    label.dataset.stepId = id;
    if (node === undefined) {
      label.textContent = id;
      item.appendChild(label);
      return item;
    }
    label.textContent = `${node.ordinal}. ${node.explanation}`;
    label.classList.add(`status-${node.status}`);
    label.addEventListener("click", () => onSelect(id));
    item.appendChild(label);
    if (visited.has(id)) {
      // A DAG join: the subtree is already drawn under its other parent.
      label.classList.add("tree-ref");
      return item;
    }
    visited.add(id);
    if (node.children.length) {
      const children = document.createElement("ul");
      for (const child of node.children) children.appendChild(renderNode(child));
      item.appendChild(children);
    }
    return item;
  };

  const rootList = document.createElement("ul");
  for (const root of tree.roots) rootList.appendChild(renderNode(root));
  container.appendChild(rootList);
  return container;
}
