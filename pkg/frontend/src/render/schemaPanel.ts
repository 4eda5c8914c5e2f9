/** Database panel: tables and fields with keyword filtering and relationships. */

import type { SessionDoc } from "../types.js";

export function renderSchemaPanel(
  session: SessionDoc,
  keyword: string,
  onKeyword: (value: string) => void,
): HTMLElement {
  const panel = document.createElement("div");
  panel.className = "schema-panel";

  const search = document.createElement("input");
  search.type = "search";
  search.placeholder = "Filter tables and fields";
  search.value = keyword;
  search.addEventListener("change", () => onKeyword(search.value));
  panel.appendChild(search);

  const selected = new Set(session.selected.map(([name]) => name));
  const needle = keyword.toLowerCase();
  for (const table of session.snapshot.tables) {
    const tableMatches = table.name.toLowerCase().includes(needle);
    const columns = tableMatches
      ? table.columns
      : table.columns.filter((c) => c.name.toLowerCase().includes(needle));
    if (!tableMatches && columns.length === 0 && needle) continue;

    const box = document.createElement("details");
    box.className = selected.has(table.name) ? "schema-table selected" : "schema-table";
    box.open = Boolean(needle);
    const summary = document.createElement("summary");
    summary.textContent = table.name;
    box.appendChild(summary);
    const list = document.createElement("ul");
    for (const column of columns) {
      const item = document.createElement("li");
      let text = `${column.name} ${column.declared_type}`;
      if (column.is_primary_key) text += " PK";
      item.textContent = text;
      list.appendChild(item);
    }
    box.appendChild(list);
    const fks = table.foreign_keys;
    if (fks.length) {
      const rel = document.createElement("p");
      rel.className = "schema-edges";
      rel.textContent = fks
        .map((fk) => `${table.name}.${fk.local_column} -> ${fk.target_table}.${fk.target_column}`)
        .join("; ");
      box.appendChild(rel);
    }
    panel.appendChild(box);
  }
  return panel;
}
