/** Expandable step cards with Execute / Refine / Edit / Regenerate controls. */

import type { ExecFailure, Plan, ResultPreview, Step } from "../types.js";

export interface StepHandlers {
  onExecute(stepId: string): void;
  onRefine(stepId: string): void;
  onEdit(stepId: string, change: { explanation?: string; sql?: string }): void;
  onRegenerate(stepId: string): void;
}

const STATUS_LABEL: Record<Step["status"], string> = {
  pending: "pending",
  executed_ok: "ok",
  executed_error: "error",
  stale: "stale",
};

function renderPreview(preview: ResultPreview): HTMLElement {
  const wrap = document.createElement("div");
  wrap.className = "result-preview";
  const table = document.createElement("table");
  const head = document.createElement("tr");
  for (const column of preview.columns) {
    const th = document.createElement("th");
    th.textContent = column;
    head.appendChild(th);
  }
  table.appendChild(head);
  for (const row of preview.rows) {
    const tr = document.createElement("tr");
    for (const cell of row) {
      const td = document.createElement("td");
      td.textContent = cell;
      tr.appendChild(td);
    }
    table.appendChild(tr);
  }
  wrap.appendChild(table);
  if (preview.truncated) {
    const note = document.createElement("p");
    note.className = "truncation-note";
    note.textContent = `showing ${preview.rows.length} of ${preview.total_rows_seen}+ rows`;
    wrap.appendChild(note);
  }
  return wrap;
}

function renderFailure(failure: ExecFailure): HTMLElement {
  const box = document.createElement("div");
  box.className = `exec-error kind-${failure.kind}`;
  box.textContent = `${failure.kind}: ${failure.message}`;
  return box;
}

function buildEditor(step: Step, handlers: StepHandlers): HTMLElement {
  const editor = document.createElement("details");
  editor.className = "step-editor";
  const summary = document.createElement("summary");
  summary.textContent = "Edit";
  editor.appendChild(summary);

  const form = document.createElement("form");
  const explanation = document.createElement("textarea");
  explanation.name = "explanation";
  explanation.value = step.explanation;
  const sql = document.createElement("textarea");
  sql.name = "sql";
  sql.value = step.sql;
  const apply = document.createElement("button");
  apply.type = "submit";
  apply.textContent = "Apply edit";
  form.append(explanation, sql, apply);
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    const change: { explanation?: string; sql?: string } = {};
    if (explanation.value !== step.explanation) change.explanation = explanation.value;
    if (sql.value !== step.sql) change.sql = sql.value;
    if (Object.keys(change).length) handlers.onEdit(step.id, change);
  });
  editor.appendChild(form);
  return editor;
}

function buildCard(step: Step, handlers: StepHandlers, disabled: boolean): HTMLElement {
  const card = document.createElement("section");
  card.className = `step-card status-${step.status}`;
  card.dataset.stepId = step.id;
  card.id = `step-${step.id}`;

  const header = document.createElement("header");
  const title = document.createElement("span");
  title.className = "step-title";
  title.textContent = `${step.ordinal}. ${step.explanation}`;
  const badge = document.createElement("span");
  badge.className = `badge badge-${step.status}`;
  badge.textContent = STATUS_LABEL[step.status];
  header.append(title, badge);
  card.appendChild(header);

  const details = document.createElement("details");
  details.className = "step-body";
  const summary = document.createElement("summary");
  summary.textContent = "Expand";
  details.appendChild(summary);
  const sql = document.createElement("pre");
  sql.className = "step-sql";
  sql.textContent = step.sql;
  details.appendChild(sql);
  if (step.last_result) {
    details.appendChild(
      step.last_result.type === "preview"
        ? renderPreview(step.last_result)
        : renderFailure(step.last_result),
    );
  }
  details.appendChild(buildEditor(step, handlers));
  card.appendChild(details);

  const controls = document.createElement("div");
  controls.className = "step-controls";
  const execute = document.createElement("button");
  execute.textContent = "Execute";
  execute.addEventListener("click", () => handlers.onExecute(step.id));
  const refine = document.createElement("button");
  refine.textContent = "Refine";
  refine.disabled = disabled || step.last_result?.type !== "error";
  refine.addEventListener("click", () => handlers.onRefine(step.id));
  const regenerate = document.createElement("button");
  regenerate.textContent = "Regenerate";
  regenerate.className = step.status === "stale" ? "regenerate attention" : "regenerate";
  regenerate.addEventListener("click", () => handlers.onRegenerate(step.id));
  for (const button of [execute, refine, regenerate]) {
    if (disabled) button.disabled = true;
    controls.appendChild(button);
  }
  card.appendChild(controls);
  return card;
}

export function renderStepList(
  plan: Plan,
  handlers: StepHandlers,
  disabled = false,
): HTMLElement {
  const list = document.createElement("div");
  list.className = "step-list";
  const ordered = [...plan.steps].sort((a, b) => a.ordinal - b.ordinal);
  for (const step of ordered) {
    list.appendChild(buildCard(step, handlers, disabled));
  }
  return list;
}
