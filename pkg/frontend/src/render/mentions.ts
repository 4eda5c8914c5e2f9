/** Question text with underlined mention spans and a correction popover. */

import type { FieldRef, Linking, SessionDoc } from "../types.js";

export interface MentionHandlers {
  onCorrect(mentionId: string, fields: FieldRef[]): void;
}

function sampleValuesFor(session: SessionDoc, ref: FieldRef): string[] {
  const table = session.snapshot.tables.find((t) => t.name === ref.table);
  const column = table?.columns.find((c) => c.name === ref.column);
  return column?.sample_values ?? [];
}

function subsetFields(session: SessionDoc): FieldRef[] {
  const out: FieldRef[] = [];
  for (const [table, columns] of session.selected) {
    for (const column of columns) out.push({ table, column });
  }
  return out;
}

function buildPopover(
  session: SessionDoc,
  mentionId: string,
  fields: FieldRef[],
  handlers: MentionHandlers,
): HTMLElement {
  const pop = document.createElement("div");
  pop.className = "mention-popover";
  pop.hidden = true;

  const list = document.createElement("ul");
  list.className = "mention-fields";
  for (const ref of fields) {
    const item = document.createElement("li");
    const label = document.createElement("strong");
    label.textContent = `${ref.table}.${ref.column}`;
    item.appendChild(label);
    const samples = sampleValuesFor(session, ref);
    if (samples.length) {
      const sample = document.createElement("span");
      sample.className = "sample-values";
      sample.textContent = ` e.g. ${samples.join(", ")}`;
      item.appendChild(sample);
    }
    list.appendChild(item);
  }
  pop.appendChild(list);

  const editor = document.createElement("form");
  editor.className = "mention-editor";
  const current = new Set(fields.map((f) => `${f.table}.${f.column}`));
  for (const candidate of subsetFields(session)) {
    const key = `${candidate.table}.${candidate.column}`;
    const row = document.createElement("label");
    const box = document.createElement("input");
    box.type = "checkbox";
    box.value = key;
    box.checked = current.has(key);
    row.appendChild(box);
    row.appendChild(document.createTextNode(key));
    editor.appendChild(row);
  }
  const apply = document.createElement("button");
  apply.type = "submit";
  apply.textContent = "Apply fields";
  editor.appendChild(apply);
  editor.addEventListener("submit", (event) => {
    event.preventDefault();
    const chosen: FieldRef[] = [];
    editor.querySelectorAll<HTMLInputElement>("input:checked").forEach((box) => {
      const [table = "", column = ""] = box.value.split(".");
      chosen.push({ table, column });
    });
    if (chosen.length) handlers.onCorrect(mentionId, chosen);
  });
  pop.appendChild(editor);
  return pop;
}

export function renderQuestionWithMentions(
  session: SessionDoc,
  handlers: MentionHandlers,
): HTMLElement {
  const container = document.createElement("div");
  container.className = "question";
  const text = document.createElement("p");
  text.className = "question-text";
  container.appendChild(text);
  const linking: Linking | null = session.linking;
  const question = linking?.question ?? session.question;
  if (!linking || linking.mappings.length === 0) {
    text.textContent = question;
    return container;
  }

  const ordered = [...linking.mappings].sort(
    (a, b) => a.mention.char_start - b.mention.char_start,
  );
  let cursor = 0;
  for (const mapping of ordered) {
    const { char_start, char_end } = mapping.mention;
    // Defensive skip: a span the text cannot host is dropped, not rendered.
    if (char_start < cursor || char_end > question.length || char_start >= char_end) continue;
    if (char_start > cursor) {
      text.appendChild(document.createTextNode(question.slice(cursor, char_start)));
    }
    const mark = document.createElement("span");
    mark.className = `mention origin-${mapping.origin}`;
    mark.dataset.mentionId = mapping.mention.id;
    mark.textContent = question.slice(char_start, char_end);
    const popover = buildPopover(session, mapping.mention.id, mapping.fields, handlers);
    mark.addEventListener("click", () => {
      popover.hidden = !popover.hidden;
    });
    text.appendChild(mark);
    container.appendChild(popover);  // out of the text flow
    cursor = char_end;
  }
  if (cursor < question.length) {
    text.appendChild(document.createTextNode(question.slice(cursor)));
  }
  return container;
}
