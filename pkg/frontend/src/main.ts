/** App wiring: server responses in, full re-render out.
 *
 * One mutating request at a time: controls render disabled while
 * state.pendingAction is set, and every handler issues exactly one API call.
 */

import { ApiClient, ApiError } from "./api.js";
import { renderFinalSql } from "./render/finalSql.js";
import { renderQuestionWithMentions } from "./render/mentions.js";
import { renderSchemaPanel } from "./render/schemaPanel.js";
import { renderStepList } from "./render/steps.js";
import { renderTreeView } from "./render/tree.js";
import {
  applyEnvelope,
  beginAction,
  failAction,
  initialState,
  type Panel,
  type ViewState,
} from "./state.js";
import type { Envelope, FieldRef } from "./types.js";

const api = new ApiClient("");
let state: ViewState = initialState();
let root: HTMLElement;

function setState(next: ViewState): void {
  state = next;
  render();
}

async function run(action: string, call: () => Promise<Envelope>): Promise<void> {
  if (state.pendingAction) return;
  setState(beginAction(state, action));
  try {
    const envelope = await call();
    setState(applyEnvelope(state, envelope));
  } catch (error) {
    setState(failAction(state));
    reportError(error);
  }
}

function reportError(error: unknown): void {
  const note = document.createElement("p");
  note.className = "error-banner";
  note.textContent =
    error instanceof ApiError ? `${error.code}: ${error.message}` : String(error);
  root.prepend(note);
  setTimeout(() => note.remove(), 6000);
}

async function refreshTree(): Promise<void> {
  if (!state.session) return;
  const body = await api.tree(state.session.id);
  setState({ ...state, tree: body.action_result.tree, panel: "tree" });
}

function sessionControls(): HTMLElement {
  const bar = document.createElement("div");
  bar.className = "session-bar";
  const session = state.session;
  const busy = Boolean(state.pendingAction);

  if (!session) {
    const form = document.createElement("form");
    const tables = document.createElement("input");
    tables.placeholder = "tables, comma separated";
    tables.value = "satscores";
    const knowledge = document.createElement("input");
    knowledge.placeholder = "external knowledge (optional)";
    const start = document.createElement("button");
    start.textContent = "Start session";
    form.append(tables, knowledge, start);
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      const names = tables.value.split(",").map((t) => t.trim()).filter(Boolean);
      void run("create", () => api.createSession(names, knowledge.value));
    });
    bar.appendChild(form);
    return bar;
  }

  const status = document.createElement("span");
  status.className = "session-state";
  status.textContent = `${session.state}${state.pendingAction ? " …" : ""}`;
  bar.appendChild(status);

  if (session.state === "QuestionEntry" || session.state === "IntentReview") {
    const form = document.createElement("form");
    const input = document.createElement("input");
    input.className = "question-input";
    input.placeholder = "Ask a question about the data";
    input.value = session.question;
    const send = document.createElement("button");
    send.textContent = session.state === "QuestionEntry" ? "Ask" : "Re-link";
    send.disabled = busy;
    form.append(input, send);
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      if (input.value.trim()) {
        void run("question", () => api.submitQuestion(session.id, input.value));
      }
    });
    bar.appendChild(form);
  }
  if (session.state === "IntentReview") {
    const confirm = document.createElement("button");
    confirm.textContent = "Looks right - generate plan";
    confirm.disabled = busy;
    confirm.addEventListener("click", () =>
      void run("confirm", () => api.confirmIntent(session.id)),
    );
    bar.appendChild(confirm);
  }
  if (session.state === "PlanReview") {
    const finalize = document.createElement("button");
    finalize.textContent = "Finalize SQL";
    finalize.disabled = busy;
    finalize.addEventListener("click", () =>
      void run("finalize", () => api.finalize(session.id)),
    );
    bar.appendChild(finalize);
  }
  if (session.state === "Finalized") {
    const reopen = document.createElement("button");
    reopen.textContent = "Reopen plan";
    reopen.disabled = busy;
    reopen.addEventListener("click", () => void run("reopen", () => api.reopen(session.id)));
    bar.appendChild(reopen);
  }
  return bar;
}

function rightPanel(): HTMLElement {
  const side = document.createElement("aside");
  side.className = "right-panel";
  const session = state.session;
  if (!session) return side;

  const toggles = document.createElement("div");
  toggles.className = "panel-toggles";
  for (const panel of ["schema", "tree"] as Panel[]) {
    const button = document.createElement("button");
    button.textContent = panel;
    button.className = state.panel === panel ? "active" : "";
    button.addEventListener("click", () => {
      if (panel === "tree") void refreshTree();
      else setState({ ...state, panel });
    });
    toggles.appendChild(button);
  }
  side.appendChild(toggles);

  if (state.panel === "tree" && state.tree) {
    side.appendChild(
      renderTreeView(state.tree, (stepId) => {
        document.getElementById(`step-${stepId}`)?.scrollIntoView();
      }),
    );
  } else {
    side.appendChild(
      renderSchemaPanel(session, state.schemaKeyword, (value) =>
        setState({ ...state, schemaKeyword: value }),
      ),
    );
  }
  return side;
}

export function render(): void {
  root.replaceChildren();
  const session = state.session;
  const busy = Boolean(state.pendingAction);

  root.appendChild(sessionControls());
  if (!session) return;

  const layout = document.createElement("div");
  layout.className = "layout";
  const mainColumn = document.createElement("main");

  if (session.linking) {
    mainColumn.appendChild(
      renderQuestionWithMentions(session, {
        onCorrect: (mentionId: string, fields: FieldRef[]) =>
          void run("correct", () => api.correctMapping(session.id, mentionId, fields)),
      }),
    );
  }
  if (session.plan) {
    mainColumn.appendChild(
      renderStepList(
        session.plan,
        {
          onExecute: (stepId) =>
            void run("execute", () => api.stepAction(session.id, stepId, "execute")),
          onRefine: (stepId) =>
            void run("refine", () => api.stepAction(session.id, stepId, "refine")),
          onEdit: (stepId, change) =>
            void run("edit", () => api.stepAction(session.id, stepId, "edit", change)),
          onRegenerate: (stepId) =>
            void run("regenerate", () => api.stepAction(session.id, stepId, "regenerate")),
        },
        busy,
      ),
    );
  }
  if (session.annotated_sql) {
    const heading = document.createElement("h3");
    heading.textContent = "Final SQL";
    mainColumn.appendChild(heading);
    mainColumn.appendChild(renderFinalSql(session.annotated_sql, session.plan));
  }

  layout.appendChild(mainColumn);
  layout.appendChild(rightPanel());
  root.appendChild(layout);
}

export function mount(element: HTMLElement): void {
  root = element;
  render();
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  mount(document.getElementById("app")!);
}
