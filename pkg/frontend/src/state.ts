/** View state: the last server document plus purely-local UI flags.
 *
 * Rendering is a pure function of this object; session data is never
 * mutated client-side, only replaced wholesale from a server response.
 */

import type { Envelope, SessionDoc, TreeDoc } from "./types.js";

export type Panel = "schema" | "tree" | "results";

export interface ViewState {
  session: SessionDoc | null;
  pendingAction: string | null;
  panel: Panel;
  tree: TreeDoc | null;
  schemaKeyword: string;
}

export function initialState(): ViewState {
  return { session: null, pendingAction: null, panel: "schema", tree: null, schemaKeyword: "" };
}

export function applyEnvelope(state: ViewState, envelope: Envelope): ViewState {
  return { ...state, session: envelope.session, pendingAction: null };
}

export function beginAction(state: ViewState, action: string): ViewState {
  return { ...state, pendingAction: action };
}

export function failAction(state: ViewState): ViewState {
  return { ...state, pendingAction: null };
}
