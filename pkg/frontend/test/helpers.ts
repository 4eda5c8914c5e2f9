import type { Envelope, SessionDoc } from "../src/types.js";

import corrected from "./fixtures/session_corrected.json";
import created from "./fixtures/session_created.json";
import edited from "./fixtures/session_edited.json";
import executed from "./fixtures/session_executed.json";
import finalized from "./fixtures/session_finalized.json";
import intentReview from "./fixtures/session_intent_review.json";
import planReview from "./fixtures/session_plan_review.json";
import regenerated from "./fixtures/session_regenerated.json";
import treeDoc from "./fixtures/tree.json";

export const fixtures = {
  created: created as unknown as Envelope,
  intentReview: intentReview as unknown as Envelope,
  corrected: corrected as unknown as Envelope,
  planReview: planReview as unknown as Envelope,
  executed: executed as unknown as Envelope,
  finalized: finalized as unknown as Envelope,
  edited: edited as unknown as Envelope,
  regenerated: regenerated as unknown as Envelope,
  tree: treeDoc as unknown as Envelope & {
    action_result: { tree: import("../src/types.js").TreeDoc };
  },
};

export function session(name: keyof typeof fixtures): SessionDoc {
  return fixtures[name].session;
}

/** Queue-backed fetch stub recording every request it serves. */
export function fetchStub(bodies: unknown[]) {
  const log: { url: string; method: string; body: unknown }[] = [];
  const queue = [...bodies];
  const impl = async (input: RequestInfo | URL, init?: RequestInit) => {
    const body = init?.body ? JSON.parse(String(init.body)) : null;
    log.push({ url: String(input), method: init?.method ?? "GET", body });
    const next = queue.shift();
    if (next === undefined) throw new Error(`fetch stub exhausted for ${String(input)}`);
    return new Response(JSON.stringify(next), {
      status: 200,
      headers: { "Content-Type": "application/json" },
    });
  };
  return { impl, log, queue };
}

export const flush = () => new Promise((resolve) => setTimeout(resolve, 0));
