/** Color-coded final SQL: depth shades with hoverable per-step provenance. */

import type { AnnotatedSql, Plan } from "../types.js";

/** Depths at or beyond the ramp's last level share the darkest shade. */
export const RAMP_LEVELS = 6;

function boundaries(annotated: AnnotatedSql): number[] {
  const marks = new Set<number>([0, annotated.sql.length]);
  for (const span of annotated.depth_spans) {
    marks.add(span.start);
    marks.add(span.end);
  }
  for (const span of annotated.step_spans) {
    marks.add(span.start);
    marks.add(span.end);
  }
  for (const [start, end] of annotated.unattributed) {
    marks.add(start);
    marks.add(end);
  }
  return [...marks].sort((a, b) => a - b);
}

export function renderFinalSql(annotated: AnnotatedSql, plan: Plan | null): HTMLElement {
  const block = document.createElement("pre");
  block.className = "final-sql";
  if (!annotated.sql) return block;

  const explanationById = new Map<string, string>();
  for (const step of plan?.steps ?? []) explanationById.set(step.id, step.explanation);

  const marks = boundaries(annotated);
  for (let i = 0; i + 1 < marks.length; i++) {
    const lo = marks[i]!;
    const hi = marks[i + 1]!;
    if (hi <= lo) continue;
    const segment = document.createElement("span");
    segment.textContent = annotated.sql.slice(lo, hi);
    const depth = annotated.depth_spans.find((d) => d.start <= lo && hi <= d.end)?.depth;
    const step = annotated.step_spans.find((s) => s.start <= lo && hi <= s.end);
    if (step) {
      const level = Math.min(depth ?? 0, RAMP_LEVELS - 1);
      segment.className = `sql-seg depth-${level}`;
      segment.dataset.stepId = step.step_id;
      const explanation = explanationById.get(step.step_id);
      if (explanation) segment.title = explanation;
    } else {
      segment.className = "sql-seg unattributed";
    }
    block.appendChild(segment);
  }
  return block;
}
