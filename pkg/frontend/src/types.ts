/** Wire types for the session documents served by the HTTP API.
 *
 * The UI never derives domain facts on its own: spans, depths, statuses and
 * tree edges are consumed verbatim from these payloads.
 */

export interface FieldRef {
  table: string;
  column: string;
}

export interface Mention {
  id: string;
  char_start: number;
  char_end: number;
  surface_text: string;
}

export type MappingOrigin = "model" | "user_corrected";

export interface Mapping {
  mention: Mention;
  fields: FieldRef[];
  origin: MappingOrigin;
}

export interface Linking {
  question: string;
  knowledge: string;
  confirmed: boolean;
  warnings: string[];
  mappings: Mapping[];
}

export interface ResultPreview {
  type: "preview";
  columns: string[];
  rows: string[][];
  total_rows_seen: number;
  truncated: boolean;
}

export interface ExecFailure {
  type: "error";
  kind: "syntax" | "runtime" | "timeout" | "forbidden";
  message: string;
  sql: string;
}

export type StepStatus = "pending" | "executed_ok" | "executed_error" | "stale";

export interface Step {
  id: string;
  ordinal: number;
  explanation: string;
  sql: string;
  depends_on: string[];
  status: StepStatus;
  last_result: ResultPreview | ExecFailure | null;
}

export interface Plan {
  version: number;
  final_sql: string | null;
  final_version: number | null;
  final_forced: boolean;
  steps: Step[];
}

export interface DepthSpan {
  start: number;
  end: number;
  depth: number;
}

export interface StepSpan {
  start: number;
  end: number;
  step_id: string;
}

export interface AnnotatedSql {
  sql: string;
  depth_spans: DepthSpan[];
  step_spans: StepSpan[];
  unattributed: [number, number][];
  warnings: string[];
}

export interface ColumnDoc {
  name: string;
  declared_type: string;
  is_primary_key: boolean;
  is_nullable: boolean;
  sample_values: string[];
}

export interface ForeignKeyDoc {
  local_column: string;
  target_table: string;
  target_column: string;
}

export interface TableDoc {
  name: string;
  columns: ColumnDoc[];
  foreign_keys: ForeignKeyDoc[];
}

export interface SnapshotDoc {
  database_label: string;
  captured_at: string;
  tables: TableDoc[];
}

export type SubsetDoc = [string, string[]][];

export type SessionState =
  | "TableSelection"
  | "QuestionEntry"
  | "IntentReview"
  | "PlanReview"
  | "Finalized";

export interface EventDoc {
  seq: number;
  kind: string;
  payload: Record<string, unknown>;
  at: string;
}

export interface SessionDoc {
  schema_version: number;
  id: string;
  db_path: string;
  knowledge: string;
  question: string;
  state: SessionState;
  snapshot: SnapshotDoc;
  selected: SubsetDoc;
  focused: SubsetDoc | null;
  linking: Linking | null;
  plan: Plan | null;
  annotated_sql: AnnotatedSql | null;
  events: EventDoc[];
  created_at: string;
  updated_at: string;
}

export interface Envelope {
  session: SessionDoc;
  action_result: Record<string, unknown> | null;
}

export interface TreeNode {
  id: string;
  ordinal: number;
  explanation: string;
  status: StepStatus;
  children: string[];
}

export interface TreeDoc {
  roots: string[];
  nodes: Record<string, TreeNode>;
}

export interface ApiErrorDoc {
  error: { status: number; code: string; message: string; details: unknown };
}
