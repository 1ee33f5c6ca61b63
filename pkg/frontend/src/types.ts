/** Wire shapes served by the marking service. */

/* Tag payloads arrive as [key, value] pairs; other statement kinds
 * carry bare strings.  The client never looks inside beyond picking
 * tooltip keys, and never reorders or rewrites anything. */
export type PayloadPart = string | [string, string];

export interface StatementPayload {
  stype: string;
  display_text: string;
  payload: PayloadPart[];
  token_span: number[];
}

export interface FormPayload {
  form_id: string;
  question: string;
  statements: StatementPayload[];
  tooltips: Record<string, string>;
  served_at: number | null;
}

export type Verdict = 'yes' | 'no';

export interface MarkingVerdict {
  index: number;
  verdict: Verdict;
}

export interface RecordPayload {
  question: string;
  tokens: string[];
  propensity: number;
  seq_reward: number;
  token_rewards: number[];
  covered: number[];
  source: string;
  timing_seconds: number | null;
}

export interface SubmitAck {
  form_id: string;
  record: RecordPayload;
}

export interface ProgressPayload {
  pending: number;
  submitted: number;
  mean_timing: number | null;
  stddev_timing: number | null;
}
