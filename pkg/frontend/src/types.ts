/**
 * Serve-mode document shapes. Field names mirror the server's JSON exactly;
 * the UI never invents or recomputes any of these values.
 */

export interface ClaimDoc {
  text: string;
  atomic: boolean;
}

export interface AdjustmentStepDoc {
  factor_id: string;
  explanation: string;
  score: number;
}

export interface ScoreTraceDoc {
  anchor_explanation: string;
  anchor_score: number;
  steps: AdjustmentStepDoc[];
  final: number;
}

export interface TreeNodeDoc {
  id: string;
  claim: ClaimDoc;
  children: TreeNodeDoc[];
  score_trace: ScoreTraceDoc | null;
  propagated_prob: number | null;
  pruned: boolean;
}

export interface FactorDoc {
  id: string;
  text: string;
  source_id: string;
  modality: string;
  start: number;
  end: number;
  timestamp_label: string | null;
}

export interface SourceDoc {
  id: string;
  modality: string;
  uri: string;
  length: number;
}

export interface BankDoc {
  sources: SourceDoc[];
  factors: FactorDoc[];
}

interface RunDocBase {
  revision: number;
  config: Record<string, unknown>;
  overrides: Record<string, number>;
  anchor_context?: string;
  counterfactual?: string | null;
}

export interface TreeRunDoc extends RunDocBase {
  kind: "tree";
  tree: TreeNodeDoc;
  root_prob: number;
  bank: BankDoc;
}

export interface McqRunDoc extends RunDocBase {
  kind: "mcq";
  question: string;
  options: ClaimDoc[];
  trees: TreeNodeDoc[];
  option_scores: number[];
  chosen: number;
  rounds: BankDoc[];
  judge_rationale?: string | null;
}

export type RunDoc = TreeRunDoc | McqRunDoc;

export interface RunListEntry {
  id: string;
  kind: string;
  revision: number;
}
