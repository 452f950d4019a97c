import type {
  BankDoc, FactorDoc, McqRunDoc, RunDoc, TreeNodeDoc,
} from "./types.js";

/** One evidence line under a leaf: grounding label, observation, explanation, score. */
export interface EvidenceView {
  label: string;
  text: string;
  explanation: string;
  scoreDisplay: string;
}

/** One rendered tree row. `ref` is the server-side node reference. */
export interface NodeRow {
  ref: string;
  depth: number;
  claim: string;
  isLeaf: boolean;
  pruned: boolean;
  struck: boolean;
  scoreDisplay: string | null;
  rawScore: number | null;
  overridden: boolean;
  changed: boolean;
  evidence: EvidenceView[];
}

export interface OptionRow {
  index: number;
  hypothesis: string;
  score: number;
  scoreDisplay: string;
  chosen: boolean;
}

export interface RunView {
  kind: "tree" | "mcq";
  revision: number;
  question: string | null;
  rootDisplay: string | null;
  rawRootProb: number | null;
  rows: NodeRow[];
  /** Sorted best-first; null for tree-only runs (the option panel is hidden). */
  options: OptionRow[] | null;
}

/** All displayed scores are formatted to exactly two decimals. */
export function formatScore(value: number): string {
  return value.toFixed(2);
}

/** Parse a score input; returns null unless it is a number within [0, 1]. */
export function parseScoreInput(text: string): number | null {
  const trimmed = text.trim();
  if (trimmed === "" || !/^[0-9.+-eE]+$/.test(trimmed)) return null;
  const value = Number(trimmed);
  if (!Number.isFinite(value) || value < 0 || value > 1) return null;
  return value;
}

function latestBank(doc: RunDoc): BankDoc | null {
  if (doc.kind === "tree") return doc.bank ?? null;
  const rounds = doc.rounds ?? [];
  return rounds.length ? rounds[rounds.length - 1] ?? null : null;
}

export function factorIndex(doc: RunDoc): Map<string, FactorDoc> {
  const index = new Map<string, FactorDoc>();
  const bank = latestBank(doc);
  for (const factor of bank?.factors ?? []) index.set(factor.id, factor);
  return index;
}

/** Grounding label: the timestamp when present, otherwise source and span range. */
export function spanLabel(factor: FactorDoc): string {
  if (factor.timestamp_label) return factor.timestamp_label;
  if (factor.start === factor.end) return `${factor.source_id} @ ${factor.start}`;
  return `${factor.source_id} lines ${factor.start}–${factor.end}`;
}

function conditionalLabel(factorId: string): string {
  return factorId.startsWith("cond:") ? "conditioned claim" : factorId;
}

function nodeRows(
  tree: TreeNodeDoc,
  refPrefix: string,
  overrides: Record<string, number>,
  factors: Map<string, FactorDoc>,
  previous: Map<string, number | null>,
  ancestorPruned: boolean,
  depth: number,
  out: NodeRow[],
): void {
  const ref = refPrefix + tree.id;
  const override = overrides[ref];
  const raw = override !== undefined ? override
    : tree.propagated_prob !== null ? tree.propagated_prob
    : tree.score_trace ? tree.score_trace.final : null;
  const struck = ancestorPruned || tree.pruned;
  const evidence: EvidenceView[] = [];
  if (tree.children.length === 0 && tree.score_trace) {
    for (const step of tree.score_trace.steps) {
      const factor = factors.get(step.factor_id);
      evidence.push({
        label: factor ? spanLabel(factor) : conditionalLabel(step.factor_id),
        text: factor ? factor.text : step.factor_id,
        explanation: step.explanation,
        scoreDisplay: formatScore(step.score),
      });
    }
  }
  const before = previous.get(ref);
  out.push({
    ref,
    depth,
    claim: tree.claim.text,
    isLeaf: tree.children.length === 0,
    pruned: tree.pruned,
    struck,
    scoreDisplay: raw === null ? null : formatScore(raw),
    rawScore: raw,
    overridden: override !== undefined,
    changed: before !== undefined && before !== tree.propagated_prob,
    evidence,
  });
  for (const child of tree.children) {
    nodeRows(child, refPrefix, overrides, factors, previous, struck, depth + 1, out);
  }
}

function propagatedByRef(doc: RunDoc | null | undefined): Map<string, number | null> {
  const index = new Map<string, number | null>();
  if (!doc) return index;
  const walk = (node: TreeNodeDoc, prefix: string) => {
    index.set(prefix + node.id, node.propagated_prob);
    for (const child of node.children) walk(child, prefix);
  };
  if (doc.kind === "tree") walk(doc.tree, "");
  else doc.trees.forEach((tree, i) => walk(tree, `${i}:`));
  return index;
}

function optionRows(doc: McqRunDoc): OptionRow[] {
  const rows = doc.options.map((option, index) => {
    const score = doc.option_scores[index] ?? 0;
    return {
      index,
      hypothesis: option.text,
      score,
      scoreDisplay: formatScore(score),
      chosen: index === doc.chosen,
    };
  });
  rows.sort((a, b) => b.score - a.score || a.index - b.index);
  return rows;
}

/**
 * Flatten a run document into display rows. Every displayed value comes
 * straight from the document; `previous` (the last accepted document) is
 * only used to flag which propagated values changed.
 */
export function buildRunView(doc: RunDoc, previous?: RunDoc | null): RunView {
  const factors = factorIndex(doc);
  const before = propagatedByRef(previous);
  const rows: NodeRow[] = [];
  if (doc.kind === "tree") {
    nodeRows(doc.tree, "", doc.overrides ?? {}, factors, before, false, 0, rows);
    return {
      kind: "tree",
      revision: doc.revision,
      question: null,
      rootDisplay: formatScore(doc.root_prob),
      rawRootProb: doc.root_prob,
      rows,
      options: null,
    };
  }
  doc.trees.forEach((tree, i) =>
    nodeRows(tree, `${i}:`, doc.overrides ?? {}, factors, before, false, 0, rows));
  const chosenScore = doc.option_scores[doc.chosen] ?? null;
  return {
    kind: "mcq",
    revision: doc.revision,
    question: doc.question,
    rootDisplay: chosenScore === null ? null : formatScore(chosenScore),
    rawRootProb: chosenScore,
    rows,
    options: optionRows(doc),
  };
}
