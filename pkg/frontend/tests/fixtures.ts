import type { BankDoc, McqRunDoc, TreeNodeDoc, TreeRunDoc } from "../src/types.js";

export function scoredLeaf(id: string, text: string, final: number,
                           factorId = "src:0:0", pruned = false): TreeNodeDoc {
  return {
    id,
    claim: { text, atomic: true },
    children: [],
    score_trace: {
      anchor_explanation: "anchor",
      anchor_score: 0.5,
      steps: [{ factor_id: factorId, explanation: "adjusted", score: final }],
      final,
    },
    propagated_prob: final,
    pruned,
  };
}

export function internal(id: string, text: string, children: TreeNodeDoc[],
                         propagated: number | null): TreeNodeDoc {
  return {
    id,
    claim: { text, atomic: false },
    children,
    score_trace: null,
    propagated_prob: propagated,
    pruned: false,
  };
}

export const BANK: BankDoc = {
  sources: [{ id: "src", modality: "text", uri: "mem://doc", length: 100 }],
  factors: [{
    id: "src:0:0",
    text: "Rows of white chairs face a floral arch.",
    source_id: "src",
    modality: "text",
    start: 0,
    end: 8,
    timestamp_label: null,
  }],
};

/** Three-node tree run: two scored leaves at 0.8, root product 0.64. */
export function treeRunDoc(): TreeRunDoc {
  return {
    kind: "tree",
    revision: 0,
    config: {},
    overrides: {},
    tree: internal("0", "Both halves hold.", [
      scoredLeaf("0.0", "The first half holds.", 0.8),
      scoredLeaf("0.1", "The second half holds.", 0.8),
    ], 0.64),
    root_prob: 0.64,
    bank: BANK,
  };
}

/** Two-option episode: product scores 0.64 vs 0.5, option 1 currently chosen. */
export function mcqRunDoc(): McqRunDoc {
  return {
    kind: "mcq",
    revision: 0,
    config: { ag: "product" },
    overrides: {},
    question: "What event is taking place?",
    options: [
      { text: "A wedding is taking place.", atomic: false },
      { text: "A funeral is taking place.", atomic: false },
    ],
    trees: [
      internal("0", "A wedding is taking place.", [
        scoredLeaf("0.0", "People are gathered.", 0.8),
        scoredLeaf("0.1", "The ceremony is a wedding.", 0.8),
      ], 0.64),
      internal("0", "A funeral is taking place.", [
        scoredLeaf("0.0", "People are gathered twice.", 1.0),
        scoredLeaf("0.1", "The ceremony is a funeral.", 0.5),
      ], 0.5),
    ],
    option_scores: [0.64, 0.5],
    chosen: 0,
    rounds: [BANK],
    judge_rationale: null,
  };
}

/** The same episode after overriding leaf 0:0.0 to 0.5 and repropagating. */
export function mcqAfterEditDoc(): McqRunDoc {
  const doc = mcqRunDoc();
  doc.revision = 2;
  doc.overrides = { "0:0.0": 0.5 };
  const tree0 = doc.trees[0]!;
  tree0.children[0]!.propagated_prob = 0.5; // trace final stays 0.8
  tree0.propagated_prob = 0.4;
  doc.option_scores = [0.4, 0.5];
  doc.chosen = 1;
  return doc;
}
