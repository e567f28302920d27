/** State and submission body for the score-override dialog. */
import type { OverrideScoreBody } from "./types.js";

export const CRITERIA = ["complexity", "coherence", "importance"] as const;

export interface OverrideDialogState {
  nodeId: string;
  criterion: string;
  likert: number;
  explanation: string;
}

/** The exact JSON body posted to /sessions/{id}/tree/override_score. */
export function buildOverrideBody(state: OverrideDialogState): OverrideScoreBody {
  if (!state.nodeId) throw new Error("no node selected");
  if (!(CRITERIA as readonly string[]).includes(state.criterion)) {
    throw new Error(`unknown criterion ${state.criterion}`);
  }
  if (!Number.isInteger(state.likert) || state.likert < 1 || state.likert > 5) {
    throw new Error("likert must be an integer in 1..5");
  }
  return {
    node_id: state.nodeId,
    criterion: state.criterion,
    likert: state.likert,
    explanation: state.explanation,
  };
}
