/** Payload shapes served by the analysis HTTP API. */

export interface TaskDict {
  id: string;
  label: string;
  description: string;
  explanation: string;
  parent_ids: string[];
}

export interface VoteDict {
  judge: string;
  verdict: boolean | null;
  reasoning: string;
}

export interface CriterionScoreDict {
  criterion: string;
  votes: VoteDict[];
  score: number;
  likert: number;
  overridden: boolean;
  override_explanation: string | null;
  summary: string;
}

export interface NodeDict {
  task: TaskDict;
  visits: number;
  value_sum: number;
  reward: number | null;
  scores: Record<string, CriterionScoreDict>;
  children: string[];
  depth: number;
  flags: {
    is_end: boolean;
    newest_generation: boolean;
    on_best_path: boolean;
    user_created: boolean;
  };
  own_count: number;
  own_mass: number;
}

export interface TreeDict {
  goal: string;
  dataset_context: string;
  config: Record<string, unknown>;
  nodes: Record<string, NodeDict>;
  root_id: string;
  selected_plan: string[];
  next_id: number;
}

export interface ChartSubregion {
  category: string | null;
  count: number;
  start_angle: number;
  width: number;
}

export interface ChartRegion {
  topic: string;
  count: number;
  start_angle: number;
  angle: number;
  doc_ids: string[];
  subregions: ChartSubregion[];
}

export interface ChartPayload {
  total: number;
  regions: ChartRegion[];
  docs?: { id: string; topic: string; category: string | null }[];
  bar?: { category: string | null; count: number }[];
}

export interface OverrideScoreBody {
  node_id: string;
  criterion: string;
  likert: number;
  explanation: string;
}
