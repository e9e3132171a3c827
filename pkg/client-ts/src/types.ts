/** Wire types for the reward service (normative: docs/wire-schema.json). */

export interface PromptMessage {
  content: string;
  role: string;
  [key: string]: unknown;
}

export interface RewardModelSpec {
  answer: string;
  ground_truth: string;
  accuracy_ratio: number;
  format_ratio: number;
  verifier: string;
  verifier_parm: Record<string, unknown>;
  [key: string]: unknown;
}

/** One training record, as stored in dataset files. */
export interface SampleRecord {
  data_source: string;
  images: string[];
  prompt: PromptMessage[];
  ability: string;
  reward_model: RewardModelSpec;
  extra_info: { id: string; image_path: string; [key: string]: unknown };
  [key: string]: unknown;
}

export interface VerifyItem {
  id: string;
  data_source: string;
  ability: string;
  verifier: string;
  verifier_parm: Record<string, unknown>;
  response: string;
  answer: string;
  ground_truth: string;
  accuracy_ratio: number;
  format_ratio: number;
}

export interface RewardRequest {
  batch_id: string;
  training_progress: number;
  items: VerifyItem[];
}

export interface ItemResult {
  id: string;
  combined: number;
  accuracy: number;
  format: number;
  aux_metrics: Record<string, number>;
  error: string | null;
}

export interface RewardResponse {
  batch_id: string;
  results: ItemResult[];
}
