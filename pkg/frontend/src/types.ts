/** Wire types of the `/v1` composer API. The server is the single source of
 * truth; the client never recomputes a ranking number. */

export interface RankedCandidate {
  item_id: string;
  score: number;
  query_distance: number | null;
  compatibility: number | null;
}

export interface TraceStep {
  step: number;
  slot: string;
  action: string;
  sampling: string;
  k: number;
  chosen: string;
  candidates: RankedCandidate[];
}

export interface GenerationConfig {
  k: number;
  sampling: "greedy" | "uniform" | "biased";
  compat_mode: "cat" | "image" | "text";
  seed: number;
}

export interface OutfitSlotItem {
  item_id: string;
  slot: string;
  title: string;
}

export interface SessionView {
  session_id: string;
  query_text: string;
  slots: string[];
  filled: Record<string, string>;
  locked: string[];
  config: GenerationConfig;
  trace: TraceStep[];
  version: number;
  created_at: string;
  updated_at: string;
  complete: boolean;
  active_slot: string | null;
  candidates: RankedCandidate[];
  outfit?: OutfitSlotItem[];
}

export interface SearchResult {
  item_id: string;
  title: string;
  semantic_type: string;
  distance: number;
  image_url: string;
}

export interface ApiErrorBody {
  code: string;
  message: string;
  details: Record<string, unknown>;
}

export interface CreateSessionRequest {
  query_text: string;
  slots: string[];
  config?: Partial<GenerationConfig>;
  starting_items?: string[];
}

export type StepAction =
  | { action: "auto" }
  | { action: "choose"; item_id: string }
  | { action: "undo" }
  | { action: "lock"; slot: string }
  | { action: "unlock"; slot: string };
