// Shapes served by the procforge REST API.

export interface WorklistItem {
  task_id: string;
  instance_id: string;
  activity_id: string;
  role: string;
  guard_options: string[];
  waiting_since_s: number | null;
}

export interface PlacementView {
  cloud_id: string;
  machine_type: string;
  instance_count: number;
  estimated_duration_s: number;
  estimated_cost: string;
}

export interface ActivityView {
  kind: string;
  role: string;
  state: string;
  attempt: number;
  decision_label: string | null;
  level: number | null;
  placement: PlacementView | null;
  started_at_s: number | null;
  finished_at_s: number | null;
}

export interface EdgeView {
  from: string;
  to: string;
  guard: string | null;
}

export interface CostSummary {
  per_cloud: Record<string, string>;
  total: string;
}

export interface InstanceSnapshot {
  instance_id: string;
  model_id: string;
  status: string;
  sim_time_s: number;
  activities: Record<string, ActivityView>;
  edges: EdgeView[];
  artifacts: [string, number][];
  costs: CostSummary;
  last_seq: number;
}

export interface InstanceSummary {
  instance_id: string;
  model_id: string;
  status: string;
  sim_time_s: number;
}

export interface ApiEvent {
  seq: number;
  t: number;
  kind: string;
  payload: Record<string, unknown>;
}

export interface EventsSlice {
  events: ApiEvent[];
  last_seq: number;
}
