/**
 * Wire shapes served by the miniorc gateway, mirrored field by field.
 *
 * Resource quantities arrive as exact fraction strings ("16", "3/2"); the
 * dashboard renders them verbatim and never re-derives a number the
 * gateway already reports.
 */

export interface Vector {
  cpu: string;
  mem: string;
  disk: string;
}

export interface ClockInfo {
  mode: string;
  now: number;
}

export interface ApiErrorEnvelope {
  error: {
    code: string;
    message: string;
    detail?: unknown;
    request_id: string;
  };
}

export interface Claims {
  active: boolean;
  reason?: string;
  account_id?: string;
  groups?: string[];
  audience?: string;
  token_id?: string;
  expires_at?: number;
  admin?: boolean;
}

export interface HistoryEntry {
  at: number;
  state: string;
  detail: Record<string, unknown>;
}

export interface Placement {
  site_id: string;
  asks: [string, Vector][];
  sla_id: string | null;
  sla_class: string;
  data_plan: string;
  transfers: string[];
}

export interface DeploymentEndpoint {
  name: string;
  address: string;
  credential?: string;
}

export interface Deployment {
  deployment_id: string;
  owner: string;
  scenario: string;
  state: string;
  failure: string | null;
  created_at: number;
  age: number;
  placement: Placement | null;
  endpoints: DeploymentEndpoint[];
  validation: { deployable: boolean; errors: string[]; warnings: string[] } | null;
  retry_attempts: number;
  rematches: number;
  reprovisions: number;
  instances: Record<string, string>;
  services: Record<string, string>;
  jobs: Record<string, string>;
  history: HistoryEntry[];
}

export interface SiteDescriptor {
  site_id: string;
  capacity: Vector;
  storage_capacity: number;
  supported_sla_classes: string[];
  base_cost: number;
  capabilities: string[];
  on_demand_quota: Vector | null;
}

export interface MonitorSample {
  site_id: string;
  timestamp: number;
  free: Vector;
  error_rate: number;
  latency_ms: number;
}

export interface SiteState {
  descriptor: SiteDescriptor;
  last_sample: MonitorSample | null;
  health: string;
}

export interface RankResult {
  ordered: [string, number][];
  rejected: [string, { attribute: string; comparator: string; value: unknown }][];
}

export interface ClusterNode {
  node_id: string;
  total: Vector;
  free: Vector;
  attributes: Record<string, string>;
  alive: boolean;
  created_at: number;
  idle_since: number | null;
}

export interface Framework {
  framework_id: string;
  kind: string;
  allocation: Vector;
  dominant_share: string;
  dominant_share_float: number;
  queue_length: number;
}

export interface QueueEntry {
  seq: number;
  framework_id: string;
  demand: Vector;
  unit_id: string;
  enqueued_at: number;
}

export interface ServiceInstance {
  instance_id: string;
  state: string;
  node_id: string | null;
  task_id: string | null;
  placed_step: number | null;
}

export interface Service {
  service_id: string;
  demand: Vector;
  replicas_target: number;
  endpoint: string;
  framework_id: string;
  labels: Record<string, string>;
  instances: ServiceInstance[];
  instance_counter: number;
}

export interface ClusterView {
  now: number;
  policy: string;
  total: Vector;
  nodes: ClusterNode[];
  frameworks: Framework[];
  queue: QueueEntry[];
  services: Service[];
  jobs: unknown[];
  tasks: unknown[];
}

export interface TransferJob {
  job_id: string;
  dataset_id: string;
  src_site: string;
  dst_site: string;
  total_bytes: number;
  files: { path: string; size: number; checksum: string }[];
  state: string;
  streams: number;
  bytes_moved: string;
  bytes_moved_float: number;
  created_at: number;
  finished_at: number | null;
  failure: string | null;
  direction: string;
  window_bytes: string;
  window_seconds: string;
  window_ticks: number;
  prev_window_rate: string | null;
  tick_count: number;
  throughput_history: [number, number][];
}

export interface Replica {
  dataset_id: string;
  site_id: string;
  completeness: string;
  completeness_float: number;
  complete: boolean;
  qos: { access_latency: string; retention: string; replication_min: number };
}

export interface DatasetEntry {
  dataset_id: string;
  space: string;
  owner: string;
  total_size: number;
  files: { path: string; size: number; checksum: string }[];
  replicas: Replica[];
}

export interface SlaRecord {
  sla_id: string;
  account_id: string;
  site_id: string;
  sla_class: string;
  max_cores: number;
  max_storage: number;
  valid_until: number;
}

export interface PlatformEvent {
  event_id: number;
  at: number;
  kind: string;
  deployment_id?: string;
  state?: string;
  [extra: string]: unknown;
}

/** Detail payload persisted with every MATCHED history entry. */
export interface DecisionInputs {
  snapshot: SiteState[];
  ranking: RankResult;
  sla: { site_classes: Record<string, string> };
  replicas: Record<string, Replica[]>;
  required_capabilities: string[];
  total_ask: Vector;
  rejections: [string, string][];
  fit_free?: Vector;
  sla_check?: { record: SlaRecord; cores: number; storage_gib: number };
}
