export const CSV_COLUMNS = [
  'scheme',
  'sweep_param',
  'sweep_value',
  'trial',
  'seed',
  'user',
  'ee_bits_hz_j',
  'min_ee',
  'move_dist_norm',
  'avg_move_dist_norm',
  'iterations',
  'feasible',
  'wall_ms',
] as const;

export type CsvColumn = (typeof CSV_COLUMNS)[number];

export interface SweepRow {
  scheme: string;
  sweep_param: string;
  sweep_value: number;
  trial: number;
  seed: number;
  user: number;
  ee_bits_hz_j: number;
  min_ee: number;
  move_dist_norm: number;
  avg_move_dist_norm: number;
  iterations: number;
  feasible: boolean;
  wall_ms: number;
}

export type Metric = 'min_ee' | 'avg_move_dist_norm' | 'trace';
export type Aggregation = 'median' | 'mean';

export interface FigureSpec {
  csvPath: string;
  xColumn: string;
  metric: Metric;
  outPath: string;
  aggregation: Aggregation;
  band: boolean; // inter-quartile band around the aggregate
  schemes?: string[]; // optional filter; default: every scheme in the file
}

export interface AggregatedPoint {
  x: number;
  y: number;
  lo?: number;
  hi?: number;
  count: number;
}

export interface AggregatedSeries {
  scheme: string;
  points: AggregatedPoint[];
}

/** Machine-readable dump of exactly what the figure shows. */
export interface SidecarDump {
  metric: Metric;
  xColumn: string;
  aggregation: Aggregation;
  band: boolean;
  series: AggregatedSeries[];
}

export class SchemaMismatch extends Error {
  constructor(message: string) {
    super(message);
    this.name = 'SchemaMismatch';
  }
}

export class EmptySelection extends Error {
  constructor(message: string) {
    super(message);
    this.name = 'EmptySelection';
  }
}
