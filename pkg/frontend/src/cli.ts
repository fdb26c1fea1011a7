#!/usr/bin/env node
import { render } from './figure.js';
import { Aggregation, EmptySelection, FigureSpec, Metric, SchemaMismatch } from './types.js';

const USAGE = `usage: maee-plot --csv <file> --metric <min_ee|avg_move_dist_norm|trace> \
--x <column> --out <image.svg> [--agg median|mean] [--band] [--schemes a,b]`;

function parseArgs(argv: string[]): FigureSpec {
  const opts = new Map<string, string>();
  const flags = new Set<string>();
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (!arg.startsWith('--')) {
      throw new Error(`unexpected argument '${arg}'`);
    }
    const name = arg.slice(2);
    if (name === 'band') {
      flags.add(name);
    } else {
      const value = argv[++i];
      if (value === undefined) {
        throw new Error(`missing value for --${name}`);
      }
      opts.set(name, value);
    }
  }
  for (const required of ['csv', 'metric', 'x', 'out']) {
    if (!opts.has(required)) {
      throw new Error(`missing --${required}`);
    }
  }
  const metric = opts.get('metric')!;
  if (!['min_ee', 'avg_move_dist_norm', 'trace'].includes(metric)) {
    throw new Error(`unknown metric '${metric}'`);
  }
  const aggregation = opts.get('agg') ?? 'median';
  if (!['median', 'mean'].includes(aggregation)) {
    throw new Error(`unknown aggregation '${aggregation}'`);
  }
  return {
    csvPath: opts.get('csv')!,
    metric: metric as Metric,
    xColumn: opts.get('x')!,
    outPath: opts.get('out')!,
    aggregation: aggregation as Aggregation,
    band: flags.has('band'),
    schemes: opts.get('schemes')?.split(',').map((s) => s.trim()),
  };
}

export function main(argv: string[]): number {
  let spec: FigureSpec;
  try {
    spec = parseArgs(argv);
  } catch (err) {
    console.error((err as Error).message);
    console.error(USAGE);
    return 2;
  }
  try {
    const series = render(spec);
    const points = series.reduce((acc, s) => acc + s.points.length, 0);
    console.log(
      `wrote ${spec.outPath} and ${spec.outPath}.json ` +
        `(${series.length} series, ${points} points)`,
    );
    return 0;
  } catch (err) {
    if (err instanceof SchemaMismatch || err instanceof EmptySelection) {
      console.error(`${(err as Error).name}: ${(err as Error).message}`);
      return 1;
    }
    throw err;
  }
}

const invokedDirectly =
  process.argv[1] !== undefined && import.meta.url.endsWith(process.argv[1].split('/').pop()!);
if (invokedDirectly) {
  process.exit(main(process.argv.slice(2)));
}
