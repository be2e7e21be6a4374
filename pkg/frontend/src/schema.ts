/**
 * Readers for the solver's output files: CSV step logs, iteration reports,
 * energy traces, and JSON summaries.  Every reader validates the columns or
 * fields it needs and fails with the missing name, so a schema drift in the
 * producer surfaces as a clear error instead of NaN plots.
 */
import { readFileSync } from "node:fs";
import Papa from "papaparse";
import { z } from "zod";

export class SchemaError extends Error {}

export interface Table {
  /** column name -> numeric values, row-aligned */
  columns: Map<string, number[]>;
  rows: number;
}

export function readCsv(path: string, required: string[]): Table {
  const text = readFileSync(path, "utf8");
  const parsed = Papa.parse<Record<string, unknown>>(text, {
    header: true,
    dynamicTyping: true,
    skipEmptyLines: true,
  });
  const fields = parsed.meta.fields ?? [];
  for (const name of required) {
    if (!fields.includes(name)) {
      throw new SchemaError(`missing column "${name}" in ${path}`);
    }
  }
  if (parsed.data.length === 0) {
    throw new SchemaError(`no data rows in ${path}`);
  }
  const columns = new Map<string, number[]>();
  for (const name of required) {
    const values = parsed.data.map((row, i) => {
      const v = row[name];
      if (typeof v !== "number" || !Number.isFinite(v)) {
        throw new SchemaError(
          `non-numeric value in column "${name}" row ${i + 1} of ${path}`,
        );
      }
      return v;
    });
    columns.set(name, values);
  }
  return { columns, rows: parsed.data.length };
}

export const STEP_COLUMNS = [
  "step",
  "t",
  "mass",
  "L2",
  "Hs0m0_norm",
  "theta_R",
  "min_f",
  "E_energy",
];

export const PICARD_COLUMNS = ["j", "d_j", "envelope_j", "ratio_j"];

export const ENERGY_COLUMNS = [
  "t",
  "E_sigma",
  "D_sigma",
  "norm_sq",
  "gradv_sq",
  "cross",
  "gradx_sq",
];

const momentSchema = z.object({
  mean: z.number(),
  ci_low: z.number(),
  ci_high: z.number(),
  max: z.number(),
});

export const ensembleSummarySchema = z.object({
  realizations: z.number().int().positive(),
  failures: z.array(z.unknown()),
  moments: z.record(z.string(), momentSchema),
  stopping_quantiles: z.record(
    z.string(),
    z.object({
      fraction_crossed: z.number(),
      median: z.number().nullable(),
      q10: z.number().nullable(),
      q90: z.number().nullable(),
    }),
  ),
});

export type EnsembleSummary = z.infer<typeof ensembleSummarySchema>;

export const hypoReportSchema = z.object({
  constants: z.object({
    epsilon: z.number(),
    a: z.number(),
    b: z.number(),
    c: z.number(),
    admissible: z.boolean(),
  }),
  gradx_slope: z.number(),
  gradv_slope: z.number(),
  sup_E_sigma: z.number(),
  initial_norm_sq: z.number(),
});

export type HypoReport = z.infer<typeof hypoReportSchema>;

export function readJson<T>(path: string, schema: z.ZodType<T>): T {
  let doc: unknown;
  try {
    doc = JSON.parse(readFileSync(path, "utf8"));
  } catch (err) {
    throw new SchemaError(`cannot parse ${path}: ${(err as Error).message}`);
  }
  const result = schema.safeParse(doc);
  if (!result.success) {
    const issue = result.error.issues[0];
    throw new SchemaError(
      `invalid field "${issue.path.join(".")}" in ${path}: ${issue.message}`,
    );
  }
  return result.data;
}
