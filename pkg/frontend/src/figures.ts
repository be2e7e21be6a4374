/**
 * The four standard figures built from solver output files.  Each builder
 * returns the SVG text plus the quantities it re-derived from the raw data,
 * so callers can cross-check them against the numbers the solver reported.
 */
import { writeFileSync } from "node:fs";
import { logLogFit } from "./fit.js";
import {
  ENERGY_COLUMNS,
  PICARD_COLUMNS,
  STEP_COLUMNS,
  SchemaError,
  ensembleSummarySchema,
  hypoReportSchema,
  readCsv,
  readJson,
} from "./schema.js";
import { renderChart } from "./svg.js";

export type FigureKind = "norms" | "picard" | "hypo_rates" | "ensemble";

export interface FigureRequest {
  kind: FigureKind;
  /** input files; meaning depends on kind (see each builder) */
  inputs: string[];
  output: string;
}

export interface FigureResult {
  svg: string;
  /** quantities re-derived from the raw inputs */
  fitted: Record<string, number>;
}

const PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b", "#e377c2"];

/** inputs: [steps.csv] -- norm and field-energy evolution of one run */
function buildNorms(inputs: string[]): FigureResult {
  const table = readCsv(inputs[0], STEP_COLUMNS);
  const t = table.columns.get("t")!;
  const series = (["L2", "Hs0m0_norm", "E_energy"] as const).map((name, i) => ({
    x: t,
    y: table.columns.get(name)!,
    color: PALETTE[i],
    label: name,
  }));
  const mass = table.columns.get("mass")!;
  const massDrift =
    Math.abs(mass[mass.length - 1] - mass[0]) / Math.abs(mass[0]);
  return {
    svg: renderChart({
      title: "norm evolution",
      xLabel: "t",
      yLabel: "value",
      series,
    }),
    fitted: {
      final_L2: table.columns.get("L2")![t.length - 1],
      mass_drift: massDrift,
    },
  };
}

/** inputs: [picard.csv] -- iteration differences against the decay envelope */
function buildPicard(inputs: string[]): FigureResult {
  const table = readCsv(inputs[0], PICARD_COLUMNS);
  const j = table.columns.get("j")!;
  const d = table.columns.get("d_j")!;
  const env = table.columns.get("envelope_j")!;
  const floor = 1e-300;
  const series = [
    {
      x: j,
      y: d.map((v) => Math.max(v, floor)),
      color: PALETTE[0],
      label: "d_j",
      markers: true,
    },
    {
      x: j,
      y: env.map((v) => Math.max(v, floor)),
      color: PALETTE[1],
      label: "envelope",
      dashed: true,
    },
  ];
  let dominated = 1;
  for (let i = 1; i < j.length; i++) {
    if (d[i] > env[i]) dominated = 0;
  }
  return {
    svg: renderChart({
      title: "iteration difference decay",
      xLabel: "iteration j",
      yLabel: "difference",
      series,
      logY: true,
    }),
    fitted: {
      last_over_first: d[d.length - 1] / d[0],
      envelope_dominates: dominated,
    },
  };
}

/** inputs: [energy.csv, report.json?] -- log-log smoothing rates, re-fitted */
function buildHypoRates(inputs: string[]): FigureResult {
  const table = readCsv(inputs[0], ENERGY_COLUMNS);
  const t = table.columns.get("t")!;
  const gradX = table.columns.get("gradx_sq")!.map(Math.sqrt);
  const gradV = table.columns.get("gradv_sq")!.map(Math.sqrt);
  const fitX = logLogFit(t, gradX);
  const fitV = logLogFit(t, gradV);
  const lineFor = (fit: { slope: number; intercept: number }) =>
    t.map((tv) => Math.exp(fit.intercept + fit.slope * Math.log(tv)));
  const series = [
    { x: t, y: gradX, color: PALETTE[0], label: "x-gradient", markers: true },
    { x: t, y: lineFor(fitX), color: PALETTE[0], label: "", dashed: true },
    { x: t, y: gradV, color: PALETTE[1], label: "v-gradient", markers: true },
    { x: t, y: lineFor(fitV), color: PALETTE[1], label: "", dashed: true },
  ];
  const fitted: Record<string, number> = {
    gradx_slope: fitX.slope,
    gradv_slope: fitV.slope,
  };
  if (inputs.length > 1) {
    const report = readJson(inputs[1], hypoReportSchema);
    fitted.reported_gradx_slope = report.gradx_slope;
    fitted.reported_gradv_slope = report.gradv_slope;
    fitted.gradx_slope_gap = Math.abs(fitX.slope - report.gradx_slope);
    fitted.gradv_slope_gap = Math.abs(fitV.slope - report.gradv_slope);
  }
  return {
    svg: renderChart({
      title: `smoothing rates (slopes ${fitX.slope.toFixed(3)}, ${fitV.slope.toFixed(3)})`,
      xLabel: "t",
      yLabel: "gradient norm",
      series,
      logX: true,
      logY: true,
    }),
    fitted,
  };
}

/** inputs: [summary.json, run.csv...] -- per-realization norms plus the mean */
function buildEnsemble(inputs: string[]): FigureResult {
  const summary = readJson(inputs[0], ensembleSummarySchema);
  const runs = inputs.slice(1).map((p) => readCsv(p, STEP_COLUMNS));
  if (runs.length === 0) {
    throw new SchemaError("ensemble figure needs at least one run CSV");
  }
  const t = runs[0].columns.get("t")!;
  const series = runs.map((run, i) => ({
    x: run.columns.get("t")!,
    y: run.columns.get("Hs0m0_norm")!,
    color: PALETTE[i % PALETTE.length],
    label: `run ${i}`,
  }));
  const mean = t.map(
    (_, k) =>
      runs.reduce((a, run) => a + run.columns.get("Hs0m0_norm")![k], 0) /
      runs.length,
  );
  series.push({ x: t, y: mean, color: "black", label: "mean" });
  const supNorms = runs.map((run) =>
    Math.max(...run.columns.get("Hs0m0_norm")!),
  );
  const empiricalSecondMoment =
    supNorms.reduce((a, v) => a + v * v, 0) / supNorms.length;
  return {
    svg: renderChart({
      title: `ensemble norms (${summary.realizations} realizations)`,
      xLabel: "t",
      yLabel: "weighted norm",
      series,
    }),
    fitted: {
      realizations: summary.realizations,
      sup_second_moment: empiricalSecondMoment,
    },
  };
}

const BUILDERS: Record<FigureKind, (inputs: string[]) => FigureResult> = {
  norms: buildNorms,
  picard: buildPicard,
  hypo_rates: buildHypoRates,
  ensemble: buildEnsemble,
};

export function plot(request: FigureRequest): FigureResult {
  const builder = BUILDERS[request.kind];
  if (!builder) {
    throw new SchemaError(`unknown figure kind "${request.kind}"`);
  }
  if (request.inputs.length === 0) {
    throw new SchemaError("at least one input file is required");
  }
  const result = builder(request.inputs);
  writeFileSync(request.output, result.svg + "\n");
  return result;
}
