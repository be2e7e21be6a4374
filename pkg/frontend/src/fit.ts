/** Ordinary least squares on log-log data, mirroring the solver's rate fit. */

export interface LogLogFit {
  slope: number;
  intercept: number;
  residualRms: number;
}

export function logLogFit(times: number[], norms: number[]): LogLogFit {
  if (times.length !== norms.length) {
    throw new Error("times and norms must have equal length");
  }
  if (times.length < 2) {
    throw new Error("need at least 2 samples for a slope fit");
  }
  for (let i = 0; i < times.length; i++) {
    if (times[i] <= 0 || norms[i] <= 0) {
      throw new Error("log-log fit needs positive samples");
    }
  }
  const lx = times.map(Math.log);
  const ly = norms.map(Math.log);
  const n = lx.length;
  const mx = lx.reduce((a, b) => a + b, 0) / n;
  const my = ly.reduce((a, b) => a + b, 0) / n;
  let sxx = 0;
  let sxy = 0;
  for (let i = 0; i < n; i++) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  const slope = sxy / sxx;
  const intercept = my - slope * mx;
  let rss = 0;
  for (let i = 0; i < n; i++) {
    const r = ly[i] - (slope * lx[i] + intercept);
    rss += r * r;
  }
  return { slope, intercept, residualRms: Math.sqrt(rss / n) };
}
