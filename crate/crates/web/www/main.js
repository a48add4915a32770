import init, { simulate, steadyStateCurve, staticGainCurve } from './pkg/filt3r_web.js';

const $ = (id) => document.getElementById(id);
const COLORS = ['#1f77b4', '#d62728', '#2ca02c', '#9467bd'];

// Minimal line plot: series = [{ xs, ys, color, label }], optional marks.
function plot(canvas, series, { title = '', logX = false, hline = null, bands = [], point = null } = {}) {
  const dpr = window.devicePixelRatio || 1;
  const w = canvas.clientWidth, h = canvas.clientHeight;
  canvas.width = w * dpr; canvas.height = h * dpr;
  const ctx = canvas.getContext('2d');
  ctx.scale(dpr, dpr);
  ctx.clearRect(0, 0, w, h);
  const pad = { l: 52, r: 10, t: 18, b: 22 };
  const fx = logX ? Math.log10 : (v) => v;
  const xs = series.flatMap((s) => s.xs.map(fx));
  const ys = series.flatMap((s) => s.ys).filter(Number.isFinite);
  if (hline !== null) ys.push(hline);
  let [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  let [y0, y1] = [Math.min(0, ...ys), Math.max(...ys)];
  if (x1 === x0) x1 = x0 + 1;
  if (y1 === y0) y1 = y0 + 1;
  const px = (x) => pad.l + ((fx(x) - x0) / (x1 - x0)) * (w - pad.l - pad.r);
  const py = (y) => h - pad.b - ((y - y0) / (y1 - y0)) * (h - pad.t - pad.b);

  ctx.fillStyle = 'rgba(255, 160, 0, 0.18)';
  for (const [a, b] of bands) ctx.fillRect(px(a), pad.t, Math.max(1, px(b) - px(a)), h - pad.t - pad.b);

  ctx.strokeStyle = '#999'; ctx.lineWidth = 1;
  ctx.strokeRect(pad.l, pad.t, w - pad.l - pad.r, h - pad.t - pad.b);
  ctx.fillStyle = '#444'; ctx.font = '11px system-ui';
  ctx.fillText(title, pad.l + 4, 12);
  ctx.fillText(y1.toPrecision(3), 4, pad.t + 8);
  ctx.fillText(y0.toPrecision(3), 4, h - pad.b);
  const fmtX = (v) => (logX ? `1e${v.toFixed(1)}` : String(Math.round(v)));
  ctx.fillText(fmtX(x0), pad.l, h - 6);
  ctx.fillText(fmtX(x1), w - pad.r - 40, h - 6);

  if (hline !== null) {
    ctx.setLineDash([4, 3]); ctx.strokeStyle = '#888';
    ctx.beginPath(); ctx.moveTo(pad.l, py(hline)); ctx.lineTo(w - pad.r, py(hline)); ctx.stroke();
    ctx.setLineDash([]);
  }
  for (const s of series) {
    ctx.strokeStyle = s.color; ctx.lineWidth = 1.4; ctx.beginPath();
    s.xs.forEach((x, i) => (i ? ctx.lineTo(px(x), py(s.ys[i])) : ctx.moveTo(px(x), py(s.ys[i]))));
    ctx.stroke();
  }
  if (point) {
    ctx.fillStyle = '#d62728';
    ctx.beginPath(); ctx.arc(px(point[0]), py(point[1]), 4, 0, 2 * Math.PI); ctx.fill();
  }
}

const frames = (n) => Array.from({ length: n }, (_, i) => i + 1);
const pairs = (flat) => {
  const a = [], b = [];
  for (let i = 0; i < flat.length; i += 2) { a.push(flat[i]); b.push(flat[i + 1]); }
  return [a, b];
};
function bindOutputs(ids, fmt = (v) => v) {
  for (const id of ids) {
    const input = $(id), out = input.parentElement.querySelector('output');
    if (out) out.textContent = fmt(id, input.value);
  }
}

function runSimulation() {
  bindOutputs(['length', 'noise', 'tframe', 'tmag']);
  const length = Number($('length').value);
  $('sim-error').textContent = '';
  let sim;
  try {
    sim = simulate($('policy').value, Number($('seed').value), length,
      Number($('noise').value), Number($('tframe').value), Number($('tmag').value));
  } catch (e) {
    $('sim-error').textContent = e.message;
    return;
  }
  const xs = frames(length);
  const windows = pairs(sim.windows);
  const bands = windows[0].map((a, i) => [a, windows[1][i]]);
  const rmse = Array.from(sim.rmse), gain = Array.from(sim.gain);
  plot($('rmse-plot'), [{ xs, ys: rmse, color: COLORS[0] }], { title: 'RMSE to true latents', bands });
  plot($('gain-plot'), [
    { xs, ys: gain, color: COLORS[2] },
    { xs, ys: Array.from(sim.processNoise), color: COLORS[3] },
  ], { title: 'mean gain k (green), mean process noise q (purple)', bands });
  plot($('score-plot'), [
    { xs, ys: Array.from(sim.score), color: '#bbb' },
    { xs, ys: Array.from(sim.smoothedScore), color: COLORS[1] },
  ], { title: 'drift score (grey) and 11-frame mean (red); dashed = 90th percentile', hline: sim.threshold, bands });
  const tail = gain.slice(-Math.max(1, Math.floor(length / 5)));
  $('sim-stats').innerHTML =
    `<span>final RMSE ${rmse[rmse.length - 1].toFixed(4)}</span>` +
    `<span>late mean gain ${(tail.reduce((a, b) => a + b, 0) / tail.length).toFixed(4)}</span>` +
    `<span>transition windows ${bands.map(([a, b]) => `${a}–${b}`).join(', ') || 'none'}</span>`;
  sim.free();
}

function runSteadyState() {
  const q = 10 ** Number($('ss-q').value), r = 10 ** Number($('ss-r').value);
  bindOutputs(['ss-q', 'ss-r'], (_, v) => (10 ** Number(v)).toPrecision(3));
  const [ratios, gains] = pairs(steadyStateCurve(1e-4, 1e3, 200));
  const here = steadyStateCurve(q / r, q / r, 1);
  plot($('ss-plot'), [{ xs: ratios, ys: gains, color: COLORS[0] }],
    { title: 'k* as a function of q/r (log x)', logX: true, point: [here[0], here[1]] });
  $('ss-stats').innerHTML = `<span>q/r = ${(q / r).toPrecision(4)}</span><span>k* = ${here[1].toFixed(5)}</span>`;
}

function runStatic() {
  bindOutputs(['st-p0', 'st-r', 'st-t']);
  const p0 = Number($('st-p0').value), r = Number($('st-r').value), n = Number($('st-t').value);
  const [k, p] = pairs(staticGainCurve(p0, r, n));
  const xs = frames(n);
  plot($('st-plot'), [
    { xs, ys: k, color: COLORS[0] },
    { xs, ys: p, color: COLORS[1] },
  ], { title: 'gain k_t = 1/(t + r/p₀) (blue), variance p_t (red)' });
  $('st-stats').innerHTML = `<span>k_1 = ${k[0].toFixed(4)}</span><span>k_${n} = ${k[n - 1].toFixed(5)}</span>`;
}

await init();
for (const id of ['policy', 'length', 'noise', 'tframe', 'tmag', 'seed']) $(id).addEventListener('input', runSimulation);
for (const id of ['ss-q', 'ss-r']) $(id).addEventListener('input', runSteadyState);
for (const id of ['st-p0', 'st-r', 'st-t']) $(id).addEventListener('input', runStatic);
window.addEventListener('resize', () => { runSimulation(); runSteadyState(); runStatic(); });
runSimulation(); runSteadyState(); runStatic();
