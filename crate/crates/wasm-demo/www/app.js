import init, { density_band, ratio_curve, pseudo_values } from "./pkg/gpv_wasm.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function frame(canvas, xs, ys) {
  const ctx = canvas.getContext("2d");
  const pad = { l: 50, r: 15, t: 12, b: 30 };
  const w = canvas.width - pad.l - pad.r;
  const h = canvas.height - pad.t - pad.b;
  const [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  let [y0, y1] = [Math.min(...ys), Math.max(...ys)];
  if (y1 - y0 < 1e-9) { y0 -= 0.5; y1 += 0.5; }
  const sx = (x) => pad.l + ((x - x0) / (x1 - x0)) * w;
  const sy = (y) => pad.t + (1 - (y - y0) / (y1 - y0)) * h;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad.l, pad.t, w, h);
  ctx.fillStyle = "#555";
  ctx.font = "12px system-ui";
  for (let i = 0; i <= 4; i++) {
    const x = x0 + ((x1 - x0) * i) / 4;
    const y = y0 + ((y1 - y0) * i) / 4;
    ctx.fillText(x.toFixed(2), sx(x) - 12, canvas.height - 10);
    ctx.fillText(y.toFixed(2), 6, sy(y) + 4);
  }
  return { ctx, sx, sy };
}

function line(p, xs, ys, color, width = 1.5) {
  p.ctx.strokeStyle = color;
  p.ctx.lineWidth = width;
  p.ctx.beginPath();
  xs.forEach((x, i) => (i ? p.ctx.lineTo(p.sx(x), p.sy(ys[i])) : p.ctx.moveTo(p.sx(x), p.sy(ys[i]))));
  p.ctx.stroke();
}

function runBand() {
  const b = density_band(num("b-theta"), num("b-n"), num("b-l"), num("b-seed"), num("b-b"), num("b-alpha"), 0.2, 0.8);
  const grid = Array.from(b.grid), lo = Array.from(b.lower), hi = Array.from(b.upper);
  const p = frame($("b-plot"), grid, [...lo, ...hi, ...b.truth]);
  p.ctx.fillStyle = "rgba(70,120,200,0.18)";
  p.ctx.beginPath();
  grid.forEach((x, i) => (i ? p.ctx.lineTo(p.sx(x), p.sy(hi[i])) : p.ctx.moveTo(p.sx(x), p.sy(hi[i]))));
  for (let i = grid.length - 1; i >= 0; i--) p.ctx.lineTo(p.sx(grid[i]), p.sy(lo[i]));
  p.ctx.fill();
  line(p, grid, Array.from(b.f_hat), "#2a5db0", 2);
  line(p, grid, Array.from(b.truth), "#c33", 1.5);
  $("b-info").textContent =
    `blue: estimate, shaded: band (ζ* = ${b.zeta.toFixed(3)}), red: true density. ` +
    (b.covered ? "The band contains the truth." : "The band misses the truth somewhere.");
}

function runRatio() {
  const c = ratio_curve(num("r-n"), num("r-lo"), num("r-hi"), 60);
  const xs = [], ys = [];
  for (let i = 0; i < c.length; i += 2) { xs.push(c[i]); ys.push(c[i + 1]); }
  const p = frame($("r-plot"), xs, [1, ...ys]);
  line(p, xs, xs.map(() => 1), "#aaa", 1);
  line(p, xs, ys, "#2a5db0", 2);
}

function runPseudo() {
  const d = pseudo_values(num("p-theta"), num("p-n"), num("p-l"), num("p-seed"));
  const v = [], p = [];
  for (let i = 0; i < d.length; i += 2) { v.push(d[i]); p.push(d[i + 1]); }
  const f = frame($("p-plot"), [0, 1], [0, 1]);
  line(f, [0, 1], [0, 1], "#c33", 1);
  f.ctx.fillStyle = "rgba(42,93,176,0.5)";
  v.forEach((x, i) => f.ctx.fillRect(f.sx(x) - 1.5, f.sy(p[i]) - 1.5, 3, 3));
  const err = Math.max(...v.map((x, i) => Math.abs(x - p[i])));
  $("p-info").textContent = `${v.length} kept observations, largest error ${err.toFixed(4)}`;
}

function guard(fn) {
  return () => {
    $("status").textContent = "";
    try { fn(); } catch (e) { $("status").textContent = String(e.message ?? e); }
  };
}

await init();
$("b-run").onclick = guard(runBand);
$("r-run").onclick = guard(runRatio);
$("p-run").onclick = guard(runPseudo);
guard(runRatio)();
guard(runPseudo)();
