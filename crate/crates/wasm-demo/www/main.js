import init, { collapse_times, collapse_curve, blow_up_cdf, sample_paths } from "./pkg/collapse_lab_wasm.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);
const COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2"];

function plot(canvas, series, { logY = false, xLabel = "", yLabel = "" } = {}) {
  const ctx = canvas.getContext("2d");
  const W = canvas.width, H = canvas.height, L = 60, R = 15, T = 15, B = 35;
  ctx.clearRect(0, 0, W, H);
  const fy = logY ? (v) => Math.log10(Math.max(v, 1e-300)) : (v) => v;
  let x0 = Infinity, x1 = -Infinity, y0 = Infinity, y1 = -Infinity;
  for (const s of series) {
    for (let i = 0; i < s.x.length; i++) {
      if (!Number.isFinite(s.y[i])) continue;
      x0 = Math.min(x0, s.x[i]); x1 = Math.max(x1, s.x[i]);
      y0 = Math.min(y0, fy(s.y[i])); y1 = Math.max(y1, fy(s.y[i]));
    }
  }
  if (x1 === x0) x1 = x0 + 1;
  if (y1 === y0) y1 = y0 + 1;
  const px = (x) => L + (x - x0) / (x1 - x0) * (W - L - R);
  const py = (y) => H - B - (fy(y) - y0) / (y1 - y0) * (H - T - B);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(L, T, W - L - R, H - T - B);
  ctx.fillStyle = "#333";
  ctx.font = "11px sans-serif";
  ctx.fillText(x0.toPrecision(3), L, H - B + 14);
  ctx.fillText(x1.toPrecision(3), W - R - 40, H - B + 14);
  const tick = (v) => (logY ? "1e" + v.toFixed(1) : v.toPrecision(3));
  ctx.fillText(tick(y1), 4, T + 10);
  ctx.fillText(tick(y0), 4, H - B);
  ctx.fillText(xLabel, W / 2, H - 6);
  ctx.fillText(yLabel, 4, H / 2);
  series.forEach((s, k) => {
    ctx.strokeStyle = s.color || COLORS[k % COLORS.length];
    ctx.setLineDash(s.dash || []);
    ctx.beginPath();
    let pen = false;
    for (let i = 0; i < s.x.length; i++) {
      if (!Number.isFinite(s.y[i])) { pen = false; continue; }
      const X = px(s.x[i]), Y = py(s.y[i]);
      if (pen) ctx.lineTo(X, Y); else ctx.moveTo(X, Y);
      pen = true;
    }
    ctx.stroke();
  });
  ctx.setLineDash([]);
}

function guard(out, f) {
  try {
    const t = performance.now();
    f();
    out.textContent += `\n(${(performance.now() - t).toFixed(0)} ms)`;
  } catch (e) {
    out.textContent = String(e);
  }
}

function drawCollapse() {
  const out = $("c-out");
  guard(out, () => {
    const g = num("c-g"), rho = num("c-rho");
    const [tStar, tEps] = collapse_times(g, rho);
    const c = collapse_curve(g, rho, num("c-until"), 400);
    const x = [], y = [];
    for (let i = 0; i < c.length; i += 2) { x.push(c[i]); y.push(c[i + 1]); }
    plot($("c-plot"), [{ x, y }], { logY: true, xLabel: "t", yLabel: "u" });
    out.textContent = `t* = ${tStar.toPrecision(8)}   t_eps = ${tEps.toPrecision(8)}   u(end) = ${y[y.length - 1].toPrecision(6)}`;
  });
}

function drawHitting() {
  const out = $("h-out");
  guard(out, () => {
    const r = blow_up_cdf(1, 1, num("h-ueps"), num("h-n"), num("h-tmax"), 100, BigInt(num("h-seed")));
    const level = r[0];
    const t = [], emp = [], exact = [];
    for (let i = 1; i < r.length; i += 3) { t.push(r[i]); emp.push(r[i + 1]); exact.push(r[i + 2]); }
    plot($("h-plot"), [{ x: t, y: emp }, { x: t, y: exact, dash: [6, 4], color: "#000" }], { xLabel: "t - t_eps", yLabel: "P" });
    out.textContent = `level L = ${level.toPrecision(6)}   empirical P(T <= ${t[t.length - 1]}) = ${emp[emp.length - 1].toFixed(4)}   erfc = ${exact[exact.length - 1].toFixed(4)}`;
  });
}

function drawPaths() {
  const out = $("p-out");
  guard(out, () => {
    const r = sample_paths(1, 1, $("p-scheme").value, 2, num("p-n"), num("p-h"), num("p-dt"), num("p-cap"), BigInt(num("p-seed")));
    const series = [];
    for (let i = 0; i < r.length;) {
      const n = r[i];
      series.push({ x: Array.from(r.subarray(i + 1, i + 1 + n)), y: Array.from(r.subarray(i + 1 + n, i + 1 + 2 * n)) });
      i += 1 + 2 * n;
    }
    plot($("p-plot"), series, { logY: true, xLabel: "t - t_eps", yLabel: "u" });
    const ends = series.map((s) => s.x[s.x.length - 1]);
    out.textContent = `${series.length} paths; last times ${ends.map((e) => e.toPrecision(3)).join(", ")}`;
  });
}

await init();
$("c-run").onclick = drawCollapse;
$("h-run").onclick = drawHitting;
$("p-run").onclick = drawPaths;
drawCollapse();
