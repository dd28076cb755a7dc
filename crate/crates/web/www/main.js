import init, { cases, alpha_curve, spectrum, completion } from "./pkg/pfsense_web.js";

const $ = (id) => document.getElementById(id);
const COLORS = ["#1f77b4", "#d62728", "#2ca02c"];

function plot(canvas, series, { logY = false, xlabel = "", ylabel = "" } = {}) {
  const ctx = canvas.getContext("2d");
  const w = canvas.width, h = canvas.height, pad = 40;
  ctx.clearRect(0, 0, w, h);
  const tf = (y) => (logY ? Math.log10(Math.max(y, 1e-16)) : y);
  const xs = series.flatMap((s) => s.x), ys = series.flatMap((s) => s.y.map(tf));
  const [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  let [y0, y1] = [Math.min(...ys), Math.max(...ys)];
  if (y1 === y0) { y0 -= 1; y1 += 1; }
  const px = (x) => pad + ((x - x0) / (x1 - x0 || 1)) * (w - 2 * pad);
  const py = (y) => h - pad - ((tf(y) - y0) / (y1 - y0)) * (h - 2 * pad);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  ctx.fillStyle = "#444";
  ctx.font = "11px sans-serif";
  ctx.fillText(xlabel, w / 2 - 20, h - 8);
  ctx.fillText(ylabel, 4, pad - 10);
  ctx.fillText(x0.toPrecision(3), pad, h - pad + 14);
  ctx.fillText(x1.toPrecision(3), w - pad - 20, h - pad + 14);
  const ylab = (v) => (logY ? "1e" + v.toFixed(1) : v.toPrecision(3));
  ctx.fillText(ylab(y1), 2, pad + 4);
  ctx.fillText(ylab(y0), 2, h - pad);
  series.forEach((s, k) => {
    ctx.strokeStyle = COLORS[k % COLORS.length];
    ctx.beginPath();
    s.x.forEach((x, i) => (i ? ctx.lineTo(px(x), py(s.y[i])) : ctx.moveTo(px(x), py(s.y[i]))));
    ctx.stroke();
    ctx.fillStyle = ctx.strokeStyle;
    ctx.fillText(s.name, w - pad - 90, pad + 14 + 14 * k);
  });
}

function guard(out, f) {
  try {
    f();
  } catch (e) {
    if (out) {
      out.className = "out err";
      out.textContent = String(e.message || e);
    }
  }
}

function runCurve() {
  guard($("curve-out"), () => {
    const r = JSON.parse(alpha_curve($("case").value, 60));
    plot($("curve"), [
      { name: "α_min", x: r.alpha_max, y: r.alpha_min },
      { name: "α_min = α_max", x: r.alpha_max, y: r.alpha_max },
    ], { xlabel: "α_max", ylabel: "α_min" });
    const q = r.report;
    const yn = (b) => (b ? "Yes" : "No");
    $("curve-out").className = "out";
    $("curve-out").textContent =
      `assumption ${yn(q.assumption1_dp_dtheta_pd)}  J invertible ${yn(q.jacobian_invertible)}\n` +
      `Δk ${q.delta_k?.toPrecision(4)}  bound ${q.bound_strict?.toPrecision(4)}  value ${q.value_neumann?.toPrecision(4)}\n` +
      `sufficient condition ${yn(q.thm1_holds)}  eigenvalue condition ${yn(q.thm2_holds)}`;
  });
}

function runSpectrum() {
  guard(null, () => {
    const r = JSON.parse(spectrum($("case").value, $("bus-set").value));
    const series = [r.full, ...r.groups].map((g) => ({
      name: g.name,
      x: g.normalized.map((_, i) => i + 1),
      y: g.normalized,
    }));
    plot($("spectrum"), series, { logY: true, xlabel: "index", ylabel: "σ_i / σ_1" });
  });
}

function runCompletion() {
  guard($("comp-out"), () => {
    const r = JSON.parse(completion($("case").value, +$("frac").value, +$("lambda").value, +$("delta").value, +$("seed").value));
    const t = r.objective_trace;
    plot($("trace"), [{ name: "objective", x: t.map((_, i) => i), y: t }], { logY: true, xlabel: "iteration", ylabel: "objective" });
    $("comp-out").className = "out";
    $("comp-out").textContent =
      `${r.rows}×${r.cols}, ${(100 * r.known_fraction).toFixed(1)}% known\n` +
      `relative error ${r.rel_error.toPrecision(4)} (zero fill ${r.baseline_error.toPrecision(4)})\n` +
      `${r.iterations} iterations, converged ${r.converged}`;
  });
}

await init();
for (const name of JSON.parse(cases())) {
  $("case").add(new Option(name, name, name === "case14", name === "case14"));
}
$("frac").oninput = () => ($("frac-val").textContent = $("frac").value);
$("curve-run").onclick = runCurve;
$("spectrum-run").onclick = runSpectrum;
$("comp-run").onclick = runCompletion;
$("case").onchange = () => { runCurve(); runSpectrum(); };
runCurve();
runSpectrum();
