import init, { Demo, connection_hours } from "./pkg/nemsched_wasm.js";

const $ = (id) => document.getElementById(id);
const COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];
let demo = null;

// Draws `series` ({name, x, y, dash?}) on a canvas; `marks` are labelled vertical lines.
function plot(canvas, legend, series, marks = [], xlabel = "") {
  const ctx = canvas.getContext("2d");
  const w = canvas.width, h = canvas.height, pad = 40;
  ctx.clearRect(0, 0, w, h);
  const xs = series.flatMap((s) => s.x), ys = series.flatMap((s) => s.y).filter(Number.isFinite);
  let [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  let [y0, y1] = [Math.min(...ys), Math.max(...ys)];
  if (y1 - y0 < 1e-9) { y0 -= 1; y1 += 1; }
  const px = (x) => pad + ((x - x0) / (x1 - x0 || 1)) * (w - 2 * pad);
  const py = (y) => h - pad - ((y - y0) / (y1 - y0)) * (h - 2 * pad);

  ctx.strokeStyle = "#999";
  ctx.fillStyle = "#555";
  ctx.font = "11px sans-serif";
  ctx.beginPath();
  ctx.moveTo(pad, pad / 2); ctx.lineTo(pad, h - pad); ctx.lineTo(w - pad / 2, h - pad);
  ctx.stroke();
  for (let k = 0; k <= 4; k++) {
    const yv = y0 + (k / 4) * (y1 - y0), xv = x0 + (k / 4) * (x1 - x0);
    ctx.fillText(yv.toFixed(2), 2, py(yv) + 4);
    ctx.fillText(xv.toFixed(2), px(xv) - 10, h - pad + 14);
  }
  ctx.fillText(xlabel, w - pad - 40, h - 6);
  if (y0 < 0 && y1 > 0) {
    ctx.strokeStyle = "#ddd";
    ctx.beginPath(); ctx.moveTo(pad, py(0)); ctx.lineTo(w - pad / 2, py(0)); ctx.stroke();
  }

  for (const m of marks) {
    if (!(m.x >= x0 && m.x <= x1)) continue;
    ctx.strokeStyle = "#bbb";
    ctx.setLineDash([3, 3]);
    ctx.beginPath(); ctx.moveTo(px(m.x), pad / 2); ctx.lineTo(px(m.x), h - pad); ctx.stroke();
    ctx.setLineDash([]);
    ctx.fillStyle = "#777";
    ctx.fillText(m.label, px(m.x) + 2, pad / 2 + 10 + (m.row || 0) * 12);
  }

  series.forEach((s, k) => {
    ctx.strokeStyle = s.color || COLORS[k % COLORS.length];
    ctx.lineWidth = 1.6;
    ctx.setLineDash(s.dash ? [6, 4] : []);
    ctx.beginPath();
    s.x.forEach((x, i) => (i ? ctx.lineTo(px(x), py(s.y[i])) : ctx.moveTo(px(x), py(s.y[i]))));
    ctx.stroke();
  });
  ctx.setLineDash([]);
  legend.innerHTML = series
    .map((s, k) => `<span style="color:${s.color || COLORS[k % COLORS.length]}">━ ${s.name}</span>`)
    .join("");
}

function showOutputs() {
  for (const id of ["t", "s", "y", "vt"]) $(`${id}-out`).textContent = $(id).value;
}

function drawCurve() {
  const t = +$("t").value, s = +$("s").value, y = +$("y").value;
  const c = JSON.parse(demo.policy_curve(t, s, y, 10, 400));
  const r = c.points.map((p) => p.r);
  const col = (k) => c.points.map((p) => p[k]);
  const b = c.boundaries;
  const marks = [
    ["Δ+′", b.plus_prime], ["Δ1", b.d1], ["Δ2", b.d2], ["Δ3", b.d3], ["Δ4", b.d4], ["Δ−′", b.minus_prime],
  ].map(([label, x], k) => ({ label, x, row: k % 3 }));
  plot($("curve"), $("curve-legend"), [
    { name: "EV charge v", x: r, y: col("v") },
    { name: "loads Σd", x: r, y: col("d") },
    { name: "storage e", x: r, y: col("e") },
    { name: "net consumption z", x: r, y: col("z"), dash: true },
  ], marks, "r (kWh)");
}

function drawValues(tables) {
  const t = +$("vt").value;
  const v = tables.values[t];
  // Shift both curves to start at zero so their slopes are comparable.
  const rel = (ys) => ys.map((x) => x - ys[0]);
  const row = tables.thresholds[Math.max(0, t - 1)];
  const marks = t === 0 ? [] : [
    { label: "τ", x: row.tau }, { label: "σ+", x: row.sigma_plus, row: 1 },
    { label: "σ−", x: row.sigma_minus, row: 2 }, { label: "δ", x: row.delta, row: 3 },
  ];
  plot($("values"), $("values-legend"), [
    { name: `with storage, V̄_${t}(y) − V̄_${t}(0)`, x: v.y, y: rel(v.myopic) },
    { name: "storage-free", x: v.y, y: rel(v.storage_free), dash: true },
  ], marks, "y (kWh)");

  const [on0, on1] = tables.on_peak;
  const period = (k) => (k < on0 ? "off1" : k < on1 ? "on" : "off2");
  $("thresholds").innerHTML =
    "<tr><th>t</th><th>period</th><th>τ</th><th>σ+</th><th>σ−</th><th>δ</th></tr>" +
    tables.thresholds
      .map((r) => `<tr><td>${r.t}</td><td>${period(r.t)}</td>${[r.tau, r.sigma_plus, r.sigma_minus, r.delta]
        .map((x) => `<td>${x.toFixed(3)}</td>`).join("")}</tr>`)
      .join("");
}

function runEpisode() {
  const e = JSON.parse(demo.simulate(BigInt($("seed").value || 0), BigInt($("episode").value || 0)));
  const ts = e.r.map((_, k) => k);
  const series = [{ name: "renewable r", x: ts, y: e.r, color: "#999" }];
  e.runs.forEach((run, k) => {
    series.push({ name: `${run.policy} SoC`, x: ts, y: run.s, color: COLORS[k] });
    series.push({ name: `${run.policy} remaining demand`, x: ts, y: run.y, color: COLORS[k], dash: true });
  });
  plot($("episode-plot"), $("episode-legend"), series, [], "t");
  const oracle = e.runs[0].surplus;
  $("surplus").innerHTML =
    `<tr><th>policy</th><th>surplus</th><th>gap to oracle</th></tr>` +
    e.runs
      .map((r) => `<tr><td>${r.policy}</td><td>${r.surplus.toFixed(4)}</td><td>${(100 * (oracle - r.surplus) / oracle).toFixed(2)}%</td></tr>`)
      .join("") +
    `<tr><td colspan="3">EV demand at plug-in ${e.y0.toFixed(2)} kWh</td></tr>`;
}

function rebuild() {
  $("status").textContent = "building value tables…";
  // Let the status line paint before the synchronous build.
  setTimeout(() => {
    const t0 = performance.now();
    if (demo) demo.free();
    demo = new Demo(+$("hour").value, +$("scale").value);
    const tables = JSON.parse(demo.tables());
    $("status").textContent = `tables for plug-in hour ${tables.hour}, scale ${tables.scale} built in ${(performance.now() - t0).toFixed(0)} ms`;
    $("vt").onchange = $("vt").oninput = () => { showOutputs(); drawValues(tables); };
    showOutputs();
    drawCurve();
    drawValues(tables);
    runEpisode();
  }, 10);
}

await init();
$("hour").innerHTML = Array.from(connection_hours()).map((h) => `<option value="${h}">${h}:00</option>`).join("");
$("hour").value = "12";
$("hour").onchange = $("scale").onchange = rebuild;
for (const id of ["t", "s", "y"]) $(id).oninput = () => { showOutputs(); drawCurve(); };
$("run").onclick = runEpisode;
rebuild();
