// Demo driver: loads the wasm module built by
//   wasm-pack build crates/web --target web
// and serves three interactive operations: field rendering, a convergence
// study, and live stencil weights.

import init, { solve_cavity, solve_case_fields, run_convergence, stencil_weights }
  from "./pkg/swg_stokes_web.js";

const $ = (id) => document.getElementById(id);

function colormap(t) {
  // Simple blue-white-red diverging map on [0, 1].
  const r = Math.round(255 * Math.min(1, 2 * t));
  const b = Math.round(255 * Math.min(1, 2 * (1 - t)));
  const g = Math.round(255 * (1 - Math.abs(2 * t - 1)) * 0.9);
  return [r, g, b];
}

function drawField(n, u, v, p, which) {
  const canvas = $("view");
  const ctx = canvas.getContext("2d");
  const cellPx = canvas.width / n;

  const values = new Float64Array(n * n);
  for (let k = 0; k < n * n; k++) {
    if (which === "pressure") values[k] = p[k];
    else if (which === "u") values[k] = u[k];
    else if (which === "v") values[k] = v[k];
    else values[k] = Math.hypot(u[k], v[k]);
  }
  let lo = Infinity, hi = -Infinity;
  for (const x of values) { lo = Math.min(lo, x); hi = Math.max(hi, x); }
  if (hi - lo < 1e-300) hi = lo + 1;

  for (let j = 0; j < n; j++) {
    for (let i = 0; i < n; i++) {
      const t = (values[j * n + i] - lo) / (hi - lo);
      const [r, g, b] = colormap(t);
      ctx.fillStyle = `rgb(${r},${g},${b})`;
      // Cell (i, j) counts from the bottom-left; the canvas origin is top-left.
      ctx.fillRect(i * cellPx, canvas.height - (j + 1) * cellPx, cellPx + 1, cellPx + 1);
    }
  }

  // Velocity arrows on a coarsened grid.
  const step = Math.max(1, Math.round(n / 16));
  let vmax = 1e-300;
  for (let k = 0; k < n * n; k++) vmax = Math.max(vmax, Math.hypot(u[k], v[k]));
  ctx.strokeStyle = "rgba(0,0,0,0.75)";
  ctx.lineWidth = 1;
  for (let j = 0; j < n; j += step) {
    for (let i = 0; i < n; i += step) {
      const k = j * n + i;
      const cx = (i + 0.5) * cellPx;
      const cy = canvas.height - (j + 0.5) * cellPx;
      const scale = 0.9 * step * cellPx / vmax;
      const dx = u[k] * scale, dy = -v[k] * scale;
      ctx.beginPath();
      ctx.moveTo(cx - dx / 2, cy - dy / 2);
      ctx.lineTo(cx + dx / 2, cy + dy / 2);
      ctx.stroke();
      ctx.fillStyle = "rgba(0,0,0,0.75)";
      ctx.fillRect(cx + dx / 2 - 1, cy + dy / 2 - 1, 2.5, 2.5);
    }
  }
  return [lo, hi];
}

function refreshStencil() {
  const kappa = Number($("kappa").value);
  const [c1, c2, c3, c4] = stencil_weights(kappa);
  const fmt = (x) => (Math.abs(x) < 1e-12 ? "0" : x.toFixed(2).replace(/\.?0+$/, ""));
  $("stencil").textContent =
    `stencil weights: c1 = c3 = ${fmt(c1)}, c2 = ${fmt(c2)}, c4 = ${fmt(c4)}` +
    (Math.abs(kappa - 4) < 1e-12 ? "  (5-point scheme)" : "  (7-point scheme)");
}

function solveAndDraw() {
  const n = Number($("n").value);
  const kappa = Number($("kappa").value);
  const problem = $("problem").value;
  const which = $("field").value;
  const t0 = performance.now();
  let status;
  if (problem === "cavity") {
    const field = solve_cavity(n, kappa);
    const [lo, hi] = drawField(n, field.u, field.v, field.pressure, which);
    status = `${field.iterations} iterations, max cell divergence ${field.divergence.toExponential(1)},` +
      ` ${which} in [${lo.toExponential(2)}, ${hi.toExponential(2)}]`;
  } else {
    const flat = solve_case_fields(Number(problem), n, kappa);
    const m = n * n;
    const u = new Float64Array(m), v = new Float64Array(m), p = new Float64Array(m);
    let errInf = 0;
    for (let k = 0; k < m; k++) {
      u[k] = flat[6 * k]; v[k] = flat[6 * k + 1]; p[k] = flat[6 * k + 2];
      errInf = Math.max(errInf,
        Math.hypot(u[k] - flat[6 * k + 3], v[k] - flat[6 * k + 4]));
    }
    const [lo, hi] = drawField(n, u, v, p, which);
    status = `max cell-center velocity error ${errInf.toExponential(2)},` +
      ` ${which} in [${lo.toExponential(2)}, ${hi.toExponential(2)}]`;
  }
  $("status").textContent = `${status} — ${(performance.now() - t0).toFixed(0)} ms`;
}

function runConvergence() {
  const problem = $("problem").value;
  const which = problem === "cavity" ? 2 : Number(problem);
  const kappa = Number($("kappa").value);
  const rows = run_convergence(which, 32, kappa);
  const cols = ["n", "‖u‖₀", "‖u‖₁", "‖v‖₀", "‖v‖₁", "‖p‖₀"];
  let html = "<table><tr>" + cols.map(c => `<th>${c}</th>`).join("") + "</tr>";
  for (let r = 0; r < rows.length / 6; r++) {
    html += "<tr><td>" + rows[6 * r] + "</td>";
    for (let c = 1; c < 6; c++) {
      const val = rows[6 * r + c].toExponential(2);
      let order = "";
      if (r > 0) order = ` <small>(${Math.log2(rows[6 * (r - 1) + c] / rows[6 * r + c]).toFixed(2)})</small>`;
      html += `<td>${val}${order}</td>`;
    }
    html += "</tr>";
  }
  html += `</table><p><small>case ${which}, κ = ${kappa}; parentheses: observed order</small></p>`;
  $("table").innerHTML = html;
}

async function main() {
  await init();
  refreshStencil();
  solveAndDraw();
  $("n").addEventListener("input", () => { $("nval").textContent = $("n").value; });
  $("kappa").addEventListener("input", () => { $("kappaval").textContent = $("kappa").value; refreshStencil(); });
  for (const id of ["n", "kappa", "problem", "field"]) {
    $(id).addEventListener("change", solveAndDraw);
  }
  $("converge").addEventListener("click", runConvergence);
}

main();
