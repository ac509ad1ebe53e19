import init, { bundledModel, cdfGrid, pmfComparison, samplePaths } from "./pkg/mrplab_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function report(id, text, isError = false) {
  const el = $(id);
  el.textContent = text;
  el.className = isError ? "out err" : "out";
}

function guarded(outId, fn) {
  return () => {
    try {
      fn();
    } catch (e) {
      report(outId, String(e), true);
    }
  };
}

function heat(v) {
  // white to dark blue
  const c = Math.round(255 * (1 - Math.min(1, Math.max(0, v))));
  return `rgb(${c},${c},${Math.round(140 + 115 * (c / 255))})`;
}

function drawGrid(canvas, values, scale) {
  const ctx = canvas.getContext("2d");
  const n = values.length;
  const cell = canvas.width / n;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  for (let i = 0; i < n; i++) {
    for (let j = 0; j < n; j++) {
      ctx.fillStyle = heat(values[i][j] / scale);
      // w1 along x, w2 upwards
      ctx.fillRect(i * cell, canvas.height - (j + 1) * cell, cell + 0.5, cell + 0.5);
    }
  }
}

function runCdf() {
  const g = JSON.parse(cdfGrid($("model").value, num("wmax"), num("grid")));
  const n = g.axis.length;
  const asym = g.values.map((row, i) => row.map((v, j) => Math.abs(v - g.values[j][i])));
  drawGrid($("cdf"), g.values, 1);
  drawGrid($("asym"), asym, Math.max(g.max_asymmetry, 1e-12));
  report(
    "cdf-out",
    `grid ${n}x${n} on (0, ${num("wmax")}]\n` +
      `max asymmetry ${g.max_asymmetry.toExponential(3)} at w = (${g.argmax[0]}, ${g.argmax[1]})`
  );
}

function runPmf() {
  const seed = num("seed") >>> 0;
  const c = JSON.parse(pmfComparison($("model").value, num("t"), num("kmax"), num("npaths"), seed));
  const canvas = $("pmf");
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const k = c.exact.length;
  const top = Math.max(...c.exact, ...c.empirical, 1e-12);
  const w = canvas.width / k;
  const h = canvas.height - 20;
  for (let i = 0; i < k; i++) {
    ctx.fillStyle = "#9bb7d4";
    const he = (h * c.empirical[i]) / top;
    ctx.fillRect(i * w + 4, h - he, w - 8, he);
    ctx.strokeStyle = "#c0392b";
    ctx.lineWidth = 2;
    const hx = h - (h * c.exact[i]) / top;
    ctx.beginPath();
    ctx.moveTo(i * w + 2, hx);
    ctx.lineTo((i + 1) * w - 2, hx);
    ctx.stroke();
    ctx.fillStyle = "#222";
    ctx.fillText(String(i), i * w + w / 2 - 3, canvas.height - 5);
  }
  const rows = c.exact.map((p, i) => `${String(i).padStart(3)}  ${p.toFixed(6)}  ${c.empirical[i].toFixed(6)}`);
  report("pmf-out", `  k  exact     simulated (${c.n_paths} paths; bars simulated, lines exact)\n` + rows.join("\n"));
}

function runPaths() {
  const horizon = num("horizon");
  const paths = JSON.parse(samplePaths($("model").value, num("spaths"), horizon, num("seed") >>> 0));
  const canvas = $("paths");
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const nmax = Math.max(1, ...paths.map((p) => p.steps[p.steps.length - 1][1]));
  const x = (t) => 10 + ((canvas.width - 20) * t) / horizon;
  const y = (n) => canvas.height - 10 - ((canvas.height - 20) * n) / nmax;
  paths.forEach((p, idx) => {
    ctx.strokeStyle = `hsl(${(idx * 47) % 360}, 60%, 45%)`;
    ctx.beginPath();
    ctx.moveTo(x(0), y(0));
    let prev = 0;
    for (const [t, n] of p.steps) {
      ctx.lineTo(x(t), y(prev));
      ctx.lineTo(x(t), y(n));
      prev = n;
    }
    ctx.stroke();
  });
}

async function loadPreset() {
  $("model").value = bundledModel($("preset").value);
}

await init();
loadPreset();
$("preset").addEventListener("change", loadPreset);
$("run-cdf").addEventListener("click", guarded("cdf-out", runCdf));
$("run-pmf").addEventListener("click", guarded("pmf-out", runPmf));
$("run-paths").addEventListener("click", guarded("status", runPaths));
report("status", "ready");
