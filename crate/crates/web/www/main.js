import init, { Lab } from "./pkg/lane_emden_web.js";

const $ = (id) => document.getElementById(id);
let lab = null;
let values = null;

function status(msg, isError = false) {
  $("status").textContent = msg;
  $("status").className = isError ? "err" : "";
}

function numbers(text) {
  return Float64Array.from(text.trim().split(/[\s,]+/).map(Number));
}

// Runs `f` after the status line has had a chance to repaint.
function busy(msg, f) {
  status(msg);
  setTimeout(() => {
    try {
      f();
    } catch (e) {
      status(String(e.message ?? e), true);
    }
  }, 20);
}

function chartTransform(canvas, verts) {
  let r = 0;
  for (let i = 0; i < verts.length; i += 2) r = Math.max(r, Math.hypot(verts[i], verts[i + 1]));
  const s = (0.45 * canvas.width) / r;
  return (x, y) => [canvas.width / 2 + s * x, canvas.height / 2 - s * y];
}

function colour(t) {
  // white to deep blue
  const c = (a, b) => Math.round(a + (b - a) * t);
  return `rgb(${c(250, 20)},${c(250, 60)},${c(255, 150)})`;
}

function drawMesh(levels = []) {
  const canvas = $("field");
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const verts = lab.vertices();
  const tris = lab.triangles();
  const at = chartTransform(canvas, verts);
  const max = values ? Math.max(...values) : 1;
  ctx.lineWidth = 0.3;
  for (let t = 0; t < tris.length; t += 3) {
    ctx.beginPath();
    for (let k = 0; k < 3; k++) {
      const i = tris[t + k];
      const [x, y] = at(verts[2 * i], verts[2 * i + 1]);
      k === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y);
    }
    ctx.closePath();
    if (values) {
      const u = (values[tris[t]] + values[tris[t + 1]] + values[tris[t + 2]]) / (3 * max);
      ctx.fillStyle = colour(u);
      ctx.fill();
    }
    ctx.strokeStyle = values ? "rgba(0,0,0,0.08)" : "#999";
    ctx.stroke();
  }
  for (const level of levels) {
    for (const [x, y, kappa] of level.points) {
      const [px, py] = at(x, y);
      ctx.fillStyle = kappa > 0 ? "#1a7f37" : "#d1242f";
      ctx.fillRect(px - 1.5, py - 1.5, 3, 3);
    }
  }
}

function drawSweep(summary) {
  const canvas = $("plot");
  const ctx = canvas.getContext("2d");
  const pts = summary.points.filter((q) => q.distance !== null);
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  if (pts.length === 0) return;
  const pad = 40;
  const ps = pts.map((q) => q.p);
  const ds = pts.map((q) => Math.log10(Math.max(q.distance, 1e-16)));
  const [p0, p1] = [Math.min(...ps, 1), Math.max(...ps, 1)];
  const [d0, d1] = [Math.floor(Math.min(...ds)), Math.ceil(Math.max(...ds))];
  const X = (p) => pad + ((p - p0) / (p1 - p0 || 1)) * (canvas.width - 2 * pad);
  const Y = (d) => canvas.height - pad - ((d - d0) / (d1 - d0 || 1)) * (canvas.height - 2 * pad);
  ctx.strokeStyle = "#444";
  ctx.strokeRect(pad, pad, canvas.width - 2 * pad, canvas.height - 2 * pad);
  ctx.fillStyle = "#444";
  ctx.fillText(`log10 D(p)   [${d0}, ${d1}]`, pad, pad - 8);
  ctx.fillText(`p from ${p0} to ${p1}`, canvas.width - pad - 90, canvas.height - pad + 20);
  ctx.setLineDash([4, 4]);
  ctx.beginPath();
  ctx.moveTo(X(1), pad);
  ctx.lineTo(X(1), canvas.height - pad);
  ctx.stroke();
  ctx.setLineDash([]);
  ctx.fillStyle = "#0550ae";
  pts.forEach((q, k) => {
    ctx.beginPath();
    ctx.arc(X(q.p), Y(ds[k]), 3.5, 0, 2 * Math.PI);
    ctx.fill();
  });
}

function rebuild() {
  busy("meshing ...", () => {
    lab?.free();
    values = null;
    lab = new Lab($("kind").value, Number($("a").value), Number($("b").value), Number($("h").value));
    drawMesh();
    status(`${lab.vertices().length / 2} vertices`);
  });
}

function solve() {
  if (!lab) return;
  const p = Number($("p").value);
  busy(`solving p = ${p} ...`, () => {
    values = lab.solve(p);
    const levels = JSON.parse(lab.levels(numbers($("fractions").value)));
    drawMesh(levels);
    const report = JSON.parse(lab.report());
    report.level_curvature = levels.map((l) => ({ c: l.c, min_kappa_g: l.min_kappa_g, convex: l.convex }));
    $("report").textContent = JSON.stringify(report, null, 2);
    status(levels.every((l) => l.convex) ? "every level curve is convex" : "some level curve is not convex");
  });
}

function sweep() {
  if (!lab) return;
  busy("sweeping ...", () => {
    const summary = JSON.parse(lab.sweep(numbers($("plist").value)));
    drawSweep(summary);
    $("report").textContent = JSON.stringify(summary, null, 2);
    status(`lambda1 = ${summary.lambda1.toFixed(6)}`);
  });
}

await init();
$("p").addEventListener("input", () => ($("pval").textContent = $("p").value));
$("mesh").addEventListener("click", rebuild);
$("solve").addEventListener("click", solve);
$("sweep").addEventListener("click", sweep);
rebuild();
