import init, { Demo } from "./pkg/nwa_demo.js";

const $ = (id) => document.getElementById(id);
const canvas = $("map");
const ctx = canvas.getContext("2d");

let demo;
let source = null;
let target = null;
let pendingGoal = false;

function status(text, isError = false) {
  $("status").textContent = text;
  $("status").className = isError ? "err" : "";
}

function cellSize() {
  return canvas.width / demo.grid();
}

function heatColor(t) {
  // dark blue for low values through yellow for high values
  const r = Math.round(255 * Math.min(1, 2 * t));
  const g = Math.round(255 * Math.max(0, 2 * t - 1) + 60 * (1 - t));
  const b = Math.round(160 * (1 - t));
  return `rgb(${r},${g},${b})`;
}

function drawBase() {
  const name = $("layer").value;
  const n = demo.grid();
  const cs = cellSize();
  if (name && source && target) {
    let values;
    try {
      values = demo.layer(name, source[0], source[1], target[0], target[1], eps());
    } catch (e) {
      status(e.message ?? String(e), true);
      $("layer").value = "";
      return drawBase();
    }
    const lo = Math.min(...values);
    const hi = Math.max(...values);
    for (let i = 0; i < values.length; i++) {
      ctx.fillStyle = heatColor(hi > lo ? (values[i] - lo) / (hi - lo) : 0);
      ctx.fillRect((i % n) * cs, Math.floor(i / n) * cs, cs, cs);
    }
    return;
  }
  const size = demo.image_size();
  const img = new ImageData(new Uint8ClampedArray(demo.image_rgba()), size, size);
  const off = new OffscreenCanvas(size, size);
  off.getContext("2d").putImageData(img, 0, 0);
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(off, 0, 0, canvas.width, canvas.height);
}

function mark(index, color, inset) {
  const n = demo.grid();
  const cs = cellSize();
  ctx.fillStyle = color;
  ctx.fillRect((index % n) * cs + inset, Math.floor(index / n) * cs + inset, cs - 2 * inset, cs - 2 * inset);
}

function label(cell, text) {
  const cs = cellSize();
  ctx.fillStyle = "#fff";
  ctx.strokeStyle = "#000";
  ctx.font = `bold ${Math.round(cs * 0.6)}px sans-serif`;
  ctx.textAlign = "center";
  ctx.textBaseline = "middle";
  const x = cell[1] * cs + cs / 2;
  const y = cell[0] * cs + cs / 2;
  ctx.strokeText(text, x, y);
  ctx.fillText(text, x, y);
}

function eps() {
  return Number($("eps").value);
}

function render() {
  drawBase();
  const stats = $("stats");
  stats.innerHTML = "";
  if (source && target) {
    try {
      const plan = JSON.parse(demo.plan(source[0], source[1], target[0], target[1], eps()));
      if ($("show-exp").checked) {
        for (const i of plan.expanded) mark(i, "rgba(255, 230, 0, 0.35)", 0);
      }
      for (const i of plan.path) mark(i, "rgba(220, 20, 60, 0.85)", cellSize() * 0.3);
      const rows = [
        ["planner", plan.variant ? `${plan.variant} checkpoint` : plan.mode],
        ["eps", plan.eps],
        ["expanded cells", plan.expanded.length],
        ["path cost (search costs)", plan.cost.toFixed(2)],
        ["optimum (search costs)", plan.optimal_cost.toFixed(2)],
        ["bound (1 + eps) x optimum", ((1 + plan.eps) * plan.optimal_cost).toFixed(2)],
        ["true cost ratio", (plan.true_cost / plan.true_optimal_cost).toFixed(3)],
      ];
      for (const [k, v] of rows) stats.insertRow().innerHTML = `<td>${k}</td><td>${v}</td>`;
      status("");
    } catch (e) {
      status(e.message ?? String(e), true);
    }
  }
  if (source) label(source, "S");
  if (target) label(target, "T");
}

function regenerate() {
  demo.regenerate(BigInt($("seed").value || 0), $("hard").checked);
  const n = demo.grid();
  source = [n - 2, 1];
  target = [1, n - 2];
  updateModelText();
  render();
}

function updateModelText(text) {
  if (text) $("model").dataset.desc = text;
  const desc = $("model").dataset.desc;
  if (demo.mode() === "model") {
    $("model").textContent = desc;
  } else if (desc) {
    $("model").textContent = `${desc} (does not fit this map; using true costs)`;
  }
}

async function loadBytes(bytes) {
  try {
    updateModelText(demo.load_model(new Uint8Array(bytes)));
    render();
  } catch (e) {
    status(e.message ?? String(e), true);
  }
}

canvas.addEventListener("click", (ev) => {
  const rect = canvas.getBoundingClientRect();
  const cs = rect.width / demo.grid();
  const cell = [Math.floor((ev.clientY - rect.top) / cs), Math.floor((ev.clientX - rect.left) / cs)];
  if (pendingGoal) target = cell;
  else source = cell;
  pendingGoal = !pendingGoal;
  render();
});

$("eps").addEventListener("input", () => {
  $("eps-val").textContent = $("eps").value;
  render();
});
$("layer").addEventListener("change", render);
$("show-exp").addEventListener("change", render);
$("regen").addEventListener("click", regenerate);
$("hard").addEventListener("change", regenerate);
$("ckpt").addEventListener("change", async (ev) => {
  const file = ev.target.files[0];
  if (file) await loadBytes(await file.arrayBuffer());
});

await init();
demo = new Demo(1n, false);
regenerate();
// a checkpoint served next to the page is picked up automatically
try {
  const res = await fetch("model.ckpt");
  if (res.ok) await loadBytes(await res.arrayBuffer());
} catch (_) {
  // no bundled checkpoint
}
