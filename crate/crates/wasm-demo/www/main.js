import init, { renderScene, contrastiveDemo, rankSum } from "./pkg/b2m_wasm_demo.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function showValues(container) {
  for (const label of container.querySelectorAll("label")) {
    const input = label.querySelector("input[type=range]");
    const out = label.querySelector("output");
    if (input && out) out.textContent = input.value;
  }
}

function guard(fn) {
  return () => {
    try {
      $("error").textContent = "";
      fn();
    } catch (e) {
      $("error").textContent = String(e.message ?? e);
    }
  };
}

function drawBars(canvas, values) {
  const ctx = canvas.getContext("2d");
  const { width, height } = canvas;
  ctx.clearRect(0, 0, width, height);
  const max = Math.max(...values.map(Math.abs), 1e-9);
  const w = width / values.length;
  ctx.fillStyle = "#888";
  ctx.fillRect(0, height / 2, width, 1);
  values.forEach((v, i) => {
    const h = (v / max) * (height / 2 - 2);
    ctx.fillStyle = v >= 0 ? "#3a6ea5" : "#c0504d";
    ctx.fillRect(i * w + 1, height / 2 - Math.max(h, 0), w - 2, Math.abs(h));
  });
}

const updateScene = guard(() => {
  showValues($("scene-controls"));
  const canvas = $("scene");
  const view = renderScene(
    num("offset"), num("curvature"), num("horizon"), num("fog"),
    $("obstacle").checked, num("obstacle-pos"),
    canvas.width, canvas.height, 7n,
  );
  const image = new ImageData(new Uint8ClampedArray(view.rgba), view.width, view.height);
  canvas.getContext("2d").putImageData(image, 0, 0);
  drawBars($("teacher"), Array.from(view.teacher));
  view.free();
});

function drawHeatmap(canvas, probs, b) {
  const ctx = canvas.getContext("2d");
  const cell = canvas.width / b;
  for (let i = 0; i < b; i++) {
    for (let j = 0; j < b; j++) {
      const shade = Math.round(255 * (1 - probs[i * b + j]));
      ctx.fillStyle = `rgb(${shade},${shade},255)`;
      ctx.fillRect(j * cell, i * cell, cell, cell);
    }
  }
}

function drawCurve(canvas, taus, losses, tau) {
  const ctx = canvas.getContext("2d");
  const { width, height } = canvas;
  const pad = 30;
  ctx.clearRect(0, 0, width, height);
  const lx = taus.map(Math.log10);
  const [x0, x1] = [lx[0], lx[lx.length - 1]];
  const ymax = Math.max(...losses);
  const px = (x) => pad + ((x - x0) / (x1 - x0)) * (width - 2 * pad);
  const py = (y) => height - pad - (y / ymax) * (height - 2 * pad);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad, width - 2 * pad, height - 2 * pad);
  ctx.strokeStyle = "#3a6ea5";
  ctx.beginPath();
  lx.forEach((x, i) => (i ? ctx.lineTo(px(x), py(losses[i])) : ctx.moveTo(px(x), py(losses[i]))));
  ctx.stroke();
  ctx.strokeStyle = "#c0504d";
  ctx.beginPath();
  ctx.moveTo(px(Math.log10(tau)), pad);
  ctx.lineTo(px(Math.log10(tau)), height - pad);
  ctx.stroke();
  ctx.fillStyle = "#222";
  ctx.fillText("log10 τ", width / 2 - 15, height - 8);
  ctx.fillText(ymax.toFixed(1), 2, pad + 4);
}

const updateContrastive = guard(() => {
  showValues($("contrastive-controls"));
  const b = num("batch");
  const tau = 10 ** num("logtau");
  const view = contrastiveDemo(b, num("dim"), num("alignment"), tau, 11n);
  $("loss").textContent = `loss ${view.loss.toFixed(4)}  (b ln b = ${(b * Math.log(b)).toFixed(4)}), |grad| ${view.gradNorm.toFixed(4)}`;
  drawHeatmap($("heatmap"), view.probabilities, view.batch);
  drawCurve($("curve"), Array.from(view.taus), Array.from(view.curve), tau);
  view.free();
});

const updateRankSum = guard(() => {
  const view = rankSum($("sample-a").value, $("sample-b").value);
  const method = view.exact ? "exact" : "normal approximation";
  $("ranksum").textContent =
    `U = ${view.uStatistic}, one-sided p = ${view.pValue.toPrecision(4)} (${method}); normal approximation ${view.normalP.toPrecision(4)}`;
  view.free();
});

await init();
for (const el of $("scene-controls").querySelectorAll("input")) el.addEventListener("input", updateScene);
for (const el of $("contrastive-controls").querySelectorAll("input")) el.addEventListener("input", updateContrastive);
for (const id of ["sample-a", "sample-b"]) $(id).addEventListener("input", updateRankSum);
updateScene();
updateContrastive();
updateRankSum();
