import init, { logMelImage, planTable, mcnemarP } from "./pkg/fraug_demo.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function fail(el, e) {
  el.className = "err";
  el.textContent = String(e);
}

function renderSpectrogram() {
  const info = $("sp-info");
  try {
    const img = JSON.parse(logMelImage(num("sp-width"), num("sp-shift"), num("sp-label"), BigInt(num("sp-seed"))));
    const canvas = $("sp-canvas");
    canvas.width = img.frames;
    canvas.height = img.dims;
    const ctx = canvas.getContext("2d");
    const pixels = ctx.createImageData(img.frames, img.dims);
    const lo = Math.max(img.min, img.max - 12);
    const span = Math.max(img.max - lo, 1e-6);
    for (let t = 0; t < img.frames; t++) {
      for (let m = 0; m < img.dims; m++) {
        const v = Math.min(1, Math.max(0, (img.values[t * img.dims + m] - lo) / span));
        const i = 4 * ((img.dims - 1 - m) * img.frames + t);
        pixels.data[i] = 255 * v;
        pixels.data[i + 1] = 255 * v * v;
        pixels.data[i + 2] = 255 * (1 - v) * 0.6;
        pixels.data[i + 3] = 255;
      }
    }
    ctx.putImageData(pixels, 0, 0);
    info.className = "";
    info.textContent = `${img.frames} frames x ${img.dims} mel bands; window ${img.width_samples} samples, hop ${img.shift_samples} samples, ${img.duration_s.toFixed(2)} s`;
  } catch (e) {
    fail(info, e);
  }
}

function renderPlan() {
  const info = $("pl-info");
  const table = $("pl-table");
  try {
    const plan = JSON.parse(planTable($("pl-widths").value, $("pl-shifts").value, num("pl-dur")));
    info.className = "";
    info.textContent = `${plan.rows.length} configurations, ${plan.folds} folds (first row is the baseline)`;
    table.innerHTML = "<tr><th>config</th><th>width ms</th><th>shift ms</th><th>frames</th><th>120-frame segments</th></tr>" +
      plan.rows.map((r) => `<tr><td>${r.label}</td><td>${r.width_ms}</td><td>${r.shift_ms.toFixed(1)}</td><td>${r.frames}</td><td>${r.segments}</td></tr>`).join("");
  } catch (e) {
    table.innerHTML = "";
    fail(info, e);
  }
}

function renderMcnemar() {
  const out = $("mc-out");
  try {
    const r = JSON.parse(mcnemarP(num("mc-b"), num("mc-c"), $("mc-mode").value));
    out.className = "";
    out.textContent = `p = ${r.p_value.toPrecision(6)} (${r.test}); corrected chi-square statistic ${r.statistic.toFixed(4)}`;
  } catch (e) {
    fail(out, e);
  }
}

await init();
$("sp-go").onclick = renderSpectrogram;
$("pl-go").onclick = renderPlan;
$("mc-go").onclick = renderMcnemar;
renderSpectrogram();
renderPlan();
renderMcnemar();
