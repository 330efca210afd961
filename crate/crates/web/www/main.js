import init, { excitationCurve, twoModeScattering, peakScan } from "./pkg/fockflow_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function plot(canvas, xs, ys, { logx = false } = {}) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 36;
  const fx = logx ? Math.log : (v) => v;
  const x0 = fx(xs[0]), x1 = fx(xs[xs.length - 1]);
  const ymax = Math.max(1e-12, ...ys);
  const px = (x) => pad + (w - 2 * pad) * (fx(x) - x0) / (x1 - x0);
  const py = (y) => h - pad - (h - 2 * pad) * y / ymax;

  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  ctx.fillStyle = "#555";
  ctx.font = "11px sans-serif";
  ctx.fillText(ymax.toPrecision(3), 2, pad + 4);
  ctx.fillText("0", pad - 12, h - pad + 4);
  ctx.fillText(xs[0].toPrecision(3), pad, h - pad + 14);
  ctx.fillText(xs[xs.length - 1].toPrecision(3), w - pad - 24, h - pad + 14);

  ctx.strokeStyle = "#1f5fa8";
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  xs.forEach((x, k) => (k ? ctx.lineTo(px(x), py(ys[k])) : ctx.moveTo(px(x), py(ys[k]))));
  ctx.stroke();
}

function guard(out, f) {
  try {
    out.classList.remove("err");
    f();
  } catch (e) {
    out.classList.add("err");
    out.textContent = String(e.message ?? e);
  }
}

await init();

$("ex-go").onclick = () => guard($("ex-out"), () => {
  const s = excitationCurve(num("ex-n"), num("ex-bw"), 801);
  const ys = Array.from(s.y);
  const k = ys.indexOf(Math.max(...ys));
  $("ex-out").textContent = `max P_e = ${ys[k].toFixed(5)} at t = ${s.x[k].toFixed(3)}`;
  plot($("ex-plot"), Array.from(s.x), ys);
});

$("sc-go").onclick = () => guard($("sc-out"), () => {
  const r = twoModeScattering(num("sc-bw"));
  $("sc-out").textContent =
    `transmitted ${r.transmitted.toFixed(5)}, reflected ${r.reflected.toFixed(5)}, max P_e ${r.peak_excitation.toFixed(5)}`;
});

$("pk-go").onclick = () => guard($("pk-out"), () => {
  const s = peakScan(num("pk-n"), num("pk-lo"), num("pk-hi"), 40);
  const ys = Array.from(s.y);
  const k = ys.indexOf(Math.max(...ys));
  $("pk-out").textContent = `best bandwidth on the grid ${s.x[k].toPrecision(4)}, max P_e ${ys[k].toFixed(5)}`;
  plot($("pk-plot"), Array.from(s.x), ys, { logx: true });
});

$("ex-go").click();
