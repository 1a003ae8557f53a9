import init, { scaling_curve, fit_signal, bound_curve } from "./pkg/mrproj_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function frame(canvas, xs, ys, pad = 30) {
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const finite = ys.filter(Number.isFinite);
  const [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  let [y0, y1] = [Math.min(...finite), Math.max(...finite)];
  if (y0 === y1) { y0 -= 1; y1 += 1; }
  const sx = (x) => pad + ((x - x0) / (x1 - x0 || 1)) * (canvas.width - 2 * pad);
  const sy = (y) => canvas.height - pad - ((y - y0) / (y1 - y0)) * (canvas.height - 2 * pad);
  ctx.strokeStyle = "#bbb";
  ctx.strokeRect(pad, pad, canvas.width - 2 * pad, canvas.height - 2 * pad);
  ctx.fillStyle = "#555";
  ctx.font = "11px sans-serif";
  ctx.fillText(y1.toPrecision(3), 2, pad + 4);
  ctx.fillText(y0.toPrecision(3), 2, canvas.height - pad);
  return { ctx, sx, sy };
}

function line(p, xs, ys, color, width = 1.5) {
  p.ctx.strokeStyle = color;
  p.ctx.lineWidth = width;
  p.ctx.beginPath();
  xs.forEach((x, i) => (i ? p.ctx.lineTo(p.sx(x), p.sy(ys[i])) : p.ctx.moveTo(p.sx(x), p.sy(ys[i]))));
  p.ctx.stroke();
}

function dots(p, xs, ys, color) {
  p.ctx.fillStyle = color;
  xs.forEach((x, i) => p.ctx.fillRect(p.sx(x) - 1, p.sy(ys[i]) - 1, 2, 2));
}

function report(id, fn) {
  try {
    fn();
  } catch (e) {
    $(id).innerHTML = `<span class="err">${e.message ?? e}</span>`;
  }
}

function drawPhi() {
  report("phi-out", () => {
    const flat = scaling_curve(num("phi-order"), 900);
    const xs = [], ys = [];
    for (let i = 0; i < flat.length; i += 2) { xs.push(flat[i]); ys.push(flat[i + 1]); }
    line(frame($("phi-canvas"), xs, ys), xs, ys, "#1f5fa8");
  });
}

function drawFit() {
  report("fit-out", () => {
    const fit = fit_signal($("fit-signal").value, num("fit-n"), num("fit-snr"), num("fit-order"), num("fit-level"), BigInt(num("fit-seed")));
    const x = Array.from(fit.x), yt = Array.from(fit.y_true), yn = Array.from(fit.y_noisy);
    const eh = Array.from(fit.eta_hat), lv = Array.from(fit.levels);
    const p = frame($("fit-canvas"), x, yn);
    dots(p, x, yn, "#ccc");
    line(p, x, yt, "#888", 1);
    line(p, x, eh, "#c0392b");
    const q = frame($("level-canvas"), x, lv, 20);
    dots(q, x, lv, "#1f5fa8");
    $("fit-out").textContent =
      `relative RMSE ${fit.rel_rmse.toFixed(4)}, ${fit.regressions} regressions, ${x.length} distinct design points; lower panel: level used at each point`;
    fit.free();
  });
}

function drawBound() {
  report("bound-out", () => {
    const flat = bound_curve(num("bound-j"), num("bound-delta"), num("bound-lo"), num("bound-hi"));
    const xs = [], ys = [];
    for (let i = 0; i < flat.length; i += 2) { xs.push(Math.log2(flat[i])); ys.push(flat[i + 1]); }
    const p = frame($("bound-canvas"), xs, ys);
    line(p, xs, ys, "#27ae60");
    dots(p, xs, ys, "#27ae60");
    $("bound-out").textContent = ys.map((b, i) => `2^${xs[i]}: ${b.toPrecision(3)}`).join("  ");
  });
}

await init();
$("phi-go").onclick = drawPhi;
$("fit-go").onclick = drawFit;
$("bound-go").onclick = drawBound;
drawPhi();
drawFit();
drawBound();
