import init, { MeltpoolSession, BalloonCurve, flicker_response } from "./pkg/evmelt_web.js";

const $ = (id) => document.getElementById(id);
let session = null;

function drawFrame() {
  if (!session) return;
  const t = Number($("mp-t").value);
  const w = Number($("mp-w").value);
  $("mp-t-out").textContent = `${t / 1000} ms`;
  $("mp-w-out").textContent = `${w / 1000} ms`;
  try {
    const rgba = session.frame($("mp-code").value, t, w, Number($("mp-f0").value));
    const ctx = $("mp-canvas").getContext("2d");
    ctx.putImageData(new ImageData(new Uint8ClampedArray(rgba), session.width(), session.height()), 0, 0);
  } catch (e) {
    $("mp-info").textContent = String(e);
  }
}

function simulatePool() {
  $("mp-info").textContent = "simulating...";
  setTimeout(() => {
    session = new MeltpoolSession(Number($("mp-seed").value), $("mp-anomaly").checked);
    $("mp-info").textContent = `${session.event_count()} events`;
    drawFrame();
  }, 0);
}

function axes(ctx, W, H, pad) {
  ctx.clearRect(0, 0, W, H);
  ctx.strokeStyle = "#888";
  ctx.beginPath();
  ctx.moveTo(pad, pad);
  ctx.lineTo(pad, H - pad);
  ctx.lineTo(W - pad, H - pad);
  ctx.stroke();
}

function measureFlicker() {
  const probes = [10, 25, 50, 75, 100, 150, 200, 300, 400];
  const energy = flicker_response(Number($("fl-hz").value), Number($("fl-w").value) * 1000, new Float64Array(probes));
  const c = $("fl-canvas");
  const ctx = c.getContext("2d");
  const pad = 30;
  axes(ctx, c.width, c.height, pad);
  const top = Math.max(...energy) || 1;
  const bw = (c.width - 2 * pad) / probes.length;
  ctx.font = "11px sans-serif";
  probes.forEach((f, i) => {
    const h = (energy[i] / top) * (c.height - 2 * pad);
    ctx.fillStyle = "#3a6ea5";
    ctx.fillRect(pad + i * bw + 4, c.height - pad - h, bw - 8, h);
    ctx.fillStyle = "#222";
    ctx.fillText(`${f}`, pad + i * bw + bw / 2 - 8, c.height - pad + 14);
  });
}

function simulateBalloon() {
  $("bp-info").textContent = "simulating...";
  setTimeout(() => {
    const curve = new BalloonCurve(Math.round(Number($("bp-pop").value) * 1000), Number($("bp-bins").value));
    const x = curve.centers_s();
    const y = curve.fraction();
    const c = $("bp-canvas");
    const ctx = c.getContext("2d");
    const pad = 30;
    axes(ctx, c.width, c.height, pad);
    const sx = (t) => pad + (t / 10) * (c.width - 2 * pad);
    const sy = (f) => c.height - pad - f * (c.height - 2 * pad);
    ctx.strokeStyle = "#3a6ea5";
    ctx.beginPath();
    x.forEach((t, i) => (i ? ctx.lineTo(sx(t), sy(y[i])) : ctx.moveTo(sx(t), sy(y[i]))));
    ctx.stroke();
    ctx.strokeStyle = "#c33";
    ctx.beginPath();
    ctx.moveTo(sx(curve.burst_s()), pad);
    ctx.lineTo(sx(curve.burst_s()), c.height - pad);
    ctx.stroke();
    $("bp-info").textContent =
      `${curve.event_count()} events, burst at ${curve.burst_s().toFixed(3)} s, ` +
      `${(100 * curve.pre_pop_fraction()).toFixed(1)}% before the pop`;
  }, 0);
}

await init();
$("mp-run").onclick = simulatePool;
for (const id of ["mp-code", "mp-t", "mp-w", "mp-f0"]) $(id).oninput = drawFrame;
$("fl-run").onclick = measureFlicker;
$("bp-run").onclick = simulateBalloon;
simulatePool();
measureFlicker();
