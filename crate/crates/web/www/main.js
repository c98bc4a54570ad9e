import init, { scenario_names, simulate, gain_curve, closed_loop_poles } from "./pkg/wheelleg_web.js";

const $ = (id) => document.getElementById(id);
const COLORS = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd"];

function status(msg) {
  $("status").textContent = msg || "";
}

// Draws series [{label, x, y}] into a rectangle of the canvas.
function plot(ctx, rect, series, yLabel) {
  const { x0, y0, w, h } = rect;
  const xs = series.flatMap((s) => Array.from(s.x));
  const ys = series.flatMap((s) => Array.from(s.y)).filter(Number.isFinite);
  let [xmin, xmax] = [Math.min(...xs), Math.max(...xs)];
  let [ymin, ymax] = [Math.min(...ys), Math.max(...ys)];
  if (ymax - ymin < 1e-9) { ymin -= 1; ymax += 1; }
  const pad = 0.05 * (ymax - ymin);
  ymin -= pad; ymax += pad;
  const px = (x) => x0 + ((x - xmin) / (xmax - xmin || 1)) * w;
  const py = (y) => y0 + h - ((y - ymin) / (ymax - ymin)) * h;

  ctx.strokeStyle = "#999";
  ctx.strokeRect(x0, y0, w, h);
  ctx.fillStyle = "#444";
  ctx.font = "11px sans-serif";
  ctx.fillText(ymax.toPrecision(3), x0 + 3, y0 + 11);
  ctx.fillText(ymin.toPrecision(3), x0 + 3, y0 + h - 3);
  ctx.fillText(xmin.toPrecision(3), x0, y0 + h + 12);
  ctx.fillText(xmax.toPrecision(3), x0 + w - 30, y0 + h + 12);
  ctx.fillText(yLabel, x0 + w / 2 - 20, y0 - 4);
  if (ymin < 0 && ymax > 0) {
    ctx.strokeStyle = "#ddd";
    ctx.beginPath(); ctx.moveTo(x0, py(0)); ctx.lineTo(x0 + w, py(0)); ctx.stroke();
  }
  series.forEach((s, i) => {
    ctx.strokeStyle = s.color || COLORS[i % COLORS.length];
    ctx.beginPath();
    for (let k = 0; k < s.x.length; k++) {
      const [X, Y] = [px(s.x[k]), py(s.y[k])];
      k === 0 ? ctx.moveTo(X, Y) : ctx.lineTo(X, Y);
    }
    ctx.stroke();
  });
}

function runScenario() {
  status("running...");
  setTimeout(() => {
    let trace;
    try {
      trace = simulate($("config").value, $("scenario").value, Number($("seed").value), $("noise").value);
    } catch (e) {
      status(String(e));
      return;
    }
    status("");
    const canvas = $("traces");
    const ctx = canvas.getContext("2d");
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    const t = trace.t();
    const top = [
      { label: "head pitch", x: t, y: trace.gamma() },
      { label: "head pitch target", x: t, y: trace.gamma_d() },
      { label: "leg angle", x: t, y: trace.theta() },
      { label: "roll", x: t, y: trace.psi() },
      { label: "leg split", x: t, y: trace.split() },
    ];
    const bottom = [
      { label: "velocity", x: t, y: trace.x_dot() },
      { label: "velocity target", x: t, y: trace.v_d() },
    ];
    plot(ctx, { x0: 50, y0: 20, w: 850, h: 200 }, top, "angles [rad]");
    plot(ctx, { x0: 50, y0: 260, w: 850, h: 130 }, bottom, "velocity [m/s]");
    $("trace-legend").innerHTML = [...top, ...bottom]
      .map((s, i) => {
        const c = COLORS[(i < top.length ? i : i - top.length) % COLORS.length];
        return `<span style="color:${c}">&#9632; ${s.label}</span>`;
      })
      .join("");
    $("report").textContent = trace.report();
    trace.free();
  }, 10);
}

function drawGains() {
  let pts;
  try {
    pts = gain_curve($("config").value, Number($("gain-row").value), Number($("gain-col").value));
  } catch (e) {
    status(String(e));
    return;
  }
  const x = [], y = [];
  for (let i = 0; i < pts.length; i += 2) { x.push(pts[i]); y.push(pts[i + 1]); }
  const canvas = $("gains");
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  plot(ctx, { x0: 50, y0: 20, w: 850, h: 200 }, [{ x, y }], "gain vs leg length [m]");
}

function drawPoles() {
  const leg = Number($("leg").value);
  $("leg-value").textContent = `${leg.toFixed(3)} m`;
  let pts;
  try {
    pts = closed_loop_poles($("config").value, leg);
  } catch (e) {
    status(String(e));
    return;
  }
  const canvas = $("poles");
  const ctx = canvas.getContext("2d");
  const c = canvas.width / 2, r = canvas.width / 2 - 20;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.strokeStyle = "#999";
  ctx.beginPath(); ctx.arc(c, c, r, 0, 2 * Math.PI); ctx.stroke();
  ctx.beginPath(); ctx.moveTo(c - r, c); ctx.lineTo(c + r, c); ctx.moveTo(c, c - r); ctx.lineTo(c, c + r); ctx.stroke();
  const lines = [];
  ctx.strokeStyle = "#d62728";
  for (let i = 0; i < pts.length; i += 2) {
    const [re, im] = [pts[i], pts[i + 1]];
    const X = c + re * r, Y = c - im * r;
    ctx.beginPath();
    ctx.moveTo(X - 4, Y - 4); ctx.lineTo(X + 4, Y + 4);
    ctx.moveTo(X - 4, Y + 4); ctx.lineTo(X + 4, Y - 4);
    ctx.stroke();
    lines.push(`${re.toFixed(5)} ${im >= 0 ? "+" : "-"} ${Math.abs(im).toFixed(5)}i   |z| = ${Math.hypot(re, im).toFixed(6)}`);
  }
  $("pole-list").textContent = lines.join("\n");
}

await init();
for (const name of scenario_names()) {
  const opt = document.createElement("option");
  opt.value = opt.textContent = name;
  $("scenario").append(opt);
}
$("run").addEventListener("click", runScenario);
$("gain-row").addEventListener("change", drawGains);
$("gain-col").addEventListener("change", drawGains);
$("leg").addEventListener("input", drawPoles);
$("config").addEventListener("change", () => { status(""); drawGains(); drawPoles(); });
drawGains();
drawPoles();
runScenario();
