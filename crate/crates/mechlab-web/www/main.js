import init, { bundled_scenario, synthesize, objective, simulate } from "./pkg/mechlab_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);
const PARAMS = [
  ["s₁", 10 / 3], ["b₁", 4 / 3], ["s₂", 1], ["p₂", 0.5], ["b₂", 0.5],
];

function show(id, fn) {
  const out = $(id);
  out.classList.remove("error");
  try {
    return fn(out);
  } catch (err) {
    out.classList.add("error");
    out.textContent = String(err);
  }
}

function plot(canvas, xs, series) {
  const ctx = canvas.getContext("2d");
  const { width, height } = canvas;
  const pad = 30;
  ctx.clearRect(0, 0, width, height);
  const ys = series.flatMap((s) => s.values);
  const [lo, hi] = [Math.min(...ys), Math.max(...ys)];
  const sx = (x) => pad + ((x - xs[0]) / (xs[xs.length - 1] - xs[0])) * (width - 2 * pad);
  const sy = (y) => height - pad - ((y - lo) / (hi - lo || 1)) * (height - 2 * pad);
  ctx.strokeStyle = "#999";
  ctx.beginPath();
  ctx.moveTo(pad, sy(0));
  ctx.lineTo(width - pad, sy(0));
  ctx.stroke();
  ctx.fillStyle = "#555";
  ctx.fillText(hi.toFixed(2), 2, pad);
  ctx.fillText(lo.toFixed(2), 2, height - pad);
  for (const { values, color } of series) {
    ctx.strokeStyle = color;
    ctx.beginPath();
    values.forEach((y, i) => (i ? ctx.lineTo(sx(xs[i]), sy(y)) : ctx.moveTo(sx(xs[i]), sy(y))));
    ctx.stroke();
  }
}

function runSynthesis(scenario) {
  show("syn-out", (out) => {
    const r = JSON.parse(synthesize(scenario, num("syn-nodes"), num("syn-eta")));
    plot($("syn-plot"), r.theta, [
      { values: r.value, color: "#1f77b4" },
      { values: r.continuing_payment, color: "#d62728" },
      { values: r.terminal_payment, color: "#2ca02c" },
    ]);
    out.textContent = [
      `one-shot IC: ${r.ic_verdict ? "PASS" : "FAIL"} (worst gap ${r.worst_gap.toExponential(2)})`,
      `participation: ${r.participation ? "PASS" : "FAIL"}, ex-ante agent value ${r.ex_ante_value.toFixed(6)}`,
      `posted prices: ${r.posted.map((p) => p.toFixed(6)).join(", ")}`,
      `solved cutoff: ${r.cutoffs.map((c) => (c === null ? "never" : c.toFixed(4))).join(", ")}`,
      `mean exit period: ${r.mean_exit_period.toFixed(6)}`,
    ].join("\n");
  });
}

function runObjective(scenario) {
  show("obj-out", (out) => {
    const params = new Float64Array(PARAMS.map((_, k) => Number($(`obj-p${k}`).value)));
    const r = JSON.parse(objective(scenario, 201, num("obj-eta"), params));
    out.textContent = `surplus ${r.surplus.toFixed(6)}\nrent    ${r.rent.toFixed(6)}\nvalue   ${r.value.toFixed(6)}`;
  });
}

function runSimulation(scenario) {
  show("mc-out", (out) => {
    const r = JSON.parse(simulate(scenario, 201, num("mc-eta"), num("mc-paths"), BigInt(num("mc-seed"))));
    const { agent_payoff: a, stop_time: t } = r.stats;
    out.textContent = [
      `agent payoff ${a.mean.toFixed(5)} ± ${a.stderr.toExponential(2)} (quadrature ${r.quadrature_value.toFixed(5)})`,
      `exit period  ${t.mean.toFixed(5)} ± ${t.stderr.toExponential(2)} (quadrature ${r.quadrature_exit_period.toFixed(5)})`,
      `exit shares  ${r.stats.stop_distribution.map((s) => s.toFixed(4)).join(", ")}`,
    ].join("\n");
  });
}

await init();
const scenario = bundled_scenario();
$("obj-params").innerHTML = PARAMS.map(
  ([name, v], k) => `<label>${name} <input id="obj-p${k}" type="number" step="0.05" value="${v.toFixed(4)}"></label>`,
).join("");
$("syn-run").onclick = () => runSynthesis(scenario);
$("obj-run").onclick = () => runObjective(scenario);
$("mc-run").onclick = () => runSimulation(scenario);
runSynthesis(scenario);
runObjective(scenario);
