import init, * as core from "./pkg/rpcnet_wasm_demo.js";

const $ = (id) => document.getElementById(id);

// Keeps each range input's <output> in sync and re-renders on change.
function bindSlider(input, onChange) {
  const out = input.parentElement.querySelector("output");
  const update = () => {
    if (out) out.textContent = input.value;
    onChange();
  };
  input.addEventListener("input", update);
  if (out) out.textContent = input.value;
}

function guarded(errorId, draw) {
  return () => {
    try {
      draw();
      $(errorId).textContent = "";
    } catch (e) {
      $(errorId).textContent = String(e);
    }
  };
}

function axes(ctx, w, h, pad) {
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#bbb";
  ctx.beginPath();
  ctx.moveTo(pad, pad);
  ctx.lineTo(pad, h - pad);
  ctx.lineTo(w - pad, h - pad);
  ctx.stroke();
}

function polyline(ctx, xs, ys, color) {
  ctx.strokeStyle = color;
  ctx.beginPath();
  xs.forEach((x, i) => (i ? ctx.lineTo(x, ys[i]) : ctx.moveTo(x, ys[i])));
  ctx.stroke();
}

// ---------------------------------------------------------------- hand view

function setupHand() {
  const names = core.dof_names();
  const limits = core.joint_limits();
  const rest = core.rest_angles();
  const edges = core.skeleton_edges();
  const sliders = [];
  const box = $("dofs");
  names.forEach((name, i) => {
    const label = document.createElement("label");
    label.innerHTML = `${name} <input type="range" step="1"><output></output>`;
    const input = label.querySelector("input");
    input.min = limits[2 * i];
    input.max = limits[2 * i + 1];
    input.value = rest[i];
    box.appendChild(label);
    sliders.push(input);
  });

  const canvas = $("hand");
  const ctx = canvas.getContext("2d");
  const draw = guarded("hand-error", () => {
    const angles = new Float64Array(sliders.map((s) => Number(s.value)));
    const m = core.hand_markers(angles);
    const az = (Number($("azimuth").value) * Math.PI) / 180;
    const el = (Number($("elevation").value) * Math.PI) / 180;
    // Orthographic view: yaw about z, then pitch about the screen x axis.
    const project = (i) => {
      const [x, y, z] = [m[3 * i], m[3 * i + 1], m[3 * i + 2]];
      const u = x * Math.cos(az) - y * Math.sin(az);
      const v = x * Math.sin(az) + y * Math.cos(az);
      const depth = v * Math.cos(el) - z * Math.sin(el);
      const up = v * Math.sin(el) + z * Math.cos(el);
      return [canvas.width / 2 + 1.6 * (u - 90), canvas.height / 2 - 1.6 * up, depth];
    };
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    ctx.lineWidth = 3;
    ctx.strokeStyle = "#455a64";
    for (let k = 0; k < edges.length; k += 2) {
      const a = project(edges[k]);
      const b = project(edges[k + 1]);
      ctx.beginPath();
      ctx.moveTo(a[0], a[1]);
      ctx.lineTo(b[0], b[1]);
      ctx.stroke();
    }
    const tips = new Set([8, 11, 14, 17, 20]);
    for (let i = 0; i < m.length / 3; i++) {
      const [px, py] = project(i);
      ctx.fillStyle = tips.has(i) ? "#d32f2f" : i >= 21 ? "#7b1fa2" : "#0277bd";
      ctx.beginPath();
      ctx.arc(px, py, 4, 0, 2 * Math.PI);
      ctx.fill();
    }
  });
  sliders.forEach((s) => bindSlider(s, draw));
  bindSlider($("azimuth"), draw);
  bindSlider($("elevation"), draw);
  $("reset-pose").addEventListener("click", () => {
    sliders.forEach((s, i) => {
      s.value = rest[i];
      s.parentElement.querySelector("output").textContent = s.value;
    });
    draw();
  });
  draw();
}

// ------------------------------------------------------------ filter view

function setupFilter() {
  const canvas = $("filter");
  const ctx = canvas.getContext("2d");
  const pad = 36;
  const draw = guarded("filter-error", () => {
    const order = Number($("order").value);
    const cutoff = Number($("cutoff").value);
    const rate = Number($("rate").value);
    const nyquist = rate / 2;
    const n = 300;
    const lo = Math.log10(0.1);
    const hi = Math.log10(nyquist * 0.999);
    const freqs = new Float64Array(n).map((_, i) => 10 ** (lo + ((hi - lo) * i) / (n - 1)));
    const r = core.butterworth_response(order, cutoff, rate, freqs);
    const db = (g) => Math.max(-100, 20 * Math.log10(Math.max(g, 1e-12)));
    const xs = Array.from(freqs, (f) => pad + ((Math.log10(f) - lo) / (hi - lo)) * (canvas.width - 2 * pad));
    const y = (d) => pad + (-d / 100) * (canvas.height - 2 * pad);
    axes(ctx, canvas.width, canvas.height, pad);
    ctx.lineWidth = 2;
    polyline(ctx, xs, Array.from(r.slice(0, n), (g) => y(db(g))), "#1565c0");
    polyline(ctx, xs, Array.from(r.slice(n), (g) => y(db(g))), "#e65100");
    ctx.fillStyle = "#555";
    ctx.fillText("0 dB", 2, y(0) + 4);
    ctx.fillText("-100 dB", 2, y(-100));
    ctx.fillText("0.1 Hz", pad, canvas.height - 12);
    ctx.fillText(`${nyquist} Hz`, canvas.width - pad - 40, canvas.height - 12);
    const cx = pad + ((Math.log10(cutoff) - lo) / (hi - lo)) * (canvas.width - 2 * pad);
    ctx.strokeStyle = "#ccc";
    ctx.setLineDash([4, 4]);
    polyline(ctx, [cx, cx], [pad, canvas.height - pad], "#aaa");
    ctx.setLineDash([]);
  });
  ["order", "cutoff", "rate"].forEach((id) => bindSlider($(id), draw));
  draw();
}

// -------------------------------------------------------------- EMG view

function setupEmg() {
  const canvas = $("emg");
  const ctx = canvas.getContext("2d");
  const pad = 30;
  const seconds = 6;
  const draw = guarded("emg-error", () => {
    const signal = core.synthetic_emg(seconds, Number($("period").value), Number($("peak").value), BigInt($("seed").value));
    const win = Number($("window").value);
    const step = Number($("step").value);
    const env = core.rms_envelope(signal, win, step);
    const w = canvas.width - 2 * pad;
    const h = canvas.height - 2 * pad;
    const top = Math.max(...env, 1e-6) * 1.4;
    axes(ctx, canvas.width, canvas.height, pad);
    // Rectified, normalised raw signal, decimated for drawing.
    ctx.lineWidth = 1;
    const stride = Math.ceil(signal.length / (2 * w));
    const rx = [];
    const ry = [];
    for (let i = 0; i < signal.length; i += stride) {
      rx.push(pad + (i / signal.length) * w);
      ry.push(canvas.height - pad - Math.min(1, Math.abs(signal[i]) / 5e-3 / top) * h);
    }
    polyline(ctx, rx, ry, "#ccc");
    ctx.lineWidth = 2;
    // Envelope sample i is centred on source sample i*step + win/2.
    const ex = Array.from(env, (_, i) => pad + ((i * step + win / 2) / signal.length) * w);
    const ey = Array.from(env, (v) => canvas.height - pad - (v / top) * h);
    polyline(ctx, ex, ey, "#2e7d32");
    ctx.fillStyle = "#555";
    ctx.fillText(`${env.length} envelope samples from ${signal.length} at 2048 Hz`, pad + 8, pad);
  });
  ["period", "peak", "window", "step", "seed"].forEach((id) => bindSlider($(id), draw));
  draw();
}

await init();
setupHand();
setupFilter();
setupEmg();
