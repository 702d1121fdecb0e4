import init, { Demo } from "./pkg/fuselab_web.js";

const STREAMS = ["input", "gt", "gmm", "sc", "median", "fused"];
const $ = (id) => document.getElementById(id);
const scores = {};
let demo = null;

function views() {
  const root = $("views");
  root.innerHTML = "";
  for (const name of STREAMS) {
    const fig = document.createElement("figure");
    const canvas = document.createElement("canvas");
    canvas.id = "view-" + name;
    const cap = document.createElement("figcaption");
    cap.id = "cap-" + name;
    fig.append(canvas, cap);
    root.append(fig);
  }
}

function paint(name, pixels) {
  const canvas = $("view-" + name);
  const w = demo.width(), h = demo.height();
  canvas.width = w;
  canvas.height = h;
  const ctx = canvas.getContext("2d");
  if (pixels.length === 0) {
    ctx.clearRect(0, 0, w, h);
    return;
  }
  ctx.putImageData(new ImageData(new Uint8ClampedArray(pixels), w, h), 0, 0);
}

function draw() {
  if (!demo) return;
  const t = Number($("frame").value);
  $("frameOut").value = t;
  paint("input", demo.frameRgba(t));
  for (const name of STREAMS.slice(1)) {
    paint(name, demo.maskRgba(name, t));
    const fm = scores[name];
    $("cap-" + name).textContent = fm === undefined ? name : `${name}  FM ${fm.toFixed(4)}`;
  }
  $("cap-input").textContent = "input";
}

function guard(fn) {
  try {
    $("status").textContent = "";
    fn();
  } catch (e) {
    $("status").textContent = String(e.message ?? e);
  }
  draw();
}

function build() {
  guard(() => {
    const size = Number($("size").value);
    demo = new Demo(size, size, Number($("frames").value), Number($("objects").value),
                    Number($("noise").value), Number($("seed").value));
    for (const k of Object.keys(scores)) delete scores[k];
    $("frame").max = demo.frames() - 1;
    $("frame").value = Math.min(Number($("frame").value), demo.frames() - 1);
  });
}

await init();
views();
build();
$("build").onclick = build;
$("frame").oninput = draw;
$("sens").oninput = () => { $("sensOut").value = Number($("sens").value).toFixed(2); };
for (const b of document.querySelectorAll("button[data-algo]")) {
  b.onclick = () => guard(() => {
    scores[b.dataset.algo] = demo.runGenerator(b.dataset.algo, Number($("sens").value));
    delete scores.fused;
  });
}
$("fuse").onclick = () => guard(() => { scores.fused = demo.fuseStreams($("expr").value); });
