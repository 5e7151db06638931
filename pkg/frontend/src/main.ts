import { Api } from "./api.js";
import { AppController } from "./app.js";
import { HistoryStore } from "./history.js";
import { FramePlayer } from "./playback.js";
import { drawGrid, drawOverlay, tileAt, type GridContext } from "./render.js";

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
};

const app = new AppController({
  api: new Api(),
  history: new HistoryStore(window.localStorage),
});

const promptEl = $<HTMLTextAreaElement>("prompt");
const modelEl = $<HTMLSelectElement>("model");
const seedEl = $<HTMLInputElement>("seed");
const stepsEl = $<HTMLInputElement>("steps");
const stepsValueEl = $<HTMLElement>("steps-value");
const dumpEl = $<HTMLInputElement>("dump-steps");
const zoomEl = $<HTMLSelectElement>("zoom");
const generateEl = $<HTMLButtonElement>("generate");
const randomizeEl = $<HTMLButtonElement>("randomize");
const overlayEl = $<HTMLButtonElement>("overlay");
const statusEl = $<HTMLElement>("status");
const tooltipEl = $<HTMLElement>("tooltip");
const canvas = $<HTMLCanvasElement>("map");
const galleryEl = $<HTMLElement>("gallery");
const clearEl = $<HTMLButtonElement>("clear-history");

let player: FramePlayer | null = null;

const cellSize = (): number => parseInt(zoomEl.value, 10);

const paintGrid = (grid: number[][]): void => {
  const size = cellSize();
  canvas.width = grid[0].length * size;
  canvas.height = grid.length * size;
  const ctx = canvas.getContext("2d") as unknown as GridContext;
  drawGrid(ctx, grid, app.palette, size);
  if (app.state.overlayOn && app.state.analysis) {
    drawOverlay(ctx, app.state.analysis.meta.rooms, size);
  }
};

const thumbnail = (grid: number[][]): HTMLCanvasElement => {
  const thumb = document.createElement("canvas");
  thumb.width = grid[0].length * 2;
  thumb.height = grid.length * 2;
  drawGrid(thumb.getContext("2d") as unknown as GridContext, grid, app.palette, 2);
  return thumb;
};

const renderGallery = (): void => {
  galleryEl.textContent = "";
  const entries = app.listHistory();
  entries.forEach((entry, index) => {
    const item = document.createElement("figure");
    item.className = "gallery-item";
    item.appendChild(thumbnail(entry.grid));
    const caption = document.createElement("figcaption");
    const score = entry.alignerScore !== undefined
      ? ` · ${entry.alignerScore.toFixed(1)}`
      : "";
    caption.textContent = `${entry.model} #${entry.seed}${score}`;
    caption.title = entry.prompt;
    item.appendChild(caption);
    item.addEventListener("click", () => app.restore(index));
    item.addEventListener("contextmenu", (ev) => {
      ev.preventDefault();
      void app.scoreEntry(index);
    });
    galleryEl.prepend(item);
  });
};

const render = (): void => {
  generateEl.disabled = app.state.busy;
  overlayEl.disabled = !app.state.grid;
  stepsEl.disabled = app.state.model !== "ddm";
  dumpEl.disabled = app.state.model !== "ddm";
  stepsValueEl.textContent = stepsEl.value;
  seedEl.value = String(app.state.seed);
  promptEl.value = app.state.prompt;
  modelEl.value = app.state.model;
  overlayEl.textContent = app.state.overlayOn ? "Hide overlay" : "Show overlay";
  if (app.state.error) {
    statusEl.textContent = app.state.error;
    statusEl.className = "error";
  } else if (app.state.busy) {
    statusEl.textContent = "generating…";
    statusEl.className = "";
  } else if (app.state.durationMs !== null) {
    statusEl.textContent = `${app.state.durationMs.toFixed(0)} ms`;
    statusEl.className = "";
  } else {
    statusEl.textContent = "";
  }
  if (app.state.grid) paintGrid(app.state.grid);
  renderGallery();
};

app.onChange = render;

generateEl.addEventListener("click", () => {
  player?.stop();
  player = null;
  void app.generate().then((ok) => {
    if (ok && app.state.frames) {
      player = new FramePlayer(app.state.frames, (frame) => paintGrid(frame));
      player.play(120);
    }
  });
});

randomizeEl.addEventListener("click", () => app.randomizeSeed());
overlayEl.addEventListener("click", () => void app.toggleOverlay());
clearEl.addEventListener("click", () => app.clearHistory());

promptEl.addEventListener("input", () => {
  app.state.prompt = promptEl.value;
});
modelEl.addEventListener("change", () => app.setModel(modelEl.value as "fdm" | "ddm"));
seedEl.addEventListener("change", () => {
  const parsed = parseInt(seedEl.value, 10);
  if (!Number.isNaN(parsed)) app.setSeed(parsed);
});
stepsEl.addEventListener("input", () => {
  stepsValueEl.textContent = stepsEl.value;
  app.state.steps = parseInt(stepsEl.value, 10);
});
dumpEl.addEventListener("change", () => app.setDumpSteps(dumpEl.checked));
zoomEl.addEventListener("change", () => {
  if (app.state.grid) paintGrid(app.state.grid);
});

canvas.addEventListener("mousemove", (ev) => {
  if (!app.state.grid) return;
  const rect = canvas.getBoundingClientRect();
  const hit = tileAt(
    app.state.grid,
    cellSize(),
    ev.clientX - rect.left,
    ev.clientY - rect.top,
  );
  if (hit && app.palette[hit.id]) {
    tooltipEl.textContent = app.palette[hit.id].name;
    tooltipEl.style.left = `${ev.clientX + 12}px`;
    tooltipEl.style.top = `${ev.clientY + 12}px`;
    tooltipEl.hidden = false;
  } else {
    tooltipEl.hidden = true;
  }
});
canvas.addEventListener("mouseleave", () => {
  tooltipEl.hidden = true;
});

void app.init().then(render);
