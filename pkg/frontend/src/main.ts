/** DOM bootstrap: wires the controls to the App controller and paints the
 * canvas stack (base composite, class-map overlay, pins).
 */

import { Client } from "./api.js";
import { clickToPixel } from "./geo.js";
import { PinStore } from "./pins.js";
import { RgbImage, toRgba } from "./ppm.js";
import { App } from "./state.js";
import { Meta, Source } from "./types.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

function paint(canvas: HTMLCanvasElement, img: RgbImage | null): void {
  const ctx = canvas.getContext("2d")!;
  if (img === null) {
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    return;
  }
  ctx.putImageData(new ImageData(toRgba(img), img.width, img.height), 0, 0);
}

function cssColor(rgb: number[]): string {
  return `rgb(${rgb[0]}, ${rgb[1]}, ${rgb[2]})`;
}

async function boot(): Promise<void> {
  const client = new Client();
  const statusLine = el<HTMLDivElement>("status");
  let meta: Meta;
  try {
    meta = await client.meta();
  } catch (e) {
    statusLine.textContent = `service unreachable: ${e}`;
    statusLine.className = "status error";
    return;
  }

  const pins = new PinStore(meta.width, meta.height, meta.transform);
  const app = new App(client, meta, pins);

  const base = el<HTMLCanvasElement>("base");
  const overlay = el<HTMLCanvasElement>("overlay");
  const pinLayer = el<HTMLCanvasElement>("pins");
  for (const c of [base, overlay, pinLayer]) {
    c.width = meta.width;
    c.height = meta.height;
  }

  // legend buttons double as the class picker, colored like the class map
  const legendBox = el<HTMLDivElement>("legend");
  const classButtons = new Map<number, HTMLButtonElement>();
  for (const [id, name] of Object.entries(meta.legend)) {
    const btn = document.createElement("button");
    btn.innerHTML = `<span class="swatch"></span>${name} <span class="count">0</span>`;
    (btn.querySelector(".swatch") as HTMLElement).style.background = cssColor(
      meta.palette[id],
    );
    btn.addEventListener("click", () => app.setActiveClass(Number(id)));
    legendBox.appendChild(btn);
    classButtons.set(Number(id), btn);
  }

  const sourceButtons = new Map<Source, HTMLButtonElement>();
  for (const source of meta.sources) {
    const btn = el<HTMLButtonElement>(`source-${source}`);
    btn.addEventListener("click", () => app.setSource(source));
    sourceButtons.set(source, btn);
  }

  const opacity = el<HTMLInputElement>("opacity");
  opacity.value = String(Math.round(app.opacity * 100));
  opacity.addEventListener("input", () => app.setOpacity(Number(opacity.value) / 100));

  el<HTMLButtonElement>("undo").addEventListener("click", () => {
    app.undoPin();
    redraw();
  });
  el<HTMLButtonElement>("clear").addEventListener("click", () => {
    app.pins.clear();
    redraw();
  });
  el<HTMLButtonElement>("train").addEventListener("click", async () => {
    await app.trainAndOverlay(app.source);
    redraw();
  });
  el<HTMLButtonElement>("validate").addEventListener("click", async () => {
    const ref = el<HTMLSelectElement>("validate-ref").value as "scene" | "stored";
    await app.validateAndReport(ref);
    redraw();
  });

  el<HTMLButtonElement>("export").addEventListener("click", () => {
    const blob = new Blob([app.exportGeoJSON()], { type: "application/geo+json" });
    const a = document.createElement("a");
    a.href = URL.createObjectURL(blob);
    a.download = "pins.geojson";
    a.click();
    URL.revokeObjectURL(a.href);
  });
  el<HTMLInputElement>("import").addEventListener("change", async (ev) => {
    const file = (ev.target as HTMLInputElement).files?.[0];
    if (!file) return;
    try {
      app.importGeoJSON(await file.text());
    } catch (e) {
      app.status = { kind: "error", message: `import failed: ${e}` };
    }
    redraw();
  });

  pinLayer.addEventListener("click", (ev) => {
    const hit = clickToPixel(
      pinLayer.getBoundingClientRect(),
      meta.width,
      meta.height,
      ev.clientX,
      ev.clientY,
    );
    if (hit === null) {
      app.status = { kind: "error", message: "click outside the raster, pin ignored" };
      render();
      return;
    }
    app.placePin(hit[0], hit[1]);
    redraw();
  });

  const panelBox = el<HTMLDivElement>("report");

  function drawPins(): void {
    const ctx = pinLayer.getContext("2d")!;
    ctx.clearRect(0, 0, pinLayer.width, pinLayer.height);
    const bad = new Set(
      app.lastValidatedRef === "stored" ? app.misclassifiedPins(app.source) : [],
    );
    const r = Math.max(2, Math.round(meta.width / 160));
    for (const p of app.pins.list) {
      ctx.beginPath();
      ctx.arc(p.col + 0.5, p.row + 0.5, r, 0, Math.PI * 2);
      ctx.fillStyle = cssColor(meta.palette[String(p.classId)] ?? [128, 128, 128]);
      ctx.fill();
      ctx.lineWidth = 1;
      ctx.strokeStyle = bad.has(p) ? "#ffd400" : "#222";
      ctx.stroke();
      if (bad.has(p)) {
        ctx.beginPath();
        ctx.arc(p.col + 0.5, p.row + 0.5, r + 2, 0, Math.PI * 2);
        ctx.strokeStyle = "#ffd400";
        ctx.stroke();
      }
    }
  }

  function renderPanel(): void {
    panelBox.textContent = "";
    if (app.panel === null) {
      panelBox.textContent = "validate to see the comparison report";
      return;
    }
    const table = document.createElement("table");
    for (const row of app.panel.headline) {
      const tr = document.createElement("tr");
      const th = document.createElement("th");
      th.textContent = row.label;
      const td = document.createElement("td");
      td.textContent = row.text; // payload bytes, never reformatted
      tr.append(th, td);
      table.appendChild(tr);
    }
    panelBox.appendChild(table);
    for (const block of app.panel.perClass) {
      const h = document.createElement("h3");
      h.textContent = block.name;
      panelBox.appendChild(h);
      const t = document.createElement("table");
      for (const row of block.rows) {
        const tr = document.createElement("tr");
        const th = document.createElement("th");
        th.textContent = row.label;
        const td = document.createElement("td");
        td.textContent = row.text;
        tr.append(th, td);
        t.appendChild(tr);
      }
      panelBox.appendChild(t);
    }
  }

  function render(): void {
    statusLine.textContent = app.status.message;
    statusLine.className = `status ${app.status.kind}`;
    overlay.style.opacity = String(app.opacity);
    for (const [id, btn] of classButtons) {
      btn.classList.toggle("active", id === app.activeClass);
    }
    const counts = app.pins.counts(meta.legend);
    for (const [id, btn] of classButtons) {
      (btn.querySelector(".count") as HTMLElement).textContent = String(counts.get(id) ?? 0);
    }
    for (const [source, btn] of sourceButtons) {
      btn.classList.toggle("active", source === app.source);
    }
    paint(overlay, app.overlay(app.source));
    renderPanel();
  }

  function redraw(): void {
    render();
    drawPins();
  }

  app.onChange(render);
  paint(base, await app.composite());
  redraw();
}

window.addEventListener("load", () => {
  boot().catch((e) => {
    const status = document.getElementById("status");
    if (status) status.textContent = String(e);
  });
});
