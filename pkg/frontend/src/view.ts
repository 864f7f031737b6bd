import { ApiClient } from "./api.js";
import { featureGlyph } from "./glyph.js";
import { SessionController } from "./state.js";
import type { GridItem, SessionParams } from "./types.js";

const PARAM_FIELDS: Array<{ key: keyof SessionParams; label: string }> = [
  { key: "k", label: "k" },
  { key: "r", label: "r" },
  { key: "b", label: "b" },
  { key: "s_c", label: "S_c" },
  { key: "s_m", label: "S_m" },
  { key: "w", label: "w" },
];

/** DOM layer: renders a SessionController and forwards user events. */
export class SessionView {
  private glyphCache = new Map<number, string>();

  constructor(
    private readonly root: HTMLElement,
    private readonly controller: SessionController,
    private readonly api: ApiClient,
    private readonly doc: Document = root.ownerDocument,
  ) {
    controller.on("grid", () => this.renderGrid());
    controller.on("stats", () => this.renderStats());
    controller.on("banner", () => this.renderBanner());
    controller.on("busy", () => this.renderControls());
    this.mount();
  }

  private mount(): void {
    this.root.innerHTML = "";
    const banner = this.el("div", "banner");
    banner.id = "banner";
    banner.hidden = true;
    const grid = this.el("div", "grid");
    grid.id = "grid";
    const controls = this.el("div", "controls");
    controls.id = "controls";

    const submit = this.el("button", "submit") as HTMLButtonElement;
    submit.id = "submit";
    submit.textContent = "Submit feedback";
    submit.addEventListener("click", () => void this.controller.submitRound());

    const skip = this.el("button", "skip") as HTMLButtonElement;
    skip.id = "skip";
    skip.textContent = "Skip round";
    skip.addEventListener("click", () => void this.controller.submitRound({ skip: true }));

    const stats = this.el("div", "stats");
    stats.id = "stats";
    const params = this.el("form", "params") as HTMLFormElement;
    params.id = "params";
    params.addEventListener("submit", (event) => {
      event.preventDefault();
      void this.applyParamEdits(params);
    });
    for (const field of PARAM_FIELDS) {
      const label = this.el("label");
      label.textContent = field.label;
      const input = this.el("input") as HTMLInputElement;
      input.name = field.key;
      input.type = "text";
      label.appendChild(input);
      params.appendChild(label);
    }
    const apply = this.el("button") as HTMLButtonElement;
    apply.id = "apply-params";
    apply.type = "submit";
    apply.textContent = "Apply from next round";
    params.appendChild(apply);

    controls.append(submit, skip);
    this.root.append(banner, grid, controls, stats, params);
    this.renderGrid();
    this.renderStats();
    this.renderControls();
    this.renderParams();
  }

  private el(tag: string, cls?: string): HTMLElement {
    const node = this.doc.createElement(tag);
    if (cls) {
      node.className = cls;
    }
    return node;
  }

  private renderGrid(): void {
    const grid = this.root.querySelector("#grid") as HTMLElement;
    grid.innerHTML = "";
    for (const item of this.controller.grid) {
      grid.appendChild(this.renderCell(item));
    }
    this.renderControls();
  }

  private renderCell(item: GridItem): HTMLElement {
    const cell = this.el("div", `cell ${item.labelState}`);
    cell.dataset.itemId = String(item.id);
    cell.title = `#${item.id}  visual ${item.scoreVisual.toFixed(3)}  ` +
      `text ${item.scoreText.toFixed(3)}  avg rank ${item.avgRank.toFixed(1)}`;
    const img = this.el("img") as HTMLImageElement;
    img.alt = `item ${item.id}`;
    if (item.thumbnailUrl) {
      img.src = item.thumbnailUrl;
    } else {
      const cached = this.glyphCache.get(item.id);
      if (cached) {
        img.src = cached;
      } else {
        void this.api
          .itemFeatures(this.controller.collection.id, item.id)
          .then((features) => {
            const uri = featureGlyph(features);
            this.glyphCache.set(item.id, uri);
            img.src = uri;
          })
          .catch(() => {
            img.src = featureGlyph({ visual: [], text: [] });
          });
      }
    }
    const tag = this.el("span", "tag");
    tag.textContent = item.labelState === "relevant" ? "+" :
      item.labelState === "not_relevant" ? "-" : "";
    cell.append(img, tag);
    cell.addEventListener("click", () => {
      this.controller.toggleLabel(item.id);
    });
    return cell;
  }

  private renderStats(): void {
    const stats = this.root.querySelector("#stats") as HTMLElement;
    const last = this.controller.lastStats;
    if (!last) {
      stats.textContent = "";
      return;
    }
    const phases = last.latency_ms;
    stats.innerHTML =
      `<span id="round-badge">round ${this.controller.round}</span> ` +
      `<span id="latency-badge">${last.retrieve_ms.toFixed(1)} ms</span> ` +
      `<span class="phases">select ${phases.select.toFixed(1)} / score ${phases.score.toFixed(1)}` +
      ` / fuse ${phases.fuse.toFixed(1)} / train ${phases.train.toFixed(1)} ms</span> ` +
      `<span class="volume">${last.items_scored} items in ${last.clusters_scored} clusters</span>`;
  }

  private renderBanner(): void {
    const banner = this.root.querySelector("#banner") as HTMLElement;
    if (this.controller.banner) {
      banner.hidden = false;
      banner.textContent = this.controller.banner;
    } else {
      banner.hidden = true;
      banner.textContent = "";
    }
  }

  private renderControls(): void {
    const submit = this.root.querySelector("#submit") as HTMLButtonElement | null;
    const skip = this.root.querySelector("#skip") as HTMLButtonElement | null;
    if (!submit || !skip) {
      return;
    }
    submit.disabled = this.controller.busy || !this.controller.canSubmit();
    skip.disabled = this.controller.busy;
  }

  private renderParams(): void {
    const form = this.root.querySelector("#params") as HTMLFormElement;
    for (const field of PARAM_FIELDS) {
      const input = form.elements.namedItem(field.key) as HTMLInputElement;
      const value = this.controller.params[field.key];
      input.value = value === null ? "" : String(value);
    }
  }

  private async applyParamEdits(form: HTMLFormElement): Promise<void> {
    const edit: Partial<SessionParams> = {};
    for (const field of PARAM_FIELDS) {
      const input = form.elements.namedItem(field.key) as HTMLInputElement;
      const raw = input.value.trim();
      if (field.key === "s_m") {
        edit.s_m = raw === "" ? null : Number(raw);
      } else if (raw !== "") {
        edit[field.key] = Number(raw) as never;
      }
    }
    if (await this.controller.updateParams(edit)) {
      this.renderParams();
    }
  }
}
