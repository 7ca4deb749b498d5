/**
 * Single-page annotation client.
 *
 * Panels: session setup, seed expansion with candidate checkboxes,
 * token-click labeling with model pre-highlights, and a metrics
 * dashboard with a stop-suggestion banner when sigma plateaus.
 *
 * One mutation is in flight at a time; every mutation carries the last
 * acknowledged revision and a conflict triggers a non-destructive batch
 * refresh with a notice.
 */

import { ApiClient, ConflictError } from "./api.js";
import { renderChart } from "./chart.js";
import { DEFAULT_EPSILON, sigmaPlateaued } from "./plateau.js";
import type { Span, SpanSet } from "./spans.js";
import { isConsistent, toWire, toggleSpan } from "./spans.js";
import type { BatchSentence, Mode, ViewSession } from "./types.js";
import { MODE_THRESHOLDS } from "./types.js";

const MODES: Mode[] = ["EAL", "AR", "FA", "HFA", "UFA"];

interface DragState {
  sentenceId: number;
  anchor: number;
  current: number;
}

export class App {
  private session: ViewSession | null = null;
  private spans: SpanSet = new Map();
  private drag: DragState | null = null;
  private busy = false;

  constructor(
    private readonly api: ApiClient,
    private readonly root: HTMLElement,
  ) {}

  mount(): void {
    this.root.innerHTML = `
      <header><h1>sparsent</h1><span id="notice"></span></header>
      <section id="setup">
        <input id="corpus-path" placeholder="corpus path (server-side)"/>
        <input id="entity-class" placeholder="entity class"/>
        <select id="mode">${MODES.map((m) => this.modeOption(m)).join("")}</select>
        <button id="create">start session</button>
      </section>
      <section id="seed-panel" hidden>
        <input id="seed" placeholder="seed entity surface"/>
        <button id="expand">expand</button>
        <ul id="candidates"></ul>
        <button id="confirm" hidden>confirm selected</button>
      </section>
      <section id="labeling" hidden>
        <div id="sentences"></div>
        <button id="submit">submit batch</button>
      </section>
      <section id="dashboard" hidden>
        <div id="banner" hidden>confidence has plateaued — consider stopping</div>
        <div id="chart"></div>
        <div id="counts"></div>
      </section>`;
    this.on("create", () => this.createSession());
    this.on("expand", () => this.expandSeed());
    this.on("confirm", () => this.confirmSelected());
    this.on("submit", () => this.submitBatch());
    document.addEventListener("mouseup", () => this.endDrag());
  }

  private modeOption(mode: Mode): string {
    const t = MODE_THRESHOLDS[mode];
    const label = t === undefined ? mode : `${mode} (t=${t.toFixed(2)})`;
    return `<option value="${mode}">${label}</option>`;
  }

  private on(id: string, handler: () => void): void {
    this.element(id).addEventListener("click", () => {
      void this.guarded(handler);
    });
  }

  private element<T extends HTMLElement = HTMLElement>(id: string): T {
    return this.root.querySelector<T>(`#${id}`)!;
  }

  private notify(message: string): void {
    this.element("notice").textContent = message;
  }

  /** Serialize mutations: at most one in flight per session. */
  private async guarded(action: () => void | Promise<void>): Promise<void> {
    if (this.busy) return;
    this.busy = true;
    try {
      await action();
    } catch (error) {
      if (error instanceof ConflictError && this.session) {
        this.notify("session changed elsewhere; batch reloaded");
        await this.refreshBatch();
      } else {
        this.notify(error instanceof Error ? error.message : String(error));
      }
    } finally {
      this.busy = false;
    }
  }

  private async createSession(): Promise<void> {
    const mode = this.element<HTMLSelectElement>("mode").value as Mode;
    const handle = await this.api.createSession({
      corpusPath: this.element<HTMLInputElement>("corpus-path").value,
      entityClass: this.element<HTMLInputElement>("entity-class").value,
      mode,
    });
    this.session = {
      sessionId: handle.session_id,
      revision: handle.revision,
      mode,
      poolSize: handle.pool_size,
      history: [],
      batch: [],
      iteration: 0,
    };
    this.element("seed-panel").hidden = mode === "AR";
    this.element("dashboard").hidden = false;
    this.notify(`session ready (${handle.pool_size} sentences)`);
    if (mode === "AR") await this.refreshBatch();
  }

  private async expandSeed(): Promise<void> {
    if (!this.session) return;
    const seed = this.element<HTMLInputElement>("seed").value.trim();
    const { candidates } = await this.api.expandSeed(this.session.sessionId, seed);
    const list = this.element("candidates");
    list.innerHTML = candidates
      .map(
        (c, i) =>
          `<li><label><input type="checkbox" data-surface="${c.surface}" ` +
          `id="cand-${i}"/> ${c.surface} <small>${c.score.toFixed(4)}</small>` +
          `</label></li>`,
      )
      .join("");
    this.element("confirm").hidden = candidates.length === 0;
  }

  private async confirmSelected(): Promise<void> {
    if (!this.session) return;
    const surfaces = [
      ...this.root.querySelectorAll<HTMLInputElement>(
        "#candidates input:checked",
      ),
    ].map((box) => box.dataset.surface!);
    const seed = this.element<HTMLInputElement>("seed").value.trim();
    const batch = await this.api.confirmCandidates(
      this.session.sessionId,
      this.session.revision,
      [seed, ...surfaces],
    );
    this.session.revision = batch.revision;
    this.showBatch(batch.sentences, batch.iteration);
  }

  private async refreshBatch(): Promise<void> {
    if (!this.session) return;
    const batch = await this.api.getBatch(this.session.sessionId);
    this.session.revision = batch.revision;
    this.showBatch(batch.sentences, batch.iteration);
  }

  private showBatch(sentences: BatchSentence[], iteration: number): void {
    if (!this.session) return;
    this.session.batch = sentences;
    this.session.iteration = iteration;
    this.spans = new Map(sentences.map((s) => [s.sentence_id, [] as Span[]]));
    const container = this.element("sentences");
    container.innerHTML = "";
    for (const sentence of sentences) {
      container.appendChild(this.renderSentence(sentence));
    }
    this.element("labeling").hidden = sentences.length === 0;
  }

  private renderSentence(sentence: BatchSentence): HTMLElement {
    const row = document.createElement("p");
    row.dataset.sentenceId = String(sentence.sentence_id);
    const preset = new Set<number>();
    for (const h of sentence.prehighlights) {
      for (let t = h.start; t < h.end; t++) preset.add(t);
    }
    sentence.tokens.forEach((token, index) => {
      const el = document.createElement("span");
      el.textContent = token.surface;
      el.className = preset.has(index) ? "token pre" : "token";
      el.dataset.index = String(index);
      el.addEventListener("mousedown", () => {
        this.drag = {
          sentenceId: sentence.sentence_id,
          anchor: index,
          current: index,
        };
      });
      el.addEventListener("mouseenter", () => {
        if (this.drag && this.drag.sentenceId === sentence.sentence_id) {
          this.drag.current = index;
        }
      });
      row.appendChild(el);
      row.appendChild(document.createTextNode(" "));
    });
    return row;
  }

  private endDrag(): void {
    if (!this.drag || !this.session) {
      this.drag = null;
      return;
    }
    const { sentenceId, anchor, current } = this.drag;
    this.drag = null;
    const gesture: Span = {
      start: Math.min(anchor, current),
      end: Math.max(anchor, current) + 1,
    };
    const sentence = this.session.batch.find(
      (s) => s.sentence_id === sentenceId,
    );
    if (!sentence) return;
    const next = toggleSpan(this.spans.get(sentenceId) ?? [], gesture);
    if (!isConsistent(next, sentence.tokens.length)) return;
    this.spans.set(sentenceId, next);
    this.repaint(sentenceId, next);
  }

  private repaint(sentenceId: number, spans: Span[]): void {
    const row = this.root.querySelector<HTMLElement>(
      `[data-sentence-id="${sentenceId}"]`,
    );
    if (!row) return;
    const selected = new Set<number>();
    for (const span of spans) {
      for (let t = span.start; t < span.end; t++) selected.add(t);
    }
    row.querySelectorAll<HTMLElement>(".token").forEach((el) => {
      const index = Number(el.dataset.index);
      el.classList.toggle("selected", selected.has(index));
    });
  }

  private async submitBatch(): Promise<void> {
    if (!this.session) return;
    const result = await this.api.submitLabels(
      this.session.sessionId,
      this.session.revision,
      toWire(this.spans),
    );
    this.session.revision = result.revision;
    this.notify(`iteration ${result.metrics.iteration} trained`);
    await this.updateDashboard();
    await this.refreshBatch();
  }

  private async updateDashboard(): Promise<void> {
    if (!this.session) return;
    const metrics = await this.api.getMetrics(this.session.sessionId);
    this.session.history = metrics.history;
    this.element("chart").innerHTML = renderChart([
      {
        name: "sigma",
        color: "#1668aa",
        values: metrics.history.map((p) => p.sigma),
      },
      {
        name: "coverage",
        color: "#c06016",
        values: metrics.history.map((p) => p.estimated_coverage),
      },
    ]);
    this.element("counts").textContent =
      `labeled ${metrics.labeled} / auto ${metrics.auto} / ` +
      `pool ${this.session.poolSize}`;
    this.element("banner").hidden = !sigmaPlateaued(
      metrics.history,
      DEFAULT_EPSILON,
    );
  }
}

export function bootstrap(): void {
  const root = document.getElementById("app");
  if (root) new App(new ApiClient(), root).mount();
}
