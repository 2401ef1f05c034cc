// Application shell: one screen per prototype plus the questionnaire form.
// Every gesture maps to exactly one service action; the server's revision
// counter is tracked by the SessionController (silent refetch on conflict).

import { SegGaugeClient, SessionController } from "./api.js";
import {
  drawContours,
  drawDiffCells,
  drawProposals,
  drawRoi,
  drawSeeds,
  guidedRoi,
  renderImageData,
} from "./canvas.js";
import { InteractionTimer, PressTracker, StrokeRecorder, hitProposal } from "./interactions.js";
import {
  SUS_CHOICES,
  SUS_STATEMENTS,
  buildSubmission,
  emptyDraft,
  missingItems,
  pairKey,
  presentationOrder,
} from "./questionnaire.js";
import { currentOpacity, cycleOpacity, initialViewState, setWindow, toggleLabel, type ViewState } from "./state.js";
import { decodeRle, type SessionKind, type SessionState } from "./types.js";

const ZOOM = 9;

const HELP_TEXT: Record<SessionKind, string> = {
  semi_manual:
    "Draw scribbles on the image to mark the object or the background. " +
    "Switch the label with the seed buttons, undo the last stroke, press finish when satisfied.",
  guided:
    "The system suggests two new points each round. Pick the one preview (right) " +
    "whose labels are correct: object seeds inside the object, background seeds outside.",
  joint:
    "Tap the suggested circles to flip their labels until all are correct, then press " +
    "'new points'. A long press anywhere adds a seed with the opposite of the current label.",
};

export class App {
  private readonly client: SegGaugeClient;
  private controller: SessionController | null = null;
  private view: ViewState = initialViewState();
  private readonly timer = new InteractionTimer();
  private readonly stroke = new StrokeRecorder();
  private readonly press = new PressTracker();
  private imagePixels: Uint8ClampedArray | null = null;
  private banner = "";

  constructor(
    private readonly root: HTMLElement,
    baseUrl: string,
    private readonly userId: string = `web-${Math.floor(Math.random() * 1e6)}`,
  ) {
    this.client = new SegGaugeClient(baseUrl);
  }

  async start(): Promise<void> {
    const tasks = await this.client.listTasks();
    this.root.innerHTML = "";
    const picker = document.createElement("div");
    picker.className = "picker";
    for (const kind of ["semi_manual", "guided", "joint"] as SessionKind[]) {
      for (const task of tasks) {
        const button = document.createElement("button");
        button.textContent = `${kind.replace("_", "-")} on ${task.task_id}`;
        button.onclick = () => void this.openSession(task.task_id, kind);
        picker.appendChild(button);
      }
    }
    const questionnaire = document.createElement("button");
    questionnaire.textContent = "questionnaires";
    questionnaire.onclick = () => this.renderQuestionnaire("semi_manual");
    picker.appendChild(questionnaire);
    this.root.appendChild(picker);
  }

  private async openSession(taskId: string, kind: SessionKind): Promise<void> {
    const state = await this.client.createSession(taskId, kind, this.userId);
    this.controller = new SessionController(this.client, state);
    await this.loadImage(taskId);
    this.renderSession();
  }

  private async loadImage(taskId: string): Promise<void> {
    const image = new Image();
    image.crossOrigin = "anonymous";
    image.src = this.client.taskImageUrl(taskId);
    await image.decode();
    const scratch = document.createElement("canvas");
    scratch.width = image.naturalWidth;
    scratch.height = image.naturalHeight;
    const ctx = scratch.getContext("2d");
    if (!ctx) throw new Error("2d canvas unavailable");
    ctx.drawImage(image, 0, 0);
    const data = ctx.getImageData(0, 0, scratch.width, scratch.height).data;
    const gray = new Uint8ClampedArray(scratch.width * scratch.height);
    for (let i = 0; i < gray.length; i++) gray[i] = data[i * 4];
    this.imagePixels = gray;
  }

  private async act(action: Parameters<SessionController["apply"]>[0]): Promise<void> {
    if (!this.controller || this.controller.finished) return;
    try {
      await this.controller.apply(action, this.timer.take());
      this.banner = "";
    } catch (error) {
      this.banner = String(error);
    }
    this.renderSession();
  }

  // ------------------------------------------------------------------ UI

  private renderSession(): void {
    if (!this.controller) return;
    const state = this.controller.state;
    this.root.innerHTML = "";

    const toolbar = document.createElement("div");
    toolbar.className = "toolbar";
    const addButton = (label: string, onClick: () => void, id?: string) => {
      const button = document.createElement("button");
      button.textContent = label;
      if (id) button.id = id;
      button.onclick = onClick;
      toolbar.appendChild(button);
      return button;
    };
    if (state.kind === "semi_manual") {
      addButton(
        this.view.activeLabel === "foreground" ? "object seed (active)" : "object seed",
        () => {
          if (this.view.activeLabel !== "foreground") this.view = toggleLabel(this.view);
          this.renderSession();
        },
        "object-seed",
      );
      addButton(
        this.view.activeLabel === "background" ? "background seed (active)" : "background seed",
        () => {
          if (this.view.activeLabel !== "background") this.view = toggleLabel(this.view);
          this.renderSession();
        },
        "background-seed",
      );
    }
    if (state.kind === "joint") {
      addButton("new points", () => void this.act({ type: "joint_commit" }), "new-points");
    }
    addButton("undo", () => void this.act({ type: "undo" }), "undo");
    addButton("opacity", () => {
      this.view = cycleOpacity(this.view);
      this.renderSession();
    }, "opacity");
    addButton("help", () => window.alert(HELP_TEXT[state.kind]), "help");
    addButton("finish", () => void this.finishSession(), "finish");
    this.root.appendChild(toolbar);

    const sliders = document.createElement("div");
    sliders.className = "sliders";
    sliders.appendChild(this.slider("window center", this.view.windowCenter, (v) => {
      this.view = setWindow(this.view, v, this.view.windowWidth);
      this.renderSession();
    }));
    sliders.appendChild(this.slider("window width", this.view.windowWidth / 2, (v) => {
      this.view = setWindow(this.view, this.view.windowCenter, v * 2);
      this.renderSession();
    }));
    this.root.appendChild(sliders);

    const status = document.createElement("div");
    status.className = "status";
    status.textContent =
      `${state.kind} on ${state.task_id} | revision ${state.revision}` +
      (state.dice !== null ? ` | dice ${state.dice.toFixed(3)}` : "") +
      (state.finished ? " | finished" : "") +
      (this.banner ? ` | ${this.banner}` : "");
    this.root.appendChild(status);

    this.root.appendChild(this.buildCanvas(state));
    if (state.kind === "guided" && state.guided) {
      this.root.appendChild(this.buildGuidedOptions(state));
    }
  }

  private slider(label: string, value: number, onInput: (v: number) => void): HTMLElement {
    const wrap = document.createElement("label");
    wrap.textContent = label;
    const input = document.createElement("input");
    input.type = "range";
    input.min = "0.01";
    input.max = "1";
    input.step = "0.01";
    input.value = String(value);
    input.oninput = () => onInput(Number(input.value));
    wrap.appendChild(input);
    return wrap;
  }

  private buildCanvas(state: SessionState): HTMLCanvasElement {
    const canvas = document.createElement("canvas");
    canvas.id = "stage";
    canvas.width = state.width * ZOOM;
    canvas.height = state.height * ZOOM;
    const ctx = canvas.getContext("2d");
    if (!ctx) throw new Error("2d canvas unavailable");

    const style = {
      zoom: ZOOM,
      opacity: currentOpacity(this.view),
      windowCenter: this.view.windowCenter,
      windowWidth: this.view.windowWidth,
    };
    if (this.imagePixels) {
      const imageData = renderImageData(this.imagePixels, state.width, state.height, style);
      const scratch = document.createElement("canvas");
      scratch.width = state.width;
      scratch.height = state.height;
      scratch.getContext("2d")?.putImageData(imageData, 0, 0);
      ctx.imageSmoothingEnabled = false;
      ctx.drawImage(scratch, 0, 0, canvas.width, canvas.height);
    }
    drawSeeds(ctx, state.seeds, style);
    drawContours(ctx, state.contours, style);
    if (state.kind === "joint" && state.joint) drawProposals(ctx, state.joint, style);
    if (state.kind === "guided") {
      const roi = guidedRoi(state);
      if (roi) drawRoi(ctx, roi, ZOOM);
    }

    const toCell = (event: PointerEvent): [number, number] => {
      const rect = canvas.getBoundingClientRect();
      return [
        ((event.clientX - rect.left) / rect.width) * state.width,
        ((event.clientY - rect.top) / rect.height) * state.height,
      ];
    };

    canvas.onpointerdown = (event) => {
      this.timer.pointerDown();
      const [x, y] = toCell(event);
      if (state.kind === "semi_manual") {
        this.stroke.start();
        this.stroke.move(x, y);
      } else if (state.kind === "joint") {
        this.press.down(x, y, event.timeStamp);
      }
    };
    canvas.onpointermove = (event) => {
      if (state.kind === "semi_manual" && this.stroke.active) {
        const [x, y] = toCell(event);
        this.stroke.move(x, y);
      }
    };
    canvas.onpointerup = (event) => {
      this.timer.pointerUp();
      if (state.kind === "semi_manual") {
        const action = this.stroke.end(this.view.activeLabel);
        if (action) void this.act(action);
      } else if (state.kind === "joint") {
        const gesture = this.press.release(event.timeStamp);
        if (!gesture || !state.joint) return;
        if (gesture.kind === "longpress") {
          void this.act({ type: "joint_longpress", x: gesture.x, y: gesture.y });
        } else {
          const index = hitProposal(state.joint, gesture.x + 0.5, gesture.y + 0.5);
          if (index !== null) void this.act({ type: "joint_toggle", index });
        }
      }
    };
    return canvas;
  }

  private buildGuidedOptions(state: SessionState): HTMLElement {
    const wrap = document.createElement("div");
    wrap.className = "guided-options";
    const roi = guidedRoi(state);
    for (const option of state.guided?.options ?? []) {
      const tile = document.createElement("canvas");
      tile.className = "option-tile";
      tile.width = (roi?.w ?? state.width) * ZOOM;
      tile.height = (roi?.h ?? state.height) * ZOOM;
      const ctx = tile.getContext("2d");
      if (ctx) {
        ctx.save();
        if (roi) ctx.translate(-roi.x * ZOOM, -roi.y * ZOOM);
        const style = {
          zoom: ZOOM,
          opacity: 1.0,
          windowCenter: this.view.windowCenter,
          windowWidth: this.view.windowWidth,
        };
        drawContours(ctx, option.contours, style);
        drawDiffCells(ctx, decodeRle(option.diff_rle), state.width, style);
        const [p1, p2] = state.guided?.points ?? [];
        const labels = option.labels;
        [p1, p2].forEach((point, i) => {
          if (!point) return;
          ctx.fillStyle = labels[i] === "foreground" ? "#2d6cf6" : "#ef4444";
          ctx.beginPath();
          ctx.arc((point[0] + 0.5) * ZOOM, (point[1] + 0.5) * ZOOM, ZOOM * 0.8, 0, 2 * Math.PI);
          ctx.fill();
        });
        ctx.restore();
      }
      tile.onclick = () => void this.act({ type: "guided_select", option: option.option });
      wrap.appendChild(tile);
    }
    return wrap;
  }

  private async finishSession(): Promise<void> {
    if (!this.controller || this.controller.finished) return;
    await this.controller.finish(this.timer.take());
    const kind = this.controller.state.kind;
    this.renderQuestionnaire(kind);
  }

  // -------------------------------------------------------- questionnaire

  private renderQuestionnaire(prototype: SessionKind): void {
    const seed = Math.floor(Math.random() * 2 ** 31);
    const draft = emptyDraft(seed);
    this.root.innerHTML = "";
    const form = document.createElement("form");
    form.className = "questionnaire";

    const susBlock = document.createElement("section");
    SUS_STATEMENTS.forEach((statement, index) => {
      const row = document.createElement("div");
      row.className = "likert-row";
      const text = document.createElement("span");
      text.textContent = `${index + 1}. ${statement}`;
      row.appendChild(text);
      SUS_CHOICES.forEach((choice, value) => {
        const label = document.createElement("label");
        const input = document.createElement("input");
        input.type = "radio";
        input.name = `sus_${index + 1}`;
        input.value = String(value);
        input.onchange = () => {
          draft.sus[index] = value;
        };
        label.appendChild(input);
        label.append(choice);
        row.appendChild(label);
      });
      susBlock.appendChild(row);
    });
    form.appendChild(susBlock);

    const pairBlock = document.createElement("section");
    for (const pair of presentationOrder(seed)) {
      const row = document.createElement("div");
      row.className = "pair-row";
      const left = pair.flipped ? pair.positive : pair.negative;
      const right = pair.flipped ? pair.negative : pair.positive;
      row.append(left);
      for (let value = 1; value <= 7; value++) {
        const label = document.createElement("label");
        const input = document.createElement("input");
        input.type = "radio";
        input.name = pairKey(pair);
        input.value = String(value);
        input.onchange = () => {
          draft.attrakdiff.set(pairKey(pair), value);
        };
        label.appendChild(input);
        row.appendChild(label);
      }
      row.append(right);
      pairBlock.appendChild(row);
    }
    form.appendChild(pairBlock);

    const submit = document.createElement("button");
    submit.textContent = "submit";
    submit.onclick = async (event) => {
      event.preventDefault();
      const missing = missingItems(draft);
      if (missing.length > 0) {
        this.highlightMissing(form, missing);
        return;
      }
      const result = await this.client.submitQuestionnaire(
        buildSubmission(draft, this.userId, prototype),
      );
      this.root.innerHTML = `<p>thanks! SUS ${result.sus_score.toFixed(1)}</p>`;
    };
    form.appendChild(submit);
    this.root.appendChild(form);
  }

  private highlightMissing(form: HTMLElement, missing: string[]): void {
    for (const element of Array.from(form.querySelectorAll(".missing"))) {
      element.classList.remove("missing");
    }
    for (const name of missing) {
      const input = form.querySelector(`input[name="${name}"]`);
      input?.closest("div")?.classList.add("missing");
    }
  }
}

export function mount(root: HTMLElement, baseUrl: string): App {
  const app = new App(root, baseUrl);
  void app.start();
  return app;
}
