// DOM wiring for the annotation session. All state transitions live in
// state.ts/validate.ts; this module renders them and talks to the backend
// through an injected ApiClient so tests can drive it end to end.

import { ApiClient, ApiError } from "./api";
import { pcmDurationSec, pcmToWav } from "./audio";
import { buildRecord, emptyForm, RetryBuffer, type FormState } from "./state";
import { canSubmit, clampVad, validateForm } from "./validate";
import { EMOTIONS, SENTIMENTS, VAD_MAX, VAD_MIN, type Emotion, type Sentiment, type Task } from "./types";

export type AppOptions = {
  annotatorId?: string;
  sampleRateHz?: number;
  channels?: number;
};

const DEFAULT_SAMPLE_RATE = 16000;
const DEFAULT_CHANNELS = 1;

const VAD_AXES = [
  { key: "valence", label: "Valence", hint: "negative to positive" },
  { key: "arousal", label: "Arousal", hint: "calm to excited" },
  { key: "dominance", label: "Dominance", hint: "controlled to in control" }
] as const;

const TEMPLATE = `
<div id="start-screen">
  <h1>Utterance annotation</h1>
  <p>Enter your annotator id to begin your queue.</p>
  <form id="start-form">
    <input id="annotator-input" type="text" autocomplete="off" placeholder="annotator id" />
    <button id="start-btn" type="submit">Start</button>
  </form>
  <p id="start-error" class="error" hidden></p>
</div>

<div id="session-screen" hidden>
  <header>
    <span id="annotator-name"></span>
    <span id="progress"></span>
  </header>
  <div id="banner" class="banner" hidden>
    <span id="banner-text"></span>
    <button id="retry-btn" type="button">Retry</button>
  </div>
  <section id="clip-card">
    <p id="transcript"></p>
    <p id="clip-note" class="error" hidden></p>
    <audio id="player"></audio>
    <div id="audio-controls">
      <button id="play-btn" type="button">Play</button>
      <button id="replay-btn" type="button">Replay</button>
      <input id="seek" type="range" min="0" max="1000" step="1" value="0" />
      <span id="clock">0.0s</span>
    </div>
  </section>
  <section id="label-card">
    <fieldset id="emotion-group">
      <legend>Emotion <small>(keys 1-9)</small></legend>
    </fieldset>
    <p id="emotion-error" class="error" hidden></p>
    <fieldset id="sentiment-group">
      <legend>Sentiment</legend>
    </fieldset>
    <p id="sentiment-error" class="error" hidden></p>
    <fieldset id="vad-group">
      <legend>VAD (1-10, 5 is neutral)</legend>
    </fieldset>
    <p id="vad-error" class="error" hidden></p>
    <label id="inaudible-row">
      <input id="inaudible" type="checkbox" />
      clip is inaudible (skip without labels)
    </label>
    <button id="submit-btn" type="button" disabled>Submit</button>
    <p id="submit-error" class="error" hidden></p>
  </section>
</div>

<div id="done-screen" hidden>
  <h1>Queue complete</h1>
  <p id="done-summary"></p>
</div>
`;

function queryOptions(): AppOptions {
  if (typeof window === "undefined" || !window.location) return {};
  const params = new URLSearchParams(window.location.search);
  const out: AppOptions = {};
  const annotator = params.get("annotator");
  if (annotator) out.annotatorId = annotator;
  const rate = Number(params.get("rate"));
  if (Number.isInteger(rate) && rate > 0) out.sampleRateHz = rate;
  const channels = Number(params.get("channels"));
  if (Number.isInteger(channels) && channels > 0) out.channels = channels;
  return out;
}

export function mountApp(
  root: HTMLElement,
  api: ApiClient,
  options: AppOptions = {}
): void {
  const fromQuery = queryOptions();
  const sampleRateHz =
    options.sampleRateHz ?? fromQuery.sampleRateHz ?? DEFAULT_SAMPLE_RATE;
  const channels = options.channels ?? fromQuery.channels ?? DEFAULT_CHANNELS;

  root.innerHTML = TEMPLATE;
  const doc = root.ownerDocument;
  const byId = <T extends HTMLElement>(id: string): T => {
    const el = root.querySelector<T>(`#${id}`);
    if (!el) throw new Error(`template is missing #${id}`);
    return el;
  };

  const startScreen = byId<HTMLDivElement>("start-screen");
  const sessionScreen = byId<HTMLDivElement>("session-screen");
  const doneScreen = byId<HTMLDivElement>("done-screen");
  const startForm = byId<HTMLFormElement>("start-form");
  const annotatorInput = byId<HTMLInputElement>("annotator-input");
  const startError = byId<HTMLParagraphElement>("start-error");
  const annotatorName = byId<HTMLSpanElement>("annotator-name");
  const progressText = byId<HTMLSpanElement>("progress");
  const banner = byId<HTMLDivElement>("banner");
  const bannerText = byId<HTMLSpanElement>("banner-text");
  const retryBtn = byId<HTMLButtonElement>("retry-btn");
  const transcript = byId<HTMLParagraphElement>("transcript");
  const clipNote = byId<HTMLParagraphElement>("clip-note");
  const player = byId<HTMLAudioElement>("player");
  const playBtn = byId<HTMLButtonElement>("play-btn");
  const replayBtn = byId<HTMLButtonElement>("replay-btn");
  const seek = byId<HTMLInputElement>("seek");
  const clock = byId<HTMLSpanElement>("clock");
  const emotionGroup = byId<HTMLFieldSetElement>("emotion-group");
  const sentimentGroup = byId<HTMLFieldSetElement>("sentiment-group");
  const vadGroup = byId<HTMLFieldSetElement>("vad-group");
  const inaudible = byId<HTMLInputElement>("inaudible");
  const submitBtn = byId<HTMLButtonElement>("submit-btn");
  const submitError = byId<HTMLParagraphElement>("submit-error");
  const fieldErrors = {
    emotion: byId<HTMLParagraphElement>("emotion-error"),
    sentiment: byId<HTMLParagraphElement>("sentiment-error"),
    vad: byId<HTMLParagraphElement>("vad-error")
  };

  // ── Session state ────────────────────────────────────────────────────────

  let annotatorId = options.annotatorId ?? fromQuery.annotatorId ?? "";
  let task: Task | null = null;
  let form: FormState = emptyForm();
  let clipSeconds = 0;
  let playing = false;
  const buffer = new RetryBuffer();

  // ── Form controls ────────────────────────────────────────────────────────

  const emotionButtons = new Map<Emotion, HTMLButtonElement>();
  EMOTIONS.forEach((emotion, i) => {
    const button = doc.createElement("button");
    button.type = "button";
    button.dataset.emotion = emotion;
    button.textContent = `${i + 1} ${emotion}`;
    button.addEventListener("click", () => setEmotion(emotion));
    emotionGroup.appendChild(button);
    emotionButtons.set(emotion, button);
  });

  const sentimentButtons = new Map<Sentiment, HTMLButtonElement>();
  for (const sentiment of SENTIMENTS) {
    const button = doc.createElement("button");
    button.type = "button";
    button.dataset.sentiment = sentiment;
    button.textContent = sentiment;
    button.addEventListener("click", () => setSentiment(sentiment));
    sentimentGroup.appendChild(button);
    sentimentButtons.set(sentiment, button);
  }

  const sliders: HTMLInputElement[] = [];
  const sliderValues: HTMLSpanElement[] = [];
  VAD_AXES.forEach((axis, i) => {
    const row = doc.createElement("label");
    row.className = "vad-row";
    const name = doc.createElement("span");
    name.textContent = axis.label;
    name.title = axis.hint;
    const slider = doc.createElement("input");
    slider.type = "range";
    slider.id = axis.key;
    slider.min = String(VAD_MIN);
    slider.max = String(VAD_MAX);
    slider.step = "1";
    slider.value = String(form.vad[i]);
    const value = doc.createElement("span");
    value.className = "vad-value";
    value.textContent = slider.value;
    slider.addEventListener("input", () => {
      form.vad[i] = clampVad(Number(slider.value));
      slider.value = String(form.vad[i]);
      value.textContent = slider.value;
      refreshForm();
    });
    row.append(name, slider, value);
    vadGroup.appendChild(row);
    sliders.push(slider);
    sliderValues.push(value);
  });

  function setEmotion(emotion: Emotion): void {
    if (form.inaudible) return;
    form.emotion = emotion;
    refreshForm();
  }

  function setSentiment(sentiment: Sentiment): void {
    if (form.inaudible) return;
    form.sentiment = sentiment;
    refreshForm();
  }

  inaudible.addEventListener("change", () => {
    form.inaudible = inaudible.checked;
    refreshForm();
  });

  function refreshForm(): void {
    for (const [emotion, button] of emotionButtons) {
      button.classList.toggle("selected", form.emotion === emotion);
      button.disabled = form.inaudible;
    }
    for (const [sentiment, button] of sentimentButtons) {
      button.classList.toggle("selected", form.sentiment === sentiment);
      button.disabled = form.inaudible;
    }
    sliders.forEach((slider, i) => {
      slider.disabled = form.inaudible;
      slider.value = String(form.vad[i]);
      sliderValues[i].textContent = slider.value;
    });
    inaudible.checked = form.inaudible;
    submitBtn.disabled = !canSubmit(form);
    for (const note of Object.values(fieldErrors)) note.hidden = true;
    submitError.hidden = true;
  }

  function resetForm(): void {
    form = emptyForm();
    refreshForm();
  }

  // ── Audio ────────────────────────────────────────────────────────────────

  function setPlaying(next: boolean): void {
    playing = next;
    playBtn.textContent = playing ? "Pause" : "Play";
  }

  function safePlay(): void {
    try {
      const result = player.play() as unknown;
      void Promise.resolve(result).catch(() => setPlaying(false));
      setPlaying(true);
    } catch {
      setPlaying(false);
    }
  }

  function togglePlay(): void {
    if (playing) {
      player.pause();
      setPlaying(false);
    } else {
      safePlay();
    }
  }

  playBtn.addEventListener("click", togglePlay);
  replayBtn.addEventListener("click", () => {
    player.currentTime = 0;
    safePlay();
  });
  player.addEventListener("ended", () => setPlaying(false));
  player.addEventListener("timeupdate", () => {
    const total = Number.isFinite(player.duration) && player.duration > 0
      ? player.duration
      : clipSeconds;
    clock.textContent = `${player.currentTime.toFixed(1)}s`;
    if (total > 0) {
      seek.value = String(Math.round((player.currentTime / total) * 1000));
    }
  });
  seek.addEventListener("input", () => {
    const total = Number.isFinite(player.duration) && player.duration > 0
      ? player.duration
      : clipSeconds;
    if (total > 0) {
      player.currentTime = (Number(seek.value) / 1000) * total;
    }
  });

  async function loadClip(current: Task): Promise<void> {
    clipNote.hidden = true;
    player.removeAttribute("src");
    seek.value = "0";
    clock.textContent = "0.0s";
    setPlaying(false);
    try {
      const pcm = await api.clip(current.clip_url);
      clipSeconds = pcmDurationSec(pcm.byteLength, sampleRateHz, channels);
      const wav = pcmToWav(pcm, sampleRateHz, channels);
      if (typeof URL.createObjectURL === "function") {
        player.src = URL.createObjectURL(new Blob([wav], { type: "audio/wav" }));
      } else {
        player.src = api.url(current.clip_url);
      }
    } catch (err) {
      clipSeconds = 0;
      clipNote.textContent =
        err instanceof ApiError
          ? `clip unavailable: ${err.message}`
          : "clip unavailable: network error";
      clipNote.hidden = false;
    }
  }

  // ── Banner (unsent work / backend unreachable) ───────────────────────────

  function refreshBanner(note?: string): void {
    if (note) {
      bannerText.textContent = note;
      banner.hidden = false;
    } else if (buffer.size > 0) {
      const plural = buffer.size === 1 ? "" : "s";
      bannerText.textContent = `${buffer.size} unsent annotation${plural}`;
      banner.hidden = false;
    } else {
      banner.hidden = true;
    }
  }

  retryBtn.addEventListener("click", () => {
    void (async () => {
      await buffer.flush((record) => api.submit(record));
      refreshBanner();
      if (task === null) await loadNext();
    })();
  });

  // ── Screen flow ──────────────────────────────────────────────────────────

  function show(screen: HTMLDivElement): void {
    for (const s of [startScreen, sessionScreen, doneScreen]) {
      s.hidden = s !== screen;
    }
  }

  async function showCompletion(): Promise<void> {
    task = null;
    let summary = "Every clip in your queue is annotated.";
    try {
      const progress = await api.progress();
      const mine = progress.annotators[annotatorId];
      if (mine) summary = `You annotated ${mine.done} of ${mine.total} clips.`;
    } catch {
      // completion is already certain; the summary is best effort
    }
    byId<HTMLParagraphElement>("done-summary").textContent = summary;
    show(doneScreen);
  }

  async function loadNext(): Promise<void> {
    if (buffer.size > 0) {
      await buffer.flush((record) => api.submit(record));
      refreshBanner();
    }
    let next: Task | null;
    try {
      next = await api.nextTask(annotatorId);
    } catch (err) {
      if (err instanceof ApiError) {
        startError.textContent = err.message;
        startError.hidden = false;
        show(startScreen);
      } else {
        refreshBanner("backend unreachable; Retry when back online");
      }
      return;
    }
    if (next === null) {
      await showCompletion();
      return;
    }
    task = next;
    show(sessionScreen);
    progressText.textContent = `${next.position} / ${next.total}`;
    transcript.textContent = next.transcript;
    resetForm();
    await loadClip(next);
  }

  // ── Submit ───────────────────────────────────────────────────────────────

  async function submitCurrent(): Promise<void> {
    if (task === null || !canSubmit(form)) return;
    const errors = validateForm(form);
    if (Object.keys(errors).length > 0) {
      for (const [field, message] of Object.entries(errors)) {
        const note = fieldErrors[field as keyof typeof fieldErrors];
        note.textContent = message;
        note.hidden = false;
      }
      return;
    }
    const record = buildRecord(annotatorId, task.utterance_id, form);
    player.pause();
    setPlaying(false);
    try {
      await api.submit(record);
    } catch (err) {
      if (err instanceof ApiError) {
        // server-side rejection: surface it, keep every entered value
        submitError.textContent = err.message;
        submitError.hidden = false;
        return;
      }
      // network failure: keep the work and move on optimistically
      buffer.push(record);
      refreshBanner();
      await loadNext();
      return;
    }
    refreshBanner();
    await loadNext();
  }

  submitBtn.addEventListener("click", () => void submitCurrent());

  // ── Keyboard shortcuts ───────────────────────────────────────────────────

  doc.addEventListener("keydown", (event) => {
    if (task === null) return;
    const target = event.target as HTMLElement | null;
    if (target && (target.tagName === "INPUT" || target.tagName === "TEXTAREA")) {
      if ((target as HTMLInputElement).type !== "range") return;
    }
    if (event.key >= "1" && event.key <= "9") {
      setEmotion(EMOTIONS[Number(event.key) - 1]);
      event.preventDefault();
    } else if (event.key === "p") {
      togglePlay();
      event.preventDefault();
    }
  });

  // ── Entry ────────────────────────────────────────────────────────────────

  startForm.addEventListener("submit", (event) => {
    event.preventDefault();
    const value = annotatorInput.value.trim();
    if (!value) {
      startError.textContent = "annotator id is required";
      startError.hidden = false;
      return;
    }
    annotatorId = value;
    annotatorName.textContent = annotatorId;
    void loadNext();
  });

  if (annotatorId) {
    annotatorName.textContent = annotatorId;
    void loadNext();
  } else {
    show(startScreen);
  }
}
