import type { TaskItem } from "./api";
import type { ScoreSheet } from "./scores";

// All annotator-facing copy is Arabic; layout is RTL throughout. Response
// cards are labeled by position only — nothing in the DOM can identify a
// model, which mirrors what the server sends.

export interface TaskHandlers {
  onScore: (responseId: string, criterion: string, value: number) => void;
  onSubmit: () => void;
}

const CRITERION_LABELS: Record<string, string> = {
  accuracy: "الدقة",
  authenticity: "الأصالة",
};

function criterionLabel(criterion: string): string {
  return CRITERION_LABELS[criterion] ?? criterion;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderLoading(root: HTMLElement): void {
  root.replaceChildren(el("p", "loading", "جارٍ التحميل..."));
}

export function renderConfigError(root: HTMLElement, message: string): void {
  root.replaceChildren(el("p", "config-error", message));
}

export function renderError(
  root: HTMLElement,
  message: string,
  onRetry: () => void,
): void {
  const banner = el("div", "error-banner");
  banner.appendChild(el("p", "error-message", message));
  const retry = el("button", "retry", "إعادة المحاولة");
  retry.addEventListener("click", onRetry);
  banner.appendChild(retry);
  root.replaceChildren(banner);
}

export function renderDone(root: HTMLElement, total: number): void {
  const panel = el("div", "done-screen");
  panel.appendChild(el("h2", undefined, "اكتملت المهمة"));
  panel.appendChild(
    el("p", "done-summary", `قيّمت ${total} من الأسئلة. شكراً لمشاركتك.`),
  );
  root.replaceChildren(panel);
}

function scoreRow(
  sheet: ScoreSheet,
  responseId: string,
  criterion: string,
  handlers: TaskHandlers,
): HTMLElement {
  const row = el("div", "score-row");
  row.appendChild(el("span", "criterion-name", criterionLabel(criterion)));
  const strip = el("div", "score-strip");
  strip.setAttribute("role", "radiogroup");
  for (let value = sheet.min; value <= sheet.max; value += 1) {
    const button = el("button", "score", String(value));
    button.type = "button";
    button.dataset.response = responseId;
    button.dataset.criterion = criterion;
    button.dataset.score = String(value);
    if (sheet.get(responseId, criterion) === value) {
      button.classList.add("selected");
    }
    button.addEventListener("click", () =>
      handlers.onScore(responseId, criterion, value),
    );
    strip.appendChild(button);
  }
  row.appendChild(strip);
  return row;
}

export function renderTask(
  root: HTMLElement,
  item: TaskItem,
  sheet: ScoreSheet,
  handlers: TaskHandlers,
  inlineError?: string,
): void {
  const panel = el("div", "task");
  panel.dir = "rtl";
  panel.lang = "ar";

  const progress = el(
    "p",
    "progress",
    `السؤال ${item.position + 1} من ${item.total}`,
  );
  panel.appendChild(progress);

  if (item.image) {
    const figure = el("figure", "item-image");
    const img = el("img");
    img.src = item.image;
    img.alt = "";
    figure.appendChild(img);
    panel.appendChild(figure);
  }

  panel.appendChild(el("h2", "question", item.question));

  const list = el("div", "responses");
  item.responses.forEach((response, index) => {
    const card = el("section", "response-card");
    card.dataset.responseId = response.response_id;
    card.appendChild(el("h3", "response-label", `الإجابة ${index + 1}`));
    card.appendChild(el("p", "response-text", response.text));
    for (const criterion of item.criteria) {
      card.appendChild(scoreRow(sheet, response.response_id, criterion, handlers));
    }
    list.appendChild(card);
  });
  panel.appendChild(list);

  if (inlineError) {
    panel.appendChild(el("p", "inline-error", inlineError));
  }

  const submit = el("button", "submit", "إرسال التقييم");
  submit.type = "button";
  submit.disabled = !sheet.isComplete();
  submit.addEventListener("click", () => {
    if (sheet.isComplete()) handlers.onSubmit();
  });
  panel.appendChild(submit);

  root.replaceChildren(panel);
}
