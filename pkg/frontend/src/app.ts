import { ApiClient, ApiError } from "./api";
import type { TaskItem } from "./api";
import { ScoreSheet } from "./scores";
import {
  renderDone,
  renderError,
  renderLoading,
  renderTask,
} from "./view";

export interface SessionIds {
  campaignId: string;
  annotatorId: string;
}

/**
 * The task loop: fetch next item, collect a complete score sheet, submit,
 * advance. The server is the source of truth for progress, so "retry"
 * after any failure is just running the current step again — resubmits
 * are idempotent and next_item resumes at the first unrated item.
 */
export class AnnotatorApp {
  private item: TaskItem | null = null;
  private sheet: ScoreSheet | null = null;

  constructor(
    private readonly root: HTMLElement,
    private readonly client: ApiClient,
    private readonly ids: SessionIds,
  ) {}

  async start(): Promise<void> {
    await this.loadNext();
  }

  private async loadNext(): Promise<void> {
    renderLoading(this.root);
    let next;
    try {
      next = await this.client.nextItem(this.ids.campaignId, this.ids.annotatorId);
    } catch (error) {
      this.showError(error, () => void this.loadNext());
      return;
    }
    if (next.done) {
      this.item = null;
      this.sheet = null;
      renderDone(this.root, next.total);
      return;
    }
    this.item = next;
    this.sheet = ScoreSheet.forItem(next);
    this.renderCurrent();
  }

  private renderCurrent(inlineError?: string): void {
    if (!this.item || !this.sheet) return;
    renderTask(
      this.root,
      this.item,
      this.sheet,
      {
        onScore: (responseId, criterion, value) => {
          this.sheet!.set(responseId, criterion, value);
          this.renderCurrent();
        },
        onSubmit: () => void this.submit(),
      },
      inlineError,
    );
  }

  private async submit(): Promise<void> {
    if (!this.item || !this.sheet || !this.sheet.isComplete()) return;
    const body = {
      campaign_id: this.ids.campaignId,
      annotator_id: this.ids.annotatorId,
      item_id: this.item.item_id,
      ratings: this.sheet.toRatings(),
    };
    try {
      await this.client.submitRating(body);
    } catch (error) {
      if (error instanceof ApiError && error.status < 500) {
        // the server refused the payload; surface it next to the form
        this.renderCurrent(error.message);
      } else {
        this.showError(error, () => void this.submit());
      }
      return;
    }
    await this.loadNext();
  }

  private showError(error: unknown, retry: () => void): void {
    const message =
      error instanceof Error ? error.message : "تعذر الاتصال بالخادم";
    renderError(this.root, `حدث خطأ: ${message}`, retry);
  }
}
