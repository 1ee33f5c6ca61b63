import { ApiError, MarkingApi } from './api.js';
import { FormView } from './form.js';
import { FormPayload, SubmitAck } from './types.js';

export interface SessionHooks {
  onServed?: (payload: FormPayload) => void;
  onSubmitted?: (ack: SubmitAck) => void;
  onDone?: () => void;
}

/**
 * Single-page marking flow: fetch the next pending form, render it,
 * post the completed marking, repeat until the service answers 404.
 *
 * A submit that never reaches the server keeps the rendered form and
 * its selections so the same marking can be retried.  A 409 means
 * someone else marked the form first; the conflict is reported and
 * the session moves on.
 */
export class Session {
  view: FormView | null = null;

  private submitting = false;

  constructor(
    private readonly api: MarkingApi,
    private readonly mount: HTMLElement,
    private readonly hooks: SessionHooks = {},
  ) {}

  async start(): Promise<void> {
    const doc = this.mount.ownerDocument;
    doc.addEventListener('keydown', (event) => {
      if (!this.view || this.view.broken) {
        return;
      }
      if (event.key === 'Enter' && this.view.complete && !this.submitting) {
        void this.submit();
      } else if (this.view.handleKey(event.key)) {
        event.preventDefault();
      }
    });
    await this.loadNext();
  }

  async loadNext(): Promise<void> {
    let payload: FormPayload;
    try {
      payload = await this.api.nextForm();
    } catch (err) {
      if (err instanceof ApiError && err.status === 404) {
        await this.renderDone();
        return;
      }
      this.renderFetchError(err);
      return;
    }
    this.hooks.onServed?.(payload);
    const progress = await this.progressLine();
    const view = new FormView(payload);
    view.onSubmit = () => void this.submit();
    this.view = view;
    this.mount.replaceChildren(view.element, progress);
  }

  async submit(): Promise<void> {
    const view = this.view;
    if (!view || view.broken || !view.complete || this.submitting) {
      return;
    }
    this.submitting = true;
    view.setBusy(true);
    try {
      const ack = await this.api.submitMarking(view.payload.form_id, view.verdicts());
      this.hooks.onSubmitted?.(ack);
    } catch (err) {
      this.submitting = false;
      if (err instanceof ApiError && err.status === 409) {
        // marked elsewhere in the meantime; nothing to retry here
        await this.loadNext();
        if (this.view) {
          this.view.showError('The previous form had already been marked; here is the next one.');
        }
        return;
      }
      view.setBusy(false);
      const reason = err instanceof ApiError && err.status === 0 ? 'Could not reach the service' : String(err);
      view.showError(`${reason}. Your selections are kept; submit again to retry.`);
      return;
    }
    this.submitting = false;
    await this.loadNext();
  }

  private async renderDone(): Promise<void> {
    this.view = null;
    const panel = document.createElement('section');
    panel.classList.add('done-panel');
    const head = document.createElement('h2');
    head.innerText = 'All forms are marked.';
    panel.append(head);
    try {
      const progress = await this.api.progress();
      const line = document.createElement('p');
      line.innerText =
        progress.mean_timing === null
          ? `${progress.submitted} markings collected.`
          : `${progress.submitted} markings collected, ${progress.mean_timing.toFixed(1)}s each on average.`;
      panel.append(line);
    } catch {
      // progress is decoration; the done message stands on its own
    }
    this.mount.replaceChildren(panel);
    this.hooks.onDone?.();
  }

  private renderFetchError(err: unknown): void {
    this.view = null;
    const panel = document.createElement('section');
    panel.classList.add('error-panel');
    const message = document.createElement('p');
    message.innerText = err instanceof ApiError ? err.message : String(err);
    const retry = document.createElement('button');
    retry.type = 'button';
    retry.innerText = 'Retry';
    retry.addEventListener('click', () => void this.loadNext());
    panel.append(message, retry);
    this.mount.replaceChildren(panel);
  }

  private async progressLine(): Promise<HTMLElement> {
    const line = document.createElement('p');
    line.classList.add('progress');
    try {
      const progress = await this.api.progress();
      line.innerText = `${progress.submitted} done, ${progress.pending} to go`;
    } catch {
      line.hidden = true;
    }
    return line;
  }
}
