import { FormPayload, MarkingVerdict, StatementPayload, Verdict } from './types.js';

const choiceLabel = (row: number, verdict: Verdict, text: string) => {
  const label = document.createElement('label');
  label.classList.add('choice');

  const input = document.createElement('input');
  input.type = 'radio';
  input.name = `verdict-${row}`;
  input.value = verdict;

  const caption = document.createElement('span');
  caption.innerText = text;

  label.append(input, caption);
  return { label, input };
};

/** Hover text for one statement, looked up from the form's tooltip map. */
export function tooltipFor(statement: StatementPayload, tooltips: Record<string, string>): string {
  const parts: string[] = [];
  for (const part of statement.payload) {
    const hit = Array.isArray(part)
      ? tooltips[`${part[0]}=${part[1]}`] ?? tooltips[part[0]]
      : tooltips[part];
    if (hit && !parts.includes(hit)) {
      parts.push(hit);
    }
  }
  return parts.join('\n');
}

/**
 * One marking form: a question, one yes/no row per statement, and a
 * submit button that stays disabled until every row has a choice.
 *
 * The served payload is kept as-is.  Rows render in the order the
 * statements arrived and nothing in `payload` is rewritten, so the
 * verdict indices line up with what the service sent.
 */
export class FormView {
  readonly element: HTMLElement;
  readonly payload: FormPayload;
  onSubmit: (() => void) | null = null;

  private readonly choices: (Verdict | null)[] = [];
  private readonly rows: HTMLElement[] = [];
  private submitButton: HTMLButtonElement | null = null;
  private errorLine: HTMLElement | null = null;
  private cursor = 0;
  private busy = false;

  constructor(payload: FormPayload) {
    this.payload = payload;
    this.element = document.createElement('section');
    this.element.classList.add('marking-form');

    if (!Array.isArray(payload.statements) || payload.statements.length === 0) {
      this.element.classList.add('error-panel');
      this.element.innerText = 'This form arrived without statements and cannot be marked.';
      return;
    }

    const question = document.createElement('h2');
    question.innerText = payload.question;
    this.element.append(question);

    const list = document.createElement('div');
    list.classList.add('rows');
    payload.statements.forEach((statement, i) => {
      this.choices.push(null);
      list.append(this.buildRow(statement, i));
    });
    this.element.append(list);

    this.errorLine = document.createElement('p');
    this.errorLine.classList.add('form-error');
    this.errorLine.hidden = true;
    this.element.append(this.errorLine);

    this.submitButton = document.createElement('button');
    this.submitButton.type = 'button';
    this.submitButton.innerText = 'Submit marking';
    this.submitButton.disabled = true;
    this.submitButton.addEventListener('click', () => {
      if (!this.submitButton!.disabled) {
        this.onSubmit?.();
      }
    });
    this.element.append(this.submitButton);

    this.setCursor(0);
  }

  /** True when the payload could not be rendered as a form. */
  get broken(): boolean {
    return this.submitButton === null;
  }

  get complete(): boolean {
    return this.choices.length > 0 && this.choices.every((c) => c !== null);
  }

  /** One verdict per rendered statement, in served order. */
  verdicts(): MarkingVerdict[] {
    if (!this.complete) {
      throw new Error('form is not fully marked');
    }
    return this.choices.map((verdict, index) => ({ index, verdict: verdict! }));
  }

  /**
   * Keyboard entry: y/n answers the current row and moves on.
   * Returns true when the key was consumed.
   */
  handleKey(key: string): boolean {
    if (this.broken || this.busy) {
      return false;
    }
    const k = key.toLowerCase();
    if (k !== 'y' && k !== 'n') {
      return false;
    }
    this.choose(this.cursor, k === 'y' ? 'yes' : 'no');
    return true;
  }

  choose(row: number, verdict: Verdict): void {
    if (this.broken || row < 0 || row >= this.choices.length) {
      return;
    }
    this.choices[row] = verdict;
    const input = this.rows[row]!.querySelector<HTMLInputElement>(`input[value="${verdict}"]`);
    if (input) {
      input.checked = true;
    }
    this.afterChoice(row);
  }

  /** Disable inputs while a submit is in flight. */
  setBusy(busy: boolean): void {
    this.busy = busy;
    if (this.submitButton) {
      this.submitButton.disabled = busy || !this.complete;
    }
    for (const row of this.rows) {
      for (const input of row.querySelectorAll('input')) {
        input.disabled = busy;
      }
    }
  }

  showError(message: string): void {
    if (this.errorLine) {
      this.errorLine.innerText = message;
      this.errorLine.hidden = false;
    }
  }

  clearError(): void {
    if (this.errorLine) {
      this.errorLine.hidden = true;
    }
  }

  private buildRow(statement: StatementPayload, index: number): HTMLElement {
    const row = document.createElement('div');
    row.classList.add('row');
    row.dataset.stype = statement.stype;

    const text = document.createElement('span');
    text.classList.add('statement');
    text.innerText = statement.display_text;
    const tip = tooltipFor(statement, this.payload.tooltips);
    if (tip) {
      text.title = tip;
    }

    const yes = choiceLabel(index, 'yes', 'yes');
    const no = choiceLabel(index, 'no', 'no');
    for (const { input } of [yes, no]) {
      input.addEventListener('change', () => {
        this.choices[index] = input.value as Verdict;
        this.afterChoice(index);
      });
    }

    row.append(text, yes.label, no.label);
    this.rows.push(row);
    return row;
  }

  private afterChoice(row: number): void {
    this.clearError();
    if (this.submitButton) {
      this.submitButton.disabled = this.busy || !this.complete;
    }
    const next = this.choices.findIndex((c) => c === null);
    this.setCursor(next === -1 ? row : next);
  }

  private setCursor(row: number): void {
    this.cursor = row;
    this.rows.forEach((el, i) => el.classList.toggle('active', i === row));
  }
}
