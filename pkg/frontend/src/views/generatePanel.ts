import { ApiError } from '../api.js';
import { ConsoleState } from '../consoleState.js';
import { MESSAGE_TYPES, MessageType, TASK_PHASES, TaskPhase } from '../types.js';

/**
 * Generation controls: type selector, phase radio group ("model
 * decides" default), system-prompt editor, result display with the
 * classified phase, rating stars, and approve / deny-with-reason.
 */
export class GeneratePanel {
  private typeSelect: HTMLSelectElement;
  private phaseGroup: HTMLFieldSetElement;
  private promptBox: HTMLTextAreaElement;
  private generateBtn: HTMLButtonElement;
  private result: HTMLDivElement;
  private errorBox: HTMLParagraphElement;

  constructor(root: HTMLElement, private state: ConsoleState) {
    this.typeSelect = document.createElement('select');
    for (const t of MESSAGE_TYPES) {
      const opt = document.createElement('option');
      opt.value = t;
      opt.textContent = t;
      this.typeSelect.appendChild(opt);
    }

    this.phaseGroup = document.createElement('fieldset');
    this.phaseGroup.appendChild(this.radio('', 'model decides', true));
    for (const p of TASK_PHASES) this.phaseGroup.appendChild(this.radio(p, p, false));

    this.promptBox = document.createElement('textarea');
    this.promptBox.placeholder = 'System prompt override (blank keeps the template)';
    this.promptBox.addEventListener('input', () => {
      this.state.promptDraft = this.promptBox.value;
    });

    this.generateBtn = document.createElement('button');
    this.generateBtn.textContent = 'Generate';
    this.generateBtn.addEventListener('click', () => void this.generate());

    this.result = document.createElement('div');
    this.result.className = 'chain-result';
    this.errorBox = document.createElement('p');
    this.errorBox.className = 'error';

    root.append(this.typeSelect, this.phaseGroup, this.promptBox,
                this.generateBtn, this.errorBox, this.result);
  }

  private radio(value: string, label: string, checked: boolean): HTMLLabelElement {
    const wrap = document.createElement('label');
    const input = document.createElement('input');
    input.type = 'radio';
    input.name = 'phase';
    input.value = value;
    input.checked = checked;
    wrap.append(input, document.createTextNode(label));
    return wrap;
  }

  refresh(): void {
    this.generateBtn.disabled = !this.state.canGenerate();
  }

  private selectedPhase(): TaskPhase | undefined {
    const checked = this.phaseGroup.querySelector<HTMLInputElement>('input:checked');
    return checked && checked.value ? (checked.value as TaskPhase) : undefined;
  }

  private async generate(): Promise<void> {
    this.errorBox.textContent = '';
    this.refresh();
    try {
      const res = await this.state.generate(
        this.typeSelect.value as MessageType,
        this.selectedPhase(),
      );
      const overridden = res.phase_source === 'wizard_override';
      this.result.innerHTML = '';
      const phaseLine = document.createElement('p');
      phaseLine.textContent = overridden
        ? `Phase ${res.phase} (wizard override; model said ${res.classified_phase ?? 'nothing usable'})`
        : `Phase ${res.phase} (model classification)`;
      phaseLine.className = overridden ? 'phase overridden' : 'phase';
      const text = document.createElement('blockquote');
      text.textContent = res.text;
      this.result.append(phaseLine, text, this.evaluationRow(res.id));
    } catch (e) {
      if (e instanceof ApiError && e.code === 'UNPARSEABLE_PHASE') {
        // show the raw model text and hand control to the override radios
        this.errorBox.textContent = `Could not parse a phase from: ${e.detail ?? ''}`;
        this.phaseGroup.querySelector('input')?.focus();
      } else {
        this.errorBox.textContent = e instanceof Error ? e.message : String(e);
      }
    } finally {
      this.refresh();
    }
  }

  private evaluationRow(messageId: string): HTMLDivElement {
    const row = document.createElement('div');
    row.className = 'evaluation';

    for (let score = 1; score <= 5; score++) {
      const star = document.createElement('button');
      star.textContent = '★'.repeat(score);
      star.title = `Rate ${score}/5`;
      star.addEventListener('click', () => void this.state.rate(messageId, score, 'wizard'));
      row.appendChild(star);
    }

    const approve = document.createElement('button');
    approve.textContent = 'Approve';
    approve.addEventListener('click', () => void this.state.decide(messageId, 'approved'));

    const reason = document.createElement('input');
    reason.placeholder = 'Denial reason (required)';
    const deny = document.createElement('button');
    deny.textContent = 'Deny';
    deny.disabled = true;
    reason.addEventListener('input', () => {
      deny.disabled = !this.state.canDeny(reason.value);
    });
    deny.addEventListener('click', () =>
      void this.state.decide(messageId, 'denied', reason.value));

    row.append(approve, reason, deny);
    return row;
  }
}
