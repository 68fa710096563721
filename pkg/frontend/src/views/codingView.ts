import { ConsoleState } from '../consoleState.js';
import { CodingRow, formatTimecode } from '../types.js';

/**
 * Coding table: every session message with its decision, ratings and
 * labels. Clicking a row seeks the player to the message's timestamp;
 * labels are edited inline and saved through the API.
 */
export class CodingView {
  private table: HTMLTableElement;

  constructor(
    root: HTMLElement,
    private state: ConsoleState,
    private seekTo: (t: number) => void,
  ) {
    this.table = document.createElement('table');
    this.table.className = 'coding';
    root.appendChild(this.table);
  }

  async render(): Promise<void> {
    if (!this.state.session) return;
    const rows = await this.state.api.codingRows(this.state.session.id);
    this.table.innerHTML =
      '<tr><th>t</th><th>type</th><th>phase</th><th>decision</th>' +
      '<th>rating</th><th>labels</th><th>text</th></tr>';
    for (const row of rows) this.table.appendChild(this.renderRow(row));
  }

  private renderRow(row: CodingRow): HTMLTableRowElement {
    const tr = document.createElement('tr');
    const m = row.message;
    const avg = row.ratings.length
      ? (row.ratings.reduce((a, r) => a + r.score, 0) / row.ratings.length).toFixed(1)
      : '';
    const cells = [
      formatTimecode(m.t),
      m.msg_type,
      m.phase,
      m.decision.state + (m.decision.reason ? `: ${m.decision.reason}` : ''),
      avg,
    ];
    for (const text of cells) {
      const td = document.createElement('td');
      td.textContent = text;
      tr.appendChild(td);
    }

    const labelTd = document.createElement('td');
    const labelInput = document.createElement('input');
    labelInput.value = row.annotations.map((a) => a.label).join(', ');
    labelInput.addEventListener('change', () => {
      const label = labelInput.value.trim();
      if (label) void this.state.api.annotate(m.id, label);
    });
    labelInput.addEventListener('click', (e) => e.stopPropagation());
    labelTd.appendChild(labelInput);
    tr.appendChild(labelTd);

    const textTd = document.createElement('td');
    textTd.textContent = m.text;
    tr.appendChild(textTd);

    tr.addEventListener('click', () => this.seekTo(m.t));
    return tr;
  }
}
