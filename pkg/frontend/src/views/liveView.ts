import { ApiClient } from '../api.js';
import { ConsoleState } from '../consoleState.js';
import { RelayClient } from '../relay.js';
import { formatTimecode, MessageType, RelayEvent } from '../types.js';

/**
 * Live wizard view: rolling transcript, latest frame thumbnail, and a
 * Generate-at-now button that uses the latest utterance timestamp.
 * Approvals go through the relay so the participant view receives them.
 */
export class LiveView {
  private client: RelayClient | null = null;
  private list: HTMLOListElement;
  private thumb: HTMLImageElement;
  private status: HTMLSpanElement;
  private result: HTMLDivElement;
  private generateBtn: HTMLButtonElement;

  constructor(
    root: HTMLElement,
    private state: ConsoleState,
    private api: ApiClient,
    private wsBase: string,
  ) {
    this.status = document.createElement('span');
    this.status.className = 'status';
    this.thumb = document.createElement('img');
    this.thumb.className = 'frame-thumb';
    this.list = document.createElement('ol');
    this.list.className = 'transcript live';
    this.generateBtn = document.createElement('button');
    this.generateBtn.textContent = 'Generate at now';
    this.generateBtn.addEventListener('click', () => this.generateAtNow());
    this.result = document.createElement('div');
    root.append(this.status, this.thumb, this.list, this.generateBtn, this.result);
  }

  join(sessionId: string): void {
    this.leave();
    this.state.liveMode = true;
    this.client = new RelayClient({
      wsBase: this.wsBase,
      sessionId,
      role: 'wizard',
      onStatus: (s) => {
        this.state.connectionStatus = s;
        this.status.textContent = `relay: ${s}`;
        if (s === 'closed' && this.state.liveMode) {
          // resume token restores the slot and replays the snapshot
          setTimeout(() => this.client?.connect(), 1000);
        }
      },
      onEvent: (ev, applied) => {
        if (applied) this.onEvent(ev, sessionId);
      },
    });
    this.client.connect();
  }

  leave(): void {
    this.state.liveMode = false;
    this.client?.close();
    this.client = null;
  }

  private onEvent(ev: RelayEvent, sessionId: string): void {
    if (ev.kind === 'utterance') {
      const li = document.createElement('li');
      li.textContent = `[${formatTimecode(ev.t)}] ${ev.body.text ?? ''}`;
      this.list.appendChild(li);
    } else if (ev.kind === 'frame_notice') {
      this.thumb.src = this.api.frameUrl(sessionId, ev.body.name);
    } else if (ev.kind === 'chain_result' && ev.body.message) {
      this.showResult(ev);
    } else if (ev.kind === 'error') {
      const p = document.createElement('p');
      p.className = 'error';
      p.textContent = `${ev.body.code}: ${ev.body.message}`;
      this.result.appendChild(p);
    }
  }

  private generateAtNow(): void {
    if (!this.client) return;
    const t = this.client.feed.latestUtteranceT();
    this.client.send('generate_request', t, { msg_type: this.selectedType() });
  }

  private selectedType(): MessageType {
    return 'ReflectiveQuestion';
  }

  private showResult(ev: RelayEvent): void {
    const msg = ev.body.message;
    this.result.innerHTML = '';
    const text = document.createElement('blockquote');
    text.textContent = `${msg.phase}: ${msg.text}`;
    const approve = document.createElement('button');
    approve.textContent = 'Approve and send';
    approve.addEventListener('click', () =>
      this.client?.send('decision', ev.t, { message_id: msg.id, state: 'approved' }));
    const reason = document.createElement('input');
    reason.placeholder = 'Denial reason (required)';
    const deny = document.createElement('button');
    deny.textContent = 'Deny';
    deny.disabled = true;
    reason.addEventListener('input', () => {
      deny.disabled = reason.value.trim().length === 0;
    });
    deny.addEventListener('click', () =>
      this.client?.send('decision', ev.t,
                        { message_id: msg.id, state: 'denied', reason: reason.value }));
    this.result.append(text, approve, reason, deny);
  }
}
