import { RelayEvent, Utterance } from './types.js';

export interface LiveFrame {
  t: number;
  name: string;
}

/**
 * Accumulated view of one live session, built by folding relay events.
 *
 * Events are applied at most once (deduped by seq, which also absorbs
 * the wizard snapshot replayed on reconnect) and must arrive in
 * increasing seq order; a regression is a protocol violation and is
 * surfaced instead of silently reordered.
 */
export class RelayFeed {
  lastSeq = 0;
  resumeToken: string | null = null;
  utterances: Utterance[] = [];
  frames: LiveFrame[] = [];
  events: RelayEvent[] = [];
  errors: RelayEvent[] = [];

  /** Returns true when the event was new and applied. */
  apply(ev: RelayEvent): boolean {
    if (ev.seq === 0) {
      // unsequenced rejection (bad json, role occupied); not session state
      this.errors.push(ev);
      return false;
    }
    if (ev.seq <= this.lastSeq) return false;
    if (this.events.length > 0 && ev.seq < this.lastSeq) {
      throw new Error(`seq went backwards: ${ev.seq} after ${this.lastSeq}`);
    }
    this.lastSeq = ev.seq;
    this.events.push(ev);
    switch (ev.kind) {
      case 'hello':
        if (ev.body.resume_token) this.resumeToken = ev.body.resume_token;
        break;
      case 'utterance':
        this.utterances.push({
          index: this.utterances.length,
          start: ev.t,
          end: ev.body.end ?? ev.t,
          speaker: 'user',
          text: ev.body.text ?? '',
        });
        break;
      case 'frame_notice':
        this.frames.push({ t: ev.body.frame_t, name: ev.body.name });
        break;
      case 'error':
        this.errors.push(ev);
        break;
    }
    return true;
  }

  latestUtteranceT(): number {
    const u = this.utterances[this.utterances.length - 1];
    return u ? u.start : 0;
  }

  latestFrame(): LiveFrame | null {
    return this.frames[this.frames.length - 1] ?? null;
  }

  eventsOfKind(kind: string): RelayEvent[] {
    return this.events.filter((e) => e.kind === kind);
  }
}

export type SocketFactory = (url: string) => WebSocket;

export interface RelayClientOptions {
  wsBase: string; // e.g. ws://127.0.0.1:8787
  sessionId: string;
  role: 'user' | 'wizard';
  socketFactory?: SocketFactory;
  onEvent?: (ev: RelayEvent, applied: boolean) => void;
  onStatus?: (status: 'connecting' | 'open' | 'closed') => void;
}

/**
 * One relay connection for one role. Reconnecting reuses the resume
 * token from the last hello, so the server reclaims the role slot and
 * (for wizards) replays the full event snapshot, which the feed dedupes.
 */
export class RelayClient {
  readonly feed = new RelayFeed();
  private ws: WebSocket | null = null;

  constructor(private opts: RelayClientOptions) {}

  connect(): void {
    const factory = this.opts.socketFactory ?? ((url) => new WebSocket(url));
    let url = `${this.opts.wsBase}/ws/${this.opts.sessionId}?role=${this.opts.role}`;
    if (this.feed.resumeToken) {
      url += `&resume=${encodeURIComponent(this.feed.resumeToken)}`;
    }
    this.opts.onStatus?.('connecting');
    const ws = factory(url);
    ws.onopen = () => this.opts.onStatus?.('open');
    ws.onclose = () => this.opts.onStatus?.('closed');
    // a socket torn down while still connecting only reports 'closed'
    ws.onerror = () => this.opts.onStatus?.('closed');
    ws.onmessage = (msg: MessageEvent) => {
      const ev: RelayEvent = JSON.parse(
        typeof msg.data === 'string' ? msg.data : String(msg.data),
      );
      const applied = this.feed.apply(ev);
      this.opts.onEvent?.(ev, applied);
    };
    this.ws = ws;
  }

  send(kind: string, t: number, body: Record<string, unknown>): void {
    if (!this.ws) throw new Error('not connected');
    this.ws.send(JSON.stringify({ t, kind, body }));
  }

  close(): void {
    this.ws?.close();
    this.ws = null;
  }
}
