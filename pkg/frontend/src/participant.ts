import { RelayEvent } from './types.js';

export interface DeliveredMessage {
  messageId: string;
  text: string;
  msgType: string;
  phase: string;
  seq: number;
}

export interface ParticipantOptions {
  /** Called once per newly applied message; wire this to the ack send. */
  onApplied?: (msg: DeliveredMessage) => void;
  /** Read new messages aloud via the browser speech facility when on. */
  speak?: boolean;
}

/**
 * The participant-facing message feed. Delivery is at-least-once on the
 * wire, so the same deliver event can arrive again after a reconnect;
 * applying is keyed by message id and happens exactly once.
 */
export class ParticipantFeed {
  /** Newest first, the way the message panel renders them. */
  messages: DeliveredMessage[] = [];
  private seen = new Set<string>();

  constructor(private opts: ParticipantOptions = {}) {}

  /** Returns true when this delivery was new and applied. */
  applyDeliver(ev: RelayEvent): boolean {
    if (ev.kind !== 'deliver') return false;
    const messageId = ev.body.message_id as string;
    if (this.seen.has(messageId)) return false;
    this.seen.add(messageId);
    const msg: DeliveredMessage = {
      messageId,
      text: ev.body.text ?? '',
      msgType: ev.body.msg_type ?? '',
      phase: ev.body.phase ?? '',
      seq: ev.seq,
    };
    this.messages.unshift(msg);
    this.opts.onApplied?.(msg);
    if (this.opts.speak) this.speakText(msg.text);
    return true;
  }

  private speakText(text: string): void {
    // best-effort stub; audio correctness is out of scope
    const synth = (globalThis as any).speechSynthesis;
    const Utter = (globalThis as any).SpeechSynthesisUtterance;
    if (synth && Utter) {
      try {
        synth.speak(new Utter(text));
      } catch {
        // ignore: speech is a convenience, never a failure
      }
    }
  }
}
