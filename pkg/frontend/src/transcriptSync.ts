import { Utterance } from './types.js';

/**
 * Index of the transcript line to highlight at the given playhead: the
 * last utterance whose start <= playhead, or -1 before the first one.
 * Matches the backend's context-window slicing, so what the wizard sees
 * highlighted is exactly the last line inside the assembled context.
 */
export function highlightIndex(utterances: Utterance[], playhead: number): number {
  let lo = 0;
  let hi = utterances.length; // first index with start > playhead
  while (lo < hi) {
    const mid = (lo + hi) >> 1;
    if (utterances[mid].start <= playhead) {
      lo = mid + 1;
    } else {
      hi = mid;
    }
  }
  return lo - 1;
}

export function clampPlayhead(t: number, duration: number): number {
  if (!Number.isFinite(t) || t < 0) return 0;
  return Math.min(Math.floor(t), duration);
}
