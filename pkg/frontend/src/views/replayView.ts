import { ConsoleState } from '../consoleState.js';
import { highlightIndex } from '../transcriptSync.js';
import { formatTimecode } from '../types.js';

/**
 * Replay pane: video with scrub, transcript list auto-highlighting the
 * line containing the playhead, click-a-line to seek.
 */
export class ReplayView {
  private video: HTMLVideoElement;
  private list: HTMLOListElement;
  private notice: HTMLParagraphElement;

  constructor(
    root: HTMLElement,
    private state: ConsoleState,
    private onSeek: () => void,
  ) {
    this.video = document.createElement('video');
    this.video.controls = true;
    this.video.className = 'replay-video';
    this.video.addEventListener('timeupdate', () => {
      this.state.seek(Math.floor(this.video.currentTime * 1000));
      this.refreshHighlight();
      this.onSeek();
    });
    this.notice = document.createElement('p');
    this.notice.className = 'notice';
    this.list = document.createElement('ol');
    this.list.className = 'transcript';
    root.append(this.video, this.notice, this.list);
  }

  render(): void {
    const s = this.state.session;
    if (!s) return;
    this.video.src = s.video_uri ? this.state.api.videoUrl(s.id) : '';
    this.video.style.display = s.video_uri ? '' : 'none';
    this.list.textContent = '';
    if (this.state.utterances.length === 0) {
      this.notice.textContent = 'This session has no transcript lines.';
      return;
    }
    this.notice.textContent = '';
    for (const u of this.state.utterances) {
      const li = document.createElement('li');
      li.dataset.index = String(u.index);
      li.textContent = `[${formatTimecode(u.start)}] ${u.speaker}: ${u.text}`;
      li.addEventListener('click', () => this.seekTo(u.start));
      this.list.appendChild(li);
    }
    this.refreshHighlight();
  }

  seekTo(t: number): void {
    this.state.seek(t);
    this.video.currentTime = this.state.playhead / 1000;
    this.refreshHighlight();
    this.onSeek();
  }

  private refreshHighlight(): void {
    const idx = highlightIndex(this.state.utterances, this.state.playhead);
    this.list.querySelectorAll('li').forEach((li, i) => {
      li.classList.toggle('current', i === idx);
    });
  }
}
