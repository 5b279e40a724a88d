import { ApiClient, ApiError } from "./api.js";
import { streamSse } from "./sse.js";
import { ControlState, StudyView, applyEvent, fromSnapshot } from "./view.js";
import type { Command, CommandType, TraceEvent } from "./types.js";

export interface ControllerOptions {
  /** Base delay for reconnect backoff, doubled per consecutive failure. */
  retryBaseMs?: number;
  retryMaxMs?: number;
  /** Stop retrying after this many consecutive failures (0 = forever). */
  maxRetries?: number;
}

const sleep = (ms: number) => new Promise<void>((resolve) => setTimeout(resolve, ms));

/** Owns the view: snapshot-then-stream, reconnect with backoff, and the
 * single-command-in-flight rule for the control buttons.
 *
 * Every (re)connection starts from a fresh GET /study + /rounds snapshot
 * and then follows /events, which replays the trace from the start; the
 * only deduplication needed is skipping round summaries the snapshot
 * already delivered, since candidates and activity begin empty.
 */
export class DashboardController {
  readonly api: ApiClient;
  readonly control = new ControlState();
  view = new StudyView();
  onChange: (view: StudyView) => void = () => {};

  private abort: AbortController | null = null;
  private running = false;
  private readonly retryBaseMs: number;
  private readonly retryMaxMs: number;
  private readonly maxRetries: number;

  constructor(api: ApiClient, options: ControllerOptions = {}) {
    this.api = api;
    this.retryBaseMs = options.retryBaseMs ?? 500;
    this.retryMaxMs = options.retryMaxMs ?? 5000;
    this.maxRetries = options.maxRetries ?? 0;
  }

  /** Connect and follow the study until it finishes or stop() is called. */
  async run(): Promise<void> {
    this.running = true;
    let failures = 0;
    while (this.running) {
      try {
        await this.snapshotThenStream();
        if (this.view.finished || !this.running) return;
        // Server closed the stream mid-study: banner up, then resync.
        failures = 0;
        this.view.connected = false;
        this.onChange(this.view);
      } catch (err) {
        if (!this.running) return;
        failures += 1;
        this.view.connected = false;
        this.onChange(this.view);
        if (this.maxRetries > 0 && failures >= this.maxRetries) throw err;
      }
      const exponent = failures > 0 ? failures - 1 : 0;
      await sleep(Math.min(this.retryBaseMs * 2 ** exponent, this.retryMaxMs));
    }
  }

  stop(): void {
    this.running = false;
    this.abort?.abort();
  }

  /** One connection lifetime: fresh snapshot, then the live stream. */
  private async snapshotThenStream(): Promise<void> {
    const [snapshot, rounds] = await Promise.all([
      this.api.getStudy(),
      this.api.getRounds(),
    ]);
    const knownRounds = new Set(rounds.map((r) => r.round));
    this.view = fromSnapshot(snapshot, rounds);
    this.onChange(this.view);
    if (this.view.finished) return;

    this.abort = new AbortController();
    for await (const frame of streamSse(this.api.eventsUrl(), this.abort.signal)) {
      const event = JSON.parse(frame.data) as TraceEvent;
      if (event.kind === "round_complete" &&
          knownRounds.has((event.payload as { round: number }).round)) {
        continue;
      }
      applyEvent(this.view, event);
      this.onChange(this.view);
      if (this.view.finished) {
        this.abort.abort();
        return;
      }
    }
  }

  /** POST a command, serialized: refuses while another is in flight. */
  async send(command: Command): Promise<boolean> {
    const type: CommandType = command.type;
    if (!this.control.canSend(type, this.view)) return false;
    if (command.type === "set_bounds") {
      const problem = this.control.validateBounds();
      if (problem !== null) {
        this.view.lastError = problem;
        this.onChange(this.view);
        return false;
      }
    }
    this.control.pendingCommand = type;
    this.onChange(this.view);
    try {
      const ack = await this.api.sendCommand(command);
      this.view.lastError = null;
      if (type === "pause") this.view.paused = true;
      if (type === "resume") this.view.paused = false;
      this.view.phase = ack.phase;
      return ack.ok;
    } catch (err) {
      this.view.lastError = err instanceof ApiError ? err.message : String(err);
      return false;
    } finally {
      this.control.pendingCommand = null;
      this.onChange(this.view);
    }
  }

  sendSetBounds(): Promise<boolean> {
    const { lower, upper } = this.control.parsedBounds();
    return this.send({ type: "set_bounds", lower, upper });
  }
}
