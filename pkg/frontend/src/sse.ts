/** Minimal server-sent-events reader over fetch streaming.
 *
 * Works in the browser and under node 20, so the same code path is
 * exercised by the tests and by the page. Only the subset the control
 * API emits is handled: `id:` / `data:` fields and `:` comments.
 */

export interface SseFrame {
  id?: string;
  data: string;
}

export class SseParser {
  private buffer = "";
  private id: string | undefined;
  private data: string[] = [];

  /** Feed a chunk, get back every frame it completed. */
  feed(chunk: string): SseFrame[] {
    this.buffer += chunk;
    const frames: SseFrame[] = [];
    for (;;) {
      const nl = this.buffer.indexOf("\n");
      if (nl < 0) break;
      const line = this.buffer.slice(0, nl).replace(/\r$/, "");
      this.buffer = this.buffer.slice(nl + 1);
      if (line === "") {
        if (this.data.length > 0) {
          frames.push({ id: this.id, data: this.data.join("\n") });
        }
        this.id = undefined;
        this.data = [];
      } else if (line.startsWith(":")) {
        // keepalive comment
      } else {
        const colon = line.indexOf(":");
        const field = colon < 0 ? line : line.slice(0, colon);
        let value = colon < 0 ? "" : line.slice(colon + 1);
        if (value.startsWith(" ")) value = value.slice(1);
        if (field === "data") this.data.push(value);
        else if (field === "id") this.id = value;
      }
    }
    return frames;
  }
}

/** Stream frames from an SSE endpoint until the server closes or abort. */
export async function* streamSse(
  url: string,
  signal?: AbortSignal,
): AsyncGenerator<SseFrame> {
  const response = await fetch(url, {
    headers: { Accept: "text/event-stream" },
    signal,
  });
  if (!response.ok || response.body === null) {
    throw new Error(`event stream failed: HTTP ${response.status}`);
  }
  const reader = response.body.getReader();
  const decoder = new TextDecoder();
  const parser = new SseParser();
  try {
    for (;;) {
      const { done, value } = await reader.read();
      if (done) break;
      for (const frame of parser.feed(decoder.decode(value, { stream: true }))) {
        yield frame;
      }
    }
  } finally {
    reader.releaseLock();
  }
}
