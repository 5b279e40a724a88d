import type {
  ApiErrorBody,
  Command,
  CommandAck,
  FieldExport,
  RoundSummary,
  StudySnapshot,
  TracePage,
} from "./types.js";

/** A non-2xx reply from the control API, message kept verbatim. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly kind: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

async function asJson<T>(response: Response): Promise<T> {
  const body = await response.json();
  if (!response.ok) {
    const err = body as ApiErrorBody;
    throw new ApiError(response.status, err.error ?? "Error", err.message ?? "");
  }
  return body as T;
}

export class ApiClient {
  readonly baseUrl: string;

  constructor(baseUrl: string) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  getStudy(): Promise<StudySnapshot> {
    return fetch(`${this.baseUrl}/study`).then((r) => asJson<StudySnapshot>(r));
  }

  getRounds(): Promise<RoundSummary[]> {
    return fetch(`${this.baseUrl}/rounds`)
      .then((r) => asJson<{ rounds: RoundSummary[] }>(r))
      .then((body) => body.rounds);
  }

  getTrace(offset = 0, limit = 100): Promise<TracePage> {
    const query = `offset=${offset}&limit=${limit}`;
    return fetch(`${this.baseUrl}/trace?${query}`).then((r) => asJson<TracePage>(r));
  }

  getField(design: number[]): Promise<FieldExport> {
    const query = `design=${design.map(String).join(",")}`;
    return fetch(`${this.baseUrl}/field?${query}`).then((r) => asJson<FieldExport>(r));
  }

  async sendCommand(command: Command): Promise<CommandAck> {
    const response = await fetch(`${this.baseUrl}/command`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(command),
    });
    return asJson<CommandAck>(response);
  }

  eventsUrl(): string {
    return `${this.baseUrl}/events`;
  }
}
