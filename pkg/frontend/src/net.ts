/** Websocket transport with an audit trail of every outbound frame.
 *
 * The audit log is what the integration test compares against the server's
 * episode log: every user-visible interaction must appear here.
 */

import { parseServer, type WireMessage } from "./protocol";

export interface Socket {
  send(data: string): void;
}

export class Client {
  readonly sent: WireMessage[] = [];

  constructor(private sock: Socket) {}

  send(msg: WireMessage): void {
    this.sent.push(msg);
    this.sock.send(JSON.stringify(msg));
  }
}

export interface ConnectionHandlers {
  onMessage(msg: WireMessage): void;
  onStatus(status: "connecting" | "open" | "closed"): void;
  /** Called when (re)connected; should send the hello frame. */
  onOpen(client: Client): void;
}

/** Connect to the session service, reconnecting with a fixed backoff. */
export function connect(
  url: string,
  handlers: ConnectionHandlers,
  reconnectMs = 1000,
): void {
  const dial = () => {
    handlers.onStatus("connecting");
    const ws = new WebSocket(url);
    ws.onopen = () => {
      handlers.onStatus("open");
      handlers.onOpen(new Client(ws));
    };
    ws.onmessage = (ev) => handlers.onMessage(parseServer(String(ev.data)));
    ws.onclose = () => {
      handlers.onStatus("closed");
      setTimeout(dial, reconnectMs);
    };
    ws.onerror = () => ws.close();
  };
  dial();
}
