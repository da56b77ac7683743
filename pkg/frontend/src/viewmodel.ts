/** Client-side view model: a pure fold over the server message stream.
 *
 * The client never simulates the game.  Everything rendered comes from the
 * last state_update plus short-lived signal annotations, so a reloaded
 * client resumes correctly from the next frame it receives.
 */

import type {
  SignalPayload,
  StatePayload,
  TickPayload,
  Vocab,
  WireMessage,
} from "./protocol";

export const SIGNAL_TICKS = 2; // display duration of a comm signal

export interface ActiveSignal {
  kind: string;
  payload: string;
  shownAt: number; // server tick when received
  expiresAt: number;
}

export interface ViewModel {
  vocab: Vocab | null;
  session: string | null;
  tick: number;
  aspects: Record<string, number>; // value index per aspect
  orders: (string | null)[]; // final product per order slot, or null
  legal: Set<string>;
  signals: ActiveSignal[];
  served: number;
  lastError: { code: string; detail: string } | null;
  connection: "connecting" | "open" | "closed";
  finished: boolean;
}

export function initialView(): ViewModel {
  return {
    vocab: null,
    session: null,
    tick: 0,
    aspects: {},
    orders: [],
    legal: new Set(),
    signals: [],
    served: 0,
    lastError: null,
    connection: "connecting",
    finished: false,
  };
}

/** Fold one server frame into the view; mutates and returns `view`. */
export function applyMessage(view: ViewModel, msg: WireMessage): ViewModel {
  if (typeof msg.tick === "number") view.tick = msg.tick;
  if (msg.session) view.session = msg.session;
  switch (msg.type) {
    case "hello":
      view.vocab = msg.payload as Vocab;
      break;
    case "state_update": {
      const p = msg.payload as StatePayload;
      view.aspects = p.state.aspects;
      view.orders = p.state.orders.map((row) => row[0]);
      view.legal = new Set(p.legal_actions);
      view.signals = view.signals.filter((s) => s.expiresAt > view.tick);
      break;
    }
    case "comm_signal": {
      const p = msg.payload as SignalPayload;
      view.signals.push({
        kind: p.kind,
        payload: p.payload,
        shownAt: view.tick,
        expiresAt: view.tick + SIGNAL_TICKS,
      });
      break;
    }
    case "tick": {
      const p = msg.payload as TickPayload;
      view.served += p.served.length;
      break;
    }
    case "error":
      view.lastError = msg.payload as ViewModel["lastError"];
      break;
    case "bye":
      view.finished = true;
      break;
  }
  return view;
}

/** Current symbolic value of a location/order aspect ("empty" for none). */
export function aspectValue(view: ViewModel, aspect: string): string {
  const vocab = view.vocab;
  if (!vocab) return "";
  const dom = vocab.aspects[aspect];
  const idx = view.aspects[aspect] ?? 0;
  return dom ? dom[idx] : "";
}

export function activeHighlights(view: ViewModel): Set<string> {
  const out = new Set<string>();
  for (const s of view.signals) {
    if (s.kind === "highlight_location") out.add(s.payload);
  }
  return out;
}

export function activeRecipeCard(view: ViewModel): string | null {
  for (let i = view.signals.length - 1; i >= 0; i--) {
    if (view.signals[i].kind === "show_recipe") return view.signals[i].payload;
  }
  return null;
}

export function activeProposal(view: ViewModel): string | null {
  for (let i = view.signals.length - 1; i >= 0; i--) {
    if (view.signals[i].kind === "propose_action") return view.signals[i].payload;
  }
  return null;
}
