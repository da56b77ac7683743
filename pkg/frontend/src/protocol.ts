/** Wire protocol shared with the session service.
 *
 * Every frame is `{"type", "session", "tick", "payload"}` JSON text.
 * This module only names the shapes and builds/parses frames; it holds no
 * game logic.
 */

export interface WireMessage {
  type: string;
  session?: string;
  tick?: number;
  payload?: unknown;
}

/** Render vocabulary sent in the server hello. */
export interface Vocab {
  name: string;
  locations: string[];
  order_aspects: string[];
  recipe_aspects: string[];
  aspects: Record<string, string[]>;
  ingredients: Record<
    string,
    { display_name: string; chain: string[]; storage: string }
  >;
  recipes: Record<string, { ingredient: string; processing: string[] }[]>;
  conflict_locations: string[];
}

export interface StatePayload {
  state: {
    aspects: Record<string, number>;
    orders: [string | null, number, number, number | null][];
    tick: number;
    order_seed: number;
    orders_spawned: number;
  };
  legal_actions: string[];
}

export interface SignalPayload {
  kind: string; // "show_recipe" | "highlight_location" | "propose_action"
  payload: string;
}

export interface TickPayload {
  served: number[];
  human_degraded: boolean;
  inference_skip: boolean;
}

export interface ErrorPayload {
  code: string;
  detail: string;
}

// -- client → server frame builders ----------------------------------------

export function hello(overrides?: Record<string, unknown>): WireMessage {
  return { type: "hello", payload: overrides ?? {} };
}

export function gaze(session: string, aspect: string): WireMessage {
  return { type: "gaze", session, payload: { aspect } };
}

export function humanAction(session: string, action: string): WireMessage {
  return { type: "human_action", session, payload: { action } };
}

export function bye(session: string): WireMessage {
  return { type: "bye", session, payload: {} };
}

/** Parse a server frame; throws on anything that is not a typed frame. */
export function parseServer(raw: string): WireMessage {
  const msg = JSON.parse(raw);
  if (typeof msg !== "object" || msg === null || typeof msg.type !== "string") {
    throw new Error(`malformed frame: ${raw.slice(0, 80)}`);
  }
  return msg as WireMessage;
}

/** Action keys are "actor:verb:source:target" with "-" for empty slots. */
export function actionLabel(key: string): string {
  const [, verb, source, target] = key.split(":");
  if (verb === "pick") return `pick ${source}`;
  if (verb === "place") return `place → ${target}`;
  if (verb === "assemble") return `assemble ${source}`;
  return verb;
}
