/** Scripted UI session: every click and hover must produce exactly the
 * wire messages the protocol allows — legal clicks one human_action,
 * hovers rate-limited gaze, illegal clicks nothing but a flash.
 */
import { beforeEach, describe, expect, it } from "vitest";
import helloFixture from "./fixtures/hello.json";
import stateFixture from "./fixtures/state_update.json";
import { GazeLimiter } from "../src/gaze";
import { Client } from "../src/net";
import { gaze, humanAction, type WireMessage } from "../src/protocol";
import { flash, render, type InputHandlers } from "../src/render";
import { applyMessage, initialView, type ViewModel } from "../src/viewmodel";

class FakeSocket {
  frames: string[] = [];
  send(data: string) {
    this.frames.push(data);
  }
}

describe("audit completeness", () => {
  let root: HTMLElement;
  let view: ViewModel;
  let sock: FakeSocket;
  let client: Client;
  let clock: number;
  let handlers: InputHandlers;

  beforeEach(() => {
    root = document.createElement("div");
    document.body.appendChild(root);
    view = initialView();
    view.connection = "open";
    applyMessage(view, helloFixture as WireMessage);
    applyMessage(view, stateFixture as WireMessage);
    sock = new FakeSocket();
    client = new Client(sock);
    clock = 0;
    const limiter = new GazeLimiter(100, () => clock);
    handlers = {
      onHover(aspect) {
        if (limiter.allow()) client.send(gaze(view.session!, aspect));
      },
      onAction(key, el) {
        if (view.legal.has(key)) client.send(humanAction(view.session!, key));
        else flash(el);
      },
    };
    render(root, view, handlers);
  });

  function clickAction(key: string): HTMLElement {
    const btn = root.querySelector<HTMLElement>(`[data-action="${key}"]`)!;
    expect(btn).not.toBeNull();
    btn.click();
    return btn;
  }

  it("click on a legal affordance emits exactly one human_action", () => {
    clickAction("human:pick:rice:-");
    expect(client.sent).toHaveLength(1);
    expect(client.sent[0]).toMatchObject({
      type: "human_action",
      payload: { action: "human:pick:rice:-" },
    });
    // the frame on the wire matches the audit entry byte for byte
    expect(sock.frames).toEqual(client.sent.map((m) => JSON.stringify(m)));
  });

  it("illegal click emits nothing and flashes", () => {
    const key = "human:cut:-:-";
    expect(view.legal.has(key)).toBe(false);
    const btn = clickAction(key);
    expect(client.sent).toHaveLength(0);
    expect(btn.classList.contains("flash")).toBe(true);
  });

  it("one second of hover yields at most 10 gaze frames, all audited", () => {
    const tile = root.querySelector('[data-aspect="cutting_board"]')!;
    for (let i = 0; i < 60; i++) {
      clock = (i * 1000) / 60;
      tile.dispatchEvent(new Event("mouseover"));
    }
    expect(client.sent.length).toBeGreaterThan(0);
    expect(client.sent.length).toBeLessThanOrEqual(10);
    for (const msg of client.sent) {
      expect(msg).toMatchObject({ type: "gaze", payload: { aspect: "cutting_board" } });
    }
    expect(sock.frames).toEqual(client.sent.map((m) => JSON.stringify(m)));
  });

  it("a scripted mixed session leaves a complete audit trail", () => {
    const tile = root.querySelector('[data-aspect="plate"]')!;
    clock = 0;
    tile.dispatchEvent(new Event("mouseover")); // gaze
    clickAction("human:pick:rice:-"); // action
    clock = 500;
    tile.dispatchEvent(new Event("mouseover")); // gaze
    clickAction("human:cut:-:-"); // illegal: no frame
    const kinds = client.sent.map((m) => m.type);
    expect(kinds).toEqual(["gaze", "human_action", "gaze"]);
    expect(sock.frames.length).toBe(client.sent.length);
  });
});
