import "./style.css";
import { GazeLimiter } from "./gaze";
import { connect, type Client } from "./net";
import { gaze, hello, humanAction } from "./protocol";
import { flash, render } from "./render";
import { applyMessage, initialView, type ViewModel } from "./viewmodel";

const root = document.getElementById("app")!;
const view: ViewModel = initialView();
const limiter = new GazeLimiter();
let client: Client | null = null;

const handlers = {
  onHover(aspect: string) {
    if (client && view.session && limiter.allow()) {
      client.send(gaze(view.session, aspect));
    }
  },
  onAction(key: string, el: HTMLElement) {
    if (client && view.session && view.legal.has(key)) {
      client.send(humanAction(view.session, key));
    } else {
      flash(el); // illegal affordance: feedback only, nothing on the wire
    }
  },
};

const proto = location.protocol === "https:" ? "wss" : "ws";
connect(`${proto}://${location.host}/ws`, {
  onOpen(c) {
    client = c;
    c.send(hello());
  },
  onMessage(msg) {
    applyMessage(view, msg);
    render(root, view, handlers);
  },
  onStatus(status) {
    view.connection = status;
    render(root, view, handlers);
  },
});
