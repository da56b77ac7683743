/** DOM rendering: orders on top, robot area left, human area right, shared
 * processing locations in the center.  Pure function of the view model —
 * the whole board is rebuilt on every server frame.
 */

import { actionLabel } from "./protocol";
import {
  activeHighlights,
  activeProposal,
  activeRecipeCard,
  aspectValue,
  type ViewModel,
} from "./viewmodel";

export interface InputHandlers {
  onHover(aspect: string): void;
  /** Clicked affordance; implementations send or flash depending on legality. */
  onAction(key: string, el: HTMLElement): void;
}

const SHARED_VERBS: Record<string, string> = {
  cutting_board: "cut",
  cooking_pot: "cook",
  plate: "serve",
  trash: "trash",
  human_hand: "shape",
};

function el(
  tag: string,
  className: string,
  text?: string,
): HTMLElement {
  const node = document.createElement(tag);
  node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function productName(recipeId: string): string {
  return recipeId.replace(/_/g, " ");
}

function actionButton(
  key: string,
  view: ViewModel,
  handlers: InputHandlers,
): HTMLElement {
  const btn = el("button", "affordance", actionLabel(key));
  btn.dataset.action = key;
  if (!view.legal.has(key)) btn.classList.add("illegal");
  btn.addEventListener("click", () => handlers.onAction(key, btn));
  return btn;
}

function locationTile(
  loc: string,
  view: ViewModel,
  handlers: InputHandlers,
  highlights: Set<string>,
): HTMLElement {
  const tile = el("div", "tile location");
  tile.dataset.aspect = loc;
  if (highlights.has(loc)) tile.classList.add("highlighted");
  tile.addEventListener("mouseover", () => handlers.onHover(loc));
  tile.appendChild(el("div", "tile-name", loc.replace(/_/g, " ")));
  const value = aspectValue(view, loc);
  tile.appendChild(el("div", "tile-content", value === "none" ? "—" : value));
  const row = el("div", "buttons");
  row.appendChild(actionButton(`human:pick:${loc}:-`, view, handlers));
  row.appendChild(actionButton(`human:place:-:${loc}`, view, handlers));
  const verb = SHARED_VERBS[loc];
  if (verb) row.appendChild(actionButton(`human:${verb}:-:-`, view, handlers));
  tile.appendChild(row);
  return tile;
}

function storageShelf(
  owner: "robot" | "human",
  view: ViewModel,
  handlers: InputHandlers,
): HTMLElement {
  const shelf = el("div", "shelf");
  shelf.appendChild(el("div", "shelf-title", `${owner} storage`));
  const vocab = view.vocab!;
  for (const [id, ing] of Object.entries(vocab.ingredients)) {
    if (ing.storage !== owner) continue;
    const item = el("div", "tile storage-item");
    item.appendChild(el("div", "tile-name", ing.display_name));
    item.appendChild(actionButton(`human:pick:${id}:-`, view, handlers));
    shelf.appendChild(item);
  }
  return shelf;
}

function ordersRow(view: ViewModel): HTMLElement {
  const row = el("div", "orders");
  view.orders.forEach((recipeId, i) => {
    // orders show only the final product, never the recipe
    const card = el("div", "order-card", recipeId ? productName(recipeId) : "…");
    card.dataset.order = `order_${i}`;
    row.appendChild(card);
  });
  return row;
}

function recipeCard(view: ViewModel): HTMLElement | null {
  const recipeId = activeRecipeCard(view);
  if (!recipeId || !view.vocab) return null;
  const card = el("div", "recipe-card");
  card.appendChild(el("div", "recipe-title", productName(recipeId)));
  const list = el("ul", "recipe-steps");
  for (const step of view.vocab.recipes[recipeId] ?? []) {
    const ing = view.vocab.ingredients[step.ingredient];
    const name = ing ? ing.display_name : step.ingredient;
    const suffix = step.processing.length ? ` (${step.processing.join(", ")})` : "";
    list.appendChild(el("li", "recipe-step", `${name}${suffix}`));
  }
  card.appendChild(list);
  return card;
}

export function render(
  root: HTMLElement,
  view: ViewModel,
  handlers: InputHandlers,
): void {
  root.textContent = "";
  if (view.connection !== "open") {
    root.appendChild(el("div", "banner reconnect", "connection lost — reconnecting…"));
  }
  if (view.finished) {
    root.appendChild(el("div", "banner finished", `session over — ${view.served} orders served`));
  }
  if (!view.vocab) return;

  root.appendChild(ordersRow(view));

  const highlights = activeHighlights(view);
  if (highlights.has("assembly_board")) {
    for (const a of Object.keys(view.vocab.aspects)) {
      if (a.startsWith("assembly_")) highlights.add(a);
    }
  }

  const board = el("div", "board");
  const robotCol = el("div", "area robot");
  robotCol.appendChild(storageShelf("robot", view, handlers));
  robotCol.appendChild(locationTile("robot_hand", view, handlers, highlights));

  const sharedCol = el("div", "area shared");
  for (const loc of ["cutting_board", "cooking_pot", "plate", "trash"]) {
    sharedCol.appendChild(locationTile(loc, view, handlers, highlights));
  }
  for (const a of Object.keys(view.vocab.aspects)) {
    if (a.startsWith("assembly_")) {
      sharedCol.appendChild(locationTile(a, view, handlers, highlights));
    }
  }
  const assemble = el("div", "assemble-panel");
  assemble.appendChild(el("div", "shelf-title", "assemble"));
  assemble.appendChild(actionButton("human:place:-:assembly_board", view, handlers));
  for (const rid of Object.keys(view.vocab.recipes)) {
    assemble.appendChild(actionButton(`human:assemble:${rid}:-`, view, handlers));
  }
  sharedCol.appendChild(assemble);

  const humanCol = el("div", "area human");
  humanCol.appendChild(locationTile("human_hand", view, handlers, highlights));
  humanCol.appendChild(storageShelf("human", view, handlers));

  board.appendChild(robotCol);
  board.appendChild(sharedCol);
  board.appendChild(humanCol);
  root.appendChild(board);

  const card = recipeCard(view);
  if (card) root.appendChild(card);

  const proposal = activeProposal(view);
  if (proposal) {
    root.appendChild(el("div", "proposal", `robot suggests: ${actionLabel(proposal)}`));
  }
  root.appendChild(el("div", "status", `tick ${view.tick} · served ${view.served}`));
}

/** Brief visual feedback for a click the server would reject. */
export function flash(node: HTMLElement): void {
  node.classList.add("flash");
  setTimeout(() => node.classList.remove("flash"), 300);
}
