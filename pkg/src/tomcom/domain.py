"""Kitchen world state, actions, transitions, rewards and the plan oracle.

Everything here is pure: ``apply`` returns a fresh state, randomness only
enters through the deterministic order stream seeded in the state itself.
Both agents submit one action per tick; the human action is applied first
and a robot action that became illegal afterwards degrades to noop, which
implements the human-first conflict rule.

``analyze`` is the workhorse: a factored decomposition of the remaining
work that yields both the minimal remaining action count (the error
oracle) and the set of next actions that reduce it.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .config import HAND_OF, NONE_VALUE, PROCESS_STATIONS, TaskConfig

VERBS = ("pick", "place", "cut", "cook", "shape", "assemble", "serve", "trash", "noop")

PROCESS_VERB = {"cut": "cut", "cooked": "cook", "shaped": "shape"}


@dataclass(frozen=True)
class TaskAction:
    actor: str  # "human" | "robot"
    verb: str
    source: str | None = None  # ingredient id (storage pick), location id, or recipe id (assemble)
    target: str | None = None  # location id

    def key(self) -> str:
        return f"{self.actor}:{self.verb}:{self.source or '-'}:{self.target or '-'}"

    def to_json(self) -> dict:
        return {"actor": self.actor, "verb": self.verb, "source": self.source, "target": self.target}

    @classmethod
    def from_json(cls, d: dict) -> "TaskAction":
        return cls(d["actor"], d["verb"], d.get("source"), d.get("target"))

    @classmethod
    def from_key(cls, key: str) -> "TaskAction":
        actor, verb, source, target = key.split(":")
        return cls(actor, verb, None if source == "-" else source, None if target == "-" else target)

    @classmethod
    def noop(cls, actor: str) -> "TaskAction":
        return cls(actor, "noop")


@dataclass(frozen=True)
class OrderSlot:
    recipe_id: str | None
    order_id: int
    created_tick: int
    respawn_at: int | None  # set while the slot waits for a new order


@dataclass(frozen=True)
class WorldState:
    aspect_values: tuple[int, ...]  # indexed per cfg.aspects order
    orders: tuple[OrderSlot, ...]
    tick: int
    order_seed: int
    orders_spawned: int


def _aspect_pos(cfg: TaskConfig) -> dict[str, int]:
    cache = getattr(cfg, "_aspect_pos", None)
    if cache is None:
        cache = {a: i for i, a in enumerate(cfg.aspects)}
        cfg._aspect_pos = cache
    return cache


def get_value(cfg: TaskConfig, state: WorldState, aspect: str) -> str:
    return cfg.aspects[aspect][state.aspect_values[_aspect_pos(cfg)[aspect]]]


def get_index(cfg: TaskConfig, state: WorldState, aspect: str) -> int:
    return state.aspect_values[_aspect_pos(cfg)[aspect]]


def with_values(cfg: TaskConfig, state: WorldState, updates: dict[str, str]) -> WorldState:
    pos = _aspect_pos(cfg)
    vals = list(state.aspect_values)
    for aspect, value in updates.items():
        vals[pos[aspect]] = cfg.value_index(aspect, value)
    return replace(state, aspect_values=tuple(vals))


def spawned_recipe(cfg: TaskConfig, order_seed: int, n: int) -> str:
    rng = np.random.default_rng([order_seed, n])
    return cfg.products[int(rng.integers(len(cfg.products)))]


def initial_state(cfg: TaskConfig, order_seed: int = 0) -> WorldState:
    values = [0] * len(cfg.aspects)
    state = WorldState(
        aspect_values=tuple(values),
        orders=tuple(OrderSlot(None, -1, 0, 0) for _ in range(cfg.order_slots)),
        tick=0,
        order_seed=order_seed,
        orders_spawned=0,
    )
    return _respawn_orders(cfg, state, force=True)


def _respawn_orders(cfg: TaskConfig, state: WorldState, force: bool = False) -> WorldState:
    orders = list(state.orders)
    spawned = state.orders_spawned
    updates = {}
    for i, slot in enumerate(orders):
        if slot.recipe_id is None and (force or (slot.respawn_at is not None and state.tick >= slot.respawn_at)):
            recipe = spawned_recipe(cfg, state.order_seed, spawned)
            orders[i] = OrderSlot(recipe, spawned, state.tick, None)
            updates[f"order_{i}"] = recipe
            spawned += 1
    state = replace(state, orders=tuple(orders), orders_spawned=spawned)
    return with_values(cfg, state, updates) if updates else state


def variant_of(cfg: TaskConfig, state: WorldState, recipe_id: str) -> int:
    return get_index(cfg, state, cfg.recipe_aspect(recipe_id))


# ---------------------------------------------------------------------------
# legality and effects


def _slot_contents(cfg: TaskConfig, state: WorldState) -> list[str]:
    return [get_value(cfg, state, s) for s in cfg.assembly_slot_ids]


def _first_free_slot(cfg: TaskConfig, state: WorldState) -> str | None:
    for s in cfg.assembly_slot_ids:
        if get_value(cfg, state, s) == NONE_VALUE:
            return s
    return None


def _assemblable(cfg: TaskConfig, state: WorldState, recipe_id: str) -> bool:
    required = list(cfg.required_items(recipe_id, variant_of(cfg, state, recipe_id)))
    contents = _slot_contents(cfg, state)
    for item in required:
        if item in contents:
            contents.remove(item)
        else:
            return False
    return True


_PICK_SOURCES = None


def _pick_sources(cfg: TaskConfig) -> tuple[str, ...]:
    return ("cutting_board", "cooking_pot", "plate", "trash") + cfg.assembly_slot_ids


def is_legal(cfg: TaskConfig, state: WorldState, action: TaskAction) -> bool:
    actor, verb = action.actor, action.verb
    hand = HAND_OF[actor]
    held = get_value(cfg, state, hand)
    if verb == "noop":
        return True
    if verb == "pick":
        if held != NONE_VALUE:
            return False
        src = action.source
        if src in cfg.ingredients:
            return cfg.ingredients[src].storage == actor
        if src in _pick_sources(cfg):
            return get_value(cfg, state, src) != NONE_VALUE
        return False
    if verb == "place":
        if held == NONE_VALUE:
            return False
        tgt = action.target
        if tgt == "assembly_board":
            return _first_free_slot(cfg, state) is not None
        if tgt == "cutting_board":
            return get_value(cfg, state, tgt) == NONE_VALUE and not cfg.is_product(held)
        if tgt == "cooking_pot":
            return get_value(cfg, state, tgt) == NONE_VALUE and cfg.next_proc(held) == "cooked"
        if tgt == "plate":
            return get_value(cfg, state, tgt) == NONE_VALUE and cfg.is_product(held)
        if tgt == "trash":
            return get_value(cfg, state, tgt) == NONE_VALUE
        return False
    if verb == "cut":
        item = get_value(cfg, state, "cutting_board")
        return item != NONE_VALUE and cfg.next_proc(item) == "cut"
    if verb == "cook":
        item = get_value(cfg, state, "cooking_pot")
        return item != NONE_VALUE and cfg.next_proc(item) == "cooked"
    if verb == "shape":
        if actor != "human":
            return False
        return held != NONE_VALUE and cfg.next_proc(held) == "shaped"
    if verb == "assemble":
        if action.source not in cfg.recipes:
            return False
        return _assemblable(cfg, state, action.source)
    if verb == "serve":
        return get_value(cfg, state, "plate") != NONE_VALUE
    if verb == "trash":
        return get_value(cfg, state, "trash") != NONE_VALUE
    return False


def apply_single(cfg: TaskConfig, state: WorldState, action: TaskAction) -> tuple[WorldState, dict]:
    """Apply one agent action; illegal actions degrade to noop."""
    events: dict = {}
    if not is_legal(cfg, state, action):
        events["degraded"] = True
        return state, events
    actor, verb = action.actor, action.verb
    hand = HAND_OF[actor]
    held = get_value(cfg, state, hand)
    if verb == "noop":
        return state, events
    if verb == "pick":
        src = action.source
        if src in cfg.ingredients:
            return with_values(cfg, state, {hand: src}), events
        item = get_value(cfg, state, src)
        return with_values(cfg, state, {hand: item, src: NONE_VALUE}), events
    if verb == "place":
        tgt = action.target
        if tgt == "assembly_board":
            tgt = _first_free_slot(cfg, state)
        return with_values(cfg, state, {tgt: held, hand: NONE_VALUE}), events
    if verb == "cut":
        item = get_value(cfg, state, "cutting_board")
        return with_values(cfg, state, {"cutting_board": item + "+cut"}), events
    if verb == "cook":
        item = get_value(cfg, state, "cooking_pot")
        return with_values(cfg, state, {"cooking_pot": item + "+cooked"}), events
    if verb == "shape":
        return with_values(cfg, state, {hand: held + "+shaped"}), events
    if verb == "assemble":
        recipe = action.source
        required = list(cfg.required_items(recipe, variant_of(cfg, state, recipe)))
        updates = {}
        for slot in cfg.assembly_slot_ids:
            item = get_value(cfg, state, slot)
            if item in required:
                required.remove(item)
                updates[slot] = NONE_VALUE
        state = with_values(cfg, state, updates)
        slot = _first_free_slot(cfg, state)
        return with_values(cfg, state, {slot: recipe}), events
    if verb == "serve":
        product = get_value(cfg, state, "plate")
        state = with_values(cfg, state, {"plate": NONE_VALUE})
        for i, order in enumerate(state.orders):
            if order.recipe_id == product:
                orders = list(state.orders)
                orders[i] = OrderSlot(None, -1, state.tick, state.tick + 1 + cfg.order_respawn_delay)
                state = replace(state, orders=tuple(orders))
                state = with_values(cfg, state, {f"order_{i}": NONE_VALUE})
                events["served"] = product
                return state, events
        events["wrong_serve"] = product
        return state, events
    if verb == "trash":
        events["trashed"] = get_value(cfg, state, "trash")
        return with_values(cfg, state, {"trash": NONE_VALUE}), events
    raise ValueError(f"unknown verb {verb}")


def step(
    cfg: TaskConfig,
    state: WorldState,
    human_action: TaskAction,
    robot_action: TaskAction,
    respawn: bool = True,
) -> tuple[WorldState, dict]:
    """One synchronous tick: human action, then robot action, then respawns.

    `respawn=False` freezes the order stream; planning rollouts use it so
    an agent cannot anticipate orders that have not been posted yet.
    """
    s1, ev_h = apply_single(cfg, state, human_action)
    s2, ev_r = apply_single(cfg, s1, robot_action)
    s3 = replace(s2, tick=state.tick + 1)
    if respawn:
        s3 = _respawn_orders(cfg, s3)
    events = {
        "human_degraded": ev_h.get("degraded", False),
        "robot_degraded": ev_r.get("degraded", False),
        "served": [e["served"] for e in (ev_h, ev_r) if "served" in e],
        "wrong_serve": [e["wrong_serve"] for e in (ev_h, ev_r) if "wrong_serve" in e],
        "trashed": [e["trashed"] for e in (ev_h, ev_r) if "trashed" in e],
    }
    return s3, events


def apply(cfg: TaskConfig, state: WorldState, human_action: TaskAction, robot_action: TaskAction) -> WorldState:
    return step(cfg, state, human_action, robot_action)[0]


def reward(
    cfg: TaskConfig,
    state: WorldState,
    human_action: TaskAction,
    robot_action: TaskAction,
    next_state: WorldState | None = None,
) -> float:
    _, events = step(cfg, state, human_action, robot_action)
    rw = cfg.rewards
    return rw.step_cost + rw.serve_reward * len(events["served"]) + rw.trash_cost * len(events["trashed"])


def legal_actions(cfg: TaskConfig, state: WorldState, actor: str) -> list[TaskAction]:
    """All actions whose preconditions hold; always includes noop."""
    acts = [TaskAction.noop(actor)]
    hand = HAND_OF[actor]
    held = get_value(cfg, state, hand)
    if held == NONE_VALUE:
        for ing in cfg.storage_items(actor):
            acts.append(TaskAction(actor, "pick", source=ing))
        for loc in _pick_sources(cfg):
            if get_value(cfg, state, loc) != NONE_VALUE:
                acts.append(TaskAction(actor, "pick", source=loc))
    else:
        for tgt in ("cutting_board", "cooking_pot", "plate", "trash", "assembly_board"):
            a = TaskAction(actor, "place", target=tgt)
            if is_legal(cfg, state, a):
                acts.append(a)
        if actor == "human" and cfg.next_proc(held) == "shaped":
            acts.append(TaskAction(actor, "shape"))
    board = get_value(cfg, state, "cutting_board")
    if board != NONE_VALUE and cfg.next_proc(board) == "cut":
        acts.append(TaskAction(actor, "cut"))
    pot = get_value(cfg, state, "cooking_pot")
    if pot != NONE_VALUE and cfg.next_proc(pot) == "cooked":
        acts.append(TaskAction(actor, "cook"))
    for recipe in cfg.recipes:
        if _assemblable(cfg, state, recipe):
            acts.append(TaskAction(actor, "assemble", source=recipe))
    if get_value(cfg, state, "plate") != NONE_VALUE:
        acts.append(TaskAction(actor, "serve"))
    if get_value(cfg, state, "trash") != NONE_VALUE:
        acts.append(TaskAction(actor, "trash"))
    return acts


# ---------------------------------------------------------------------------
# plan analysis: remaining work decomposition


@dataclass
class PlanAnalysis:
    length: int
    actions: dict  # actor -> list[TaskAction], candidate plan-reducing actions
    # suppressed-by-focus actions, usable only when `actions` yields nothing
    fallback: dict = field(default_factory=lambda: {"human": [], "robot": []})
    free_slots: int = 0
    focus_needs: int = 0
    focus_recipe: str | None = None
    focus_storage_needs: tuple = ()


_HANDS = ("human_hand", "robot_hand")


def _route(cfg: TaskConfig, state: WorldState, loc: str, item: str, req_item: str) -> tuple[int, list[tuple[str, TaskAction, bool]]]:
    """Actions to finish processing `item` at `loc` into `req_item` on an
    assembly slot.  Returns (count, [(eligible_actors, first_action,
    terminal)]); only the first pending action is reported.  `terminal`
    marks actions that put the item into a hand whose only remaining move
    is onto the assembly board (including the board move itself); the
    planner suppresses those for all but one order at a time.

    Costs assume stations are free (a relaxation), but a pick whose next
    move targets an occupied station is not suggested as a first action:
    picking such an item can deadlock both hands behind the station."""
    req_procs = cfg.item_procs(req_item)
    done = cfg.item_procs(item)
    remaining = req_procs[len(done):]
    cur = loc
    cost = 0
    firsts: list[tuple[str, TaskAction, bool]] = []

    def note(actors: str, action: TaskAction, terminal: bool = False):
        if not firsts:
            firsts.append((actors, action, terminal))

    for pi, proc in enumerate(remaining):
        last = pi == len(remaining) - 1
        if proc == "shaped":
            # shaping happens in the human's hand; if it is the last step
            # the shaped item heads straight for the board from there
            if cur == "human_hand":
                note("human", TaskAction("human", "shape"), terminal=last)
                cost += 1
            elif cur == "robot_hand":
                note("robot", TaskAction("robot", "place", target="cutting_board"))
                cost += 3
            else:
                if get_value(cfg, state, "human_hand") == NONE_VALUE:
                    note("human", TaskAction("human", "pick", source=cur), terminal=last)
                cost += 2
            cur = "human_hand"
        else:
            station = PROCESS_STATIONS[proc]
            verb = PROCESS_VERB[proc]
            if cur == station:
                note("both", TaskAction("human", verb))
                cost += 1
            elif cur in _HANDS:
                actor = "human" if cur == "human_hand" else "robot"
                note(actor, TaskAction(actor, "place", target=station))
                cost += 2
            else:
                if get_value(cfg, state, station) == NONE_VALUE:
                    note("both", TaskAction("human", "pick", source=cur))
                cost += 3
            cur = station
    if cur in cfg.assembly_slot_ids:
        pass
    elif cur in _HANDS:
        actor = "human" if cur == "human_hand" else "robot"
        note(actor, TaskAction(actor, "place", target="assembly_board"), terminal=True)
        cost += 1
    else:
        note("both", TaskAction("human", "pick", source=cur), terminal=True)
        cost += 2
    return cost, firsts


def _compatible(cfg: TaskConfig, item: str, req_item: str) -> bool:
    if cfg.is_product(item):
        return False
    if cfg.item_ingredient(item) != cfg.item_ingredient(req_item):
        return False
    done = cfg.item_procs(item)
    req = cfg.item_procs(req_item)
    return done == req[: len(done)]


def state_key(cfg: TaskConfig, state: WorldState) -> tuple:
    return state.aspect_values


def _decompose(cfg: TaskConfig, state: WorldState, pool: list, order_seq: list[tuple[int, str]]):
    """One greedy assignment pass over active orders in the given sequence.

    Returns (total, per-order info dict, assigned flags). Info entries:
    (cost, prep_firsts, always_firsts, on_board, slots_needed, in_play)
    where in_play counts claimed items still off the board.
    """
    assigned = [False] * len(pool)
    total = 0
    info: dict[int, tuple] = {}
    for slot_idx, recipe in order_seq:
        req_items = cfg.required_items(recipe, variant_of(cfg, state, recipe))
        prep_firsts: list[tuple[str, TaskAction]] = []
        always_firsts: list[tuple[str, TaskAction]] = []
        on_board = 0
        # finished product already around?
        prod_idx = None
        for i, (loc, item) in enumerate(pool):
            if not assigned[i] and item == recipe:
                if prod_idx is None or pool[i][0] == "plate":
                    prod_idx = i
        if prod_idx is not None:
            loc = pool[prod_idx][0]
            assigned[prod_idx] = True
            if loc == "plate":
                cost = 1
                always_firsts.append(("both", TaskAction("human", "serve")))
            elif loc in _HANDS:
                cost = 2
                actor = "human" if loc == "human_hand" else "robot"
                always_firsts.append((actor, TaskAction(actor, "place", target="plate")))
            else:
                cost = 3
                always_firsts.append(("both", TaskAction("human", "pick", source=loc)))
            total += cost
            info[slot_idx] = (cost, prep_firsts, always_firsts, 99, 0, 0)
            continue
        all_ready = True
        order_cost = 0
        in_play = 0
        for req_item in req_items:
            best = None  # (cost, kind, idx, firsts)
            for i, (loc, item) in enumerate(pool):
                if assigned[i] or not _compatible(cfg, item, req_item):
                    continue
                cost, firsts = _route(cfg, state, loc, item, req_item)
                if best is None or cost < best[0]:
                    best = (cost, "pool", i, firsts)
            ing = cfg.item_ingredient(req_item)
            owner = cfg.ingredients[ing].storage
            s_cost, s_firsts = _route(cfg, state, HAND_OF[owner], ing, req_item)
            s_cost += 1
            # a storage pick is terminal when the raw item would head
            # straight for the board; don't suggest one whose next move
            # targets an occupied station (same deadlock risk as above)
            s_first = s_firsts[0] if s_firsts else None
            s_terminal = s_first is not None and s_first[2]
            blocked = (
                s_first is not None
                and s_first[1].verb == "place"
                and s_first[1].target in PROCESS_STATIONS.values()
                and get_value(cfg, state, s_first[1].target) != NONE_VALUE
            )
            pick_firsts = [] if blocked else [(owner, TaskAction(owner, "pick", source=ing), s_terminal, True)]
            if best is None or s_cost < best[0]:
                best = (s_cost, "storage", None, pick_firsts)
            cost, kind, idx, firsts = best
            if kind == "pool":
                assigned[idx] = True
                if pool[idx][0] in cfg.assembly_slot_ids:
                    on_board += 1
                else:
                    in_play += 1
                firsts = [f + (False,) for f in firsts]
            order_cost += cost
            if cost > 0:
                all_ready = False
                prep_firsts.extend(firsts)
        order_cost += 4  # assemble, pick product, place on plate, serve
        total += order_cost
        if all_ready:
            always_firsts.append(("both", TaskAction("human", "assemble", source=recipe)))
        slots_needed = len(req_items) - on_board
        info[slot_idx] = (order_cost, prep_firsts, always_firsts, on_board, slots_needed, in_play)
    return total, info, assigned


def analyze(cfg: TaskConfig, state: WorldState) -> PlanAnalysis:
    """Minimal remaining action count to serve all active orders and clear
    the kitchen of unneeded items, plus the next actions that reduce it."""
    key = state_key(cfg, state)
    cached = cfg.analysis_cache.get(key)
    if cached is not None:
        return cached

    pool: list[tuple[str, str]] = []
    for loc in cfg.location_aspects:
        item = get_value(cfg, state, loc)
        if item != NONE_VALUE:
            pool.append((loc, item))
    cand: dict[str, list[TaskAction]] = {"human": [], "robot": []}
    fallback: dict[str, list[TaskAction]] = {"human": [], "robot": []}

    def add(actors: str, action: TaskAction, into=None):
        bucket = cand if into is None else into
        if actors in ("human", "both"):
            a = TaskAction("human", action.verb, action.source, action.target)
            if a not in bucket["human"]:
                bucket["human"].append(a)
        if actors in ("robot", "both"):
            a = TaskAction("robot", action.verb, action.source, action.target)
            if a not in bucket["robot"]:
                bucket["robot"].append(a)

    active = [(i, o.recipe_id) for i, o in enumerate(state.orders) if o.recipe_id is not None]

    # Only the "focus" order may route items onto the assembly board: with a
    # single order's items on the board at a time an assemble always frees
    # enough slots, so board capacity cannot deadlock the kitchen.  Each
    # order is scored independently (most of its items already on the
    # board, then least remaining work), which keeps the choice stable
    # across ticks even when orders share item types; the pool is then
    # assigned with the focus served first.
    focus = None
    if active:
        scores = {}
        for k, recipe in active:
            _c, k_info, _a = _decompose(cfg, state, pool, [(k, recipe)])
            scores[k] = (-k_info[k][3] if k_info[k][3] < 99 else -99, k_info[k][0])
        focus = min((k for k, _ in active), key=lambda k: scores[k])
        order_seq = [e for e in active if e[0] == focus] + [e for e in active if e[0] != focus]
        total, info, assigned = _decompose(cfg, state, pool, order_seq)
    else:
        total, info, assigned = _decompose(cfg, state, pool, active)

    free_slots = sum(1 for slot in cfg.assembly_slot_ids if get_value(cfg, state, slot) == NONE_VALUE)
    focus_needs = info[focus][4] if focus is not None else 0
    focus_storage_needs: list[str] = []
    if focus is not None:
        for actors, action, terminal, new in info[focus][1]:
            if new and action.verb == "pick":
                focus_storage_needs.append(action.source)
    # orders are worked strictly one at a time: only the focus order's
    # prep is suggested (items within it still progress in parallel), so
    # board slots, stations and hands can never be split across orders
    # into a mutual wedge.  Non-focus prep is kept as fallback for
    # policies that have nothing else to do.
    for k, _recipe in active:
        cost, prep_firsts, always_firsts, _, _, _ = info[k]
        for actors, action in always_firsts:
            add(actors, action)
        for actors, action, terminal, new in prep_firsts:
            if k == focus:
                add(actors, action)
            else:
                add(actors, action, into=fallback)

    # unneeded items must be trashed
    for i, (loc, item) in enumerate(pool):
        if assigned[i]:
            continue
        if loc == "trash":
            total += 1
            add("both", TaskAction("human", "trash"))
        elif loc in _HANDS:
            total += 2
            actor = "human" if loc == "human_hand" else "robot"
            add(actor, TaskAction(actor, "place", target="trash"))
        else:
            total += 3
            add("both", TaskAction("human", "pick", source=loc))

    focus_recipe = None
    if focus is not None:
        focus_recipe = dict(active)[focus]
    result = PlanAnalysis(
        total, cand, fallback, free_slots, focus_needs, focus_recipe, tuple(focus_storage_needs)
    )
    if len(cfg.analysis_cache) > 500_000:
        cfg.analysis_cache.clear()
    cfg.analysis_cache[key] = result
    return result


def remaining_plan_length(cfg: TaskConfig, state: WorldState) -> int:
    """Minimal task actions (both agents combined) to serve all active
    orders and leave no unneeded items behind."""
    return analyze(cfg, state).length


def optimal_actions(cfg: TaskConfig, state: WorldState, actor: str, verified: bool = False) -> list[TaskAction]:
    """Candidate next actions for `actor` that reduce the remaining plan.

    With ``verified=True`` each candidate is checked to be legal and to
    reduce ``remaining_plan_length`` by exactly 1.  If no main candidate
    survives, suppressed-by-focus fallbacks are tried under the same
    check; a fallback move onto the board must additionally leave the
    kitchen live (an assemble available, or enough free slots for the
    focus order) so it cannot wedge the board.
    """
    base = analyze(cfg, state)
    out = []
    for action in base.actions[actor]:
        if not is_legal(cfg, state, action):
            continue
        if verified:
            nxt, _ = apply_single(cfg, state, action)
            if analyze(cfg, nxt).length != base.length - 1:
                continue
        out.append(action)
    return out


def unstick_action(cfg: TaskConfig, state: WorldState, actor: str, depth: int = 3) -> TaskAction | None:
    """Escape hatch for an actor with no plan-reducing action.

    The one-step oracle suppresses moves that could overfill the assembly
    board, which can leave an actor temporarily stuck (e.g. holding an
    item whose drop-off is gated).  This searches the actor's own action
    sequences up to `depth` steps for one that strictly lowers the
    remaining plan, and returns its first action; ties prefer shorter
    sequences and earlier actions in `legal_actions` order.
    """
    memo_key = ("unstick", state_key(cfg, state), actor, depth)
    cached = cfg.analysis_cache.get(memo_key)
    if cached is not None or memo_key in cfg.analysis_cache:
        return cached
    result = _unstick_search(cfg, state, actor, depth)
    cfg.analysis_cache[memo_key] = result
    return result


def _unstick_search(cfg: TaskConfig, state: WorldState, actor: str, depth: int) -> TaskAction | None:
    base_an = analyze(cfg, state)
    base = base_an.length
    storage = set(cfg.storage_items("human") + cfg.storage_items("robot"))
    focus_ings = set(base_an.focus_storage_needs)
    frontier = [(state, None)]
    seen = {state_key(cfg, state)}
    for _ in range(depth):
        nxt_frontier = []
        for st, first in frontier:
            for action in legal_actions(cfg, st, actor):
                if action.verb in ("noop", "say"):
                    continue
                if action.verb == "pick" and action.source in storage and action.source not in focus_ings:
                    continue  # only the focus order may start new items
                ns, _ev = apply_single(cfg, st, action)
                k = state_key(cfg, ns)
                if k in seen:
                    continue
                seen.add(k)
                if action.verb == "place" and action.target == "assembly_board":
                    an = analyze(cfg, ns)
                    live = an.free_slots >= an.focus_needs or any(
                        x.verb == "assemble" for acts in an.actions.values() for x in acts
                    )
                    if not live:
                        continue
                f = first if first is not None else action
                if analyze(cfg, ns).length < base:
                    return f
                nxt_frontier.append((ns, f))
        frontier = nxt_frontier
    return None


# ---------------------------------------------------------------------------
# serialization


def state_to_json(cfg: TaskConfig, state: WorldState) -> dict:
    return {
        "aspects": {a: state.aspect_values[i] for i, a in enumerate(cfg.aspects)},
        "orders": [
            [o.recipe_id, o.order_id, o.created_tick, o.respawn_at] for o in state.orders
        ],
        "tick": state.tick,
        "order_seed": state.order_seed,
        "orders_spawned": state.orders_spawned,
    }


def state_from_json(cfg: TaskConfig, d: dict) -> WorldState:
    values = tuple(d["aspects"][a] for a in cfg.aspects)
    orders = tuple(OrderSlot(o[0], o[1], o[2], o[3]) for o in d["orders"])
    return WorldState(values, orders, d["tick"], d["order_seed"], d["orders_spawned"])
