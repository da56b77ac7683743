"""Task configuration: ingredients, recipes, locations and the derived
state-aspect layout.

A configuration is data (YAML); this module turns it into the fixed
vocabulary everything else works with:

* items are strings like ``"shrimp+cooked+cut"`` (ingredient plus the
  processing applied so far, in chain order); final products use the
  recipe id (e.g. ``"shrimp_roll"``),
* every mutable piece of the kitchen is one *aspect* with a finite
  ordered value domain (location contents, order slots, recipe variants),
* world state and beliefs refer to aspect values by index into those
  domains.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import yaml

NONE_VALUE = "none"

# Station where each processing step happens. Shaping is done by hand and
# only the human can do it.
PROCESS_STATIONS = {
    "cut": "cutting_board",
    "cooked": "cooking_pot",
    "shaped": "human_hand",
}

BASE_LOCATIONS = ("cutting_board", "cooking_pot", "plate", "robot_hand", "human_hand", "trash")

HAND_OF = {"human": "human_hand", "robot": "robot_hand"}


@dataclass(frozen=True)
class Ingredient:
    id: str
    display_name: str
    chain: tuple[str, ...]  # processing steps in required order
    storage: str  # "human" | "robot"
    confusable_with: tuple[str, ...] = ()


@dataclass(frozen=True)
class RecipeStep:
    ingredient: str
    processing: tuple[str, ...]


@dataclass(frozen=True)
class Recipe:
    id: str
    steps: tuple[RecipeStep, ...]
    # variants[0] is the true recipe; the rest are believable deviations
    variants: tuple[tuple[RecipeStep, ...], ...]


@dataclass(frozen=True)
class RewardSpec:
    serve_reward: float = 10.0
    step_cost: float = -1.0
    trash_cost: float = -0.5


@dataclass
class TaskConfig:
    name: str
    ingredients: dict[str, Ingredient]
    recipes: dict[str, Recipe]
    order_slots: int
    order_respawn_delay: int
    assembly_slots: int
    rewards: RewardSpec
    conflict_locations: tuple[str, ...]

    # derived, filled in __post_init__
    items: tuple[str, ...] = field(default_factory=tuple)
    products: tuple[str, ...] = field(default_factory=tuple)
    locations: tuple[str, ...] = field(default_factory=tuple)
    assembly_slot_ids: tuple[str, ...] = field(default_factory=tuple)
    aspects: dict[str, tuple[str, ...]] = field(default_factory=dict)
    location_aspects: tuple[str, ...] = field(default_factory=tuple)
    order_aspects: tuple[str, ...] = field(default_factory=tuple)
    recipe_aspects: tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self):
        items = []
        for ing in self.ingredients.values():
            item = ing.id
            items.append(item)
            for proc in ing.chain:
                item = item + "+" + proc
                items.append(item)
        self.items = tuple(items)
        self.products = tuple(self.recipes)
        self.assembly_slot_ids = tuple(f"assembly_{i}" for i in range(self.assembly_slots))
        self.locations = BASE_LOCATIONS + self.assembly_slot_ids

        everything = (NONE_VALUE,) + self.items + self.products
        pot_domain = [NONE_VALUE]
        for ing in self.ingredients.values():
            if "cooked" in ing.chain:
                item = ing.id
                for proc in ing.chain:
                    if proc == "cooked":
                        pot_domain.extend([item, item + "+cooked"])
                        break
                    item = item + "+" + proc
        aspects: dict[str, tuple[str, ...]] = {
            "cutting_board": (NONE_VALUE,) + self.items,
            "cooking_pot": tuple(pot_domain),
            "plate": (NONE_VALUE,) + self.products,
            "robot_hand": everything,
            "human_hand": everything,
            "trash": everything,
        }
        for slot in self.assembly_slot_ids:
            aspects[slot] = everything
        self.location_aspects = tuple(aspects)
        order_domain = (NONE_VALUE,) + self.products
        order_aspects = []
        for i in range(self.order_slots):
            aid = f"order_{i}"
            aspects[aid] = order_domain
            order_aspects.append(aid)
        self.order_aspects = tuple(order_aspects)
        recipe_aspects = []
        for rid, recipe in self.recipes.items():
            aid = f"recipe_{rid}"
            aspects[aid] = ("true",) + tuple(f"alt{i}" for i in range(1, len(recipe.variants)))
            recipe_aspects.append(aid)
        self.recipe_aspects = tuple(recipe_aspects)
        self.aspects = aspects

        self._value_index = {a: {v: i for i, v in enumerate(dom)} for a, dom in aspects.items()}
        self._required_cache: dict[tuple[str, int], tuple[str, ...]] = {}
        self._partner = {}
        for ing in self.ingredients.values():
            for other in ing.confusable_with:
                if self.ingredients[other].chain != ing.chain:
                    raise ValueError(f"confusable pair {ing.id}/{other} must share a chain")
                if ing.id not in self.ingredients[other].confusable_with:
                    raise ValueError(f"confusability must be symmetric: {ing.id}/{other}")
            if ing.confusable_with:
                self._partner[ing.id] = ing.confusable_with[0]
        self.analysis_cache: dict = {}

    # -- item helpers ------------------------------------------------------

    def is_product(self, item: str) -> bool:
        return item in self.recipes

    def item_ingredient(self, item: str) -> str:
        return item.split("+", 1)[0]

    def item_procs(self, item: str) -> tuple[str, ...]:
        parts = item.split("+")
        return tuple(parts[1:])

    def next_proc(self, item: str) -> str | None:
        """Next processing step in the ingredient's chain, or None."""
        if self.is_product(item):
            return None
        parts = item.split("+")
        chain = self.ingredients[parts[0]].chain
        done = len(parts) - 1
        return chain[done] if done < len(chain) else None

    def confusable_item(self, item: str) -> str | None:
        """The look-alike of an item (same processing state), if any."""
        if self.is_product(item):
            return None
        ing = self.item_ingredient(item)
        partner = self._partner.get(ing)
        if partner is None:
            return None
        procs = self.item_procs(item)
        return "+".join((partner,) + procs)

    # -- recipe helpers ----------------------------------------------------

    def variant_steps(self, recipe_id: str, variant: int) -> tuple[RecipeStep, ...]:
        return self.recipes[recipe_id].variants[variant]

    def required_items(self, recipe_id: str, variant: int) -> tuple[str, ...]:
        """Fully processed item strings a recipe variant assembles from."""
        key = (recipe_id, variant)
        cached = self._required_cache.get(key)
        if cached is None:
            cached = tuple(
                "+".join((s.ingredient,) + s.processing) for s in self.variant_steps(recipe_id, variant)
            )
            self._required_cache[key] = cached
        return cached

    def recipe_aspect(self, recipe_id: str) -> str:
        return f"recipe_{recipe_id}"

    # -- aspect helpers ----------------------------------------------------

    def domain(self, aspect: str) -> tuple[str, ...]:
        return self.aspects[aspect]

    def value_index(self, aspect: str, value: str) -> int:
        return self._value_index[aspect][value]

    @property
    def observable_aspects(self) -> tuple[str, ...]:
        """Aspects gaze can reveal: location contents and the order display.

        Recipe variants are not observable; orders show only the final
        product, which is what makes showing a recipe informative.
        """
        return self.location_aspects + self.order_aspects

    def storage_items(self, actor: str) -> tuple[str, ...]:
        return tuple(i.id for i in self.ingredients.values() if i.storage == actor)

    def config_hash(self) -> str:
        payload = json.dumps(self.aspects, sort_keys=True) + self.name
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


def _parse_steps(raw) -> tuple[RecipeStep, ...]:
    return tuple(RecipeStep(s["ingredient"], tuple(s.get("processing", ()))) for s in raw)


def load_config(source: str | Path) -> TaskConfig:
    """Load a task configuration from a YAML file or a built-in name."""
    path = Path(source)
    if path.suffix in (".yaml", ".yml") and path.exists():
        raw = yaml.safe_load(path.read_text())
    else:
        ref = resources.files("tomcom") / "configs" / f"{source}.yaml"
        raw = yaml.safe_load(ref.read_text())

    ingredients = {}
    for ing in raw["ingredients"]:
        ingredients[ing["id"]] = Ingredient(
            id=ing["id"],
            display_name=ing.get("display_name", ing["id"]),
            chain=tuple(ing.get("chain", ())),
            storage=ing["storage"],
            confusable_with=tuple(ing.get("confusable_with", ())),
        )
    recipes = {}
    for rec in raw["recipes"]:
        true_steps = _parse_steps(rec["steps"])
        variants = (true_steps,) + tuple(_parse_steps(v["steps"]) for v in rec.get("variants", ()))
        recipes[rec["id"]] = Recipe(id=rec["id"], steps=true_steps, variants=variants)

    rw = raw.get("rewards", {})
    return TaskConfig(
        name=raw["name"],
        ingredients=ingredients,
        recipes=recipes,
        order_slots=raw.get("order_slots", 2),
        order_respawn_delay=raw.get("order_respawn_delay", 3),
        assembly_slots=raw.get("assembly_slots", 4),
        rewards=RewardSpec(
            serve_reward=float(rw.get("serve_reward", 10.0)),
            step_cost=float(rw.get("step_cost", -1.0)),
            trash_cost=float(rw.get("trash_cost", -0.5)),
        ),
        conflict_locations=tuple(raw.get("conflict_locations", ("robot_hand", "assembly_board"))),
    )
