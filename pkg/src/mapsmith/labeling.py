"""Map descriptions: template oracle, prompt construction, validation.

Every map gets ten descriptions, five long and five short.  The default
labeler is a deterministic grammar over the map's metadata (room count,
dominant tiles, a featured region with its distinctive tiles), so the
whole pipeline runs offline and reproducibly.  The same prompts that the
grammar summarizes can instead be sent to a chat-completion endpoint via
:mod:`mapsmith.llm` when credentials are configured.

Length rules are enforced per kind: long descriptions are 1 to 3
sentences and 10 to 150 words, short ones 5 to 15 words.  A small banned
word list keeps style drift out of the corpus.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import DataError
from .metadata import DIRECTION_PROSE, MapMeta
from .rng import make_rng
from .tiles import MapGrid, TILE_NAMES, Tile

LONG_SENTENCES = (1, 3)
LONG_WORDS = (10, 150)
SHORT_WORDS = (5, 15)
BANNED_WORDS = ("serene", "labyrinth")

_WORD_RE = re.compile(r"[a-z0-9]+")
_NUMBER_WORDS = (
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine",
    "ten", "eleven", "twelve",
)

# Noun forms ("toward the center"); DIRECTION_PROSE has the adjectives.
_DIRECTION_NOUN = {
    "NW": "northwest", "N": "north", "NE": "northeast",
    "W": "west", "C": "center", "E": "east",
    "SW": "southwest", "S": "south", "SE": "southeast",
}


@dataclass(frozen=True)
class DescriptionSet:
    long: tuple
    short: tuple

    def __post_init__(self):
        if len(self.long) != 5 or len(self.short) != 5:
            raise DataError("a description set is exactly 5 long and 5 short entries")
        if len(set(self.long)) != 5 or len(set(self.short)) != 5:
            raise DataError("descriptions within a set must be distinct")

    def all_entries(self):
        return list(self.long) + list(self.short)

    def violations(self) -> list:
        out = []
        for i, text in enumerate(self.long):
            out += [f"long[{i}]: {v}" for v in validate_description(text, "long")]
        for i, text in enumerate(self.short):
            out += [f"short[{i}]: {v}" for v in validate_description(text, "short")]
        return out


@dataclass(frozen=True)
class PromptBundle:
    setting: str
    response_format: str
    examples: str
    rules: str

    def __post_init__(self):
        for name in ("setting", "response_format", "examples", "rules"):
            if not getattr(self, name).strip():
                raise DataError(f"prompt section {name!r} must not be empty")

    def render(self) -> str:
        return (
            f"## Setting\n{self.setting}\n\n"
            f"## Response Format\n{self.response_format}\n\n"
            f"## Examples\n{self.examples}\n\n"
            f"## Rules\n{self.rules}\n"
        )


def words_of(text: str) -> list:
    """ASCII-alphanumeric tokens, lowercased; the word count authority."""
    return _WORD_RE.findall(text.lower())


def sentence_count(text: str) -> int:
    parts = re.split(r"[.!?]+", text)
    return sum(1 for p in parts if p.strip())


def validate_description(text: str, kind: str) -> list:
    """Return a list of rule violations; empty means the text is valid."""
    if kind not in ("long", "short"):
        raise DataError(f"unknown description kind {kind!r}")
    violations = []
    if not text.strip():
        return ["empty"]
    words = words_of(text)
    lowered = text.lower()
    for banned in BANNED_WORDS:
        if banned in lowered:
            violations.append(f"banned_word:{banned}")
    if kind == "long":
        n = sentence_count(text)
        if not LONG_SENTENCES[0] <= n <= LONG_SENTENCES[1]:
            violations.append(f"sentence_count:{n}")
        if not LONG_WORDS[0] <= len(words) <= LONG_WORDS[1]:
            violations.append(f"word_count:{len(words)}")
    else:
        if not SHORT_WORDS[0] <= len(words) <= SHORT_WORDS[1]:
            violations.append(f"word_count:{len(words)}")
    return violations


def build_pregen_prompt(few_shot: list) -> PromptBundle:
    """System prompt: task setting, output contract, examples, style rules."""
    if not few_shot:
        raise DataError("at least one few-shot example is required")
    setting = (
        "You describe small top-down terrain maps for a tile-based game. "
        "Each map is a 32x32 grid of named tiles such as ground, water, lava, "
        "fungus, and stone, organized into rooms joined by corridors."
    )
    response_format = (
        "Reply with exactly 10 numbered lines and nothing else. "
        "Lines 1-5 are long descriptions; lines 6-10 are short descriptions."
    )
    examples = "\n".join(f"- {text}" for text in few_shot)
    rules = (
        "Long descriptions are 1–3 sentences; short descriptions are 5–15 words. "
        "Describe all major map areas, including their compass direction and "
        "dominant tiles. Never repeat a description within your reply, and avoid "
        'repetitive terms like "serene" or "labyrinth".'
    )
    return PromptBundle(
        setting=setting, response_format=response_format, examples=examples, rules=rules
    )


def build_round_prompt(grid: MapGrid, meta: MapMeta) -> str:
    """Per-map user prompt: raw grid, tile dictionary, and the metadata."""
    lines = ["Here is the map as an integer grid:"]
    for row in grid.cells:
        lines.append(" ".join(str(int(v)) for v in row))
    lines.append("")
    lines.append("Tile dictionary:")
    for tile in Tile:
        lines.append(f"{tile.value}: {TILE_NAMES[tile.value]}")
    lines.append("")
    lines.append("Metadata:")
    for room in meta.rooms:
        census = ", ".join(f"{name} x{count}" for name, count in room.census)
        lines.append(f"room {room.index}: direction={room.direction}; tiles: {census}")
    for pair in meta.connected_pairs:
        a, b = pair.rooms
        lines.append(f"rooms {a} and {b} are connected by a {len(pair.path)}-cell path")
    lines.append("")
    lines.append(
        "Using the grid and metadata, generate 10 text descriptions of this map, "
        "numbered 1-10: five long (lines 1-5), then five short (lines 6-10)."
    )
    return "\n".join(lines)


def _number_word(k: int) -> str:
    return _NUMBER_WORDS[k] if 0 <= k < len(_NUMBER_WORDS) else str(k)


def _prose_census(census) -> list:
    """Tile names for prose, lowercased, rock filtered out."""
    return [name.lower() for name, _ in census if name != "None"]


def _join_names(names: list) -> str:
    if not names:
        return "bare ground"
    if len(names) == 1:
        return names[0]
    if len(names) == 2:
        return f"{names[0]} and {names[1]}"
    return ", ".join(names[:-1]) + f", and {names[-1]}"


def _quantity_phrase(share: float, rng) -> str:
    if share >= 0.30:
        options = ("dominated by", "covered in")
    elif share >= 0.10:
        options = ("marked with patches of", "broken by patches of")
    else:
        options = ("dotted with", "scattered with")
    return options[int(rng.integers(0, len(options)))]


# Adjective forms for tiles that can dominate a map's open terrain.
_TILE_ADJECTIVE = {
    "ground": "open",
    "sand": "sandy",
    "grass": "grassy",
    "water": "flooded",
    "ice": "frozen",
    "lava": "molten",
    "bog": "marshy",
    "fungus": "overgrown",
    "ashes": "scorched",
    "stone": "stony",
    "crystal": "crystalline",
    "fire": "burning",
}


def _dominant_adjective(census) -> str | None:
    """Adjective for the top open tile when it covers >= 30% of terrain."""
    filtered = [(name.lower(), count) for name, count in census if name != "None"]
    total = sum(count for _, count in filtered)
    if not filtered or total == 0:
        return None
    name, count = filtered[0]
    if count / total < 0.30:
        return None
    return _TILE_ADJECTIVE.get(name, name)


def _terrain_adjective(census) -> str:
    kinds = len(_prose_census(census))
    if kinds >= 8:
        return "diverse"
    if kinds >= 5:
        return "varied"
    if kinds >= 3:
        return "rugged"
    return "stark"


def _featured_room(meta: MapMeta, specials: list):
    """Room holding the most of the map's distinctive tiles; ties go low.

    Wall minerals never land in any room census, so an all-zero tie is
    common; the first room then stands in for its region.
    """
    special_set = set(specials)
    best, best_count = None, -1
    for room in meta.rooms:
        count = sum(k for name, k in room.census if name.lower() in special_set)
        if count > best_count:
            best, best_count = room, count
    return best, max(best_count, 0)


def template_label(meta: MapMeta, census=None, seed: int = 0) -> DescriptionSet:
    """Deterministic description grammar over extracted metadata."""
    census = meta.census if census is None else census
    rng = make_rng(seed, index=3)
    k = len(meta.rooms)
    kw = _number_word(k)
    adj = _terrain_adjective(census)
    names = _prose_census(census)
    tops = names[:2]
    top_pair = _join_names(tops)

    # The featured region talks about the map's distinctive tiles, which
    # includes wall features like stone that room censuses cannot hold.
    special = names[2:5]
    room, special_mass = _featured_room(meta, special)
    if room is not None:
        direction = DIRECTION_PROSE.get(room.direction, room.direction)
        toward = _DIRECTION_NOUN.get(room.direction, room.direction)
        if not special:
            special = _prose_census(room.census)[:2] or ["bare ground"]
        phrase = _quantity_phrase(special_mass / max(len(room.cells), 1), rng)
        special_list = _join_names(special)
    else:
        direction, toward = "central", "center"
        phrase, special_list = "reduced to", "solid rock"
        special = []

    if k == 0:
        long_forms = [
            "A sealed slab of rock with no open areas, no corridors, and nothing to walk on.",
            "Nothing here is passable. Every cell of this map is solid rock from edge to edge.",
            "This map has no rooms at all, only an unbroken field of stone and rock.",
            "An entirely closed map: no main areas, no pathways, and no open terrain anywhere.",
            "Solid rock fills the whole grid, so the map contains no walkable region to describe.",
        ]
        short_forms = [
            "No open areas, only solid rock throughout.",
            "A fully sealed map without walkable tiles.",
            "Entirely rock: no rooms or corridors anywhere.",
            "Zero areas; every single cell is closed.",
            "Closed terrain with nothing open to cross.",
        ]
        return DescriptionSet(long=tuple(long_forms), short=tuple(short_forms))

    area_word = "areas" if k != 1 else "area"
    connect = (
        " Pathways connect the open spaces."
        if meta.connected_pairs
        else ""
    )
    dom_adj = _dominant_adjective(census)
    # A map whose terrain is mostly one tile reads as one big field of it,
    # so two skeletons switch to the "vast <adjective> area" form.
    if dom_adj is not None:
        expanse_long = (
            f"A vast {dom_adj} area split into {kw} main {area_word}. Near the "
            f"{direction} edge the ground is {phrase} {special_list}.{connect}"
        )
        expanse_short = (
            f"A vast {dom_adj} area, {special_list} near the {toward}."
        )
    else:
        expanse_long = (
            f"An expanse of {top_pair} split into {kw} main {area_word}. Near the "
            f"{direction} edge the ground is {phrase} {special_list}.{connect}"
        )
        expanse_short = (
            f"Mostly {top_pair} across {kw} linked {area_word}, the {toward} stands out."
        )
    long_forms = [
        f"A {adj} terrain with {kw} main {area_word}, each featuring a combination of "
        f"{top_pair}. The {direction} region is {phrase} {special_list}.",
        f"This map divides into {kw} main {area_word} built from {top_pair}. Toward the "
        f"{toward}, the floor is {phrase} {special_list}.{connect}",
        f"Explorers will find {kw} main {area_word} here, mostly {top_pair} underfoot. "
        f"Around the {direction} region the terrain is {phrase} {special_list}.",
        expanse_long,
        f"Mostly {top_pair}, this {adj} map forms {kw} main {area_word}, and its "
        f"{direction} region is {phrase} {special_list}.",
    ]
    mentioned = list(dict.fromkeys(tops + special))[:4]
    short_forms = [
        f"{kw.capitalize()} {area_word.rstrip('s')} division across the map: {_join_names(mentioned)}.",
        f"{kw.capitalize()} main {area_word} of {top_pair}, the {toward} has {special_list}.",
        expanse_short,
        f"{kw.capitalize()} {area_word}, {top_pair} underfoot, {special_list} near the {toward}.",
        f"A {adj} map of {top_pair} with {special_list}, {kw} {area_word} total.",
    ]
    return DescriptionSet(long=tuple(long_forms), short=tuple(short_forms))


def label_records(records, mode: str = "template", llm_config=None, concurrency: int = 4):
    """Attach descriptions to map records; returns new records in order.

    Template mode is a pure loop.  LLM mode fans out to a bounded thread
    pool, one request per map, preserving input order in the output.
    """
    from .dataset import MapRecord

    out = []
    if mode == "template":
        for rec in records:
            if rec.meta is None:
                raise DataError(f"record {rec.id} has no metadata; run the analyze step first")
            meta = rec.meta if isinstance(rec.meta, MapMeta) else None
            if meta is None:
                from .metadata import meta_from_json_obj

                meta = meta_from_json_obj(rec.meta)
            described = template_label(meta, seed=rec.seed)
            out.append(
                MapRecord(
                    id=rec.id,
                    seed=rec.seed,
                    grid=rec.grid,
                    meta=rec.meta,
                    descriptions={"long": list(described.long), "short": list(described.short)},
                )
            )
        return out
    if mode == "llm":
        from .llm import label_records_llm

        return label_records_llm(records, llm_config, concurrency)
    raise DataError(f"unknown labeling mode {mode!r}")
