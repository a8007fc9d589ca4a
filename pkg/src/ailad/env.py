"""Turn-based squad tactics on a small grid.

Three heroes (shielder, healer, empowerer) face 2-4 scripted enemies for at
most ``max_turns`` turns. The hero side is driven one micro-action at a time
through an explicit active-unit cursor: each hero may move once, shoot once,
stab once and use its super before ending its turn. Shooting locks movement
for the rest of the turn. When the last living hero ends its turn the enemy
phase is resolved internally by :func:`scripted_enemy_policy`.

Unit stats are not published anywhere; the numbers in ``HERO_STATS`` and
``ENEMY_STATS`` are this package's own defaults.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

# --------------------------------------------------------------------------
# Defaults table (invented stats)
# --------------------------------------------------------------------------

HERO_CLASSES = ("shielder", "healer", "empowerer")

HERO_STATS = {
    "shielder": dict(max_hp=12, move_range=2, attack_range=3, attack_damage=2),
    "healer": dict(max_hp=9, move_range=3, attack_range=4, attack_damage=2),
    "empowerer": dict(max_hp=10, move_range=3, attack_range=4, attack_damage=2),
}
ENEMY_STATS = dict(max_hp=7, move_range=2, attack_range=3, attack_damage=1)

STAB_DAMAGE = {"hero": 3, "enemy": 2}
EMPOWER_BONUS = 2
HEAL_AMOUNT = 3
SUPER_COOLDOWN = 3  # turns before a used super is available again
COVER_REDUCTION = 1  # shot damage reduction when the target hugs cover
COVER_SHOT_RANGE = 2  # a unit hugging cover can only be shot from this close

GRID_W = 12
GRID_H = 12
MAX_TURNS = 10
N_HEROES = 3
MAX_ENEMIES = 4
N_COVERS = 14

# --------------------------------------------------------------------------
# Action catalog
# --------------------------------------------------------------------------

MAX_MOVE = 3
MOVE_OFFSETS: tuple[tuple[int, int], ...] = tuple(
    (dx, dy)
    for dx in range(-MAX_MOVE, MAX_MOVE + 1)
    for dy in range(-MAX_MOVE, MAX_MOVE + 1)
    if 0 < abs(dx) + abs(dy) <= MAX_MOVE
)
N_MOVES = len(MOVE_OFFSETS)  # 24
SHOOT0 = N_MOVES
STAB0 = SHOOT0 + MAX_ENEMIES
SUPER = STAB0 + MAX_ENEMIES
END_TURN = SUPER + 1
N_ACTIONS = END_TURN + 1  # 34

N_CHANNELS = 4  # hero, enemy, cover, empty


class IllegalAction(RuntimeError):
    """Raised when a masked action is submitted to :func:`step`."""


def action_name(a: int) -> str:
    if a < N_MOVES:
        return f"move{MOVE_OFFSETS[a]}"
    if a < STAB0:
        return f"shoot[{a - SHOOT0}]"
    if a < SUPER:
        return f"stab[{a - STAB0}]"
    return "super" if a == SUPER else "end"


# --------------------------------------------------------------------------
# Domain types
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class LevelSpec:
    grid_width: int
    grid_height: int
    cover_cells: tuple[tuple[int, int], ...]
    hero_spawns: tuple[tuple[int, int], ...]
    enemy_spawns: tuple[tuple[int, int], ...]
    enemy_count: int
    max_turns: int = MAX_TURNS
    rng_seed: int = 0
    index: int = 0

    def validate(self) -> None:
        cells = list(self.cover_cells) + list(self.hero_spawns) + list(self.enemy_spawns)
        if len(set(cells)) != len(cells):
            raise ValueError("spawns and covers must be distinct cells")
        for x, y in cells:
            if not (0 <= x < self.grid_width and 0 <= y < self.grid_height):
                raise ValueError(f"cell {(x, y)} out of bounds")
        if len(self.hero_spawns) != N_HEROES:
            raise ValueError("exactly 3 hero spawns required")
        if not 2 <= self.enemy_count <= MAX_ENEMIES:
            raise ValueError("enemy_count must be in [2, 4]")
        if len(self.enemy_spawns) != self.enemy_count:
            raise ValueError("one enemy spawn per enemy")
        if self.max_turns < 1:
            raise ValueError("max_turns must be >= 1")

    def to_text(self) -> str:
        def cells(cs):
            return " ".join(f"{x},{y}" for x, y in cs)

        return "\n".join([
            "levelspec v1",
            f"index {self.index}",
            f"grid {self.grid_width} {self.grid_height}",
            f"max_turns {self.max_turns}",
            f"rng_seed {self.rng_seed}",
            f"enemy_count {self.enemy_count}",
            f"covers {cells(self.cover_cells)}",
            f"heroes {cells(self.hero_spawns)}",
            f"enemies {cells(self.enemy_spawns)}",
        ]) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "LevelSpec":
        lines = text.strip().splitlines()
        if not lines or lines[0].strip() != "levelspec v1":
            raise ValueError("not a levelspec v1 document")
        kv = {}
        for line in lines[1:]:
            key, _, rest = line.partition(" ")
            kv[key] = rest.strip()

        def cells(s):
            return tuple(tuple(int(v) for v in c.split(",")) for c in s.split())

        w, h = (int(v) for v in kv["grid"].split())
        return cls(
            grid_width=w,
            grid_height=h,
            cover_cells=cells(kv["covers"]),
            hero_spawns=cells(kv["heroes"]),
            enemy_spawns=cells(kv["enemies"]),
            enemy_count=int(kv["enemy_count"]),
            max_turns=int(kv["max_turns"]),
            rng_seed=int(kv["rng_seed"]),
            index=int(kv["index"]),
        )


@dataclass
class UnitState:
    id: int
    team: str
    hero_class: Optional[str]
    position: tuple[int, int]
    hp: int
    max_hp: int
    move_range: int
    attack_range: int
    attack_damage: int
    has_shot_this_turn: bool = False
    has_stabbed_this_turn: bool = False
    has_moved_lock: bool = False
    has_moved: bool = False
    super_available: bool = False
    super_cooldown: int = 0
    empowered: bool = False
    shielded: bool = False

    @property
    def alive(self) -> bool:
        return self.hp > 0

    def new_turn(self) -> None:
        self.has_shot_this_turn = False
        self.has_stabbed_this_turn = False
        self.has_moved_lock = False
        self.has_moved = False


COUNTERS = (
    "shots_by_heroes",
    "stabs_by_heroes",
    "shots_taken",
    "stabs_taken",
    "shields_used",
    "heals_used",
    "empowered_shots",
)


@dataclass
class EventLog:
    shots_by_heroes: int = 0
    stabs_by_heroes: int = 0
    shots_taken: int = 0
    stabs_taken: int = 0
    shields_used: int = 0
    heals_used: int = 0
    empowered_shots: int = 0
    # (turn, {unit_id: (x, y)}) for units alive at the end of that turn
    snapshots: list = field(default_factory=list)
    # (turn, unit_id, team, delta, cause); negative delta is damage
    hp_ledger: list = field(default_factory=list)
    max_hp: dict = field(default_factory=dict)
    final_hp: dict = field(default_factory=dict)
    teams: dict = field(default_factory=dict)
    outcome: Optional[str] = None
    turns_played: int = 0
    max_turns: int = MAX_TURNS

    def counters(self) -> dict:
        return {k: getattr(self, k) for k in COUNTERS}

    def damage_to(self, team: str) -> int:
        return -sum(d for _, _, t, d, c in self.hp_ledger if t == team and d < 0)

    def healing_to(self, team: str) -> int:
        return sum(d for _, _, t, d, c in self.hp_ledger if t == team and d > 0)

    def to_text(self) -> str:
        out = ["eventlog v1"]
        out += [f"counter {k} {v}" for k, v in self.counters().items()]
        out.append(f"outcome {self.outcome}")
        out.append(f"turns_played {self.turns_played}")
        out.append(f"max_turns {self.max_turns}")
        for uid in sorted(self.max_hp):
            out.append(f"unit {uid} {self.teams[uid]} {self.max_hp[uid]} {self.final_hp.get(uid, 0)}")
        for turn, pos in self.snapshots:
            cells = " ".join(f"{uid}:{x},{y}" for uid, (x, y) in sorted(pos.items()))
            out.append(f"snapshot {turn} {cells}".rstrip())
        for turn, uid, team, delta, cause in self.hp_ledger:
            out.append(f"hp {turn} {uid} {team} {delta} {cause}")
        return "\n".join(out) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "EventLog":
        lines = text.strip().splitlines()
        if not lines or lines[0].strip() != "eventlog v1":
            raise ValueError("not an eventlog v1 document")
        log = cls()
        for line in lines[1:]:
            parts = line.split()
            tag = parts[0]
            if tag == "counter":
                setattr(log, parts[1], int(parts[2]))
            elif tag == "outcome":
                log.outcome = None if parts[1] == "None" else parts[1]
            elif tag == "turns_played":
                log.turns_played = int(parts[1])
            elif tag == "max_turns":
                log.max_turns = int(parts[1])
            elif tag == "unit":
                uid = int(parts[1])
                log.teams[uid] = parts[2]
                log.max_hp[uid] = int(parts[3])
                log.final_hp[uid] = int(parts[4])
            elif tag == "snapshot":
                pos = {}
                for item in parts[2:]:
                    uid, _, xy = item.partition(":")
                    x, y = xy.split(",")
                    pos[int(uid)] = (int(x), int(y))
                log.snapshots.append((int(parts[1]), pos))
            elif tag == "hp":
                log.hp_ledger.append((int(parts[1]), int(parts[2]), parts[3], int(parts[4]), parts[5]))
            else:
                raise ValueError(f"unknown eventlog line {line!r}")
        return log


@dataclass
class Observation:
    grid_onehot: np.ndarray
    scalar_vector: np.ndarray

    @property
    def turns_remaining(self) -> float:
        return float(self.scalar_vector[0])

    def flat(self) -> np.ndarray:
        return np.concatenate([self.grid_onehot, self.scalar_vector])


@dataclass
class BattleState:
    level: LevelSpec
    units: list
    turn_number: int = 1
    phase: str = "hero_phase"
    active_unit_cursor: int = 0
    rng: np.random.Generator = None
    log: EventLog = field(default_factory=EventLog)
    done: bool = False
    cover_set: frozenset = frozenset()

    @property
    def heroes(self) -> list:
        return self.units[:N_HEROES]

    @property
    def enemies(self) -> list:
        return self.units[N_HEROES:]

    @property
    def active(self) -> UnitState:
        return self.units[self.active_unit_cursor]

    def copy(self) -> "BattleState":
        return copy.deepcopy(self)


# --------------------------------------------------------------------------
# Levels
# --------------------------------------------------------------------------


def generate_level(index: int, seed: int, width: int = GRID_W, height: int = GRID_H,
                   max_turns: int = MAX_TURNS) -> LevelSpec:
    """Deterministic procedural level. Heroes spawn on the left third, enemies on the right."""
    if index < 0:
        raise ValueError("level index must be >= 0")
    rng = np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, int(index)])
    enemy_count = int(rng.integers(2, MAX_ENEMIES + 1))
    third = max(1, width // 3)

    def pick(cols, n, taken):
        cells = [(x, y) for x in cols for y in range(height) if (x, y) not in taken]
        idx = rng.choice(len(cells), size=n, replace=False)
        return [cells[i] for i in sorted(idx)]

    taken: set = set()
    heroes = pick(range(0, third), N_HEROES, taken)
    taken.update(heroes)
    enemies = pick(range(width - third, width), enemy_count, taken)
    taken.update(enemies)
    covers = pick(range(0, width), min(N_COVERS, width * height - len(taken)), taken)
    spec = LevelSpec(
        grid_width=width,
        grid_height=height,
        cover_cells=tuple(covers),
        hero_spawns=tuple(heroes),
        enemy_spawns=tuple(enemies),
        enemy_count=enemy_count,
        max_turns=max_turns,
        rng_seed=int(seed),
        index=int(index),
    )
    spec.validate()
    return spec


# --------------------------------------------------------------------------
# Core rules
# --------------------------------------------------------------------------


def _manhattan(a, b) -> int:
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


def _opponents(state: BattleState, unit: UnitState) -> list:
    return state.enemies if unit.team == "hero" else state.heroes


def _adjacent_to_cover(state: BattleState, pos) -> bool:
    x, y = pos
    cs = state.cover_set
    return (x + 1, y) in cs or (x - 1, y) in cs or (x, y + 1) in cs or (x, y - 1) in cs


def legal_actions(state: BattleState) -> np.ndarray:
    """Boolean mask over the action catalog for the active unit."""
    mask = np.zeros(N_ACTIONS, dtype=bool)
    if state.done:
        return mask
    mask[END_TURN] = True
    u = state.active
    if not u.alive:
        return mask
    lvl = state.level
    if not u.has_moved and not u.has_moved_lock:
        occupied = {v.position for v in state.units if v.alive}
        ux, uy = u.position
        for i, (dx, dy) in enumerate(MOVE_OFFSETS):
            if abs(dx) + abs(dy) > u.move_range:
                continue
            nx, ny = ux + dx, uy + dy
            if 0 <= nx < lvl.grid_width and 0 <= ny < lvl.grid_height:
                cell = (nx, ny)
                if cell not in state.cover_set and cell not in occupied:
                    mask[i] = True
    for k, t in enumerate(_opponents(state, u)):
        if not t.alive:
            continue
        d = _manhattan(u.position, t.position)
        if not u.has_shot_this_turn and d <= u.attack_range:
            if d <= COVER_SHOT_RANGE or not _adjacent_to_cover(state, t.position):
                mask[SHOOT0 + k] = True
        if not u.has_stabbed_this_turn and d == 1:
            mask[STAB0 + k] = True
    if u.team == "hero" and u.super_available:
        if not (u.hero_class == "empowerer" and u.empowered):
            mask[SUPER] = True
    return mask


def _damage(state: BattleState, target: UnitState, amount: int, cause: str) -> int:
    if target.shielded:
        target.shielded = False
        amount = 0
    dealt = min(target.hp, amount)
    target.hp -= dealt
    if dealt:
        state.log.hp_ledger.append((state.turn_number, target.id, target.team, -dealt, cause))
    return dealt


def _check_done(state: BattleState) -> bool:
    if not any(e.alive for e in state.enemies):
        state.done, state.log.outcome = True, "win"
    elif not any(h.alive for h in state.heroes):
        state.done, state.log.outcome = True, "lose"
    return state.done


def _apply(state: BattleState, action: int) -> list:
    """Execute one micro-action of the active unit. Returns event names."""
    u = state.active
    log = state.log
    events = []
    if action < N_MOVES:
        dx, dy = MOVE_OFFSETS[action]
        u.position = (u.position[0] + dx, u.position[1] + dy)
        u.has_moved = True
        events.append("move")
    elif action < STAB0:
        t = _opponents(state, u)[action - SHOOT0]
        dmg = u.attack_damage
        if u.team == "hero":
            log.shots_by_heroes += 1
            events.append("shot")
            if u.empowered:
                dmg += EMPOWER_BONUS
                u.empowered = False
                log.empowered_shots += 1
                events.append("empowered_shot")
        else:
            log.shots_taken += 1
            events.append("shot_taken")
        if _adjacent_to_cover(state, t.position):
            dmg = max(1, dmg - COVER_REDUCTION)
        _damage(state, t, dmg, "shot")
        u.has_shot_this_turn = True
        u.has_moved_lock = True
    elif action < SUPER:
        t = _opponents(state, u)[action - STAB0]
        if u.team == "hero":
            log.stabs_by_heroes += 1
            events.append("stab")
        else:
            log.stabs_taken += 1
            events.append("stab_taken")
        _damage(state, t, STAB_DAMAGE[u.team], "stab")
        u.has_stabbed_this_turn = True
    elif action == SUPER:
        if u.hero_class == "shielder":
            for h in state.heroes:
                if h.alive:
                    h.shielded = True
            log.shields_used += 1
            events.append("shield")
        elif u.hero_class == "healer":
            for h in state.heroes:
                if h.alive:
                    gain = min(HEAL_AMOUNT, h.max_hp - h.hp)
                    h.hp += gain
                    if gain:
                        log.hp_ledger.append((state.turn_number, h.id, "hero", gain, "heal"))
            log.heals_used += 1
            events.append("heal")
        else:
            u.empowered = True
            events.append("empower")
        u.super_available = False
        u.super_cooldown = SUPER_COOLDOWN
    _check_done(state)
    return events


def _snapshot(state: BattleState) -> None:
    pos = {u.id: u.position for u in state.units if u.alive}
    state.log.snapshots.append((state.turn_number, pos))


def _finish(state: BattleState) -> None:
    log = state.log
    log.turns_played = state.turn_number
    log.final_hp = {u.id: u.hp for u in state.units}


def _run_enemy_phase(state: BattleState) -> list:
    state.phase = "enemy_phase"
    events = []
    for idx in range(N_HEROES, len(state.units)):
        if state.done:
            break
        if not state.units[idx].alive:
            continue
        state.active_unit_cursor = idx
        # at most 4 micro-actions per enemy; end terminates
        for _ in range(5):
            a = scripted_enemy_policy(state, state.rng)
            if a == END_TURN:
                break
            events += _apply(state, a)
            if state.done:
                break
    return events


def _start_hero_turn(state: BattleState) -> None:
    state.phase = "hero_phase"
    for u in state.units:
        u.new_turn()
        if u.team == "hero" and u.alive:
            # shields last until the next hero phase at most
            u.shielded = False
            if not u.super_available:
                u.super_cooldown -= 1
                if u.super_cooldown <= 0:
                    u.super_available = True
                    u.super_cooldown = 0
    state.active_unit_cursor = next(i for i, h in enumerate(state.heroes) if h.alive)


def _end_unit_turn(state: BattleState) -> list:
    """Advance the cursor; resolves the enemy phase and the turn roll-over."""
    events = []
    nxt = [i for i in range(state.active_unit_cursor + 1, N_HEROES) if state.units[i].alive]
    if nxt:
        state.active_unit_cursor = nxt[0]
        return events
    events += _run_enemy_phase(state)
    if not state.done:
        _snapshot(state)
        if state.turn_number >= state.level.max_turns:
            state.done = True
            state.log.outcome = "draw"
        else:
            state.turn_number += 1
            _start_hero_turn(state)
    else:
        _snapshot(state)
    return events


def _skip_forced(state: BattleState) -> list:
    """Auto-end heroes whose only legal action is end-unit-turn."""
    events = []
    while not state.done:
        m = legal_actions(state)
        if m.sum() > 1:
            break
        events += _end_unit_turn(state)
    return events


def observe(state: BattleState) -> Observation:
    lvl = state.level
    n = lvl.grid_width * lvl.grid_height
    grid = np.zeros((N_CHANNELS, n))
    for x, y in lvl.cover_cells:
        grid[2, y * lvl.grid_width + x] = 1.0
    for u in state.units:
        if u.alive:
            x, y = u.position
            grid[0 if u.team == "hero" else 1, y * lvl.grid_width + x] = 1.0
    grid[3] = 1.0 - grid[:3].sum(axis=0)

    sc = np.zeros(N_SCALARS)
    sc[0] = lvl.max_turns - state.turn_number + 1 if not state.done else 0
    for i, u in enumerate(state.units):
        slot = i if i < N_HEROES else N_HEROES + (i - N_HEROES)
        sc[1 + slot] = u.hp / u.max_hp
    base = 1 + N_HEROES + MAX_ENEMIES
    for i, h in enumerate(state.heroes):
        sc[base + i] = float(h.super_available and h.alive)
    base += N_HEROES
    if state.phase == "hero_phase" and not state.done:
        u = state.active
        sc[base + state.active_unit_cursor] = 1.0
        f = base + N_HEROES
        sc[f] = float(u.has_moved or u.has_moved_lock)
        sc[f + 1] = float(u.has_shot_this_turn)
        sc[f + 2] = float(u.has_stabbed_this_turn)
        sc[f + 3] = float(u.empowered)
        sc[f + 4] = float(any(h.shielded for h in state.heroes))
        live = [e for e in state.enemies if e.alive]
        if live:
            d = [_manhattan(u.position, e.position) for e in live]
            near = live[int(np.argmin(d))]
            sc[f + 5] = min(d) / (lvl.grid_width + lvl.grid_height)
            sc[f + 6] = (near.position[0] - u.position[0]) / lvl.grid_width
            sc[f + 7] = (near.position[1] - u.position[1]) / lvl.grid_height
            sc[f + 8] = sum(x <= u.attack_range for x in d) / MAX_ENEMIES
            sc[f + 9] = sum(x == 1 for x in d) / MAX_ENEMIES
            sc[f + 10] = sum(x <= ENEMY_STATS["attack_range"] + ENEMY_STATS["move_range"] for x in d) / MAX_ENEMIES
        sc[f + 11] = float(_adjacent_to_cover(state, u.position))
        sc[f + 12] = u.position[0] / lvl.grid_width
        sc[f + 13] = u.position[1] / lvl.grid_height
    return Observation(grid_onehot=grid.ravel(), scalar_vector=sc)


N_SCALARS = 1 + N_HEROES + MAX_ENEMIES + N_HEROES + N_HEROES + 14


def obs_size(level: LevelSpec) -> int:
    return N_CHANNELS * level.grid_width * level.grid_height + N_SCALARS


def _make_units(level: LevelSpec) -> list:
    units = []
    for i, (cls, pos) in enumerate(zip(HERO_CLASSES, level.hero_spawns)):
        s = HERO_STATS[cls]
        units.append(UnitState(id=i, team="hero", hero_class=cls, position=pos, hp=s["max_hp"],
                               super_available=True, **s))
    for j, pos in enumerate(level.enemy_spawns):
        s = ENEMY_STATS
        units.append(UnitState(id=N_HEROES + j, team="enemy", hero_class=None, position=pos,
                               hp=s["max_hp"], **s))
    return units


def reset(level: LevelSpec) -> tuple[BattleState, Observation, np.ndarray]:
    units = _make_units(level)
    log = EventLog(max_turns=level.max_turns)
    for u in units:
        log.max_hp[u.id] = u.max_hp
        log.teams[u.id] = u.team
    state = BattleState(
        level=level,
        units=units,
        rng=np.random.default_rng(level.rng_seed),
        log=log,
        cover_set=frozenset(level.cover_cells),
    )
    _skip_forced(state)
    return state, observe(state), legal_actions(state)


def step(state: BattleState, action: int):
    """Apply one hero micro-action. Mutates ``state`` in place and returns it.

    Returns ``(state, observation, mask, done, events)`` where ``events`` is the
    list of event names produced by this call (hero and enemy side).
    """
    if state.done:
        raise IllegalAction("episode already finished")
    mask = legal_actions(state)
    action = int(action)
    if not (0 <= action < N_ACTIONS) or not mask[action]:
        raise IllegalAction(f"{action_name(action) if 0 <= action < N_ACTIONS else action} is masked")
    if action == END_TURN:
        events = _end_unit_turn(state)
    else:
        events = _apply(state, action)
    if state.done:
        if not state.log.snapshots or state.log.snapshots[-1][0] != state.turn_number:
            _snapshot(state)
    else:
        events += _skip_forced(state)
    if state.done:
        _finish(state)
    return state, observe(state), legal_actions(state), state.done, events


# --------------------------------------------------------------------------
# Scripted policies
# --------------------------------------------------------------------------


def _pick(candidates: list, rng: np.random.Generator):
    if len(candidates) == 1:
        return candidates[0]
    return candidates[int(rng.integers(len(candidates)))]


def scripted_enemy_policy(state: BattleState, rng: np.random.Generator) -> int:
    """Behavior tree: stab adjacent, else shoot nearest in range, else close in."""
    u = state.active
    mask = legal_actions(state)
    heroes = state.heroes
    stabs = [k for k in range(N_HEROES) if mask[STAB0 + k]]
    if stabs:
        low = min(heroes[k].hp for k in stabs)
        return STAB0 + _pick([k for k in stabs if heroes[k].hp == low], rng)
    shots = [k for k in range(N_HEROES) if mask[SHOOT0 + k]]
    if shots:
        d = {k: _manhattan(u.position, heroes[k].position) for k in shots}
        best = min(d.values())
        return SHOOT0 + _pick([k for k in shots if d[k] == best], rng)
    moves = np.flatnonzero(mask[:N_MOVES])
    live = [h for h in heroes if h.alive]
    if len(moves) and live:
        cur = min(_manhattan(u.position, h.position) for h in live)
        scored = []
        for a in moves:
            dx, dy = MOVE_OFFSETS[a]
            p = (u.position[0] + dx, u.position[1] + dy)
            scored.append((min(_manhattan(p, h.position) for h in live), int(a)))
        best = min(s for s, _ in scored)
        if best < cur:
            return _pick([a for s, a in scored if s == best], rng)
    return END_TURN


@dataclass(frozen=True)
class StyleParams:
    aggression: float
    super_affinity: float
    caution: float


def scripted_expert_policy(style: StyleParams, state: BattleState, rng: np.random.Generator) -> int:
    """Stochastic stand-in for a human player with a given play-style."""
    u = state.active
    mask = legal_actions(state)
    enemies = state.enemies
    live = [e for e in enemies if e.alive]

    if mask[SUPER] and style.super_affinity > 0 and rng.random() < 0.5 * style.super_affinity:
        if u.hero_class == "healer":
            useful = any(h.alive and h.hp < h.max_hp for h in state.heroes)
        elif u.hero_class == "shielder":
            reach = ENEMY_STATS["attack_range"] + ENEMY_STATS["move_range"]
            useful = any(_manhattan(h.position, e.position) <= reach
                         for h in state.heroes if h.alive for e in live)
        else:
            useful = any(_manhattan(u.position, e.position) <= u.attack_range + u.move_range for e in live)
        if useful:
            return SUPER

    stabs = [k for k in range(MAX_ENEMIES) if mask[STAB0 + k]]
    if stabs and rng.random() < style.aggression:
        return STAB0 + min(stabs, key=lambda k: (enemies[k].hp, k))

    moves = np.flatnonzero(mask[:N_MOVES])
    if len(moves) and live:
        # preferred engagement distance
        if rng.random() < style.aggression:
            want = 1 if rng.random() < style.aggression else u.attack_range
        elif rng.random() < style.caution:
            want = ENEMY_STATS["attack_range"] + ENEMY_STATS["move_range"] + 1
        else:
            want = u.attack_range

        def score(pos):
            d = min(_manhattan(pos, e.position) for e in live)
            s = -abs(d - want)
            if style.caution > 0 and _adjacent_to_cover(state, pos):
                s += style.caution
            return s

        cur = score(u.position)
        cand = []
        for a in moves:
            dx, dy = MOVE_OFFSETS[a]
            cand.append((score((u.position[0] + dx, u.position[1] + dy)) + 0.1 * rng.random(), int(a)))
        s, a = max(cand)
        if s > cur + 0.05:
            return a

    shots = [k for k in range(MAX_ENEMIES) if mask[SHOOT0 + k]]
    if shots and rng.random() < 0.25 + 0.75 * style.aggression:
        return SHOOT0 + min(shots, key=lambda k: (enemies[k].hp, k))
    return END_TURN


def play_episode(level: LevelSpec, chooser, max_steps: int = 10_000):
    """Run ``chooser(state, obs, mask) -> action`` to termination. Returns (state, n_steps)."""
    state, obs, mask = reset(level)
    n = 0
    while not state.done:
        a = chooser(state, obs, mask)
        state, obs, mask, done, _ = step(state, a)
        n += 1
        if n > max_steps:
            raise RuntimeError("episode did not terminate")
    return state, n
