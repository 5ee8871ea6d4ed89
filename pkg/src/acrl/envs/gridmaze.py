"""Discrete grid maze family: partially observable navigation with keys,
doors and lava. Layouts come from plain-text fixture files; the context
places the goal (and, for keyed layouts, the key).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from ..nn import ContractViolation
from .base import Context, ContextualEnv, InfeasibleContext

# tile object ids (observation channel 0)
UNSEEN = 0
FLOOR = 1
WALL = 2
LAVA = 3
DOOR = 4
KEY = 5
GOAL = 6

# door states (observation channel 2)
DOOR_OPEN = 0
DOOR_CLOSED = 1
DOOR_LOCKED = 2

TURN_LEFT = 0
TURN_RIGHT = 1
FORWARD = 2
PICKUP = 3
TOGGLE = 4
DONE = 5
N_ACTIONS = 6

VIEW_SIZE = 7
OBS_DIM = VIEW_SIZE * VIEW_SIZE * 3

# orientation: 0=N (y decreasing), 1=E, 2=S, 3=W
DIR_VEC = {0: (0, -1), 1: (1, 0), 2: (0, 1), 3: (-1, 0)}
DIR_CHARS = "NESW"


class LayoutError(ValueError):
    """Malformed layout file; message carries line and column."""


@dataclass
class GridMazeSpec:
    width: int
    height: int
    max_steps: int
    has_key: bool
    wall_cells: frozenset
    lava_cells: frozenset
    door_cell: tuple | None
    door_color: int
    agent_start: tuple  # (x, y)
    agent_dir: int

    def base_tile(self, x, y):
        if (x, y) in self.wall_cells:
            return WALL
        if (x, y) in self.lava_cells:
            return LAVA
        if self.door_cell is not None and (x, y) == self.door_cell:
            return DOOR
        return FLOOR


def parse_layout(text, name="<layout>"):
    """Parse a layout file: a header of ``key value`` lines (width, height,
    max_steps, has_key) followed by exactly ``height`` grid rows.

    Grid characters: ``#`` wall, ``.`` floor, ``L`` lava, ``D`` door,
    ``S`` start with a direction suffix in N/E/S/W (two characters, one
    cell). Errors report line and column numbers (1-based).
    """
    lines = text.splitlines()
    header = {}
    header_keys = {"width", "height", "max_steps", "has_key"}
    i = 0
    while i < len(lines):
        line = lines[i].strip()
        if not line or line.startswith("//"):
            i += 1
            continue
        parts = line.split()
        if len(parts) == 2 and parts[0] in header_keys:
            header[parts[0]] = parts[1]
            i += 1
            continue
        break
    missing = header_keys - set(header)
    if missing:
        raise LayoutError(
            f"{name}:{i + 1}:1: missing header keys {sorted(missing)}")
    try:
        width = int(header["width"])
        height = int(header["height"])
        max_steps = int(header["max_steps"])
    except ValueError as exc:
        raise LayoutError(f"{name}:1:1: non-integer header value: {exc}")
    if header["has_key"] not in ("true", "false"):
        raise LayoutError(f"{name}:1:1: has_key must be true or false")
    has_key = header["has_key"] == "true"
    if width < 3 or height < 3 or max_steps < 1:
        raise LayoutError(f"{name}:1:1: width/height/max_steps out of range")

    walls, lava = set(), set()
    door = None
    start = None
    start_dir = None
    rows = 0
    while i < len(lines) and rows < height:
        raw = lines[i].rstrip("\n")
        lineno = i + 1
        i += 1
        if not raw.strip():
            continue
        x = 0
        col = 0
        while col < len(raw):
            ch = raw[col]
            if x >= width:
                raise LayoutError(
                    f"{name}:{lineno}:{col + 1}: row longer than width {width}")
            if ch == "#":
                walls.add((x, rows))
            elif ch == ".":
                pass
            elif ch == "L":
                lava.add((x, rows))
            elif ch == "D":
                if door is not None:
                    raise LayoutError(
                        f"{name}:{lineno}:{col + 1}: second door")
                door = (x, rows)
            elif ch == "S":
                if start is not None:
                    raise LayoutError(
                        f"{name}:{lineno}:{col + 1}: second start")
                if col + 1 >= len(raw) or raw[col + 1] not in DIR_CHARS:
                    raise LayoutError(
                        f"{name}:{lineno}:{col + 2}: start needs a "
                        "direction suffix N/E/S/W")
                start = (x, rows)
                start_dir = DIR_CHARS.index(raw[col + 1])
                col += 1
            else:
                raise LayoutError(
                    f"{name}:{lineno}:{col + 1}: unknown cell {ch!r}")
            col += 1
            x += 1
        if x != width:
            raise LayoutError(
                f"{name}:{lineno}:{x + 1}: row has {x} cells, expected {width}")
        rows += 1
    if rows != height:
        raise LayoutError(f"{name}:{i + 1}:1: expected {height} rows, got {rows}")
    if start is None:
        raise LayoutError(f"{name}:{i}:1: no start cell")
    if start in walls:
        raise LayoutError(f"{name}: start inside a wall")
    return GridMazeSpec(
        width=width, height=height, max_steps=max_steps, has_key=has_key,
        wall_cells=frozenset(walls), lava_cells=frozenset(lava),
        door_cell=door, door_color=1, agent_start=start, agent_dir=start_dir)


def load_layout(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_layout(fh.read(), name=str(path))


class GridMazeEnv(ContextualEnv):
    """MiniGrid-style contextual environment over one fixed layout."""

    def __init__(self, spec):
        self.spec = spec
        self.context_dim = 4 if spec.has_key else 2
        self.observation_dim = OBS_DIM
        self.n_actions = N_ACTIONS
        self.horizon = spec.max_steps
        self._reset_done = True
        self._done = True

    # -- context handling ---------------------------------------------------

    def context_bounds(self):
        w, h = self.spec.width - 1, self.spec.height - 1
        if self.spec.has_key:
            return (np.zeros(4), np.array([w, h, w, h], dtype=np.float64))
        return (np.zeros(2), np.array([w, h], dtype=np.float64))

    def postprocess_context(self, values):
        low, high = self.context_bounds()
        v = np.clip(np.rint(np.asarray(values, dtype=np.float64)), low, high)
        return Context(v)

    def _cells(self, context):
        v = [int(round(x)) for x in context.values]
        goal = (v[0], v[1])
        key = (v[2], v[3]) if len(v) == 4 else None
        return goal, key

    def _cell_free(self, cell):
        s = self.spec
        x, y = cell
        if not (0 <= x < s.width and 0 <= y < s.height):
            return False
        return s.base_tile(x, y) == FLOOR and cell != s.agent_start

    def is_feasible(self, context):
        if context.dim != self.context_dim:
            return False
        for v in context.values:
            if abs(v - round(v)) > 1e-6:
                return False
        goal, key = self._cells(context)
        if not self._cell_free(goal):
            return False
        if key is not None:
            if not self._cell_free(key) or key == goal:
                return False
            if not self._reachable_without_door(key):
                return False
        return True

    def _reachable_without_door(self, cell):
        """BFS from the start treating the locked door, walls and lava as
        blocked: a key behind its own door is unreachable."""
        s = self.spec
        seen = {s.agent_start}
        q = deque([s.agent_start])
        while q:
            cur = q.popleft()
            if cur == cell:
                return True
            for dx, dy in ((0, 1), (0, -1), (1, 0), (-1, 0)):
                nxt = (cur[0] + dx, cur[1] + dy)
                if nxt in seen:
                    continue
                x, y = nxt
                if not (0 <= x < s.width and 0 <= y < s.height):
                    continue
                if s.base_tile(x, y) != FLOOR:
                    continue
                seen.add(nxt)
                q.append(nxt)
        return False

    def _raw_context_sample(self, rng):
        s = self.spec
        n = self.context_dim // 2
        vals = []
        for _ in range(n):
            vals.append(rng.integers(0, s.width))
            vals.append(rng.integers(0, s.height))
        return Context(vals)

    # -- episode dynamics ---------------------------------------------------

    def reset(self, context):
        if not self.is_feasible(context):
            raise InfeasibleContext(
                f"context {context.values} fails grid feasibility "
                "(bounds/wall/lava/start/door-reachability)")
        self.goal, self.key_cell = self._cells(context)
        self.pos = self.spec.agent_start
        self.dir = self.spec.agent_dir
        self.carrying = False
        self.key_present = self.key_cell is not None
        self.door_state = (DOOR_LOCKED if self.spec.has_key else DOOR_CLOSED) \
            if self.spec.door_cell is not None else None
        self.door_bonus_given = False
        self.steps = 0
        self._done = False
        return self._observe()

    def _tile(self, x, y):
        """(object, color, state) for one world cell."""
        s = self.spec
        if not (0 <= x < s.width and 0 <= y < s.height):
            return (UNSEEN, 0, 0)
        cell = (x, y)
        base = s.base_tile(x, y)
        if base == DOOR:
            return (DOOR, s.door_color, self.door_state)
        if base != FLOOR:
            return (base, 0, 0)
        if self.key_present and cell == self.key_cell:
            return (KEY, s.door_color, 0)
        if cell == self.goal:
            return (GOAL, 0, 0)
        return (FLOOR, 0, 0)

    def _front(self):
        dx, dy = DIR_VEC[self.dir]
        return (self.pos[0] + dx, self.pos[1] + dy)

    def step(self, action):
        if self._done:
            raise ContractViolation("step on a finished episode")
        if not (0 <= int(action) < N_ACTIONS):
            raise ContractViolation(f"action {action} out of range")
        action = int(action)
        self.steps += 1
        n, h = self.steps, self.spec.max_steps
        reward = 0.0
        done = False
        if action == TURN_LEFT:
            self.dir = (self.dir - 1) % 4
        elif action == TURN_RIGHT:
            self.dir = (self.dir + 1) % 4
        elif action == FORWARD:
            fx, fy = self._front()
            obj, _, state = self._tile(fx, fy)
            if obj == LAVA:
                self.pos = (fx, fy)
                reward = -0.5
                done = True
            elif obj == DOOR and state != DOOR_OPEN:
                reward = -0.5
                done = True
            elif obj == GOAL:
                self.pos = (fx, fy)
                reward = 1.0 - 0.5 * n / h
                done = True
            elif obj in (FLOOR,) or (obj == DOOR and state == DOOR_OPEN):
                self.pos = (fx, fy)
            # wall, key, out-of-bounds: blocked, no-op
        elif action == PICKUP:
            fx, fy = self._front()
            if self.key_present and (fx, fy) == self.key_cell \
                    and not self.carrying:
                self.carrying = True
                self.key_present = False
                reward = 0.5 * (1.0 - 0.5 * n / h)
        elif action == TOGGLE:
            front = self._front()
            if self.spec.door_cell is not None and front == self.spec.door_cell:
                if self.door_state == DOOR_LOCKED:
                    if self.carrying:
                        self.door_state = DOOR_OPEN
                        if not self.door_bonus_given:
                            reward += 0.25
                            self.door_bonus_given = True
                elif self.door_state == DOOR_CLOSED:
                    self.door_state = DOOR_OPEN
                    if not self.door_bonus_given:
                        reward += 0.25
                        self.door_bonus_given = True
                else:
                    self.door_state = DOOR_CLOSED
        # DONE action: no-op, never terminates
        if n >= h:
            done = True
        self._done = done
        return self._observe(), reward, done, {"steps": n}

    # -- observation --------------------------------------------------------

    def _observe(self):
        """7x7x3 egocentric view, flattened; occluded tiles are zeroed."""
        dx, dy = DIR_VEC[self.dir]
        rx, ry = DIR_VEC[(self.dir + 1) % 4]  # right of facing
        tiles = np.zeros((VIEW_SIZE, VIEW_SIZE, 3), dtype=np.float64)
        transparent = np.zeros((VIEW_SIZE, VIEW_SIZE), dtype=bool)
        inb = np.zeros((VIEW_SIZE, VIEW_SIZE), dtype=bool)
        px, py = self.pos
        for vr in range(VIEW_SIZE):
            f = (VIEW_SIZE - 1) - vr
            for vc in range(VIEW_SIZE):
                r = vc - VIEW_SIZE // 2
                wx = px + f * dx + r * rx
                wy = py + f * dy + r * ry
                obj, color, state = self._tile(wx, wy)
                tiles[vr, vc] = (obj, color, state)
                inb[vr, vc] = obj != UNSEEN
                transparent[vr, vc] = (
                    obj not in (UNSEEN, WALL)
                    and not (obj == DOOR and state != DOOR_OPEN))
        # flood-fill visibility from the agent tile; opaque tiles are
        # visible when reached but do not propagate
        vis = np.zeros((VIEW_SIZE, VIEW_SIZE), dtype=bool)
        agent = (VIEW_SIZE - 1, VIEW_SIZE // 2)
        vis[agent] = True
        q = deque([agent])
        while q:
            r0, c0 = q.popleft()
            if not transparent[r0, c0] and (r0, c0) != agent:
                continue
            for dr in (-1, 0, 1):
                for dc in (-1, 0, 1):
                    r1, c1 = r0 + dr, c0 + dc
                    if 0 <= r1 < VIEW_SIZE and 0 <= c1 < VIEW_SIZE \
                            and not vis[r1, c1] and inb[r1, c1]:
                        vis[r1, c1] = True
                        q.append((r1, c1))
        tiles[~vis] = 0.0
        # the agent's own tile shows the floor beneath it
        tiles[agent] = (FLOOR, 0, 0)
        return tiles.reshape(-1)
