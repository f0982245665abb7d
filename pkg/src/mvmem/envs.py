"""Seeded gridworld observed through several synchronized views.

The agent starts in the top-left corner and must reach the goal in the
bottom-right corner. Walls are scattered at random; a layout is kept only
if BFS finds a path between the two corners. Every view is a flat binary
vector rendered from the same underlying state and zero-padded to a common
length so one encoder can consume all of them.

Views:
    allocentric        agent, goal and wall planes over the whole grid
    egocentric         wall and goal planes of the 5x5 window around the
                       agent; cells outside the grid read as wall
    noisy_allocentric  the allocentric planes plus a random binary plane
                       drawn from (seed, step) alone
"""

from __future__ import annotations

import hashlib
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from mvmem.errors import EpisodeFinished, InvalidSpec

ACTIONS = ("up", "down", "left", "right")
MOVES = ((-1, 0), (1, 0), (0, -1), (0, 1))
VIEW_KINDS = ("allocentric", "egocentric", "noisy_allocentric")
EGO_RADIUS = 2
MAX_ATTEMPTS = 100


@dataclass(frozen=True)
class GridSpec:
    height: int = 11
    width: int = 11
    wall_density: float = 0.15
    goal_reward: float = 1.0
    step_penalty: float = 0.001
    max_steps: int = 200
    reward_mode: str = "sparse"
    view_set: tuple = VIEW_KINDS
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "view_set", tuple(self.view_set))
        if self.height < 2 or self.width < 2:
            raise InvalidSpec(f"grid must be at least 2x2, got {self.height}x{self.width}")
        if not 0.0 <= self.wall_density <= 0.3:
            raise InvalidSpec(f"wall_density must lie in [0, 0.3], got {self.wall_density}")
        if self.max_steps < 1:
            raise InvalidSpec(f"max_steps must be >= 1, got {self.max_steps}")
        if self.reward_mode not in ("dense", "sparse"):
            raise InvalidSpec(f"reward_mode must be dense or sparse, got {self.reward_mode!r}")
        if not self.view_set:
            raise InvalidSpec("view_set is empty")
        for v in self.view_set:
            if v not in VIEW_KINDS:
                raise InvalidSpec(f"unknown view {v!r}; choose from {VIEW_KINDS}")

    @property
    def num_views(self):
        return len(self.view_set)

    @property
    def input_dim(self):
        return max(view_length(v, self.height, self.width) for v in self.view_set)


def view_length(kind, height, width):
    cells = height * width
    if kind == "allocentric":
        return 3 * cells
    if kind == "egocentric":
        return 2 * (2 * EGO_RADIUS + 1) ** 2
    if kind == "noisy_allocentric":
        return 4 * cells
    raise InvalidSpec(f"unknown view {kind!r}")


def bfs_distances(walls, source):
    """Shortest-path step counts from ``source`` to every cell; -1 where unreachable."""
    h, w = walls.shape
    dist = np.full((h, w), -1, dtype=np.int64)
    dist[source] = 0
    queue = deque([source])
    while queue:
        r, c = queue.popleft()
        for dr, dc in MOVES:
            nr, nc = r + dr, c + dc
            if 0 <= nr < h and 0 <= nc < w and not walls[nr, nc] and dist[nr, nc] < 0:
                dist[nr, nc] = dist[r, c] + 1
                queue.append((nr, nc))
    return dist


def generate_layout(spec):
    """Wall mask [H, W] for ``spec``, regenerated until the goal is reachable."""
    rng = np.random.default_rng(spec.seed)
    start, goal = (0, 0), (spec.height - 1, spec.width - 1)
    for _ in range(MAX_ATTEMPTS):
        walls = rng.random((spec.height, spec.width)) < spec.wall_density
        walls[start] = walls[goal] = False
        if bfs_distances(walls, start)[goal] >= 0:
            return walls
    raise InvalidSpec(f"no reachable layout after {MAX_ATTEMPTS} attempts (seed {spec.seed})")


@dataclass
class StepResult:
    obs: np.ndarray
    extrinsic_reward: float
    done: bool
    info: dict = field(default_factory=dict)


class MultiViewGrid:
    """``noise_seed`` (default: the layout seed) drives only the noise plane."""

    def __init__(self, spec, noise_seed=None):
        self.spec = spec
        self.noise_seed = spec.seed if noise_seed is None else int(noise_seed)
        self.walls = generate_layout(spec)
        self.walls.setflags(write=False)
        self.start = (0, 0)
        self.goal = (spec.height - 1, spec.width - 1)
        self._clock = 0
        self.agent = self.start
        self.steps = 0
        self.done = False

    @property
    def num_views(self):
        return self.spec.num_views

    @property
    def input_dim(self):
        return self.spec.input_dim

    @property
    def num_cells(self):
        return self.spec.height * self.spec.width

    def cell_index(self):
        return self.agent[0] * self.spec.width + self.agent[1]

    def reset(self):
        self.agent = self.start
        self.steps = 0
        self.done = False
        return self.render_views()

    def step(self, action):
        if self.done:
            raise EpisodeFinished("episode is over; call reset()")
        action = int(action)
        if not 0 <= action < len(MOVES):
            raise ValueError(f"action must be in [0, {len(MOVES)}), got {action}")
        dr, dc = MOVES[action]
        r, c = self.agent[0] + dr, self.agent[1] + dc
        if 0 <= r < self.spec.height and 0 <= c < self.spec.width and not self.walls[r, c]:
            self.agent = (r, c)
        self.steps += 1
        self._clock += 1
        at_goal = self.agent == self.goal
        if at_goal:
            reward = self.spec.goal_reward
        elif self.spec.reward_mode == "dense":
            reward = -self.spec.step_penalty
        else:
            reward = 0.0
        self.done = at_goal or self.steps >= self.spec.max_steps
        info = {"steps": self.steps, "cell": self.agent, "success": at_goal}
        return StepResult(self.render_views(), float(reward), self.done, info)

    # -- rendering -------------------------------------------------------------------------

    def _planes(self):
        h, w = self.spec.height, self.spec.width
        agent = np.zeros((h, w))
        agent[self.agent] = 1.0
        goal = np.zeros((h, w))
        goal[self.goal] = 1.0
        return [agent, goal, self.walls.astype(np.float64)]

    def _egocentric(self):
        rad = EGO_RADIUS
        size = 2 * rad + 1
        walls = np.ones((size, size))
        goal = np.zeros((size, size))
        r0, c0 = self.agent
        for i in range(size):
            for j in range(size):
                r, c = r0 + i - rad, c0 + j - rad
                if 0 <= r < self.spec.height and 0 <= c < self.spec.width:
                    walls[i, j] = float(self.walls[r, c])
                    goal[i, j] = float((r, c) == self.goal)
        return [walls, goal]

    def noise_plane(self):
        rng = np.random.default_rng([self.noise_seed, self._clock])
        return rng.integers(0, 2, size=(self.spec.height, self.spec.width)).astype(np.float64)

    def render_views(self):
        """Views as an array [N, input_dim]."""
        out = np.zeros((self.num_views, self.input_dim))
        for i, kind in enumerate(self.spec.view_set):
            if kind == "allocentric":
                planes = self._planes()
            elif kind == "egocentric":
                planes = self._egocentric()
            else:
                planes = self._planes() + [self.noise_plane()]
            flat = np.concatenate([p.ravel() for p in planes])
            out[i, : flat.size] = flat
        return out

    # -- layout helpers ----------------------------------------------------------------------

    def text_map(self):
        rows = []
        for r in range(self.spec.height):
            chars = []
            for c in range(self.spec.width):
                if (r, c) == self.start:
                    chars.append("S")
                elif (r, c) == self.goal:
                    chars.append("G")
                else:
                    chars.append("#" if self.walls[r, c] else ".")
            rows.append("".join(chars))
        return "\n".join(rows) + "\n"

    def layout_hash(self):
        return hashlib.sha256(self.text_map().encode("ascii")).hexdigest()

    def shortest_path_actions(self, source=None):
        """Actions along a BFS shortest path from ``source`` (default: agent) to the goal."""
        source = self.agent if source is None else tuple(source)
        dist = bfs_distances(self.walls, self.goal)
        if dist[source] < 0:
            raise InvalidSpec("goal unreachable from the given cell")
        actions, cell = [], source
        while cell != self.goal:
            for a, (dr, dc) in enumerate(MOVES):
                r, c = cell[0] + dr, cell[1] + dc
                if 0 <= r < self.spec.height and 0 <= c < self.spec.width and dist[r, c] == dist[cell] - 1:
                    actions.append(a)
                    cell = (r, c)
                    break
        return actions


def make_env(spec, noise_seed=None):
    return MultiViewGrid(spec, noise_seed)
