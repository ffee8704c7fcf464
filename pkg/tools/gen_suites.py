"""Regenerate the bundled held-out evaluation suites.

Usage: python tools/gen_suites.py

Writes JSON level files under src/uedmaze/suites/{desk11,full15}/ and prints
an ASCII render plus the shortest path length of each. Every level is
validated and must be solvable.
"""

import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from uedmaze.levels import Level, render_ascii, save_level, shortest_path_length


def _bands(interior, n_rooms):
    """Room spans and dividing-wall coordinates for an n-room split of 1..interior."""
    widths = [(interior - (n_rooms - 1)) // n_rooms] * n_rooms
    for i in range((interior - (n_rooms - 1)) % n_rooms):
        widths[i] += 1
    spans, walls, x = [], [], 1
    for i, w in enumerate(widths):
        spans.append((x, x + w - 1))
        x += w
        if i < n_rooms - 1:
            walls.append(x)
            x += 1
    return spans, walls


def rooms_grid(size, n_rooms):
    """n x n rooms with one door between each adjacent pair."""
    interior = size - 2
    spans, wall_coords = _bands(interior, n_rooms)
    mids = [(lo + hi) // 2 for lo, hi in spans]
    walls = set()
    for c in wall_coords:
        for y in range(1, interior + 1):
            walls.add((c, y))
        for y in range(1, interior + 1):
            walls.add((y, c))
    for c in wall_coords:
        for m in mids:
            walls.discard((c, m))
            walls.discard((m, c))
    return Level(size, size, frozenset(walls), (1, interior), 0, (interior, 1))


def labyrinth(size):
    """Concentric square walls with alternating bottom/top openings, goal at center."""
    walls = set()
    mid = size // 2
    k = 2
    toggle = 0
    while size - 1 - k > k:
        lo, hi = k, size - 1 - k
        for x in range(lo, hi + 1):
            walls.add((x, lo))
            walls.add((x, hi))
            walls.add((lo, x))
            walls.add((hi, x))
        walls.discard((mid, hi if toggle == 0 else lo))
        toggle ^= 1
        k += 2
    return Level(size, size, frozenset(walls), (1, 1), 1, (mid, mid))


def backtracker_maze(size, seed):
    """Recursive-backtracker maze on the odd lattice; agent top-left, goal bottom-right."""
    interior = size - 2
    rng = np.random.default_rng(seed)
    cells = {(x, y) for x in range(1, interior + 1, 2) for y in range(1, interior + 1, 2)}
    open_cells = set()
    stack = [(1, 1)]
    seen = {(1, 1)}
    while stack:
        x, y = stack[-1]
        options = [
            (nx, ny)
            for nx, ny in ((x + 2, y), (x - 2, y), (x, y + 2), (x, y - 2))
            if (nx, ny) in cells and (nx, ny) not in seen
        ]
        if not options:
            stack.pop()
            continue
        nx, ny = options[rng.integers(len(options))]
        open_cells.add(((x + nx) // 2, (y + ny) // 2))
        seen.add((nx, ny))
        stack.append((nx, ny))
    walls = {
        (x, y)
        for x in range(1, interior + 1)
        for y in range(1, interior + 1)
        if (x, y) not in cells and (x, y) not in open_cells
    }
    return Level(size, size, frozenset(walls), (1, 1), 2, (interior, interior))


def small_corridor(size):
    """Central corridor with dead-end branches; goal at the end of the last one."""
    interior = size - 2
    mid = size // 2
    keep = {(x, mid) for x in range(1, interior + 1)}
    branch_xs = list(range(2, interior, 2))
    for x in branch_xs:
        keep |= {(x, y) for y in range(1, interior + 1)}
    walls = {
        (x, y)
        for x in range(1, interior + 1)
        for y in range(1, interior + 1)
        if (x, y) not in keep
    }
    return Level(size, size, frozenset(walls), (1, mid), 1, (branch_xs[-1], interior))


def simple_crossing(size):
    """Full-width wall rows with staggered gaps; a zigzag from corner to corner."""
    interior = size - 2
    walls = set()
    gap_near, gap_far = 2, interior - 1
    toggle = 1
    for row in range(3, interior, 4):
        gap = gap_far if toggle else gap_near
        for x in range(1, interior + 1):
            if x != gap:
                walls.add((x, row))
        toggle ^= 1
    return Level(size, size, frozenset(walls), (1, 1), 1, (interior, interior))


def four_rooms(size):
    """Quadrant rooms joined by four doorways."""
    interior = size - 2
    mid = size // 2
    q1 = (1 + mid) // 2
    q2 = (mid + interior + 1) // 2
    walls = set()
    for c in range(1, interior + 1):
        walls.add((mid, c))
        walls.add((c, mid))
    for door in ((mid, q1), (mid, q2), (q1, mid), (q2, mid)):
        walls.discard(door)
    return Level(size, size, frozenset(walls), (1, 1), 1, (interior, interior))


def build_suite(size, n_rooms, maze_seed):
    return {
        "sixteen_rooms": rooms_grid(size, n_rooms),
        "labyrinth": labyrinth(size),
        "maze": backtracker_maze(size, maze_seed),
        "small_corridor": small_corridor(size),
        "simple_crossing": simple_crossing(size),
        "four_rooms": four_rooms(size),
    }


def main():
    root = Path(__file__).resolve().parents[1] / "src" / "uedmaze" / "suites"
    for suite_name, size, n_rooms, maze_seed in (("desk11", 11, 3, 7), ("full15", 15, 4, 11)):
        out = root / suite_name
        out.mkdir(parents=True, exist_ok=True)
        for name, level in build_suite(size, n_rooms, maze_seed).items():
            level.validate()
            spl = shortest_path_length(level)
            if spl is None:
                raise SystemExit(f"{suite_name}/{name}: unsolvable")
            save_level(level, out / f"{name}.json")
            print(f"--- {suite_name}/{name} (shortest path {spl}) ---")
            print(render_ascii(level))
            print()


if __name__ == "__main__":
    main()
