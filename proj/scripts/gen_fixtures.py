#!/usr/bin/env python3
"""Regenerates the bundled synthetic fixtures under data/fixtures/.

Each fixture is a small house: an occupancy map (PGM, 0.5 m/cell), an object
annotation file, and a hand-assigned ground-truth room map. The furnished
maps (f1..f6) contain furniture bars that split one real room into several
free-space fragments, which is exactly the over-segmentation the pipeline is
supposed to repair.
"""

import json
import os

OUT = os.path.join(os.path.dirname(__file__), "..", "data", "fixtures")

FREE, WALL, UNKNOWN = ".", "#", "?"
PGM_VALUE = {FREE: 254, WALL: 0, UNKNOWN: 205}


def blank(w, h):
    return [[WALL] * w for _ in range(h)]


def carve(grid, x0, y0, x1, y1):
    for y in range(y0, y1 + 1):
        for x in range(x0, x1 + 1):
            grid[y][x] = FREE


def fill(grid, cells):
    for x, y in cells:
        grid[y][x] = WALL


def free_cells(grid, x0, y0, x1, y1):
    return [(x, y) for y in range(y0, y1 + 1) for x in range(x0, x1 + 1)
            if grid[y][x] == FREE]


def write_pgm(path, grid, resolution=0.5):
    h, w = len(grid), len(grid[0])
    lines = ["P2", f"# resolution: {resolution}", f"{w} {h}", "255"]
    for row in grid:
        lines.append(" ".join(str(PGM_VALUE[c]) for c in row))
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def write_labels(path, w, h, rooms):
    """rooms: list of cell lists; index i gets id i+1."""
    labels = [[0] * w for _ in range(h)]
    for i, cells in enumerate(rooms):
        for x, y in cells:
            labels[y][x] = i + 1
    with open(path, "w") as f:
        f.write(f"{w} {h}\n")
        for row in labels:
            f.write(" ".join(str(v) for v in row) + "\n")


def write_objects(path, objects):
    with open(path, "w") as f:
        json.dump({"objects": [{"name": n, "x": x, "y": y} for n, x, y in objects]},
                  f, indent=2)
        f.write("\n")


def env_a():
    """Three-room flat: bedroom, living room, bathroom. No over-segmentation;
    this is the golden-prompt and determinism fixture."""
    w, h = 23, 11
    g = blank(w, h)
    carve(g, 1, 1, 8, 9)     # bedroom
    carve(g, 10, 1, 15, 9)   # living room
    carve(g, 17, 1, 21, 9)   # bathroom
    carve(g, 9, 4, 9, 5)     # door bedroom-living
    carve(g, 16, 4, 16, 5)   # door living-bath
    write_pgm(f"{OUT}/env_a.pgm", g)
    write_objects(f"{OUT}/env_a.objects.json", [
        ("Bed", 3, 4), ("lamp", 2, 2),
        ("Sofa", 11, 7), ("television", 14, 7), ("table", 12, 7),
        ("Toilet", 20, 7), ("sink", 18, 2),
    ])
    rooms = [
        free_cells(g, 1, 1, 9, 9),    # bedroom incl. its door cells
        free_cells(g, 10, 1, 16, 9),  # living room incl. its door cells
        free_cells(g, 17, 1, 21, 9),
    ]
    write_labels(f"{OUT}/env_a.gt.labels", w, h, rooms)


def furnished_f1():
    """Living room split in two by a sofa wall; bedroom to the right."""
    w, h = 17, 11
    g = blank(w, h)
    carve(g, 1, 1, 9, 9)
    fill(g, [(5, y) for y in range(1, 8)])  # furniture bar, passage at the bottom
    carve(g, 10, 1, 10, 2)                  # door, off the centroid sight line
    carve(g, 11, 1, 15, 9)
    write_pgm(f"{OUT}/f1.pgm", g)
    write_objects(f"{OUT}/f1.objects.json", [
        ("sofa", 2, 8), ("television", 7, 8), ("bed", 13, 2),
    ])
    write_labels(f"{OUT}/f1.gt.labels", w, h, [
        free_cells(g, 1, 1, 10, 9),
        free_cells(g, 11, 1, 15, 9),
    ])


def furnished_f2():
    """Twin bedroom split by a furniture bar; bathroom to the right."""
    w, h = 17, 11
    g = blank(w, h)
    carve(g, 1, 1, 9, 9)
    fill(g, [(5, y) for y in range(1, 8)])
    carve(g, 10, 1, 10, 2)
    carve(g, 11, 1, 15, 9)
    write_pgm(f"{OUT}/f2.pgm", g)
    write_objects(f"{OUT}/f2.objects.json", [
        ("bed", 2, 8), ("bed", 7, 8), ("toilet", 13, 2),
    ])
    write_labels(f"{OUT}/f2.gt.labels", w, h, [
        free_cells(g, 1, 1, 10, 9),
        free_cells(g, 11, 1, 15, 9),
    ])


def furnished_f3():
    """Kitchen split horizontally by a counter; living room below."""
    w, h = 11, 17
    g = blank(w, h)
    carve(g, 1, 1, 9, 9)
    fill(g, [(x, 5) for x in range(1, 8)])  # counter, passage on the right
    carve(g, 4, 10, 5, 10)                  # door
    carve(g, 1, 11, 9, 15)
    write_pgm(f"{OUT}/f3.pgm", g)
    write_objects(f"{OUT}/f3.objects.json", [
        ("stove", 2, 2), ("fridge", 2, 8), ("sofa", 4, 13), ("television", 6, 12),
    ])
    write_labels(f"{OUT}/f3.gt.labels", w, h, [
        free_cells(g, 1, 1, 9, 10),
        free_cells(g, 1, 11, 9, 15),
    ])


def furnished_f4():
    """Split bedroom, bathroom, and a hallway along the bottom."""
    w, h = 19, 15
    g = blank(w, h)
    carve(g, 1, 1, 9, 9)                    # bedroom
    fill(g, [(5, y) for y in range(1, 8)])
    carve(g, 11, 1, 17, 9)                  # bathroom
    carve(g, 10, 7, 10, 8)                  # door bedroom-bathroom
    carve(g, 1, 11, 17, 13)                 # hallway
    carve(g, 3, 10, 3, 10)                  # hallway door (bedroom side)
    carve(g, 14, 10, 14, 10)                # hallway door (bathroom side)
    write_pgm(f"{OUT}/f4.pgm", g)
    write_objects(f"{OUT}/f4.objects.json", [
        ("bed", 2, 8), ("bed", 7, 8), ("toilet", 14, 2),
    ])
    write_labels(f"{OUT}/f4.gt.labels", w, h, [
        free_cells(g, 1, 1, 10, 9) + [(3, 10)],
        free_cells(g, 11, 1, 17, 9) + [(14, 10)],
        free_cells(g, 1, 11, 17, 13),
    ])


def furnished_f5():
    """Bedroom split into three fragments by two bars; bathroom right."""
    w, h = 23, 11
    g = blank(w, h)
    carve(g, 1, 1, 15, 9)
    fill(g, [(5, y) for y in range(1, 8)])    # passage at the bottom
    fill(g, [(10, y) for y in range(3, 10)])  # passage at the top
    carve(g, 16, 4, 16, 5)                    # door
    carve(g, 17, 1, 21, 9)
    write_pgm(f"{OUT}/f5.pgm", g)
    write_objects(f"{OUT}/f5.objects.json", [
        ("bed", 2, 5), ("bed", 7, 5), ("bed", 13, 2), ("toilet", 19, 7),
    ])
    write_labels(f"{OUT}/f5.gt.labels", w, h, [
        free_cells(g, 1, 1, 16, 9),
        free_cells(g, 17, 1, 21, 9),
    ])


def furnished_f6():
    """Office split by a shelf; a windowless storage closet; living room."""
    w, h = 17, 11
    g = blank(w, h)
    carve(g, 1, 1, 9, 9)                     # office
    fill(g, [(5, y) for y in range(3, 10)])  # shelf, passage at the top
    carve(g, 11, 1, 13, 3)                   # storage: no door on the 2D map
    carve(g, 11, 5, 15, 9)                   # living room
    carve(g, 10, 7, 10, 7)                   # door office-living
    write_pgm(f"{OUT}/f6.pgm", g)
    write_objects(f"{OUT}/f6.objects.json", [
        ("desk", 2, 7), ("chair", 3, 7), ("desk", 7, 7), ("laptop", 8, 8),
        ("sofa", 12, 7), ("television", 14, 6),
    ])
    write_labels(f"{OUT}/f6.gt.labels", w, h, [
        free_cells(g, 1, 1, 10, 9),
        free_cells(g, 11, 1, 13, 3),
        free_cells(g, 11, 5, 15, 9),
    ])


def kitchen_sandwich():
    """Two kitchens separated by a living room: the same-label rooms are not
    adjacent and must stay unmerged."""
    w, h = 16, 7
    g = blank(w, h)
    carve(g, 1, 1, 4, 5)
    carve(g, 6, 1, 9, 5)
    carve(g, 11, 1, 14, 5)
    write_pgm(f"{OUT}/kitchen.pgm", g)
    write_labels(f"{OUT}/kitchen.labels", w, h, [
        free_cells(g, 1, 1, 4, 5),
        free_cells(g, 6, 1, 9, 5),
        free_cells(g, 11, 1, 14, 5),
    ])
    with open(f"{OUT}/kitchen.rooms.json", "w") as f:
        json.dump({"rooms": {"1": ["stove"], "2": ["sofa"], "3": ["fridge"]}}, f, indent=2)
        f.write("\n")


def eval_fixtures():
    """The split (MSIoU 0.96) and merge (MSIoU 0.30) anchor cases."""
    w, h = 10, 10
    all_cells = [(x, y) for y in range(h) for x in range(w)]
    write_labels(f"{OUT}/split_gt.labels", w, h, [all_cells])
    write_labels(f"{OUT}/split_pred.labels", w, h, [
        [(x, y) for y in range(0, 6) for x in range(w)],
        [(x, y) for y in range(6, 10) for x in range(w)],
    ])
    write_labels(f"{OUT}/merge_gt.labels", w, h, [
        [(x, y) for y in range(0, 4) for x in range(w)],
        [(x, y) for y in range(4, 10) for x in range(w)],
    ])
    write_labels(f"{OUT}/merge_pred.labels", w, h, [all_cells])


def main():
    os.makedirs(OUT, exist_ok=True)
    env_a()
    furnished_f1()
    furnished_f2()
    furnished_f3()
    furnished_f4()
    furnished_f5()
    furnished_f6()
    kitchen_sandwich()
    eval_fixtures()
    print(f"fixtures written to {os.path.abspath(OUT)}")


if __name__ == "__main__":
    main()
