"""Static vector renderings of trajectories and metric comparisons."""

from __future__ import annotations

from collections import defaultdict
from typing import Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
from matplotlib.patches import Circle as CirclePatch
from matplotlib.patches import Rectangle as RectanglePatch

from .geometry import Circle, Rect
from .scenarios import Scenario
from .simulator import TrajectoryRow


def plot_trajectories(rows: list[TrajectoryRow], out_path,
                      scenario: Optional[Scenario] = None,
                      title: Optional[str] = None) -> None:
    """Trails colored per robot, with obstacle outlines and start/goal marks."""
    if not rows:
        raise ValueError("no records")
    by_robot: dict[int, list[TrajectoryRow]] = defaultdict(list)
    for row in rows:
        by_robot[row.robot_id].append(row)

    fig, ax = plt.subplots(figsize=(6, 6))
    cmap = plt.get_cmap("tab10")
    for robot_id in sorted(by_robot):
        track = sorted(by_robot[robot_id], key=lambda r: r.step)
        xs = [r.x for r in track]
        ys = [r.y for r in track]
        color = cmap(robot_id % 10)
        ax.plot(xs, ys, "-", color=color, linewidth=1.2, label=f"robot {robot_id}")
        ax.plot(xs[0], ys[0], "o", color=color, markersize=5)
        ax.plot(xs[-1], ys[-1], "x", color=color, markersize=6)

    if scenario is not None:
        for obstacle in scenario.obstacles:
            if isinstance(obstacle, Circle):
                ax.add_patch(CirclePatch((obstacle.center.x, obstacle.center.y),
                                         obstacle.radius, facecolor="0.8",
                                         edgecolor="0.4"))
            elif isinstance(obstacle, Rect):
                ax.add_patch(RectanglePatch(
                    (obstacle.lo.x, obstacle.lo.y),
                    obstacle.hi.x - obstacle.lo.x, obstacle.hi.y - obstacle.lo.y,
                    fill=False, edgecolor="0.4"))
        for start, goal in scenario.robots:
            ax.plot(goal.x, goal.y, "*", color="0.3", markersize=9)

    ax.set_aspect("equal")
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    if title:
        ax.set_title(title)
    if len(by_robot) <= 10:
        ax.legend(fontsize=7, loc="upper right")
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)


def plot_metric_bars(reports: list[dict], out_path) -> None:
    """Side-by-side traveling-distance and smoothness bars per report."""
    if len(reports) < 2:
        raise ValueError("need at least two reports to compare")
    labels = [rep.get("label", rep.get("mode", f"run {k}"))
              for k, rep in enumerate(reports)]
    distances = [rep["traveling_distance_mean"] for rep in reports]
    smoothness = [rep["motion_smoothness_mean"] for rep in reports]

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8, 4))
    positions = range(len(reports))
    ax1.bar(positions, distances, color="steelblue")
    ax1.set_xticks(list(positions), labels, rotation=20)
    ax1.set_ylabel("mean traveling distance (m)")
    ax2.bar(positions, smoothness, color="indianred")
    ax2.set_xticks(list(positions), labels, rotation=20)
    ax2.set_ylabel("mean motion smoothness")
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)
