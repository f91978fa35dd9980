"""
Visualization Module

Handles:
- Drawing the mission grid (operational region, unsafe zones, no-fly border)
- Recovery path of the lost drone
- Swarm snapshots during regrouping
"""

import numpy as np
import matplotlib.pyplot as plt
import matplotlib.patches as mpatches

from modules.mission import SUBZONES
from modules.swarm_sim import subzone_center, zone_center


def draw_grid(ax, grid, label_zones=True):
    """
    Draw the mission area on an axis

    Parameters:
    -----------
    ax : matplotlib.axes.Axes
    grid : GridMap
    label_zones : bool
        Write zone ids in the cell corners
    """
    ax.add_patch(mpatches.Rectangle((-0.5, -0.5), grid.cols + 1, grid.rows + 1,
                                    facecolor='lightgray', hatch='//', edgecolor='gray',
                                    linewidth=0))
    for zone in range(1, grid.rows * grid.cols + 1):
        x, y = zone_center(grid, zone) - 0.5
        if zone == grid.or_zone:
            color = 'palegreen'
        elif zone in grid.unsafe_zones:
            color = 'salmon'
        else:
            color = 'white'
        ax.add_patch(mpatches.Rectangle((x, y), 1, 1, facecolor=color,
                                        edgecolor='black', linewidth=1))
        if label_zones:
            ax.text(x + 0.06, y + 0.88, str(zone), fontsize=8, va='top')

    # sub-zones of the operational region
    cx, cy = zone_center(grid, grid.or_zone)
    ax.plot([cx - 0.5, cx + 0.5], [cy, cy], color='green', linewidth=0.6, linestyle=':')
    ax.plot([cx, cx], [cy - 0.5, cy + 0.5], color='green', linewidth=0.6, linestyle=':')
    for name in SUBZONES:
        sx, sy = subzone_center(grid, name)
        weight = 'bold' if name == grid.base_subzone else 'normal'
        ax.text(sx, sy, name, ha='center', va='center', fontsize=7,
                color='darkgreen', fontweight=weight, alpha=0.6)

    ax.set_xlim(-0.5, grid.cols + 0.5)
    ax.set_ylim(-0.5, grid.rows + 0.5)
    ax.set_aspect('equal')
    ax.axis('off')

    handles = [mpatches.Patch(facecolor='palegreen', edgecolor='black', label='OR'),
               mpatches.Patch(facecolor='salmon', edgecolor='black', label='unsafe'),
               mpatches.Patch(facecolor='lightgray', hatch='//', label='NFZ')]
    return handles


def plot_recovery_path(grid, zone_path, title="Recovery Path", save_path=None):
    """
    Plot the zones visited by the lost drone

    Parameters:
    -----------
    grid : GridMap
    zone_path : list of str
        Zones in visiting order, the start zone first
    title : str
    save_path : str, optional
        Path to save the figure

    Returns:
    --------
    fig : matplotlib.figure.Figure
    """
    fig, ax = plt.subplots(1, 1, figsize=(6, 6))
    handles = draw_grid(ax, grid)

    points = np.array([zone_center(grid, int(z)) for z in zone_path if z.isdigit()])
    if len(points):
        ax.plot(points[:, 0], points[:, 1], color='tab:blue', linewidth=2,
                marker='o', markersize=5)
        ax.scatter(*points[0], s=120, color='tab:orange', zorder=3, label='start')
        for (x0, y0), (x1, y1) in zip(points[:-1], points[1:]):
            ax.annotate('', xy=(x1, y1), xytext=(x0, y0),
                        arrowprops=dict(arrowstyle='->', color='tab:blue'))
        handles.append(mpatches.Patch(color='tab:orange', label='start'))

    ax.legend(handles=handles, loc='upper right', fontsize=8, framealpha=0.9)
    ax.set_title(title, fontsize=14, fontweight='bold')
    plt.tight_layout()

    if save_path:
        plt.savefig(save_path, dpi=150, bbox_inches='tight')
        print(f"✓ Figure saved: {save_path}")

    return fig


def plot_snapshots(grid, snapshots, lost_drone=None, save_path=None):
    """
    Swarm positions at the recorded snapshot times, side by side

    Parameters:
    -----------
    grid : GridMap
    snapshots : dict
        time (s) -> (n_drones, 2) array of positions
    lost_drone : int, optional
        Drone drawn in red
    save_path : str, optional

    Returns:
    --------
    fig : matplotlib.figure.Figure
    """
    times = sorted(snapshots)
    n = max(1, len(times))
    fig, axes = plt.subplots(1, n, figsize=(4 * n, 4))
    axes = np.atleast_1d(axes)

    for ax, t in zip(axes, times):
        draw_grid(ax, grid, label_zones=False)
        positions = np.asarray(snapshots[t])
        colors = ['tab:blue'] * len(positions)
        if lost_drone is not None and lost_drone < len(colors):
            colors[lost_drone] = 'red'
        ax.scatter(positions[:, 0], positions[:, 1], c=colors, s=18, zorder=3)
        ax.set_title(f't = {t:.1f} s', fontsize=12, fontweight='bold')
    for ax in axes[len(times):]:
        ax.axis('off')

    plt.suptitle('Swarm Regrouping', fontsize=14, fontweight='bold', y=1.02)
    plt.tight_layout()

    if save_path:
        plt.savefig(save_path, dpi=150, bbox_inches='tight')
        print(f"✓ Figure saved: {save_path}")

    return fig
