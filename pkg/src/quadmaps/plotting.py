"""SVG figures: images of disks with the critical values overlaid, and scan maps."""

from __future__ import annotations

import numpy as np
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.colors import ListedColormap  # noqa: E402

from .core import QuadraticMap, evaluate  # noqa: E402
from .critical import ConicTag, classify_critical_conic  # noqa: E402
from .normalize import ClassLabel  # noqa: E402

J1_COLOR = "#ff0000"
DISK_COLOR = "#4c72b0"

# classes whose interesting structure sits at the origin; drawing a disk
# centred there hides it, so the default disk is moved off the origin
OFFSET_CENTER = (0.5, 0.5)
OFFSET_LABELS = frozenset({ClassLabel.E2, ClassLabel.H3, ClassLabel.P3,
                           ClassLabel.DE1, ClassLabel.DH1, ClassLabel.DP2})


def default_center(label: ClassLabel | None) -> tuple[float, float]:
    return OFFSET_CENTER if label in OFFSET_LABELS else (0.0, 0.0)


def disk_points(center, radius: float, rings: int = 60, spokes: int = 180) -> np.ndarray:
    """Polar grid filling a closed disk, centre included."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    r = np.linspace(0, radius, rings + 1)[1:]
    th = np.linspace(0, 2 * np.pi, spokes, endpoint=False)
    R, T = np.meshgrid(r, th)
    pts = np.stack([R.ravel() * np.cos(T.ravel()), R.ravel() * np.sin(T.ravel())], axis=-1)
    return np.vstack([[0.0, 0.0], pts]) + np.asarray(center, dtype=float)


def _runs(mask: np.ndarray) -> list[slice]:
    """Maximal runs of ``True`` in a boolean array."""
    out, start = [], None
    for i, m in enumerate(mask):
        if m and start is None:
            start = i
        elif not m and start is not None:
            out.append(slice(start, i))
            start = None
    if start is not None:
        out.append(slice(start, len(mask)))
    return out


def critical_polylines(Q: QuadraticMap, center, radius: float, n: int = 4096) -> list[np.ndarray]:
    """Images of the pieces of ``J0`` lying inside the disk, as polylines.

    A critical point gives a one-point polyline; when the whole plane is
    critical the image of the disk itself is returned as a point cloud.
    """
    Qf = Q.to_float()
    center = np.asarray(center, dtype=float)
    conic = classify_critical_conic(Qf)
    if conic.tag is ConicTag.EMPTY:
        return []
    if conic.tag is ConicTag.POINT:
        p = np.array([conic.center])
        return [evaluate(Qf, p)] if np.linalg.norm(p[0] - center) <= radius else []
    if conic.tag is ConicTag.ALL_PLANE:
        return [evaluate(Qf, disk_points(center, radius, 40, 120))]
    reach = float(np.linalg.norm(center)) + radius
    out = []
    for piece in conic.pieces:
        t = piece.sample_params(10.0 * (1 + reach + piece.size()), n)
        pts, _ = piece.at(t)
        inside = np.linalg.norm(pts - center, axis=1) <= radius
        for run in _runs(inside):
            out.append(evaluate(Qf, pts[run]))
    return out


def _save_svg(fig, path, seed: int) -> None:
    with matplotlib.rc_context({"svg.hashsalt": f"quadmaps-{seed}"}):
        fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def plot_disk_image(Q: QuadraticMap, path, center=None, radius: float = 1.0,
                    label: ClassLabel | None = None, seed: int = 0) -> dict:
    """Draw ``Q`` applied to a disk, with ``J1`` restricted to the disk in red.

    Returns a small summary (centre, radius, number of red polylines).

    Raises:
        ValueError: if ``radius`` is not positive.
        OSError: if ``path`` cannot be written.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    if center is None:
        center = default_center(label)
    Qf = Q.to_float()
    cloud = evaluate(Qf, disk_points(center, radius))
    th = np.linspace(0, 2 * np.pi, 721)
    rim = evaluate(Qf, np.asarray(center, float) + radius * np.stack([np.cos(th), np.sin(th)], axis=-1))
    lines = critical_polylines(Qf, center, radius)

    fig, ax = plt.subplots(figsize=(4, 4))
    ax.scatter(cloud[:, 0], cloud[:, 1], s=0.5, color=DISK_COLOR, alpha=0.4, linewidths=0)
    ax.plot(rim[:, 0], rim[:, 1], color=DISK_COLOR, linewidth=0.8)
    for line in lines:
        if len(line) == 1:
            ax.plot(line[:, 0], line[:, 1], "o", color=J1_COLOR, markersize=3, gid="J1")
        else:
            ax.plot(line[:, 0], line[:, 1], color=J1_COLOR, linewidth=1.2, gid="J1")
    ax.set_aspect("equal", adjustable="datalim")
    title = label.value if label is not None else str(Q)
    ax.set_title(title, fontsize=9)
    fig.tight_layout()
    _save_svg(fig, path, seed)
    return {"center": [float(c) for c in center], "radius": float(radius), "j1_polylines": len(lines)}


def plot_class_map(grid: list[list[str]], s_values, t_values, path, seed: int = 0) -> None:
    """Colour each scan cell by its class label (``?`` for failed cells)."""
    names = [label.value for label in ClassLabel] + ["?"]
    index = {name: i for i, name in enumerate(names)}
    codes = np.array([[index[c] for c in row] for row in grid], dtype=float)
    cmap = ListedColormap(plt.get_cmap("tab20")(np.linspace(0, 1, len(names))))
    fig, ax = plt.subplots(figsize=(5, 4))
    s_values, t_values = np.asarray(s_values, float), np.asarray(t_values, float)
    extent = None
    if len(s_values) > 1 and len(t_values) > 1:
        extent = (s_values[0], s_values[-1], t_values[0], t_values[-1])
    ax.imshow(codes, origin="lower", cmap=cmap, vmin=0, vmax=len(names) - 1,
              extent=extent, aspect="auto", interpolation="nearest")
    present = sorted({c for row in grid for c in row}, key=index.get)
    for name in present:
        ax.plot([], [], "s", color=cmap(index[name] / (len(names) - 1)), label=name)
    ax.legend(fontsize=7, loc="center left", bbox_to_anchor=(1.0, 0.5))
    ax.set_xlabel("s")
    ax.set_ylabel("t")
    fig.tight_layout()
    _save_svg(fig, path, seed)
