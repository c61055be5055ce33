"""Figure rendering, deterministic by construction.

The Agg backend, a fixed svg hash salt and a scrubbed date field make repeat
renders of the same input byte-identical, which is what the tests pin.
"""

import os

import matplotlib

matplotlib.use("Agg", force=True)
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .io import SchemaError, check_schema, read_table  # noqa: E402

plt.rcParams["svg.hashsalt"] = "wgbragg-figures"

FIGSIZE = (6.4, 4.8)
DPI = 110


def _as_array(rows, n_cols):
    arr = np.asarray(rows, dtype=float)
    if arr.size == 0:
        return np.empty((0, n_cols))
    return arr


def _rate_scale(meta):
    g0 = meta.get("gamma_tilde_0")
    if isinstance(g0, (int, float)) and g0 > 0:
        return float(g0), "guided rate (single-atom resonant units)"
    return 1.0, "guided rate"


def _render_spectrum(meta, arr, fig):
    ax = fig.subplots()
    scale, ylabel = _rate_scale(meta)
    if arr.shape[0]:
        ax.plot(arr[:, 0], arr[:, 1] / scale, lw=1.2)
    ax.set_xlabel("detuning (total linewidths)")
    ax.set_ylabel(ylabel)
    theta = meta.get("theta_radians")
    if isinstance(theta, (int, float)):
        ax.set_title(f"emission spectrum at theta = {theta:.4f} rad")


def _render_map(meta, arr, fig, overlay=None):
    ax = fig.subplots()
    scale, zlabel = _rate_scale(meta)
    if arr.shape[0]:
        thetas = np.unique(arr[:, 0])
        deltas = np.unique(arr[:, 1])
        if thetas.size * deltas.size != arr.shape[0]:
            raise SchemaError(
                f"map table is not a complete grid: {arr.shape[0]} rows vs "
                f"{thetas.size} angles x {deltas.size} detunings")
        grid = arr[:, 2].reshape(thetas.size, deltas.size)
        mesh = ax.pcolormesh(deltas, thetas, grid / scale, shading="auto")
        fig.colorbar(mesh, ax=ax, label=zlabel)
    theta_gb = meta.get("theta_gb")
    if isinstance(theta_gb, (int, float)):
        ax.axhline(theta_gb, color="w", ls="--", lw=0.8, label="geometric angle")
    if overlay is not None and overlay.shape[0]:
        ax.plot(overlay[:, 0], overlay[:, 1], color="w", lw=1.0,
                label="modified condition")
    if ax.get_legend_handles_labels()[0]:
        ax.legend(loc="upper right", fontsize=8)
    ax.set_xlabel("detuning (total linewidths)")
    ax.set_ylabel("drive angle (rad)")


def _render_scaling(meta, names, arr, fig):
    scale, ylabel = _rate_scale(meta)
    if names == ["n", "rate_r"]:
        ax = fig.subplots()
        if arr.shape[0]:
            ax.loglog(arr[:, 0], arr[:, 1] / scale, "o-", ms=3, lw=1.0)
        ax.set_xlabel("atom number")
        ax.set_ylabel(ylabel)
        return
    ax_d, ax_r = fig.subplots(1, 2)
    if arr.shape[0]:
        free = arr[:, 3] == 0.0
        ax_d.loglog(arr[free, 0], np.abs(arr[free, 1]), "o-", ms=3, lw=1.0)
        ax_r.loglog(arr[free, 0], arr[free, 2] / scale, "o-", ms=3, lw=1.0)
        for ax, col in ((ax_d, np.abs(arr[:, 1])), (ax_r, arr[:, 2] / scale)):
            if np.any(~free):
                ax.loglog(arr[~free, 0], col[~free], "s", ms=5, mfc="none",
                          label="grid boundary")
                ax.legend(fontsize=8)
    for key, ax in (("fit_delta_max", ax_d), ("fit_rate_max", ax_r)):
        fit = meta.get(key)
        if isinstance(fit, dict) and "exponent" in fit:
            ax.set_title(f"~ N^{fit['exponent']:.3f}", fontsize=9)
    ax_d.set_xlabel("atom number")
    ax_d.set_ylabel("|peak detuning|")
    ax_r.set_xlabel("atom number")
    ax_r.set_ylabel(f"peak {ylabel}")


def _render_voids(meta, arr, fig):
    config = meta.get("config") if isinstance(meta.get("config"), dict) else {}
    sweep = config.get("sweep", "beta")
    xlabel = "guided fraction" if sweep == "beta" else "atom number"
    ax_top, ax_bot = fig.subplots(2, 1, sharex=True)
    scale, ylabel = _rate_scale(meta)
    if arr.shape[0]:
        ax_top.plot(arr[:, 0], arr[:, 3], "o-", ms=3, lw=1.0)
        ax_bot.errorbar(arr[:, 0], arr[:, 1] / scale, yerr=arr[:, 2] / scale,
                        fmt="o-", ms=3, lw=1.0, elinewidth=0.7, capsize=2)
    ax_top.set_ylabel("robustness")
    ax_top.set_ylim(0.0, 1.05)
    ax_bot.set_xlabel(xlabel)
    ax_bot.set_ylabel(f"ensemble mean {ylabel}")


RENDERERS = ("spectrum", "map", "scaling", "voids")


def render_file(in_path, out_path, kind=None, overlay_path=None):
    """Read one result table and write one figure; returns the figure path.

    kind defaults to the file's own 'subcommand' metadata.  For maps, a
    sibling '<stem>_overlay.csv' is picked up automatically when present.
    """
    meta, names, rows = read_table(in_path)
    if kind is None:
        kind = meta.get("subcommand")
    if kind not in RENDERERS:
        raise SchemaError(
            f"{in_path}: cannot infer figure kind (subcommand metadata is "
            f"{meta.get('subcommand')!r}); pass one of {RENDERERS}")
    check_schema(kind, names, in_path)
    arr = _as_array(rows, len(names))

    overlay = None
    if kind == "map":
        if overlay_path is None:
            stem, ext = os.path.splitext(str(in_path))
            candidate = f"{stem}_overlay{ext or '.csv'}"
            if os.path.exists(candidate):
                overlay_path = candidate
        if overlay_path is not None:
            _, ov_names, ov_rows = read_table(overlay_path)
            check_schema("map-overlay", ov_names, overlay_path)
            overlay = _as_array(ov_rows, 2)

    fig = plt.figure(figsize=FIGSIZE, dpi=DPI)
    try:
        if kind == "spectrum":
            _render_spectrum(meta, arr, fig)
        elif kind == "map":
            _render_map(meta, arr, fig, overlay=overlay)
        elif kind == "scaling":
            _render_scaling(meta, names, arr, fig)
        else:
            _render_voids(meta, arr, fig)
        fig.tight_layout()
        metadata = {"Date": None} if str(out_path).endswith(".svg") else None
        fig.savefig(out_path, metadata=metadata)
    finally:
        plt.close(fig)
    return out_path
