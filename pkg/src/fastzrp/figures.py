"""Figure rendering for the CLI report paths (headless, files only)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .limits import TailCurve


def save_gc_panels(
    path: str,
    phi: np.ndarray,
    density_by_L: dict[int, np.ndarray],
    density_limit: np.ndarray,
    rho: np.ndarray,
    fugacity_by_L: dict[int, np.ndarray],
    current_by_L: dict[int, np.ndarray],
    fugacity_limit: np.ndarray,
) -> None:
    """Two panels: density vs fugacity, and the two currents vs density."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.6))
    for L, r in sorted(density_by_L.items()):
        ax1.plot(phi, r, "--", lw=1, label=f"L={L}")
    ax1.plot(phi, density_limit, "k-", lw=1.2, label="limit")
    ax1.set_xlabel("fugacity")
    ax1.set_ylabel("density")
    ax1.set_ylim(0, min(10, 1.05 * max(np.max(r) for r in density_by_L.values())))
    ax1.legend(fontsize=7)
    for L, f in sorted(fugacity_by_L.items()):
        ax2.plot(rho, f, "--", lw=1, label=f"grand-canonical L={L}")
    for L, c in sorted(current_by_L.items()):
        ax2.plot(rho, c, ":", lw=1.4, label=f"canonical L={L}")
    ax2.plot(rho, fugacity_limit, "k-", lw=1.2, label="limit")
    ax2.set_xlabel("density")
    ax2.set_ylabel("current / fugacity")
    ax2.legend(fontsize=6)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_profiles(
    path: str,
    profiles: dict[str, np.ndarray],
    bulk_slope: float,
    title: str = "",
) -> None:
    """Integrated occupation profiles with the bulk-density guide line."""
    fig, ax = plt.subplots(figsize=(5, 3.6))
    for label, prof in profiles.items():
        x = np.arange(1, len(prof) + 1)
        ax.plot(x, prof, lw=1, label=label)
    L = max(len(p) for p in profiles.values())
    ax.plot([1, L], [bulk_slope, bulk_slope * L], color="0.6", lw=1, ls="-",
            label=f"slope {bulk_slope:g}")
    ax.set_xlabel("site")
    ax.set_ylabel("integrated occupation")
    if title:
        ax.set_title(title, fontsize=9)
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_tails(
    path: str,
    curves: dict[str, TailCurve],
    reference=None,
    reference_label: str = "prediction",
    logy: bool = True,
    xlabel: str = "scaled size",
    title: str = "",
) -> None:
    """Empirical survival curves against an optional reference tail."""
    fig, ax = plt.subplots(figsize=(5, 3.6))
    for label, curve in curves.items():
        ax.plot(curve.grid, curve.values, lw=1, label=label)
    if reference is not None:
        grid = next(iter(curves.values())).grid
        ax.plot(grid, reference(grid), "k--", lw=1.2, label=reference_label)
    if logy:
        ax.set_yscale("log")
        ax.set_ylim(bottom=1e-4)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("survival")
    if title:
        ax.set_title(title, fontsize=9)
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_current_curve(
    path: str,
    rho: np.ndarray,
    canonical: dict[int, np.ndarray],
    grand_canonical: dict[int, np.ndarray],
    plateau: float | None = None,
    title: str = "",
) -> None:
    """Canonical vs grand-canonical currents over a density grid."""
    fig, ax = plt.subplots(figsize=(5, 3.6))
    for L, c in sorted(canonical.items()):
        ax.plot(rho, c, ":", lw=1.4, label=f"canonical L={L}")
    for L, f in sorted(grand_canonical.items()):
        ax.plot(rho, f, "--", lw=1, label=f"grand-canonical L={L}")
    if plateau is not None:
        ax.axhline(plateau, color="k", lw=1, label="asymptote")
    ax.set_xlabel("density")
    ax.set_ylabel("current")
    if title:
        ax.set_title(title, fontsize=9)
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
