"""Figure rendering for the CLI report paths.

Every plot function takes already-computed data, writes one PNG next to
the delimited output, and returns the path. Matplotlib runs on the Agg
backend so the CLI stays headless.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_DPI = 150


def _finish(fig, path) -> str:
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return str(path)


def plot_sample_series(times: np.ndarray, mean_n: np.ndarray,
                       f_sqvs: np.ndarray, target_n: float, tau_c: float,
                       path) -> str:
    """Ensemble-mean photon number and squeezed-vacuum fidelity vs time."""
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    t = times / tau_c
    ax1.plot(t, mean_n, color="tab:blue", lw=1.2)
    ax1.axhline(target_n, color="gray", ls="--", lw=0.8,
                label=f"sinh$^2$r = {target_n:.3f}")
    ax1.set_ylabel(r"$\langle n \rangle$")
    ax1.legend(frameon=False)
    ax2.plot(t, f_sqvs, color="tab:red", lw=1.2)
    ax2.axhline(1.0, color="gray", ls=":", lw=0.8)
    ax2.set_ylabel(r"$F_{\rm SqVS}$")
    ax2.set_xlabel(r"$t/\tau_c$")
    ax2.set_ylim(0.0, 1.05)
    return _finish(fig, path)


def plot_fock_populations(populations: np.ndarray,
                          ideal: np.ndarray | None, path) -> str:
    """Bar chart of heralded-state Fock populations, ideal overlay optional."""
    fig, ax = plt.subplots(figsize=(7, 4))
    n = np.arange(populations.size)
    ax.bar(n, populations, width=0.8, color="tab:blue", label="heralded")
    if ideal is not None:
        ax.step(np.arange(ideal.size) - 0.5, ideal, where="post",
                color="black", lw=1.0, label="ideal squeezed photon")
    ax.set_xlabel("Fock level n")
    ax.set_ylabel(r"$p_n$")
    ax.legend(frameon=False)
    return _finish(fig, path)


def plot_restoration(times: np.ndarray, on_sqvs: np.ndarray,
                     on_cat: np.ndarray, off_sqvs: np.ndarray,
                     off_cat: np.ndarray, tau_c: float, path) -> str:
    """Post-click recovery/decoherence with the atom beam on and off."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4), sharex=True)
    t = times / tau_c
    ax1.plot(t, on_sqvs, "o-", color="tab:blue", label="interaction on")
    ax1.plot(t, off_sqvs, "s--", color="tab:orange", label="interaction off")
    ax1.set_xlabel(r"$t/\tau_c$ after click")
    ax1.set_ylabel(r"$F_{\rm SqVS}$")
    ax1.legend(frameon=False)
    ax2.plot(t, on_cat, "o-", color="tab:blue", label="interaction on")
    ax2.plot(t, off_cat, "s--", color="tab:orange", label="interaction off")
    ax2.set_xlabel(r"$t/\tau_c$ after click")
    ax2.set_ylabel(r"$F_{\rm Sq\text{-}SpCS}$")
    ax2.legend(frameon=False)
    return _finish(fig, path)


def plot_sweep(points, path) -> str:
    """Cat size and fidelities vs excited-state probability, by decay."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    by_ktc: dict[float, list] = {}
    for p in points:
        by_ktc.setdefault(p.kappa_tau_c, []).append(p)
    for ktc, rows in sorted(by_ktc.items()):
        rows.sort(key=lambda p: p.beta_sq)
        beta = [p.beta_sq for p in rows]
        label = rf"$\kappa\tau_c$ = {ktc:g}"
        ax1.errorbar(beta, [p.mean_n for p in rows],
                     yerr=[3 * p.stderr_mean_n for p in rows],
                     marker="o", capsize=3, label=label)
        ax2.plot(beta, [p.f_spcs for p in rows], "s--", alpha=0.7)
        ax2.plot(beta, [p.f_sqspcs for p in rows], "o-", label=label)
    ax1.set_xlabel(r"$\beta^2$")
    ax1.set_ylabel(r"heralded $\langle n \rangle$")
    ax1.legend(frameon=False)
    ax2.set_xlabel(r"$\beta^2$")
    ax2.set_ylabel("fidelity (dashed SpCS, solid Sq-SpCS)")
    ax2.set_ylim(0.0, 1.05)
    ax2.legend(frameon=False)
    return _finish(fig, path)


def plot_wigner(grid, path) -> str:
    """Symmetric-diverging heatmap of W(x1, x2)."""
    fig, ax = plt.subplots(figsize=(5.5, 4.5))
    span = float(np.abs(grid.values).max())
    mesh = ax.pcolormesh(grid.x1, grid.x2, grid.values.T, cmap="RdBu_r",
                         vmin=-span, vmax=span, shading="nearest")
    fig.colorbar(mesh, ax=ax, label=r"$W(x_1, x_2)$")
    ax.set_xlabel(r"$x_1$")
    ax.set_ylabel(r"$x_2$")
    ax.set_aspect("equal")
    return _finish(fig, path)


def plot_table_comparison(rows, path) -> str:
    """Derived vs listed dimensionless parameters per reference set."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    labels = [row.label for row in rows]
    x = np.arange(len(rows))
    ax1.bar(x - 0.2, [row.listed_g_t_int for row in rows], width=0.4,
            label="listed", color="gray")
    ax1.bar(x + 0.2, [row.derived.g_t_int for row in rows], width=0.4,
            label="derived", color="tab:blue")
    ax1.set_xticks(x, labels)
    ax1.set_ylabel(r"$g\,t_{\rm int}$")
    ax1.legend(frameon=False)
    ax2.bar(x - 0.2, [row.listed_kappa_tau_c for row in rows], width=0.4,
            label="listed", color="gray")
    ax2.bar(x + 0.2, [row.derived.kappa_tau_c for row in rows], width=0.4,
            label="derived", color="tab:blue")
    ax2.set_xticks(x, labels)
    ax2.set_ylabel(r"$\kappa\tau_c$")
    ax2.set_yscale("log")
    ax2.legend(frameon=False)
    return _finish(fig, path)


def plot_oracle_check(checkpoint_times: np.ndarray, max_sigma: np.ndarray,
                      tau_c: float, path) -> str:
    """Worst elementwise trajectory-vs-master-equation deviation per checkpoint."""
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(checkpoint_times / tau_c, max_sigma,
           width=0.04 * checkpoint_times.max() / tau_c, color="tab:blue")
    ax.axhline(3.0, color="tab:red", ls="--", lw=1.0, label="3 SE bound")
    ax.set_xlabel(r"checkpoint $t/\tau_c$")
    ax.set_ylabel(r"max $|\Delta\rho| / {\rm SE}$")
    ax.legend(frameon=False)
    return _finish(fig, path)
