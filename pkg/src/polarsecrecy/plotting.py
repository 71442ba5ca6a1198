"""
Report figures. Files only; the Agg backend is forced so nothing opens a window.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

golden_mean = (np.sqrt(5) - 1.0) / 2.0
fig_width = 5.0
colors = ["#08589e", "#d95f0e", "#4eb3d3", "#7a0177", "#31a354"]

params = {
    "axes.prop_cycle": matplotlib.cycler(color=colors),
    "axes.labelsize": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 8,
    "font.family": "sans-serif",
    "font.sans-serif": ["DejaVu Sans"],
    "legend.fontsize": 7,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "figure.figsize": [fig_width, fig_width * golden_mean],
    "figure.dpi": 150,
    "lines.linewidth": 1.0,
    "lines.markersize": 3,
    "savefig.bbox": "tight",
}

# PNG metadata without version strings keeps files stable across installs
_METADATA = {"Software": None}


def _save(fig, path):
    fig.savefig(path, metadata=_METADATA)
    plt.close(fig)
    return path




def plot_profiles(code, path):
    """Sorted inner profiles for Bob and Eve with both thresholds."""
    with matplotlib.rc_context(params):
        fig, ax = plt.subplots()
        for prof, label in ((code.inner_profile, "Bob  H(V_i|V^i-1,Y^L)"),
                            (code.eve_profile, "Eve  H(V_i|V^i-1,Z^L)")):
            if prof is not None:
                ax.plot(np.sort(prof.h), label=label)
        ax.axhline(code.eps1, ls="--", lw=0.7, color="k")
        ax.axhline(1 - code.eps1, ls="--", lw=0.7, color="k")
        ax.set_xlabel("index (sorted)")
        ax.set_ylabel("conditional entropy [bits]")
        ax.set_title(f"inner profiles, L={code.L}, K={code.K}")
        ax.legend(loc="upper left")
        return _save(fig, path)


def plot_outer_sets(code, path):
    """Key bits contributed by each outer level."""
    with matplotlib.rc_context(params):
        fig, ax = plt.subplots()
        sizes = [len(f) for f in code.outer_sets]
        ax.bar(np.arange(len(sizes)), sizes, width=0.9)
        ax.set_xlabel("outer level j")
        ax.set_ylabel("|F_j|")
        ax.set_ylim(0, code.M)
        ax.set_title(f"outer sets, M={code.M}, J={code.J}, rate={code.rate:.4f}")
        return _save(fig, path)


def plot_polarization(rows, path):
    """Set fractions against block length."""
    n = np.array([r["N"] for r in rows])
    with matplotlib.rc_context(params):
        fig, ax = plt.subplots()
        for key, label in (("R_frac", "|R|/N"), ("D_frac", "|D|/N"), ("I_frac", "|I|/N")):
            ax.plot(n, [r[key] for r in rows], marker="o", label=label)
        ax.set_xscale("log", base=2)
        ax.set_xlabel("N")
        ax.set_ylabel("fraction of indices")
        ax.set_ylim(0, 1)
        ax.legend()
        return _save(fig, path)


def plot_trial_summary(summaries, path):
    """Mismatch frequency with Wilson intervals, one bar per report."""
    labels = [s.get("label", s["protocol"]) for s in summaries]
    p = np.array([s["mismatch_rate"] for s in summaries])
    lo = np.array([s["wilson95"][0] for s in summaries])
    hi = np.array([s["wilson95"][1] for s in summaries])
    with matplotlib.rc_context(params):
        fig, ax = plt.subplots()
        x = np.arange(len(p))
        ax.bar(x, p, width=0.6)
        ax.errorbar(x, p, yerr=np.vstack([p - lo, hi - p]), fmt="none", ecolor="k", capsize=3)
        ax.set_xticks(x, labels)
        ax.set_ylim(0, 1)
        ax.set_ylabel("mismatch frequency")
        return _save(fig, path)
