"""Report figures rendered alongside the delimited outputs.

Figures are documentation artifacts: they are written next to the CSVs but
excluded from determinism manifests (PNG bytes vary across matplotlib and
freetype builds).
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

_SAVE_KW = {"dpi": 110, "metadata": {"Software": None}}


def ratio_figure(ks, ratios, path, *, reference=None, label="ratio", title=""):
    """Per-generation covering ratios with an optional reference line."""
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(ks, ratios, "o-", label=label)
    if reference is not None:
        ax.axhline(reference, color="gray", ls="--", lw=1,
                   label=f"reference {reference:.4f}")
    ax.set_xlabel("generation k")
    ax.set_ylabel("log count / log (1/l_k)")
    if title:
        ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def two_scale_figure(ks, l_ratios, r_ratios, path, *, refs=(None, None), title=""):
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(ks, l_ratios, "o-", label="fine-scale ratio")
    ax.plot(ks, r_ratios, "s-", label="intermediary-scale ratio")
    for ref, name in zip(refs, ("fine limit", "intermediary limit")):
        if ref is not None:
            ax.axhline(ref, color="gray", ls="--", lw=1)
            ax.annotate(f"{name} {ref:.4f}", (ks[0], ref),
                        textcoords="offset points", xytext=(4, 4), fontsize=8)
    ax.set_xlabel("generation k")
    ax.set_ylabel("ratio")
    if title:
        ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def decay_figure(rows, alpha, path, *, title=""):
    """|transform| against frequency on log-log axes with the alpha slope."""
    ms = [r[0] for r in rows]
    mags = [max(r[3], 1e-17) for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.loglog(ms, mags, ".", ms=3, label="|transform|")
    ref = [mags[0] * (ms[0] / m) ** alpha for m in ms]
    ax.loglog(ms, ref, "--", color="gray", lw=1, label=f"slope -{alpha:.3f}")
    ax.set_xlabel("frequency m")
    ax.set_ylabel("|mu^(m)|")
    if title:
        ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def counts_figure(ks, counts, path, *, title="", per_parent=None):
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(ks, counts, "o-", label="kept cubes")
    ax.set_xlabel("generation k")
    ax.set_ylabel("count")
    if title:
        ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
