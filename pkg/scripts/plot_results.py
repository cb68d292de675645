#!/usr/bin/env python3
"""Plot helpers for run artifacts. Plots are derived from the TSV outputs,
never inputs to anything."""

import sys
from pathlib import Path

import numpy as np

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:  # pragma: no cover
    print("matplotlib is not installed; install the 'plot' extra", file=sys.stderr)
    sys.exit(1)


def plot_landscape(outdir: Path) -> Path:
    data = np.loadtxt(outdir / "landscape.tsv", skiprows=1)
    fs = np.unique(data[:, 0])
    ds = np.unique(data[:, 1])
    mat = data[:, 2].reshape(fs.size, ds.size)
    fig, ax = plt.subplots(figsize=(6, 4.5))
    pcm = ax.pcolormesh(ds, fs, mat, shading="nearest", cmap="viridis")
    i, j = np.unravel_index(np.argmax(mat), mat.shape)
    ax.plot(ds[j], fs[i], "o", mfc="none", mec="w", ms=14, mew=2)
    ax.set_xlabel(r"$\delta / T_{per}$")
    ax.set_ylabel("f (THz)")
    fig.colorbar(pcm, ax=ax, label=r"max $|\langle\cos\theta\rangle|$")
    out = outdir / "landscape.png"
    fig.savefig(out, dpi=160, bbox_inches="tight")
    plt.close(fig)
    return out


def plot_trajectory(outdir: Path, ycols=None) -> Path:
    path = outdir / "trajectory.tsv"
    header = path.open().readline().split()
    data = np.loadtxt(path, skiprows=1)
    fig, ax = plt.subplots(figsize=(7, 4))
    cols = ycols or [c for c in header[1:] if c not in ("norm", "trace")]
    for name in cols:
        ax.plot(data[:, 0], data[:, header.index(name)], label=name, lw=1.2)
    ax.set_xlabel("t (a.u.)")
    ax.legend(frameon=False)
    out = outdir / "trajectory.png"
    fig.savefig(out, dpi=160, bbox_inches="tight")
    plt.close(fig)
    return out


def plot_field_and_spectrum(outdir: Path) -> Path:
    pulse = np.loadtxt(outdir / "final.pulse")
    spec = np.loadtxt(outdir / "spectrum.tsv", skiprows=1)
    fig, (a, b) = plt.subplots(1, 2, figsize=(10, 3.6))
    a.plot(pulse[:, 0], pulse[:, 1], lw=0.9)
    a.set_xlabel("t (a.u.)")
    a.set_ylabel("E (a.u.)")
    half = spec[:, 0] >= 0
    b.plot(spec[half, 0], spec[half, 3], lw=0.9)
    b.set_xlabel(r"$\omega$ (a.u.)")
    b.set_ylabel(r"$|\hat E(\omega)|$")
    b.set_xlim(0, None)
    out = outdir / "field_spectrum.png"
    fig.savefig(out, dpi=160, bbox_inches="tight")
    plt.close(fig)
    return out


def plot_spectrogram(outdir: Path) -> Path:
    lines = (outdir / "spectrogram.tsv").read_text().splitlines()
    freqs = np.array([float(c.split("=")[1]) for c in lines[2].split("\t")[1:]])
    rows = np.array([[float(v) for v in ln.split("\t")] for ln in lines[3:]])
    t_centers, mags = rows[:, 0], rows[:, 1:]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.pcolormesh(t_centers, freqs, mags.T, shading="nearest", cmap="magma")
    ax.set_xlabel("t (a.u.)")
    ax.set_ylabel(r"$\omega$ (a.u.)")
    out = outdir / "spectrogram.png"
    fig.savefig(out, dpi=160, bbox_inches="tight")
    plt.close(fig)
    return out


if __name__ == "__main__":
    target = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("out")
    made = []
    if (target / "landscape.tsv").exists():
        made.append(plot_landscape(target))
    if (target / "trajectory.tsv").exists():
        made.append(plot_trajectory(target))
    if (target / "final.pulse").exists():
        made.append(plot_field_and_spectrum(target))
        made.append(plot_spectrogram(target))
    for path in made:
        print(path)
