"""Control-field representation and spectral analysis.

A pulse is a real field sampled on a uniform time grid. The module provides
the closed-form two-parameter pulse family used for orientation, running-area
bookkeeping based on the composite trapezoid rule (the single quadrature used
everywhere areas enter the algorithms), discrete spectra with a DC bin
proportional to the trapezoid area, hard low-frequency filtering, Gaussian
windowed spectrograms, and the odd Gauss-Hermite guess shape.
"""

from __future__ import annotations

import numpy as np
from dataclasses import dataclass


@dataclass(frozen=True)
class Pulse:
    """Real control field E(t_n) on the uniform grid t_n = t0 + n*dt (a.u.)."""

    t0: float
    dt: float
    samples: np.ndarray

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if not np.isfinite(self.t0) or not np.isfinite(self.dt):
            raise ValueError("t0 and dt must be finite")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if samples.ndim != 1 or samples.size < 2:
            raise ValueError("need at least 2 samples")
        if not np.all(np.isfinite(samples)):
            raise ValueError("samples must be finite")
        samples = samples.copy()
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    @property
    def n(self) -> int:
        return self.samples.size

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n)

    @property
    def duration(self) -> float:
        return self.dt * (self.n - 1)

    @property
    def peak(self) -> float:
        return float(np.max(np.abs(self.samples)))

    def scaled(self, factor: float) -> "Pulse":
        return Pulse(self.t0, self.dt, self.samples * factor)

    def with_samples(self, samples: np.ndarray) -> "Pulse":
        return Pulse(self.t0, self.dt, samples)


@dataclass(frozen=True)
class Spectrum:
    """Discrete Fourier transform with a physical angular-frequency axis.

    amplitudes[k] = dt * sum_n E_n exp(-i w_k (t0 + n dt)), so the w=0 bin
    equals the rectangle-rule area of the pulse, which coincides with the
    trapezoid area whenever the endpoint samples vanish.
    """

    frequencies: np.ndarray
    amplitudes: np.ndarray

    def amplitude_at(self, omega: float) -> complex:
        idx = int(np.argmin(np.abs(self.frequencies - omega)))
        return complex(self.amplitudes[idx])

    @property
    def dc(self) -> complex:
        return self.amplitude_at(0.0)


@dataclass(frozen=True)
class Spectrogram:
    window_width: float
    time_centers: np.ndarray
    frequencies: np.ndarray
    magnitudes: np.ndarray  # shape (len(time_centers), len(frequencies))


def eval_family(e0: float, delta: float, f: float, t) -> np.ndarray | float:
    """Closed-form zero-area field E0 cos^2(pi t/delta) sin(2 pi f t).

    Supported on t in [-delta/2, delta/2], zero outside. The odd carrier under
    the even envelope makes the time-integrated area vanish for any (E0,
    delta, f). f is a linear frequency in cycles per a.u. of time.
    """
    if not (np.isfinite(e0) and np.isfinite(delta) and np.isfinite(f)):
        raise ValueError("pulse family parameters must be finite")
    if delta <= 0 or f <= 0:
        raise ValueError("delta and f must be positive")
    t = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t)):
        raise ValueError("t must be finite")
    inside = np.abs(t) <= delta / 2
    out = np.where(
        inside, e0 * np.cos(np.pi * t / delta) ** 2 * np.sin(2 * np.pi * f * t), 0.0
    )
    return out if out.ndim else float(out)


def sample_family(e0: float, delta: float, f: float, n_samples: int) -> Pulse:
    """Sample the closed-form family uniformly over its support.

    Endpoints are pinned to exactly zero (cos^2 vanishes there analytically).
    """
    if n_samples < 16:
        raise ValueError("n_samples must be at least 16")
    t = np.linspace(-delta / 2, delta / 2, n_samples)
    values = np.asarray(eval_family(e0, delta, f, t))
    values[0] = 0.0
    values[-1] = 0.0
    return Pulse(t0=-delta / 2, dt=delta / (n_samples - 1), samples=values)


def area(p: Pulse) -> tuple[float, np.ndarray]:
    """Running and total time-integrated area by the composite trapezoid rule.

    running[n] integrates E over [t0, t_n]; total = running[-1]. Every
    area-dependent term in the control algorithms uses this same rule.
    """
    e = p.samples
    increments = 0.5 * p.dt * (e[1:] + e[:-1])
    running = np.concatenate(([0.0], np.cumsum(increments)))
    return float(running[-1]), running


def spectrum(p: Pulse) -> Spectrum:
    """DFT of the pulse, scaled so amplitudes approximate the continuous FT.

    Frequencies are angular and returned in ascending order. Parseval holds
    exactly: sum |E|^2 dt = sum |amplitude|^2 dw / (2 pi).
    """
    n = p.n
    freqs = 2 * np.pi * np.fft.fftfreq(n, d=p.dt)
    amps = p.dt * np.fft.fft(p.samples) * np.exp(-1j * freqs * p.t0)
    order = np.fft.fftshift(np.arange(n))
    return Spectrum(frequencies=freqs[order], amplitudes=amps[order])


def filter_low_frequencies(p: Pulse, cutoff: float) -> Pulse:
    """Remove all spectral content with |w| < cutoff by a hard mask.

    The samples are treated as one period of length (n-1)*dt, with the last
    sample the periodic image of the first. Masking the DC bin of that
    representation makes the trapezoid area of the output exactly zero, and
    filtering twice with the same cutoff is the identity.
    """
    nyquist = np.pi / p.dt
    if not (0 < cutoff < nyquist):
        raise ValueError(f"cutoff must lie in (0, {nyquist:g}) for this grid")
    m = p.n - 1
    y = p.samples[:m]
    freqs = 2 * np.pi * np.fft.fftfreq(m, d=p.dt)
    spec = np.fft.fft(y)
    spec[np.abs(freqs) < cutoff] = 0.0
    filtered = np.fft.ifft(spec)
    scale = max(float(np.max(np.abs(filtered))), 1e-300)
    resid = float(np.max(np.abs(filtered.imag)))
    if resid > 1e-10 * scale:
        raise FloatingPointError(f"imaginary residue {resid:.3e} after masking")
    out = np.empty(p.n)
    out[:m] = filtered.real
    out[m] = out[0]  # periodic wrap closes the trapezoid sum at exactly zero
    return Pulse(p.t0, p.dt, out)


def spectrogram(p: Pulse, window_width: float, n_centers: int) -> Spectrogram:
    """Windowed Fourier magnitudes with a Gaussian window, sigma = width/4.

    The magnitude matrix is normalized to a global maximum of one (left
    untouched for an all-zero pulse).
    """
    if window_width < 4 * p.dt:
        raise ValueError("window_width must be at least 4*dt")
    if n_centers < 1:
        raise ValueError("need at least one window center")
    sigma = window_width / 4.0
    t = p.times
    centers = np.linspace(t[0], t[-1], n_centers)
    freqs = 2 * np.pi * np.fft.rfftfreq(p.n, d=p.dt)
    mags = np.empty((n_centers, freqs.size))
    for i, tc in enumerate(centers):
        w = np.exp(-0.5 * ((t - tc) / sigma) ** 2)
        mags[i] = np.abs(np.fft.rfft(p.samples * w)) * p.dt
    peak = mags.max()
    if peak > 0:
        mags /= peak
    return Spectrogram(window_width, centers, freqs, mags)


def envelope_s(t, tf: float):
    """Switching envelope sin^2(pi t / tf) on [0, tf]."""
    t = np.asarray(t, dtype=float)
    if tf <= 0:
        raise ValueError("tf must be positive")
    if np.any(t < -1e-12 * tf) or np.any(t > tf * (1 + 1e-12)):
        raise ValueError("t outside [0, tf]")
    out = np.sin(np.pi * t / tf) ** 2
    return out if out.ndim else float(out)


_ODD_ORDERS = (1, 3, 5)


def hermite_guess(
    coeffs,
    width: float,
    center: float,
    n_samples: int,
    span: tuple[float, float] | None = None,
) -> Pulse:
    """Sum of odd-order Gauss-Hermite functions, an exactly zero-area shape.

    E(t) = sum_k c_k H_k(u) exp(-u^2) with u = (t - center)/width and
    k in (1, 3, 5). Only odd orders are used so the analytic area vanishes;
    sampling on a grid symmetric about the center preserves this exactly
    under the trapezoid rule.

    span defaults to center +- 8*width, where the Gaussian tail is dead.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape != (3,):
        raise ValueError("expected three coefficients (orders 1, 3, 5)")
    if width <= 0:
        raise ValueError("width must be positive")
    if not np.any(coeffs != 0.0):
        raise ValueError("at least one coefficient must be nonzero")
    if span is None:
        span = (center - 8 * width, center + 8 * width)
    lo, hi = span
    if hi <= lo:
        raise ValueError("empty span")
    t = np.linspace(lo, hi, n_samples)
    u = (t - center) / width
    herm = np.zeros_like(u)
    for c, order in zip(coeffs, _ODD_ORDERS):
        if c != 0.0:
            hcoef = np.zeros(order + 1)
            hcoef[order] = 1.0
            herm += c * np.polynomial.hermite.hermval(u, hcoef)
    values = herm * np.exp(-(u**2))
    return Pulse(t0=lo, dt=(hi - lo) / (n_samples - 1), samples=values)


def resample(p: Pulse, n_samples: int) -> Pulse:
    """Linear resampling onto a uniform grid with the same span."""
    if n_samples < 2:
        raise ValueError("need at least 2 samples")
    t_new = np.linspace(p.t0, p.t0 + p.duration, n_samples)
    return Pulse(p.t0, (p.duration) / (n_samples - 1), np.interp(t_new, p.times, p.samples))


# --- file formats -----------------------------------------------------------
#
# Pulse files are two-column text (time_au value_au), one sample per line,
# with '#' header lines carrying the grid step and provenance. Values are
# written with 17 significant digits so a write/read cycle is bit exact.


def write_pulse(path, p: Pulse, comment: str = "") -> None:
    with open(path, "w") as fh:
        fh.write("# zeroarea pulse file\n")
        if comment:
            for line in comment.splitlines():
                fh.write(f"# {line}\n")
        fh.write(f"# t0_au = {p.t0:.17e}\n")
        fh.write(f"# dt_au = {p.dt:.17e}\n")
        fh.write(f"# n_samples = {p.n}\n")
        fh.write("# columns: time_au value_au\n")
        for t, v in zip(p.times, p.samples):
            fh.write(f"{t:.17e} {v:.17e}\n")


def read_pulse(path) -> Pulse:
    """Read a pulse file; non-uniform grids are resampled at ingestion."""
    t0 = dt = None
    times, values = [], []
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("t0_au"):
                    t0 = float(body.split("=")[1])
                elif body.startswith("dt_au"):
                    dt = float(body.split("=")[1])
                continue
            cols = line.split()
            if len(cols) < 2:
                raise ValueError(f"malformed pulse line: {line!r}")
            times.append(float(cols[0]))
            values.append(float(cols[1]))
    if len(values) < 2:
        raise ValueError("pulse file holds fewer than 2 samples")
    times = np.asarray(times)
    values = np.asarray(values)
    if t0 is None:
        t0 = float(times[0])
    if dt is None:
        dt = float(times[1] - times[0])
    steps = np.diff(times)
    if np.max(np.abs(steps - dt)) > 1e-9 * max(abs(dt), 1e-30):
        # non-uniform input: resample onto a uniform grid spanning the data
        n = times.size
        uniform = np.linspace(times[0], times[-1], n)
        values = np.interp(uniform, times, values)
        dt = float(uniform[1] - uniform[0])
        t0 = float(uniform[0])
    return Pulse(t0=t0, dt=dt, samples=values)


def write_spectrum(path, s: Spectrum, delimiter: str = "\t") -> None:
    with open(path, "w") as fh:
        fh.write(delimiter.join(["omega_au", "re_amplitude_au", "im_amplitude_au", "abs_amplitude_au"]) + "\n")
        for w, a in zip(s.frequencies, s.amplitudes):
            fh.write(delimiter.join(f"{x:.10e}" for x in (w, a.real, a.imag, abs(a))) + "\n")


def write_spectrogram(path, g: Spectrogram, delimiter: str = "\t") -> None:
    with open(path, "w") as fh:
        fh.write("# spectrogram magnitudes, global max normalized to 1\n")
        fh.write(f"# gaussian window, window_width_au = {g.window_width:.10e}\n")
        header = ["t_center_au"] + [f"omega_au={w:.6e}" for w in g.frequencies]
        fh.write(delimiter.join(header) + "\n")
        for tc, row in zip(g.time_centers, g.magnitudes):
            fh.write(delimiter.join([f"{tc:.10e}"] + [f"{m:.10e}" for m in row]) + "\n")
