"""Recover kinematics from normalised scattering traces.

The signal of a spinning rod moving along the standing wave carries three
time scales: the Gaussian envelope of the vertical transit, the node
crossings at nu_trans = 2 v_z / lambda and the rotation at nu_rot = 2 f_rot
(scattering is pi-periodic in the rod orientation). This module pulls each
of them back out.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import convolve1d, uniform_filter1d
from scipy.optimize import curve_fit
from scipy.signal import find_peaks

from .optics import CavityParams
from .scattering import SignalTrace
from .spectral import dominant_frequency, one_sided_power, parabolic_peak

MIN_SAMPLES = 64
PROMINENCE_OVER_MEDIAN = 10.0
PROMINENCE_OVER_STRONGEST = 0.01
SMOOTHING_SAMPLES = 5
ANALYSIS_ENVELOPE = 0.1
NODE_TOUCH = 0.1
DEFAULT_MIN_PROMINENCE = 0.05
MAX_REFINEMENTS = 20
REFINE_ENVELOPE = 0.1


class TraceTooShortError(ValueError):
    pass


class EnvelopeFitError(RuntimeError):
    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message if residual is None else f"{message} (residual rms {residual:.3g})")
        self.residual = residual


class ResolutionError(ValueError):
    pass


class InsufficientMaximaError(ValueError):
    pass


class ModelMismatchWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class Spectrum:
    frequencies: np.ndarray
    power: np.ndarray
    window: str = "hann"

    @property
    def resolution(self) -> float:
        return float(self.frequencies[1] - self.frequencies[0])

    @property
    def total_power(self) -> float:
        return float(self.power.sum())


@dataclass(frozen=True)
class Peak:
    frequency: float
    power: float
    half_width: float  # half width at half maximum [Hz]


@dataclass(frozen=True)
class KinematicsEstimate:
    """Recovered velocities and rotation rate; None marks a value that could
    not be identified in the trace (the reason is in ``warnings``)."""

    v_x: float | None = None
    v_x_sigma: float | None = None
    v_z: float | None = None
    v_z_sigma: float | None = None
    f_rot: float | None = None
    f_rot_sigma: float | None = None
    nu_trans: float | None = None
    nu_rot: float | None = None
    warnings: tuple[str, ...] = ()

    def as_dict(self) -> dict:
        return {
            "v_x": self.v_x, "v_x_sigma": self.v_x_sigma,
            "v_z": self.v_z, "v_z_sigma": self.v_z_sigma,
            "f_rot": self.f_rot, "f_rot_sigma": self.f_rot_sigma,
            "nu_trans": self.nu_trans, "nu_rot": self.nu_rot,
            "warnings": list(self.warnings),
        }


@dataclass(frozen=True)
class EnvelopeFit:
    v_x: float
    t_center: float
    amplitude: float
    v_x_sigma: float
    residual_rms: float
    waist: float

    def __iter__(self):
        # unpacks as (v_x, t_center)
        return iter((self.v_x, self.t_center))

    def __call__(self, t):
        """Unit-peak intensity envelope at times ``t``."""
        return np.exp(-2 * self.v_x**2 * (np.asarray(t) - self.t_center) ** 2 / self.waist**2)


@dataclass(frozen=True, eq=False)
class AxialReconstruction:
    """z(t) up to a global sign and an offset, both unrecoverable from
    intensity alone."""

    t: np.ndarray
    z: np.ndarray
    r: np.ndarray  # normalised cos^2(kz) the reconstruction inverts
    node_times: np.ndarray
    antinode_crossings: int
    turning_points: int

    @property
    def node_crossings(self) -> int:
        return int(self.node_times.size)

    @property
    def sample_rate(self) -> float:
        return float(1.0 / (self.t[1] - self.t[0]))


@dataclass(frozen=True, eq=False)
class RotationRateSeries:
    t: np.ndarray
    f_rot: np.ndarray


def power_spectrum(trace: SignalTrace, window: str = "hann", pad_factor: int = 4) -> Spectrum:
    """One-sided power spectrum, zero-padded by ``pad_factor``.

    With the rectangular window the bins sum to the mean-square value of the
    trace.
    """
    if len(trace) < MIN_SAMPLES:
        raise TraceTooShortError(f"need at least {MIN_SAMPLES} samples, got {len(trace)}")
    freqs, power = one_sided_power(trace.samples, trace.sample_rate, window, pad_factor)
    return Spectrum(freqs, power, window)


def _half_width(power, i: int, df: float) -> float:
    half = power[i] / 2
    lo = i
    while lo > 0 and power[lo] > half:
        lo -= 1
    hi = i
    while hi < len(power) - 1 and power[hi] > half:
        hi += 1
    return 0.5 * (hi - lo) * df


def prominent_peaks(spec: Spectrum, min_frequency: float = 0.0) -> list[Peak]:
    """Local maxima of the spectrum standing out of the background.

    A peak counts when it exceeds 10x the median bin power and 1 % of the
    strongest local maximum above ``min_frequency``; the second condition
    drops the long tail of harmonics and mixing products whose power sits
    far above a near-zero median. Sorted by frequency.
    """
    p = spec.power
    idx, _ = find_peaks(p)
    idx = idx[spec.frequencies[idx] > min_frequency]
    if idx.size == 0:
        return []
    floor = max(PROMINENCE_OVER_MEDIAN * np.median(p), PROMINENCE_OVER_STRONGEST * p[idx].max())
    df = spec.resolution
    peaks = []
    for i in idx[p[idx] >= floor]:
        pos, height = parabolic_peak(p, int(i))
        peaks.append(Peak(pos * df, height, _half_width(p, int(i), df)))
    return peaks


def boxcar_kernel(length: float) -> np.ndarray:
    """Centred sliding-mean weights spanning ``length`` samples.

    ``length`` need not be an integer: the two end taps get the fractional
    overlap, so the mean covers exactly one modulation period.
    """
    half = length / 2
    reach = math.ceil(half - 0.5)
    j = np.arange(-reach, reach + 1)
    overlap = np.clip(np.minimum(j + 0.5, half) - np.maximum(j - 0.5, -half), 0, 1)
    return overlap / length


def rotation_average(trace: SignalTrace, f_rot_hint: float) -> SignalTrace:
    """Sliding mean over one modulation period 1 / (2 f_rot), same grid."""
    if not f_rot_hint > 0:
        raise ValueError(f"f_rot_hint must be positive, got {f_rot_hint}")
    window = 1.0 / (2 * f_rot_hint)
    length = window * trace.sample_rate
    if length < 4:
        raise ResolutionError(
            f"averaging window {window:.3g} s spans {length:.3g} samples at {trace.sample_rate:.4g} Hz; need >= 4"
        )
    avg = convolve1d(np.asarray(trace.samples, dtype=float), boxcar_kernel(length), mode="nearest")
    return SignalTrace(trace.sample_rate, trace.t0, avg, averaging_window=window)


def _gaussian(t, amplitude, t_center, v_x, waist):
    return amplitude * np.exp(-2 * v_x**2 * (t - t_center) ** 2 / waist**2)


def fit_envelope(trace: SignalTrace, cav: CavityParams, min_maxima: int = 5) -> EnvelopeFit:
    """Least-squares fit of A exp(-2 v_x^2 (t - t_c)^2 / w0^2) to the trace.

    Pass a rotation-averaged trace. A first fit uses every sample. When the
    trace still shows the node-crossing modulation (at least ``min_maxima``
    local maxima of signal / fitted envelope), the fit is repeated on those
    points only: they are the antinode crossings where cos^2(kz) = 1, so the
    time the particle lingers near nodes does not bias the width.

    Raises
    ------
    EnvelopeFitError
        If the fit does not converge or the result is not a single lobe
        inside the trace.
    """
    t = trace.times
    y = np.asarray(trace.samples, dtype=float)
    if trace.averaging_window:
        y = _undo_boxcar(y, trace.averaging_window * trace.sample_rate)
    w = cav.waist
    moments = _moment_width(trace)
    if moments is None or not np.ptp(y) > 0 or not moments[1] > 0:
        raise EnvelopeFitError("trace has no envelope to fit")
    tc0, sd = moments

    # dimensionless parameters keep the finite-difference Jacobian sane:
    # tau = (t - tc0) / sd, shift d in units of sd, b = v_x sd / w0
    def scaled(tau, a, d, b):
        return a * np.exp(-2 * b**2 * (tau - d) ** 2)

    def fit(tf, yf, p0):
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                return curve_fit(scaled, (tf - tc0) / sd, yf, p0=p0, method="trf", max_nfev=5000)
        except (RuntimeError, ValueError) as exc:
            raise EnvelopeFitError(f"envelope fit did not converge: {exc}") from None

    popt, pcov = fit(t, y, [float(y.max()), 0.0, 0.5])
    used = (t, y)
    # Refine on the antinode crossings, i.e. the maxima of signal / envelope.
    # Maxima of the signal itself are pulled towards the beam centre.
    for _ in range(MAX_REFINEMENTS):
        g = scaled((t - tc0) / sd, 1.0, popt[1], popt[2])
        inside = np.flatnonzero(g > REFINE_ENVELOPE)
        if inside.size < 3:
            break
        ratio = y[inside] / g[inside]
        crossings, _ = find_peaks(ratio, prominence=0.1 * np.ptp(ratio))
        crossings = inside[crossings]
        if crossings.size < min_maxima:
            break
        try:
            new, new_cov = fit(t[crossings], y[crossings], popt)
        except EnvelopeFitError:
            break
        if not np.isfinite(new_cov).all():
            break
        converged = abs(abs(new[2]) - abs(popt[2])) <= 1e-9 * abs(popt[2])
        popt, pcov, used = new, new_cov, (t[crossings], y[crossings])
        if converged:
            break
    tf, yf = used
    a, d, b = popt
    vx = abs(b) * w / sd
    tc = tc0 + d * sd
    resid = float(np.sqrt(np.mean((yf - _gaussian(tf, a, tc, vx, w)) ** 2)))
    half_width = w / vx if vx > 0 else math.inf
    if not (a > 0 and np.isfinite(pcov).all()):
        raise EnvelopeFitError("degenerate envelope fit", resid)
    if not (t[0] <= tc <= t[-1]) or half_width > 0.4 * trace.duration:
        raise EnvelopeFitError("no single envelope lobe inside the trace", resid)
    outside = np.abs(t - tc) > 2 * half_width
    if outside.any() and np.mean(y[outside]) > 0.2 * a:
        raise EnvelopeFitError("signal does not fall off outside the fitted lobe", resid)
    sigma_vx = math.sqrt(abs(pcov[2, 2])) * w / sd
    return EnvelopeFit(
        v_x=float(vx),
        t_center=float(tc),
        amplitude=float(a),
        v_x_sigma=float(sigma_vx),
        residual_rms=resid,
        waist=w,
    )


def _moment_width(trace: SignalTrace) -> tuple[float, float] | None:
    """Centre and rms width of the trace treated as a distribution."""
    y = np.clip(np.asarray(trace.samples, dtype=float), 0, None)
    total = y.sum()
    if not total > 0:
        return None
    t = trace.times
    tc = float(np.sum(t * y) / total)
    return tc, math.sqrt(float(np.sum((t - tc) ** 2 * y) / total))


def extract_kinematics(trace: SignalTrace, cav: CavityParams, window: str = "hann") -> KinematicsEstimate:
    """v_x from the envelope, v_z and f_rot from the two spectral lines.

    nu_trans is taken as the lowest prominent peak above the envelope lobe
    and nu_rot as the strongest prominent peak above nu_trans. A single line
    is read as nu_trans. The envelope is fitted after averaging over the
    rotation. Uncertainties are peak half widths at half maximum and the fit
    standard error. Without a fittable transit envelope nothing is reported.
    """
    moments = _moment_width(trace)
    if moments is None:
        return KinematicsEstimate(warnings=("v_x: empty trace", "v_z: empty trace", "f_rot: empty trace"))
    rough_vx = cav.waist / (2 * moments[1]) if moments[1] > 0 else math.inf
    # the envelope lobe in the spectrum has fallen by ~1e-7 at this frequency
    lobe = 4 * rough_vx / (math.pi * cav.waist)
    peaks = prominent_peaks(power_spectrum(trace, window), min_frequency=lobe)

    est, notes = {}, []
    if not peaks:
        notes += ["v_z: no spectral line above the envelope lobe", "f_rot: no spectral line"]
    else:
        trans = peaks[0]
        est.update(nu_trans=trans.frequency, v_z=trans.frequency * cav.wavelength / 2,
                   v_z_sigma=trans.half_width * cav.wavelength / 2)
        if len(peaks) > 1:
            rot = max(peaks[1:], key=lambda p: (p.power, -p.frequency))
            est.update(nu_rot=rot.frequency, f_rot=rot.frequency / 2, f_rot_sigma=rot.half_width / 2)
        else:
            notes.append("f_rot: only one spectral line found")

    smoothed = trace
    if "f_rot" in est:
        try:
            smoothed = rotation_average(trace, est["f_rot"])
        except ResolutionError as exc:
            notes.append(f"v_x: fitted without rotation averaging ({exc})")
    try:
        env = fit_envelope(smoothed, cav)
    except EnvelopeFitError as exc:
        return KinematicsEstimate(
            warnings=(f"v_x: {exc}", "v_z: no transit envelope", "f_rot: no transit envelope")
        )
    est.update(v_x=env.v_x, v_x_sigma=env.v_x_sigma)
    return KinematicsEstimate(**est, warnings=tuple(notes))


def _undo_boxcar(y: np.ndarray, length: float) -> np.ndarray:
    """Invert a sliding mean of ``length`` samples below half its first zero.

    The mean nulls the rotation harmonics but also damps the slower
    node-crossing modulation; dividing by its transfer function restores
    that part, and everything above the cut is dropped.
    """
    size = y.size
    nfft = 1 << (2 * size - 1).bit_length()
    kernel = boxcar_kernel(length)
    reach = kernel.size // 2
    circ = np.zeros(nfft)
    circ[: reach + 1] = kernel[reach:]
    if reach:
        circ[-reach:] = kernel[:reach]
    h = np.fft.rfft(circ).real  # symmetric kernel: real response
    f = np.fft.rfftfreq(nfft)  # cycles per sample
    keep = f < 0.5 / length
    pad = np.concatenate([y, np.full(nfft - size, y[-1])])
    spec = np.fft.rfft(pad)
    out = np.zeros_like(spec)
    out[keep] = spec[keep] / h[keep]
    return np.fft.irfft(out, nfft)[:size]


def reconstruct_axial_trajectory(
    averaged: SignalTrace,
    envelope_fit: EnvelopeFit,
    cav: CavityParams,
    envelope_threshold: float = ANALYSIS_ENVELOPE,
    node_touch: float = NODE_TOUCH,
) -> AxialReconstruction:
    """Invert the rotation-averaged signal, proportional to cos^2(kz) times
    the envelope, for z(t).

    Steps: undo the damping of the sliding mean (when the trace records
    one), divide by the fitted envelope, and renormalise so each antinode
    crossing (local maximum) reaches 1 and each node crossing (local minimum
    below ``node_touch``) reaches 0. Then kz = m pi +- arccos(sqrt(r)).
    The branch sign flips at every antinode crossing; at a node crossing it
    flips and m steps on. Minima that stay clear of zero are turning points
    inside one well and leave the branch alone. Extremum detection runs on
    a 5-sample smoothed copy of r and is the main heuristic here.
    """
    t_all = averaged.times
    y = np.asarray(averaged.samples, dtype=float)
    if averaged.averaging_window:
        y = _undo_boxcar(y, averaged.averaging_window * averaged.sample_rate)
    g = envelope_fit(t_all)
    region = g > envelope_threshold
    if region.sum() < 8:
        raise ValueError("fitted envelope leaves too few samples above threshold")
    t = t_all[region]
    ratio = y[region] / g[region]
    smooth = uniform_filter1d(ratio, SMOOTHING_SAMPLES, mode="nearest")

    # antinode crossings first: they fix the scale
    prom = 0.05 * np.ptp(smooth) if np.ptp(smooth) > 0 else 1.0
    maxima, _ = find_peaks(smooth, prominence=prom)
    minima, _ = find_peaks(-smooth, prominence=prom)
    if maxima.size:
        hi = np.interp(np.arange(t.size), maxima, smooth[maxima])
    else:
        hi = np.full(t.size, smooth.max())
    r_min = smooth / hi
    nodes = minima[r_min[minima] < node_touch]
    turns = minima[r_min[minima] >= node_touch]
    lo = np.interp(np.arange(t.size), nodes, smooth[nodes]) if nodes.size else np.zeros(t.size)
    r_raw = (ratio - lo) / np.maximum(hi - lo, 1e-300)
    outside = (r_raw < -0.05) | (r_raw > 1.05)
    if outside.mean() > 0.1:
        warnings.warn(
            f"{outside.mean():.0%} of samples outside [-0.05, 1.05] before clipping", ModelMismatchWarning
        )
    r = np.clip(r_raw, 0.0, 1.0)
    u = np.arccos(np.sqrt(r))

    events = sorted([(int(i), "antinode") for i in maxima] + [(int(i), "node") for i in nodes])
    kz = np.empty(t.size)
    sign, m, start = 1, 0, 0
    for i, kind in events + [(t.size, "end")]:
        kz[start:i] = m * math.pi + sign * u[start:i]
        if kind == "node":
            m += sign
        sign = -sign
        start = i
    return AxialReconstruction(
        t=t,
        z=kz / cav.k,
        r=r,
        node_times=t[nodes],
        antinode_crossings=int(maxima.size),
        turning_points=int(turns.size),
    )


def align_to_reference(z_rec, z_ref) -> tuple[np.ndarray, float]:
    """Best match of ``z_rec`` to ``z_ref`` over a global sign flip and a
    least-squares offset. Returns the aligned series and its rms error."""
    z_rec = np.asarray(z_rec)
    z_ref = np.asarray(z_ref)
    best = None
    for s in (1.0, -1.0):
        cand = s * z_rec
        cand = cand + np.mean(z_ref - cand)
        rms = float(np.sqrt(np.mean((cand - z_ref) ** 2)))
        if best is None or rms < best[1]:
            best = (cand, rms)
    return best


@dataclass(frozen=True)
class ChannellingVerdict:
    channelled: bool
    trap_frequency: float | None
    reason: str = ""


def detect_channelling(rec: AxialReconstruction, envelope_fit: EnvelopeFit, threshold: float = 0.5) -> ChannellingVerdict:
    """Channelled when the reconstructed path crosses no node while the
    envelope exceeds ``threshold``; the trap frequency is then the dominant
    frequency of z in that window."""
    inside = envelope_fit(rec.t) > threshold
    if inside.sum() < 16:
        return ChannellingVerdict(False, None, "window too short")
    t_in = rec.t[inside]
    crossed = np.count_nonzero((rec.node_times >= t_in[0]) & (rec.node_times <= t_in[-1]))
    if crossed:
        return ChannellingVerdict(False, None, f"{crossed} node crossings near the beam centre")
    f = dominant_frequency(rec.z[inside], rec.sample_rate)
    return ChannellingVerdict(True, f, "" if f else "window too short for a spectral estimate")


def instantaneous_rotation_rate(trace: SignalTrace, min_prominence: float = DEFAULT_MIN_PROMINENCE) -> RotationRateSeries:
    """Rotation rate from the spacing of adjacent scattering maxima.

    Two maxima are half a rotation apart, so each pair gives
    1 / (2 (t_{i+1} - t_i)), stamped at the midpoint. Maxima positions are
    refined by parabolic interpolation.
    """
    y = np.asarray(trace.samples, dtype=float)
    idx, _ = find_peaks(y, prominence=min_prominence * (y.max() if y.size else 1.0))
    if idx.size < 3:
        raise InsufficientMaximaError(f"found {idx.size} maxima above prominence {min_prominence}; need 3")
    pos = np.empty(idx.size)
    for j, i in enumerate(idx):
        if 0 < i < y.size - 1:
            a, b, c = y[i - 1], y[i], y[i + 1]
            d = a - 2 * b + c
            pos[j] = i + (0.5 * (a - c) / d if d < 0 else 0.0)
        else:
            pos[j] = i
    tm = trace.t0 + pos / trace.sample_rate
    gaps = np.diff(tm)
    return RotationRateSeries(t=0.5 * (tm[1:] + tm[:-1]), f_rot=1.0 / (2 * gaps))
