"""Fourier averages, finite-volume autocorrelation, and spectrum scans.

Two independent Bragg-intensity estimators:

* fourier route: I(xi) = |c^xi_B|^2 with c^xi_B the volume-normalized Fourier
  average of the weighted patch over a box B;
* autocorrelation route: bin the difference vectors of the patch, then average
  exp(-2 pi i xi.z) against the binned coefficients.

With an unbounded radius and the identity configuration the two agree to
floating-point accuracy, which is the primary cross-check wired into the test
suite. Frequencies follow the character (xi, x) = exp(2 pi i xi.x).
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalDiagnosticError, ResourceLimitError, ValidationError
from .geometry import Box, _vector
from .pointset import WeightedPointSet, _min_separation_raw

# unbounded-radius autocorrelation refuses patches with more pair candidates
_PAIR_BUDGET = 5 * 10**8
# hard ceiling on distinct difference bins (memory guard)
_BIN_BUDGET = 10**7


def _fsum_complex(z: np.ndarray) -> complex:
    """Exactly rounded sum of a complex array (shewchuk accumulation)."""
    return complex(math.fsum(z.real), math.fsum(z.imag))


@dataclass(frozen=True)
class FourierAverage:
    """c^xi_B = (1/vol B) sum over patch points in B of w_x exp(-2 pi i xi.x)."""

    xi: np.ndarray
    value: complex
    box_volume: float
    point_count: int


def fourier_average(wps: WeightedPointSet, box: Box, xi) -> FourierAverage:
    """Volume-normalized Fourier sum of the patch restricted to the box.

    Points enter in canonical (lexicographic) order and both real and
    imaginary parts are accumulated with compensated summation, so the result
    is reproducible bit for bit and satisfies |value| <= (sum |w| in box)/vol.
    """
    if box.dim != wps.dim:
        raise ValidationError(f"box dimension {box.dim} != point set dimension {wps.dim}")
    xi = _vector(xi, dim=wps.dim, name="xi")
    mask = box.contains(wps.points)
    pts = wps.points[mask]
    w = wps.weights[mask]
    z = w * np.exp(-2j * np.pi * (pts @ xi))
    value = _fsum_complex(z) / box.volume
    return FourierAverage(xi, value, box.volume, int(mask.sum()))


def intensity_sequence(wps: WeightedPointSet, boxes, xi) -> tuple[list[float], dict]:
    """|c^xi_B|^2 along a van Hove or Fisher box sequence, with convergence info.

    Every box must sit inside the patch bounding box (padded by one minimum
    separation per side, the resolution below which coverage is moot);
    otherwise the average would silently see truncated geometry.

    Returns (intensities, diagnostics) where diagnostics carries the per-scale
    values, last_gap = |I_n - I_{n-1}|, the tolerance, and a converged flag
    (last_gap < 1e-3 * max(I_n, 1e-6)).
    """
    boxes = list(boxes)
    if not boxes:
        raise ValidationError("need at least one averaging box")
    if len(wps) == 0:
        raise ValidationError("cannot average an empty point set")
    lo, hi = wps.bounding_box
    pad = _min_separation_raw(wps.points) if len(wps) > 1 else 0.0
    for b in boxes:
        if b.dim != wps.dim:
            raise ValidationError(f"box dimension {b.dim} != point set dimension {wps.dim}")
        if np.any(b.lo < lo - pad) or np.any(b.hi > hi + pad):
            raise ValidationError(
                f"averaging box {b.lo.tolist()}..{b.hi.tolist()} exceeds the patch "
                "bounding box; generate a larger patch first"
            )
    intensities = [abs(fourier_average(wps, b, xi).value) ** 2 for b in boxes]
    if len(intensities) > 1:
        last_gap = abs(intensities[-1] - intensities[-2])
    else:
        last_gap = float("nan")
    tol = 1e-3 * max(intensities[-1], 1e-6)
    diagnostics = {
        "intensities": list(intensities),
        "last_gap": last_gap,
        "tol": tol,
        "converged": bool(last_gap < tol),
    }
    return intensities, diagnostics


@dataclass(frozen=True)
class AutocorrelationPatch:
    """Binned finite-volume autocorrelation of a patch.

    keys holds the quantized difference vectors (int64 multiples of
    bin_epsilon, lexicographically sorted), coeffs the volume-normalized
    coefficients, reps one raw (unrounded) difference per bin, spreads the
    per-axis spread of raw differences that fell into the bin. Hermitian
    symmetry is structural: the bin at -q carries the conjugate coefficient.
    """

    keys: np.ndarray
    coeffs: np.ndarray
    reps: np.ndarray
    spreads: np.ndarray
    bin_epsilon: float
    normalizing_volume: float
    max_radius: float | None
    source_box: Box
    point_count: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        keys = np.asarray(self.keys, dtype=np.int64)
        coeffs = np.asarray(self.coeffs, dtype=complex)
        reps = np.asarray(self.reps, dtype=float)
        spreads = np.asarray(self.spreads, dtype=float)
        n = len(keys)
        if coeffs.shape != (n,) or reps.shape != keys.shape or spreads.shape != keys.shape:
            raise ValidationError("inconsistent autocorrelation bin arrays")
        for a in (keys, coeffs, reps, spreads):
            a.setflags(write=False)
        object.__setattr__(self, "keys", keys)
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "reps", reps)
        object.__setattr__(self, "spreads", spreads)

    def __len__(self) -> int:
        return len(self.keys)

    @property
    def dim(self) -> int:
        return self.keys.shape[1]

    @property
    def bins(self) -> dict:
        """Mapping {quantized difference tuple: coefficient}."""
        return {tuple(int(v) for v in k): complex(c) for k, c in zip(self.keys, self.coeffs)}

    def max_bin_spread(self) -> float:
        """Largest per-axis spread of raw differences sharing a bin.

        Rounding to the nearest bin keeps this below bin_epsilon by
        construction; values approaching bin_epsilon mean distinct difference
        classes are being merged and the quantization is too coarse.
        """
        return float(self.spreads.max()) if len(self) else 0.0


def _aggregate_bins(acc: dict, qkeys: np.ndarray, raw: np.ndarray, prod: np.ndarray) -> None:
    """Fold one batch of quantized pairs into the running bin dictionary.

    acc maps key tuple -> [complex sum, first raw diff, per-axis raw min,
    per-axis raw max]. Batches arrive in a deterministic order, so the stored
    representative (first raw difference seen) is reproducible.
    """
    if len(qkeys) == 0:
        return
    order = np.lexsort(qkeys.T[::-1])
    qs = qkeys[order]
    ds = raw[order]
    ps = prod[order]
    change = np.any(qs[1:] != qs[:-1], axis=1)
    starts = np.concatenate([[0], np.flatnonzero(change) + 1])
    sums_r = np.add.reduceat(ps.real, starts)
    sums_i = np.add.reduceat(ps.imag, starts)
    mins = np.stack([np.minimum.reduceat(ds[:, j], starts) for j in range(ds.shape[1])], axis=1)
    maxs = np.stack([np.maximum.reduceat(ds[:, j], starts) for j in range(ds.shape[1])], axis=1)
    reps = ds[starts]
    for i, s in enumerate(starts):
        key = tuple(int(v) for v in qs[s])
        entry = acc.get(key)
        if entry is None:
            acc[key] = [complex(sums_r[i], sums_i[i]), reps[i].copy(), mins[i].copy(), maxs[i].copy()]
        else:
            entry[0] += complex(sums_r[i], sums_i[i])
            np.minimum(entry[2], mins[i], out=entry[2])
            np.maximum(entry[3], maxs[i], out=entry[3])
    if len(acc) > _BIN_BUDGET:
        raise ResourceLimitError(
            f"autocorrelation produced more than {_BIN_BUDGET} distinct difference "
            "bins; truncate with max_radius or coarsen bin_epsilon"
        )


def _quantize(raw: np.ndarray, eps: float) -> np.ndarray:
    q = np.round(raw / eps)
    if np.any(np.abs(q) > 2.0**62):
        raise NumericalDiagnosticError(
            "difference bin index overflows int64; bin_epsilon is too small for "
            "the patch diameter"
        )
    return q.astype(np.int64)


def autocorrelation(
    wps: WeightedPointSet,
    box: Box,
    max_radius: float | None = None,
    bin_epsilon: float | None = None,
) -> AutocorrelationPatch:
    """Volume-normalized autocorrelation of the patch restricted to a box.

    Accumulates w_x conj(w_y) over ordered pairs with |x - y| <= max_radius
    into epsilon-grid bins round((x - y)/eps) and divides by vol(box). With
    max_radius None all pairs enter and the Fourier transform of the bins
    reproduces |c^xi_box|^2 exactly (the identity configuration of
    intensity_from_autocorr).

    bin_epsilon defaults to 1e-6 times the minimum separation and must stay
    below half the minimum separation so distinct points cannot share a bin.
    In one dimension pairs are generated by sorted index offset, stopping once
    the smallest gap at an offset exceeds max_radius; in higher dimensions a
    spatial kd-tree query produces the pairs.
    """
    if box.dim != wps.dim:
        raise ValidationError(f"box dimension {box.dim} != point set dimension {wps.dim}")
    if max_radius is not None and not max_radius > 0:
        raise ValidationError("max_radius must be positive or None for unbounded")
    mask = box.contains(wps.points)
    pts = wps.points[mask]
    w = wps.weights[mask]
    n = len(pts)
    sep = _min_separation_raw(pts) if n > 1 else None
    if bin_epsilon is None:
        bin_epsilon = 1e-6 * sep if sep is not None else 1e-6
    if not bin_epsilon > 0:
        raise ValidationError("bin_epsilon must be positive")
    if sep is not None and not bin_epsilon < sep / 2:
        raise ValidationError(
            f"bin_epsilon {bin_epsilon:.3g} must be below half the minimum "
            f"separation {sep:.3g} or distinct difference classes would merge"
        )
    if max_radius is None and n * n > _PAIR_BUDGET:
        raise ResourceLimitError(
            f"unbounded autocorrelation of {n} points needs {n * n:.2e} pairs; "
            "pass max_radius to truncate"
        )

    acc: dict = {}
    if n > 1 and wps.dim == 1:
        x = pts[:, 0]
        for off in range(1, n):
            d = x[off:] - x[:-off]
            if max_radius is not None:
                if d.min() > max_radius:
                    break
                keep = d <= max_radius
                d = d[keep]
                prod = w[off:][keep] * np.conj(w[:-off][keep])
            else:
                prod = w[off:] * np.conj(w[:-off])
            _aggregate_bins(acc, _quantize(d[:, None], bin_epsilon), d[:, None], prod)
    elif n > 1:
        if max_radius is not None:
            from scipy.spatial import cKDTree

            pairs = cKDTree(pts).query_pairs(max_radius, output_type="ndarray")
            pairs = pairs[np.lexsort((pairs[:, 1], pairs[:, 0]))]
            for start in range(0, len(pairs), 2**20):
                ij = pairs[start : start + 2**20]
                d = pts[ij[:, 1]] - pts[ij[:, 0]]
                prod = w[ij[:, 1]] * np.conj(w[ij[:, 0]])
                _aggregate_bins(acc, _quantize(d, bin_epsilon), d, prod)
        else:
            block = max(1, 2**21 // n)
            for i0 in range(0, n, block):
                i1 = min(i0 + block, n)
                d = pts[None, i0:i1, :] - pts[:, None, :]  # d[j, i] = x_i - x_j
                jj, ii = np.meshgrid(np.arange(n), np.arange(i0, i1), indexing="ij")
                upper = ii > jj
                d = d.reshape(n * (i1 - i0), wps.dim)[upper.ravel()]
                prod = (w[ii] * np.conj(w[jj]))[upper]
                _aggregate_bins(acc, _quantize(d, bin_epsilon), d, prod)

    dim = wps.dim
    m = len(acc)
    keys = np.zeros((2 * m + 1, dim), dtype=np.int64)
    coeffs = np.zeros(2 * m + 1, dtype=complex)
    reps = np.zeros((2 * m + 1, dim))
    spreads = np.zeros((2 * m + 1, dim))
    vol = box.volume
    # diagonal bin: ordered pairs (x, x) contribute |w_x|^2; no distinct pair
    # can land here because bin_epsilon < min_separation / 2
    coeffs[0] = math.fsum(np.abs(w) ** 2) / vol
    for i, (key, entry) in enumerate(acc.items()):
        csum, rep, rmin, rmax = entry
        keys[2 * i + 1] = key
        coeffs[2 * i + 1] = csum / vol
        reps[2 * i + 1] = rep
        spreads[2 * i + 1] = rmax - rmin
        keys[2 * i + 2] = tuple(-v for v in key)
        coeffs[2 * i + 2] = np.conj(csum) / vol
        reps[2 * i + 2] = -rep
        spreads[2 * i + 2] = rmax - rmin
    order = np.lexsort(keys.T[::-1])
    patch = AutocorrelationPatch(
        keys[order],
        coeffs[order],
        reps[order],
        spreads[order],
        float(bin_epsilon),
        vol,
        None if max_radius is None else float(max_radius),
        box,
        point_count=n,
    )
    bad = patch.max_bin_spread()
    if bad > bin_epsilon:
        raise NumericalDiagnosticError(
            f"one bin absorbed raw differences spread {bad:.3g} > bin_epsilon "
            f"{bin_epsilon:.3g}; distinct difference classes were merged"
        )
    return patch


def intensity_from_autocorr(patch: AutocorrelationPatch, xi, averaging_box: Box | None = None) -> float:
    """Bragg intensity estimate from a binned autocorrelation.

    Sums coeff(z) exp(-2 pi i xi.z) over bins (phases evaluated at the stored
    raw representatives). averaging_box None selects every bin and divides by
    the source-box volume, which for an unbounded-radius patch equals
    |c^xi_B|^2 identically; a concrete averaging_box restricts to bins inside
    it and divides by its volume, the truncated estimator. The imaginary part
    must vanish by Hermitian symmetry and is checked, not returned.
    """
    xi = _vector(xi, dim=patch.dim, name="xi")
    if averaging_box is None:
        sel = slice(None)
        denom = patch.normalizing_volume
    else:
        if averaging_box.dim != patch.dim:
            raise ValidationError(
                f"averaging box dimension {averaging_box.dim} != patch dimension {patch.dim}"
            )
        if patch.max_radius is not None:
            corner = np.maximum(np.abs(averaging_box.lo), np.abs(averaging_box.hi))
            if float(np.linalg.norm(corner)) > patch.max_radius * (1 + 1e-12):
                raise ValidationError(
                    "averaging box reaches beyond the truncation radius "
                    f"{patch.max_radius}; differences out there were never accumulated"
                )
        sel = averaging_box.contains(patch.reps)
        denom = averaging_box.volume
    z = patch.coeffs[sel] * np.exp(-2j * np.pi * (patch.reps[sel] @ xi))
    total = _fsum_complex(z)
    value = total.real / denom
    imag = total.imag / denom
    if abs(imag) > 1e-9 + 1e-6 * abs(value):
        warnings.warn(
            f"autocorrelation intensity at xi={xi.tolist()} has imaginary part "
            f"{imag:.3e}; Hermitian symmetry is degraded",
            stacklevel=2,
        )
    return float(value)


@dataclass(frozen=True)
class SpectrumEntry:
    """Intensity at one grid frequency, with its per-scale history."""

    xi: tuple
    intensity: float
    estimator: str
    intensities: tuple
    last_gap: float
    converged: bool
    box_volume: float
    point_count: int


@dataclass(frozen=True)
class Spectrum:
    entries: tuple

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def dim(self) -> int:
        return len(self.entries[0].xi) if self.entries else 1

    def intensity_array(self) -> np.ndarray:
        return np.array([e.intensity for e in self.entries])

    def xi_array(self) -> np.ndarray:
        return np.array([e.xi for e in self.entries])


def scan_spectrum(
    wps: WeightedPointSet,
    box,
    xi_grid,
    estimator: str = "fourier",
    threads: int = 1,
) -> Spectrum:
    """Evaluate the chosen intensity estimator on a frequency grid.

    box may be a single Box or an increasing sequence of boxes; with a
    sequence every entry records the per-scale intensities and the final gap.
    Entries are sorted by xi and independent of the thread count (threads is
    a throughput hint; evaluations are read-only on shared arrays).
    """
    boxes = [box] if isinstance(box, Box) else list(box)
    if not boxes:
        raise ValidationError("need at least one averaging box")
    xis = [_vector(x, dim=wps.dim, name="xi") for x in np.atleast_1d(np.asarray(xi_grid, dtype=float)).reshape(-1, wps.dim)]
    if not xis:
        raise ValidationError("frequency grid is empty")
    if estimator not in ("fourier", "autocorr"):
        raise ValidationError(f"unknown estimator {estimator!r}; use fourier or autocorr")
    xis.sort(key=tuple)

    counts = [int(b.contains(wps.points).sum()) for b in boxes]
    if estimator == "autocorr":
        patches = [autocorrelation(wps, b) for b in boxes]

        def per_scale(xi):
            return [intensity_from_autocorr(p, xi) for p in patches]

    else:

        def per_scale(xi):
            return [abs(fourier_average(wps, b, xi).value) ** 2 for b in boxes]

    def evaluate(xi):
        vals = per_scale(xi)
        gap = abs(vals[-1] - vals[-2]) if len(vals) > 1 else float("nan")
        converged = bool(gap < 1e-3 * max(vals[-1], 1e-6)) if len(vals) > 1 else False
        return SpectrumEntry(
            tuple(float(v) for v in xi),
            float(vals[-1]),
            estimator,
            tuple(float(v) for v in vals),
            float(gap),
            converged,
            boxes[-1].volume,
            counts[-1],
        )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            entries = list(pool.map(evaluate, xis))
    else:
        entries = [evaluate(xi) for xi in xis]
    return Spectrum(tuple(entries))


class Peak(tuple):
    """Located Bragg peak (xi, intensity); xi is scalar for 1D spectra."""

    __slots__ = ()

    def __new__(cls, xi, intensity):
        return tuple.__new__(cls, (xi, intensity))

    @property
    def xi(self):
        return self[0]

    @property
    def intensity(self):
        return self[1]


def _golden_section_max(f, lo: float, hi: float, tol: float = 1e-8) -> tuple[float, float]:
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = float(lo), float(hi)
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def find_peaks(sp: Spectrum, floor: float, refine=None, tol: float = 1e-8) -> list[Peak]:
    """Grid-local maxima of a 1D spectrum with intensity >= floor.

    A point is a maximum when it strictly exceeds its left neighbor and is at
    least its right neighbor (leading edge of plateaus; endpoints compare
    against nothing on the missing side). When refine is given (a callable
    xi -> intensity, the continuous estimator), each maximum is polished by a
    golden-section pass on the bracket of its two grid neighbors.
    """
    if sp.dim != 1:
        raise ValidationError("peak location is defined for 1D spectra only")
    if not floor > 0:
        raise ValidationError("floor must be positive")
    xs = sp.xi_array()[:, 0]
    ys = sp.intensity_array()
    n = len(xs)
    peaks = []
    for i in range(n):
        left = ys[i - 1] if i > 0 else -np.inf
        right = ys[i + 1] if i < n - 1 else -np.inf
        if ys[i] > left and ys[i] >= right and ys[i] >= floor:
            peaks.append(i)
    out = []
    for i in peaks:
        if refine is None:
            out.append(Peak(float(xs[i]), float(ys[i])))
            continue
        lo = xs[i - 1] if i > 0 else xs[i] - (xs[i + 1] - xs[i] if n > 1 else 1.0)
        hi = xs[i + 1] if i < n - 1 else xs[i] + (xs[i] - xs[i - 1] if n > 1 else 1.0)
        x, y = _golden_section_max(refine, lo, hi, tol)
        out.append(Peak(float(x), float(y)))
    return out


def spectrum_to_csv(sp: Spectrum, fh, envelope: dict | None = None) -> None:
    """Write the spectrum in the flat CSV schema, floats at 17 significant digits.

    envelope entries become leading `# key=value` comment lines (reproducible
    run metadata travels with the data).
    """
    dim = sp.dim
    for key in sorted(envelope or {}):
        fh.write(f"# {key}={envelope[key]}\n")
    cols = [f"xi_{j + 1}" for j in range(dim)]
    cols += ["intensity", "estimator", "box_volume", "point_count", "last_gap", "converged"]
    fh.write(",".join(cols) + "\n")
    for e in sp.entries:
        row = [f"{v:.17g}" for v in e.xi]
        row += [
            f"{e.intensity:.17g}",
            e.estimator,
            f"{e.box_volume:.17g}",
            str(e.point_count),
            f"{e.last_gap:.17g}",
            "true" if e.converged else "false",
        ]
        fh.write(",".join(row) + "\n")


def spectrum_from_csv(fh) -> tuple[Spectrum, dict]:
    """Inverse of spectrum_to_csv; returns (spectrum, envelope dict)."""
    envelope = {}
    header = None
    entries = []
    for line in fh:
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                k, v = body.split("=", 1)
                envelope[k.strip()] = v.strip()
            continue
        if header is None:
            header = line.split(",")
            dim = sum(1 for c in header if c.startswith("xi_"))
            continue
        parts = line.split(",")
        rec = dict(zip(header, parts))
        xi = tuple(float(rec[f"xi_{j + 1}"]) for j in range(dim))
        intensity = float(rec["intensity"])
        entries.append(
            SpectrumEntry(
                xi,
                intensity,
                rec["estimator"],
                (intensity,),
                float(rec["last_gap"]),
                rec["converged"] == "true",
                float(rec["box_volume"]),
                int(rec["point_count"]),
            )
        )
    if header is None:
        raise ValidationError("spectrum CSV has no header row")
    return Spectrum(tuple(entries)), envelope
