"""Weighted point patches and their generators (lattices, substitution chains).

A WeightedPointSet is a finite patch of a uniformly discrete point set in
R^d with complex weights (default 1). Patches are kept in canonical form
(points sorted lexicographically) so that generation, serialization, and
byte-level diffing are reproducible.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .geometry import Box, _vector


@dataclass(frozen=True)
class WeightedPointSet:
    """Finite patch of a weighted point set in R^dim, canonically sorted.

    Parameters
    ----------
    dim : int
        Ambient dimension.
    points : (n, dim) array
        Point coordinates; sorted lexicographically on construction.
    weights : (n,) complex array, optional
        Per-point weights, default all 1.
    meta : dict
        Provenance record: {"generator": str, "params": obj, "seed": int|None}.
    """

    dim: int
    points: np.ndarray
    weights: np.ndarray = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.dim < 1:
            raise ValidationError(f"dim must be at least 1, got {self.dim}")
        pts = np.asarray(self.points, dtype=float)
        if pts.size == 0:
            pts = pts.reshape(0, self.dim)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[1] != self.dim:
            raise ValidationError(
                f"points must be an (n, {self.dim}) array, got shape {pts.shape}"
            )
        if not np.all(np.isfinite(pts)):
            raise ValidationError("points contain non-finite coordinates")
        w = self.weights
        if w is None:
            w = np.ones(len(pts), dtype=complex)
        else:
            w = np.asarray(w, dtype=complex)
            if w.shape != (len(pts),):
                raise ValidationError(
                    f"weights must have shape ({len(pts)},), got {w.shape}"
                )
            if not np.all(np.isfinite(w.real) & np.isfinite(w.imag)):
                raise ValidationError("weights contain non-finite values")
        # canonical order: lexicographic by x1, then x2, ...
        order = np.lexsort(pts.T[::-1])
        pts = pts[order]
        w = w[order]
        if len(pts) > 1:
            dup = np.all(pts[1:] == pts[:-1], axis=1)
            if np.any(dup):
                i = int(np.argmax(dup))
                raise ValidationError(f"duplicate point at {pts[i + 1].tolist()}")
        pts.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        """(min, max) corner vectors of the points; requires a nonempty patch."""
        if len(self) == 0:
            raise ValidationError("empty patch has no bounding box")
        return self.points.min(axis=0), self.points.max(axis=0)

    def to_json(self) -> dict:
        obj = {"dim": self.dim, "points": self.points.tolist()}
        if np.any(self.weights != 1):
            obj["weights"] = [[z.real, z.imag] for z in self.weights]
        obj["meta"] = _meta_record(self.meta)
        return obj

    @classmethod
    def from_json(cls, obj: dict) -> "WeightedPointSet":
        try:
            dim = int(obj["dim"])
            pts = np.asarray(obj["points"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"point-set object needs 'dim' and 'points': {exc}")
        if pts.size == 0:
            pts = pts.reshape(0, dim)
        w = None
        if obj.get("weights") is not None:
            raw = obj["weights"]
            if len(raw) != len(pts) or any(len(p) != 2 for p in raw):
                raise ValidationError("'weights' must be [[re, im], ...] matching points")
            w = np.array([complex(p[0], p[1]) for p in raw])
        return cls(dim, pts, w, dict(obj.get("meta") or {}))

    def dump(self, fp) -> None:
        json.dump(self.to_json(), fp, sort_keys=True, indent=1)

    @classmethod
    def load(cls, fp) -> "WeightedPointSet":
        return cls.from_json(json.load(fp))


def _meta_record(meta: dict) -> dict:
    rec = dict(meta)
    rec.setdefault("generator", "unknown")
    rec.setdefault("params", {})
    rec.setdefault("seed", None)
    return rec


@dataclass(frozen=True)
class Substitution:
    """Symbolic substitution with a geometric realization.

    Parameters
    ----------
    alphabet : tuple of single-character symbols
    rules : dict symbol -> word (nonempty string over the alphabet)
    lengths : dict symbol -> positive tile length
    seed : symbol the fixed-point iteration starts from
    """

    alphabet: tuple
    rules: dict
    lengths: dict
    seed: str

    def __post_init__(self):
        alphabet = tuple(self.alphabet)
        object.__setattr__(self, "alphabet", alphabet)
        if not alphabet or any(not isinstance(s, str) or len(s) != 1 for s in alphabet):
            raise ValidationError("alphabet must be nonempty single-character symbols")
        if len(set(alphabet)) != len(alphabet):
            raise ValidationError("alphabet symbols must be distinct")
        for s in alphabet:
            word = self.rules.get(s)
            if not word or any(c not in alphabet for c in word):
                raise ValidationError(f"rule for {s!r} must be a nonempty word over the alphabet")
            ln = self.lengths.get(s)
            if ln is None or not float(ln) > 0:
                raise ValidationError(f"length for {s!r} must be positive")
        if self.seed not in alphabet:
            raise ValidationError(f"seed symbol {self.seed!r} not in alphabet")

    def incidence_matrix(self) -> np.ndarray:
        """M[i, j] = number of occurrences of alphabet[i] in rules[alphabet[j]]."""
        n = len(self.alphabet)
        m = np.zeros((n, n), dtype=np.int64)
        for j, s in enumerate(self.alphabet):
            for c in self.rules[s]:
                m[self.alphabet.index(c), j] += 1
        return m

    def is_primitive(self) -> bool:
        """Entrywise positivity of the |alphabet|^2-th incidence-matrix power.

        Works on the 0/1 positivity pattern so large powers cannot overflow.
        """
        n = len(self.alphabet)
        base = (self.incidence_matrix() > 0).astype(np.int64)
        power = np.eye(n, dtype=np.int64)
        exp = n * n
        while exp:
            if exp & 1:
                power = np.minimum(power @ base, 1)
            base = np.minimum(base @ base, 1)
            exp >>= 1
        return bool(np.all(power > 0))


_NAMED_SUBSTITUTIONS = {
    "fibonacci": dict(
        alphabet=("a", "b"),
        rules={"a": "ab", "b": "a"},
        lengths={"a": (1 + np.sqrt(5)) / 2, "b": 1.0},
        seed="a",
    ),
    "thue-morse": dict(
        alphabet=("a", "b"),
        rules={"a": "ab", "b": "ba"},
        lengths={"a": 1.0, "b": 1.0},
        seed="a",
    ),
    "silver-mean": dict(
        alphabet=("a", "b"),
        rules={"a": "aab", "b": "a"},
        lengths={"a": 1 + np.sqrt(2), "b": 1.0},
        seed="a",
    ),
}


def named_substitution(name: str) -> Substitution:
    """Built-in substitution presets: fibonacci, thue-morse, silver-mean."""
    try:
        return Substitution(**_NAMED_SUBSTITUTIONS[name])
    except KeyError:
        known = ", ".join(sorted(_NAMED_SUBSTITUTIONS))
        raise ValidationError(f"unknown substitution {name!r}; presets: {known}")


def lattice_points(dim: int, box: Box, spacing: float) -> WeightedPointSet:
    """All points of spacing * Z^dim inside the half-open box, weight 1."""
    if dim < 1:
        raise ValidationError(f"dim must be at least 1, got {dim}")
    if box.dim != dim:
        raise ValidationError(f"box dimension {box.dim} != dim {dim}")
    if not spacing > 0:
        raise ValidationError(f"spacing must be positive, got {spacing}")
    axes = []
    for j in range(dim):
        k0 = int(np.ceil(box.lo[j] / spacing))
        k1 = int(np.ceil(box.hi[j] / spacing))
        axes.append(spacing * np.arange(k0, k1, dtype=float))
    grids = np.meshgrid(*axes, indexing="ij") if dim > 1 else [axes[0]]
    pts = np.stack([g.ravel() for g in grids], axis=1)
    pts = pts[box.contains(pts)]  # guard float edge cases of the ceil bounds
    meta = {
        "generator": "lattice",
        "params": {"dim": dim, "box": box.to_json(), "spacing": spacing},
        "seed": None,
    }
    return WeightedPointSet(dim, pts, None, meta)


def substitution_fixed_point(s: Substitution, min_length: int) -> str:
    """Prefix of the one-sided fixed point with length >= min_length.

    Iterates the rules starting from the seed symbol. The first iterate whose
    length reaches min_length is returned untruncated.
    """
    if min_length < 1:
        raise ValidationError(f"min_length must be at least 1, got {min_length}")
    if s.rules[s.seed][0] != s.seed:
        raise ValidationError(
            f"rule for seed {s.seed!r} must begin with the seed symbol "
            f"(got {s.rules[s.seed]!r}); the iteration has no fixed point otherwise"
        )
    if not s.is_primitive():
        raise ValidationError("substitution is not primitive")
    w = s.seed
    while len(w) < min_length:
        nxt = "".join(s.rules[c] for c in w)
        if len(nxt) == len(w):
            raise ValidationError("substitution does not expand; fixed point is finite")
        w = nxt
    return w


def word_to_pointset(w: str, lengths: dict, origin: float = 0.0) -> WeightedPointSet:
    """1D chain of tile left endpoints: one point per letter, weight 1.

    Point i sits at origin + sum of the lengths of the letters before i.
    """
    if not w:
        raise ValidationError("word is empty")
    try:
        lens = np.array([float(lengths[c]) for c in w])
    except KeyError as exc:
        raise ValidationError(f"no length for symbol {exc.args[0]!r}")
    if not np.all(lens > 0):
        raise ValidationError("tile lengths must be positive")
    pts = float(origin) + np.concatenate([[0.0], np.cumsum(lens[:-1])])
    meta = {
        "generator": "word",
        "params": {"lengths": {k: float(v) for k, v in sorted(lengths.items())},
                   "origin": float(origin), "letters": len(w)},
        "seed": None,
    }
    return WeightedPointSet(1, pts[:, None], None, meta)


def density(wps: WeightedPointSet, box: Box) -> float:
    """Weight sum over the box divided by its volume (real part).

    The caller is responsible for the box lying inside the generated region;
    points are simply filtered by membership.
    """
    if box.dim != wps.dim:
        raise ValidationError(f"box dimension {box.dim} != patch dimension {wps.dim}")
    mask = box.contains(wps.points) if len(wps) else np.zeros(0, dtype=bool)
    total = complex(wps.weights[mask].sum()) if len(wps) else 0.0
    return float(np.real(total)) / box.volume


def min_separation(wps: WeightedPointSet) -> float:
    """Minimal pairwise distance.

    1D patches use the sorted adjacent gap (exact, O(n)); higher dimensions
    use a k-d tree nearest-neighbor query.
    """
    if len(wps) < 2:
        raise ValidationError(f"min_separation needs at least 2 points, got {len(wps)}")
    return _min_separation_raw(wps.points)


def _min_separation_raw(pts: np.ndarray) -> float:
    if pts.shape[1] == 1:
        return float(np.diff(pts[:, 0]).min())
    from scipy.spatial import cKDTree

    d, _ = cKDTree(pts).query(pts, k=2)
    return float(d[:, 1].min())
