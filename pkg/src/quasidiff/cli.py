"""Command-line front end.

Subcommands mirror the library: gen (lattice, model-set, substitution),
perturb (percolate, displace), diffract (scan, peak, peaks), predict
(model-set, perturbed), ww, check (lr, subadditive). Every output embeds the
artifact version, the resolved configuration, and the SHA-256 of the main
input file, and contains no timestamps: rerunning a command with identical
inputs produces byte-identical files. Exit codes: 0 success, 2 validation
error, 3 resource cap exceeded, 4 numerical diagnostic failure.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .cutproject import (
    CutProjectScheme,
    deformed_amplitude,
    deformed_model_set,
    dual_peaks,
    model_set,
    preset_scheme,
)
from .diffraction import (
    Spectrum,
    SpectrumEntry,
    autocorrelation,
    find_peaks,
    fourier_average,
    intensity_from_autocorr,
    scan_spectrum,
    spectrum_from_csv,
    spectrum_to_csv,
)
from .ergodic import (
    Observable,
    check_linear_repetitivity,
    subadditive_limit,
    ww_report,
)
from .errors import NumericalDiagnosticError, ResourceLimitError, ValidationError
from .geometry import Box, VanHoveCubes, cube_sequence
from .pointset import (
    Substitution,
    WeightedPointSet,
    named_substitution,
    substitution_fixed_point,
    word_to_pointset,
)
from .randomize import DisplacementDist, RandomModel, displace, percolate, predicted_intensity

# execution hints and destinations are not part of the reproducible config
_CONFIG_EXCLUDE = {"func", "command", "subcommand", "threads", "output"}


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def _sha256(path: str | None) -> str | None:
    if path is None:
        return None
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _resolved_config(args: argparse.Namespace) -> dict:
    cfg = {"command": f"{args.command} {args.subcommand}" if getattr(args, "subcommand", None) else args.command}
    for key, value in vars(args).items():
        if key in _CONFIG_EXCLUDE:
            continue
        cfg[key] = value
    return cfg


def _envelope(args: argparse.Namespace, input_path: str | None) -> dict:
    return {
        "version": __version__,
        "config": _resolved_config(args),
        "input_hash": _sha256(input_path),
    }


def _emit(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def _emit_json(payload: dict, args: argparse.Namespace, input_path: str | None = None) -> None:
    obj = dict(_envelope(args, input_path))
    obj.update(payload)
    _emit(json.dumps(obj, sort_keys=True, indent=1) + "\n", args.output)


def _csv_envelope(args: argparse.Namespace, input_path: str | None) -> dict:
    env = _envelope(args, input_path)
    return {
        "version": env["version"],
        "config": json.dumps(env["config"], sort_keys=True),
        "input_hash": env["input_hash"] if env["input_hash"] is not None else "null",
    }


def _parse_floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip() != ""]
    except ValueError as exc:
        raise ValidationError(f"cannot parse float list {text!r}: {exc}")


def _parse_ints(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip() != ""]
    except ValueError as exc:
        raise ValidationError(f"cannot parse integer list {text!r}: {exc}")


def _parse_vector(text: str) -> list[float]:
    """Frequency vector: scalar `1.89` or semicolon components `1.89;0.5`."""
    try:
        return [float(t) for t in text.split(";")]
    except ValueError as exc:
        raise ValidationError(f"cannot parse vector {text!r}: {exc}")


def _parse_box(text: str) -> Box:
    """`lo,hi` in 1D; `lo1,lo2;hi1,hi2` in general."""
    if ";" in text:
        lo_s, hi_s = text.split(";", 1)
        return Box(_parse_floats(lo_s), _parse_floats(hi_s))
    vals = _parse_floats(text)
    if len(vals) != 2:
        raise ValidationError(f"1D box needs `lo,hi`, got {text!r}")
    return Box([vals[0]], [vals[1]])


def _parse_grid(text: str) -> list[float]:
    """`start:stop:step` (stop exclusive, stepping by index) or a comma list."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValidationError(f"range syntax is start:stop:step, got {text!r}")
        start, stop, step = (float(p) for p in parts)
        if not step > 0:
            raise ValidationError("grid step must be positive")
        count = int(np.ceil((stop - start) / step - 1e-12))
        if count < 1:
            raise ValidationError(f"empty frequency range {text!r}")
        return [start + i * step for i in range(count)]
    return _parse_floats(text)


def _parse_radii(text: str) -> list[int]:
    """`1..100` (inclusive) or a comma list of integers."""
    if ".." in text:
        lo_s, hi_s = text.split("..", 1)
        lo, hi = int(lo_s), int(hi_s)
        if hi < lo:
            raise ValidationError(f"empty radius range {text!r}")
        return list(range(lo, hi + 1))
    return _parse_ints(text)


def _parse_symbol_lengths(text: str) -> dict:
    out = {}
    for item in text.split(","):
        if "=" not in item:
            raise ValidationError(f"tile lengths look like a=1.618,b=1; got {item!r}")
        key, val = item.split("=", 1)
        out[key.strip()] = float(val)
    return out


def _parse_dist(text: str) -> DisplacementDist:
    """`uniform_interval:a=0.1`, `two_point:a=0.25`, or a JSON file path."""
    if Path(text).is_file():
        return DisplacementDist.from_json(json.loads(Path(text).read_text()))
    if ":" not in text:
        raise ValidationError(
            f"distribution spec {text!r} is neither kind:params nor an existing file"
        )
    kind, params = text.split(":", 1)
    fields = {}
    for item in params.split(","):
        if "=" not in item:
            raise ValidationError(f"distribution parameter {item!r} must be key=value")
        key, val = item.split("=", 1)
        fields[key.strip()] = float(val)
    if kind in ("uniform_interval", "two_point"):
        if set(fields) != {"a"}:
            raise ValidationError(f"{kind} takes exactly the parameter a")
        return DisplacementDist(kind=kind, a=fields["a"])
    raise ValidationError(f"unknown distribution kind {kind!r} (table kind needs a JSON file)")


def _parse_model(text: str) -> RandomModel:
    """Model JSON file path or compact `percolation:p=0.5` / `displacement:<dist>`."""
    if Path(text).is_file():
        return RandomModel.from_json(json.loads(Path(text).read_text()))
    if text.startswith("percolation:"):
        fields = dict(item.split("=", 1) for item in text.split(":", 1)[1].split(","))
        return RandomModel("percolation", int(fields.get("seed", 0)), p=float(fields["p"]))
    if text.startswith("displacement:"):
        return RandomModel("displacement", 0, dist=_parse_dist(text.split(":", 1)[1]))
    raise ValidationError(f"cannot parse model {text!r}")


def _load_scheme(text: str):
    """Preset name or scheme JSON file; returns (scheme, deformation or None)."""
    if Path(text).is_file():
        try:
            obj = json.loads(Path(text).read_text())
        except json.JSONDecodeError as exc:
            raise ValidationError(f"scheme file {text}: invalid JSON at line {exc.lineno}: {exc.msg}")
        return CutProjectScheme.from_json(obj)
    return preset_scheme(text), None


def _load_pointset(path: str) -> WeightedPointSet:
    try:
        obj = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ValidationError(f"cannot read point-set file {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise ValidationError(f"point-set file {path}: invalid JSON at line {exc.lineno}: {exc.msg}")
    if "pointset" in obj:
        obj = obj["pointset"]
    return WeightedPointSet.from_json(obj)


def _write_pointset(wps: WeightedPointSet, args: argparse.Namespace, input_path: str | None = None) -> None:
    _emit_json({"pointset": wps.to_json()}, args, input_path)


def _load_substitution(args: argparse.Namespace) -> Substitution:
    name = args.rules
    if Path(name).is_file():
        obj = json.loads(Path(name).read_text())
        lengths = {k: float(v) for k, v in obj["lengths"].items()}
        return Substitution(tuple(obj["alphabet"]), dict(obj["rules"]), lengths, obj["seed"])
    return named_substitution(name)


def _resolve_word(args: argparse.Namespace, min_letters: int = 1) -> tuple[str, str | None]:
    """Word text plus the path that should be hashed (None for generated words).

    Generated words are extended past --length when the command's windows need
    more letters; the fixed point is unique, so this never changes any value.
    """
    if getattr(args, "word_file", None):
        return Path(args.word_file).read_text().strip(), args.word_file
    if getattr(args, "rules", None):
        s = _load_substitution(args)
        n = max(args.length, min_letters)
        return substitution_fixed_point(s, n)[:n], None
    raise ValidationError("pass either --word-file or --rules (with --length)")


def _parse_observable(text: str, word: str) -> Observable:
    if text.startswith("indicator:"):
        return Observable.indicator(text.split(":", 1)[1], sorted(set(word)))
    if Path(text).is_file():
        obj = json.loads(Path(text).read_text())
        return Observable(int(obj["locality"]), {str(k): complex(v[0], v[1]) if isinstance(v, list) else complex(v) for k, v in obj["table"].items()})
    raise ValidationError(f"observable spec {text!r} is neither indicator:<symbol> nor a JSON file")


# ---------------------------------------------------------------- commands


def cmd_gen(args: argparse.Namespace) -> int:
    if args.subcommand == "lattice":
        from .pointset import lattice_points

        box = _parse_box(args.box)
        wps = lattice_points(args.dim, box, args.spacing)
        _write_pointset(wps, args)
    elif args.subcommand == "model-set":
        scheme, theta = _load_scheme(args.scheme)
        box = _parse_box(args.box)
        if theta is None:
            wps = model_set(scheme, box, cap=args.cap)
        else:
            wps = deformed_model_set(scheme, theta, box, cap=args.cap)
        _write_pointset(wps, args, args.scheme if Path(args.scheme).is_file() else None)
    else:
        s = _load_substitution(args)
        if args.lengths:
            s = Substitution(s.alphabet, s.rules, _parse_symbol_lengths(args.lengths), s.seed)
        word = substitution_fixed_point(s, args.length)[: args.length]
        wps = word_to_pointset(word, s.lengths, origin=args.origin)
        _write_pointset(wps, args, args.rules if Path(args.rules).is_file() else None)
    return 0


def cmd_perturb(args: argparse.Namespace) -> int:
    wps = _load_pointset(args.input)
    if args.subcommand == "percolate":
        out = percolate(wps, args.p, args.seed)
    else:
        out = displace(wps, _parse_dist(args.dist), args.seed)
    _write_pointset(out, args, args.input)
    return 0


def cmd_diffract(args: argparse.Namespace) -> int:
    wps = _load_pointset(args.input)
    if args.subcommand == "scan":
        box = _parse_box(args.box)
        sp = scan_spectrum(wps, box, _parse_grid(args.xi), estimator=args.estimator, threads=args.threads)
        buf = io.StringIO()
        spectrum_to_csv(sp, buf, _csv_envelope(args, args.input))
        _emit(buf.getvalue(), args.output)
    elif args.subcommand == "peak":
        xi = np.array(_parse_vector(args.xi))
        side0, growth, count = _parse_floats(args.vanhove)
        if args.center is not None:
            center = _parse_vector(args.center)
        else:
            lo, hi = wps.bounding_box
            center = 0.5 * (lo + hi)
        cubes = cube_sequence(VanHoveCubes(center, side0, growth, int(count)))
        entries = []
        prev = None
        for cube in cubes:
            if args.estimator == "autocorr":
                val = intensity_from_autocorr(autocorrelation(wps, cube), xi)
                count_in = int(cube.contains(wps.points).sum())
            else:
                fa = fourier_average(wps, cube, xi)
                val, count_in = abs(fa.value) ** 2, fa.point_count
            gap = abs(val - prev) if prev is not None else float("nan")
            entries.append(
                SpectrumEntry(
                    tuple(float(v) for v in xi),
                    float(val),
                    args.estimator,
                    (float(val),),
                    float(gap),
                    bool(gap < 1e-3 * max(val, 1e-6)) if prev is not None else False,
                    cube.volume,
                    count_in,
                )
            )
            prev = val
        buf = io.StringIO()
        spectrum_to_csv(Spectrum(tuple(entries)), buf, _csv_envelope(args, args.input))
        _emit(buf.getvalue(), args.output)
    else:  # peaks
        box = _parse_box(args.box)
        sp = scan_spectrum(wps, box, _parse_grid(args.xi), estimator=args.estimator, threads=args.threads)
        refine = None
        if args.refine:
            if args.estimator == "autocorr":
                patch = autocorrelation(wps, box)

                def refine(x):
                    return intensity_from_autocorr(patch, [x])

            else:

                def refine(x):
                    return abs(fourier_average(wps, box, [x]).value) ** 2

        peaks = find_peaks(sp, args.floor, refine=refine)
        env = _csv_envelope(args, args.input)
        lines = [f"# {k}={env[k]}" for k in sorted(env)]
        lines.append("xi_1,intensity")
        lines += [f"{_fmt(p.xi)},{_fmt(p.intensity)}" for p in peaks]
        _emit("\n".join(lines) + "\n", args.output)
    return 0


def cmd_predict(args: argparse.Namespace) -> int:
    if args.subcommand == "model-set":
        scheme, theta = _load_scheme(args.scheme)
        rng_box = _parse_box(args.range)
        cands = dual_peaks(scheme, rng_box, args.floor)
        if theta is not None:
            rows = []
            for c in cands:
                amp = deformed_amplitude(scheme, theta, c, args.quad)
                rows.append((c, abs(amp) ** 2))
        else:
            rows = [(c, c.intensity) for c in cands]
        rows.sort(key=lambda r: (-r[1], tuple(r[0].k)))
        env = _csv_envelope(args, args.scheme if Path(args.scheme).is_file() else None)
        lines = [f"# {k}={env[k]}" for k in sorted(env)]
        head = [f"k_{j + 1}" for j in range(scheme.d_phys)]
        head += [f"kstar_{j + 1}" for j in range(scheme.d_int)]
        head.append("intensity")
        lines.append(",".join(head))
        for c, inten in rows:
            cells = [_fmt(v) for v in c.k] + [_fmt(v) for v in c.k_star] + [_fmt(inten)]
            lines.append(",".join(cells))
        _emit("\n".join(lines) + "\n", args.output)
    else:  # perturbed
        model = _parse_model(args.model)
        with open(args.base_spectrum) as fh:
            sp, _ = spectrum_from_csv(fh)
        env = _csv_envelope(args, args.base_spectrum)
        lines = [f"# {k}={env[k]}" for k in sorted(env)]
        dim = sp.dim
        head = [f"xi_{j + 1}" for j in range(dim)] + ["point_part", "diffuse_level"]
        lines.append(",".join(head))
        for e in sp.entries:
            n0 = args.n0 if args.n0 is not None else e.point_count / e.box_volume
            pred = predicted_intensity(model, e.intensity, np.array(e.xi), n0)
            cells = [_fmt(v) for v in e.xi]
            cells += [_fmt(pred["point_part"]), _fmt(pred["diffuse_level"])]
            lines.append(",".join(cells))
        _emit("\n".join(lines) + "\n", args.output)
    return 0


def cmd_ww(args: argparse.Namespace) -> int:
    lengths = _parse_ints(args.lengths)
    offsets = _parse_ints(args.offsets)
    locality = 0
    if not args.f.startswith("indicator:") and Path(args.f).is_file():
        locality = int(json.loads(Path(args.f).read_text())["locality"])
    word, hash_path = _resolve_word(
        args, min_letters=max(lengths) + max(offsets) + 2 * locality
    )
    f = _parse_observable(args.f, word)
    report = ww_report(word, f, args.alpha, lengths, offsets)
    _emit_json(report.to_json(), args, hash_path)
    return 0


def cmd_check(args: argparse.Namespace) -> int:
    if args.subcommand == "lr":
        radii = _parse_radii(args.radii)
        word, hash_path = _resolve_word(args, min_letters=4 * max(radii) if radii else 1)
        result = check_linear_repetitivity(word, radii)
        payload = {
            "radii": _parse_radii(args.radii),
            "constants": result["constants"],
            "C_estimate": result["C_estimate"],
        }
        _emit_json(payload, args, hash_path)
    else:  # subadditive
        wps = _load_pointset(args.input)
        xi = np.array(_parse_vector(args.xi))
        if args.domain is not None:
            domain = _parse_box(args.domain)
        else:
            lo, hi = wps.bounding_box
            domain = Box(lo, hi)

        def evaluator(box):
            return abs(fourier_average(wps, box, xi).value) * box.volume

        report = subadditive_limit(
            evaluator,
            _parse_floats(args.scales),
            args.samples,
            args.seed,
            domain=domain,
        )
        _emit_json(report.to_json(), args, args.input)
    return 0


# ---------------------------------------------------------------- parser


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="quasidiff",
        description="Aperiodic point sets and their diffraction spectra.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    top = parser.add_subparsers(dest="command", required=True)

    def add_output(p):
        p.add_argument("--output", help="output file (default: stdout)")

    gen = top.add_parser("gen", help="generate point-set files").add_subparsers(
        dest="subcommand", required=True
    )
    g = gen.add_parser("lattice", help="points of spacing*Z^d in a box")
    g.add_argument("--dim", type=int, default=1)
    g.add_argument("--box", required=True, help="lo,hi or lo1,lo2;hi1,hi2")
    g.add_argument("--spacing", type=float, default=1.0)
    add_output(g)
    g.set_defaults(func=cmd_gen)
    g = gen.add_parser("model-set", help="cut-and-project model set")
    g.add_argument("--scheme", required=True, help="preset name or scheme JSON file")
    g.add_argument("--box", required=True, help="physical box lo,hi")
    g.add_argument("--cap", type=int, default=10**8, help="candidate enumeration cap")
    add_output(g)
    g.set_defaults(func=cmd_gen)
    g = gen.add_parser("substitution", help="substitution chain (tile left endpoints)")
    g.add_argument("--rules", required=True, help="preset name or substitution JSON file")
    g.add_argument("--length", type=int, required=True, help="number of letters kept")
    g.add_argument("--lengths", help="tile length override, e.g. a=1.618,b=1")
    g.add_argument("--origin", type=float, default=0.0)
    add_output(g)
    g.set_defaults(func=cmd_gen)

    per = top.add_parser("perturb", help="randomized perturbations").add_subparsers(
        dest="subcommand", required=True
    )
    g = per.add_parser("percolate", help="keep each point with probability p")
    g.add_argument("--input", required=True)
    g.add_argument("--p", type=float, required=True)
    g.add_argument("--seed", type=int, required=True)
    add_output(g)
    g.set_defaults(func=cmd_perturb)
    g = per.add_parser("displace", help="i.i.d. bounded random displacement")
    g.add_argument("--input", required=True)
    g.add_argument("--dist", required=True, help="kind:params or JSON file")
    g.add_argument("--seed", type=int, required=True)
    add_output(g)
    g.set_defaults(func=cmd_perturb)

    dif = top.add_parser("diffract", help="intensity estimators").add_subparsers(
        dest="subcommand", required=True
    )
    g = dif.add_parser("scan", help="spectrum over a frequency grid")
    g.add_argument("--input", required=True)
    g.add_argument("--box", required=True)
    g.add_argument("--xi", required=True, help="start:stop:step or comma list")
    g.add_argument("--estimator", choices=("fourier", "autocorr"), default="fourier")
    g.add_argument("--threads", type=int, default=1)
    add_output(g)
    g.set_defaults(func=cmd_diffract)
    g = dif.add_parser("peak", help="per-scale convergence at one frequency")
    g.add_argument("--input", required=True)
    g.add_argument("--xi", required=True, help="frequency (semicolon components)")
    g.add_argument("--vanhove", required=True, help="side0,growth,count")
    g.add_argument("--center", help="cube center (default: patch midpoint)")
    g.add_argument("--estimator", choices=("fourier", "autocorr"), default="fourier")
    add_output(g)
    g.set_defaults(func=cmd_diffract)
    g = dif.add_parser("peaks", help="scan, then locate local maxima")
    g.add_argument("--input", required=True)
    g.add_argument("--box", required=True)
    g.add_argument("--xi", required=True)
    g.add_argument("--floor", type=float, required=True)
    g.add_argument("--refine", action="store_true", help="golden-section polish")
    g.add_argument("--estimator", choices=("fourier", "autocorr"), default="fourier")
    g.add_argument("--threads", type=int, default=1)
    add_output(g)
    g.set_defaults(func=cmd_diffract)

    pre = top.add_parser("predict", help="closed-form predictions").add_subparsers(
        dest="subcommand", required=True
    )
    g = pre.add_parser("model-set", help="Bragg peak table from the dual lattice")
    g.add_argument("--scheme", required=True)
    g.add_argument("--range", required=True, help="physical frequency box lo,hi")
    g.add_argument("--floor", type=float, required=True)
    g.add_argument("--quad", type=int, default=2001, help="quadrature points (deformed schemes)")
    add_output(g)
    g.set_defaults(func=cmd_predict)
    g = pre.add_parser("perturbed", help="transform a base spectrum by a disorder model")
    g.add_argument("--model", required=True, help="model JSON file or percolation:p=0.5")
    g.add_argument("--base-spectrum", required=True)
    g.add_argument("--n0", type=float, help="density override (default: count/volume per row)")
    add_output(g)
    g.set_defaults(func=cmd_predict)

    g = top.add_parser("ww", help="Wiener-Wintner averages along a word")
    g.add_argument("--word-file")
    g.add_argument("--rules", help="substitution preset or JSON file")
    g.add_argument("--length", type=int, default=100000, help="generated word length")
    g.add_argument("--alpha", type=float, required=True)
    g.add_argument("--lengths", required=True, help="comma list of average lengths")
    g.add_argument("--offsets", default="0", help="comma list of start offsets")
    g.add_argument("--f", default="indicator:a", help="indicator:<symbol> or observable JSON file")
    add_output(g)
    g.set_defaults(func=cmd_ww, subcommand=None)

    chk = top.add_parser("check", help="repetitivity and subadditive limits").add_subparsers(
        dest="subcommand", required=True
    )
    g = chk.add_parser("lr", help="linear-repetitivity constant estimate")
    g.add_argument("--word-file")
    g.add_argument("--rules")
    g.add_argument("--length", type=int, default=100000)
    g.add_argument("--radii", required=True, help="1..100 or comma list")
    add_output(g)
    g.set_defaults(func=cmd_check)
    g = chk.add_parser("subadditive", help="Fisher-sequence limit of |c^xi| F(Q)")
    g.add_argument("--input", required=True)
    g.add_argument("--xi", required=True)
    g.add_argument("--scales", required=True, help="comma list, increasing")
    g.add_argument("--samples", type=int, default=10)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--domain", help="sampling domain box (default: patch bounding box)")
    add_output(g)
    g.set_defaults(func=cmd_check)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ResourceLimitError as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return 3
    except NumericalDiagnosticError as exc:
        print(f"numerical diagnostic: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
