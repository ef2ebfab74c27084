"""Command-line interface.

``gralp run``       sweep one protocol and write a results CSV plus a manifest
``gralp diagnose``  coefficient dissimilarity of ground-truth label functions
``gralp predict``   one solve on partially labeled inputs, per-node predictions

Every option can also be given in a ``key=value`` file passed with
``--config`` (keys are the long option names without the leading dashes);
command-line flags take precedence. The manifest written next to the output
has the same format, so ``gralp run --config r.csv.manifest`` repeats a run.
"""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from . import __version__
from .errors import GralpError, InvalidModeError, InvalidParameterError, SingularSystemError
from .experiments import (
    PROTOCOLS,
    SCORES,
    SweepData,
    SweepSpec,
    coefficient_dissimilarity,
    projection_coefficients,
    run_sweep,
)
from .graph import build_knn_graph
from .io import (
    fmt,
    manifest_path,
    read_edge_list,
    read_features,
    read_key_values,
    read_labels,
    read_matches,
    write_manifest,
    write_predictions_csv,
    write_sweep_csv,
)
from .pipeline import adapt, prepare_domain
from .solver import encode_labels
from .synthetic import SyntheticPairConfig, generate_synthetic_pair
from .wavelets import FAMILIES, KernelSpec, build_matched_dictionary, validate_pairs

log = logging.getLogger("gralp")

META_KEYS = ("version", "command", "delta")
LAPLACIAN_FLAGS = {"unnorm": "unnormalized", "norm": "normalized"}


class ConfigError(GralpError):
    pass


def _ratio_list(text):
    try:
        vals = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers: {exc}") from exc
    if not vals:
        raise argparse.ArgumentTypeError("empty ratio list")
    return vals


def _nonneg_int(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return v


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _add_common(p):
    p.add_argument("--config", help="key=value file with default option values")

    g = p.add_argument_group("input")
    g.add_argument("--synthetic", action="store_true", help="generate a synthetic warped-cluster pair")
    g.add_argument("--features-s", help="source feature CSV")
    g.add_argument("--features-t", help="target feature CSV")
    g.add_argument("--label-column", action="store_true", help="last CSV column holds integer labels")
    g.add_argument("--edges-s", help="source edge list")
    g.add_argument("--edges-t", help="target edge list")
    g.add_argument("--labels-s", help="source labels file (one per line, -1 unknown)")
    g.add_argument("--labels-t", help="target labels file (one per line, -1 unknown)")
    g.add_argument("--matches", help="match file, 'm n' per line")

    g = p.add_argument_group("synthetic data")
    g.add_argument("--classes", type=int, default=3)
    g.add_argument("--n-source", type=int, default=34, help="source samples per class")
    g.add_argument("--n-target", type=int, default=34, help="target samples per class")
    g.add_argument("--separation", type=float, default=5.0)
    g.add_argument("--spread", type=float, default=1.0)
    g.add_argument("--domain-noise", type=float, default=0.15)
    g.add_argument("--warp", type=float, default=0.2)

    g = p.add_argument_group("graph")
    g.add_argument("--knn", type=int, default=5)
    g.add_argument("--sigma", type=float, default=1.0)
    g.add_argument("--metric", choices=("euclidean", "cosine"), default="euclidean")
    g.add_argument("--laplacian", choices=tuple(LAPLACIAN_FLAGS), default="unnorm")

    g = p.add_argument_group("wavelets")
    g.add_argument("--kernel", choices=FAMILIES, default="ab-spline")
    g.add_argument("--num-wavelets", type=int, default=4)
    g.add_argument("--lp-factor", type=float, default=20.0)

    g = p.add_argument_group("solver")
    g.add_argument("--mu", type=float, default=1.0)
    g.add_argument("--gamma-s", type=float, default=0.1)
    g.add_argument("--gamma-t", type=float, default=0.1)
    g.add_argument("--ridge", action="store_true", help="regularize singular systems instead of failing")

    p.add_argument("--seed", type=_nonneg_int, default=0)
    p.add_argument("--out", required=False)
    p.add_argument("-v", "--verbose", action="store_true")


def _add_protocol(p):
    g = p.add_argument_group("protocol")
    g.add_argument("--protocol", choices=PROTOCOLS, default="source-sweep")
    g.add_argument("--ratios", type=_ratio_list, help="swept ratios, comma-separated")
    g.add_argument("--reps", type=int, default=20)
    g.add_argument("--match-ratio", type=float)
    g.add_argument("--source-ratio", type=float)
    g.add_argument("--target-ratio", type=float)
    g.add_argument("--match-label-ratio", type=float)
    g.add_argument("--fixed-matches", action="store_true", help="keep the same match order in every repetition")
    g.add_argument("--score", choices=SCORES, default="misclassification")
    g.add_argument("--jobs", type=int, default=1)
    g.add_argument("--predictions", help="per-node predictions of the last ratio, repetition 0")


def build_parser():
    parser = argparse.ArgumentParser(prog="gralp", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"gralp {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a sweep protocol")
    _add_common(run)
    _add_protocol(run)
    diag = sub.add_parser("diagnose", help="coefficient dissimilarity of ground-truth labels")
    _add_common(diag)
    diag.add_argument("--match-ratio", type=float, default=0.1, help="fraction of candidate matches to use")
    diag.add_argument("--self-pair", action="store_true", help="use the source domain as its own target")
    pred = sub.add_parser("predict", help="single solve with partially labeled inputs")
    _add_common(pred)
    return parser, {"run": run, "diagnose": diag, "predict": pred}


def _actions(sub):
    return {a.dest: a for a in sub._actions if a.option_strings and a.dest not in ("help", "config")}


def apply_config(sub, path):
    """Load ``path`` into ``sub``'s defaults, validating every key and value."""
    actions = _actions(sub)
    defaults = {}
    try:
        entries = read_key_values(path)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except InvalidParameterError as exc:
        raise ConfigError(str(exc)) from exc
    for lineno, key, value in entries:
        if key in META_KEYS:
            continue
        dest = key.replace("-", "_")
        act = actions.get(dest)
        if act is None:
            raise ConfigError(f"{path}:{lineno}: unknown field {key!r}")
        try:
            if isinstance(act, argparse._StoreTrueAction):
                conv = _bool(value)
            else:
                conv = act.type(value) if act.type else value
                if act.choices is not None and conv not in act.choices:
                    raise ValueError(f"invalid choice {conv!r}")
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise ConfigError(f"{path}:{lineno}: field {key!r}: {exc}") from exc
        defaults[dest] = conv
    sub.set_defaults(**defaults)


def _input_mode(args):
    modes = [m for m, on in (
        ("synthetic", args.synthetic),
        ("features", args.features_s or args.features_t),
        ("edges", args.edges_s or args.edges_t),
    ) if on]
    if len(modes) != 1:
        raise InvalidModeError("choose exactly one input mode: --synthetic, --features-s/-t or --edges-s/-t")
    return modes[0]


def _kernel(args):
    return KernelSpec(args.kernel, args.num_wavelets, args.lp_factor)


def load_inputs(args, need_truth=True):
    """Return ``(source, target, labels_s, labels_t, candidate pairs, num_classes)``."""
    mode = _input_mode(args)
    kernel = _kernel(args)
    variant = LAPLACIAN_FLAGS[args.laplacian]
    sigma = args.sigma if args.metric == "euclidean" else None
    if mode == "synthetic":
        cfg = SyntheticPairConfig(
            num_classes=args.classes,
            n_source=args.n_source,
            n_target=args.n_target,
            separation=args.separation,
            spread=args.spread,
            domain_noise=args.domain_noise,
            warp=args.warp,
            q=0,
            seed=args.seed,
        )
        sp = generate_synthetic_pair(cfg)
        fs, ft = sp.features_s, sp.features_t
        if args.metric != fs.metric:
            fs = type(fs)(fs.samples, args.metric)
            ft = type(ft)(ft.samples, args.metric)
        gs, gt = build_knn_graph(fs, args.knn, sigma), build_knn_graph(ft, args.knn, sigma)
        ys, yt, cand = sp.labels_s, sp.labels_t, sp.candidates
    else:
        if not args.matches:
            raise InvalidModeError("--matches is required with file inputs")
        if mode == "features":
            if not (args.features_s and args.features_t):
                raise InvalidModeError("both --features-s and --features-t are required")
            fs, ys = read_features(args.features_s, args.label_column, args.metric)
            ft, yt = read_features(args.features_t, args.label_column, args.metric)
            gs, gt = build_knn_graph(fs, args.knn, sigma), build_knn_graph(ft, args.knn, sigma)
        else:
            if not (args.edges_s and args.edges_t):
                raise InvalidModeError("both --edges-s and --edges-t are required")
            ys = read_labels(args.labels_s) if args.labels_s else None
            yt = read_labels(args.labels_t) if args.labels_t else None
            gs = read_edge_list(args.edges_s, None if ys is None else ys.size)
            gt = read_edge_list(args.edges_t, None if yt is None else yt.size)
        cand = np.array(validate_pairs(read_matches(args.matches), gs.n, gt.n), dtype=int)
    for name, y, g in (("source", ys, gs), ("target", yt, gt)):
        if y is None:
            raise InvalidModeError(f"{name} labels are required")
        if y.size != g.n:
            raise InvalidParameterError(f"{name}: {y.size} labels for {g.n} nodes")
        if need_truth and np.any(y < 0):
            raise InvalidModeError(f"{name} ground-truth labels are incomplete (found -1)")
    num_classes = int(max(ys.max(initial=-1), yt.max(initial=-1))) + 1
    if num_classes < 1:
        raise InvalidParameterError("no labels found in either domain")
    src = prepare_domain(gs, kernel, variant)
    tgt = prepare_domain(gt, kernel, variant)
    return src, tgt, np.asarray(ys), np.asarray(yt), cand, num_classes


def _manifest_items(args, sub, extra=()):
    items = [("version", __version__), ("command", args.command)]
    for dest, act in _actions(sub).items():
        if dest in ("verbose",):
            continue
        value = getattr(args, dest)
        if value is None or (isinstance(act, argparse._StoreTrueAction) and not value):
            continue
        if isinstance(value, tuple):
            value = ",".join(fmt(v) for v in value)
        elif isinstance(value, float):
            value = fmt(value)
        items.append((act.option_strings[-1].lstrip("-"), value))
    return items + list(extra)


def cmd_run(args, sub):
    src, tgt, ys, yt, cand, c = load_inputs(args)
    fixed = {
        k: getattr(args, k)
        for k in ("match_ratio", "source_ratio", "target_ratio", "match_label_ratio")
        if getattr(args, k) is not None
    }
    spec = SweepSpec(
        protocol=args.protocol,
        swept_ratios=args.ratios or (),
        fixed_ratios=fixed,
        repetitions=args.reps,
        seed=args.seed,
        fixed_matches=args.fixed_matches,
        score=args.score,
    )
    data = SweepData(src, tgt, ys, yt, cand, c, args.mu, args.gamma_s, args.gamma_t, args.ridge)
    rows, cells = run_sweep(spec, data, jobs=args.jobs, keep_cells=True)
    write_sweep_csv(args.out, rows)
    write_manifest(manifest_path(args.out), _manifest_items(args, sub))
    if args.predictions:
        cell = cells[-1][0]
        if not cell.feasible:
            raise InvalidModeError(f"prediction cell is infeasible: {cell.reason}")
        write_predictions_csv(args.predictions, cell.predicted, cell.scores)
    for r in rows:
        log.info("ratio %s: error %s +- %s (%d feasible, %d infeasible)",
                 fmt(r.ratio), fmt(r.mean_error), fmt(r.std_error), r.n_repetitions, r.infeasible)
    return 0


def cmd_diagnose(args, sub):
    src, tgt, ys, yt, cand, c = load_inputs(args)
    if args.self_pair:
        tgt, yt = src, ys
        cand = np.column_stack([np.arange(src.n), np.arange(src.n)])
    rng = np.random.default_rng(np.random.SeedSequence([args.seed, 7]))
    q = int(np.floor(args.match_ratio * min(src.n, tgt.n) + 0.5))
    q = min(max(q, 1), len(cand))
    pairs = [tuple(int(v) for v in cand[i]) for i in np.sort(rng.permutation(len(cand))[:q])]
    dictionary = build_matched_dictionary(src.frame, tgt.frame, pairs)
    f_s, f_t = encode_labels(ys, c), encode_labels(yt, c)
    delta = coefficient_dissimilarity(dictionary, f_s, f_t)
    cs, ct = projection_coefficients(dictionary, f_s, f_t)
    per = dictionary.atoms_per_pair
    names = ["phi"] + [f"psi_{j}" for j in range(1, per)]
    with open(args.out, "w") as fh:
        fh.write("index,pair,source_node,target_node,atom,class,coef_s,coef_t\n")
        idx = 0
        for cls in range(c):
            for i, (m, n) in enumerate(pairs):
                for a in range(per):
                    row = i * per + a
                    fh.write(f"{idx},{i},{m},{n},{names[a]},{cls},{fmt(cs[row, cls])},{fmt(ct[row, cls])}\n")
                    idx += 1
    write_manifest(manifest_path(args.out), _manifest_items(args, sub, [("delta", fmt(delta))]))
    print(f"delta={fmt(delta)}")
    return 0


def cmd_predict(args, sub):
    if args.synthetic:
        raise InvalidModeError("predict needs file inputs with partially known labels")
    src, tgt, ys, yt, cand, c = load_inputs(args, need_truth=False)
    ls, lt = np.flatnonzero(ys >= 0), np.flatnonzero(yt >= 0)
    _, sol = adapt(src, tgt, [tuple(p) for p in cand], ls, ys[ls], lt, yt[lt], c,
                   mu=args.mu, gamma_s=args.gamma_s, gamma_t=args.gamma_t, ridge=args.ridge)
    write_predictions_csv(args.out, sol.f_t.decoded, sol.f_t.values)
    write_manifest(manifest_path(args.out), _manifest_items(args, sub))
    return 0


COMMANDS = {"run": cmd_run, "diagnose": cmd_diagnose, "predict": cmd_predict}


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, subs = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("command", nargs="?")
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    try:
        if known.config and known.command in subs:
            apply_config(subs[known.command], known.config)
    except ConfigError as exc:
        print(f"gralp: config error: {exc}", file=sys.stderr)
        return 2
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if not args.out:
        print("gralp: error: --out is required", file=sys.stderr)
        return 2
    try:
        return COMMANDS[args.command](args, subs[args.command])
    except SingularSystemError as exc:
        print(f"gralp: singular system: {exc} (use --ridge to regularize)", file=sys.stderr)
        return 3
    except GralpError as exc:
        print(f"gralp: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
