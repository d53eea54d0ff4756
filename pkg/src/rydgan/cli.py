"""Command-line pipeline: fit-pca, train, select, generate, evaluate.

Every command validates its full configuration before doing any work,
echoes the effective configuration into the output directory, writes all
artifacts atomically, and is byte-reproducible for a fixed master seed.

Exit codes: 0 success, 2 config/validation, 3 data/format, 4 numeric.
"""

from __future__ import annotations

import argparse
import glob
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import data as dp
from .config import MODES, RunConfig, load_config, render_config
from .errors import DataError, NumericError, RydganError, ValidationError
from .generator import ErrorModel, EXACT, NoisyMode, ShotsMode, draw_seeds, \
    generate_features
from .metrics import fid_images, greedy_select, variation_scores
from .training import layered_train, load_learner, save_learner

ENSEMBLE_FORMAT = "rydgan-ensemble"
ENSEMBLE_VERSION = 1


def _pca_path(config: RunConfig, cls: int) -> str:
    return os.path.join(config.out_dir, f"pca_class{cls}.json")


def _learners_dir(config: RunConfig, cls: int) -> str:
    return os.path.join(config.out_dir, "learners", f"class{cls}")


def _ensemble_path(config: RunConfig, cls: int) -> str:
    return os.path.join(config.out_dir, f"ensemble_class{cls}.json")


def _echo_config(config: RunConfig):
    os.makedirs(config.out_dir, exist_ok=True)
    dp.atomic_write_text(os.path.join(config.out_dir, "effective-config.ini"),
                         render_config(config))


def _load_class_split(config: RunConfig, cls: int):
    if not config.images or not config.labels:
        raise ValidationError("config must set data.images and data.labels paths")
    for path in (config.images, config.labels):
        if not os.path.exists(path):
            raise DataError(f"dataset file does not exist: {path}")
    dataset = dp.load_idx(config.images, config.labels)
    class_set = dataset.for_class(cls)
    if len(class_set) < 2:
        raise DataError(
            f"class {cls} has only {len(class_set)} images in {config.images}")
    return dp.split_train_val(class_set, config.val_fraction, config.split_seed)


def _scaled_class_features(config: RunConfig, model: dp.PcaModel,
                           train: dp.ImageSet) -> np.ndarray:
    return dp.scale_features(model, dp.transform(model, train.flat()))


def cmd_fit_pca(config: RunConfig) -> int:
    _echo_config(config)
    cls = config.digit_class
    train, _ = _load_class_split(config, cls)
    model = dp.fit_pca(train, config.k)
    path = _pca_path(config, cls)
    dp.save_pca(model, path)
    captured = model.eigenvalues.sum()
    print(f"fitted PCA for class {cls}: {model.k} components from "
          f"{len(train)} images -> {path}")
    print("top eigenvalues: "
          + ", ".join(f"{v:.5g}" for v in model.eigenvalues[:8]))
    print(f"retained variance (top {model.k}): {captured:.5g}")
    return 0


def _shape_pairs(config: RunConfig):
    return [(r, l) for r in config.rabi_shapes for l in config.local_shapes]


def _pair_seed(master_seed: int, index: int) -> int:
    return int(np.random.SeedSequence([master_seed, index]).generate_state(1)[0])


def cmd_train(config: RunConfig) -> int:
    _echo_config(config)
    cls = config.digit_class
    model = _require_pca(config, cls)
    train, _ = _load_class_split(config, cls)
    features = _scaled_class_features(config, model, train)
    pairs = _shape_pairs(config)
    out_dir = _learners_dir(config, cls)
    os.makedirs(out_dir, exist_ok=True)

    def train_one(indexed_pair):
        index, pair = indexed_pair
        train_config = config.train_config(_pair_seed(config.master_seed, index))
        try:
            return layered_train(train_config, features, pair)
        except RydganError as exc:
            raise type(exc)(f"learner {pair[0]}-{pair[1]}: {exc}") from exc

    if config.jobs > 1:
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            results = list(pool.map(train_one, enumerate(pairs)))
    else:
        results = [train_one(item) for item in enumerate(pairs)]

    log_lines = ["learner,cycle,stage,nm_iterations,nm_evaluations,"
                 "gen_loss,disc_loss"]
    for result in results:
        name = result.learner.name
        save_learner(result, os.path.join(out_dir, f"{name}.json"))
        for row in result.log:
            log_lines.append(
                f"{name},{row.cycle},{row.stage},{row.nm_iterations},"
                f"{row.nm_evaluations},{row.gen_loss!r},{row.disc_loss!r}")
        print(f"trained {name}: initial loss {result.initial_loss:.4f}, "
              f"final loss {result.learner.final_loss:.4f}")
    dp.atomic_write_text(os.path.join(out_dir, "training_log.csv"),
                         "\n".join(log_lines) + "\n")
    print(f"wrote {len(results)} learners to {out_dir}")
    return 0


def _require_pca(config: RunConfig, cls: int) -> dp.PcaModel:
    path = _pca_path(config, cls)
    if not os.path.exists(path):
        raise DataError(f"missing PCA model {path}; run fit-pca first")
    return dp.load_pca(path)


def _load_learner_files(config: RunConfig, cls: int):
    pattern = os.path.join(_learners_dir(config, cls), "*.json")
    paths = sorted(glob.glob(pattern))
    if not paths:
        raise ValidationError(
            f"no learner files match {pattern}; run train first")
    return paths, [load_learner(p) for p in paths]


def cmd_select(config: RunConfig) -> int:
    _echo_config(config)
    cls = config.digit_class
    model = _require_pca(config, cls)
    _, val = _load_class_split(config, cls)
    paths, results = _load_learner_files(config, cls)
    learners = [r.learner for r in results]
    seeds = draw_seeds(np.random.default_rng(config.master_seed),
                       config.fid_batch)
    limits = config.limits()
    selection = greedy_select(learners, val, seeds, model, EXACT,
                              limits=limits, c6=config.c6,
                              steps=config.train_config().steps)
    manifest = {
        "format": ENSEMBLE_FORMAT,
        "version": ENSEMBLE_VERSION,
        "class": cls,
        "member_files": [os.path.basename(paths[i])
                         for i in selection.member_indices],
        "member_names": [m.name for m in selection.ensemble.members],
        "validation_fid": selection.ensemble.validation_fid,
        "fid_trail": list(selection.fid_trail),
        "singleton_fids": list(selection.singleton_fids),
        "master_seed": config.master_seed,
        "fid_batch": config.fid_batch,
    }
    dp.atomic_write_text(_ensemble_path(config, cls),
                         json.dumps(manifest, indent=1))
    print(f"selected {len(selection.ensemble.members)} member(s) for class "
          f"{cls}: {', '.join(manifest['member_names'])}")
    print("validation FID trail: "
          + " -> ".join(f"{v:.4f}" for v in selection.fid_trail))
    return 0


def _load_ensemble_members(config: RunConfig, cls: int):
    path = _ensemble_path(config, cls)
    if not os.path.exists(path):
        raise DataError(f"missing ensemble manifest {path}; run select first")
    try:
        with open(path, "r", encoding="utf-8") as f:
            manifest = json.load(f)
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not a valid manifest: {exc}") from exc
    if manifest.get("format") != ENSEMBLE_FORMAT:
        raise DataError(f"{path}: not a {ENSEMBLE_FORMAT} document")
    members = [load_learner(os.path.join(_learners_dir(config, cls), name)).learner
               for name in manifest["member_files"]]
    return manifest, members


def _member_mode(config: RunConfig, mode_name: str, image_idx: int,
                 member_idx: int):
    """Per-image, per-member generation mode with derived RNG streams."""
    if mode_name == "ideal":
        return EXACT
    derived = int(np.random.SeedSequence(
        [config.master_seed, image_idx, member_idx]).generate_state(1)[0])
    if mode_name == "shots":
        return ShotsMode(config.shots, derived)
    if mode_name == "noisy":
        model = ErrorModel(config.detuning_sigma, config.rabi_rel_sigma,
                           config.position_sigma, derived)
        return NoisyMode(model)
    raise ValidationError(f"unknown mode {mode_name!r}")


def _generate_images(config: RunConfig, members, model: dp.PcaModel,
                     mode_name: str, count: int) -> np.ndarray:
    """(count, 28, 28) ensemble images; every run a fresh perturbation."""
    seeds = draw_seeds(np.random.default_rng(config.master_seed), count)
    limits = config.limits()
    steps = config.train_config().steps
    images = []
    for i, seed in enumerate(seeds):
        outputs = [generate_features(m.params, float(seed),
                                     _member_mode(config, mode_name, i, j),
                                     limits, config.c6, steps)
                   for j, m in enumerate(members)]
        features = np.mean(outputs, axis=0)
        weights = dp.unscale_features(model, features)
        images.append(dp.inverse_transform(model, weights).reshape(28, 28))
    return np.array(images)


def _metric_rows(images: np.ndarray, val: dp.ImageSet):
    score = fid_images(val.images, images)
    variation = variation_scores(images)
    return score, variation


def cmd_generate(config: RunConfig) -> int:
    _echo_config(config)
    cls = config.digit_class
    model = _require_pca(config, cls)
    _, val = _load_class_split(config, cls)
    _, members = _load_ensemble_members(config, cls)
    images = _generate_images(config, members, model, config.mode, config.count)
    out_dir = os.path.join(config.out_dir, "generated", f"class{cls}",
                           config.mode)
    os.makedirs(out_dir, exist_ok=True)
    for i, image in enumerate(images):
        dp.write_image(image, os.path.join(out_dir, f"img_{i:04d}.pgm"))
    dp.write_montage(images, os.path.join(out_dir, "montage.pgm"))
    score, variation = _metric_rows(images, val)
    lines = ["class,mode,fid,mean_variation",
             f"{cls},{config.mode},{score!r},{float(variation.mean())!r}"]
    dp.atomic_write_text(os.path.join(out_dir, "metrics.csv"),
                         "\n".join(lines) + "\n")
    var_lines = ["image,variation"] + [f"{i},{float(v)!r}" for i, v in
                                       enumerate(variation)]
    dp.atomic_write_text(os.path.join(out_dir, "variation.csv"),
                         "\n".join(var_lines) + "\n")
    print(f"wrote {len(images)} images + montage to {out_dir}")
    print(f"FID vs held-out data: {score:.4f}; "
          f"mean variation: {variation.mean():.6f}")
    return 0


def cmd_evaluate(config: RunConfig, classes) -> int:
    if not classes:
        raise ValidationError("evaluate needs at least one class (use --class)")
    _echo_config(config)
    rows = ["class,mode,fid,mean_variation"]
    summary = []
    for cls in classes:
        model = _require_pca(config, cls)
        _, val = _load_class_split(config, cls)
        _, members = _load_ensemble_members(config, cls)
        per_mode = {}
        for mode_name in ("ideal", "noisy"):
            images = _generate_images(config, members, model, mode_name,
                                      config.fid_batch)
            score, variation = _metric_rows(images, val)
            rows.append(f"{cls},{mode_name},{score!r},"
                        f"{float(variation.mean())!r}")
            var_lines = ["image,variation"] + [
                f"{i},{float(v)!r}" for i, v in enumerate(variation)]
            dp.atomic_write_text(
                os.path.join(config.out_dir,
                             f"variation_class{cls}_{mode_name}.csv"),
                "\n".join(var_lines) + "\n")
            per_mode[mode_name] = (score, float(variation.mean()))
        summary.append(
            f"class {cls}: ideal FID {per_mode['ideal'][0]:.4f} "
            f"(mean variation {per_mode['ideal'][1]:.6f}); "
            f"noisy FID {per_mode['noisy'][0]:.4f} "
            f"(mean variation {per_mode['noisy'][1]:.6f})")
    dp.atomic_write_text(os.path.join(config.out_dir, "evaluation.csv"),
                         "\n".join(rows) + "\n")
    dp.atomic_write_text(os.path.join(config.out_dir, "evaluation.txt"),
                         "\n".join(summary) + "\n")
    for line in summary:
        print(line)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rydgan",
        description="Quantum GAN pipeline on a simulated Rydberg-atom generator")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
            ("fit-pca", "fit the per-class PCA model and scaling bounds"),
            ("train", "adversarially train one learner per pulse-shape pair"),
            ("select", "greedy ensemble selection over trained learners"),
            ("generate", "generate images with the selected ensemble"),
            ("evaluate", "FID and variation, ideal vs noisy, per class")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", metavar="PATH", help="INI config file")
        p.add_argument("--class", dest="digit_class", metavar="N",
                       help="digit class (evaluate accepts a comma list)")
        p.add_argument("--seed", dest="master_seed", type=int, metavar="N",
                       help="master RNG seed")
        p.add_argument("--out", dest="out_dir", metavar="DIR",
                       help="output directory")
        p.add_argument("--jobs", type=int, metavar="N",
                       help="parallel worker bound")
        if name == "generate":
            p.add_argument("--count", type=int, metavar="N",
                           help="number of images")
            p.add_argument("--mode", choices=MODES, help="generation mode")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        classes = None
        digit_class = None
        if args.digit_class is not None:
            try:
                classes = [int(x) for x in str(args.digit_class).split(",") if x]
            except ValueError:
                raise ValidationError(
                    f"--class must be an integer or comma list, "
                    f"got {args.digit_class!r}")
            digit_class = classes[0] if classes else None
        overrides = {"digit_class": digit_class,
                     "master_seed": args.master_seed,
                     "out_dir": args.out_dir,
                     "jobs": args.jobs,
                     "count": getattr(args, "count", None),
                     "mode": getattr(args, "mode", None)}
        config = load_config(args.config, overrides)
        config.validate()
        if args.command == "fit-pca":
            return cmd_fit_pca(config)
        if args.command == "train":
            return cmd_train(config)
        if args.command == "select":
            return cmd_select(config)
        if args.command == "generate":
            return cmd_generate(config)
        if args.command == "evaluate":
            return cmd_evaluate(config,
                                classes if classes is not None
                                else [config.digit_class])
        raise ValidationError(f"unknown command {args.command!r}")
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
