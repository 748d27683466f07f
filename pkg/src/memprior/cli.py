"""Command-line front end producing self-describing run directories.

Every producing subcommand takes a strict JSON config (unknown keys are
rejected), a fresh output directory, and a master seed; it writes matrix
and CSV artifacts plus a manifest.json with per-file checksums. Rerunning
with the same config and seed reproduces the artifacts byte for byte.
Consuming subcommands (diagnose, verify) operate on existing run
directories.

Exit codes: 0 success, 2 configuration problems, 3 numerical failures,
4 verification failures.

numpy is imported inside the handlers, after --threads has had a chance to
pin the BLAS thread-count environment variables.
"""

import argparse
import json
import os
import sys
from pathlib import Path

from .errors import (
    ConfigError,
    DegenerateScheduleError,
    DimensionMismatchError,
    InternalConsistencyError,
    InvalidModelError,
    SamplerFailureError,
    SolverFailureError,
    TrainingFailureError,
    UndefinedRatioError,
    UnsupportedDimensionError,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_VERIFY = 4

_CONFIG_ERRORS = (
    ConfigError,
    DimensionMismatchError,
    UnsupportedDimensionError,
    UndefinedRatioError,
    DegenerateScheduleError,
    ValueError,
    KeyError,
    TypeError,
)
# checked before the config family: InvalidModelError subclasses ValueError
_NUMERICAL_ERRORS = (
    SolverFailureError,
    TrainingFailureError,
    SamplerFailureError,
    InvalidModelError,
    InternalConsistencyError,
    FloatingPointError,
)

_THREAD_VARS = (
    "OMP_NUM_THREADS",
    "OPENBLAS_NUM_THREADS",
    "MKL_NUM_THREADS",
    "NUMEXPR_NUM_THREADS",
)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="memprior",
        description="memorized-prior inverse-problem laboratory",
    )
    parser.add_argument(
        "--threads",
        type=int,
        default=None,
        help="pin BLAS/OpenMP thread count (must be set before numpy loads)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def producing(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--out", required=True, help="run directory to create")
        p.add_argument("--seed", type=int, default=0, help="master seed")
        return p

    producing("stylized", "exact-posterior sweep for the small closed-form operators")
    producing("fwi-gen", "synthesize a seismic training set, truth, and observation")
    producing("train", "fit the denoising network on a generated training set")
    producing("sample", "unconditional reverse-diffusion sampling")
    producing("dps", "observation-guided posterior sampling")

    d = sub.add_parser("diagnose", help="memorization and calibration reports for a run")
    d.add_argument("--run", required=True, help="sampling run directory")

    v = sub.add_parser("verify", help="re-checksum a run directory against its manifest")
    v.add_argument("--run", required=True, help="run directory to verify")
    return parser


def _schedule_from(cfg_entry):
    from . import io
    from .schedules import NoiseSchedule

    if cfg_entry is None:
        return NoiseSchedule.variance_exploding()
    if not isinstance(cfg_entry, dict):
        raise ConfigError("schedule must be a JSON object")
    io.validate_keys(cfg_entry, {"kind", "sigma_min", "sigma_max"}, "schedule")
    return NoiseSchedule(
        cfg_entry.get("kind", "variance-exploding"),
        cfg_entry.get("sigma_min", 0.01),
        cfg_entry.get("sigma_max", 10.0),
    )


def _read_setup(run_dir):
    path = Path(run_dir) / "setup.json"
    if not path.exists():
        raise ConfigError(f"{run_dir} has no setup.json; not a usable run directory")
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _write_setup(run_dir, setup):
    with open(Path(run_dir) / "setup.json", "w", encoding="utf-8") as fh:
        json.dump(setup, fh, indent=2, sort_keys=True)
        fh.write("\n")


# --- stylized -----------------------------------------------------------


def _stylized_operator(name, gamma):
    from .operators import (
        STYLIZED_1D_TRAINING,
        Cubic1DOperator,
        Pentagon2DOperator,
        pentagon_training_set,
    )

    if name == "cubic1d":
        return Cubic1DOperator(gamma), STYLIZED_1D_TRAINING
    if name == "pentagon2d":
        return Pentagon2DOperator(gamma), pentagon_training_set()
    raise ConfigError(f"unknown operator {name!r}; expected cubic1d or pentagon2d")


def _cmd_stylized(args):
    import numpy as np

    from . import __version__, io
    from .operators import synthesize_observation
    from .posteriors import (
        empirical_posterior_weights,
        grid_posterior,
        linearized_posterior,
        mixture_grid_masses,
        total_variation,
    )

    cfg = io.load_json_config(args.config)
    io.validate_keys(
        cfg, {"operator", "gamma", "observation", "sigmas", "grid_points"}, "stylized config"
    )
    operator, atoms = _stylized_operator(cfg.get("operator", "cubic1d"), float(cfg.get("gamma", 0.3)))
    sigmas = [float(s) for s in cfg.get("sigmas", [0.5, 0.3, 0.05])]
    if not sigmas or any(s <= 0 for s in sigmas):
        raise ConfigError("sigmas must be a non-empty list of positive numbers")

    obs_cfg = cfg.get("observation", {})
    io.validate_keys(obs_cfg, {"y", "true_model", "seed", "noiseless"}, "observation")
    if "y" in obs_cfg:
        y = np.asarray(obs_cfg["y"], dtype=float).ravel()
        truth = None
    else:
        truth = np.asarray(obs_cfg.get("true_model", atoms[0]), dtype=float).ravel()
        obs = synthesize_observation(
            operator,
            truth,
            seed=int(obs_cfg.get("seed", args.seed)),
            noiseless=bool(obs_cfg.get("noiseless", False)),
        )
        y = obs.y

    with io.run_lock(args.out) as run_dir:
        summary_rows = []
        for i, sigma in enumerate(sigmas):
            grid = grid_posterior(operator, atoms, y, sigma, n_points=cfg.get("grid_points"))
            mix = linearized_posterior(operator, atoms, y, sigma)
            lookup_w, misfits = empirical_posterior_weights(operator, atoms, y)
            tv = total_variation(grid.masses(), mixture_grid_masses(mix, grid.axes))
            l1 = float(np.abs(mix.weights - lookup_w).sum())
            per_atom = [
                grid.mass_near(atoms[j : j + 1], half_width=3.0 * sigma)
                for j in range(atoms.shape[0])
            ]
            io.write_matrix(run_dir / f"grid_axes_{i}.mpst", np.stack(grid.axes))
            io.write_matrix(run_dir / f"grid_density_{i}.mpst", grid.density())
            io.write_csv(
                run_dir / f"atom_masses_{i}.csv",
                ["atom_idx", "grid_mass", "linearized_weight", "lookup_weight", "misfit"],
                [
                    (j, per_atom[j], mix.weights[j], lookup_w[j], misfits[j])
                    for j in range(atoms.shape[0])
                ],
            )
            summary_rows.append((sigma, tv, l1, float(np.sum(per_atom))))
        io.write_csv(
            run_dir / "stylized_summary.csv",
            ["sigma", "tv_linearized_grid", "l1_weights", "atoms_mass_total"],
            summary_rows,
        )
        io.write_matrix(run_dir / "training.mpst", atoms)
        io.write_matrix(run_dir / "observation.mpst", y)
        if truth is not None:
            io.write_matrix(run_dir / "truth.mpst", truth)
        _write_setup(
            run_dir,
            {
                "task": "stylized",
                "operator": cfg.get("operator", "cubic1d"),
                "gamma": operator.gamma,
                "sigmas": sigmas,
            },
        )
        io.write_manifest(run_dir, cfg, {"master": args.seed}, __version__)
    print(f"stylized sweep over {len(sigmas)} noise levels written to {args.out}")
    return EXIT_OK


# --- fwi-gen ------------------------------------------------------------


_GRID_KEYS = {
    "nx",
    "nz",
    "extent_km",
    "freq_hz",
    "pml_cells",
    "pml_reflection",
    "n_sources",
    "n_receivers",
    "background_slowness_sq",
}
_KL_KEYS = {"n_terms", "alpha", "tau", "s0", "amplitude"}


def _build_fwi_operator(grid_cfg, kl_cfg, gamma):
    from .helmholtz import HelmholtzConfig, HelmholtzKLOperator, HelmholtzSolver
    from .klfield import KarhunenLoeveBasis

    hcfg = HelmholtzConfig(**grid_cfg)
    kl = dict(kl_cfg)
    amplitude = kl.pop("amplitude", 2.5)
    basis = KarhunenLoeveBasis(nx=hcfg.nx, nz=hcfg.nz, **kl).fit()
    solver = HelmholtzSolver(hcfg)
    return HelmholtzKLOperator(solver, basis, gamma=gamma, amplitude=amplitude), basis


def _cmd_fwi_gen(args):
    import numpy as np

    from . import __version__, io
    from .diagnostics import nearest_neighbor_ratio
    from .helmholtz import relative_noise_gamma

    cfg = io.load_json_config(args.config)
    io.validate_keys(cfg, {"grid", "kl", "n_train", "noise_rel", "truth_blend"}, "fwi-gen config")
    grid_cfg = dict(cfg.get("grid", {}))
    io.validate_keys(grid_cfg, _GRID_KEYS, "grid")
    kl_cfg = dict(cfg.get("kl", {}))
    io.validate_keys(kl_cfg, _KL_KEYS, "kl")
    n_train = int(cfg.get("n_train", 50))
    noise_rel = float(cfg.get("noise_rel", 0.055))
    blend = int(cfg.get("truth_blend", 3))
    if n_train < 2 or not 1 <= blend <= n_train:
        raise ConfigError("need n_train >= 2 and 1 <= truth_blend <= n_train")

    operator, basis = _build_fwi_operator(grid_cfg, kl_cfg, gamma=1.0)
    train_seq, noise_seq = np.random.SeedSequence(args.seed).spawn(2)
    X = np.random.default_rng(train_seq).standard_normal((n_train, basis.n_terms))

    # truth: blend of the training examples sitting deepest inside the cloud,
    # ranked by leave-one-out nearest-neighbor distance ratio
    loo = np.array(
        [
            nearest_neighbor_ratio(X[i], np.delete(X, i, axis=0))[0]
            for i in range(n_train)
        ]
    )
    chosen = np.argsort(loo, kind="stable")[:blend]
    x_true = X[chosen].mean(axis=0)

    clean = operator.evaluate(x_true)
    gamma = relative_noise_gamma(clean, noise_rel)
    operator.gamma = gamma
    y = clean + gamma * np.random.default_rng(noise_seq).standard_normal(clean.size)
    s_true, _ = operator.field_and_mask(x_true)

    with io.run_lock(args.out) as run_dir:
        basis.save(run_dir)
        io.write_matrix(run_dir / "training.mpst", X)
        io.write_matrix(run_dir / "truth.mpst", x_true)
        io.write_matrix(run_dir / "truth_field.mpst", s_true.reshape(basis.field_shape()))
        io.write_matrix(run_dir / "observation.mpst", y)
        io.write_matrix(run_dir / "clean_data.mpst", clean)
        _write_setup(
            run_dir,
            {
                "task": "fwi-gen",
                "grid": grid_cfg,
                "kl": kl_cfg,
                "gamma": gamma,
                "noise_rel": noise_rel,
                "n_train": n_train,
                "truth_indices": [int(i) for i in chosen],
            },
        )
        io.write_manifest(run_dir, cfg, {"master": args.seed}, __version__)
    print(
        f"generated {n_train} training models, {y.size} data components, "
        f"gamma={gamma:.6g} -> {args.out}"
    )
    return EXIT_OK


# --- train ----------------------------------------------------------------


def _cmd_train(args):
    from . import __version__, io
    from .score_net import DenoisingScoreNet

    cfg = io.load_json_config(args.config)
    io.validate_keys(
        cfg,
        {
            "source_run",
            "steps",
            "hidden",
            "n_freqs",
            "learning_rate",
            "batch_size",
            "clip_norm",
            "schedule",
        },
        "train config",
    )
    if "source_run" not in cfg:
        raise ConfigError("train config requires source_run")
    source = Path(cfg["source_run"])
    training_path = source / "training.mpst"
    if not training_path.exists():
        raise ConfigError(f"{source} has no training.mpst")
    X = io.read_matrix(training_path)

    net = DenoisingScoreNet(
        hidden=tuple(cfg.get("hidden", [256, 256, 256])),
        n_freqs=int(cfg.get("n_freqs", 8)),
        schedule=_schedule_from(cfg.get("schedule")),
        learning_rate=float(cfg.get("learning_rate", 1e-4)),
        batch_size=int(cfg.get("batch_size", 64)),
        clip_norm=float(cfg.get("clip_norm", 10.0)),
        seed=args.seed,
    )
    steps = int(cfg.get("steps", 20_000))
    net.fit(X, steps=steps)

    with io.run_lock(args.out) as run_dir:
        net.save(run_dir)
        _write_setup(
            run_dir,
            {
                "task": "train",
                "source_run": str(source),
                "steps": steps,
                "final_loss": float(net.loss_trace_[-1]),
            },
        )
        io.write_manifest(run_dir, cfg, {"master": args.seed}, __version__)
    print(f"trained {steps} steps, final loss {net.loss_trace_[-1]:.4f} -> {args.out}")
    return EXIT_OK


# --- sample / dps -----------------------------------------------------------


def _score_source(cfg, source_run, io_module):
    """Either the analytic mixture on the stored training set or a trained net."""
    from .prior import GaussianMixturePrior
    from .score_net import DenoisingScoreNet

    kind = cfg.get("score", "mixture")
    if kind == "net":
        if "net_run" not in cfg:
            raise ConfigError("score='net' requires net_run")
        net = DenoisingScoreNet.load(cfg["net_run"])
        return net, net.schedule_
    if kind != "mixture":
        raise ConfigError(f"unknown score source {kind!r}; expected mixture or net")
    X = io_module.read_matrix(source_run / "training.mpst")
    prior = GaussianMixturePrior(schedule=_schedule_from(cfg.get("schedule"))).fit(X)
    return prior, prior.schedule_


def _sampler_config(cfg, args, schedule, zeta=0.0):
    from .samplers import SamplerConfig

    return SamplerConfig(
        n_steps=int(cfg.get("n_steps", 500)),
        batch=int(cfg.get("n_samples", 64)),
        seed=args.seed,
        guidance_scale=zeta,
        schedule=schedule,
    )


_SAMPLE_KEYS = {"source_run", "score", "net_run", "schedule", "n_samples", "n_steps"}


def _cmd_sample(args):
    from . import __version__, io
    from .samplers import sample_unconditional

    cfg = io.load_json_config(args.config)
    io.validate_keys(cfg, _SAMPLE_KEYS, "sample config")
    if "source_run" not in cfg:
        raise ConfigError("sample config requires source_run")
    source_run = Path(cfg["source_run"])
    source, schedule = _score_source(cfg, source_run, io)
    samples = sample_unconditional(source, _sampler_config(cfg, args, schedule))

    with io.run_lock(args.out) as run_dir:
        io.write_matrix(run_dir / "samples.mpst", samples)
        _write_setup(
            run_dir,
            {
                "task": "sample",
                "source_run": str(source_run),
                "score": cfg.get("score", "mixture"),
                "net_run": cfg.get("net_run"),
                "n_steps": int(cfg.get("n_steps", 500)),
            },
        )
        io.write_manifest(run_dir, cfg, {"master": args.seed}, __version__)
    print(f"drew {samples.shape[0]} samples of dimension {samples.shape[1]} -> {args.out}")
    return EXIT_OK


def _cmd_dps(args):
    import numpy as np

    from . import __version__, io
    from .samplers import misfit_trace_summary, sample_dps

    cfg = io.load_json_config(args.config)
    io.validate_keys(cfg, _SAMPLE_KEYS | {"zeta"}, "dps config")
    if "source_run" not in cfg:
        raise ConfigError("dps config requires source_run")
    source_run = Path(cfg["source_run"])
    setup = _read_setup(source_run)
    if "grid" not in setup:
        raise ConfigError("dps needs a generated seismic run (missing grid in setup.json)")
    operator, _ = _build_fwi_operator(setup["grid"], setup["kl"], gamma=setup["gamma"])
    y = io.read_matrix(source_run / "observation.mpst")

    source, schedule = _score_source(cfg, source_run, io)
    zeta = float(cfg.get("zeta", 1.0))
    samples, trace = sample_dps(source, operator, y, _sampler_config(cfg, args, schedule, zeta))

    with io.run_lock(args.out) as run_dir:
        io.write_matrix(run_dir / "samples.mpst", samples)
        io.write_matrix(run_dir / "misfit_trace.mpst", trace)
        io.write_csv(
            run_dir / "misfit_summary.csv",
            ["step", "mean", "min", "max"],
            [(r["step"], r["mean"], r["min"], r["max"]) for r in misfit_trace_summary(trace)],
        )
        _write_setup(
            run_dir,
            {
                "task": "dps",
                "source_run": str(source_run),
                "score": cfg.get("score", "mixture"),
                "net_run": cfg.get("net_run"),
                "zeta": zeta,
                "n_steps": int(cfg.get("n_steps", 500)),
            },
        )
        io.write_manifest(run_dir, cfg, {"master": args.seed}, __version__)
    final = float(np.mean(trace[-1]))
    print(
        f"drew {samples.shape[0]} guided samples, final mean misfit {final:.6g} -> {args.out}"
    )
    return EXIT_OK


# --- diagnose / verify ------------------------------------------------------


def _cmd_diagnose(args):
    import numpy as np

    from . import __version__, io
    from .diagnostics import (
        CALIBRATION_CSV_HEADER,
        RATIO_CSV_HEADER,
        calibration_pairs,
        memorization_rate,
        overconfident_fraction,
        posterior_summary,
    )
    from .klfield import KarhunenLoeveBasis

    run_dir = Path(args.run)
    samples_path = run_dir / "samples.mpst"
    if not samples_path.exists():
        raise ConfigError(f"{run_dir} has no samples.mpst")
    setup = _read_setup(run_dir)
    source_run = Path(setup["source_run"])
    samples = io.read_matrix(samples_path)
    training = io.read_matrix(source_run / "training.mpst")

    rate, records = memorization_rate(samples, training)
    summary = {
        "n_samples": int(samples.shape[0]),
        "dim": int(samples.shape[1]),
        "memorization_rate": rate,
        "source_run": str(source_run),
    }

    basis = None
    if (source_run / "kl_meta.json").exists():
        basis = KarhunenLoeveBasis.load(source_run)
        if basis.n_terms != samples.shape[1]:
            basis = None
    stats = posterior_summary(samples, basis=basis)

    manifest = io.read_manifest(run_dir)
    with io.run_lock(run_dir):
        io.write_csv(
            run_dir / "ratios.csv",
            RATIO_CSV_HEADER,
            [
                (
                    r["sample_id"],
                    r["nearest_idx"],
                    r["d1"],
                    r["dbar"],
                    r["ratio"],
                    int(r["memorized"]),
                )
                for r in records
            ],
        )
        truth_path = source_run / "truth.mpst"
        if truth_path.exists():
            truth = io.read_matrix(truth_path)
            abs_error, std = calibration_pairs(samples, truth)
            io.write_csv(
                run_dir / "calibration.csv",
                CALIBRATION_CSV_HEADER,
                list(zip(range(abs_error.size), abs_error, std)),
            )
            summary["overconfident_fraction"] = overconfident_fraction(abs_error, std)
        if basis is not None:
            shape = basis.field_shape()
            io.write_matrix(run_dir / "mean_field.mpst", stats["field_mean"].reshape(shape))
            io.write_matrix(run_dir / "std_field.mpst", stats["field_std"].reshape(shape))
        with open(run_dir / "summary.json", "w", encoding="utf-8") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
        io.write_manifest(run_dir, manifest["config"], manifest["seeds"], __version__)
    print(f"memorization rate {rate:.3f} over {samples.shape[0]} samples -> {run_dir}")
    return EXIT_OK


def _cmd_verify(args):
    from . import io

    run_dir = Path(args.run)
    manifest = io.read_manifest(run_dir)
    problems = []
    for rel, digest in manifest["files"].items():
        path = run_dir / rel
        if not path.exists():
            problems.append(f"missing file: {rel}")
        elif io.sha256_file(path) != digest:
            problems.append(f"checksum mismatch: {rel}")
    if problems:
        for p in problems:
            print(f"verify: {p}", file=sys.stderr)
        return EXIT_VERIFY
    print(f"verified {len(manifest['files'])} files in {run_dir}")
    return EXIT_OK


_HANDLERS = {
    "stylized": _cmd_stylized,
    "fwi-gen": _cmd_fwi_gen,
    "train": _cmd_train,
    "sample": _cmd_sample,
    "dps": _cmd_dps,
    "diagnose": _cmd_diagnose,
    "verify": _cmd_verify,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads is not None:
        if args.threads < 1:
            print("--threads must be >= 1", file=sys.stderr)
            return EXIT_CONFIG
        for var in _THREAD_VARS:
            os.environ[var] = str(args.threads)
    try:
        return _HANDLERS[args.command](args)
    except _NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except _CONFIG_ERRORS as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
