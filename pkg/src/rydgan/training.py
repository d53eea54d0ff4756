"""Adversarial training of one learner under the layered scheme.

Each training cycle walks the parameter groups in a fixed order
(atom positions, Rabi scalar, local-detuning scalar plus couplings,
global-detuning offset). Per stage the discriminator first takes a block
of Adam steps on real-vs-generated batches, then Nelder-Mead minimizes
the generator's adversarial loss over that stage's parameters only, with
all other parameters frozen. Generation during training uses exact
probabilities (no shot noise). Fully deterministic for a fixed seed.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .data import atomic_write_text
from .discriminator import (AdamState, DiscriminatorNet, discriminator_forward,
                            discriminator_step, init_discriminator)
from .errors import DataError, ValidationError
from .generator import EXACT, GeneratorParams, draw_seeds, generate_features
from .neldermead import nelder_mead
from .pulses import DEFAULT_LIMITS, PulseLimits
from .sim import AtomArrangement, C6_DEFAULT

STAGES = ("positions", "rabi", "local", "global")

# penalty returned by the generator objective for geometry violations,
# large enough to dominate any reachable cross-entropy value
_GEOMETRY_PENALTY = 1e3


@dataclass(frozen=True)
class TrainConfig:
    n_qubits: int = 4
    duration: float = 1.0
    steps_per_us: int = 1000
    cycles: int = 3
    nm_iters: int = 60
    nm_tol: float = 1e-6
    disc_steps: int = 30
    disc_batch: int = 32
    seed_batch: int = 16
    adam_lr: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    hidden: int = 64
    stage_order: tuple = STAGES
    master_seed: int = 0
    limits: PulseLimits = field(default_factory=PulseLimits)
    c6: float = C6_DEFAULT
    min_spacing: float = 4.0
    field_size: float = 75.0

    def __post_init__(self):
        for name in ("n_qubits", "steps_per_us", "cycles", "nm_iters",
                     "disc_steps", "disc_batch", "seed_batch", "hidden"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be >= 1, got {getattr(self, name)}")
        if not self.duration > 0:
            raise ValidationError("duration must be positive")
        if sorted(self.stage_order) != sorted(STAGES):
            raise ValidationError(
                f"stage_order must be a permutation of {STAGES}, "
                f"got {self.stage_order}")
        object.__setattr__(self, "stage_order", tuple(self.stage_order))

    @property
    def steps(self) -> int:
        return max(1, int(round(self.steps_per_us * self.duration)))


@dataclass(frozen=True)
class Learner:
    """One trained generator: a pulse-shape pair plus its parameters."""

    rabi_shape: str
    local_shape: str
    params: GeneratorParams
    final_loss: float
    validation_fid: float | None = None

    @property
    def name(self) -> str:
        return f"{self.rabi_shape}-{self.local_shape}"


@dataclass(frozen=True)
class StageLog:
    cycle: int
    stage: str
    nm_iterations: int
    nm_evaluations: int
    gen_loss: float
    disc_loss: float


@dataclass(frozen=True)
class TrainingResult:
    learner: Learner
    net: DiscriminatorNet
    log: tuple
    config: TrainConfig
    initial_loss: float


def generator_loss(params: GeneratorParams, net: DiscriminatorNet, seeds,
                   steps: int | None = None,
                   limits: PulseLimits = DEFAULT_LIMITS,
                   c6: float = C6_DEFAULT) -> float:
    """Mean over seeds of -log D(G(seed)): low when the net is fooled."""
    seeds = np.asarray(seeds, dtype=float)
    if seeds.size == 0:
        raise ValidationError("seed batch must be nonempty")
    total = 0.0
    for s in seeds:
        feats = generate_features(params, float(s), EXACT, limits, c6, steps)
        total += -np.log(discriminator_forward(net, feats))
    return float(total / seeds.size)


def initial_params(config: TrainConfig, rng: np.random.Generator) -> GeneratorParams:
    """Weakly driven starting point: jittered grid, mid-range couplings.

    Atoms sit on a 6 um grid (outside full blockade, within interaction
    range) with +-0.5 um uniform jitter; drive scalars start small so the
    untrained generator output is clearly distinguishable from data.
    """
    n = config.n_qubits
    side = int(np.ceil(np.sqrt(n)))
    cells = [(6.0 + 6.0 * (i % side), 6.0 + 6.0 * (i // side)) for i in range(n)]
    jitter = rng.uniform(-0.5, 0.5, size=(n, 2))
    positions = tuple((x + jitter[i, 0], y + jitter[i, 1])
                      for i, (x, y) in enumerate(cells))
    couplings = tuple(rng.uniform(0.25, 0.75, size=n))
    return GeneratorParams(
        arrangement=AtomArrangement(positions, couplings),
        rabi_shape="linear", rabi_param=float(rng.uniform(0.5, 2.0)),
        local_shape="linear", local_param=float(rng.uniform(-5.0, -0.5)),
        global_detuning_offset=float(rng.uniform(-1.0, 1.0)),
        duration=config.duration)


def _stage_vector(params: GeneratorParams, stage: str, config: TrainConfig):
    """Current values and bounds box for one parameter group."""
    lim = config.limits
    if stage == "positions":
        x = params.arrangement.position_array().reshape(-1)
        bounds = [(0.0, config.field_size)] * x.size
    elif stage == "rabi":
        x = np.array([params.rabi_param])
        bounds = [(0.0, lim.omega_max)]
    elif stage == "local":
        x = np.concatenate([[params.local_param],
                            params.arrangement.coupling_array()])
        bounds = [(lim.local_detuning_min, 0.0)] + [(0.0, 1.0)] * params.n_qubits
    elif stage == "global":
        x = np.array([params.global_detuning_offset])
        bounds = [(-lim.global_detuning_abs, lim.global_detuning_abs)]
    else:
        raise ValidationError(f"unknown stage {stage!r}")
    return x, bounds


def _with_stage_vector(params: GeneratorParams, stage: str, x) -> GeneratorParams:
    x = np.asarray(x, dtype=float)
    if stage == "positions":
        positions = tuple(map(tuple, x.reshape(-1, 2)))
        return replace(params, arrangement=AtomArrangement(
            positions, params.arrangement.couplings))
    if stage == "rabi":
        return replace(params, rabi_param=float(x[0]))
    if stage == "local":
        return replace(params,
                       local_param=float(x[0]),
                       arrangement=AtomArrangement(
                           params.arrangement.positions, tuple(x[1:])))
    if stage == "global":
        return replace(params, global_detuning_offset=float(x[0]))
    raise ValidationError(f"unknown stage {stage!r}")


def _min_pair_distance(params: GeneratorParams) -> float:
    pos = params.arrangement.position_array()
    dists = np.linalg.norm(pos[:, None] - pos[None, :], axis=-1)
    return float(dists[np.triu_indices(len(pos), 1)].min())


def _fake_batch(params: GeneratorParams, seeds, config: TrainConfig) -> np.ndarray:
    return np.stack([generate_features(params, float(s), EXACT, config.limits,
                                       config.c6, config.steps)
                     for s in seeds])


def layered_train(config: TrainConfig, class_data, shapes) -> TrainingResult:
    """Train one learner (a Rabi/local shape pair) against class features.

    class_data must already be scaled into the generator output window
    (0, 1/2^n]; handing the discriminator raw PCA features is a wiring
    bug and rejected here.
    """
    data = np.asarray(class_data, dtype=float)
    k = 1 << config.n_qubits
    if data.ndim != 2 or data.shape[1] != k:
        raise ValidationError(
            f"class_data must have shape (N, {k}), got {data.shape}")
    if data.shape[0] == 0:
        raise ValidationError("class_data must be nonempty")
    window_top = 1.0 / k
    if data.min() < -1e-9 or data.max() > window_top + 1e-9:
        raise ValidationError(
            "class_data must be scaled into the generator window "
            f"[0, {window_top}]; got range [{data.min():.4g}, {data.max():.4g}]")

    rabi_shape, local_shape = shapes
    rng = np.random.default_rng(config.master_seed)
    params = replace(initial_params(config, rng),
                     rabi_shape=rabi_shape, local_shape=local_shape)
    params.validate(config.limits, config.min_spacing, config.field_size)

    net = init_discriminator(rng, in_dim=k, hidden=config.hidden)
    adam = AdamState.for_net(net)

    log = []
    initial_loss = None
    disc_loss = float("nan")
    for cycle in range(config.cycles):
        for stage in config.stage_order:
            # (a) discriminator block: real vs freshly generated batches
            for _ in range(config.disc_steps):
                rows = rng.integers(0, data.shape[0], size=config.disc_batch)
                fake_seeds = draw_seeds(rng, config.disc_batch)
                fakes = _fake_batch(params, fake_seeds, config)
                net, adam, disc_loss = discriminator_step(
                    net, data[rows], fakes, adam, config.adam_lr,
                    config.adam_beta1, config.adam_beta2, config.adam_eps)

            # (b) generator block: Nelder-Mead on this stage's parameters
            stage_seeds = draw_seeds(rng, config.seed_batch)
            if initial_loss is None:
                initial_loss = generator_loss(params, net, stage_seeds,
                                              config.steps, config.limits,
                                              config.c6)
            x0, bounds = _stage_vector(params, stage, config)

            def objective(x, _stage=stage, _net=net, _seeds=stage_seeds,
                          _params=params):
                trial = _with_stage_vector(_params, _stage, x)
                if trial.n_qubits > 1:
                    dmin = _min_pair_distance(trial)
                    if dmin < config.min_spacing:
                        return _GEOMETRY_PENALTY + 100.0 * (config.min_spacing - dmin)
                return generator_loss(trial, _net, _seeds, config.steps,
                                      config.limits, config.c6)

            result = nelder_mead(objective, x0, bounds,
                                 max_iters=config.nm_iters, tol=config.nm_tol)
            if result.fun >= _GEOMETRY_PENALTY:
                # no legal improvement found; keep the previous parameters
                result_x, gen_loss = x0, float(objective(x0))
            else:
                result_x, gen_loss = result.x, result.fun
            params = _with_stage_vector(params, stage, result_x)
            log.append(StageLog(cycle, stage, result.iterations,
                                result.evaluations, gen_loss, disc_loss))

    params.validate(config.limits, config.min_spacing, config.field_size)
    learner = Learner(rabi_shape, local_shape, params, final_loss=log[-1].gen_loss)
    return TrainingResult(learner, net, tuple(log), config, float(initial_loss))


def discriminator_accuracy(net: DiscriminatorNet, real, fake) -> float:
    """Fraction of samples classified correctly at the 0.5 threshold."""
    pr = np.atleast_1d(discriminator_forward(net, real))
    pf = np.atleast_1d(discriminator_forward(net, fake))
    correct = (pr > 0.5).sum() + (pf <= 0.5).sum()
    return float(correct) / (pr.size + pf.size)


LEARNER_FORMAT = "rydgan-learner"
LEARNER_VERSION = 1


def save_learner(result: TrainingResult, path: str):
    """Persist a training result as a versioned JSON text document."""
    learner, params = result.learner, result.learner.params
    config = asdict(result.config)
    config["limits"] = asdict(result.config.limits)
    doc = {
        "format": LEARNER_FORMAT,
        "version": LEARNER_VERSION,
        "rabi_shape": learner.rabi_shape,
        "local_shape": learner.local_shape,
        "params": {
            "positions_um": [list(p) for p in params.arrangement.positions],
            "couplings": list(params.arrangement.couplings),
            "rabi_param_rad_per_us": params.rabi_param,
            "local_param_rad_per_us": params.local_param,
            "global_detuning_rad_per_us": params.global_detuning_offset,
            "duration_us": params.duration,
            "rabi_gain": params.rabi_gain,
            "local_shift_rad_per_us": params.local_shift,
        },
        "final_loss": learner.final_loss,
        "initial_loss": result.initial_loss,
        "validation_fid": learner.validation_fid,
        "discriminator": {name: arr.tolist()
                          for name, arr in result.net.as_dict().items()},
        "config": config,
        "rng_seed": result.config.master_seed,
        "log": [asdict(row) for row in result.log],
    }
    atomic_write_text(path, json.dumps(doc, indent=1))


def load_learner(path: str) -> TrainingResult:
    try:
        with open(path, "r", encoding="utf-8") as f:
            doc = json.load(f)
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not a valid learner file: {exc}") from exc
    if doc.get("format") != LEARNER_FORMAT:
        raise DataError(f"{path}: not a {LEARNER_FORMAT} document")
    if doc.get("version") != LEARNER_VERSION:
        raise DataError(f"{path}: unsupported version {doc.get('version')}")
    try:
        p = doc["params"]
        params = GeneratorParams(
            arrangement=AtomArrangement(
                tuple(tuple(q) for q in p["positions_um"]),
                tuple(p["couplings"])),
            rabi_shape=doc["rabi_shape"], rabi_param=p["rabi_param_rad_per_us"],
            local_shape=doc["local_shape"],
            local_param=p["local_param_rad_per_us"],
            global_detuning_offset=p["global_detuning_rad_per_us"],
            duration=p["duration_us"], rabi_gain=p["rabi_gain"],
            local_shift=p["local_shift_rad_per_us"])
        cfg = dict(doc["config"])
        cfg["limits"] = PulseLimits(**cfg["limits"])
        cfg["stage_order"] = tuple(cfg["stage_order"])
        config = TrainConfig(**cfg)
        net = DiscriminatorNet(**{name: np.array(arr) for name, arr in
                                  doc["discriminator"].items()})
        learner = Learner(doc["rabi_shape"], doc["local_shape"], params,
                          doc["final_loss"], doc.get("validation_fid"))
        log = tuple(StageLog(**row) for row in doc.get("log", []))
    except (KeyError, TypeError) as exc:
        raise DataError(f"{path}: malformed learner document: {exc}") from exc
    return TrainingResult(learner, net, log, config, doc.get("initial_loss"))
