"""The quantum generator: seed + trainable parameters -> feature vector.

One generator run builds the Rabi and local-detuning pulses with the seed
injected into both (a single scalar in [0.1, 1] shared by the pair, scaled
to each drive's full range), evolves the ground state under the resulting
Hamiltonian, and maps the outcome probabilities to features with a modulo
operation so each feature can take any value in (0, 1/2^n] independently
of the others.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ValidationError
from .pulses import DEFAULT_LIMITS, SHAPES, PulseLimits, PulseProgram
from .sim import (AtomArrangement, C6_DEFAULT, HamiltonianSpec, evolve,
                  ground_state, probabilities, sample_shots)

SEED_LO, SEED_HI = 0.1, 1.0


@dataclass(frozen=True)
class GeneratorParams:
    """Trainable state of one learner.

    rabi_gain and local_shift are identity by default; the hardware-error
    model writes perturbed copies through them (multiplicative on the Rabi
    waveform, additive on the local-detuning waveform before the per-atom
    coupling weight).
    """

    arrangement: AtomArrangement
    rabi_shape: str
    rabi_param: float
    local_shape: str
    local_param: float
    global_detuning_offset: float
    duration: float = 1.0
    rabi_gain: float = 1.0
    local_shift: float = 0.0

    @property
    def n_qubits(self) -> int:
        return self.arrangement.n_atoms

    def validate(self, limits: PulseLimits = DEFAULT_LIMITS,
                 min_spacing: float = 4.0, field_size: float = 75.0):
        """Raise ValidationError unless every parameter is hardware-legal."""
        self.arrangement.check_geometry(min_spacing, field_size)
        for shape, what in ((self.rabi_shape, "rabi"), (self.local_shape, "local")):
            if shape not in SHAPES:
                raise ValidationError(f"unknown {what} pulse shape {shape!r}")
            if shape == "constant":
                raise ValidationError(
                    f"{what} pulse cannot be constant: it must start and end at 0")
        if not 0.0 <= self.rabi_param <= limits.omega_max:
            raise ValidationError(
                f"rabi_param {self.rabi_param} outside [0, {limits.omega_max}]")
        if not limits.local_detuning_min <= self.local_param <= 0.0:
            raise ValidationError(
                f"local_param {self.local_param} outside "
                f"[{limits.local_detuning_min}, 0]")
        if abs(self.global_detuning_offset) > limits.global_detuning_abs:
            raise ValidationError(
                f"global detuning {self.global_detuning_offset} outside "
                f"+-{limits.global_detuning_abs}")
        if not self.duration > 0:
            raise ValidationError(f"duration must be positive, got {self.duration}")


@dataclass(frozen=True)
class ErrorModel:
    """Gaussian hardware-error model: one perturbation per quantum run.

    Detunings (global and local) receive independent additive N(0, sigma)
    shifts, the Rabi waveform a multiplicative N(1, sigma) factor, and
    every atom coordinate an independent additive N(0, sigma) shift.
    """

    detuning_sigma: float = 0.1    # rad/us
    rabi_rel_sigma: float = 0.01   # dimensionless
    position_sigma: float = 0.1    # um
    rng_seed: int = 0

    def __post_init__(self):
        for name in ("detuning_sigma", "rabi_rel_sigma", "position_sigma"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be >= 0")


@dataclass(frozen=True)
class ExactMode:
    """Probabilities read directly from the final state."""


@dataclass(frozen=True)
class ShotsMode:
    """Probabilities estimated from projective-measurement frequencies."""

    shots: int = 1000
    rng_seed: int = 0


@dataclass(frozen=True)
class NoisyMode:
    """Parameters perturbed by an ErrorModel before a fresh exact/shots run."""

    model: ErrorModel
    submode: object = field(default_factory=ExactMode)


EXACT = ExactMode()


def build_spec(params: GeneratorParams, seed: float,
               limits: PulseLimits = DEFAULT_LIMITS,
               c6: float = C6_DEFAULT,
               ramp_fraction: float = 0.05) -> HamiltonianSpec:
    """Instantiate the Hamiltonian for one seed value.

    The shared scalar seed u is injected into both pulses scaled to each
    drive's full range, so seed_noise = u * omega_max for the Rabi pulse
    and u * local_detuning_min (negative) for the local-detuning pulse.
    """
    rabi = PulseProgram(shape=params.rabi_shape, kind="rabi",
                        param=params.rabi_param,
                        seed_noise=seed * limits.omega_max,
                        duration=params.duration, ramp_fraction=ramp_fraction)
    local = PulseProgram(shape=params.local_shape, kind="local_detuning",
                         param=params.local_param,
                         seed_noise=seed * limits.local_detuning_min,
                         duration=params.duration, ramp_fraction=ramp_fraction)
    return HamiltonianSpec(arrangement=params.arrangement, rabi=rabi,
                           local_detuning=local,
                           global_detuning_offset=params.global_detuning_offset,
                           c6=c6, rabi_scale=params.rabi_gain,
                           local_detuning_shift=params.local_shift)


def modulo_encode(probs) -> np.ndarray:
    """Map probabilities to features f_i = p_i mod 1/2^n, upper-closed.

    A remainder of exactly zero with p_i > 0 wraps to the interval top
    1/2^n; p_i = 0 (possible only for degenerate, dynamics-free runs) maps
    to 0.
    """
    p = np.asarray(probs, dtype=float)
    if p.ndim != 1 or len(p) < 2 or (len(p) & (len(p) - 1)) != 0:
        raise ValidationError(
            f"expected a 2^n-length probability vector, got shape {p.shape}")
    if (p < 0).any():
        raise ValidationError(f"negative probability: min {p.min()!r}")
    if abs(p.sum() - 1.0) > 1e-6:
        raise ValidationError(f"probabilities sum to {p.sum()!r}, expected 1")
    width = 1.0 / len(p)
    r = np.mod(p, width)
    return np.where(r > 0.0, r, np.where(p > 0.0, width, 0.0))


def perturb_params(params: GeneratorParams, model: ErrorModel) -> GeneratorParams:
    """Fresh copy of params with one draw of the hardware-error model.

    Draw order (fixed for reproducibility): global detuning shift, local
    waveform shift, Rabi gain factor, then x/y per atom. The perturbed
    copy deliberately skips geometry re-validation: physical noise may
    push positions slightly past nominal tolerances.
    """
    rng = np.random.default_rng(model.rng_seed)
    d_global = rng.normal(0.0, model.detuning_sigma)
    d_local = rng.normal(0.0, model.detuning_sigma)
    gain = rng.normal(1.0, model.rabi_rel_sigma)
    offsets = rng.normal(0.0, model.position_sigma,
                         size=(params.arrangement.n_atoms, 2))
    positions = tuple((x + offsets[i, 0], y + offsets[i, 1])
                      for i, (x, y) in enumerate(params.arrangement.positions))
    arrangement = AtomArrangement(positions, params.arrangement.couplings)
    return replace(params,
                   arrangement=arrangement,
                   global_detuning_offset=params.global_detuning_offset + d_global,
                   local_shift=params.local_shift + d_local,
                   rabi_gain=params.rabi_gain * gain)


def generate_features(params: GeneratorParams, seed: float, mode=EXACT,
                      limits: PulseLimits = DEFAULT_LIMITS,
                      c6: float = C6_DEFAULT,
                      steps: int | None = None) -> np.ndarray:
    """Run the analog computation for one seed and encode its features.

    Deterministic for fixed (params, seed, mode); the stored params are
    never mutated, noisy runs perturb a per-invocation copy.
    """
    if not SEED_LO - 1e-12 <= seed <= SEED_HI + 1e-12:
        raise ValidationError(
            f"seed {seed} outside legal range [{SEED_LO}, {SEED_HI}]")
    if isinstance(mode, NoisyMode):
        perturbed = perturb_params(params, mode.model)
        return generate_features(perturbed, seed, mode.submode, limits, c6, steps)
    spec = build_spec(params, seed, limits, c6)
    state = evolve(ground_state(params.n_qubits), spec,
                   duration=params.duration, steps=steps)
    if isinstance(mode, ShotsMode):
        counts = sample_shots(state, mode.shots, mode.rng_seed)
        p = counts / mode.shots
    elif isinstance(mode, ExactMode):
        p = probabilities(state)
    else:
        raise ValidationError(f"unknown generation mode {mode!r}")
    return modulo_encode(p)


def draw_seeds(rng: np.random.Generator, count: int) -> np.ndarray:
    """Sample generator input seeds uniformly from the legal range."""
    return rng.uniform(SEED_LO, SEED_HI, size=count)
