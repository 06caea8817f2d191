"""Particle swarm minimization over the unit box.

Each particle carries a position, a velocity and its personal best. One
generation updates every velocity::

    v <- inertia * v + U(0, phi2) * (gbest - x) + U(0, phi1) * (pbest - x)

clamps each component's magnitude into ``[v_min, v_max]``, moves
``x <- clip(x + v, 0, 1)`` and re-evaluates the objective. Random draws for a
generation are taken from the seeded stream before any evaluation, so the
outcome does not depend on how evaluations are scheduled.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import NumericError, ValidationError
from .hyperspace import clamp, sample_uniform

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PsoConfig:
    n_particles: int = 10
    generations: int = 5
    phi1: float = 1.5  # personal-best acceleration
    phi2: float = 2.0  # global-best acceleration
    v_min: float = 0.0
    v_max: float = 1.0
    inertia: float = 1.0
    eval_budget: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.n_particles < 1:
            raise ValidationError("n_particles must be >= 1")
        if self.generations < 0:
            raise ValidationError("generations must be >= 0")
        if self.phi1 < 0 or self.phi2 < 0:
            raise ValidationError("acceleration constants must be non-negative")
        if not 0 <= self.v_min <= self.v_max:
            raise ValidationError("need 0 <= v_min <= v_max")
        if self.eval_budget is not None and self.eval_budget < 1:
            raise ValidationError("eval_budget must be >= 1 when given")

    @property
    def planned_evaluations(self):
        full = self.n_particles * (1 + self.generations)
        return full if self.eval_budget is None else min(full, self.eval_budget)


@dataclass
class Particle:
    position: np.ndarray
    velocity: np.ndarray
    pbest: np.ndarray
    pbest_score: float = math.inf
    score: float = math.inf


@dataclass
class Swarm:
    particles: list[Particle]
    gbest: np.ndarray
    gbest_score: float
    generation: int = 0
    n_evaluations: int = 0


@dataclass
class Evaluation:
    generation: int
    particle: int
    position: np.ndarray
    score: float


@dataclass
class PsoResult:
    best: np.ndarray
    best_score: float
    trace: list[float]
    swarm: Swarm = field(repr=False)
    evaluations: list[Evaluation] = field(repr=False, default_factory=list)

    @property
    def n_evaluations(self):
        return len(self.evaluations)


def _check_score(score, generation, index):
    score = float(score)
    # +inf is an accepted penalty (e.g. a diverged training run); NaN and -inf are not
    if math.isnan(score) or score == -math.inf:
        raise NumericError(f"objective returned {score} for particle {index} in generation {generation}")
    return score


def _evaluate(objective, positions, mapper):
    if mapper is None:
        return [objective(p) for p in positions]
    return list(mapper(objective, positions))


def _refresh_gbest(swarm: Swarm, indices):
    # lowest index wins exact ties; gbest only moves on strict improvement
    for k in indices:
        p = swarm.particles[k]
        if p.pbest_score < swarm.gbest_score:
            swarm.gbest_score = p.pbest_score
            swarm.gbest = p.pbest.copy()


def init_swarm(space, cfg: PsoConfig, objective: Callable, rng=None, mapper=None,
               log_to: list | None = None) -> Swarm:
    """Sample positions uniformly, zero velocities, evaluate every particle once."""
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    dim = space if isinstance(space, int) else len(space)
    positions = [sample_uniform(dim, rng) for _ in range(cfg.n_particles)]
    budget = cfg.n_particles if cfg.eval_budget is None else min(cfg.n_particles, cfg.eval_budget)
    scores = _evaluate(objective, positions[:budget], mapper)
    particles = []
    for k, x in enumerate(positions):
        p = Particle(position=x, velocity=np.zeros(dim), pbest=x.copy())
        if k < budget:
            p.score = p.pbest_score = _check_score(scores[k], 0, k)
            if log_to is not None:
                log_to.append(Evaluation(0, k, x.copy(), p.score))
        particles.append(p)
    swarm = Swarm(particles, particles[0].pbest.copy(), math.inf, 0, budget)
    _refresh_gbest(swarm, range(budget))
    return swarm


def velocity_update(p: Particle, gbest, cfg: PsoConfig, rng=None, u1=None, u2=None) -> np.ndarray:
    """New velocity of ``p``; ``u1``/``u2`` override the uniform draws when given."""
    dim = len(p.position)
    if u1 is None:
        u1 = rng.uniform(0.0, cfg.phi1, dim)
    if u2 is None:
        u2 = rng.uniform(0.0, cfg.phi2, dim)
    v = cfg.inertia * p.velocity + u2 * (gbest - p.position) + u1 * (p.pbest - p.position)
    return np.sign(v) * np.clip(np.abs(v), cfg.v_min, cfg.v_max)


def position_update(p: Particle) -> np.ndarray:
    return clamp(p.position + p.velocity)


def optimize(space, cfg: PsoConfig, objective: Callable, mapper=None,
             on_generation: Callable | None = None) -> PsoResult:
    """Minimize ``objective`` over the unit box.

    ``mapper`` may be any ``map``-like callable (e.g. ``executor.map``) used
    to evaluate a generation's particles. ``trace[g]`` is the global best
    score after generation ``g``, with generation 0 being the initial sample.
    """
    rng = np.random.default_rng(cfg.seed)
    evaluations: list[Evaluation] = []
    swarm = init_swarm(space, cfg, objective, rng, mapper, evaluations)
    trace = [swarm.gbest_score]
    if on_generation is not None:
        on_generation(0, swarm)
    remaining = cfg.planned_evaluations - swarm.n_evaluations
    n, dim = cfg.n_particles, len(swarm.gbest)

    for gen in range(1, cfg.generations + 1):
        if remaining <= 0:
            break
        u1 = rng.uniform(0.0, cfg.phi1, (n, dim))
        u2 = rng.uniform(0.0, cfg.phi2, (n, dim))
        movers = list(range(min(n, remaining)))
        gbest = swarm.gbest.copy()
        for k in movers:
            p = swarm.particles[k]
            p.velocity = velocity_update(p, gbest, cfg, u1=u1[k], u2=u2[k])
            p.position = position_update(p)
        scores = _evaluate(objective, [swarm.particles[k].position for k in movers], mapper)
        for k, s in zip(movers, scores):
            p = swarm.particles[k]
            p.score = _check_score(s, gen, k)
            evaluations.append(Evaluation(gen, k, p.position.copy(), p.score))
            if p.score < p.pbest_score:
                p.pbest_score = p.score
                p.pbest = p.position.copy()
        _refresh_gbest(swarm, movers)
        swarm.generation = gen
        swarm.n_evaluations += len(movers)
        remaining -= len(movers)
        trace.append(swarm.gbest_score)
        log.debug("generation %d: gbest %.6g", gen, swarm.gbest_score)
        if on_generation is not None:
            on_generation(gen, swarm)

    return PsoResult(swarm.gbest.copy(), swarm.gbest_score, trace, swarm, evaluations)


def write_trace_csv(result: PsoResult, path, describe: Callable | None = None) -> None:
    """One row per generation: ``generation, gbest_score, gbest``.

    The best position of each generation is recovered from the evaluation log;
    ``describe`` turns it into text (defaults to the raw coordinates).
    """
    best_pos, best = None, math.inf
    by_gen: dict[int, np.ndarray] = {}
    for e in sorted(result.evaluations, key=lambda e: (e.generation, e.particle)):
        if e.score < best:
            best, best_pos = e.score, e.position
        by_gen[e.generation] = best_pos
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["generation", "gbest_score", "gbest"])
        for g, score in enumerate(result.trace):
            pos = by_gen.get(g)
            if pos is None:
                text = ""
            elif describe is not None:
                text = describe(pos)
            else:
                text = " ".join(f"{c:.6f}" for c in pos)
            writer.writerow([g, repr(float(score)), text])
