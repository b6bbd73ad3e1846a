"""
Configuration models and the INI config-file format.

A config file has up to three sections: ``[run]`` holds the top-level
RunConfig fields, ``[agent]`` the AgentConfig fields and ``[optimizer]`` the
OptimizerConfig fields. For example::

    [run]
    n_qubits = 2
    episodes = 400
    seed = 1

    [agent]
    hidden_layers = 64, 64
    learning_rate = 0.001

Unknown sections and unknown keys are rejected.
"""

import configparser
import os
from typing import Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

#: Environment variables consulted for defaults.
OUTPUT_ROOT_ENV = "QSYNTH_OUTPUT_ROOT"
THREADS_ENV = "QSYNTH_THREADS"


class _Config(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class OptimizerConfig(_Config):
    """
    Settings for the BFGS minimizer.
    """

    #: BFGS iterations allowed per restart.
    max_iters: int = Field(500, ge=1)
    #: Central-difference step, in radians.
    grad_step: float = Field(1e-5, gt=0.0)
    #: Stop once the gradient norm falls below this.
    tol: float = Field(1e-8, ge=0.0)
    #: Number of starts; the first is the caller's initial point, the rest are
    #: uniform in [-pi, pi].
    restarts: int = Field(3, ge=1)
    #: Seed for the restart points.
    seed: int = 0
    #: Skip the remaining restarts once the objective is at or below this.
    early_stop: float = 1e-12


class AgentConfig(_Config):
    """
    Hyperparameters of the DDQN agent and its training schedules.
    """

    gamma: float = Field(0.95, gt=0.0, lt=1.0)
    epsilon_start: float = Field(1.0, ge=0.0, le=1.0)
    epsilon_end: float = Field(0.05, ge=0.0, le=1.0)
    #: Episodes over which epsilon is annealed linearly.
    epsilon_episodes: int = Field(1000, ge=0)
    #: Probability that an exploratory action is drawn from the top_q actions.
    p_prior: float = Field(0.5, ge=0.0, le=1.0)
    top_q: int = Field(3, ge=1)
    #: Infidelity threshold at the start of training.
    threshold_start: float = Field(0.5, gt=0.0, le=1.0)
    threshold_target: float = Field(0.01, gt=0.0, le=1.0)
    threshold_decay: float = Field(0.8, gt=0.0, lt=1.0)
    #: Success rate over the window needed to tighten the threshold.
    success_criterion: float = Field(0.9, ge=0.0, le=1.0)
    success_window: int = Field(50, ge=1)
    cin_start: float = Field(1.0, ge=0.0)
    cin_factor: float = Field(0.5, ge=0.0, lt=1.0)
    #: Episodes at the target threshold between c_in reductions.
    cin_period: int = Field(500, ge=1)
    reward_scale: float = Field(1.0, gt=0.0)
    batch_size: int = Field(64, ge=1)
    buffer_capacity: int = Field(100_000, ge=1)
    tau: float = Field(0.01, ge=0.0, le=1.0)
    #: Network updates per recorded transition.
    updates_per_step: int = Field(1, ge=0)
    hidden_layers: Tuple[int, ...] = (512, 512)
    learning_rate: float = Field(1e-4, gt=0.0)

    @field_validator("hidden_layers", mode="before")
    @classmethod
    def _split_layers(cls, value):
        if isinstance(value, str):
            return tuple(int(part) for part in value.replace(",", " ").split())
        return value

    @field_validator("hidden_layers")
    @classmethod
    def _positive_layers(cls, value):
        if any(size < 1 for size in value):
            raise ValueError(f"hidden layer sizes must be positive; got {value}")
        return value

    @model_validator(mode="after")
    def _ordered_schedules(self):
        if self.epsilon_end > self.epsilon_start:
            raise ValueError("epsilon_end must not exceed epsilon_start")
        if self.threshold_target > self.threshold_start:
            raise ValueError("threshold_target must not exceed threshold_start")
        return self


class RunConfig(_Config):
    """
    A complete training run.
    """

    n_qubits: int = Field(ge=1, le=10)
    graph: Literal["unrestricted", "line", "manila", "quito"] = "unrestricted"
    episodes: int = Field(2000, ge=0)
    #: Maximum actions per episode; defaults to 3 * n_qubits.
    max_actions: Optional[int] = Field(None, ge=1)
    seed: int = 0
    #: Probability that a training target is fully entangled.
    entangled_fraction: float = Field(0.5, ge=0.0, le=1.0)
    #: Episodes between checkpoints; 0 writes only the final checkpoint.
    checkpoint_every: int = Field(500, ge=0)
    log_every: int = Field(100, ge=1)
    output_dir: Optional[str] = None
    agent: AgentConfig = Field(default_factory=AgentConfig)
    optimizer: OptimizerConfig = Field(default_factory=OptimizerConfig)

    @property
    def resolved_max_actions(self):
        return self.max_actions if self.max_actions is not None else 3 * self.n_qubits


_SECTIONS = ("run", "agent", "optimizer")


def parse_config(text):
    """
    Parse INI text into a RunConfig.

    Raises
    ------
    ValueError
        For malformed INI text and unknown sections; pydantic.ValidationError
        (a ValueError) for unknown keys, missing required keys and
        out-of-range values.
    """
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ValueError(f"malformed config file: {exc}") from None
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ValueError(f"unknown config section [{section}]")
    data = dict(parser["run"]) if parser.has_section("run") else {}
    for section in ("agent", "optimizer"):
        if parser.has_section(section):
            data[section] = dict(parser[section])
    return RunConfig.model_validate(data)


def load_config(path):
    with open(path, encoding="utf-8") as f:
        return parse_config(f.read())


def _ini_value(value):
    if isinstance(value, tuple):
        return ", ".join(str(v) for v in value)
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def format_config(config):
    """
    Resolved INI snapshot of a RunConfig; parse_config inverts it.
    """
    sections = {
        "run": config.model_dump(exclude={"agent", "optimizer"}),
        "agent": config.agent.model_dump(),
        "optimizer": config.optimizer.model_dump(),
    }
    lines = []
    for name in _SECTIONS:
        lines.append(f"[{name}]")
        lines.extend(
            f"{key} = {_ini_value(value)}"
            for key, value in sections[name].items()
            if value is not None
        )
        lines.append("")
    return "\n".join(lines)


def write_config(config, path):
    with open(path, "w", encoding="utf-8") as f:
        f.write(format_config(config))


def default_output_root():
    return os.environ.get(OUTPUT_ROOT_ENV, "runs")


def default_threads():
    value = os.environ.get(THREADS_ENV)
    if value is None:
        return 1
    threads = int(value)
    if threads < 1:
        raise ValueError(f"{THREADS_ENV} must be a positive integer; got {value}")
    return threads
