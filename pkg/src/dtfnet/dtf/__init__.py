"""Trend point detection: environment, reward, agents and trend extraction."""

from .trend import interpolate_trend
from .env import (
    Episode,
    TrendEnv,
    WindowInfeasible,
    brute_force_dtp,
    compute_reward,
    encode_state,
    env_step,
    positional_encoding,
    sample_episode,
    select_reward_steps,
)
from .agents import PolicyModel, PpoConfig, TrainResult, alt_agent_train, ppo_loss, ppo_train, train_agent
from .extract import extract_trend, policy_actions

__all__ = [
    "Episode",
    "PolicyModel",
    "PpoConfig",
    "TrainResult",
    "TrendEnv",
    "WindowInfeasible",
    "alt_agent_train",
    "brute_force_dtp",
    "compute_reward",
    "encode_state",
    "env_step",
    "extract_trend",
    "interpolate_trend",
    "policy_actions",
    "positional_encoding",
    "ppo_loss",
    "ppo_train",
    "sample_episode",
    "select_reward_steps",
    "train_agent",
]
