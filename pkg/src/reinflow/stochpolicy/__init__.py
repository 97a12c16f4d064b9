from .noise import (
    NoiseConditioning,
    NoiseHead,
    NoiseSchedule,
    noise_bound_at,
    sigma_backward,
    sigma_forward,
)
from .policy import (
    ChainBatch,
    ChainLogprobResult,
    DenoisingChain,
    NoisyFlowPolicy,
    act_deterministic,
    chain_logprob,
    chain_logprob_batch,
    sample_chain,
    sample_chains,
    simulate_chains,
)

__all__ = [
    "ChainBatch",
    "ChainLogprobResult",
    "DenoisingChain",
    "NoiseConditioning",
    "NoiseHead",
    "NoiseSchedule",
    "NoisyFlowPolicy",
    "act_deterministic",
    "chain_logprob",
    "chain_logprob_batch",
    "noise_bound_at",
    "sample_chain",
    "sample_chains",
    "sigma_backward",
    "sigma_forward",
    "simulate_chains",
]
