"""Monte-Carlo execution of purification protocols on Bell-labeled ensembles."""
from .ensemble import (AdversarialPermutation, BlockCorrelated, IidBellDiagonal, PairEnsemble,
                       channel_from_config, channel_to_config, distribute)
from .parties import ClassicalChannel, Lab, Message, Party
from .runner import (RoundStats, Session, TestResult, TrialReport, rejection_round, run_error_test,
                     run_protocol)
from .sampling import (DESK_GRID, SamplingBoundQuery, SamplingReport, sample_size_bound, sampling_bound,
                       verify_sampling_bound)

__all__ = [
    "AdversarialPermutation", "BlockCorrelated", "ClassicalChannel", "DESK_GRID", "IidBellDiagonal", "Lab",
    "Message", "PairEnsemble", "Party", "RoundStats", "SamplingBoundQuery", "SamplingReport", "Session",
    "TestResult", "TrialReport", "channel_from_config", "channel_to_config", "distribute", "rejection_round",
    "run_error_test", "run_protocol", "sample_size_bound", "sampling_bound", "verify_sampling_bound",
]
