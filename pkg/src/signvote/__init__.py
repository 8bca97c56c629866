"""signSGD and Signum with majority vote over 1-bit sign vectors."""
from .codec import SignVector, VoteTally, majority_sum, pack, take_sign, tally_sign, unpack
from .optim import OptimizerConfig, Worker, run_round
from .aggregation import VoteServer, vote_outcome_distribution

__version__ = "0.1.0"

__all__ = [
    "SignVector", "VoteTally", "majority_sum", "pack", "take_sign", "tally_sign", "unpack",
    "OptimizerConfig", "Worker", "run_round", "VoteServer", "vote_outcome_distribution",
]
