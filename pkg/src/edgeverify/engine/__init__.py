"""Execution-phase actors, workloads and strategies."""
from .actors import Outsourcer, PoolVerifier, Worker, contractor_step, outsourcer_step, verifier_step
from .functions import ComputeFunction, grid_detector, identity, iterated_hash, make_function
from .qos import PeerStats, QosLedgerLocal, QosViolation, qos_check
from .sampling import PendingPair, PairIndexError, SamplingSchedule, compare_pair, sample_schedule
from .strategies import (CheatRate, Colluder, Honest, PaymentRefuser, QAlgorithm, SlowResponder,
                         SplitInput, parse_strategy)
