"""Pruned neural decoders for short block codes over BPSK/AWGN."""

from .channel import ChannelParams, awgn, make_rng, modulate, noise_sigma, sample_batch
from .codec import (CodeName, CodeSpec, InvalidCodewordError, build_codebook, extract_message,
                    hamming_encode, is_codeword, polar_encode)
from .decoding import hard_decide, least_confident, ml_decode, semi_soft_decode
from .evaluation import (EvalReport, EvalRow, accuracy_vs_pruning, make_decoder, measure_accuracy,
                         measure_ber, sweep_snr)
from .neural import Adam, MaskedMlp, backward, bce_loss, forward, init_network, optimizer_step
from .pruning import (DegenerateLayerError, PruneMode, PruneSchedule, TicketTrajectory, magnitude_prune,
                      reset_to_init, run_lth, run_oneshot)
from .training import TrainConfig, TrainingDivergedError, TrainResult, train

__version__ = "0.1.0"
