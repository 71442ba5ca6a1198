"""
Secret-key agreement and private channel coding with nested polar codes.

An inner polar code reconciles Alice's and Bob's sequences; an outer polar
code over ``M`` inner blocks extracts bits that are nearly uniform and
independent of Eve's view. The same construction run in reverse gives a
wiretap channel code.
"""

from .bitchan import (
    CodeSpec, EntropyProfile, InfeasibleError, SetPartition, bec_entropy_profile,
    construct_code, exact_entropy_profile, mc_entropy_profile, select_sets,
)
from .codec import sc_decode
from .evaluation import (
    exact_secrecy_l1, polarization_report, run_trials, secrecy_bound_chain,
    super_source_check,
)
from .pcc import pcc_decode, pcc_encode, transmit
from .polar import generator_matrix, inverse_transform, transform, transform_multilevel
from .probability import (
    Pmf, ValidationError, WiretapChannel, WiretapSource, bec_pair, bsc_cascade,
    conditional_entropy, entropy, mutual_information,
)
from .ska import ska_alice, ska_bob, run_ska

__version__ = "0.1.0"
