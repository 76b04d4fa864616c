from .region import (DEFAULT_POINTS, Frontier, RegionReport, TestChannelPair, WynerZivResult,
                     brute_force_frontier_oracle, four_way_joint, frontier_gap, hamming_table,
                     kernel_grid, optimal_reconstruction, pair_distortion, region_sweep,
                     simplex_grid, theorem_bounds, wyner_ziv_specialize)
from .system import Decoder, Encoder, RateTriple, SystemResult, code_rate, simulate_system
from .codes import compose_reconstruction, covering_code
