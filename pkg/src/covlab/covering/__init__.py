from .construction import (DEFAULT_M_CAP, Assignment, Codebook, CoverChoice, CoveringConfig,
                           CoveringReport, PropositionReport, TrialResult, assign_codewords,
                           check_covering_inequality, codebook_size, covering_inequality_grid,
                           covering_map, evaluate_codebook_exact, monte_carlo_covering,
                           proposition_reduction, sample_codebook, select_codewords)
from .eta import CoveringProblem, Estimate, delta_n, eta1, eta2, in_t1, in_t2, keyed
from .sets import AcceptanceSet, DistortionMeasure
from .two_sided import (TwoSidedConfig, TwoSidedProblem, TwoSidedReport, TwoSidedTrial,
                        index_mutual_information, two_sided_covering)
