from .problems import HS_IDS, aniso_exp, get_problem, hs_problem, problem_names, rosenbrock
from .runner import (BenchmarkCase, BenchmarkResult, NoiseSpec, aggregate, default_suite, emit_table,
                     exact_criticality_oracle, noise_sweep, run_benchmark)
