
# Numerical tolerances
TOLERANCE = 1e-9
CHANCE_SUM_TOLERANCE = 1e-9
SIGNAL_WEIGHT_TOLERANCE = 1e-6

# Oracle and learner caps
PROFILE_CAP = 10**6
MEMORY_ROW_CAP = 5 * 10**7

# mu = MU_FACTOR * |A(I)| * payoff range of the owner
MU_FACTOR = 2.0

# Artifacts
TRACE_FORMAT = "fcelab-trace"
TRACE_FORMAT_VERSION = 1
DEFAULT_OUTPUT_DIR = "runs"
TRACE_FILENAME = "trace.jsonl"
TRAJECTORY_FILENAME = "regrets.csv"
SUMMARY_FILENAME = "summary.json"

# Environment
SEED_ENV_VAR = "FCELAB_SEED"
LOG_LEVEL_ENV_VAR = "FCELAB_LOG_LEVEL"

BUILTIN_PREFIX = "builtin:"
PROCEDURES = ("fce", "efce", "afce")
