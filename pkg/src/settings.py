# Numerical tolerances
HERMITIAN_TOL = 1e-12           # relative to max|entries|
RECONSTRUCTION_TOL = 1e-9       # ‖H − UεU†‖_max relative to ‖H‖_max
UNITARITY_TOL = 1e-10
COMMUTATOR_TOL = 1e-10          # relative to ‖H₀‖_max
ENTROPY_CLIP = 1e-12
NEGATIVE_EIGENVALUE_TOL = 1e-8
STATE_NORM_TOL = 1e-12
DENSITY_TRACE_TOL = 1e-10
GENERATOR_EIGENVALUE_TOL = 1e-8  # distance of a generator eigenvalue from an integer

# Noise defaults (energies in units of J)
DEFAULT_OMEGA_CUTOFF = 1e-2
COMPOSITE_QUAD_REL_TOL = 1e-8
COMPOSITE_QUAD_LIMIT = 200

# Bloch-Redfield construction
BIN_TOL_REL = 1e-8              # secular binning tolerance, fraction of the spectral range
MATRIX_ELEMENT_CUTOFF = 1e-12   # |⟨i|A|f⟩| below this is treated as zero
VALIDITY_THRESHOLD = 0.1        # max Γ_if/|ω_if| for the golden-rule regime
DENSE_SUPEROPERATOR_MAX_DIM = 32
SUPEROPERATOR_NNZ_WARNING = 50_000_000

# Integrator defaults (times in 1/J)
DEFAULT_REL_TOL = 1e-8
DEFAULT_ABS_TOL = 1e-10
DEFAULT_MAX_STEP = 0.05
MIN_STEP = 1e-12
TRACE_TOL = 1e-8
HERMITICITY_TOL = 1e-8
BREACH_FACTOR = 10.0            # abort once an invariant is off by this multiple of its tolerance
MAX_SNAPSHOTS = 512

# Default output grid, log-spaced
DEFAULT_GRID_POINTS = 400
DEFAULT_GRID_T_MIN = 1e-1
DEFAULT_GRID_T_MAX = 1e3

# Model defaults
DEFAULT_J = 1.0
DEFAULT_MU = 0.5                # U(1) quench mass
DEFAULT_MU_SCARS = 0.0
DEFAULT_H_VIOLATION = 0.54      # Z2 field for gauge-violation runs
DEFAULT_H_DFL = 1.5             # Z2 field for localization runs
DEFAULT_ETAS = (1.0, 1.0, 1.0, 1.0)

# Scaling fits
FIT_WINDOW_START = 0.5
FIT_WINDOW_END = 5.0
FIT_PLATEAU_FRACTION = 0.1
FIT_MIN_STEPS = 3
FIT_MIN_RUNS = 3

# Harness
DEFAULT_OUTPUT_ROOT = "runs"
DEFAULT_WORKERS = 1
ENV_WORKERS = "LGP_WORKERS"
ENV_OUTPUT_ROOT = "LGP_OUTPUT_ROOT"
ENV_LOG_LEVEL = "LGP_LOG_LEVEL"
CSV_FLOAT_FORMAT = "{:.17g}"
INDEX_FILE_NAME = "index.csv"
