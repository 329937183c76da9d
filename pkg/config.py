# Configuration Settings for the Darcy-Benard Data Assimilation Toolkit

# Application Settings
APP_TITLE = "Darcy-Benard Data Assimilation"
APP_DESCRIPTION = "Temperature-only nudging for convection in porous media: twin experiments and sweeps"
VERSION = "1.0.0"

# Physical Defaults
DEFAULT_RA = 50.0
DEFAULT_GAMMA = 0.0
DEFAULT_LX = 2.0
DEFAULT_LY = 1.0
LZ = 1.0

# Numerics Defaults
MIN_MODES = 4
DEFAULT_NY = 1              # y-invariant slice
DEFAULT_RECORD_EVERY = 10
DEFAULT_T_SPINUP = 2.0
MAX_SPINUP_FACTOR = 10      # spin-up gives up after MAX_SPINUP_FACTOR * T_spinup
MAX_SPINUP_SUBCYCLES = 64
CFL_LIMIT = 0.5
MAX_PRINCIPLE_CFL = 0.25

# Assimilation Defaults
DEFAULT_INTERPOLANT = "FOURIER_LOWPASS"
INTERPOLANT_KINDS = ["FOURIER_LOWPASS", "VOLUME_AVERAGE", "NODAL"]
DEFAULT_NOISE_LEVEL = 0.0
DEFAULT_NOISE_SEED = 12345
DEFAULT_FIELD_SEED = 2015
DEFAULT_C_UNIVERSAL = 1.0
DEFAULT_C0_TRIALS = 100
C0_REFINE_ITERATIONS = 25
ABSORBING_BOUND = 2.0       # ||theta||_inf <= 2 marks entry into the absorbing regime

# Initial Data
INITIAL_PROFILES = ["default", "single_mode", "random"]
DEFAULT_THETA0_AMPLITUDE = 0.5
ASSIM_INITIAL_CHOICES = ["zero", "reference"]

# Rate Fitting
MIN_FIT_SAMPLES = 10
MONOTONE_JITTER = 0.05
FLOOR_RATIO = 1e-12         # samples below FLOOR_RATIO * initial error are round-off
STALL_RATIO = 10.0          # early fall needed before a flat tail counts as a stall; also the cut level
STALL_DROP = 2.0            # a final third falling by less than this factor is flat

# Output
CSV_COLUMNS = ["t", "xi_l2", "xi_h1", "w_l2", "theta_max", "eta_max"]
CSV_FLOAT_FORMAT = "%.17g"
SNAPSHOT_MAGIC = "darcy-da-snapshot v1"
SWEEP_AXES = ["mu", "h", "noise_level", "Ra"]

# Concurrency
THREADS_ENV_VAR = "DARCY_DA_THREADS"

# Visualization Settings
CHART_COLORS = ['#1f77b4', '#ff7f0e', '#2ca02c', '#d62728', '#9467bd']
CHART_HEIGHT = 400
CHART_WIDTH = 600
