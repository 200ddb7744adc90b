"""Constants for window geometry, physical defaults and report fixtures."""

# Window geometry
HORIZON = 6  # H: future frames predicted per window
BLOCK_SIZE = 33  # S: wrench samples per frame block
WINDOW_LENGTH = HORIZON * BLOCK_SIZE  # T = 198
CHANNELS = 6  # D: both sensors' three axes concatenated
VELOCITY_DIMS = 3  # (v_x, v_y, omega_z)

# Rates
WRENCH_RATE_HZ = 1000.0
FRAME_RATE_HZ = 30.0
SIM_DT = 1.0 / WRENCH_RATE_HZ

# Physics
GRAVITY = 9.81
PAYLOADS_KG = (0.0, 1.0, 3.0, 4.0)
REPETITIONS = 3

# Motion primitives
PRIMITIVE_KINDS = (
    "forward",
    "backward",
    "left",
    "right",
    "leader-rot-cw",
    "leader-rot-ccw",
    "follower-rot-cw",
    "follower-rot-ccw",
)
TRANSLATION_KINDS = PRIMITIVE_KINDS[:4]

# Diffusion
COSINE_OFFSET = 0.008
MAX_BETA = 0.999
TIME_EMBED_BASE = 10000.0
ENTROPY_FLOOR = 1e-12
LAYER_NORM_EPS = 1e-5

# Adam
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

# Planar locomotion environment
ENV_DT = 0.02
FORCE_SCALE = 50.0
TORQUE_SCALE = 10.0
FRICTION_GAIN = 50.0  # c in the friction law -mu*c*v
PAYLOAD_DRAG_GAIN = 1.0  # k_p
PAYLOAD_BIAS_GAIN = 0.05
BASE_MASS_KG = 10.0
GAIT_PERIOD_S = 0.8
SPEED_CAP = 0.8
YAW_RATE_CAP = 0.5
ACTOR_OBS_DIM = 13
CRITIC_OBS_DIM = 16
ACTION_DIM = 3

# Reward scales
REWARD_LIN_SCALE = 1.0
REWARD_YAW_SCALE = 0.5
REWARD_ACTION_RATE_SCALE = -0.01
REWARD_ALIVE = 0.15
REWARD_SIGMA = 0.25

# Container
CONTAINER_MAGIC = b"CCRY"
CONTAINER_VERSION = 1
LOG_FORMAT = "cocarry-dyadlog"
LOG_VERSION = 1

# Comparison table fixtures as printed (human-human, human-humanoid).
TABLE_I_FIXTURES = (
    ("Completion Time (s)", "23.78", "51.47"),
    ("Trajectory Deviation (m)", "0.1109", "0.1294"),
    ("Velocity Difference (m/s)", "0.165", "0.143"),
    ("Average Follower Force (N)", "17.355", "16.230"),
)
