from pathlib import Path

# 空间离散配置
DEFAULT_MODES = 32          # 保留的 Fourier 模数 K

# 噪声配置
DEFAULT_ALPHA = 1.8         # 稳定指数
DEFAULT_BETA = 0.8          # 谱衰减指数
DEFAULT_NOISE_AMPLITUDE = 1.0

# 模拟配置
DEFAULT_DT = 1e-3
DEFAULT_HORIZON = 10.0
DEFAULT_DELTA = 0.25        # H_delta 指数
DEFAULT_MOMENT_ORDER = 0.3  # p
DEFAULT_RECORD_STRIDE = 100
DEFAULT_SEED = 20240601
MAX_STEP_HALVINGS = 10      # Y 步最多折半次数
LARGE_DATA_MAX_HALVINGS = 20  # 大初值实验（|x0|_H 达 1000）使用
STABILITY_LIMIT = 2.0       # h * max|1 - 3u^2| 的上限

# 统计配置
CENSOR_HORIZON = 200        # 击中时间的截断整数时刻
BURN_IN_FRACTION = 0.1
LONG_RUN_HORIZON = 2000.0
MIN_TAIL_SAMPLES = 100
TAIL_FIT_MIN_COUNT = 10     # 生存函数拟合区间: P >= 10/N
COMPARISON_RTOL = 1e-6
RICCATI_SERIES_TOL = 1e-8   # |g0 - Kc| < tol * Kc 时使用线性化
BATCH_MEANS = 20

# 处理配置
DEFAULT_WORKERS = 4
BATCH_SIZE = 64             # 每个任务的轨迹数，与 worker 数无关
WORKERS_ENV = "GLSIM_WORKERS"
DEFAULT_OUTPUT_DIR = Path("reports")

# 退出码
EXIT_OK = 0
EXIT_PARAMETER = 2
EXIT_ESTIMATION = 3
EXIT_USAGE = 64
