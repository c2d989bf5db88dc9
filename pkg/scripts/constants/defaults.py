#!/usr/bin/env python3
"""
Simulation defaults.

Device and channel values of the reference simulation setup. Values
marked "local choice" were picked for this tool; every resolved value is
echoed into the output headers.
"""

# 能量收集效率、CPU 参数、噪声功率（用户与助手相同）
EH_EFFICIENCY = 0.6
SWITCH_CAPACITANCE = 1e-28      # J·s²/cycle³
CYCLES_PER_BIT = 1e3
NOISE_POWER = 1e-9              # W

BANDWIDTH = 1e6                 # Hz, per user-helper band
BLOCK_DURATION = 0.1            # s

# 路损模型: PL0 · d^-exponent
PATHLOSS_REF = 1e-3
PATHLOSS_EXPONENT = 3.0

# user-helper distances for the block-duration sweep
USER_HELPER_DISTANCES = (2.0, 3.0, 5.0)

# local choices
MAX_TX_POWER = 3.0              # W
ET_USER_DISTANCE = 5.0          # m
ET_HELPER_DISTANCE = 5.0        # m
RESULT_RATIO = 0.1              # β, output bits per input bit

# Solver numerics
LAMBDA_MIN = 1e-12
ELLIPSOID_RADIUS = 1e4
ELLIPSOID_VOL_TOL = 1e-10
ELLIPSOID_GAP_TOL = 1e-9
ELLIPSOID_ITER_PER_DIM = 20000
BARRIER_TOL = 1e-10
BARRIER_MU = 10.0
LINE_SEARCH_ALPHA = 0.25
LINE_SEARCH_BETA = 0.5

# 60 bit/s/Hz spectral-efficiency ceiling for bracketing bit counts
SPECTRAL_CEILING = 60.0

# Acceptance thresholds
GAP_TOL = 1e-4
ORACLE_TOL = 1e-3
KKT_TOL = 1e-6
FEASIBILITY_TOL = 1e-9
