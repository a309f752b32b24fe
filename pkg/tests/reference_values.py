"""Reference numbers the acceptance suite compares against."""

# q(0.025), q(0.975) of the statistic by trajectory length.
QUANTILES = {10: (0.725, 2.626), 30: (0.754, 2.794), 100: (0.785, 2.873)}
ASYMPTOTIC_QUANTILES = (0.834, 2.940)

# Single-test power of each reference alternative at n=30, alpha=0.05.
TARGET_POWER = 0.80

# FDR (%) of the standard and adaptive collection procedures by m0/m.
M0_FRACS = (0.0, 0.2, 0.4, 0.6, 0.8)
FDR_STANDARD = (0.0, 1.0, 2.1, 3.2, 4.1)
FDR_ADAPTIVE_M100 = (0.0, 3.7, 4.2, 4.7, 4.8)

# Row percentages (truth x decision) on a labelled collection, m=200, m0/m=0.4.
CONFUSION_ADAPTIVE = ((96, 0, 4), (23, 77, 0), (10, 0, 90))
# MSD baseline: Brownian, Subdiffusion, Superdiffusion, NotMoving columns.
CONFUSION_MSD = ((19, 45, 36, 0), (0, 60, 0, 40), (3, 0, 97, 0))
